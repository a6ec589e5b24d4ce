//! A small DAG runner for chaining stages through sealed containers.
//!
//! Workflow file:
//!
//! ```json
//! {"partitions": 4,
//!  "params": {"min_df": 2},
//!  "stages": [
//!    {"name": "weights", "op": "tfidf", "inputs": ["corpus.smc"], "outputs": ["weights.smc"]},
//!    {"name": "sim", "op": "similarity", "inputs": ["weights.smc"], "outputs": ["sim.smc"],
//!     "params": {"sim_threshold": 0.2}}
//!  ]}
//! ```
//!
//! Relative paths resolve against the workflow file's directory. Every stage
//! execution appends one line to the run log.

use std::collections::{HashMap, HashSet};
use std::fs::OpenOptions;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::{Error, Result};
use crate::params::Params;
use crate::pipeline::{self, StageCounts};

pub const OPS: &[&str] = &[
    "import",
    "export",
    "tfidf",
    "top-terms",
    "similarity",
    "cite-match",
    "classify-train",
    "classify-assign",
    "repartition",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StageSpec {
    pub name: String,
    pub op: String,
    #[serde(default)]
    pub inputs: Vec<PathBuf>,
    #[serde(default)]
    pub outputs: Vec<PathBuf>,
    /// Overrides on top of the workflow parameters. `partitions` is also
    /// accepted here.
    #[serde(default)]
    pub params: Map<String, Value>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorkflowConfig {
    #[serde(default = "one")]
    pub partitions: usize,
    #[serde(default)]
    pub params: Map<String, Value>,
    #[serde(default)]
    pub stages: Vec<StageSpec>,
    /// Run-log path; relative to the workflow directory.
    #[serde(default)]
    pub log: Option<PathBuf>,
}

fn one() -> usize {
    1
}

impl Default for WorkflowConfig {
    fn default() -> Self {
        WorkflowConfig {
            partitions: 1,
            params: Map::new(),
            stages: Vec::new(),
            log: None,
        }
    }
}

/// Per-stage entry of the execution report and the run log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageReport {
    pub name: String,
    /// Unix milliseconds.
    pub start: u64,
    pub end: u64,
    pub wall_ms: f64,
    pub in_count: usize,
    pub out_count: usize,
    pub status: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub stages: Vec<StageReport>,
}

impl WorkflowConfig {
    pub fn from_json_str(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::Config(e.to_string()))
    }

    /// Load a workflow file. Returns the config and the directory relative
    /// paths resolve against. The run log defaults to `<file>.runlog.jsonl`.
    pub fn load(path: impl AsRef<Path>) -> Result<(Self, PathBuf)> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_json_str(&text)?;
        if cfg.log.is_none() {
            let mut name = path.file_name().unwrap_or_default().to_os_string();
            name.push(".runlog.jsonl");
            cfg.log = Some(PathBuf::from(name));
        }
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok((cfg, base))
    }

    /// Check the config and return the stage execution order (indices into
    /// `stages`). Ready stages run in declaration order.
    pub fn plan(&self, base: &Path) -> Result<Vec<usize>> {
        if self.partitions == 0 {
            return Err(Error::Config("partitions must be at least 1".into()));
        }
        let mut names = HashSet::new();
        let mut producer: HashMap<PathBuf, usize> = HashMap::new();
        for (i, s) in self.stages.iter().enumerate() {
            if !names.insert(s.name.as_str()) {
                return Err(Error::Config(format!("duplicate stage name {:?}", s.name)));
            }
            if !OPS.contains(&s.op.as_str()) {
                return Err(Error::Config(format!("stage {:?}: unknown op {:?}", s.name, s.op)));
            }
            let (ins, outs) = arity(&s.op);
            if s.inputs.len() != ins || s.outputs.len() != outs {
                return Err(Error::Config(format!(
                    "stage {:?}: op {} takes {ins} input(s) and {outs} output(s)",
                    s.name, s.op
                )));
            }
            let inputs: HashSet<PathBuf> = s.inputs.iter().map(|p| resolve(base, p)).collect();
            for o in &s.outputs {
                let o = resolve(base, o);
                if inputs.contains(&o) {
                    return Err(Error::Config(format!("stage {:?}: output {} is also an input", s.name, o.display())));
                }
                if let Some(&j) = producer.get(&o) {
                    return Err(Error::Config(format!(
                        "output {} is written by both {:?} and {:?}",
                        o.display(),
                        self.stages[j].name,
                        s.name
                    )));
                }
                producer.insert(o, i);
            }
        }

        // deps[i] = stages whose outputs stage i reads
        let mut deps: Vec<Vec<usize>> = vec![Vec::new(); self.stages.len()];
        for (i, s) in self.stages.iter().enumerate() {
            for inp in &s.inputs {
                let p = resolve(base, inp);
                match producer.get(&p) {
                    Some(&j) => deps[i].push(j),
                    None if p.exists() => {}
                    None => {
                        return Err(Error::Config(format!(
                            "stage {:?}: input {} is neither an existing source nor a stage output",
                            s.name,
                            p.display()
                        )))
                    }
                }
            }
        }
        if let Some(cycle) = find_cycle(&deps) {
            let path: Vec<&str> = cycle.iter().map(|&i| self.stages[i].name.as_str()).collect();
            return Err(Error::Config(format!("cycle in workflow: {}", path.join(" -> "))));
        }

        let mut done = vec![false; self.stages.len()];
        let mut order = Vec::with_capacity(self.stages.len());
        while order.len() < self.stages.len() {
            let next = (0..self.stages.len())
                .find(|&i| !done[i] && deps[i].iter().all(|&j| done[j]))
                .expect("acyclic graph always has a ready stage");
            done[next] = true;
            order.push(next);
        }
        Ok(order)
    }
}

fn arity(op: &str) -> (usize, usize) {
    match op {
        "classify-assign" => (2, 1),
        _ => (1, 1),
    }
}

fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

/// Returns a cycle as a stage path whose first and last entries coincide.
fn find_cycle(deps: &[Vec<usize>]) -> Option<Vec<usize>> {
    // 0 = unvisited, 1 = on stack, 2 = finished
    fn visit(i: usize, deps: &[Vec<usize>], state: &mut [u8], stack: &mut Vec<usize>) -> Option<Vec<usize>> {
        state[i] = 1;
        stack.push(i);
        for &j in &deps[i] {
            match state[j] {
                1 => {
                    let at = stack.iter().position(|&s| s == j).unwrap();
                    // stack follows consumer → producer edges; report data-flow order
                    let mut cycle: Vec<usize> = stack[at..].to_vec();
                    cycle.push(j);
                    cycle.reverse();
                    return Some(cycle);
                }
                0 => {
                    if let Some(c) = visit(j, deps, state, stack) {
                        return Some(c);
                    }
                }
                _ => {}
            }
        }
        stack.pop();
        state[i] = 2;
        None
    }
    let mut state = vec![0u8; deps.len()];
    let mut stack = Vec::new();
    (0..deps.len()).find_map(|i| if state[i] == 0 { visit(i, deps, &mut state, &mut stack) } else { None })
}

fn unix_ms() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis() as u64)
        .unwrap_or(0)
}

fn run_stage(spec: &StageSpec, base: &Path, params: &Params, partitions: usize) -> Result<StageCounts> {
    let i: Vec<PathBuf> = spec.inputs.iter().map(|p| resolve(base, p)).collect();
    let o: Vec<PathBuf> = spec.outputs.iter().map(|p| resolve(base, p)).collect();
    let mut params = params.clone();
    if let Some(aux) = &params.aux_dir {
        params.aux_dir = Some(resolve(base, aux));
    }
    if let Some(stop) = &params.stoplist {
        params.stoplist = Some(resolve(base, stop));
    }
    match spec.op.as_str() {
        "import" => pipeline::import_stage(&i[0], &o[0]),
        "export" => pipeline::export_stage(&i[0], &o[0]),
        "tfidf" => pipeline::tfidf_stage(&i[0], &o[0], &params, partitions),
        "top-terms" => pipeline::top_terms_stage(&i[0], &o[0], &params, partitions),
        "similarity" => pipeline::similarity_stage(&i[0], &o[0], params.sim_threshold, params.topk, partitions),
        "cite-match" => pipeline::cite_match_stage(
            &i[0],
            &o[0],
            params.match_threshold,
            params.cap,
            params.index_interval,
            partitions,
        ),
        "classify-train" => pipeline::classify_train_stage(&i[0], &o[0], params.train_options(), &params, partitions),
        "classify-assign" => pipeline::classify_assign_stage(&i[0], &i[1], &o[0], &params, partitions),
        "repartition" => pipeline::repartition_stage(&i[0], &o[0], partitions),
        other => Err(Error::Config(format!("unknown op {other:?}"))),
    }
}

fn append_log(path: &Path, entry: &StageReport) -> Result<()> {
    let mut line = crate::json::to_canonical_string(entry)?;
    line.push('\n');
    let mut f = OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(|e| Error::io(path, e))?;
    f.write_all(line.as_bytes()).map_err(|e| Error::io(path, e))
}

/// Run every stage in dependency order on top of `base_params`.
///
/// A failing stage aborts the run with [`Error::StageFailed`]; outputs of
/// stages that already finished stay in place.
pub fn run_workflow_with(config: &WorkflowConfig, base_dir: &Path, base_params: &Params) -> Result<RunReport> {
    let order = config.plan(base_dir)?;
    let global = base_params.merged(&config.params)?;
    let log_path = config.log.as_ref().map(|l| resolve(base_dir, l));
    let mut report = RunReport::default();
    for i in order {
        let spec = &config.stages[i];
        let mut overrides = spec.params.clone();
        let partitions = match overrides.remove("partitions") {
            None => config.partitions,
            Some(v) => v
                .as_u64()
                .filter(|&p| p >= 1)
                .ok_or_else(|| Error::Config(format!("stage {:?}: partitions must be a positive integer", spec.name)))?
                as usize,
        };
        let params = global.merged(&overrides)?;
        log::info!("stage {} ({}) starting", spec.name, spec.op);
        let start = unix_ms();
        let t = Instant::now();
        let outcome = run_stage(spec, base_dir, &params, partitions);
        let entry = StageReport {
            name: spec.name.clone(),
            start,
            end: unix_ms(),
            wall_ms: t.elapsed().as_secs_f64() * 1e3,
            in_count: outcome.as_ref().map(|c| c.in_count).unwrap_or(0),
            out_count: outcome.as_ref().map(|c| c.out_count).unwrap_or(0),
            status: if outcome.is_ok() { "ok" } else { "failed" }.to_string(),
            error: outcome.as_ref().err().map(|e| e.to_string()),
        };
        if let Some(p) = &log_path {
            append_log(p, &entry)?;
        }
        match outcome {
            Ok(c) => log::info!("stage {} done: {} in, {} out", spec.name, c.in_count, c.out_count),
            Err(e) => {
                return Err(Error::StageFailed {
                    stage: spec.name.clone(),
                    source: Box::new(e),
                })
            }
        }
        report.stages.push(entry);
    }
    Ok(report)
}

pub fn run_workflow(config: &WorkflowConfig, base_dir: &Path) -> Result<RunReport> {
    run_workflow_with(config, base_dir, &Params::default())
}

/// Read every line of a run log.
pub fn read_run_log(path: impl AsRef<Path>) -> Result<Vec<StageReport>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).map_err(Error::from))
        .collect()
}
