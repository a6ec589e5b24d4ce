//! Chain import → tfidf → similarity as a workflow and inspect the report
//! and the append-only run log.

use docmine::workflow::{self, WorkflowConfig};

fn main() -> docmine::Result<()> {
    let dir = tempfile::tempdir().expect("temp dir");
    let source = concat!(env!("CARGO_MANIFEST_DIR"), "/data/sample_corpus.jsonl");
    let wf = format!(
        r#"{{
  "partitions": 4,
  "params": {{"min_df": 3}},
  "log": "run.jsonl",
  "stages": [
    {{"name": "sim", "op": "similarity", "inputs": ["weights.smc"], "outputs": ["sim.smc"],
      "params": {{"sim_threshold": 0.4}}}},
    {{"name": "weights", "op": "tfidf", "inputs": ["corpus.smc"], "outputs": ["weights.smc"]}},
    {{"name": "import", "op": "import", "inputs": ["{source}"], "outputs": ["corpus.smc"]}}
  ]
}}"#
    );
    let config = WorkflowConfig::from_json_str(&wf)?;

    let report = workflow::run_workflow(&config, dir.path())?;
    for s in &report.stages {
        println!("{:<8} {:>4} in {:>4} out  {:>8.2} ms", s.name, s.in_count, s.out_count, s.wall_ms);
    }
    let before = std::fs::read(dir.path().join("sim.smc")).expect("output exists");

    // Rerunning gives the same bytes; the log now holds both runs.
    workflow::run_workflow(&config, dir.path())?;
    assert_eq!(before, std::fs::read(dir.path().join("sim.smc")).unwrap());
    println!("run log entries: {}", workflow::read_run_log(dir.path().join("run.jsonl"))?.len());
    Ok(())
}
