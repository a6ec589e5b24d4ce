mod common;

use std::fs;
use std::path::{Path, PathBuf};

use docmine::corpus::{self, DocumentRecord};
use docmine::pipeline;
use docmine::workflow::{self, WorkflowConfig};
use docmine::{Error, Params};
use rand::Rng;

fn random_docs(n: usize) -> Vec<DocumentRecord> {
    let mut rng = common::rng(60);
    (0..n)
        .map(|i| DocumentRecord {
            doc_id: format!("r{i:05}"),
            title: common::word(&mut rng, 3),
            r#abstract: (0..rng.gen_range(0..6)).map(|_| common::word(&mut rng, 2)).collect::<Vec<_>>().join(" "),
            keywords: vec![common::word(&mut rng, 2)],
            authors: vec![format!("A. {}", common::word(&mut rng, 2))],
            year: rng.gen_bool(0.5).then(|| rng.gen_range(1990..2024)),
            codes: if rng.gen_bool(0.3) { vec!["X1".into()] } else { Vec::new() },
            ..Default::default()
        })
        .collect()
}

fn write_jsonl(docs: &[DocumentRecord], path: &Path) {
    let lines: Vec<String> = docs.iter().map(|d| d.to_canonical_json().unwrap()).collect();
    fs::write(path, lines.join("\n") + "\n").unwrap();
}

fn imported_fixture(dir: &Path) -> PathBuf {
    let out = dir.join("corpus.smc");
    pipeline::import_stage(&common::fixture_corpus(), &out).unwrap();
    out
}

#[test]
fn import_export_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let docs = random_docs(1000);
    let src = dir.path().join("in.jsonl");
    write_jsonl(&docs, &src);
    let c = pipeline::import_stage(&src, &dir.path().join("c.smc")).unwrap();
    assert_eq!((c.in_count, c.out_count), (1000, 1000));
    pipeline::export_stage(&dir.path().join("c.smc"), &dir.path().join("out.jsonl")).unwrap();
    assert_eq!(corpus::read_jsonl(dir.path().join("out.jsonl")).unwrap(), docs);
    // ids are already sorted, so the canonical export is byte-identical
    assert_eq!(fs::read(&src).unwrap(), fs::read(dir.path().join("out.jsonl")).unwrap());
}

#[test]
fn empty_container_exports_empty_file() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("e.jsonl"), "").unwrap();
    pipeline::import_stage(&dir.path().join("e.jsonl"), &dir.path().join("e.smc")).unwrap();
    let c = pipeline::export_stage(&dir.path().join("e.smc"), &dir.path().join("e.out")).unwrap();
    assert_eq!(c.out_count, 0);
    assert!(fs::read(dir.path().join("e.out")).unwrap().is_empty());
}

#[test]
fn import_rejects_duplicates_and_malformed_lines() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("d.jsonl");
    fs::write(&p, "{\"doc_id\":\"a\"}\n{\"doc_id\":\"b\"}\n{\"doc_id\":\"a\"}\n").unwrap();
    assert!(matches!(corpus::read_jsonl(&p), Err(Error::DuplicateDocId(id)) if id == "a"));
    fs::write(&p, "{\"doc_id\":\"a\"}\n\n{\"doc_id\": \n").unwrap();
    assert!(matches!(corpus::read_jsonl(&p), Err(Error::MalformedLine { line: 3, .. })));
    assert!(!dir.path().join("d.smc").exists());
    assert!(pipeline::import_stage(&p, &dir.path().join("d.smc")).is_err());
    assert!(!dir.path().join("d.smc").exists());
}

const TWO_STAGE: &str = r#"{
  "partitions": 3,
  "params": {"min_df": 2},
  "log": "run.jsonl",
  "stages": [
    {"name": "sim", "op": "similarity", "inputs": ["w.smc"], "outputs": ["s.smc"], "params": {"sim_threshold": 0.1}},
    {"name": "weights", "op": "tfidf", "inputs": ["corpus.smc"], "outputs": ["w.smc"]}
  ]
}"#;

#[test]
fn workflow_equals_direct_stage_calls() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = imported_fixture(dir.path());
    let cfg = WorkflowConfig::from_json_str(TWO_STAGE).unwrap();
    assert_eq!(cfg.plan(dir.path()).unwrap(), vec![1, 0]);
    let report = workflow::run_workflow(&cfg, dir.path()).unwrap();
    assert_eq!(report.stages.iter().map(|s| s.name.as_str()).collect::<Vec<_>>(), ["weights", "sim"]);
    assert!(report.stages.iter().all(|s| s.status == "ok"));

    let params = Params {
        min_df: 2,
        ..Params::default()
    };
    let direct = dir.path().join("direct");
    fs::create_dir(&direct).unwrap();
    pipeline::tfidf_stage(&corpus, &direct.join("w.smc"), &params, 1).unwrap();
    pipeline::similarity_stage(&direct.join("w.smc"), &direct.join("s.smc"), 0.1, None, 1).unwrap();
    for f in ["w.smc", "s.smc"] {
        assert_eq!(fs::read(dir.path().join(f)).unwrap(), fs::read(direct.join(f)).unwrap(), "{f}");
    }

    let log = workflow::read_run_log(dir.path().join("run.jsonl")).unwrap();
    assert_eq!(log, report.stages);
    // tfidf conserves records: every document gets a vector
    assert_eq!(log[0].in_count, log[0].out_count);
    assert_eq!(log[0].in_count, 48);
}

#[test]
fn rerun_is_byte_identical_and_log_appends() {
    let dir = tempfile::tempdir().unwrap();
    imported_fixture(dir.path());
    let cfg = WorkflowConfig::from_json_str(TWO_STAGE).unwrap();
    workflow::run_workflow(&cfg, dir.path()).unwrap();
    let first = (fs::read(dir.path().join("w.smc")).unwrap(), fs::read(dir.path().join("s.smc")).unwrap());
    workflow::run_workflow(&cfg, dir.path()).unwrap();
    let second = (fs::read(dir.path().join("w.smc")).unwrap(), fs::read(dir.path().join("s.smc")).unwrap());
    assert_eq!(first, second);
    assert_eq!(workflow::read_run_log(dir.path().join("run.jsonl")).unwrap().len(), 4);
}

#[test]
fn cycle_is_rejected_before_running() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = WorkflowConfig::from_json_str(
        r#"{"log": "run.jsonl", "stages": [
            {"name": "a", "op": "tfidf", "inputs": ["y.smc"], "outputs": ["x.smc"]},
            {"name": "b", "op": "similarity", "inputs": ["x.smc"], "outputs": ["y.smc"]}
        ]}"#,
    )
    .unwrap();
    let err = workflow::run_workflow(&cfg, dir.path()).unwrap_err().to_string();
    assert!(err.contains("a -> b -> a") || err.contains("b -> a -> b"), "{err}");
    assert!(!dir.path().join("run.jsonl").exists());
}

#[test]
fn failed_stage_keeps_earlier_outputs() {
    let dir = tempfile::tempdir().unwrap();
    imported_fixture(dir.path());
    // the second stage reads the corpus as a model file, which fails to parse
    let cfg = WorkflowConfig::from_json_str(
        r#"{"log": "run.jsonl", "stages": [
            {"name": "weights", "op": "tfidf", "inputs": ["corpus.smc"], "outputs": ["w.smc"]},
            {"name": "assign", "op": "classify-assign", "inputs": ["corpus.smc", "w.smc"], "outputs": ["a.smc"]}
        ]}"#,
    )
    .unwrap();
    let err = workflow::run_workflow(&cfg, dir.path()).unwrap_err();
    assert!(matches!(&err, Error::StageFailed { stage, .. } if stage == "assign"), "{err}");
    assert!(dir.path().join("w.smc").exists());
    assert!(!dir.path().join("a.smc").exists());
    let log = workflow::read_run_log(dir.path().join("run.jsonl")).unwrap();
    assert_eq!(log.len(), 2);
    assert_eq!(log[0].status, "ok");
    assert_eq!(log[1].status, "failed");
    assert!(log[1].error.is_some());
}

#[test]
fn every_stage_is_independent_of_partitions() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = imported_fixture(dir.path());
    let params = Params {
        min_df: 2,
        ..Params::default()
    };
    let run = |p: usize| -> Vec<Vec<u8>> {
        let d = dir.path().join(format!("p{p}"));
        fs::create_dir_all(&d).unwrap();
        pipeline::tfidf_stage(&corpus, &d.join("w.smc"), &params, p).unwrap();
        pipeline::similarity_stage(&d.join("w.smc"), &d.join("s.smc"), 0.05, Some(3), p).unwrap();
        pipeline::cite_match_stage(&corpus, &d.join("m.smc"), 0.5, 100, 4, p).unwrap();
        pipeline::classify_train_stage(&corpus, &d.join("model.json"), params.train_options(), &params, p).unwrap();
        pipeline::classify_assign_stage(&corpus, &d.join("model.json"), &d.join("a.smc"), &params, p).unwrap();
        pipeline::top_terms_stage(&corpus, &d.join("aux"), &params, p).unwrap();
        let mut files = vec!["w.smc", "s.smc", "m.smc", "model.json", "a.smc"]
            .into_iter()
            .map(|f| d.join(f))
            .collect::<Vec<_>>();
        for aux in [pipeline::AUX_TOPTERMS, pipeline::AUX_TOPDOC, pipeline::AUX_EXTREMES] {
            files.push(d.join("aux").join(aux));
        }
        files.iter().map(|f| fs::read(f).unwrap()).collect()
    };
    assert_eq!(run(1), run(8));
}

#[test]
fn repartition_into_one_is_identity() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = imported_fixture(dir.path());
    let c = pipeline::repartition_stage(&corpus, &dir.path().join("parts"), 1).unwrap();
    assert_eq!(c.in_count, c.out_count);
    let part = docmine::partition::partition_path(&dir.path().join("parts"), 0);
    let mut a = docmine::store::read_container(&corpus).unwrap();
    let mut b = docmine::store::read_container(&part).unwrap();
    a.sort();
    b.sort();
    assert_eq!(a, b);
}

#[test]
fn load_defaults_run_log_next_to_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("flow.json");
    fs::write(&path, r#"{"stages": []}"#).unwrap();
    let (cfg, base) = WorkflowConfig::load(&path).unwrap();
    assert_eq!(base, dir.path());
    assert_eq!(cfg.log.as_deref(), Some(Path::new("flow.json.runlog.jsonl")));
    assert!(workflow::run_workflow(&cfg, &base).unwrap().stages.is_empty());
}
