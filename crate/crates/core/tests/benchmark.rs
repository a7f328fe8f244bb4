use std::path::{Path, PathBuf};

use fuzzyhri_core::orchestrator::{
    discard, load_script, FaultPlan, Pipeline, PipelineEvent, Stage,
};

fn bench_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/benchmark")
}

fn run(faults: &str) -> fuzzyhri_core::orchestrator::BatchResult {
    let dir = bench_dir();
    let entries = load_script(dir.join("script.jsonl")).unwrap();
    let plan: FaultPlan = faults.parse().unwrap();
    let mut p = Pipeline::mock(1.0);
    p.run_batch(&entries, &dir, &plan, &mut discard()).unwrap()
}

#[test]
fn clean_run_passes_every_trial() {
    let r = run("");
    assert_eq!(r.trials.len(), 60);
    let failed: Vec<_> = r
        .trials
        .iter()
        .filter(|t| !t.record.a_total.passed())
        .map(|t| format!("{}: {:?}", t.record.id, t.record.failure))
        .collect();
    assert!(failed.is_empty(), "{failed:#?}");
    assert_eq!(r.report.row("A_total").unwrap().mean, 100.0);
    assert!(r.report.errors.no_failures);
}

#[test]
fn injected_faults_land_exactly() {
    let r = run("stt=2,ae=5,od=2,ra=6,seed=4");
    let e = &r.report.errors;
    assert_eq!(e.failed, 15);
    let c = |s| e.counts[&s];
    assert_eq!(
        [c(Stage::Stt), c(Stage::Ae), c(Stage::Od), c(Stage::Ra)],
        [2, 5, 2, 6]
    );
    let a = |m: &str| r.report.row(m).unwrap().mean;
    assert!((a("A_STT") - 96.6667).abs() < 1e-3);
    assert!((a("A_total") - 75.0).abs() < 1e-9);
    assert!(r.trials.iter().all(|t| !t.record.errored));
}

#[test]
fn batch_is_deterministic() {
    let a = serde_json::to_string(&run("ra=3")).unwrap();
    let b = serde_json::to_string(&run("ra=3")).unwrap();
    assert_eq!(a, b);
}

#[test]
fn missing_scene_is_an_errored_trial() {
    let mut entries = load_script(bench_dir().join("script.jsonl")).unwrap();
    entries.truncate(2);
    entries[1].scene_file = "scenes/nope.json".into();
    let mut events = vec![];
    let mut sink = |e: PipelineEvent| events.push(e);
    let r = Pipeline::mock(1.0)
        .run_batch(&entries, &bench_dir(), &FaultPlan::none(), &mut sink)
        .unwrap();
    assert!(r.trials[0].record.a_total.passed());
    assert!(r.trials[1].record.errored);
    let finished = events
        .iter()
        .filter(|e| matches!(e, PipelineEvent::TrialFinished { .. }))
        .count();
    assert_eq!(finished, 2);
}
