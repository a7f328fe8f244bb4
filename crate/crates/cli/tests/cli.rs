use std::io::Cursor;
use std::path::{Path, PathBuf};
use std::process::Command;

use clap::Parser;

use fuzzyhri_cli::{run, Args, CliError};
use fuzzyhri_core::audio::{synth, write_wav, MarkerToneClassifier};

fn bench() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/fixtures/benchmark")
}

fn args(extra: &[&str]) -> Args {
    Args::try_parse_from(std::iter::once("fuzzyhri").chain(extra.iter().copied())).unwrap()
}

fn run_with(a: &Args, stdin: &str) -> (Result<u8, CliError>, String) {
    let mut out = vec![];
    let r = run(a, &mut Cursor::new(stdin.to_string()), &mut out);
    (r, String::from_utf8(out).unwrap())
}

fn batch_into(dir: &Path, seed: &str) -> String {
    let script = bench().join("script.jsonl");
    let a = args(&[
        "--script",
        script.to_str().unwrap(),
        "--out",
        dir.to_str().unwrap(),
        "--seed",
        seed,
    ]);
    let (r, out) = run_with(&a, "");
    assert_eq!(r.unwrap(), 0, "{out}");
    out
}

#[test]
fn batch_writes_reports_and_prints_summary() {
    let dir = tempfile::tempdir().unwrap();
    let out = batch_into(dir.path(), "0");
    assert!(out.starts_with("60 trials\nmetric"), "{out}");
    assert!(out.contains("A_total     100.00"), "{out}");
    let csv = std::fs::read_to_string(dir.path().join("trials.csv")).unwrap();
    assert_eq!(csv.lines().count(), 61);
    for f in [
        "summary.csv",
        "report.json",
        "trajectories.jsonl",
        "trajectories.svg",
        "contributions.svg",
    ] {
        assert!(dir.path().join(f).is_file(), "{f}");
    }
    let svg = std::fs::read_to_string(dir.path().join("trajectories.svg")).unwrap();
    assert!(svg.starts_with("<svg") && svg.contains("<polyline"));
}

#[test]
fn same_seed_gives_identical_reports() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    batch_into(a.path(), "7");
    batch_into(b.path(), "7");
    for f in [
        "trials.csv",
        "summary.csv",
        "report.json",
        "trajectories.jsonl",
    ] {
        let x = std::fs::read(a.path().join(f)).unwrap();
        let y = std::fs::read(b.path().join(f)).unwrap();
        assert!(x == y, "{f} differs");
    }
}

#[test]
fn fault_plan_shows_in_summary() {
    let dir = tempfile::tempdir().unwrap();
    let script = bench().join("script.jsonl");
    let a = args(&[
        "--script",
        script.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
        "--faults",
        "stt=2,ae=5,od=2,ra=6",
    ]);
    let (r, out) = run_with(&a, "");
    assert_eq!(r.unwrap(), 0);
    assert!(
        out.contains("error share (15 failed): STT 13.33%, AE 33.33%, OD 13.33%, RA 40.00%"),
        "{out}"
    );
}

#[test]
fn empty_script_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let script = dir.path().join("empty.jsonl");
    std::fs::write(&script, "\n").unwrap();
    let a = args(&[
        "--script",
        script.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    let err = run_with(&a, "").0.unwrap_err();
    assert!(err.to_string().ends_with("no trials"), "{err}");
    assert_eq!(err.exit_code(), 1);
}

#[test]
fn missing_inputs_map_to_exit_codes() {
    let err = run_with(&args(&["--script", "/nonexistent/s.jsonl"]), "")
        .0
        .unwrap_err();
    assert_eq!(err.exit_code(), 2);
    let err = run_with(&args(&[]), "").0.unwrap_err();
    assert_eq!(err.exit_code(), 1);
    let err = run_with(&args(&["--mode", "interactive"]), "")
        .0
        .unwrap_err();
    assert_eq!(err.exit_code(), 1);
}

#[test]
fn external_adapters_need_urls() {
    let script = bench().join("script.jsonl");
    let a = args(&[
        "--script",
        script.to_str().unwrap(),
        "--adapters",
        "external",
    ]);
    let err = run_with(&a, "").0.unwrap_err();
    assert_eq!(err.exit_code(), 1);
    assert!(err.to_string().contains("no endpoint URL"), "{err}");
}

fn scene_arg() -> String {
    bench()
        .join("scenes/fruit_row.json")
        .to_str()
        .unwrap()
        .to_string()
}

#[test]
fn interactive_session_runs_commands_until_quit() {
    let a = args(&["--mode", "interactive", "--scene", &scene_arg()]);
    let (r, out) = run_with(&a, "grab the apple\n\nquit\ngrab the lemon\n");
    assert_eq!(r.unwrap(), 0);
    assert!(out.contains("actions: [pick_up(apple)]\nok\n"), "{out}");
    assert!(out.contains("held=apple"), "{out}");
    assert!(!out.contains("lemon"), "stopped at quit: {out}");
    assert!(out.trim_end().ends_with("bye"));
}

#[test]
fn interactive_failures_leave_the_scene_alone() {
    let a = args(&["--mode", "interactive", "--scene", &scene_arg()]);
    let (r, out) = run_with(&a, "grab the durian\n[pick_up(apple\ngive me the lemon\n");
    assert_eq!(r.unwrap(), 0);
    let blocks: Vec<&str> = out.split("> ").collect();
    assert!(
        blocks[1].contains("error: object not detected: durian"),
        "{out}"
    );
    assert!(!blocks[1].contains(" now at ") && !blocks[1].contains("held="));
    assert!(blocks[2].contains("error: unparseable actions"), "{out}");
    assert!(blocks[3].contains("ok\nlemon now at"), "{out}");
}

#[test]
fn wav_input_goes_through_the_audio_front_end() {
    let dir = tempfile::tempdir().unwrap();
    let wav = dir.path().join("cmd.wav");
    let mut audio = synth::noise(0.5, 16_000, 0.002, 3);
    audio.extend(MarkerToneClassifier::default().marker(0.4));
    audio.extend(synth::babble(1.2, 16_000, 0.2, 4));
    audio.extend(synth::silence(5.5, 16_000));
    write_wav(&wav, &audio).unwrap();
    std::fs::write(dir.path().join("cmd.txt"), "pick up the orange\n").unwrap();
    let a = args(&[
        "--mode",
        "interactive",
        "--scene",
        &scene_arg(),
        "--wav",
        wav.to_str().unwrap(),
    ]);
    let (r, out) = run_with(&a, "quit\n");
    assert_eq!(r.unwrap(), 0);
    assert!(
        out.starts_with("heard: pick up the orange\nactions: [pick_up(orange)]\nok\n"),
        "{out}"
    );
}

#[test]
fn binary_exit_codes() {
    let exe = env!("CARGO_BIN_EXE_fuzzyhri");
    let s = Command::new(exe).args(["--mode", "nope"]).output().unwrap();
    assert_eq!(s.status.code(), Some(1));
    let s = Command::new(exe)
        .args(["--script", "/nonexistent.jsonl"])
        .output()
        .unwrap();
    assert_eq!(s.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&s.stderr).starts_with("error:"));
    let s = Command::new(exe)
        .args(["--mode", "interactive", "--scene", &scene_arg()])
        .stdin(std::process::Stdio::null())
        .output()
        .unwrap();
    assert_eq!(s.status.code(), Some(0));
}
