use std::path::Path;
use std::process::{Command, Output};

use panolayout::io::{read_tensor, write_map_png};
use panolayout::ProbabilityMap;
use serde_json::Value;

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_panolayout"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("running the CLI")
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap_or(-1)
}

fn json(path: &Path) -> Value {
    serde_json::from_slice(&std::fs::read(path).unwrap()).unwrap()
}

fn synth(dir: &Path) {
    let out = run(dir, &["synth", "--seed", "4", "--count", "2", "--out-dir", "syn"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn offsets_have_one_kernel_per_row() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), &["offsets", "--width", "256", "--height", "128", "-r", "3", "--alpha-auto", "off.cflt"]);
    assert_eq!(code(&out), 0);
    let t = read_tensor(&dir.path().join("off.cflt")).unwrap();
    assert_eq!(t.shape(), &[128, 9, 2]);
}

#[test]
fn identical_layouts_score_perfectly() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path());
    let out = run(dir.path(), &["eval-layout", "syn/room_000.json", "syn/room_000.layout.json", "--json", "el.json"]);
    assert_eq!(code(&out), 0);
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("100.00"), "{stdout}");
    let mean = &json(&dir.path().join("el.json"))["mean"];
    assert!((mean["iou3d"].as_f64().unwrap() - 1.0).abs() < 1e-9);
    assert!(mean["corner_error"].as_f64().unwrap() < 1e-9);
    assert_eq!(mean["pixel_error_ss"].as_f64().unwrap(), 0.0);
    assert_eq!(mean["pixel_error_cs"].as_f64().unwrap(), 0.0);
}

#[test]
fn rotation_sweep_writes_every_sample() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path());
    let args = [
        "sim-rotate", "syn/room_001.png", "syn/room_001.json", "--min", "-30", "--max", "30", "--steps", "11", "--seed", "1",
        "--out-dir", "rot",
    ];
    let out = run(dir.path(), &args);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let m = json(&dir.path().join("rot/manifest.json"));
    let records = m["records"].as_array().unwrap();
    assert_eq!(records.len(), 11);
    let angles: Vec<f64> = records.iter().map(|r| r["perturbation"]["value"].as_f64().unwrap()).collect();
    assert_eq!(angles.first(), Some(&-30.0));
    assert_eq!(angles.last(), Some(&30.0));
    for r in records {
        assert!(dir.path().join("rot").join(r["panorama"].as_str().unwrap()).exists());
    }
}

#[test]
fn missing_seed_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path());
    let rotate = run(dir.path(), &["sim-rotate", "syn/room_000.png", "syn/room_000.json", "--out-dir", "rot"]);
    assert_eq!(code(&rotate), 2);
    let erase = run(dir.path(), &["augment", "syn/room_000.png", "syn/room_000.json", "--erase", "1", "--out-dir", "aug"]);
    assert_eq!(code(&erase), 2);
    assert!(!dir.path().join("aug/image.png").exists());
}

#[test]
fn missing_input_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), &["reconstruct", "nope.json", "--output", "rec.json"]);
    assert_eq!(code(&out), 2);
}

#[test]
fn record_failure_exits_with_one() {
    let dir = tempfile::tempdir().unwrap();
    write_map_png(&dir.path().join("blank.png"), &ProbabilityMap::zeros(64, 32)).unwrap();
    let out = run(dir.path(), &["extract-layout", "blank.png", "--output", "ex.json"]);
    assert_eq!(code(&out), 1);
    assert!(!dir.path().join("ex.json").exists());
}

#[test]
fn reruns_are_byte_identical() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    for d in [a.path(), b.path()] {
        synth(d);
        let out = run(d, &["augment", "syn/room_000.png", "syn/room_000.json", "--mirror", "--erase", "2", "--seed", "8", "--out-dir", "aug"]);
        assert_eq!(code(&out), 0);
    }
    for f in ["syn/manifest.json", "syn/room_001.png", "aug/image.png", "aug/labels.json", "aug/erased.json"] {
        assert_eq!(std::fs::read(a.path().join(f)).unwrap(), std::fs::read(b.path().join(f)).unwrap(), "{f}");
    }
}
