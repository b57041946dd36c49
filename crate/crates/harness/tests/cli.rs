use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use relaxlab_harness::attack::{load_report, ATTACK_REPORT};
use relaxlab_harness::config::ExperimentConfig;
use relaxlab_harness::run::{MANIFEST, MODEL, TRACE};
use tempfile::TempDir;

const SMALL: &str = "\
classes = 4
dim = 2
per_class = 60
separation = 3.0
hidden = 16
epochs = 12
batch_size = 16
lr = 0.05
lr_schedule =
nn_hidden = 8
nn_epochs = 5
";

fn relaxlab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_relaxlab")).args(args).output().expect("spawn relaxlab")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn small_config(dir: &Path) -> String {
    let path = dir.join("small.cfg");
    fs::write(&path, SMALL).unwrap();
    path.to_str().unwrap().to_string()
}

fn train(cfg: &str, out: &Path, extra: &[&str]) {
    let mut args = vec!["train", "-c", cfg, "-o", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    let res = relaxlab(&args);
    assert_eq!(code(&res), 0, "{}", String::from_utf8_lossy(&res.stderr));
}

#[test]
fn train_writes_a_complete_run() {
    let tmp = TempDir::new().unwrap();
    let cfg = small_config(tmp.path());
    let run = tmp.path().join("run");
    train(&cfg, &run, &["--set", "checkpoint_epochs=3,6", "--seed-init", "9"]);
    for f in [MANIFEST, MODEL, TRACE, "split.json", "checkpoints/epoch_3.json", "checkpoints/epoch_6.json"] {
        assert!(run.join(f).is_file(), "missing {f}");
    }
    let manifest = ExperimentConfig::load(run.join(MANIFEST)).unwrap();
    assert_eq!(manifest.seeds.init, 9);
    assert_eq!(manifest.epochs, 12);
    let trace = fs::read_to_string(run.join(TRACE)).unwrap();
    assert_eq!(trace.lines().count(), 13);
}

#[test]
fn exit_codes() {
    let tmp = TempDir::new().unwrap();
    let cfg = small_config(tmp.path());
    let out = tmp.path().join("x");
    let out = out.to_str().unwrap();

    assert_eq!(code(&relaxlab(&["--help"])), 0);
    assert_eq!(code(&relaxlab(&["train", "--bogus"])), 1);
    assert_eq!(code(&relaxlab(&["train", "-c", &cfg, "--set", "no_such_key=1", "-o", out])), 1);
    assert_eq!(code(&relaxlab(&["train", "-c", &cfg, "--set", "method=relaxloss", "--set", "alpha=-1", "-o", out])), 1);
    assert_eq!(code(&relaxlab(&["train", "-c", "/nonexistent/cfg", "-o", out])), 1);
    assert_eq!(code(&relaxlab(&["attack", tmp.path().join("missing").to_str().unwrap()])), 1);
    assert_eq!(code(&relaxlab(&["sweep", "-c", &cfg, "--param", "momentum", "--values", "1"])), 1);

    // diverging training is a runtime failure, and still leaves its trace behind
    let res = relaxlab(&["train", "-c", &cfg, "--set", "lr=1e200", "-o", out]);
    assert_eq!(code(&res), 2, "{}", String::from_utf8_lossy(&res.stderr));
    assert!(Path::new(out).join(TRACE).is_file());
}

#[test]
fn boundary_needs_two_features() {
    let tmp = TempDir::new().unwrap();
    let cfg = small_config(tmp.path());
    let wide = tmp.path().join("wide");
    train(&cfg, &wide, &["--set", "dim=5", "--set", "epochs=1"]);
    let res = relaxlab(&["boundary", wide.to_str().unwrap()]);
    assert_eq!(code(&res), 1);

    let flat = tmp.path().join("flat");
    train(&cfg, &flat, &["--set", "epochs=1"]);
    let csv = tmp.path().join("grid.csv");
    let res = relaxlab(&["boundary", flat.to_str().unwrap(), "--steps", "7", "-o", csv.to_str().unwrap()]);
    assert_eq!(code(&res), 0);
    let text = fs::read_to_string(csv).unwrap();
    assert_eq!(text.lines().next().unwrap(), "x,y,score_0,score_1,score_2,score_3,argmax");
    assert_eq!(text.lines().count(), 50);
}

#[test]
fn attack_reports_are_idempotent() {
    let tmp = TempDir::new().unwrap();
    let cfg = small_config(tmp.path());
    let run = tmp.path().join("run");
    train(&cfg, &run, &[]);
    let dir = run.to_str().unwrap();
    assert_eq!(code(&relaxlab(&["attack", dir])), 0);
    let first = fs::read(run.join(ATTACK_REPORT)).unwrap();
    assert_eq!(code(&relaxlab(&["attack", dir])), 0);
    assert_eq!(first, fs::read(run.join(ATTACK_REPORT)).unwrap());

    let rows = load_report(run.join(ATTACK_REPORT)).unwrap();
    assert_eq!(rows.len(), 8);
    assert!(rows.iter().all(|r| (0.0..=1.0).contains(&r.target_auc) && !r.adaptive));

    assert_eq!(code(&relaxlab(&["attack", dir, "--attacks", "loss,entropy", "--adaptive"])), 0);
    let rows = load_report(run.join("attacks_adaptive.csv")).unwrap();
    assert_eq!(rows.len(), 2);
    assert!(rows.iter().all(|r| r.adaptive));
}

#[test]
fn sweep_rows_and_vanilla_equivalence() {
    let tmp = TempDir::new().unwrap();
    let cfg = small_config(tmp.path());
    let sweep_dir = tmp.path().join("sweep");
    let res = relaxlab(&[
        "sweep",
        "-c",
        &cfg,
        "--param",
        "alpha",
        "--values",
        "0,0.5,1,1.5",
        "--jobs",
        "2",
        "-o",
        sweep_dir.to_str().unwrap(),
    ]);
    assert_eq!(code(&res), 0, "{}", String::from_utf8_lossy(&res.stderr));
    let mut reader = csv::Reader::from_path(sweep_dir.join("sweep.csv")).unwrap();
    let records: Vec<csv::StringRecord> = reader.records().map(Result::unwrap).collect();
    assert_eq!(records.len(), 4 * 8);
    assert!(sweep_dir.join("selection.json").is_file());

    // relaxloss with alpha = 0 never leaves the descent branch
    let vanilla = tmp.path().join("vanilla");
    train(&cfg, &vanilla, &["--set", "method=vanilla"]);
    assert_eq!(code(&relaxlab(&["attack", vanilla.to_str().unwrap()])), 0);
    let zero = sweep_dir.join("alpha_0");
    assert_eq!(fs::read(zero.join(MODEL)).unwrap(), fs::read(vanilla.join(MODEL)).unwrap());
    assert_eq!(
        fs::read(zero.join(ATTACK_REPORT)).unwrap(),
        fs::read(vanilla.join(ATTACK_REPORT)).unwrap()
    );
}

#[test]
fn analyze_output() {
    let tmp = TempDir::new().unwrap();
    let cfg = small_config(tmp.path());
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    train(&cfg, &a, &["--set", "attacks=black_box"]);
    train(&cfg, &b, &["--set", "attacks=black_box", "--set", "method=relaxloss", "--set", "alpha=0.8"]);
    let (a, b) = (a.to_str().unwrap(), b.to_str().unwrap());

    // correlation needs at least two runs, and black-box reports
    assert_eq!(code(&relaxlab(&["analyze", a])), 1);
    assert_eq!(code(&relaxlab(&["analyze", a, b])), 1);
    assert_eq!(code(&relaxlab(&["analyze", a, "--no-correlation"])), 0);

    relaxlab(&["attack", a]);
    relaxlab(&["attack", b]);
    let out = tmp.path().join("analysis.json");
    assert_eq!(code(&relaxlab(&["analyze", a, b, "-o", out.to_str().unwrap()])), 0);
    let json: serde_json::Value = serde_json::from_str(&fs::read_to_string(out).unwrap()).unwrap();
    assert_eq!(json["variance_convention"], "population");
    assert_eq!(json["runs"].as_array().unwrap().len(), 2);
    let r = json["pearson_var_auc"].as_f64().unwrap();
    assert!((-1.0..=1.0).contains(&r));
}

#[test]
fn relaxloss_softens_the_toy_boundary() {
    let tmp = TempDir::new().unwrap();
    let cfg = small_config(tmp.path());
    let low_confidence = |name: &str, extra: &[&str]| {
        let run = tmp.path().join(name);
        let mut args = vec!["--set", "epochs=40", "--set", "hidden=32"];
        args.extend_from_slice(extra);
        train(&cfg, &run, &args);
        let res = relaxlab(&["boundary", run.to_str().unwrap(), "--x-range", "-4,4", "--y-range", "-4,4"]);
        assert_eq!(code(&res), 0);
        let text = fs::read_to_string(run.join("boundary.csv")).unwrap();
        let rows: Vec<Vec<f64>> = text
            .lines()
            .skip(1)
            .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
            .collect();
        let low = rows.iter().filter(|r| r[2..6].iter().copied().fold(0.0, f64::max) < 0.9).count();
        low as f64 / rows.len() as f64
    };
    let vanilla = low_confidence("vanilla", &[]);
    let relaxed = low_confidence("relaxed", &["--set", "method=relaxloss", "--set", "alpha=0.7"]);
    assert!(relaxed > vanilla, "relaxloss {relaxed} vs vanilla {vanilla}");
}
