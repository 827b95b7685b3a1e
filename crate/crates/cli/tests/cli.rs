use std::path::Path;
use std::process::{Command, Output};

fn amcbench(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_amcbench"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn help_lists_every_subcommand() {
    let out = amcbench(&["--help"]);
    assert_eq!(code(&out), 0);
    let text = String::from_utf8_lossy(&out.stdout);
    for sub in ["gen", "train", "attack", "eval", "sweep"] {
        assert!(text.contains(sub), "{sub} missing from help");
    }
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(code(&amcbench(&[])), 1);
    assert_eq!(code(&amcbench(&["gen", "--bogus", "-o", "x.amcd"])), 1);
    assert_eq!(code(&amcbench(&["frobnicate"])), 1);
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.json");
    std::fs::write(&cfg, r#"{"not_a_key": 1}"#).unwrap();
    let out = dir.path().join("d.amcd");
    assert_eq!(code(&amcbench(&["--config", p(&cfg), "gen", "-o", p(&out)])), 1);
}

#[test]
fn missing_and_corrupt_inputs_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.amcd");
    let out = amcbench(&[
        "eval", "--data", p(&missing), "--model", p(&missing), "--out-dir", p(dir.path()),
    ]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("nope.amcd"));

    let junk = dir.path().join("junk.amcd");
    std::fs::write(&junk, b"AMCD\x09\x00").unwrap();
    let out = amcbench(&[
        "train", "--arch", "fcnn", "--domain", "time", "--data", p(&junk), "-o",
        p(&dir.path().join("m.ckpt")),
    ]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("version"));
}

#[test]
fn pipeline_round_trip_echoes_attack_record() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let data = d.join("d.amcd");
    let out = amcbench(&[
        "gen", "--per-class", "12", "--frame-len", "32", "--seed", "7", "-o", p(&data),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(d.join("d.amcd.manifest.json").exists());

    let time = d.join("cnn-time.ckpt");
    let freq = d.join("cnn-freq.ckpt");
    for (domain, path) in [("time", &time), ("freq", &freq)] {
        let out = amcbench(&[
            "train", "--arch", "fcnn", "--domain", domain, "--data", p(&data), "--epochs", "2",
            "--batch", "8", "-o", p(path),
        ]);
        assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    }
    let history = std::fs::read_to_string(d.join("cnn-time.history.csv")).unwrap();
    assert_eq!(history.lines().count(), 3);
    assert!(history.starts_with("epoch,train_acc,val_acc,train_loss,val_loss"));

    let adv = d.join("adv.amcd");
    let out = amcbench(&[
        "attack", "--data", p(&data), "--surrogate", p(&time), "--method", "bim", "--budget",
        "0.02", "--alpha", "0.002", "--iters", "10", "-o", p(&adv),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));

    let eval_dir = d.join("eval");
    let out = amcbench(&[
        "eval", "--data", p(&adv), "--model", p(&freq), "--out-dir", p(&eval_dir),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(eval_dir.join("report.json")).unwrap())
            .unwrap();
    let attack = &report["metadata"]["attack"];
    assert_eq!(attack["config"]["method"], "bim");
    assert_eq!(attack["config"]["power_budget"], 0.02);
    assert_eq!(attack["config"]["step"], 0.002);
    assert_eq!(attack["config"]["iterations"], 10);
    assert_eq!(attack["surrogate_architecture"], "FCNN");
    let confusion = std::fs::read_to_string(eval_dir.join("confusion.csv")).unwrap();
    assert_eq!(confusion.lines().count(), 17);

    let sweep_dir = d.join("sweep");
    let out = amcbench(&[
        "sweep", "--data", p(&data), "--surrogate", p(&time), "--target", p(&freq), "--points",
        "3", "--out-dir", p(&sweep_dir),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(sweep_dir.join("sweep.csv")).unwrap();
    assert_eq!(csv.lines().next().unwrap(), "method,surrogate,target,domain,budget_or_alpha,accuracy");
    assert_eq!(csv.lines().count(), 7);

    // A frequency model cannot serve as the surrogate.
    let out = amcbench(&[
        "attack", "--data", p(&data), "--surrogate", p(&freq), "-o", p(&d.join("x.amcd")),
    ]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("threat model"));
}

#[test]
fn config_file_supplies_defaults_and_flags_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.json");
    std::fs::write(&cfg, r#"{"per_class": 5, "frame_len": 16, "seed": 3}"#).unwrap();
    let a = dir.path().join("a.amcd");
    let b = dir.path().join("b.amcd");
    assert_eq!(code(&amcbench(&["--config", p(&cfg), "gen", "-o", p(&a)])), 0);
    assert_eq!(code(&amcbench(&["--config", p(&cfg), "gen", "--per-class", "6", "-o", p(&b)])), 0);
    let manifest: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(dir.path().join("a.amcd.manifest.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(manifest["config"]["per_class"], 5);
    assert_eq!(manifest["config"]["frame_len"], 16);
    assert_eq!(manifest["stage"], "gen");
    let sa = std::fs::metadata(&a).unwrap().len();
    let sb = std::fs::metadata(&b).unwrap().len();
    assert!(sb > sa);
}
