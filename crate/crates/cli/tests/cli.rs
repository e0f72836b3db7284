use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn root() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn desk5() -> PathBuf {
    root().join("models/desk5.json")
}

fn pimsyn(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pimsyn"))
        .args(args)
        .env_remove("PIMSYN_HW")
        .output()
        .expect("binary runs")
}

const SMALL: &str = r#"
seed = 3

[domains]
ratio_rram = [0.3]
xb_sizes = [128]
res_rram = [2]
res_dac = [1, 2]
sa_top_k = 2

[sa]
iters = 300

[ea]
pop_size = 4
max_iters = 2
share_iters = 2
"#;

fn small_config(dir: &Path) -> String {
    let path = dir.join("small.toml");
    std::fs::write(&path, SMALL).unwrap();
    path.display().to_string()
}

#[test]
fn synth_writes_all_reports() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let cfg = small_config(dir.path());
    let o = pimsyn(&[
        "synth",
        desk5().to_str().unwrap(),
        "--power",
        "5",
        "--config",
        &cfg,
        "-o",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["summary.txt", "result.json", "pareto.csv"] {
        assert!(out.join(f).is_file(), "{f} missing");
    }
    let json: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join("result.json")).unwrap()).unwrap();
    assert_eq!(json["model"], "desk5");
    assert_eq!(json["seed"], 3);
    assert!(json["result"]["best_eval"]["power_efficiency"].as_f64().unwrap() > 0.0);
    assert!(!o.stdout.is_empty());
}

#[test]
fn seed_flag_overrides_config() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let cfg = small_config(dir.path());
    let o = pimsyn(&[
        "synth",
        desk5().to_str().unwrap(),
        "--power",
        "5",
        "--config",
        &cfg,
        "--seed",
        "99",
        "--no-macro-sharing",
        "-o",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let json: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join("result.json")).unwrap()).unwrap();
    assert_eq!(json["seed"], 99);
}

#[test]
fn infeasible_power_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let out = dir.path().join("run");
    let o = pimsyn(&["synth", desk5().to_str().unwrap(), "--power", "0.0001", "--config", &cfg, "-o", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(!out.join("result.json").exists());
}

#[test]
fn usage_errors_exit_with_one() {
    assert_eq!(pimsyn(&["synth", "--bogus"]).status.code(), Some(1));
    assert_eq!(pimsyn(&["synth", desk5().to_str().unwrap()]).status.code(), Some(1));
    assert_eq!(pimsyn(&["synth", desk5().to_str().unwrap(), "--power", "-1"]).status.code(), Some(1));
    assert_eq!(pimsyn(&["synth", "no/such/model.json", "--power", "5"]).status.code(), Some(1));
    assert_eq!(pimsyn(&["--help"]).status.code(), Some(0));
}

#[test]
fn convert_check_lists_layers() {
    let o = pimsyn(&["convert-check", desk5().to_str().unwrap(), "--xb-size", "128"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.starts_with("desk5:"), "{text}");
    assert!(text.contains("total MACs"));
    assert!(text.contains("dag:"));
}

#[test]
fn hardware_file_comes_from_env() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let out = dir.path().join("run");
    let run = |hw: &Path| {
        Command::new(env!("CARGO_BIN_EXE_pimsyn"))
            .args(["synth", desk5().to_str().unwrap(), "--power", "5", "--config", &cfg, "-o", out.to_str().unwrap()])
            .env("PIMSYN_HW", hw)
            .output()
            .unwrap()
    };
    let good = run(&root().join("crates/core/data/isaac_defaults.json"));
    assert!(good.status.success(), "{}", String::from_utf8_lossy(&good.stderr));
    let bad = run(&dir.path().join("missing.json"));
    assert_eq!(bad.status.code(), Some(1));
}
