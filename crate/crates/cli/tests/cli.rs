use std::path::Path;
use std::process::{Command, Output};

fn mvsdf(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mvsdf"))
        .arg("--out")
        .arg(out)
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write_config(dir: &Path, value: serde_json::Value) -> String {
    let path = dir.join("config.json");
    std::fs::write(&path, value.to_string()).unwrap();
    path.to_string_lossy().into_owned()
}

#[test]
fn show_config_applies_profile_file_and_seed() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), serde_json::json!({ "n_train": 7, "stage_two": { "epochs": 3 } }));
    let o = mvsdf(&dir.path().join("run"), &["--config", &cfg, "--seed", "42", "show-config"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["profile"], "desk");
    assert_eq!(v["seed"], 42);
    assert_eq!(v["n_train"], 7);
    assert_eq!(v["stage_two"]["epochs"], 3);
    assert_eq!(v["n_test"], 5);

    let o = mvsdf(&dir.path().join("run"), &["--profile", "full", "show-config"]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["profile"], "full");
    assert_eq!(v["n_train"], 100);
    assert!(!dir.path().join("run").exists());
}

#[test]
fn invalid_configs_exit_nonzero_with_a_config_diagnostic() {
    let dir = tempfile::tempdir().unwrap();
    let run = dir.path().join("run");
    for (value, needle) in [
        (serde_json::json!({ "sweeps": 0 }), "sweeps must be positive"),
        (serde_json::json!({ "points": 0 }), "points must be positive"),
        (serde_json::json!({ "no_such_field": 1 }), "no_such_field"),
        (serde_json::json!({ "profile": "huge" }), "unknown profile"),
    ] {
        let cfg = write_config(dir.path(), value);
        let o = mvsdf(&run, &["--config", &cfg, "gen-shapes"]);
        assert!(!o.status.success());
        let err = stderr(&o);
        assert!(err.contains("error: config"), "{err}");
        assert!(err.contains(needle), "{err}");
        assert!(!run.exists());
    }
    let o = mvsdf(&run, &["--config", "/nonexistent/config.json", "gen-shapes"]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("error: config"));
}

#[test]
fn gen_shapes_runs_once_then_skips() {
    let dir = tempfile::tempdir().unwrap();
    let run = dir.path().join("run");
    let cfg = write_config(
        dir.path(),
        serde_json::json!({ "n_train": 2, "n_test": 1, "vehicles": { "resolution": 24 } }),
    );
    let o = mvsdf(&run, &["--config", &cfg, "gen-shapes"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(stdout(&o).trim(), "gen-shapes: done");
    for f in ["shapes/train_000.obj", "shapes/train_001.obj", "shapes/test_000.obj", "shapes/index.json"] {
        assert!(run.join(f).is_file(), "{f}");
    }
    assert!(run.join("manifests/gen-shapes.json").is_file());

    let o = mvsdf(&run, &["--config", &cfg, "gen-shapes"]);
    assert!(o.status.success());
    assert_eq!(stdout(&o).trim(), "gen-shapes: up to date");

    let o = mvsdf(&run, &["--config", &cfg, "--seed", "5", "gen-shapes"]);
    assert!(o.status.success());
    assert_eq!(stdout(&o).trim(), "gen-shapes: done");
}

#[test]
fn stage_failures_are_tagged_with_the_stage() {
    let dir = tempfile::tempdir().unwrap();
    let run = dir.path().join("run");
    let cfg = write_config(
        dir.path(),
        serde_json::json!({
            "n_train": 1,
            "n_test": 1,
            "vehicles": { "resolution": 24 },
            "samples": { "n_surface": 50, "n_uniform": 50 },
            "decoder": { "latent_dim": 4, "hidden": 8, "layers": 2, "skip_layer": 1 },
            "stage_one": { "epochs": 1 },
            "lidar": { "max_range": 1.0 },
        }),
    );
    let o = mvsdf(&run, &["--config", &cfg, "gen-sweeps"]);
    assert!(!o.status.success());
    let err = stderr(&o);
    assert!(err.contains("stage `gen-sweeps` failed"), "{err}");
    assert!(stdout(&o).is_empty() || !stdout(&o).contains("gen-sweeps: done"));
}
