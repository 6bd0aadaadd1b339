//! End-to-end behavior of the `sntg` binary.

use std::path::Path;
use std::process::{Command, Output};

fn sntg(args: &[&str], mnist_dir: Option<&Path>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_sntg"));
    cmd.args(args);
    if let Some(dir) = mnist_dir {
        cmd.env("SNTG_MNIST_DIR", dir);
    }
    cmd.output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn lists_every_preset() {
    let o = sntg(&["list-presets"], None);
    assert!(o.status.success());
    for name in [
        "two-moons-sntg",
        "four-spins-sntg",
        "mnist-labels",
        "ablation",
        "noisy-labels",
        "graph-source",
    ] {
        assert!(stdout(&o).contains(name), "{name} missing");
    }
}

#[test]
fn dry_run_prints_resolved_config() {
    let o = sntg(
        &[
            "run",
            "ablation",
            "--dry-run",
            "--seed",
            "7",
            "--repeats",
            "2",
        ],
        None,
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = stdout(&o);
    assert!(
        text.contains("seed = 7") && text.contains("repeats = 2"),
        "{text}"
    );
    assert!(text.contains("L_S+R_C+R_S"));
}

#[test]
fn config_errors_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.toml");
    std::fs::write(&path, "name = \"bad\"\n[train]\nlamda1 = 3.0\n").unwrap();
    let o = sntg(
        &["run", "--config", path.to_str().unwrap(), "--dry-run"],
        None,
    );
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("lamda1"), "{}", stderr(&o));

    let o = sntg(&["run", "no-such-preset"], None);
    assert_eq!(o.status.code(), Some(1));
    let o = sntg(&["run", "ablation", "--variant", "nope", "--dry-run"], None);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn missing_mnist_exits_2() {
    let empty = tempfile::tempdir().unwrap();
    let out = tempfile::tempdir().unwrap();
    let o = sntg(
        &[
            "run",
            "mnist-labels",
            "--repeats",
            "1",
            "--variant",
            "pi-100",
            "--out",
            out.path().to_str().unwrap(),
        ],
        Some(empty.path()),
    );
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("SNTG_MNIST_DIR"), "{}", stderr(&o));
}

#[test]
fn short_run_writes_artifacts_and_compares() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("tiny.toml");
    std::fs::write(
        &config,
        r#"name = "tiny"
description = "smoke"
repeats = 2
[dataset]
kind = "two-moons"
points = 200
labels = 4
[train]
epochs = 4
rampup_length = 2
rampdown_length = 1
hidden = [8, 8]
[[variants]]
name = "pi"
train = { sntg = false }
[[variants]]
name = "pi+sntg"
"#,
    )
    .unwrap();
    let out = dir.path().join("runs");
    let o = sntg(
        &[
            "run",
            "--config",
            config.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
        ],
        None,
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let exp = out.join("tiny");
    let seed_dir = exp.join("pi+sntg").join("seed-1");
    for file in [
        "metrics.csv",
        "timings.csv",
        "model.ckpt",
        "run.toml",
        "embeddings.csv",
        "regions.svg",
    ] {
        assert!(seed_dir.join(file).exists(), "{file} missing");
    }

    let summary = exp.join("summary.csv");
    let a = format!("{}:pi", summary.display());
    let o = sntg(&["compare", &a, &a], None);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("p = 1.000000"), "{}", stdout(&o));

    let exported = dir.path().join("emb.csv");
    let o = sntg(
        &[
            "export-embeddings",
            seed_dir.to_str().unwrap(),
            "--out",
            exported.to_str().unwrap(),
        ],
        None,
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(
        std::fs::read_to_string(&exported).unwrap(),
        std::fs::read_to_string(seed_dir.join("embeddings.csv")).unwrap()
    );

    let o = sntg(&["compare", summary.to_str().unwrap(), &a], None);
    assert_eq!(
        o.status.code(),
        Some(2),
        "ambiguous variant should be a data error"
    );
}
