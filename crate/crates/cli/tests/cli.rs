use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

const SHORT: &str = "\
[scenario]
duration = 2.0

[collect]
seconds_per_condition = 4.0

[daiml]
epochs = 2
steps_per_epoch = 5

[classifier]
epochs = 2
";

fn morphnash(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_morphnash"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn short_config(dir: &TempDir) -> String {
    let p = dir.path().join("short.toml");
    std::fs::write(&p, SHORT).unwrap();
    p.to_str().unwrap().to_owned()
}

fn path(dir: &TempDir, name: &str) -> String {
    dir.path().join(name).to_str().unwrap().to_owned()
}

#[test]
fn trim_reports_refined_point() {
    let o = morphnash(&["trim"]);
    assert_eq!(o.status.code(), Some(0));
    let s = stdout(&o);
    assert!(s.contains("refined trim"));
    assert!(s.contains("trim accepted"));
}

#[test]
fn linearize_prints_both_matrices() {
    let o = morphnash(&["linearize"]);
    assert_eq!(o.status.code(), Some(0));
    let s = stdout(&o);
    assert!(s.contains("A =") && s.contains("B ="));
    assert_eq!(
        s.lines().filter(|l| l.ends_with(" rel") || l.ends_with(" abs")).count(),
        35
    );
}

#[test]
fn bad_config_and_usage_exit_four() {
    let dir = TempDir::new().unwrap();
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "[game]\nepsilon = -1.0\n").unwrap();
    assert_eq!(
        morphnash(&["--config", bad.to_str().unwrap(), "trim"]).status.code(),
        Some(4)
    );
    assert_eq!(
        morphnash(&["--config", "/nonexistent/cfg.toml", "trim"]).status.code(),
        Some(4)
    );
    assert_eq!(morphnash(&["no-such-command"]).status.code(), Some(4));
    assert_eq!(morphnash(&["--help"]).status.code(), Some(0));
}

#[test]
fn game_needs_weights() {
    let dir = TempDir::new().unwrap();
    let cfg = short_config(&dir);
    let o = morphnash(&[
        "--config",
        &cfg,
        "simulate",
        "--controller",
        "game",
        "--out",
        &path(&dir, "g.csv"),
    ]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn lqr_runs_compare_to_zero() {
    let dir = TempDir::new().unwrap();
    let cfg = short_config(&dir);
    let (a, b) = (path(&dir, "a.csv"), path(&dir, "b.csv"));
    for out in [&a, &b] {
        let o = morphnash(&[
            "--config",
            &cfg,
            "simulate",
            "--controller",
            "lqr",
            "--out",
            out,
            "--seed",
            "4",
        ]);
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let plot = path(&dir, "plot.csv");
    let o = morphnash(&["--config", &cfg, "compare", "--a", &a, "--b", &b, "--out", &plot]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("0.00"));
    let text = std::fs::read_to_string(&plot).unwrap();
    assert!(text.starts_with("t,error_a,error_b,cost_a,cost_b"));
    assert_eq!(text.lines().count(), 202);
}

#[test]
fn full_pipeline_on_short_settings() {
    let dir = TempDir::new().unwrap();
    let cfg = short_config(&dir);
    let data = path(&dir, "data.csv");
    let (phi, clf) = (path(&dir, "phi.json"), path(&dir, "clf.json"));
    let steps: [Vec<&str>; 3] = [
        vec!["collect", "--out", &data],
        vec!["train-phi", "--data", &data, "--out", &phi],
        vec!["train-classifier", "--data", &data, "--out", &clf],
    ];
    for args in steps {
        let mut full = vec!["--config", cfg.as_str()];
        full.extend(args);
        let o = morphnash(&full);
        assert_eq!(
            o.status.code(),
            Some(0),
            "{full:?}: {}",
            String::from_utf8_lossy(&o.stderr)
        );
    }
    assert!(Path::new(&phi).exists() && Path::new(&clf).exists());
    let log = path(&dir, "game.csv");
    let o = morphnash(&[
        "--config",
        &cfg,
        "simulate",
        "--controller",
        "game",
        "--phi",
        &phi,
        "--classifier",
        &clf,
        "--out",
        &log,
    ]);
    assert!(
        matches!(o.status.code(), Some(0 | 2 | 3)),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    if o.status.code() == Some(0) {
        let header = std::fs::read_to_string(&log).unwrap();
        assert!(header.lines().next().unwrap().ends_with("a_25"));
    }
}
