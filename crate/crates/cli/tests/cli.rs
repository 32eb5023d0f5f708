use std::path::Path;
use std::process::{Command, Output};

use duet_cli::{load_config, ExperimentConfig, Mode};

const SMALL: &str = "n_users = 60\nn_items = 30\ndensity = 0.25\nae_epochs = 8\nepochs = 4\nfolds = 3\n";

fn duet(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_duet"))
        .args(args)
        .current_dir(cwd)
        .env_remove("DUET_LOG")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str], cwd: &Path) -> Output {
    let out = duet(args, cwd);
    assert!(
        out.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn setup() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("c.txt"), SMALL).unwrap();
    ok(
        &["synth", "-c", "c.txt", "--rho", "0.8", "--seed", "7", "--out", "data"],
        dir.path(),
    );
    dir
}

#[test]
fn synth_writes_two_domains_and_truth() {
    let dir = setup();
    let data = dir.path().join("data");
    for d in ["A", "B"] {
        for f in ["interactions", "users", "items", "user_schema", "item_schema"] {
            assert!(data.join(format!("{d}_{f}.csv")).is_file(), "{d}_{f}");
        }
    }
    let truth: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(data.join("truth.json")).unwrap()).unwrap();
    assert!(truth.get("q").is_some());
    let mut rd = csv::Reader::from_path(data.join("A_interactions.csv")).unwrap();
    assert_eq!(rd.headers().unwrap(), vec!["user_id", "item_id", "rating", "timestamp"]);
    let n = rd.records().count();
    assert!(n > 300 && n < 600, "{n}");
    let echo = load_config(&data.join("config.txt")).unwrap();
    assert_eq!(
        (echo.mode, echo.rho, echo.seed, echo.n_users),
        (Mode::Synth, 0.8, 7, 60)
    );
}

#[test]
fn train_then_eval_emits_parseable_metrics() {
    let dir = setup();
    ok(&["train", "-c", "c.txt", "--data", "data", "--out", "run"], dir.path());
    assert!(dir.path().join("run/model.json").is_file());
    let trace = std::fs::read_to_string(dir.path().join("run/fit_trace.csv")).unwrap();
    assert!(trace.starts_with("fold,epoch,loss_a,loss_b\n"));

    for (out, extra) in [("cv", vec![]), ("scored", vec!["--model", "run/model.json"])] {
        let mut args = vec!["eval", "-c", "c.txt", "--data", "data", "--out", out];
        args.extend(extra);
        ok(&args, dir.path());
        let mut rd = csv::Reader::from_path(dir.path().join(out).join("metrics.csv")).unwrap();
        assert_eq!(
            rd.headers().unwrap(),
            vec!["domain", "fold", "rmse", "mae", "precision_at_5", "recall_at_5"]
        );
        let rows: Vec<_> = rd.records().map(|r| r.unwrap()).collect();
        assert_eq!(rows.len(), if out == "cv" { 6 } else { 2 });
        for r in rows {
            let rmse: f64 = r[2].parse().unwrap();
            let mae: f64 = r[3].parse().unwrap();
            let p: f64 = r[4].parse().unwrap();
            assert!(rmse >= mae && mae > 0.0 && (0.0..=1.0).contains(&p));
        }
        let summary: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(dir.path().join(out).join("summary.json")).unwrap()).unwrap();
        assert_eq!(summary["a"]["config"]["alpha"], 0.03);
    }
}

#[test]
fn nmf_lab_trace_is_non_increasing() {
    let dir = tempfile::tempdir().unwrap();
    ok(
        &["nmf-lab", "--alpha", "0.1", "--seed", "1", "--out", "lab"],
        dir.path(),
    );
    let mut rd = csv::Reader::from_path(dir.path().join("lab/nmf_trace.csv")).unwrap();
    assert_eq!(rd.headers().unwrap(), vec!["iter", "loss"]);
    let loss: Vec<f64> = rd.records().map(|r| r.unwrap()[1].parse().unwrap()).collect();
    assert_eq!(loss.len(), 5001);
    for w in loss.windows(2) {
        assert!(w[1] <= w[0], "{} -> {}", w[0], w[1]);
    }
}

#[test]
fn sweep_table_has_row_per_alpha_and_domain() {
    let dir = setup();
    ok(
        &[
            "alpha-sweep",
            "-c",
            "c.txt",
            "--data",
            "data",
            "--out",
            "sw",
            "--alphas",
            "0,0.05",
        ],
        dir.path(),
    );
    let mut rd = csv::Reader::from_path(dir.path().join("sw/sweep.csv")).unwrap();
    let alphas: Vec<String> = rd.records().map(|r| r.unwrap()[0].to_string()).collect();
    assert_eq!(alphas, ["0", "0", "0.05", "0.05"]);
    let per_fold = std::fs::read_to_string(dir.path().join("sw/sweep_metrics.csv")).unwrap();
    assert_eq!(per_fold.lines().count(), 1 + 2 * 2 * 3);
}

#[test]
fn reruns_are_byte_identical() {
    let dir = setup();
    for out in ["r1", "r2"] {
        ok(&["eval", "-c", "c.txt", "--data", "data", "--out", out], dir.path());
    }
    for f in ["metrics.csv", "summary.json", "cv_traces.csv", "config.txt"] {
        let a = std::fs::read(dir.path().join("r1").join(f)).unwrap();
        let b = std::fs::read(dir.path().join("r2").join(f)).unwrap();
        if f == "config.txt" {
            assert_ne!(a, b, "echo records the output path");
        } else {
            assert_eq!(a, b, "{f}");
        }
    }
}

#[test]
fn empty_config_file_gives_defaults() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("empty.txt"), "").unwrap();
    let c = load_config(&dir.path().join("empty.txt")).unwrap();
    assert_eq!(c, ExperimentConfig::default());
    assert_eq!((c.alpha, c.embed_dim, c.epochs), (0.03, 8, 100));
}

#[test]
fn echo_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("c.txt"), "alpha = 0.2\nnmf_max_iters = 50\nseed = 3\n").unwrap();
    ok(&["nmf-lab", "-c", "c.txt", "--out", "lab"], dir.path());
    let echo = dir.path().join("lab/config.txt");
    let reloaded = load_config(&echo).unwrap();
    assert_eq!(reloaded.alpha, 0.2);
    assert_eq!(reloaded.mode, Mode::NmfLab);
    assert_eq!(reloaded.to_text(), std::fs::read_to_string(&echo).unwrap());
    let again = dir.path().join("again.txt");
    std::fs::write(&again, reloaded.to_text()).unwrap();
    assert_eq!(load_config(&again).unwrap(), reloaded);
}

#[test]
fn flags_override_file_keys() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("c.txt"), "alpha = 0.2\nseed = 3\nnmf_max_iters = 20\n").unwrap();
    ok(
        &[
            "nmf-lab",
            "-c",
            "c.txt",
            "--alpha",
            "0.05",
            "--set",
            "nmf_rank=3",
            "--out",
            "lab",
        ],
        dir.path(),
    );
    let echo = load_config(&dir.path().join("lab/config.txt")).unwrap();
    assert_eq!((echo.alpha, echo.seed, echo.nmf_rank), (0.05, 3, 3));
}

#[test]
fn out_of_range_alpha_is_a_single_line_error() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("c.txt"), "alpha = 0.6\n").unwrap();
    let out = duet(&["nmf-lab", "-c", "c.txt", "--out", "lab"], dir.path());
    assert!(!out.status.success());
    let err = stderr(&out);
    assert_eq!(err.lines().count(), 1, "{err}");
    assert!(err.starts_with("duet: error: ") && err.contains("[0, 0.5)"), "{err}");
    assert!(!dir.path().join("lab").exists(), "validation happens before any output");
}

#[test]
fn unknown_key_and_unknown_flag_fail() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("c.txt"), "alhpa = 0.1\n").unwrap();
    let out = duet(&["nmf-lab", "-c", "c.txt"], dir.path());
    assert!(!out.status.success());
    assert!(stderr(&out).contains("unknown config key `alhpa`"));

    let out = duet(&["eval", "--frobnicate"], dir.path());
    assert!(!out.status.success());
    assert!(stderr(&out).contains("Usage"));

    let out = duet(&["eval", "--data", "missing"], dir.path());
    assert!(!out.status.success());
    assert_eq!(stderr(&out).lines().count(), 1);
}

#[test]
fn log_verbosity_comes_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["nmf-lab", "--set", "nmf_max_iters=5", "--out", "lab"];
    let quiet = duet(&args, dir.path());
    assert!(stderr(&quiet).is_empty());
    let loud = Command::new(env!("CARGO_BIN_EXE_duet"))
        .args(args)
        .current_dir(dir.path())
        .env("DUET_LOG", "info")
        .output()
        .unwrap();
    assert!(stderr(&loud).contains("nmf lab"));
}
