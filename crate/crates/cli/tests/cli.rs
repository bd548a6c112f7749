use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn rkls(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rkls"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("failed to launch rkls")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn report(dir: &Path, name: &str) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(dir.join(name)).unwrap()).unwrap()
}

const SYNTHETIC: &str = r#"
dataset = "synthetic"
n_train = 120
n_test = 60
num_features = 8
num_classes = 3
separation = 8.0
preprocess = []
kernel = "gaussian"
sigma = 4.0
method = "mp"
block_size = 30
max_iters = 8
seed = 1
eval_every = 2
"#;

#[test]
fn synthetic_direct_run_reports_eta() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("exp.toml"), SYNTHETIC).unwrap();
    let out = rkls(dir.path(), &["train", "--config", "exp.toml", "--method", "direct"]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(stdout(&out).contains("final eta: 0.00%"), "{}", stdout(&out));
    let rep = report(dir.path(), "report.json");
    assert_eq!(rep["eta"], 0.0);
    assert_eq!(rep["method"], "direct");
    assert_eq!(rep["num_test"], 60);
    assert_eq!(rep["confusion_counts"].as_array().unwrap().len(), 3);
    let trace = fs::read_to_string(dir.path().join("trace.csv")).unwrap();
    assert_eq!(trace.lines().next(), Some("t,residual,eta"));
    assert_eq!(trace.lines().count(), 2);
}

#[test]
fn report_eta_matches_last_trace_eta() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("exp.toml"), SYNTHETIC).unwrap();
    let out = rkls(dir.path(), &["train", "--config", "exp.toml", "--separation", "3", "--max-iters", "6"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let trace = fs::read_to_string(dir.path().join("trace.csv")).unwrap();
    let lines: Vec<&str> = trace.lines().collect();
    assert_eq!(lines.len(), 7);
    assert!(lines[1].ends_with(','), "no eta on odd iterations: {}", lines[1]);
    let last_eta: f64 = lines[6].rsplit(',').next().unwrap().parse().unwrap();
    let rep = report(dir.path(), "report.json");
    assert_eq!(rep["eta"].as_f64().unwrap(), last_eta);
    assert_eq!(rep["iterations"], 6);
}

#[test]
fn same_seed_gives_identical_traces() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("exp.toml"), SYNTHETIC).unwrap();
    for method in ["nystrom", "kaczmarz", "mp", "hybrid"] {
        let mut traces = Vec::new();
        for run in 0..2 {
            let name = format!("{method}{run}.csv");
            let out = rkls(
                dir.path(),
                &["train", "--config", "exp.toml", "--method", method, "--trace-csv", &name],
            );
            assert!(out.status.success(), "{}", stderr(&out));
            traces.push(fs::read(dir.path().join(&name)).unwrap());
        }
        assert_eq!(traces[0], traces[1], "{method}");
    }
}

#[test]
fn missing_dataset_file_is_named() {
    let dir = tempfile::tempdir().unwrap();
    let out = rkls(
        dir.path(),
        &[
            "train",
            "--dataset",
            "mnist",
            "--train-images",
            "no/such/train-images-idx3-ubyte",
            "--train-labels",
            "x",
            "--test-images",
            "x",
            "--test-labels",
            "x",
        ],
    );
    assert!(!out.status.success());
    assert!(stderr(&out).contains("no/such/train-images-idx3-ubyte"), "{}", stderr(&out));

    let out = rkls(dir.path(), &["train", "--config", "absent.toml"]);
    assert!(!out.status.success());
    assert!(stderr(&out).contains("absent.toml"));

    let out = rkls(dir.path(), &["train", "--eval-every", "0"]);
    assert!(!out.status.success());
    assert!(stderr(&out).contains("eval_every"));
}

#[test]
fn model_lifecycle() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(d.join("exp.toml"), SYNTHETIC).unwrap();
    for seed in ["1", "2"] {
        let model = format!("m{seed}.bin");
        let out = rkls(d, &["train", "--config", "exp.toml", "--seed", seed, "--model", &model]);
        assert!(out.status.success(), "{}", stderr(&out));
    }

    let out = rkls(d, &["inspect", "m1.bin"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let text = stdout(&out);
    assert!(text.contains("classes:     3"), "{text}");
    assert!(text.contains("samples:     120"), "{text}");
    assert!(text.contains("gaussian(sigma=4)"), "{text}");

    let out = rkls(d, &["average", "-o", "avg.bin", "m1.bin", "m2.bin"]);
    assert!(out.status.success(), "{}", stderr(&out));

    let out = rkls(
        d,
        &["evaluate", "--input", "avg.bin", "--config", "exp.toml", "--report-json", "eval.json"],
    );
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(stdout(&out).contains("eta: 0.00%"), "{}", stdout(&out));
    assert!(stdout(&out).contains("confusion"));
    let rep = report(d, "eval.json");
    assert_eq!(rep["error_rate"], 0.0);

    fs::write(d.join("junk.bin"), b"JUNKJUNK").unwrap();
    let out = rkls(d, &["inspect", "junk.bin"]);
    assert!(!out.status.success());
    assert!(stderr(&out).contains("magic"), "{}", stderr(&out));
}

#[test]
fn parallel_runs_are_averaged() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(d.join("exp.toml"), SYNTHETIC).unwrap();
    let out = rkls(
        d,
        &["train", "--config", "exp.toml", "--method", "kaczmarz", "--parallel-runs", "2", "--model", "avg.bin"],
    );
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(stdout(&out).contains("averaged 2 models"));
    for f in ["trace.run0.csv", "trace.run1.csv", "avg.run0.bin", "avg.run1.bin", "avg.bin", "report.json"] {
        assert!(d.join(f).is_file(), "{f} missing");
    }
    assert_ne!(fs::read(d.join("trace.run0.csv")).unwrap(), fs::read(d.join("trace.run1.csv")).unwrap());
}

#[test]
fn print_config_applies_flags() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("exp.toml"), SYNTHETIC).unwrap();
    let out = rkls(
        dir.path(),
        &["train", "--config", "exp.toml", "--print-config", "--block_size", "7", "--preprocess", "spectral_concat"],
    );
    assert!(out.status.success(), "{}", stderr(&out));
    let text = stdout(&out);
    assert!(text.contains("block_size = 7"), "{text}");
    assert!(text.contains("preprocess = [\"spectral_concat\"]"), "{text}");
    assert!(text.contains("precision = \"f32\""), "{text}");
}
