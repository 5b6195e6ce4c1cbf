use std::path::Path;
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_pcenet");

const SMALL: &str = r#"{
  "data": {"kind": "synthetic", "n": 120, "m": 5, "d_true": 2, "degree": 2, "seed": 4},
  "vae": {"hidden_dim": 4, "latent_dim": 2, "learning_rate": 0.01, "epochs": 5, "recon_weight": 100.0},
  "pce": {"degree": 2},
  "mmd": {"sigma_grid": [1.0, 2.5], "max_iterations": 30},
  "trials": 2,
  "seed": 3,
  "mc_samples": 200
}"#;

fn pcenet(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().expect("binary runs")
}

fn write_config(dir: &Path) -> String {
    let path = dir.join("small.json");
    std::fs::write(&path, SMALL).unwrap();
    path.to_str().unwrap().to_string()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn help_exits_zero_for_every_subcommand() {
    let o = pcenet(&["--help"]);
    assert_eq!(o.status.code(), Some(0));
    for sub in ["run", "train-vae", "fit-pce", "moments", "evaluate", "baseline-ols", "synth"] {
        let o = pcenet(&[sub, "--help"]);
        assert_eq!(o.status.code(), Some(0), "{sub}");
        assert!(String::from_utf8_lossy(&o.stdout).contains("--"), "{sub}");
    }
    let run_help = String::from_utf8_lossy(&pcenet(&["run", "--help"]).stdout).into_owned();
    for flag in ["--config", "--seed", "--set", "--output", "--parallel-trials"] {
        assert!(run_help.contains(flag), "run help lacks {flag}");
    }
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(pcenet(&["run", "--bogus"]).status.code(), Some(1));
    assert_eq!(pcenet(&[]).status.code(), Some(1));

    let o = pcenet(&["run", "--config", "missing.json"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("missing.json"), "{}", stderr(&o));

    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path());
    let o = pcenet(&["run", "--config", &cfg, "--set", "vae.hiden_dim=3"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("vae.hiden_dim"));

    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, SMALL.replace("\"epochs\": 5", "\"epochs\": \"five\"")).unwrap();
    let o = pcenet(&["run", "--config", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("vae.epochs"), "{}", stderr(&o));
}

#[test]
fn runtime_errors_exit_two_with_stage() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("broken.csv");
    std::fs::write(&csv, "a,b,y\n1,2,3\n4,x,6\n").unwrap();
    let cfg = dir.path().join("csv.json");
    std::fs::write(
        &cfg,
        r#"{"data": {"kind": "csv", "path": "broken.csv", "target": "y"},
            "vae": {"hidden_dim": 2, "latent_dim": 1, "learning_rate": 0.01, "epochs": 1},
            "pce": {"degree": 1}}"#,
    )
    .unwrap();
    let out = dir.path().join("out");
    let o = pcenet(&["run", "--config", cfg.to_str().unwrap(), "--output", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert!(err.contains("data stage"), "{err}");
    assert!(err.contains("row 2") && err.contains("'b'"), "{err}");
}

#[test]
fn run_writes_artifacts_and_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path());
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    let o = pcenet(&["run", "--config", &cfg, "--seed", "7", "--output", a.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let o = pcenet(&[
        "run",
        "--config",
        &cfg,
        "--seed",
        "7",
        "--output",
        b.to_str().unwrap(),
        "--parallel-trials",
        "2",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    for file in [
        "result.json",
        "model.json",
        "trace.json",
        "vae.json",
        "posteriors.json",
        "eval_trial_0.json",
        "eval_trial_1.json",
        "residual_hist.csv",
    ] {
        let x = std::fs::read(a.join(file)).unwrap_or_else(|_| panic!("missing {file}"));
        let y = std::fs::read(b.join(file)).unwrap();
        assert_eq!(x, y, "{file} differs");
    }
    let hist = std::fs::read_to_string(a.join("residual_hist.csv")).unwrap();
    assert!(hist.starts_with("edge_low,edge_high,density"));

    let o = pcenet(&[
        "moments",
        "--model",
        a.join("model.json").to_str().unwrap(),
        "--point-index",
        "3",
        "--k",
        "2",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["k"], 2);
    assert_eq!(v["point_index"], 3);
    assert_eq!(v["method"], "quadrature");
    assert!(v["value"].as_f64().unwrap() >= 0.0);

    let o = pcenet(&[
        "moments",
        "--model",
        a.join("model.json").to_str().unwrap(),
        "--point-index",
        "100000",
    ]);
    assert_eq!(o.status.code(), Some(1));

    let e = dir.path().join("e");
    let o = pcenet(&[
        "evaluate",
        "--config",
        &cfg,
        "--seed",
        "7",
        "--model",
        a.join("model.json").to_str().unwrap(),
        "--output",
        e.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    // Same model, posteriors, split and Monte Carlo streams as trial 0.
    let eval: serde_json::Value =
        serde_json::from_slice(&std::fs::read(e.join("eval.json")).unwrap()).unwrap();
    let trial0: serde_json::Value =
        serde_json::from_slice(&std::fs::read(a.join("eval_trial_0.json")).unwrap()).unwrap();
    assert_eq!(eval, trial0);
}

#[test]
fn single_stage_commands() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path());
    let out = dir.path().join("stages");
    let out_s = out.to_str().unwrap();

    let o = pcenet(&["train-vae", "--config", &cfg, "--output", out_s]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    for f in ["vae.json", "posteriors.json", "split.json", "latents.csv"] {
        assert!(out.join(f).exists(), "{f}");
    }
    let latents = std::fs::read_to_string(out.join("latents.csv")).unwrap();
    assert_eq!(latents.lines().count(), 121);

    let o = pcenet(&["fit-pce", "--config", &cfg, "--output", out_s, "--method", "ols"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(out.join("model.json").exists() && out.join("trace.json").exists());

    let o = pcenet(&["baseline-ols", "--config", &cfg, "--output", out_s]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!(v["summary"]["epsilon_gen"]["median"].as_f64().is_some());

    let o = pcenet(&["baseline-ols", "--config", &cfg, "--output", out_s, "--true-latents"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    for e in v["epsilon_gen"].as_array().unwrap() {
        assert!(e.as_f64().unwrap() < 1e-6);
    }

    let csv = dir.path().join("synth.csv");
    let args = ["synth", "--n", "50", "--m", "4", "--d-true", "2", "--degree", "2", "--seed", "1"];
    let o = pcenet(&[&args[..], &["--output", csv.to_str().unwrap()]].concat());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = std::fs::read_to_string(&csv).unwrap();
    assert!(text.starts_with("x0,x1,x2,x3,y"));
    assert_eq!(text.lines().count(), 51);
    let o = pcenet(&["synth", "--n", "5", "--m", "2", "--d-true", "3", "--degree", "1", "--output", "x.csv"]);
    assert_eq!(o.status.code(), Some(1));
}
