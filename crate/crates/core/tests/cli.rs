use std::path::Path;
use std::process::{Command, Output};

use triage_fusion::experiment::{ExperimentConfig, Grid, OUT_DIR_ENV};

fn triage(args: &[&str], env_out: Option<&Path>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_triage"));
    cmd.args(args).env_remove(OUT_DIR_ENV);
    if let Some(d) = env_out {
        cmd.env(OUT_DIR_ENV, d);
    }
    cmd.output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn small_config(dir: &Path) -> std::path::PathBuf {
    let mut cfg = ExperimentConfig::default();
    if let Some(s) = cfg.data.synthetic.as_mut() {
        s.n_records = 2500;
    }
    cfg.dropout.symmetric = vec![0.0, 0.3];
    cfg.dropout.asymmetric = Grid {
        min: 0.0,
        max: 0.5,
        step: 0.5,
    };
    cfg.dropout.selected = 0.3;
    let path = dir.join("small.toml");
    std::fs::write(&path, cfg.to_toml_string().unwrap()).unwrap();
    path
}

#[test]
fn full_workflow_through_every_subcommand() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path());
    let cfg = cfg.to_str().unwrap();
    let out = tmp.path().join("out");
    let out_s = out.to_str().unwrap();

    for sub in ["synth", "preprocess", "train", "sweep", "strata", "report"] {
        let o = triage(&[sub, "-c", cfg, "--out", out_s, "--format", "csv,tex"], None);
        assert_eq!(code(&o), 0, "{sub}: {}", String::from_utf8_lossy(&o.stderr));
    }
    for f in [
        "synthetic.csv",
        "adult.csv",
        "pediatric.csv",
        "rejects.csv",
        "adult.tex",
        "pediatric.tex",
        "strata.csv",
        "heatmap.csv",
        "sweep_symmetric.csv",
        "confusion.csv",
        "report.json",
    ] {
        assert!(out.join(f).is_file(), "missing {f}");
    }
    let heat = std::fs::read_to_string(out.join("heatmap.csv")).unwrap();
    // 2x2 grid, two cohorts, two metrics
    assert_eq!(heat.lines().count(), 1 + 4 * 2 * 2);
}

#[test]
fn seed_override_changes_the_data() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path());
    let cfg = cfg.to_str().unwrap();
    let read = |seed: &str| {
        let out = tmp.path().join(seed);
        let o = triage(&["synth", "-c", cfg, "--seed", seed, "--out", out.to_str().unwrap()], None);
        assert_eq!(code(&o), 0);
        std::fs::read(out.join("synthetic.csv")).unwrap()
    };
    assert_eq!(read("1"), read("1"));
    assert_ne!(read("1"), read("2"));
}

#[test]
fn env_var_sets_the_default_output_dir() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path());
    let env_dir = tmp.path().join("from-env");
    let o = triage(&["synth", "-c", cfg.to_str().unwrap()], Some(&env_dir));
    assert_eq!(code(&o), 0);
    assert!(env_dir.join("synthetic.csv").is_file());
}

#[test]
fn config_errors_exit_2() {
    let tmp = tempfile::tempdir().unwrap();
    let bad = tmp.path().join("bad.toml");
    std::fs::write(&bad, "seed = 1\nno_such_key = true\n").unwrap();
    let out = tmp.path().join("out");
    assert_eq!(code(&triage(&["train", "-c", bad.to_str().unwrap()], Some(&out))), 2);
    assert_eq!(code(&triage(&["train", "-c", "/nonexistent/config.toml"], Some(&out))), 2);
    assert_eq!(code(&triage(&["report", "--format", "pdf"], Some(&out))), 2);

    let cfg = small_config(tmp.path());
    let text = std::fs::read_to_string(&cfg).unwrap().replace("selected = 0.3", "selected = 1.5");
    std::fs::write(&bad, text).unwrap();
    assert_eq!(code(&triage(&["sweep", "-c", bad.to_str().unwrap()], Some(&out))), 2);
}

#[test]
fn data_errors_exit_3() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg_path = tmp.path().join("csv.toml");
    let mut cfg = ExperimentConfig::default();
    cfg.data.synthetic = None;
    cfg.data.csv = Some(tmp.path().join("missing.csv"));
    std::fs::write(&cfg_path, cfg.to_toml_string().unwrap()).unwrap();
    let out = tmp.path().join("out");
    let o = triage(&["train", "-c", cfg_path.to_str().unwrap()], Some(&out));
    assert_eq!(code(&o), 3, "{}", String::from_utf8_lossy(&o.stderr));

    // a sweep with nothing cached
    let small = small_config(tmp.path());
    let o = triage(&["sweep", "-c", small.to_str().unwrap()], Some(&out));
    assert_eq!(code(&o), 3);
    assert!(String::from_utf8_lossy(&o.stderr).contains("triage train"));
}

#[test]
fn training_failures_exit_4() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = ExperimentConfig::default();
    if let Some(s) = cfg.data.synthetic.as_mut() {
        s.n_records = 1500;
    }
    // an absurd step size makes the attention model diverge
    cfg.text.use_attention = true;
    cfg.text.attention.learning_rate = 1e300;
    cfg.text.attention.epochs = 1;
    let cfg_path = tmp.path().join("diverge.toml");
    std::fs::write(&cfg_path, cfg.to_toml_string().unwrap()).unwrap();
    let o = triage(&["train", "-c", cfg_path.to_str().unwrap()], Some(&tmp.path().join("out")));
    assert_eq!(code(&o), 4, "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn sparse_classes_are_data_errors() {
    let tmp = tempfile::tempdir().unwrap();
    let csv = tmp.path().join("no_level_1.csv");
    let header = "record_id,gender,age_at_visit,temperature,heartrate,resp_rate,pain_score,o2_sat,systolic_bp,diastolic_bp,chief_complaint,acuity";
    let rows: Vec<String> = (0..80)
        .map(|i| format!("a{i},0,{},37.0,90,18,3,98,120,80,chest pain,{}", 30 + i % 40, 2 + i % 4))
        .collect();
    std::fs::write(&csv, format!("{header}\n{}\n", rows.join("\n"))).unwrap();
    let mut cfg = ExperimentConfig::default();
    cfg.data.synthetic = None;
    cfg.data.csv = Some(csv);
    let cfg_path = tmp.path().join("no_level_1.toml");
    std::fs::write(&cfg_path, cfg.to_toml_string().unwrap()).unwrap();
    let o = triage(&["train", "-c", cfg_path.to_str().unwrap()], Some(&tmp.path().join("out")));
    assert_eq!(code(&o), 3, "{}", String::from_utf8_lossy(&o.stderr));
}
