use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use dbwqs::cli::{self, CsvTable, RunConfig, EXIT_INPUT, EXIT_OK};
use dbwqs::simulation::{generate_dataset, ScenarioSpec, TrueParams};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::json;

/// Writes a simulated K=3, M=3, J=1 dataset and returns its path.
fn write_dataset(dir: &Path, n: usize) -> PathBuf {
    let spec = ScenarioSpec::new(n, 3, 3, 1, 0.3);
    let truth = TrueParams::for_scenario(&spec).unwrap();
    let sim = generate_dataset(&spec, &truth, &mut ChaCha8Rng::seed_from_u64(17)).unwrap();
    let path = dir.join("data.csv");
    let mut w = csv::Writer::from_path(&path).unwrap();
    w.write_record(["id", "y_a", "y_b", "y_c", "lead", "arsenic", "mercury", "age"]).unwrap();
    for i in 0..n {
        let mut rec = vec![(i + 1).to_string()];
        rec.extend(sim.data.y().row(i).iter().map(|v| format!("{v:.17e}")));
        rec.extend(sim.exposures.row(i).iter().map(|v| v.to_string()));
        rec.push(sim.data.x().get(i, 0).to_string());
        w.write_record(&rec).unwrap();
    }
    w.flush().unwrap();
    path
}

fn fit_config(dir: &Path) -> serde_json::Value {
    json!({
        "command": "fit",
        "input": "data.csv",
        "outcome_columns": ["y_a", "y_b", "y_c"],
        "exposure_columns": ["lead", "arsenic", "mercury"],
        "covariate_columns": ["age"],
        "sampler": {"n_chains": 2, "n_iter": 400, "n_warmup": 150},
        "seed": 5,
        "write_draws": true,
        "acf_max_lag": 10,
        "output_dir": dir.join("out").to_string_lossy(),
    })
}

fn save_config(dir: &Path, name: &str, value: &serde_json::Value) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, serde_json::to_string_pretty(value).unwrap()).unwrap();
    path
}

fn load(dir: &Path, value: &serde_json::Value) -> RunConfig {
    RunConfig::load(&save_config(dir, "config.json", value)).unwrap()
}

fn parse(cell: &str) -> f64 {
    cell.parse().unwrap()
}

#[test]
fn fit_writes_every_output() {
    let dir = tempfile::tempdir().unwrap();
    write_dataset(dir.path(), 60);
    let config = load(dir.path(), &fit_config(dir.path()));
    assert_eq!(cli::cmd_fit(&config), EXIT_OK);
    let out = dir.path().join("out");
    for f in ["summary.csv", "weights.csv", "effects.csv", "draws.csv", "trace.csv", "acf.csv", "fitted.csv", "manifest.json"] {
        assert!(out.join(f).exists(), "{f} missing");
    }

    let fitted = CsvTable::read(&out.join("fitted.csv")).unwrap();
    assert_eq!(fitted.rows.len(), 60);
    for row in &fitted.rows {
        let s: f64 = row[1..].iter().map(|c| parse(c)).sum();
        assert!((s - 1.0).abs() < 1e-12);
    }

    let effects = CsvTable::read(&out.join("effects.csv")).unwrap();
    for col in ["estimate", "ci95_lower", "ci95_upper", "ci80_lower", "ci80_upper", "ess", "rhat"] {
        assert!(effects.column(col).is_some(), "effects.csv lacks {col}");
    }
    // three absolute rows and two relative rows
    assert_eq!(effects.rows.len(), 5);
    assert_eq!(effects.rows[0][1], "y_a");

    let weights = CsvTable::read(&out.join("weights.csv")).unwrap();
    let names: Vec<&str> = weights.rows.iter().map(|r| r[0].as_str()).collect();
    assert_eq!(names, ["lead", "arsenic", "mercury"]);
    let wsum: f64 = weights.rows.iter().map(|r| parse(&r[1])).sum();
    assert!((wsum - 1.0).abs() < 1e-9);

    let summary = CsvTable::read(&out.join("summary.csv")).unwrap();
    let labels: Vec<&str> = summary.rows.iter().map(|r| r[1].as_str()).collect();
    assert!(labels.contains(&"theta[y_c]"));
    assert!(labels.contains(&"beta[y_b,age]"));

    let acf = CsvTable::read(&out.join("acf.csv")).unwrap();
    let lag0: Vec<f64> = acf.rows.iter().filter(|r| r[2] == "0").map(|r| parse(&r[3])).collect();
    assert!(!lag0.is_empty() && lag0.iter().all(|&v| v == 1.0));

    let manifest: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["seed"], 5);
    assert_eq!(manifest["chains"].as_array().unwrap().len(), 2);
}

#[test]
fn csv_outputs_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    write_dataset(dir.path(), 40);
    let config = load(dir.path(), &fit_config(dir.path()));
    assert_eq!(cli::cmd_fit(&config), EXIT_OK);
    let path = dir.path().join("out/summary.csv");
    let table = CsvTable::read(&path).unwrap();
    for row in &table.rows {
        for cell in &row[2..] {
            assert_eq!(&cli::format_float(parse(cell)), cell);
        }
    }
    let copy = dir.path().join("copy.csv");
    table.write(&copy).unwrap();
    assert_eq!(fs::read(&path).unwrap(), fs::read(&copy).unwrap());
}

#[test]
fn off_simplex_row_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data.csv");
    let mut text = String::from("a,b,c,e1\n");
    for i in 0..12 {
        let row = if i == 2 { "0.3,0.3,0.3" } else { "0.2,0.3,0.5" };
        text.push_str(&format!("{row},{}\n", i as f64 * 0.7));
    }
    fs::write(&data, text).unwrap();
    let value = json!({
        "input": "data.csv",
        "outcome_columns": ["a", "b", "c"],
        "exposure_columns": ["e1"],
        "sampler": {"n_iter": 200, "n_warmup": 100},
        "output_dir": "out",
    });
    let config = load(dir.path(), &value);
    let err = cli::run_fit(&config).unwrap_err();
    assert!(err.to_string().contains("row 3 not on simplex"), "{err}");
    assert_eq!(cli::cmd_fit(&config), EXIT_INPUT);
}

#[test]
fn schema_violations_exit_with_input_code() {
    let dir = tempfile::tempdir().unwrap();
    write_dataset(dir.path(), 30);
    let mut value = fit_config(dir.path());
    value["exposure_columns"] = json!(["lead", "cadmium"]);
    let err = cli::run_fit(&load(dir.path(), &value)).unwrap_err();
    assert!(err.to_string().contains("column 'cadmium' not found"), "{err}");

    let mut value = fit_config(dir.path());
    value["outcome_columns"] = json!(["y_a"]);
    assert_eq!(cli::cmd_fit(&load(dir.path(), &value)), EXIT_INPUT);

    let mut value = fit_config(dir.path());
    value["sampler"]["n_warmup"] = json!(500);
    assert_eq!(cli::cmd_fit(&load(dir.path(), &value)), EXIT_INPUT);

    let mut value = fit_config(dir.path());
    value["unknown_key"] = json!(1);
    assert!(RunConfig::load(&save_config(dir.path(), "bad.json", &value)).is_err());

    let mut value = fit_config(dir.path());
    value["command"] = json!("simulate");
    assert_eq!(cli::cmd_fit(&load(dir.path(), &value)), EXIT_INPUT);
}

#[test]
fn zero_policy_replaces_zeros() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data.csv");
    let mut text = String::from("a,b,e1\n");
    for i in 0..20 {
        let row = if i == 0 { "0,1" } else { "0.4,0.6" };
        text.push_str(&format!("{row},{}\n", (i * 7 % 20) as f64));
    }
    fs::write(&data, text).unwrap();
    let mut value = json!({
        "input": "data.csv",
        "outcome_columns": ["a", "b"],
        "exposure_columns": ["e1"],
        "sampler": {"n_chains": 1, "n_iter": 200, "n_warmup": 100},
        "output_dir": "out",
    });
    assert_eq!(cli::cmd_fit(&load(dir.path(), &value)), EXIT_INPUT);
    value["zero_policy"] = json!("replace:0.001");
    assert_eq!(cli::cmd_fit(&load(dir.path(), &value)), EXIT_OK);
}

#[test]
fn fit_is_byte_identical_on_rerun() {
    let dir = tempfile::tempdir().unwrap();
    write_dataset(dir.path(), 40);
    let config = load(dir.path(), &fit_config(dir.path()));
    assert_eq!(cli::cmd_fit(&config), EXIT_OK);
    let first = dir.path().join("first");
    fs::rename(dir.path().join("out"), &first).unwrap();
    assert_eq!(cli::cmd_fit(&config), EXIT_OK);
    for f in ["summary.csv", "weights.csv", "effects.csv", "draws.csv", "trace.csv", "acf.csv", "fitted.csv", "manifest.json"] {
        assert_eq!(fs::read(first.join(f)).unwrap(), fs::read(dir.path().join("out").join(f)).unwrap(), "{f} differs");
    }
}

#[test]
fn simulate_minimal_grid() {
    let dir = tempfile::tempdir().unwrap();
    let value = json!({
        "grid": {"n": [150], "k": [3], "m": [3], "j": [0], "rho": [0.3], "reps": 2},
        "sampler": {"n_iter": 400, "n_warmup": 150},
        "seed": 3,
        "output_dir": "out",
    });
    let config = load(dir.path(), &value);
    assert_eq!(cli::cmd_simulate(&config), EXIT_OK);
    let metrics = CsvTable::read(&dir.path().join("out/metrics.csv")).unwrap();
    let params: Vec<&str> = metrics.rows.iter().map(|r| r[metrics.column("parameter").unwrap()].as_str()).collect();
    assert_eq!(params, ["theta[2]", "theta[3]", "w[1]", "w[2]", "w[3]", "phi"]);
    assert!(metrics.rows.iter().all(|r| r[0] == "1" && r[7] == "2"));
}

#[test]
fn full_grid_is_enumerated_before_fitting() {
    let dir = tempfile::tempdir().unwrap();
    let value = json!({"grid": {}, "dry_run": true, "output_dir": "out"});
    assert_eq!(cli::cmd_simulate(&load(dir.path(), &value)), EXIT_OK);
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("out/manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["n_scenarios"], 72);
    assert_eq!(manifest["scenarios"].as_array().unwrap().len(), 72);
    assert!(!dir.path().join("out/metrics.csv").exists());
}

#[test]
fn invalid_study_configs() {
    let dir = tempfile::tempdir().unwrap();
    let value = json!({"grid": {"n": [150], "k": [3], "m": [3], "j": [0], "rho": [0.3], "reps": 0}, "output_dir": "out"});
    assert_eq!(cli::cmd_simulate(&load(dir.path(), &value)), EXIT_INPUT);
    let value = json!({"grid": {"k": [4]}, "output_dir": "out"});
    assert_eq!(cli::cmd_simulate(&load(dir.path(), &value)), EXIT_INPUT);
    let value = json!({"output_dir": "out"});
    assert_eq!(cli::cmd_simulate(&load(dir.path(), &value)), EXIT_INPUT);
    assert_eq!(cli::cmd_compare(&load(dir.path(), &value)), EXIT_INPUT);
}

#[test]
fn compare_two_categories_agree() {
    let dir = tempfile::tempdir().unwrap();
    let value = json!({
        "scenario": {"n": 150, "k": 2, "m": 3, "j": 0, "rho": 0.3, "reps": 2, "theta": [0.0, 0.6]},
        "sampler": {"n_iter": 1000, "n_warmup": 300},
        "seed": 8,
        "output_dir": "out",
    });
    assert_eq!(cli::cmd_compare(&load(dir.path(), &value)), EXIT_OK);
    let t = CsvTable::read(&dir.path().join("out/compare.csv")).unwrap();
    assert_eq!(t.rows.len(), 1);
    let get = |c: &str| parse(&t.rows[0][t.column(c).unwrap()]);
    let sd = get("joint_mean_sd");
    assert!((get("joint_mean") - get("individual_mean")).abs() < 0.5 * sd, "joint and individual differ");
}

#[test]
fn binary_entry_point() {
    let exe = env!("CARGO_BIN_EXE_dbwqs");
    let status = Command::new(exe).arg("--help").output().unwrap();
    assert_eq!(status.status.code(), Some(0));
    let status = Command::new(exe).args(["fit"]).output().unwrap();
    assert_eq!(status.status.code(), Some(2));

    let dir = tempfile::tempdir().unwrap();
    write_dataset(dir.path(), 30);
    let mut value = fit_config(dir.path());
    value["sampler"] = json!({"n_chains": 1, "n_iter": 200, "n_warmup": 100});
    let config = save_config(dir.path(), "run.json", &value);
    let out = dir.path().join("cli-out");
    let result = Command::new(exe)
        .args(["fit", "--config"])
        .arg(&config)
        .args(["--seed", "11", "--zero-policy", "reject", "--out"])
        .arg(&out)
        .output()
        .unwrap();
    assert_eq!(result.status.code(), Some(0), "{}", String::from_utf8_lossy(&result.stderr));
    let manifest: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["seed"], 11);

    let result = Command::new(exe).args(["fit", "--config"]).arg(&config).args(["--zero-policy", "drop"]).output().unwrap();
    assert_eq!(result.status.code(), Some(2));
}
