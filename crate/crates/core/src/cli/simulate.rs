//! `dbwqs simulate` and `dbwqs compare`.

use serde::Serialize;

use super::output::{create_dir, format_float, write_json, CsvTable};
use super::{report, RunConfig};
use crate::model::PriorConfig;
use crate::sampler::SamplerConfig;
use crate::simulation::{derive_seed, run_comparison, run_study, ParameterMetrics, ScenarioSpec};
use crate::{Error, Result};

#[derive(Serialize)]
struct StudyManifest<'a> {
    tool: &'static str,
    version: &'static str,
    command: &'static str,
    seed: u64,
    rng: &'static str,
    n_scenarios: usize,
    scenarios: &'a [ScenarioSpec],
    sampler: &'a SamplerConfig,
    priors: &'a PriorConfig,
    dry_run: bool,
    outputs: Vec<&'static str>,
}

const RNG_NOTE: &str = "ChaCha8; scenario seeds derive from the run seed and scenario position, \
                        repetition seeds from the scenario seed and repetition index";

/// Scenarios requested by a `simulate` config, with derived seeds.
pub fn study_scenarios(config: &RunConfig) -> Result<Vec<ScenarioSpec>> {
    let seed = config.effective_seed();
    match (&config.grid, &config.scenarios) {
        (Some(_), Some(_)) => Err(Error::Config("give either `grid` or `scenarios`, not both".into())),
        (None, None) => Err(Error::Config("simulate needs a `grid` or a `scenarios` list".into())),
        (Some(grid), None) => grid.scenarios(seed),
        (None, Some(list)) => {
            if list.is_empty() {
                return Err(Error::Config("the scenario list is empty".into()));
            }
            list.iter()
                .enumerate()
                .map(|(i, s)| {
                    let spec = ScenarioSpec { seed: derive_seed(seed, i as u64), ..s.clone() };
                    spec.validate()?;
                    Ok(spec)
                })
                .collect()
        }
    }
}

fn metric_fields(m: &ParameterMetrics) -> Vec<String> {
    [m.mean, m.bias, m.rmse, m.mae, m.mean_sd, m.coverage].into_iter().map(format_float).collect()
}

fn prepare(config: &RunConfig, command: &'static str, scenarios: &[ScenarioSpec], outputs: Vec<&'static str>) -> Result<std::path::PathBuf> {
    config.priors.validate()?;
    let sampler = config.sampler_config();
    sampler.validate()?;
    let out = config.output_dir();
    create_dir(&out)?;
    let manifest = StudyManifest {
        tool: "dbwqs",
        version: env!("CARGO_PKG_VERSION"),
        command,
        seed: sampler.seed,
        rng: RNG_NOTE,
        n_scenarios: scenarios.len(),
        scenarios,
        sampler: &sampler,
        priors: &config.priors,
        dry_run: config.dry_run,
        outputs,
    };
    write_json(&out.join("manifest.json"), &manifest)?;
    Ok(out)
}

/// Runs the simulation study and writes `metrics.csv`. The manifest listing
/// every scenario is written before any fitting starts.
pub fn run_simulate(config: &RunConfig) -> Result<()> {
    config.check_command("simulate")?;
    let scenarios = study_scenarios(config)?;
    let out = prepare(config, "simulate", &scenarios, vec!["metrics.csv"])?;
    if config.dry_run {
        return Ok(());
    }
    let results = run_study(&scenarios, &config.priors, &config.sampler_config())?;

    let mut t = CsvTable::new(&[
        "scenario", "n", "k", "m", "j", "rho", "phi", "reps", "n_succeeded", "n_failed", "parameter", "truth", "mean",
        "bias", "rmse", "mae", "mean_sd", "coverage", "max_rhat", "min_ess",
    ]);
    for (i, r) in results.iter().enumerate() {
        let s = &r.spec;
        for m in &r.metrics {
            let mut row = vec![
                (i + 1).to_string(),
                s.n.to_string(),
                s.k.to_string(),
                s.m.to_string(),
                s.j.to_string(),
                format_float(s.rho),
                format_float(s.phi),
                s.reps.to_string(),
                r.n_succeeded().to_string(),
                r.n_failed().to_string(),
                m.parameter.clone(),
                format_float(m.truth),
            ];
            row.extend(metric_fields(m));
            row.push(format_float(m.max_rhat));
            row.push(format_float(m.min_ess));
            t.push(row);
        }
    }
    t.write(&out.join("metrics.csv"))?;
    for r in results.iter().filter(|r| r.n_failed() > 0) {
        eprintln!("warning: {} of {} repetitions failed in scenario {}", r.n_failed(), r.spec.reps, r.spec.label());
    }
    if results.iter().all(|r| r.n_succeeded() == 0) {
        return Err(Error::Adaptation("every repetition failed".into()));
    }
    Ok(())
}

/// Runs the joint versus individual comparison and writes `compare.csv`.
pub fn run_compare(config: &RunConfig) -> Result<()> {
    config.check_command("compare")?;
    let spec = config.scenario.as_ref().ok_or_else(|| Error::Config("compare needs a `scenario` block".into()))?;
    let spec = ScenarioSpec { seed: derive_seed(config.effective_seed(), 0), ..spec.clone() };
    spec.validate()?;
    let out = prepare(config, "compare", std::slice::from_ref(&spec), vec!["compare.csv"])?;
    if config.dry_run {
        return Ok(());
    }
    let result = run_comparison(&spec, &config.priors, &config.sampler_config())?;
    let mut header = vec!["category".to_string(), "truth".to_string()];
    for approach in ["joint", "individual"] {
        for col in ["mean", "bias", "rmse", "mae", "mean_sd", "coverage"] {
            header.push(format!("{approach}_{col}"));
        }
    }
    header.extend(["n_succeeded".to_string(), "n_failed".to_string()]);
    let mut t = CsvTable::new(&header);
    let ok = result.reps.len() - result.n_failed();
    for r in &result.rows {
        let mut row = vec![r.category.to_string(), format_float(r.truth)];
        row.extend(metric_fields(&r.joint));
        row.extend(metric_fields(&r.individual));
        row.extend([ok.to_string(), result.n_failed().to_string()]);
        t.push(row);
    }
    t.write(&out.join("compare.csv"))?;
    if ok == 0 {
        return Err(Error::Adaptation("every repetition failed".into()));
    }
    Ok(())
}

pub fn cmd_simulate(config: &RunConfig) -> i32 {
    report(run_simulate(config))
}

pub fn cmd_compare(config: &RunConfig) -> i32 {
    report(run_compare(config))
}
