//! `dbwqs fit`: posterior summaries, effects and diagnostics for a CSV dataset.

use serde::Serialize;

use super::output::{create_dir, format_float, summary_fields, write_json, CsvTable, SUMMARY_COLUMNS};
use super::{report, RunConfig};
use crate::diagnostics::{autocorrelation, summarize, ParameterSummary};
use crate::effects::{absolute_change, relative_change, EffectTable};
use crate::linalg::Matrix;
use crate::model::{compute_means, CompositionMatrix, DbwqsData, DbwqsModel};
use crate::quantizer::{fit_quantile_scorer_named, QuantileScorer};
use crate::sampler::{run_model, PosteriorDraws};
use crate::{Error, Result};

/// A dataset read from CSV together with its column roles.
#[derive(Debug, Clone)]
pub struct LoadedData {
    pub data: DbwqsData,
    pub scorer: QuantileScorer,
    pub outcome_names: Vec<String>,
    pub covariate_names: Vec<String>,
}

fn parse_cell(value: &str, row: usize, column: &str) -> Result<f64> {
    value.trim().parse::<f64>().map_err(|_| {
        Error::InvalidInput(format!("row {row}, column '{column}': cannot parse {value:?} as a number"))
    })
}

/// Reads the configured input CSV and builds the model data.
pub fn read_dataset(config: &RunConfig) -> Result<LoadedData> {
    let input = config.input.as_ref().ok_or_else(|| Error::Config("`input` is required".into()))?;
    if config.outcome_columns.len() < 2 {
        return Err(Error::Config("at least two outcome_columns are required".into()));
    }
    if config.exposure_columns.is_empty() {
        return Err(Error::Config("at least one exposure column is required".into()));
    }
    let roles: Vec<&String> =
        config.outcome_columns.iter().chain(&config.exposure_columns).chain(&config.covariate_columns).collect();
    for (i, name) in roles.iter().enumerate() {
        if roles[..i].contains(name) {
            return Err(Error::Config(format!("column '{name}' is assigned more than once")));
        }
    }

    let mut reader = csv::Reader::from_path(input)
        .map_err(|e| Error::InvalidInput(format!("cannot read {}: {e}", input.display())))?;
    let header: Vec<String> = reader.headers()?.iter().map(|h| h.trim().to_string()).collect();
    let index = |name: &String| {
        header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::InvalidInput(format!("column '{name}' not found in input header")))
    };
    let cols = |names: &[String]| names.iter().map(index).collect::<Result<Vec<_>>>();
    let (yc, ec, xc) = (cols(&config.outcome_columns)?, cols(&config.exposure_columns)?, cols(&config.covariate_columns)?);

    let (mut y, mut e, mut x) = (Vec::new(), Vec::new(), Vec::new());
    let mut n = 0;
    for (r, record) in reader.records().enumerate() {
        let record = record?;
        let row = r + 1;
        let take = |idx: &[usize], names: &[String], out: &mut Vec<f64>| -> Result<()> {
            for (&c, name) in idx.iter().zip(names) {
                let cell = record.get(c).ok_or_else(|| Error::InvalidInput(format!("row {row} is missing column '{name}'")))?;
                out.push(parse_cell(cell, row, name)?);
            }
            Ok(())
        };
        take(&yc, &config.outcome_columns, &mut y)?;
        take(&ec, &config.exposure_columns, &mut e)?;
        take(&xc, &config.covariate_columns, &mut x)?;
        n += 1;
    }
    if n == 0 {
        return Err(Error::InvalidInput("the input has no data rows".into()));
    }
    let y = CompositionMatrix::from_raw(
        Matrix::from_vec(n, yc.len(), y)?,
        config.zero_policy,
        config.simplex_tolerance,
    )?;
    let exposures = Matrix::from_vec(n, ec.len(), e)?;
    let scorer = fit_quantile_scorer_named(&exposures, config.n_quantiles, config.exposure_columns.clone())?;
    let q = scorer.score(&exposures)?;
    let data = DbwqsData::new(y, q, Matrix::from_vec(n, xc.len(), x)?)?;
    Ok(LoadedData {
        data,
        scorer,
        outcome_names: config.outcome_columns.clone(),
        covariate_names: config.covariate_columns.clone(),
    })
}

/// Parameter label with category, exposure and covariate names substituted.
fn display_name(name: &str, loaded: &LoadedData) -> String {
    let inner = |s: &str| s.split_once('[').and_then(|(_, r)| r.strip_suffix(']')).map(str::to_string);
    let pick = |names: &[String], idx: &str| idx.parse::<usize>().ok().and_then(|i| names.get(i - 1)).cloned();
    let Some(idx) = inner(name) else { return name.to_string() };
    let exposures = loaded.scorer.exposure_names();
    let label = if name.starts_with("theta[") {
        pick(&loaded.outcome_names, &idx)
    } else if name.starts_with("w[") || name.starts_with("pi[") {
        pick(exposures, &idx)
    } else if name.starts_with("beta[") {
        idx.split_once(',').and_then(|(k, j)| Some(format!("{},{}", pick(&loaded.outcome_names, k)?, pick(&loaded.covariate_names, j)?)))
    } else {
        None
    };
    match label {
        Some(l) => format!("{}[{l}]", &name[..name.find('[').unwrap_or(0)]),
        None => name.to_string(),
    }
}

fn summary_table(summaries: &[ParameterSummary], loaded: &LoadedData) -> CsvTable {
    let mut header = vec!["parameter", "label"];
    header.extend(SUMMARY_COLUMNS);
    let mut t = CsvTable::new(&header);
    for s in summaries {
        let mut row = vec![s.name.clone(), display_name(&s.name, loaded)];
        row.extend(summary_fields(s));
        t.push(row);
    }
    t
}

fn weights_table(summaries: &[ParameterSummary], loaded: &LoadedData) -> CsvTable {
    let mut header = vec!["exposure"];
    header.extend(SUMMARY_COLUMNS);
    let mut t = CsvTable::new(&header);
    for (m, name) in loaded.scorer.exposure_names().iter().enumerate() {
        let s = summaries.iter().find(|s| s.name == format!("w[{}]", m + 1)).expect("every weight is summarized");
        let mut row = vec![name.clone()];
        row.extend(summary_fields(s));
        t.push(row);
    }
    t
}

/// Effect rows: estimate, sd, 95% and 80% intervals, ESS and R-hat per category.
pub(crate) fn effects_table(tables: &[EffectTable], category_names: &[String]) -> CsvTable {
    let mut header = vec!["scale", "category", "estimate"];
    header.extend(&SUMMARY_COLUMNS[1..]);
    let mut t = CsvTable::new(&header);
    for table in tables {
        for e in &table.effects {
            let mut row = vec![table.scale.label().to_string(), category_names[e.category - 1].clone()];
            row.extend(summary_fields(&e.summary));
            t.push(row);
        }
    }
    t
}

fn trace_names(names: &[String]) -> Vec<usize> {
    (0..names.len())
        .filter(|&i| names[i].starts_with("theta[") || names[i].starts_with("w[") || names[i] == "phi")
        .collect()
}

fn trace_table(draws: &PosteriorDraws, loaded: &LoadedData) -> CsvTable {
    let params = trace_names(&draws.names);
    let mut header: Vec<String> =
        ["chain", "draw", "accept_stat", "tree_depth", "n_leapfrog", "divergent", "energy"].map(String::from).to_vec();
    header.extend(params.iter().map(|&i| display_name(&draws.names[i], loaded)));
    let mut t = CsvTable::new(&header);
    for (c, chain) in draws.chains.iter().enumerate() {
        for (d, st) in chain.stats.iter().enumerate() {
            let mut row = vec![
                (c + 1).to_string(),
                (d + 1).to_string(),
                format_float(st.accept_stat),
                st.tree_depth.to_string(),
                st.n_leapfrog.to_string(),
                u8::from(st.divergent).to_string(),
                format_float(st.energy),
            ];
            row.extend(params.iter().map(|&i| format_float(draws.constrained[c].get(d, i))));
            t.push(row);
        }
    }
    t
}

fn draws_table(draws: &PosteriorDraws, loaded: &LoadedData) -> CsvTable {
    let mut header = vec!["chain".to_string(), "draw".to_string()];
    header.extend(draws.names.iter().map(|n| display_name(n, loaded)));
    let mut t = CsvTable::new(&header);
    for (c, m) in draws.constrained.iter().enumerate() {
        for d in 0..m.rows() {
            let mut row = vec![(c + 1).to_string(), (d + 1).to_string()];
            row.extend(m.row(d).iter().map(|&v| format_float(v)));
            t.push(row);
        }
    }
    t
}

fn acf_table(draws: &PosteriorDraws, loaded: &LoadedData, max_lag: usize) -> CsvTable {
    let mut t = CsvTable::new(&["parameter", "chain", "lag", "autocorrelation"]);
    for i in trace_names(&draws.names) {
        let label = display_name(&draws.names[i], loaded);
        for (c, series) in draws.parameter_chains(i).iter().enumerate() {
            for (lag, r) in autocorrelation(series, max_lag).into_iter().enumerate() {
                t.push(vec![label.clone(), (c + 1).to_string(), lag.to_string(), format_float(r)]);
            }
        }
    }
    t
}

/// Posterior mean of `mu_i`, one row per subject.
fn fitted_table(draws: &PosteriorDraws, loaded: &LoadedData) -> Result<CsvTable> {
    let data = &loaded.data;
    let (n, k) = (data.n(), data.shape().k);
    let mut acc = vec![0.0; n * k];
    let mut count = 0.0;
    for c in 0..draws.n_chains() {
        for d in 0..draws.n_draws() {
            let state = draws.state(c, d);
            let mu = compute_means(&data.mixture_indices(&state.w), data.x(), &state.theta, &state.beta)?;
            acc.iter_mut().zip(mu.as_slice()).for_each(|(a, m)| *a += m);
            count += 1.0;
        }
    }
    let mut header = vec!["row".to_string()];
    header.extend(loaded.outcome_names.iter().cloned());
    let mut t = CsvTable::new(&header);
    for i in 0..n {
        let mut row = vec![(i + 1).to_string()];
        row.extend(acc[i * k..(i + 1) * k].iter().map(|a| format_float(a / count)));
        t.push(row);
    }
    Ok(t)
}

#[derive(Serialize)]
struct ChainManifest {
    chain: usize,
    rng_stream: u64,
    step_size: f64,
    inv_mass: Vec<f64>,
    warmup_divergences: usize,
    divergences: usize,
    mean_accept_stat: f64,
}

#[derive(Serialize)]
struct FitManifest<'a> {
    tool: &'static str,
    version: &'static str,
    command: &'static str,
    seed: u64,
    rng: &'static str,
    config: &'a RunConfig,
    n: usize,
    k: usize,
    m: usize,
    j: usize,
    quantile_cutpoints: &'a [Vec<f64>],
    chains: Vec<ChainManifest>,
    outputs: Vec<&'static str>,
}

/// Fits the configured dataset and writes every output file.
pub fn run_fit(config: &RunConfig) -> Result<()> {
    config.check_command("fit")?;
    config.priors.validate()?;
    let sampler = config.sampler_config();
    sampler.validate()?;
    let loaded = read_dataset(config)?;
    let out = config.output_dir();
    create_dir(&out)?;

    let model = DbwqsModel::new(loaded.data.clone(), config.priors)?;
    let draws = run_model(&model, &sampler)?;
    let summaries = draws
        .names
        .iter()
        .enumerate()
        .map(|(i, name)| summarize(name, &draws.parameter_chains(i)))
        .collect::<Result<Vec<_>>>()?;
    let effects = [absolute_change(&draws, &loaded.data)?, relative_change(&draws)?];

    let mut outputs = vec!["summary.csv", "weights.csv", "effects.csv", "trace.csv", "acf.csv", "fitted.csv"];
    let write = |name: &str, t: CsvTable| t.write(&out.join(name));
    write("summary.csv", summary_table(&summaries, &loaded))?;
    write("weights.csv", weights_table(&summaries, &loaded))?;
    write("effects.csv", effects_table(&effects, &loaded.outcome_names))?;
    write("trace.csv", trace_table(&draws, &loaded))?;
    write("acf.csv", acf_table(&draws, &loaded, config.acf_max_lag))?;
    write("fitted.csv", fitted_table(&draws, &loaded)?)?;
    if config.write_draws {
        write("draws.csv", draws_table(&draws, &loaded))?;
        outputs.push("draws.csv");
    }
    for s in summaries.iter().filter(|s| s.degenerate) {
        eprintln!("warning: {} has zero posterior variance; R-hat and ESS are undefined", s.name);
    }

    let shape = loaded.data.shape();
    let manifest = FitManifest {
        tool: "dbwqs",
        version: env!("CARGO_PKG_VERSION"),
        command: "fit",
        seed: sampler.seed,
        rng: "ChaCha8, one stream per chain (chain index + 1)",
        config,
        n: loaded.data.n(),
        k: shape.k,
        m: shape.m,
        j: shape.j,
        quantile_cutpoints: loaded.scorer.cutpoints(),
        chains: draws
            .chains
            .iter()
            .enumerate()
            .map(|(c, ch)| ChainManifest {
                chain: c + 1,
                rng_stream: c as u64 + 1,
                step_size: ch.adaptation.step_size,
                inv_mass: ch.adaptation.inv_mass.clone(),
                warmup_divergences: ch.adaptation.warmup_divergences,
                divergences: ch.divergences(),
                mean_accept_stat: ch.mean_accept_stat(),
            })
            .collect(),
        outputs,
    };
    write_json(&out.join("manifest.json"), &manifest)
}

/// Runs `fit` and returns the process exit code.
pub fn cmd_fit(config: &RunConfig) -> i32 {
    report(run_fit(config))
}

