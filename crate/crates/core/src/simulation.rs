//! Simulation studies: synthetic DBWQS data, repeated fits and Monte Carlo
//! performance metrics, and the comparison of the joint model with separate
//! two-category fits of each outcome.
//!
//! Data generation for one repetition:
//! 1. covariates `x_ij ~ N(0, 1)`;
//! 2. coefficients `beta_kj ~ U(-1, 1)` for the non-reference categories;
//! 3. exposures from an equicorrelated normal (unit variance, pairwise
//!    correlation `rho`), cut into quartile scores;
//! 4. the index `S_i` from the true weights;
//! 5. means `mu_i` through the softmax link;
//! 6. `alpha_i = phi mu_i`;
//! 7. `y_i ~ Dirichlet(alpha_i)`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::diagnostics::{summarize, ParameterSummary};
use crate::dirichlet::{self, DirichletParams};
use crate::linalg::Matrix;
use crate::model::{compute_means, CompositionMatrix, DbwqsData, DbwqsModel, PriorConfig};
use crate::quantizer::{fit_quantile_scorer, QuantileMatrix};
use crate::sampler::{run_model, SamplerConfig};
use crate::{Error, Result};

fn default_phi() -> f64 {
    5.0
}

fn default_reps() -> usize {
    100
}

fn default_n_quantiles() -> usize {
    4
}

/// One simulation scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSpec {
    pub n: usize,
    pub k: usize,
    pub m: usize,
    pub j: usize,
    #[serde(default = "default_phi")]
    pub phi: f64,
    pub rho: f64,
    #[serde(default = "default_reps")]
    pub reps: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_n_quantiles")]
    pub n_quantiles: usize,
    /// Overrides the tabulated `theta` (length `k`, first entry 0).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta: Option<Vec<f64>>,
    /// Overrides the tabulated weights (length `m`).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub w: Option<Vec<f64>>,
}

impl ScenarioSpec {
    pub fn new(n: usize, k: usize, m: usize, j: usize, rho: f64) -> Self {
        Self {
            n,
            k,
            m,
            j,
            phi: default_phi(),
            rho,
            reps: default_reps(),
            seed: 0,
            n_quantiles: default_n_quantiles(),
            theta: None,
            w: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.reps == 0 {
            return Err(Error::Config("reps must be at least 1".into()));
        }
        if self.k < 2 || self.m < 1 {
            return Err(Error::Config(format!("need k >= 2 and m >= 1, got k={} m={}", self.k, self.m)));
        }
        if self.n_quantiles < 2 {
            return Err(Error::Config("n_quantiles must be at least 2".into()));
        }
        if self.n < 2 * self.n_quantiles {
            return Err(Error::Config(format!("n={} is too small for {} quantiles", self.n, self.n_quantiles)));
        }
        if !(0.0..1.0).contains(&self.rho) {
            return Err(Error::Config(format!("rho must lie in [0, 1), got {}", self.rho)));
        }
        if !(self.phi > 0.0 && self.phi.is_finite()) {
            return Err(Error::Config(format!("phi must be positive, got {}", self.phi)));
        }
        TrueParams::for_scenario(self).map(|_| ())
    }

    pub fn label(&self) -> String {
        format!("n{}_K{}_M{}_J{}_rho{}", self.n, self.k, self.m, self.j, self.rho)
    }
}

/// Scenario grid; each list defaults to the full set of studied values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSpec {
    pub n: Vec<usize>,
    pub k: Vec<usize>,
    pub m: Vec<usize>,
    pub j: Vec<usize>,
    pub rho: Vec<f64>,
    pub phi: f64,
    pub reps: usize,
    pub n_quantiles: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub theta: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub w: Option<Vec<f64>>,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            n: vec![150, 300],
            k: vec![3, 6, 9],
            m: vec![3, 6, 9],
            j: vec![0, 3],
            rho: vec![0.3, 0.6],
            phi: default_phi(),
            reps: default_reps(),
            n_quantiles: default_n_quantiles(),
            theta: None,
            w: None,
        }
    }
}

impl GridSpec {
    /// Scenarios in `n, k, m, j, rho` nesting order, each with a seed derived
    /// from `seed` and its position.
    pub fn scenarios(&self, seed: u64) -> Result<Vec<ScenarioSpec>> {
        let mut out = Vec::new();
        for &n in &self.n {
            for &k in &self.k {
                for &m in &self.m {
                    for &j in &self.j {
                        for &rho in &self.rho {
                            let spec = ScenarioSpec {
                                n,
                                k,
                                m,
                                j,
                                phi: self.phi,
                                rho,
                                reps: self.reps,
                                seed: derive_seed(seed, out.len() as u64),
                                n_quantiles: self.n_quantiles,
                                theta: self.theta.clone(),
                                w: self.w.clone(),
                            };
                            spec.validate()?;
                            out.push(spec);
                        }
                    }
                }
            }
        }
        if out.is_empty() {
            return Err(Error::Config("the scenario grid is empty".into()));
        }
        Ok(out)
    }
}

/// Mixes `base` and `index` into a new seed (SplitMix64 finalizer).
pub fn derive_seed(base: u64, index: u64) -> u64 {
    let mut z = base ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Fixed true values of a scenario. `beta` is drawn per repetition.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrueParams {
    pub theta: Vec<f64>,
    pub w: Vec<f64>,
    pub phi: f64,
}

impl TrueParams {
    /// Tabulated truths for `k` in {3, 6, 9} and `m` in {3, 6, 9}.
    pub fn tabulated(k: usize, m: usize, phi: f64) -> Result<Self> {
        Ok(Self { theta: tabulated_theta(k)?, w: tabulated_w(m)?, phi })
    }

    pub fn for_scenario(spec: &ScenarioSpec) -> Result<Self> {
        let theta = match &spec.theta {
            Some(t) => t.clone(),
            None => tabulated_theta(spec.k)?,
        };
        let w = match &spec.w {
            Some(w) => w.clone(),
            None => tabulated_w(spec.m)?,
        };
        if theta.len() != spec.k || theta[0] != 0.0 || theta.iter().any(|t| !t.is_finite()) {
            return Err(Error::Config(format!("theta must have {} finite entries with theta[1] = 0", spec.k)));
        }
        let sum: f64 = w.iter().sum();
        if w.len() != spec.m || w.iter().any(|&v| !(v >= 0.0)) || (sum - 1.0).abs() > 1e-12 {
            return Err(Error::Config(format!("w must be {} non-negative weights summing to 1", spec.m)));
        }
        Ok(Self { theta, w, phi: spec.phi })
    }
}

fn tabulated_theta(k: usize) -> Result<Vec<f64>> {
    match k {
        3 => Ok(vec![0.0, 0.0, -0.9]),
        6 => Ok(vec![0.0, 0.0, -0.9, -0.5, 0.8, 0.9]),
        9 => Ok(vec![0.0, 0.0, -0.5, -0.85, 0.8, 0.9, -0.2, 0.1, -0.3]),
        _ => Err(Error::Config(format!("no tabulated theta for k={k}; supply theta explicitly"))),
    }
}

fn tabulated_w(m: usize) -> Result<Vec<f64>> {
    match m {
        3 => Ok(vec![0.8, 0.0, 0.2]),
        6 => Ok(vec![0.3, 0.1, 0.1, 0.1, 0.2, 0.2]),
        9 => Ok(vec![0.4, 0.3, 0.2, 0.1, 0.0, 0.0, 0.0, 0.0, 0.0]),
        _ => Err(Error::Config(format!("no tabulated weights for m={m}; supply w explicitly"))),
    }
}

/// One generated dataset with the values used to produce it.
#[derive(Debug, Clone)]
pub struct SimulatedData {
    pub data: DbwqsData,
    pub exposures: Matrix,
    /// `K x J`, first row zero.
    pub beta: Matrix,
    pub truth: TrueParams,
}

impl SimulatedData {
    /// `(name, value)` for every parameter with a known true value.
    pub fn truth_values(&self) -> Vec<(String, f64)> {
        let k = self.truth.theta.len();
        let j = self.beta.cols();
        let mut out: Vec<(String, f64)> = (2..=k).map(|c| (format!("theta[{c}]"), self.truth.theta[c - 1])).collect();
        for c in 2..=k {
            out.extend((1..=j).map(|jj| (format!("beta[{c},{jj}]"), self.beta.get(c - 1, jj - 1))));
        }
        out.extend(self.truth.w.iter().enumerate().map(|(m, &v)| (format!("w[{}]", m + 1), v)));
        out.push(("phi".into(), self.truth.phi));
        out
    }
}

/// Equicorrelated standard normal exposures, `z = sqrt(rho) u + sqrt(1 - rho) e`.
pub fn equicorrelated_normal<R: Rng + ?Sized>(n: usize, m: usize, rho: f64, rng: &mut R) -> Matrix {
    let (a, b) = (rho.sqrt(), (1.0 - rho).sqrt());
    let mut out = Matrix::zeros(n, m);
    for i in 0..n {
        let common: f64 = rng.sample(StandardNormal);
        for v in out.row_mut(i) {
            let e: f64 = rng.sample(StandardNormal);
            *v = a * common + b * e;
        }
    }
    out
}

/// Generates one dataset for `spec` with truths `truth`.
pub fn generate_dataset<R: Rng + ?Sized>(spec: &ScenarioSpec, truth: &TrueParams, rng: &mut R) -> Result<SimulatedData> {
    let (n, k, m, j) = (spec.n, spec.k, spec.m, spec.j);
    let mut x = Matrix::zeros(n, j);
    for i in 0..n {
        for v in x.row_mut(i) {
            *v = rng.sample(StandardNormal);
        }
    }
    let mut beta = Matrix::zeros(k, j);
    for c in 1..k {
        for v in beta.row_mut(c) {
            *v = rng.random_range(-1.0..1.0);
        }
    }
    let exposures = equicorrelated_normal(n, m, spec.rho, rng);
    let q: QuantileMatrix = fit_quantile_scorer(&exposures, spec.n_quantiles)?.score(&exposures)?;
    let s: Vec<f64> = (0..n)
        .map(|i| q.row(i).iter().zip(&truth.w).map(|(&qv, w)| qv as f64 * w).sum())
        .collect();
    let mu = compute_means(&s, &x, &truth.theta, &beta)?;
    let mut y = Matrix::zeros(n, k);
    for i in 0..n {
        let alpha = DirichletParams::new(mu.row(i).iter().map(|v| truth.phi * v).collect())?;
        let draw = dirichlet::sample(&alpha, rng)?;
        y.row_mut(i).copy_from_slice(draw.values());
    }
    let data = DbwqsData::new(CompositionMatrix::new(y)?, q, x)?;
    Ok(SimulatedData { data, exposures, beta, truth: truth.clone() })
}

/// Posterior summaries of one successful fit.
#[derive(Debug, Clone, PartialEq)]
pub struct FitSummary {
    pub summaries: Vec<ParameterSummary>,
    pub divergences: usize,
}

impl FitSummary {
    pub fn get(&self, name: &str) -> Option<&ParameterSummary> {
        self.summaries.iter().find(|s| s.name == name)
    }
}

/// Fits the joint model and summarizes every constrained parameter.
pub fn fit_and_summarize(data: &DbwqsData, priors: &PriorConfig, sampler: &SamplerConfig) -> Result<FitSummary> {
    let model = DbwqsModel::new(data.clone(), *priors)?;
    let draws = run_model(&model, sampler)?;
    let summaries = draws
        .names
        .iter()
        .enumerate()
        .map(|(idx, name)| summarize(name, &draws.parameter_chains(idx)))
        .collect::<Result<_>>()?;
    Ok(FitSummary { summaries, divergences: draws.total_divergences() })
}

/// Outcome of one repetition.
#[derive(Debug, Clone)]
pub struct RepResult {
    pub rep: usize,
    pub seed: u64,
    pub truth: Vec<(String, f64)>,
    /// Error message when the fit failed.
    pub fit: std::result::Result<FitSummary, String>,
}

/// Point estimate and interval of one parameter in one repetition.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub truth: f64,
    pub mean: f64,
    /// NaN when unavailable.
    pub sd: f64,
    /// `None` when no interval was produced.
    pub ci95: Option<(f64, f64)>,
    pub ess: f64,
    pub rhat: f64,
}

impl Estimate {
    pub fn from_summary(truth: f64, s: &ParameterSummary) -> Self {
        Self { truth, mean: s.mean, sd: s.sd, ci95: Some(s.ci95), ess: s.ess, rhat: s.rhat }
    }

    /// A bare point estimate without uncertainty.
    pub fn point(truth: f64, mean: f64) -> Self {
        Self { truth, mean, sd: f64::NAN, ci95: None, ess: f64::NAN, rhat: f64::NAN }
    }
}

/// Monte Carlo performance of one parameter across repetitions.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParameterMetrics {
    pub parameter: String,
    /// Average true value (it varies across repetitions for `beta`).
    pub truth: f64,
    pub n_reps: usize,
    pub mean: f64,
    pub bias: f64,
    pub rmse: f64,
    pub mae: f64,
    /// Average posterior standard deviation.
    pub mean_sd: f64,
    /// Share of 95% intervals containing the truth; NaN without intervals.
    pub coverage: f64,
    /// Largest R-hat and smallest ESS over repetitions; NaN when unavailable.
    pub max_rhat: f64,
    pub min_ess: f64,
}

/// Bias, RMSE, MAE, average posterior SD and coverage of `estimates`.
pub fn compute_metrics(parameter: &str, estimates: &[Estimate]) -> ParameterMetrics {
    let n = estimates.len() as f64;
    let avg = |f: &dyn Fn(&Estimate) -> f64| estimates.iter().map(f).sum::<f64>() / n;
    let sds: Vec<f64> = estimates.iter().map(|e| e.sd).filter(|s| s.is_finite()).collect();
    let intervals: Vec<bool> = estimates
        .iter()
        .filter_map(|e| e.ci95.map(|(lo, hi)| lo <= e.truth && e.truth <= hi))
        .collect();
    ParameterMetrics {
        parameter: parameter.to_string(),
        truth: avg(&|e| e.truth),
        n_reps: estimates.len(),
        mean: avg(&|e| e.mean),
        bias: avg(&|e| e.mean - e.truth),
        rmse: avg(&|e| (e.mean - e.truth).powi(2)).sqrt(),
        mae: avg(&|e| (e.mean - e.truth).abs()),
        mean_sd: if sds.is_empty() { f64::NAN } else { sds.iter().sum::<f64>() / sds.len() as f64 },
        coverage: if intervals.is_empty() {
            f64::NAN
        } else {
            intervals.iter().filter(|&&c| c).count() as f64 / intervals.len() as f64
        },
        max_rhat: extreme(estimates.iter().map(|e| e.rhat), f64::max),
        min_ess: extreme(estimates.iter().map(|e| e.ess), f64::min),
    }
}

fn extreme(values: impl Iterator<Item = f64>, pick: fn(f64, f64) -> f64) -> f64 {
    values.filter(|v| v.is_finite()).reduce(pick).unwrap_or(f64::NAN)
}

/// All repetitions of one scenario with their aggregated metrics.
#[derive(Debug, Clone)]
pub struct ScenarioResult {
    pub spec: ScenarioSpec,
    pub reps: Vec<RepResult>,
    pub metrics: Vec<ParameterMetrics>,
}

impl ScenarioResult {
    pub fn n_failed(&self) -> usize {
        self.reps.iter().filter(|r| r.fit.is_err()).count()
    }

    pub fn n_succeeded(&self) -> usize {
        self.reps.len() - self.n_failed()
    }

    /// Summaries of every successful fit.
    pub fn fits(&self) -> impl Iterator<Item = &FitSummary> {
        self.reps.iter().filter_map(|r| r.fit.as_ref().ok())
    }
}

fn rep_sampler(sampler: &SamplerConfig, rep_seed: u64, stream: u64) -> SamplerConfig {
    SamplerConfig { seed: derive_seed(rep_seed, stream), ..sampler.clone() }
}

fn rep_data(spec: &ScenarioSpec, truth: &TrueParams, rep_seed: u64) -> Result<SimulatedData> {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(rep_seed, 0));
    generate_dataset(spec, truth, &mut rng)
}

/// Aggregates repetitions into per-parameter metrics, skipping failed fits.
pub fn aggregate(reps: &[RepResult]) -> Vec<ParameterMetrics> {
    let Some(first) = reps.iter().find(|r| r.fit.is_ok()) else {
        return Vec::new();
    };
    first
        .truth
        .iter()
        .map(|(name, _)| {
            let estimates: Vec<Estimate> = reps
                .iter()
                .filter_map(|r| {
                    let fit = r.fit.as_ref().ok()?;
                    let truth = r.truth.iter().find(|(n, _)| n == name)?.1;
                    Some(Estimate::from_summary(truth, fit.get(name)?))
                })
                .collect();
            compute_metrics(name, &estimates)
        })
        .collect()
}

/// Runs every repetition of every scenario. Repetitions run concurrently with
/// seeds derived from the scenario seed, so results do not depend on scheduling.
pub fn run_study(grid: &[ScenarioSpec], priors: &PriorConfig, sampler: &SamplerConfig) -> Result<Vec<ScenarioResult>> {
    if grid.is_empty() {
        return Err(Error::Config("the scenario grid is empty".into()));
    }
    sampler.validate()?;
    let truths = grid.iter().map(|s| s.validate().and_then(|_| TrueParams::for_scenario(s))).collect::<Result<Vec<_>>>()?;
    let cells: Vec<(usize, usize)> = grid.iter().enumerate().flat_map(|(s, spec)| (0..spec.reps).map(move |r| (s, r))).collect();
    let results = cells
        .par_iter()
        .map(|&(s, rep)| {
            let seed = derive_seed(grid[s].seed, rep as u64);
            let sim = rep_data(&grid[s], &truths[s], seed)?;
            let fit = fit_and_summarize(&sim.data, priors, &rep_sampler(sampler, seed, 1)).map_err(|e| e.to_string());
            Ok(RepResult { rep, seed, truth: sim.truth_values(), fit })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut results = results.into_iter();
    Ok(grid
        .iter()
        .map(|spec| {
            let reps: Vec<RepResult> = results.by_ref().take(spec.reps).collect();
            ScenarioResult { spec: spec.clone(), metrics: aggregate(&reps), reps }
        })
        .collect())
}

/// Two-category composition `(1 - y_k, y_k)` for 0-based category `k`.
pub fn individual_outcome(data: &DbwqsData, k: usize) -> Result<DbwqsData> {
    let y = data.y();
    if k >= y.categories() {
        return Err(Error::Dimension(format!("category {} out of range", k + 1)));
    }
    let mut pair = Matrix::zeros(data.n(), 2);
    for i in 0..data.n() {
        let p = y.row(i)[k];
        pair.set(i, 0, 1.0 - p);
        pair.set(i, 1, p);
    }
    DbwqsData::new(CompositionMatrix::new(pair)?, data.q().clone(), data.x().clone())
}

/// Separate two-category fits of categories `2..=K`, each against its
/// complement. Returns the summary of each fit's `theta[2]`, labelled with the
/// original category.
pub fn fit_individual_outcomes(
    data: &DbwqsData,
    priors: &PriorConfig,
    sampler: &SamplerConfig,
) -> Result<Vec<ParameterSummary>> {
    let k = data.shape().k;
    if k < 2 {
        return Err(Error::InvalidInput("need at least two outcome categories".into()));
    }
    (1..k)
        .map(|c| {
            let pair = individual_outcome(data, c)?;
            let config = SamplerConfig { seed: derive_seed(sampler.seed, c as u64), ..sampler.clone() };
            let fit = fit_and_summarize(&pair, priors, &config)?;
            let mut theta = fit.get("theta[2]").expect("two-category fit has theta[2]").clone();
            theta.name = format!("theta[{}]", c + 1);
            Ok(theta)
        })
        .collect()
}

/// Joint versus individual estimates of `theta` in one repetition.
#[derive(Debug, Clone)]
pub struct ComparisonRep {
    pub rep: usize,
    pub seed: u64,
    /// Per category `k >= 2`: `(truth, joint, individual)`.
    pub fit: std::result::Result<Vec<(f64, ParameterSummary, ParameterSummary)>, String>,
}

/// Side-by-side metrics for one category.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonRow {
    pub category: usize,
    pub truth: f64,
    pub joint: ParameterMetrics,
    pub individual: ParameterMetrics,
}

#[derive(Debug, Clone)]
pub struct ComparisonResult {
    pub spec: ScenarioSpec,
    pub reps: Vec<ComparisonRep>,
    pub rows: Vec<ComparisonRow>,
}

impl ComparisonResult {
    pub fn n_failed(&self) -> usize {
        self.reps.iter().filter(|r| r.fit.is_err()).count()
    }

    /// Category-averaged `|bias|` and coverage: `((joint, individual), (joint, individual))`.
    pub fn averages(&self) -> ((f64, f64), (f64, f64)) {
        let n = self.rows.len() as f64;
        let mean = |f: &dyn Fn(&ComparisonRow) -> f64| self.rows.iter().map(f).sum::<f64>() / n;
        (
            (mean(&|r| r.joint.bias.abs()), mean(&|r| r.individual.bias.abs())),
            (mean(&|r| r.joint.coverage), mean(&|r| r.individual.coverage)),
        )
    }
}

/// Runs the joint and individual-outcome fits on every repetition of `spec`.
/// The joint `theta_k` (reference category 1) is the truth for both approaches.
pub fn run_comparison(spec: &ScenarioSpec, priors: &PriorConfig, sampler: &SamplerConfig) -> Result<ComparisonResult> {
    spec.validate()?;
    sampler.validate()?;
    let truth = TrueParams::for_scenario(spec)?;
    let reps = (0..spec.reps)
        .into_par_iter()
        .map(|rep| {
            let seed = derive_seed(spec.seed, rep as u64);
            let sim = rep_data(spec, &truth, seed)?;
            let fit = (|| {
                let joint = fit_and_summarize(&sim.data, priors, &rep_sampler(sampler, seed, 1))?;
                let indiv = fit_individual_outcomes(&sim.data, priors, &rep_sampler(sampler, seed, 2))?;
                Ok::<_, Error>(
                    indiv
                        .into_iter()
                        .enumerate()
                        .map(|(i, ind)| {
                            let name = format!("theta[{}]", i + 2);
                            let j = joint.get(&name).expect("joint fit has every theta").clone();
                            (truth.theta[i + 1], j, ind)
                        })
                        .collect(),
                )
            })()
            .map_err(|e| e.to_string());
            Ok(ComparisonRep { rep, seed, fit })
        })
        .collect::<Result<Vec<_>>>()?;
    let rows = (1..spec.k)
        .map(|c| {
            let name = format!("theta[{}]", c + 1);
            let (mut joint, mut indiv) = (Vec::new(), Vec::new());
            for rep in &reps {
                if let Ok(cats) = &rep.fit {
                    let (t, j, i) = &cats[c - 1];
                    joint.push(Estimate::from_summary(*t, j));
                    indiv.push(Estimate::from_summary(*t, i));
                }
            }
            ComparisonRow {
                category: c + 1,
                truth: truth.theta[c],
                joint: compute_metrics(&name, &joint),
                individual: compute_metrics(&name, &indiv),
            }
        })
        .collect();
    Ok(ComparisonResult { spec: spec.clone(), reps, rows })
}
