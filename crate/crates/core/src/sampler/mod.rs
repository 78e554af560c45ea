//! No-U-Turn sampling with warm-up adaptation and independent parallel chains.

mod adapt;
mod nuts;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::linalg::Matrix;
use crate::model::{DbwqsData, DbwqsModel, ModelShape, ParameterState, PriorConfig};
use crate::{Error, Result};

pub use adapt::{find_reasonable_step_size, DualAveraging, RunningVariance, WindowSchedule};
pub use nuts::{nuts_transition, sample_momentum, ChainState, NutsSettings, TransitionStats};

/// A differentiable log density over `R^dim`.
///
/// Implementations must be pure: chains share one instance across threads.
pub trait LogDensity: Sync {
    fn dim(&self) -> usize;

    /// Writes the gradient into `grad` and returns the log density. A
    /// non-finite return value marks the point as outside the support.
    fn logp_grad(&self, x: &[f64], grad: &mut [f64]) -> f64;
}

impl LogDensity for DbwqsModel {
    fn dim(&self) -> usize {
        DbwqsModel::dim(self)
    }

    fn logp_grad(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        self.log_posterior_and_gradient(x, grad)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplerConfig {
    pub n_chains: usize,
    /// Iterations per chain, warm-up included.
    pub n_iter: usize,
    pub n_warmup: usize,
    pub target_accept: f64,
    pub max_tree_depth: usize,
    pub seed: u64,
    pub adapt_mass_matrix: bool,
    /// Energy error beyond which a trajectory is declared divergent.
    pub max_energy_error: f64,
    /// Chains start uniformly in `[-init_radius, init_radius]` per coordinate.
    pub init_radius: f64,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            n_chains: 2,
            n_iter: 10_000,
            n_warmup: 2_000,
            target_accept: 0.8,
            max_tree_depth: 10,
            seed: 0,
            adapt_mass_matrix: true,
            max_energy_error: 1000.0,
            init_radius: 1.0,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_chains == 0 {
            return Err(Error::Config("n_chains must be at least 1".into()));
        }
        if self.n_warmup >= self.n_iter {
            return Err(Error::Config(format!(
                "n_warmup ({}) must be smaller than n_iter ({})",
                self.n_warmup, self.n_iter
            )));
        }
        if self.n_warmup < 50 {
            return Err(Error::Config(format!("n_warmup must be at least 50, got {}", self.n_warmup)));
        }
        if !(self.target_accept > 0.0 && self.target_accept < 1.0) {
            return Err(Error::Config("target_accept must lie in (0, 1)".into()));
        }
        if self.max_tree_depth == 0 {
            return Err(Error::Config("max_tree_depth must be positive".into()));
        }
        if !(self.max_energy_error > 0.0) || !(self.init_radius >= 0.0) {
            return Err(Error::Config("max_energy_error and init_radius must be positive".into()));
        }
        Ok(())
    }

    pub fn n_draws(&self) -> usize {
        self.n_iter - self.n_warmup
    }

    /// Independent generator for chain `chain`, a separate stream of the
    /// configured seed.
    pub fn chain_rng(&self, chain: usize) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(chain as u64 + 1);
        rng
    }
}

/// Frozen adaptation results.
#[derive(Debug, Clone, PartialEq)]
pub struct Adaptation {
    pub step_size: f64,
    pub inv_mass: Vec<f64>,
    pub warmup_divergences: usize,
}

/// Warm-up for one chain, starting from `state`. Leaves `state` at the final
/// warm-up position.
pub fn warmup_adapt<T: LogDensity + ?Sized, R: Rng + ?Sized>(
    target: &T,
    state: &mut ChainState,
    config: &SamplerConfig,
    rng: &mut R,
) -> Result<Adaptation> {
    if config.n_warmup < 50 {
        return Err(Error::Config(format!("n_warmup must be at least 50, got {}", config.n_warmup)));
    }
    let dim = state.position.len();
    let mut inv_mass = vec![1.0; dim];
    let mut step_size = find_reasonable_step_size(target, state, &inv_mass, 1.0, rng)?;
    let mut dual = DualAveraging::new(config.target_accept, step_size);
    let mut schedule = WindowSchedule::new(config.n_warmup);
    let mut variance = RunningVariance::new(dim);
    let mut divergences = 0;

    for i in 0..config.n_warmup {
        let settings = NutsSettings {
            step_size,
            max_tree_depth: config.max_tree_depth,
            max_energy_error: config.max_energy_error,
        };
        let stats = nuts_transition(target, state, &inv_mass, settings, rng);
        if stats.divergent {
            divergences += 1;
        }
        step_size = dual.learn(stats.accept_stat);
        if !step_size.is_finite() || step_size <= 0.0 {
            return Err(Error::Adaptation(format!("step size collapsed to {step_size}")));
        }
        if config.adapt_mass_matrix && schedule.in_window(i) {
            variance.add(&state.position);
            if schedule.window_ends(i) {
                inv_mass = variance.regularized_variance();
                variance.reset();
                step_size = find_reasonable_step_size(target, state, &inv_mass, step_size, rng)?;
                dual.restart(step_size);
                schedule.advance(i);
            }
        }
    }
    if divergences == config.n_warmup {
        return Err(Error::Adaptation("every warm-up transition diverged".into()));
    }
    let step_size = dual.final_step_size();
    if !step_size.is_finite() || step_size <= 0.0 {
        return Err(Error::Adaptation(format!("final step size {step_size} is unusable")));
    }
    Ok(Adaptation { step_size, inv_mass, warmup_divergences: divergences })
}

/// Post-warm-up output of one chain.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainDraws {
    /// `n_draws x dim` unconstrained positions.
    pub draws: Matrix,
    pub stats: Vec<TransitionStats>,
    pub adaptation: Adaptation,
}

impl ChainDraws {
    pub fn mean_accept_stat(&self) -> f64 {
        self.stats.iter().map(|s| s.accept_stat).sum::<f64>() / self.stats.len() as f64
    }

    pub fn divergences(&self) -> usize {
        self.stats.iter().filter(|s| s.divergent).count()
    }

    pub fn coordinate(&self, d: usize) -> Vec<f64> {
        self.draws.column(d)
    }
}

fn initial_state<T: LogDensity + ?Sized, R: Rng + ?Sized>(
    target: &T,
    radius: f64,
    rng: &mut R,
) -> Result<ChainState> {
    for _ in 0..100 {
        let x: Vec<f64> = (0..target.dim())
            .map(|_| if radius > 0.0 { rng.random_range(-radius..=radius) } else { 0.0 })
            .collect();
        if let Some(state) = ChainState::new(target, x) {
            return Ok(state);
        }
    }
    Err(Error::Sampling("no finite starting point found in 100 attempts".into()))
}

/// Runs one chain: random initialization, warm-up, then sampling.
pub fn sample_chain<T: LogDensity + ?Sized>(
    target: &T,
    config: &SamplerConfig,
    chain: usize,
) -> Result<ChainDraws> {
    let mut rng = config.chain_rng(chain);
    let mut state = initial_state(target, config.init_radius, &mut rng)?;
    let adaptation = warmup_adapt(target, &mut state, config, &mut rng)?;
    let settings = NutsSettings {
        step_size: adaptation.step_size,
        max_tree_depth: config.max_tree_depth,
        max_energy_error: config.max_energy_error,
    };
    let n = config.n_draws();
    let mut data = Vec::with_capacity(n * target.dim());
    let mut stats = Vec::with_capacity(n);
    for _ in 0..n {
        stats.push(nuts_transition(target, &mut state, &adaptation.inv_mass, settings, &mut rng));
        data.extend_from_slice(&state.position);
    }
    Ok(ChainDraws { draws: Matrix::from_vec(n, target.dim(), data)?, stats, adaptation })
}

/// Runs `config.n_chains` independent chains concurrently. Output order and
/// values do not depend on scheduling.
pub fn sample_chains<T: LogDensity + ?Sized>(target: &T, config: &SamplerConfig) -> Result<Vec<ChainDraws>> {
    config.validate()?;
    (0..config.n_chains)
        .into_par_iter()
        .map(|c| sample_chain(target, config, c))
        .collect()
}

/// Posterior draws of a DBWQS fit.
#[derive(Debug, Clone)]
pub struct PosteriorDraws {
    pub shape: ModelShape,
    pub names: Vec<String>,
    pub chains: Vec<ChainDraws>,
    /// Per chain, `n_draws x constrained_dim` in `names` order.
    pub constrained: Vec<Matrix>,
}

impl PosteriorDraws {
    pub fn from_chains(shape: ModelShape, chains: Vec<ChainDraws>) -> Result<Self> {
        let names = shape.parameter_names();
        let mut constrained = Vec::with_capacity(chains.len());
        for chain in &chains {
            let mut data = Vec::with_capacity(chain.draws.rows() * shape.constrained_dim());
            for t in 0..chain.draws.rows() {
                let (state, _) = crate::model::constrain(chain.draws.row(t), shape)?;
                data.extend(state.to_flat());
            }
            constrained.push(Matrix::from_vec(chain.draws.rows(), shape.constrained_dim(), data)?);
        }
        Ok(Self { shape, names, chains, constrained })
    }

    pub fn n_chains(&self) -> usize {
        self.chains.len()
    }

    pub fn n_draws(&self) -> usize {
        self.chains.first().map_or(0, |c| c.draws.rows())
    }

    pub fn parameter_index(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    /// Per-chain series of constrained parameter `idx`.
    pub fn parameter_chains(&self, idx: usize) -> Vec<Vec<f64>> {
        self.constrained.iter().map(|m| m.column(idx)).collect()
    }

    pub fn state(&self, chain: usize, draw: usize) -> ParameterState {
        crate::model::constrain(self.chains[chain].draws.row(draw), self.shape)
            .expect("stored draws have the model dimension")
            .0
    }

    pub fn total_divergences(&self) -> usize {
        self.chains.iter().map(ChainDraws::divergences).sum()
    }
}

/// Fits the DBWQS model to `data`.
pub fn run_chains(data: &DbwqsData, priors: &PriorConfig, config: &SamplerConfig) -> Result<PosteriorDraws> {
    let model = DbwqsModel::new(data.clone(), *priors)?;
    run_model(&model, config)
}

pub fn run_model(model: &DbwqsModel, config: &SamplerConfig) -> Result<PosteriorDraws> {
    let chains = sample_chains(model, config)?;
    PosteriorDraws::from_chains(model.shape(), chains)
}

#[cfg(test)]
mod tests;
