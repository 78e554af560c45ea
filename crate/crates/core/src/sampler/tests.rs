use super::*;
use crate::diagnostics;

/// Independent normal target with per-coordinate standard deviations.
struct Normal {
    sd: Vec<f64>,
}

impl LogDensity for Normal {
    fn dim(&self) -> usize {
        self.sd.len()
    }

    fn logp_grad(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        let mut lp = 0.0;
        for ((g, xi), s) in grad.iter_mut().zip(x).zip(&self.sd) {
            *g = -xi / (s * s);
            lp -= 0.5 * xi * xi / (s * s);
        }
        lp
    }
}

/// Standard normal truncated to the unit disc.
struct Disc;

impl LogDensity for Disc {
    fn dim(&self) -> usize {
        2
    }

    fn logp_grad(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        grad[0] = -x[0];
        grad[1] = -x[1];
        let r2 = x[0] * x[0] + x[1] * x[1];
        if r2 < 1.0 {
            -0.5 * r2
        } else {
            f64::NEG_INFINITY
        }
    }
}

fn config(n_chains: usize, n_iter: usize, n_warmup: usize, seed: u64) -> SamplerConfig {
    SamplerConfig { n_chains, n_iter, n_warmup, seed, ..SamplerConfig::default() }
}

fn coordinate_chains(chains: &[ChainDraws], d: usize) -> Vec<Vec<f64>> {
    chains.iter().map(|c| c.coordinate(d)).collect()
}

#[test]
fn standard_normal_moments() {
    let target = Normal { sd: vec![1.0; 5] };
    let chains = sample_chains(&target, &config(2, 3500, 1000, 11)).unwrap();
    for d in 0..5 {
        let pooled: Vec<f64> = coordinate_chains(&chains, d).concat();
        let n = pooled.len() as f64;
        let mean = pooled.iter().sum::<f64>() / n;
        let var = pooled.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
        assert!(mean.abs() < 0.05, "coordinate {d}: mean {mean}");
        assert!((var - 1.0).abs() < 0.1, "coordinate {d}: var {var}");
    }
    for c in &chains {
        assert!((c.mean_accept_stat() - 0.8).abs() < 0.1, "{}", c.mean_accept_stat());
        assert!(c.stats.iter().all(|s| !s.energy.is_nan()));
    }
}

#[test]
fn tiny_step_barely_moves_and_accepts() {
    let target = Normal { sd: vec![1.0; 3] };
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut state = ChainState::new(&target, vec![0.5, -0.2, 1.0]).unwrap();
    let start = state.position.clone();
    let settings = NutsSettings { step_size: 1e-9, max_tree_depth: 4, max_energy_error: 1000.0 };
    let stats = nuts_transition(&target, &mut state, &[1.0; 3], settings, &mut rng);
    assert!(stats.accept_stat > 0.999999);
    assert_eq!(stats.tree_depth, 4);
    for (a, b) in start.iter().zip(&state.position) {
        assert!((a - b).abs() < 1e-6);
    }
}

#[test]
fn identical_seeds_give_identical_draws() {
    let target = Normal { sd: vec![1.0, 2.0] };
    let cfg = config(2, 300, 100, 99);
    let a = sample_chains(&target, &cfg).unwrap();
    let b = sample_chains(&target, &cfg).unwrap();
    assert_eq!(a, b);
    let c = sample_chains(&target, &SamplerConfig { seed: 100, ..cfg }).unwrap();
    assert_ne!(a[0].draws, c[0].draws);
    assert_ne!(a[0].draws, a[1].draws, "chains use distinct streams");
}

#[test]
fn higher_target_accept_gives_smaller_step() {
    let target = Normal { sd: vec![1.0; 4] };
    let low = sample_chain(&target, &SamplerConfig { target_accept: 0.6, ..config(1, 600, 500, 5) }, 0).unwrap();
    let high = sample_chain(&target, &SamplerConfig { target_accept: 0.99, ..config(1, 600, 500, 5) }, 0).unwrap();
    assert!(high.adaptation.step_size < low.adaptation.step_size);
}

#[test]
fn mass_matrix_learns_scales() {
    let target = Normal { sd: vec![1.0, 10.0] };
    let chains = sample_chains(&target, &config(2, 3000, 1000, 8)).unwrap();
    let inv = &chains[0].adaptation.inv_mass;
    assert!(inv[1] / inv[0] > 30.0, "inverse mass {inv:?}");
    let e0 = diagnostics::ess(&coordinate_chains(&chains, 0)).unwrap();
    let e1 = diagnostics::ess(&coordinate_chains(&chains, 1)).unwrap();
    assert!(e0 / e1 < 3.0 && e1 / e0 < 3.0, "ess {e0} vs {e1}");
}

#[test]
fn divergent_transitions_keep_position() {
    let target = Normal { sd: vec![1.0; 2] };
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut state = ChainState::new(&target, vec![0.3, 0.1]).unwrap();
    let before = state.clone();
    let settings = NutsSettings { step_size: 50.0, max_tree_depth: 10, max_energy_error: 1000.0 };
    let stats = nuts_transition(&target, &mut state, &[1.0; 2], settings, &mut rng);
    assert!(stats.divergent);
    assert_eq!(state, before);
    assert!(stats.energy.is_finite());
}

#[test]
fn infinite_region_is_never_entered() {
    let cfg = SamplerConfig { init_radius: 0.5, ..config(1, 600, 200, 2) };
    let chain = sample_chain(&Disc, &cfg, 0).unwrap();
    for t in 0..chain.draws.rows() {
        let r = chain.draws.row(t);
        assert!(r[0] * r[0] + r[1] * r[1] < 1.0);
    }
}

#[test]
fn single_chain_is_supported() {
    let target = Normal { sd: vec![1.0] };
    let chains = sample_chains(&target, &config(1, 400, 100, 4)).unwrap();
    assert_eq!(chains.len(), 1);
    assert_eq!(chains[0].draws.rows(), 300);
}

#[test]
fn invalid_configs_are_rejected() {
    let target = Normal { sd: vec![1.0] };
    assert!(sample_chains(&target, &config(0, 400, 100, 0)).is_err());
    assert!(sample_chains(&target, &config(1, 100, 100, 0)).is_err());
    assert!(sample_chains(&target, &config(1, 400, 10, 0)).is_err());
}
