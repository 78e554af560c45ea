use dbwqs::sampler::{sample_chains, LogDensity, SamplerConfig};
use statrs::distribution::{ContinuousCDF, Normal};

struct StdNormal;

impl LogDensity for StdNormal {
    fn dim(&self) -> usize {
        1
    }

    fn logp_grad(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        grad[0] = -x[0];
        -0.5 * x[0] * x[0]
    }
}

#[test]
fn one_dimensional_normal_passes_ks() {
    let config = SamplerConfig { n_chains: 2, n_iter: 11_000, n_warmup: 1_000, seed: 21, ..SamplerConfig::default() };
    let chains = sample_chains(&StdNormal, &config).unwrap();
    let mut draws: Vec<f64> = chains.iter().flat_map(|c| c.coordinate(0)).collect();
    assert_eq!(draws.len(), 20_000);
    draws.sort_by(f64::total_cmp);
    let normal = Normal::standard();
    let n = draws.len() as f64;
    let d = draws
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = normal.cdf(x);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max);
    assert!(d < 0.02, "KS statistic {d}");
}
