//! Dirichlet distribution in the standard (`alpha`) and mean-precision
//! (`mu`, `phi`) parameterizations, plus a seed-reproducible sampler.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::special::ln_gamma;
use crate::{Error, Result};

const SIMPLEX_TOL: f64 = 1e-10;
const MAX_SAMPLE_RETRIES: usize = 64;

/// A point strictly inside the unit simplex.
#[derive(Debug, Clone, PartialEq)]
pub struct SimplexVector(Vec<f64>);

impl SimplexVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        check_simplex(&values)?;
        Ok(Self(values))
    }

    pub fn uniform(k: usize) -> Self {
        Self(vec![1.0 / k as f64; k])
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

/// Checks strict positivity and unit sum (within 1e-10).
pub fn check_simplex(values: &[f64]) -> Result<()> {
    if values.is_empty() {
        return Err(Error::Domain("empty simplex vector".into()));
    }
    if let Some((k, v)) = values.iter().enumerate().find(|(_, v)| !(**v > 0.0) || !v.is_finite()) {
        return Err(Error::Domain(format!("component {k} = {v} is not strictly positive")));
    }
    let sum: f64 = values.iter().sum();
    if (sum - 1.0).abs() > SIMPLEX_TOL {
        return Err(Error::Domain(format!("components sum to {sum}, not 1")));
    }
    Ok(())
}

/// Positive concentration vector.
#[derive(Debug, Clone, PartialEq)]
pub struct DirichletParams(Vec<f64>);

impl DirichletParams {
    pub fn new(alpha: Vec<f64>) -> Result<Self> {
        if alpha.is_empty() {
            return Err(Error::Domain("empty concentration vector".into()));
        }
        if let Some((k, a)) = alpha.iter().enumerate().find(|(_, a)| !(**a > 0.0) || !a.is_finite()) {
            return Err(Error::Domain(format!("alpha[{k}] = {a} must be positive and finite")));
        }
        Ok(Self(alpha))
    }

    pub fn alpha(&self) -> &[f64] {
        &self.0
    }
}

/// `ln Dir(y | alpha)`. Works entirely in log-gamma space.
pub fn log_density_standard(y: &SimplexVector, alpha: &DirichletParams) -> Result<f64> {
    if y.len() != alpha.0.len() {
        return Err(Error::Dimension(format!(
            "y has {} components, alpha has {}",
            y.len(),
            alpha.0.len()
        )));
    }
    Ok(ln_pdf(y.values(), alpha.alpha()))
}

/// `ln Dir(y | mu, phi)`, i.e. the standard form at `alpha = phi * mu`.
pub fn log_density_mean_precision(y: &SimplexVector, mu: &SimplexVector, phi: f64) -> Result<f64> {
    if !(phi > 0.0) || !phi.is_finite() {
        return Err(Error::Domain(format!("precision phi = {phi} must be positive")));
    }
    if y.len() != mu.len() {
        return Err(Error::Dimension(format!("y has {} components, mu has {}", y.len(), mu.len())));
    }
    let alpha = DirichletParams::new(mu.values().iter().map(|m| phi * m).collect())?;
    log_density_standard(y, &alpha)
}

fn ln_pdf(y: &[f64], alpha: &[f64]) -> f64 {
    let total: f64 = alpha.iter().sum();
    let mut acc = ln_gamma(total);
    for (&yk, &ak) in y.iter().zip(alpha) {
        acc += (ak - 1.0) * yk.ln() - ln_gamma(ak);
    }
    acc
}

/// Log of a Gamma(`shape`, 1) variate (Marsaglia-Tsang; shapes below one use
/// the `U^(1/shape)` boost, applied in log space so tiny shapes do not
/// underflow).
pub fn log_gamma_variate<R: Rng + ?Sized>(shape: f64, rng: &mut R) -> f64 {
    if shape < 1.0 {
        let u: f64 = rng.random();
        return log_gamma_variate(shape + 1.0, rng) + u.ln() / shape;
    }
    let d = shape - 1.0 / 3.0;
    let c = 1.0 / (9.0 * d).sqrt();
    loop {
        let x: f64 = rng.sample(StandardNormal);
        let v = 1.0 + c * x;
        if v <= 0.0 {
            continue;
        }
        let v = v * v * v;
        let u: f64 = rng.random();
        if u < 1.0 - 0.0331 * x * x * x * x || u.ln() < 0.5 * x * x + d * (1.0 - v + v.ln()) {
            return (d * v).ln();
        }
    }
}

/// Draws from `Dir(alpha)` by normalizing independent Gamma(alpha_k, 1)
/// variates. Draws with an underflowed component are retried a bounded number
/// of times.
pub fn sample<R: Rng + ?Sized>(alpha: &DirichletParams, rng: &mut R) -> Result<SimplexVector> {
    let k = alpha.0.len();
    let mut logs = vec![0.0; k];
    for _ in 0..MAX_SAMPLE_RETRIES {
        for (l, &a) in logs.iter_mut().zip(&alpha.0) {
            *l = log_gamma_variate(a, rng);
        }
        let norm = crate::special::log_sum_exp(&logs);
        let mut y: Vec<f64> = logs.iter().map(|l| (l - norm).exp()).collect();
        if y.iter().all(|&v| v > 0.0) {
            let s: f64 = y.iter().sum();
            y.iter_mut().for_each(|v| *v /= s);
            if check_simplex(&y).is_ok() {
                return Ok(SimplexVector(y));
            }
        }
    }
    Err(Error::Sampling(format!(
        "Dirichlet draw underflowed {MAX_SAMPLE_RETRIES} times in a row"
    )))
}
