//! Convergence diagnostics and posterior summaries.
//!
//! R-hat is the classic split form over half-chains; ESS follows the
//! multi-chain autocorrelation estimator with Geyer's initial positive and
//! monotone sequence truncation. Chains are passed as equal-length series.

use serde::Serialize;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::quantizer::empirical_quantile;
use crate::{Error, Result};

/// ESS never exceeds this multiple of the total draw count.
pub const MAX_ESS_RATIO: f64 = 1.5;

fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

fn sample_variance(x: &[f64]) -> f64 {
    let m = mean(x);
    x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (x.len() as f64 - 1.0)
}

fn check_chains(chains: &[Vec<f64>], min_len: usize) -> Result<usize> {
    let first = chains.first().ok_or_else(|| Error::InvalidInput("no chains supplied".into()))?;
    let n = first.len();
    if chains.iter().any(|c| c.len() != n) {
        return Err(Error::Dimension("chains have different lengths".into()));
    }
    if n < min_len {
        return Err(Error::InvalidInput(format!("need at least {min_len} draws per chain, got {n}")));
    }
    Ok(n)
}

fn rhat_of(parts: &[&[f64]]) -> f64 {
    let n = parts[0].len() as f64;
    let means: Vec<f64> = parts.iter().map(|c| mean(c)).collect();
    let w = mean(&parts.iter().map(|c| sample_variance(c)).collect::<Vec<_>>());
    if !(w > 0.0) {
        return f64::NAN;
    }
    let b = n * sample_variance(&means);
    let var_plus = (n - 1.0) / n * w + b / n;
    (var_plus / w).sqrt()
}

/// Classic split R-hat. Every chain is halved (dropping the middle draw of
/// odd-length chains). Returns NaN when the within-chain variance is zero.
pub fn split_rhat(chains: &[Vec<f64>]) -> Result<f64> {
    let n = check_chains(chains, 4)?;
    let half = n / 2;
    let parts: Vec<&[f64]> = chains
        .iter()
        .flat_map(|c| [&c[..half], &c[n - half..]])
        .collect();
    Ok(rhat_of(&parts))
}

/// Split R-hat on rank-normalized draws (pooled ranks mapped through the
/// normal quantile function).
pub fn split_rhat_rank(chains: &[Vec<f64>]) -> Result<f64> {
    let n = check_chains(chains, 4)?;
    let pooled: Vec<f64> = chains.iter().flatten().copied().collect();
    let total = pooled.len();
    let mut order: Vec<usize> = (0..total).collect();
    order.sort_by(|&a, &b| pooled[a].total_cmp(&pooled[b]));
    let mut ranks = vec![0.0; total];
    let mut i = 0;
    while i < total {
        let mut j = i;
        while j + 1 < total && pooled[order[j + 1]] == pooled[order[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &idx in &order[i..=j] {
            ranks[idx] = avg;
        }
        i = j + 1;
    }
    let normal = Normal::standard();
    let z: Vec<f64> = ranks
        .iter()
        .map(|r| normal.inverse_cdf((r - 0.375) / (total as f64 + 0.25)))
        .collect();
    let normalized: Vec<Vec<f64>> = z.chunks(n).map(<[f64]>::to_vec).collect();
    split_rhat(&normalized)
}

/// Biased (divide-by-N) autocorrelation for lags `0..=max_lag`.
pub fn autocorrelation(draws: &[f64], max_lag: usize) -> Vec<f64> {
    let n = draws.len();
    if n == 0 {
        return vec![];
    }
    let m = mean(draws);
    let centered: Vec<f64> = draws.iter().map(|v| v - m).collect();
    let acov = |lag: usize| -> f64 {
        centered[..n - lag].iter().zip(&centered[lag..]).map(|(a, b)| a * b).sum::<f64>() / n as f64
    };
    let c0 = acov(0);
    (0..=max_lag.min(n - 1))
        .map(|lag| if c0 > 0.0 { acov(lag) / c0 } else { f64::NAN })
        .collect()
}

/// Effective sample size across chains. Returns NaN for zero-variance draws.
pub fn ess(chains: &[Vec<f64>]) -> Result<f64> {
    let n = check_chains(chains, 4)?;
    let m = chains.len();
    let centered: Vec<Vec<f64>> = chains
        .iter()
        .map(|c| {
            let mu = mean(c);
            c.iter().map(|v| v - mu).collect()
        })
        .collect();
    let mean_acov = |lag: usize| -> f64 {
        centered
            .iter()
            .map(|c| c[..n - lag].iter().zip(&c[lag..]).map(|(a, b)| a * b).sum::<f64>() / n as f64)
            .sum::<f64>()
            / m as f64
    };
    let nf = n as f64;
    let chain_means: Vec<f64> = chains.iter().map(|c| mean(c)).collect();
    let mean_var = mean_acov(0) * nf / (nf - 1.0);
    let mut var_plus = mean_var * (nf - 1.0) / nf;
    if m > 1 {
        var_plus += sample_variance(&chain_means);
    }
    if !(var_plus > 0.0) || !(mean_var > 0.0) {
        return Ok(f64::NAN);
    }
    let rho = |lag: usize| 1.0 - (mean_var - mean_acov(lag)) / var_plus;

    let mut rho_hat = vec![0.0; n + 2];
    let mut rho_even = 1.0;
    let mut rho_odd = rho(1);
    rho_hat[0] = rho_even;
    rho_hat[1] = rho_odd;
    let mut s = 1;
    while s + 4 < n && rho_even + rho_odd > 0.0 {
        rho_even = rho(s + 1);
        rho_odd = rho(s + 2);
        if rho_even + rho_odd >= 0.0 {
            rho_hat[s + 1] = rho_even;
            rho_hat[s + 2] = rho_odd;
        }
        s += 2;
    }
    let max_s = s;
    if rho_even > 0.0 {
        rho_hat[max_s + 1] = rho_even;
    }
    // initial monotone sequence
    let mut t = 1;
    while t + 3 <= max_s {
        if rho_hat[t + 1] + rho_hat[t + 2] > rho_hat[t - 1] + rho_hat[t] {
            rho_hat[t + 1] = (rho_hat[t - 1] + rho_hat[t]) / 2.0;
            rho_hat[t + 2] = rho_hat[t + 1];
        }
        t += 2;
    }
    let total = (m * n) as f64;
    let tau = -1.0 + 2.0 * rho_hat[..max_s].iter().sum::<f64>() + rho_hat[max_s + 1];
    Ok(total / tau.max(1.0 / MAX_ESS_RATIO))
}

/// Linear-interpolation quantiles of the pooled draws.
pub fn quantiles(draws: &[f64], probs: &[f64]) -> Vec<f64> {
    let mut sorted = draws.to_vec();
    sorted.sort_by(f64::total_cmp);
    probs.iter().map(|&p| empirical_quantile(&sorted, p)).collect()
}

/// Posterior summary of one scalar quantity.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParameterSummary {
    pub name: String,
    pub mean: f64,
    pub sd: f64,
    pub ci95: (f64, f64),
    pub ci80: (f64, f64),
    pub ess: f64,
    /// NaN when unavailable (single chain) or undefined (zero variance).
    pub rhat: f64,
    /// Set when the draws have zero variance, so R-hat and ESS are undefined.
    pub degenerate: bool,
}

/// Mean, sd, 95% and 80% equal-tailed intervals, ESS and split R-hat.
pub fn summarize(name: &str, chains: &[Vec<f64>]) -> Result<ParameterSummary> {
    let n = check_chains(chains, 1)?;
    let pooled: Vec<f64> = chains.iter().flatten().copied().collect();
    let mu = mean(&pooled);
    let sd = if pooled.len() > 1 { sample_variance(&pooled).sqrt() } else { 0.0 };
    let q = quantiles(&pooled, &[0.025, 0.975, 0.1, 0.9]);
    let degenerate = !(sd > 0.0);
    let (ess, rhat) = if n >= 4 && !degenerate {
        let rhat = if chains.len() > 1 { split_rhat(chains)? } else { f64::NAN };
        (ess(chains)?, rhat)
    } else {
        (f64::NAN, f64::NAN)
    };
    Ok(ParameterSummary {
        name: name.to_string(),
        mean: mu,
        sd,
        ci95: (q[0], q[1]),
        ci80: (q[2], q[3]),
        ess,
        rhat,
        degenerate,
    })
}
