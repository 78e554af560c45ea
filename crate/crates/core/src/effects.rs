//! Interpretable effects of a one-unit increase in the mixture index.
//!
//! The relative scale reports `theta_k`, the log change of category `k`
//! against the reference. The absolute scale reports the ratio of new to old
//! mean proportion: for the reference it is `b_ref`, the per-subject factor
//! `(sum_c exp(eta_c)) / (sum_c exp(eta_c + theta_c))` averaged over subjects,
//! and for category `k` it is `exp(theta_k) * b_ref`.

use crate::diagnostics::{summarize, ParameterSummary};
use crate::model::{DbwqsData, ParameterState};
use crate::sampler::PosteriorDraws;
use crate::special::log_sum_exp;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EffectScale {
    /// Percent change in absolute proportion, `(ratio - 1) * 100`.
    AbsolutePercent,
    /// `theta_k` against the reference category.
    Relative,
}

impl EffectScale {
    pub fn label(self) -> &'static str {
        match self {
            EffectScale::AbsolutePercent => "absolute_percent",
            EffectScale::Relative => "relative",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CategoryEffect {
    /// 1-based outcome category.
    pub category: usize,
    /// Per-chain draws: the ratio `mu*_k / mu_k` on the absolute scale,
    /// `theta_k` on the relative scale.
    pub draws: Vec<Vec<f64>>,
    /// Summary on the reported scale (percent change or `theta_k`).
    pub summary: ParameterSummary,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EffectTable {
    pub scale: EffectScale,
    pub effects: Vec<CategoryEffect>,
}

/// `b_ref` for one subject with logits `eta` (reference included).
pub fn b_ref_from_logits(eta: &[f64], theta: &[f64]) -> f64 {
    let shifted: Vec<f64> = eta.iter().zip(theta).map(|(e, t)| e + t).collect();
    (log_sum_exp(eta) - log_sum_exp(&shifted)).exp()
}

/// Per-subject `b_ref` under one parameter draw.
pub fn b_ref_per_subject(state: &ParameterState, data: &DbwqsData) -> Result<Vec<f64>> {
    state.validate()?;
    if state.shape() != data.shape() {
        return Err(Error::Dimension("parameter draw does not match the data".into()));
    }
    let s = data.mixture_indices(&state.w);
    let k = state.theta.len();
    let mut eta = vec![0.0; k];
    let mut out = Vec::with_capacity(data.n());
    for (i, &si) in s.iter().enumerate() {
        state.linear_predictor(si, data.x().row(i), &mut eta);
        if eta.iter().any(|e| !e.is_finite()) {
            return Err(Error::Domain(format!("non-finite linear predictor for subject {}", i + 1)));
        }
        out.push(b_ref_from_logits(&eta, &state.theta));
    }
    Ok(out)
}

/// Subject-averaged `b_ref` under one draw.
pub fn mean_b_ref(state: &ParameterState, data: &DbwqsData) -> Result<f64> {
    let b = b_ref_per_subject(state, data)?;
    if b.is_empty() {
        return Err(Error::InvalidInput("no subjects to average over".into()));
    }
    Ok(b.iter().sum::<f64>() / b.len() as f64)
}

/// Absolute-ratio draws `mu*_k / mu_k` for every category under one draw.
pub fn absolute_ratios(state: &ParameterState, data: &DbwqsData) -> Result<Vec<f64>> {
    let b = mean_b_ref(state, data)?;
    Ok(state.theta.iter().enumerate().map(|(k, t)| if k == 0 { b } else { t.exp() * b }).collect())
}

fn check_nonempty(states: &[Vec<ParameterState>]) -> Result<usize> {
    let n = states.first().map_or(0, Vec::len);
    if n == 0 {
        return Err(Error::InvalidInput("no posterior draws".into()));
    }
    Ok(states[0][0].theta.len())
}

/// Absolute percent changes from per-chain parameter draws.
pub fn absolute_change_from_states(states: &[Vec<ParameterState>], data: &DbwqsData) -> Result<EffectTable> {
    let k = check_nonempty(states)?;
    let mut ratios = vec![Vec::with_capacity(states.len()); k];
    for chain in states {
        let mut per_chain = vec![Vec::with_capacity(chain.len()); k];
        for state in chain {
            for (c, r) in absolute_ratios(state, data)?.into_iter().enumerate() {
                per_chain[c].push(r);
            }
        }
        for (c, series) in per_chain.into_iter().enumerate() {
            ratios[c].push(series);
        }
    }
    let effects = ratios
        .into_iter()
        .enumerate()
        .map(|(c, draws)| {
            let percent: Vec<Vec<f64>> =
                draws.iter().map(|s| s.iter().map(|r| (r - 1.0) * 100.0).collect()).collect();
            let summary = summarize(&format!("category[{}]", c + 1), &percent)?;
            Ok(CategoryEffect { category: c + 1, draws, summary })
        })
        .collect::<Result<_>>()?;
    Ok(EffectTable { scale: EffectScale::AbsolutePercent, effects })
}

/// `theta_k` summaries for the non-reference categories.
pub fn relative_change_from_states(states: &[Vec<ParameterState>]) -> Result<EffectTable> {
    let k = check_nonempty(states)?;
    let effects = (1..k)
        .map(|c| {
            let draws: Vec<Vec<f64>> =
                states.iter().map(|chain| chain.iter().map(|s| s.theta[c]).collect()).collect();
            let summary = summarize(&format!("category[{}]", c + 1), &draws)?;
            Ok(CategoryEffect { category: c + 1, draws, summary })
        })
        .collect::<Result<_>>()?;
    Ok(EffectTable { scale: EffectScale::Relative, effects })
}

fn states_of(draws: &PosteriorDraws) -> Vec<Vec<ParameterState>> {
    (0..draws.n_chains())
        .map(|c| (0..draws.n_draws()).map(|t| draws.state(c, t)).collect())
        .collect()
}

pub fn absolute_change(draws: &PosteriorDraws, data: &DbwqsData) -> Result<EffectTable> {
    absolute_change_from_states(&states_of(draws), data)
}

pub fn relative_change(draws: &PosteriorDraws) -> Result<EffectTable> {
    relative_change_from_states(&states_of(draws))
}
