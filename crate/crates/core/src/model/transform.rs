//! Constrained <-> unconstrained parameter maps.
//!
//! Weights use stick-breaking: latent `x_j` is shifted by `ln(M - 1 - j)` so
//! that all-zero latents give uniform weights, then each logistic break takes
//! that fraction of the remaining stick. `pi` and `phi` are log-transformed.

use super::{ModelShape, ParameterState};
use crate::linalg::Matrix;
use crate::special::log_logistic;
use crate::{Error, Result};

/// Stick-breaking in log space. Fills `log_w` (length `M`) and returns the
/// log-Jacobian of the map from the `M - 1` latents.
pub(crate) fn stick_breaking(latents: &[f64], log_w: &mut [f64]) -> f64 {
    let m = log_w.len();
    debug_assert_eq!(latents.len() + 1, m);
    let mut log_rem = 0.0;
    let mut log_jac = 0.0;
    for (j, &x) in latents.iter().enumerate() {
        let u = x - ((m - 1 - j) as f64).ln();
        let lz = log_logistic(u);
        let l1mz = log_logistic(-u);
        log_w[j] = log_rem + lz;
        log_jac += lz + l1mz + log_rem;
        log_rem += l1mz;
    }
    log_w[m - 1] = log_rem;
    log_jac
}

/// Maps an unconstrained vector to parameters plus the log-Jacobian of the
/// transform.
pub fn constrain(v: &[f64], shape: ModelShape) -> Result<(ParameterState, f64)> {
    if v.len() != shape.dim() {
        return Err(Error::Dimension(format!(
            "unconstrained vector has length {}, expected {}",
            v.len(),
            shape.dim()
        )));
    }
    let ModelShape { k, m, j } = shape;
    let mut theta = vec![0.0; k];
    theta[1..].copy_from_slice(&v[..k - 1]);
    let mut beta = Matrix::zeros(k, j);
    for c in 1..k {
        let off = shape.beta_offset() + (c - 1) * j;
        beta.row_mut(c).copy_from_slice(&v[off..off + j]);
    }
    let mut log_w = vec![0.0; m];
    let mut log_jac = stick_breaking(&v[shape.stick_offset()..shape.log_pi_offset()], &mut log_w);
    let w: Vec<f64> = log_w.iter().map(|l| l.exp()).collect();
    let log_pi = &v[shape.log_pi_offset()..shape.log_phi_offset()];
    let pi = log_pi.iter().map(|l| l.exp()).collect();
    log_jac += log_pi.iter().sum::<f64>();
    let log_phi = v[shape.log_phi_offset()];
    log_jac += log_phi;
    Ok((ParameterState { theta, beta, w, pi, phi: log_phi.exp() }, log_jac))
}

/// Inverse of [`constrain`]. Weights must be strictly positive.
pub fn unconstrain(state: &ParameterState) -> Result<Vec<f64>> {
    state.validate()?;
    let shape = state.shape();
    let ModelShape { k, m, .. } = shape;
    if state.w.iter().any(|&w| w <= 0.0) {
        return Err(Error::Domain("stick-breaking needs strictly positive weights".into()));
    }
    let mut v = Vec::with_capacity(shape.dim());
    v.extend_from_slice(&state.theta[1..]);
    for c in 1..k {
        v.extend_from_slice(state.beta.row(c));
    }
    let mut rem = 1.0;
    for (jdx, &w) in state.w[..m - 1].iter().enumerate() {
        let z = (w / rem).clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON);
        v.push((z / (1.0 - z)).ln() + ((m - 1 - jdx) as f64).ln());
        rem -= w;
    }
    v.extend(state.pi.iter().map(|p| p.ln()));
    v.push(state.phi.ln());
    Ok(v)
}
