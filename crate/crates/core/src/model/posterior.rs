use super::transform::stick_breaking;
use super::{DbwqsData, ModelShape, ParameterState, PriorConfig};
use crate::linalg::dot;
use crate::special::{digamma, ln_gamma, log_sum_exp};
use crate::{Error, Result};

const HALF_LN_2PI: f64 = 0.918_938_533_204_672_8;

fn normal_lpdf(x: f64, sigma: f64) -> f64 {
    -HALF_LN_2PI - sigma.ln() - 0.5 * (x / sigma).powi(2)
}

/// Gamma(shape, rate) log density given `ln x` and `x`.
fn gamma_lpdf(log_x: f64, x: f64, shape: f64, rate: f64) -> f64 {
    shape * rate.ln() - ln_gamma(shape) + (shape - 1.0) * log_x - rate * x
}

/// DBWQS posterior over the unconstrained parameter vector.
#[derive(Debug, Clone)]
pub struct DbwqsModel {
    data: DbwqsData,
    priors: PriorConfig,
    shape: ModelShape,
}

impl DbwqsModel {
    pub fn new(data: DbwqsData, priors: PriorConfig) -> Result<Self> {
        priors.validate()?;
        let shape = data.shape();
        if shape.k < 2 {
            return Err(Error::InvalidInput("need at least 2 outcome categories".into()));
        }
        Ok(Self { data, priors, shape })
    }

    pub fn data(&self) -> &DbwqsData {
        &self.data
    }

    pub fn priors(&self) -> &PriorConfig {
        &self.priors
    }

    pub fn shape(&self) -> ModelShape {
        self.shape
    }

    pub fn dim(&self) -> usize {
        self.shape.dim()
    }

    pub fn constrain(&self, v: &[f64]) -> Result<(ParameterState, f64)> {
        super::constrain(v, self.shape)
    }

    /// Log posterior (including the transform's log-Jacobian) up to the log
    /// evidence. Invalid states evaluate to `-inf`.
    pub fn log_posterior(&self, v: &[f64]) -> f64 {
        self.evaluate(v, None)
    }

    /// Log posterior and its gradient with respect to every unconstrained
    /// coordinate. The gradient is only meaningful when the value is finite.
    pub fn log_posterior_and_gradient(&self, v: &[f64], grad: &mut [f64]) -> f64 {
        self.evaluate(v, Some(grad))
    }

    /// Gradient of [`Self::log_posterior`]. Errors when the state is rejected
    /// or the gradient is not finite.
    pub fn grad_log_posterior(&self, v: &[f64]) -> Result<Vec<f64>> {
        let mut g = vec![0.0; self.dim()];
        let lp = self.evaluate(v, Some(&mut g));
        if !lp.is_finite() || g.iter().any(|x| !x.is_finite()) {
            return Err(Error::Domain("non-finite log posterior or gradient".into()));
        }
        Ok(g)
    }

    fn evaluate(&self, v: &[f64], mut grad: Option<&mut [f64]>) -> f64 {
        let shape = self.shape;
        if v.len() != shape.dim() {
            return f64::NEG_INFINITY;
        }
        let ModelShape { k, m, j } = shape;
        let p = &self.priors;

        // theta and beta with the reference slot prepended
        let mut theta = vec![0.0; k];
        theta[1..].copy_from_slice(&v[..k - 1]);
        let beta_flat = &v[shape.beta_offset()..shape.stick_offset()];
        let beta_row = |c: usize| -> &[f64] { &beta_flat[(c - 1) * j..c * j] };

        let mut log_w = vec![0.0; m];
        let sticks = &v[shape.stick_offset()..shape.log_pi_offset()];
        let mut log_jac = stick_breaking(sticks, &mut log_w);
        let w: Vec<f64> = log_w.iter().map(|l| l.exp()).collect();
        let log_pi = &v[shape.log_pi_offset()..shape.log_phi_offset()];
        let pi: Vec<f64> = log_pi.iter().map(|l| l.exp()).collect();
        let log_phi = v[shape.log_phi_offset()];
        let phi = log_phi.exp();
        log_jac += log_pi.iter().sum::<f64>() + log_phi;
        if !(phi > 0.0 && phi.is_finite()) || pi.iter().any(|p| !(*p > 0.0 && p.is_finite())) {
            return f64::NEG_INFINITY;
        }

        let want_grad = grad.is_some();
        let mut d_theta = vec![0.0; k];
        let mut d_beta = vec![0.0; (k - 1) * j];
        let mut d_w = vec![0.0; m];
        let mut d_phi = 0.0;

        // likelihood
        let n = self.data.n();
        let lg_phi = ln_gamma(phi);
        let dg_phi = if want_grad { digamma(phi) } else { 0.0 };
        let mut ll = n as f64 * lg_phi;
        let mut eta = vec![0.0; k];
        let mut mu = vec![0.0; k];
        let mut g = vec![0.0; k];
        for i in 0..n {
            let q_row = self.data.q_real().row(i);
            let x_row = self.data.x().row(i);
            let log_y = self.data.log_y().row(i);
            let s = dot(q_row, &w);
            eta[0] = 0.0;
            for c in 1..k {
                eta[c] = s * theta[c] + dot(x_row, beta_row(c));
            }
            let lse = log_sum_exp(&eta);
            for c in 0..k {
                mu[c] = (eta[c] - lse).exp();
                let alpha = phi * mu[c];
                ll += (alpha - 1.0) * log_y[c] - ln_gamma(alpha);
            }
            if want_grad {
                let mut gbar = 0.0;
                for c in 0..k {
                    let t = log_y[c] - digamma(phi * mu[c]);
                    d_phi += mu[c] * t;
                    g[c] = phi * t;
                    gbar += mu[c] * g[c];
                }
                d_phi += dg_phi;
                let mut d_s = 0.0;
                for c in 1..k {
                    let e = mu[c] * (g[c] - gbar);
                    d_theta[c] += e * s;
                    d_s += e * theta[c];
                    let db = &mut d_beta[(c - 1) * j..c * j];
                    for (d, &xv) in db.iter_mut().zip(x_row) {
                        *d += e * xv;
                    }
                }
                for (d, &qv) in d_w.iter_mut().zip(q_row) {
                    *d += d_s * qv;
                }
            }
        }

        // w | pi ~ Dirichlet(pi)
        let pi_sum: f64 = pi.iter().sum();
        let mut lp_w = ln_gamma(pi_sum);
        for (&pm, &lw) in pi.iter().zip(&log_w) {
            lp_w += (pm - 1.0) * lw - ln_gamma(pm);
        }
        let lp_pi: f64 = log_pi
            .iter()
            .zip(&pi)
            .map(|(&l, &x)| gamma_lpdf(l, x, p.a_pi, p.b_pi))
            .sum();
        let lp_theta: f64 = theta[1..].iter().map(|&t| normal_lpdf(t, p.sigma_theta)).sum();
        let lp_beta: f64 = beta_flat.iter().map(|&b| normal_lpdf(b, p.sigma_beta)).sum();
        let lp_phi = gamma_lpdf(log_phi, phi, p.a_phi, p.b_phi);

        let total = ll + lp_w + lp_pi + lp_theta + lp_beta + lp_phi + log_jac;
        if total.is_nan() {
            return f64::NEG_INFINITY;
        }

        if let Some(out) = grad.as_deref_mut() {
            let st2 = p.sigma_theta * p.sigma_theta;
            for c in 1..k {
                out[c - 1] = d_theta[c] - theta[c] / st2;
            }
            let sb2 = p.sigma_beta * p.sigma_beta;
            for (o, (&d, &b)) in out[shape.beta_offset()..shape.stick_offset()]
                .iter_mut()
                .zip(d_beta.iter().zip(beta_flat))
            {
                *o = d - b / sb2;
            }
            // derivative with respect to ln w_m
            let big_g: Vec<f64> = (0..m).map(|mm| d_w[mm] * w[mm] + (pi[mm] - 1.0)).collect();
            let mut tail: f64 = big_g.iter().sum();
            for (jdx, &x) in sticks.iter().enumerate() {
                tail -= big_g[jdx];
                let u = x - ((m - 1 - jdx) as f64).ln();
                let sig = crate::special::logistic(u);
                out[shape.stick_offset() + jdx] = big_g[jdx] * (1.0 - sig) - sig * tail
                    + (1.0 - 2.0 * sig)
                    - sig * (m - 2 - jdx) as f64;
            }
            let dg_sum = digamma(pi_sum);
            for mm in 0..m {
                let d_pi = dg_sum - digamma(pi[mm]) + log_w[mm] - p.b_pi;
                out[shape.log_pi_offset() + mm] = pi[mm] * d_pi + p.a_pi;
            }
            out[shape.log_phi_offset()] = phi * (d_phi - p.b_phi) + p.a_phi;
        }
        total
    }
}

/// Log posterior density in constrained coordinates (no Jacobian term), up
/// to the log evidence.
pub fn log_density_constrained(state: &ParameterState, data: &DbwqsData, priors: &PriorConfig) -> f64 {
    let shape = state.shape();
    let ModelShape { k, .. } = shape;
    let s = data.mixture_indices(&state.w);
    let mut eta = vec![0.0; k];
    let mut mu = vec![0.0; k];
    let mut ll = 0.0;
    for i in 0..data.n() {
        state.linear_predictor(s[i], data.x().row(i), &mut eta);
        super::softmax_into(&eta, &mut mu);
        ll += ln_gamma(state.phi);
        for c in 0..k {
            let a = state.phi * mu[c];
            ll += (a - 1.0) * data.log_y().get(i, c) - ln_gamma(a);
        }
    }
    let pi_sum: f64 = state.pi.iter().sum();
    let mut lp = ll + ln_gamma(pi_sum);
    for (&pm, &wm) in state.pi.iter().zip(&state.w) {
        lp += (pm - 1.0) * wm.ln() - ln_gamma(pm);
        lp += gamma_lpdf(pm.ln(), pm, priors.a_pi, priors.b_pi);
    }
    lp += state.theta[1..].iter().map(|&t| normal_lpdf(t, priors.sigma_theta)).sum::<f64>();
    for c in 1..k {
        lp += state.beta.row(c).iter().map(|&b| normal_lpdf(b, priors.sigma_beta)).sum::<f64>();
    }
    lp += gamma_lpdf(state.phi.ln(), state.phi, priors.a_phi, priors.b_phi);
    if lp.is_nan() {
        f64::NEG_INFINITY
    } else {
        lp
    }
}
