//! The DBWQS joint posterior.
//!
//! The mean of each outcome row is a softmax of `S_i * theta_k + x_i' beta_k`
//! with the first category as reference (`theta_1 = 0`, `beta_1 = 0`), where
//! `S_i = sum_m q_im w_m` is the weighted quantile sum index. Weights carry a
//! Dirichlet(`pi`) prior with Gamma priors on `pi`; the precision `phi` has a
//! Gamma prior and the regression coefficients Normal priors.
//!
//! The sampler works on an unconstrained vector laid out as
//! `(theta_2..K, beta_2..K (row-major), stick latents (M-1), ln pi (M), ln phi)`.

mod posterior;
mod transform;

use serde::{Deserialize, Serialize};

use crate::dirichlet::SimplexVector;
use crate::linalg::{dot, Matrix};
use crate::quantizer::QuantileMatrix;
use crate::{Error, Result};

pub use posterior::{log_density_constrained, DbwqsModel};
pub use transform::{constrain, unconstrain};

/// How zero proportions in the observed outcome are treated.
///
/// Serialized as `"reject"` or `"replace:EPS"`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum ZeroPolicy {
    /// Reject any row containing a zero.
    #[default]
    Reject,
    /// Replace zeros by `eps` and renormalize the row.
    Replace(f64),
}

impl std::str::FromStr for ZeroPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "reject" {
            return Ok(ZeroPolicy::Reject);
        }
        if s == "replace" {
            return Ok(ZeroPolicy::Replace(1e-6));
        }
        if let Some(eps) = s.strip_prefix("replace:") {
            let eps: f64 = eps
                .parse()
                .map_err(|_| Error::Config(format!("bad zero-policy epsilon {eps:?}")))?;
            if !(eps > 0.0 && eps < 1.0) {
                return Err(Error::Config(format!("zero-policy epsilon {eps} must be in (0, 1)")));
            }
            return Ok(ZeroPolicy::Replace(eps));
        }
        Err(Error::Config(format!(
            "unknown zero policy {s:?} (expected `reject` or `replace:EPS`)"
        )))
    }
}

impl std::fmt::Display for ZeroPolicy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ZeroPolicy::Reject => write!(f, "reject"),
            ZeroPolicy::Replace(eps) => write!(f, "replace:{eps}"),
        }
    }
}

impl TryFrom<String> for ZeroPolicy {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<ZeroPolicy> for String {
    fn from(p: ZeroPolicy) -> String {
        p.to_string()
    }
}

/// Outcome proportions, one simplex row per subject.
#[derive(Debug, Clone, PartialEq)]
pub struct CompositionMatrix(Matrix);

impl CompositionMatrix {
    /// Wraps rows that already satisfy the simplex invariants.
    pub fn new(y: Matrix) -> Result<Self> {
        if y.cols() < 2 {
            return Err(Error::InvalidInput("a composition needs at least 2 categories".into()));
        }
        for i in 0..y.rows() {
            crate::dirichlet::check_simplex(y.row(i))
                .map_err(|e| Error::InvalidInput(format!("row {} not on simplex: {e}", i + 1)))?;
        }
        Ok(Self(y))
    }

    /// Validates raw rows against a sum tolerance, applies the zero policy and
    /// renormalizes each row to sum to one. Row numbers in errors are 1-based.
    pub fn from_raw(mut y: Matrix, policy: ZeroPolicy, sum_tol: f64) -> Result<Self> {
        if y.cols() < 2 {
            return Err(Error::InvalidInput("a composition needs at least 2 categories".into()));
        }
        for i in 0..y.rows() {
            let row = y.row_mut(i);
            if let Some(v) = row.iter().find(|v| !v.is_finite() || **v < 0.0) {
                return Err(Error::InvalidInput(format!(
                    "row {} not on simplex: component {v} is negative or non-finite",
                    i + 1
                )));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > sum_tol {
                return Err(Error::InvalidInput(format!(
                    "row {} not on simplex: proportions sum to {sum}",
                    i + 1
                )));
            }
            if row.iter().any(|&v| v == 0.0) {
                match policy {
                    ZeroPolicy::Reject => {
                        return Err(Error::InvalidInput(format!(
                            "row {} not on simplex: contains a zero proportion (use --zero-policy replace:EPS)",
                            i + 1
                        )))
                    }
                    ZeroPolicy::Replace(eps) => row.iter_mut().filter(|v| **v == 0.0).for_each(|v| *v = eps),
                }
            }
            let sum: f64 = row.iter().sum();
            row.iter_mut().for_each(|v| *v /= sum);
        }
        Self::new(y)
    }

    pub fn matrix(&self) -> &Matrix {
        &self.0
    }

    pub fn rows(&self) -> usize {
        self.0.rows()
    }

    pub fn categories(&self) -> usize {
        self.0.cols()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        self.0.row(i)
    }
}

/// Observed outcome, quantile scores and covariates sharing the same rows.
#[derive(Debug, Clone)]
pub struct DbwqsData {
    y: CompositionMatrix,
    q: QuantileMatrix,
    x: Matrix,
    log_y: Matrix,
    q_real: Matrix,
}

impl DbwqsData {
    pub fn new(y: CompositionMatrix, q: QuantileMatrix, x: Matrix) -> Result<Self> {
        let n = y.rows();
        if q.rows() != n || x.rows() != n {
            return Err(Error::Dimension(format!(
                "outcome has {n} rows, quantiles {} and covariates {}",
                q.rows(),
                x.rows()
            )));
        }
        if q.cols() == 0 {
            return Err(Error::InvalidInput("at least one exposure is required".into()));
        }
        if let Some(v) = x.as_slice().iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!("non-finite covariate value {v}")));
        }
        let log_y = Matrix::from_vec(
            n,
            y.categories(),
            y.matrix().as_slice().iter().map(|v| v.ln()).collect(),
        )?;
        let q_real = q.to_matrix();
        Ok(Self { y, q, x, log_y, q_real })
    }

    pub fn n(&self) -> usize {
        self.y.rows()
    }

    pub fn shape(&self) -> ModelShape {
        ModelShape { k: self.y.categories(), m: self.q.cols(), j: self.x.cols() }
    }

    pub fn y(&self) -> &CompositionMatrix {
        &self.y
    }

    pub fn q(&self) -> &QuantileMatrix {
        &self.q
    }

    pub fn x(&self) -> &Matrix {
        &self.x
    }

    pub(crate) fn log_y(&self) -> &Matrix {
        &self.log_y
    }

    pub(crate) fn q_real(&self) -> &Matrix {
        &self.q_real
    }

    /// `S_i` for every subject under weights `w`.
    pub fn mixture_indices(&self, w: &[f64]) -> Vec<f64> {
        (0..self.n()).map(|i| dot(self.q_real.row(i), w)).collect()
    }

    /// Stacks a second dataset below this one.
    pub fn concat(&self, other: &DbwqsData) -> Result<DbwqsData> {
        let y = CompositionMatrix::new(self.y.matrix().vstack(other.y.matrix())?)?;
        let qm = self.q.to_matrix().vstack(&other.q.to_matrix())?;
        let q = QuantileMatrix::new(
            qm.rows(),
            qm.cols(),
            qm.as_slice().iter().map(|&v| v as u32).collect(),
            self.q.n_quantiles().max(other.q.n_quantiles()),
        )?;
        let x = self.x.vstack(&other.x)?;
        DbwqsData::new(y, q, x)
    }
}

/// Prior hyperparameters. Gamma distributions use the shape-rate form.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PriorConfig {
    pub sigma_beta: f64,
    pub sigma_theta: f64,
    pub a_phi: f64,
    pub b_phi: f64,
    pub a_pi: f64,
    pub b_pi: f64,
}

impl Default for PriorConfig {
    fn default() -> Self {
        Self { sigma_beta: 100.0, sigma_theta: 100.0, a_phi: 0.001, b_phi: 0.001, a_pi: 2.0, b_pi: 2.0 }
    }
}

impl PriorConfig {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("sigma_beta", self.sigma_beta),
            ("sigma_theta", self.sigma_theta),
            ("a_phi", self.a_phi),
            ("b_phi", self.b_phi),
            ("a_pi", self.a_pi),
            ("b_pi", self.b_pi),
        ];
        for (name, v) in fields {
            if !(v > 0.0) || v.is_nan() {
                return Err(Error::Config(format!("prior {name} = {v} must be positive")));
            }
        }
        Ok(())
    }
}

/// Number of outcome categories (`k`), exposures (`m`) and covariates (`j`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ModelShape {
    pub k: usize,
    pub m: usize,
    pub j: usize,
}

impl ModelShape {
    /// Dimension of the unconstrained vector.
    pub fn dim(&self) -> usize {
        (self.k - 1) + (self.k - 1) * self.j + (self.m - 1) + self.m + 1
    }

    pub(crate) fn beta_offset(&self) -> usize {
        self.k - 1
    }

    pub(crate) fn stick_offset(&self) -> usize {
        self.beta_offset() + (self.k - 1) * self.j
    }

    pub(crate) fn log_pi_offset(&self) -> usize {
        self.stick_offset() + self.m - 1
    }

    pub(crate) fn log_phi_offset(&self) -> usize {
        self.log_pi_offset() + self.m
    }

    /// Names of the constrained parameters, in [`ParameterState::to_flat`] order.
    pub fn parameter_names(&self) -> Vec<String> {
        let mut names = Vec::with_capacity(self.constrained_dim());
        names.extend((2..=self.k).map(|k| format!("theta[{k}]")));
        for k in 2..=self.k {
            names.extend((1..=self.j).map(|j| format!("beta[{k},{j}]")));
        }
        names.extend((1..=self.m).map(|m| format!("w[{m}]")));
        names.extend((1..=self.m).map(|m| format!("pi[{m}]")));
        names.push("phi".into());
        names
    }

    pub fn constrained_dim(&self) -> usize {
        (self.k - 1) + (self.k - 1) * self.j + 2 * self.m + 1
    }
}

/// Constrained model parameters.
///
/// `theta` has length `K` and `beta` is `K x J`; the first entry of `theta`
/// and the first row of `beta` belong to the reference category and are zero.
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterState {
    pub theta: Vec<f64>,
    pub beta: Matrix,
    pub w: Vec<f64>,
    pub pi: Vec<f64>,
    pub phi: f64,
}

impl ParameterState {
    pub fn shape(&self) -> ModelShape {
        ModelShape { k: self.theta.len(), m: self.w.len(), j: self.beta.cols() }
    }

    pub fn validate(&self) -> Result<()> {
        let shape = self.shape();
        if shape.k < 2 || shape.m < 1 || self.beta.rows() != shape.k || self.pi.len() != shape.m {
            return Err(Error::Dimension("inconsistent parameter shapes".into()));
        }
        if self.theta[0] != 0.0 || self.beta.row(0).iter().any(|&b| b != 0.0) {
            return Err(Error::Domain("reference category coefficients must be zero".into()));
        }
        let sum: f64 = self.w.iter().sum();
        if self.w.iter().any(|&w| !(w >= 0.0)) || (sum - 1.0).abs() > 1e-10 {
            return Err(Error::Domain("weights are not on the simplex".into()));
        }
        if self.pi.iter().any(|&p| !(p > 0.0)) || !(self.phi > 0.0) {
            return Err(Error::Domain("pi and phi must be positive".into()));
        }
        Ok(())
    }

    /// Flat constrained vector in [`ModelShape::parameter_names`] order.
    pub fn to_flat(&self) -> Vec<f64> {
        let shape = self.shape();
        let mut out = Vec::with_capacity(shape.constrained_dim());
        out.extend_from_slice(&self.theta[1..]);
        for k in 1..shape.k {
            out.extend_from_slice(self.beta.row(k));
        }
        out.extend_from_slice(&self.w);
        out.extend_from_slice(&self.pi);
        out.push(self.phi);
        out
    }

    /// Linear predictors `S theta_k + x' beta_k` for one subject.
    pub fn linear_predictor(&self, s: f64, x_row: &[f64], out: &mut [f64]) {
        for (k, o) in out.iter_mut().enumerate() {
            *o = s * self.theta[k] + dot(x_row, self.beta.row(k));
        }
    }
}

/// Weighted quantile sum `S = sum_m q_m w_m`.
pub fn mixture_index(q_row: &[u32], w: &SimplexVector) -> Result<f64> {
    if q_row.len() != w.len() {
        return Err(Error::Dimension(format!(
            "{} quantile scores for {} weights",
            q_row.len(),
            w.len()
        )));
    }
    Ok(q_row.iter().zip(w.values()).map(|(&q, &w)| q as f64 * w).sum())
}

/// Softmax of one row of logits, computed with the max shift.
pub fn softmax_into(logits: &[f64], out: &mut [f64]) {
    let lse = crate::special::log_sum_exp(logits);
    for (o, &l) in out.iter_mut().zip(logits) {
        *o = (l - lse).exp();
    }
}

/// Mean compositions `mu_ik` for every subject.
///
/// `theta` has length `K` and `beta` is `K x J`, both with the reference
/// category (index 0) fixed at zero.
pub fn compute_means(s: &[f64], x: &Matrix, theta: &[f64], beta: &Matrix) -> Result<Matrix> {
    let k = theta.len();
    if x.rows() != s.len() || beta.rows() != k || beta.cols() != x.cols() {
        return Err(Error::Dimension("index, covariate and coefficient shapes disagree".into()));
    }
    if theta[0] != 0.0 || beta.row(0).iter().any(|&b| b != 0.0) {
        return Err(Error::Domain("reference category coefficients must be zero".into()));
    }
    let mut mu = Matrix::zeros(s.len(), k);
    let mut eta = vec![0.0; k];
    for (i, &si) in s.iter().enumerate() {
        for (c, e) in eta.iter_mut().enumerate() {
            *e = si * theta[c] + dot(x.row(i), beta.row(c));
        }
        if eta.iter().any(|e| !e.is_finite()) {
            return Err(Error::Domain(format!("non-finite linear predictor for subject {}", i + 1)));
        }
        softmax_into(&eta, mu.row_mut(i));
    }
    Ok(mu)
}

#[cfg(test)]
mod tests;
