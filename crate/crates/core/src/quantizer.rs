//! Per-exposure quantile scoring.
//!
//! Each exposure column is cut at its empirical quantiles (linear interpolation
//! between order statistics) and every value is replaced by the index of the
//! bin it falls into, `0..n_quantiles`.

use serde::{Deserialize, Serialize};

use crate::linalg::Matrix;
use crate::{Error, Result};

/// Linear-interpolation empirical quantile of an ascending sample.
///
/// Uses `h = (n - 1) p` and interpolates between the order statistics
/// `floor(h)` and `ceil(h)`. Returns NaN for an empty sample.
pub fn empirical_quantile(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    if n == 0 {
        return f64::NAN;
    }
    let h = (n - 1) as f64 * p.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Fitted per-exposure cutpoints.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantileScorer {
    cutpoints: Vec<Vec<f64>>,
    n_quantiles: usize,
    exposure_names: Vec<String>,
}

impl QuantileScorer {
    pub fn cutpoints(&self) -> &[Vec<f64>] {
        &self.cutpoints
    }

    pub fn n_quantiles(&self) -> usize {
        self.n_quantiles
    }

    pub fn exposure_names(&self) -> &[String] {
        &self.exposure_names
    }

    pub fn n_exposures(&self) -> usize {
        self.cutpoints.len()
    }

    /// Bin index of `value` for exposure `column`. A value equal to a cutpoint
    /// lands in the higher bin; values outside the training range clamp to the
    /// first or last bin.
    pub fn score_value(&self, column: usize, value: f64) -> u32 {
        self.cutpoints[column].iter().filter(|&&c| value >= c).count() as u32
    }

    /// Scores every entry of an `N x M` exposure matrix.
    pub fn score(&self, exposures: &Matrix) -> Result<QuantileMatrix> {
        if exposures.cols() != self.n_exposures() {
            return Err(Error::Dimension(format!(
                "scorer was fitted on {} exposures, got {}",
                self.n_exposures(),
                exposures.cols()
            )));
        }
        let mut scores = Vec::with_capacity(exposures.rows() * exposures.cols());
        for i in 0..exposures.rows() {
            for (m, &v) in exposures.row(i).iter().enumerate() {
                if !v.is_finite() {
                    return Err(Error::InvalidInput(format!(
                        "non-finite exposure at row {i}, column {m}"
                    )));
                }
                scores.push(self.score_value(m, v));
            }
        }
        QuantileMatrix::new(exposures.rows(), exposures.cols(), scores, self.n_quantiles)
    }
}

/// Fits cutpoints at probabilities `j / n_quantiles`, `j = 1..n_quantiles-1`,
/// independently for each exposure column.
pub fn fit_quantile_scorer(exposures: &Matrix, n_quantiles: usize) -> Result<QuantileScorer> {
    let names = (0..exposures.cols()).map(|m| format!("exposure_{}", m + 1)).collect();
    fit_quantile_scorer_named(exposures, n_quantiles, names)
}

pub fn fit_quantile_scorer_named(
    exposures: &Matrix,
    n_quantiles: usize,
    exposure_names: Vec<String>,
) -> Result<QuantileScorer> {
    if n_quantiles < 2 {
        return Err(Error::InvalidInput(format!("n_quantiles must be >= 2, got {n_quantiles}")));
    }
    if exposures.rows() < n_quantiles {
        return Err(Error::InvalidInput(format!(
            "need at least {n_quantiles} observations to fit {n_quantiles} quantiles, got {}",
            exposures.rows()
        )));
    }
    if exposure_names.len() != exposures.cols() {
        return Err(Error::Dimension(format!(
            "{} exposure names for {} columns",
            exposure_names.len(),
            exposures.cols()
        )));
    }
    let mut cutpoints = Vec::with_capacity(exposures.cols());
    for m in 0..exposures.cols() {
        let mut col = exposures.column(m);
        if let Some(i) = col.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!("non-finite exposure at row {i}, column {m}")));
        }
        col.sort_by(f64::total_cmp);
        if col[0] == col[col.len() - 1] {
            return Err(Error::DegenerateExposure { column: m, name: exposure_names[m].clone() });
        }
        let cuts = (1..n_quantiles)
            .map(|j| empirical_quantile(&col, j as f64 / n_quantiles as f64))
            .collect();
        cutpoints.push(cuts);
    }
    Ok(QuantileScorer { cutpoints, n_quantiles, exposure_names })
}

/// Integer quantile scores, `N x M`, each in `0..n_quantiles`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantileMatrix {
    rows: usize,
    cols: usize,
    scores: Vec<u32>,
    n_quantiles: usize,
}

impl QuantileMatrix {
    pub fn new(rows: usize, cols: usize, scores: Vec<u32>, n_quantiles: usize) -> Result<Self> {
        if scores.len() != rows * cols {
            return Err(Error::Dimension(format!(
                "{} scores cannot fill a {rows}x{cols} matrix",
                scores.len()
            )));
        }
        if let Some(s) = scores.iter().find(|&&s| s as usize >= n_quantiles) {
            return Err(Error::InvalidInput(format!(
                "score {s} outside 0..{n_quantiles}"
            )));
        }
        Ok(Self { rows, cols, scores, n_quantiles })
    }

    pub fn from_rows(rows: &[Vec<u32>], n_quantiles: usize) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::Dimension("ragged quantile rows".into()));
        }
        let scores = rows.iter().flatten().copied().collect();
        Self::new(rows.len(), cols, scores, n_quantiles)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn n_quantiles(&self) -> usize {
        self.n_quantiles
    }

    pub fn row(&self, i: usize) -> &[u32] {
        &self.scores[i * self.cols..(i + 1) * self.cols]
    }

    pub fn get(&self, i: usize, m: usize) -> u32 {
        self.scores[i * self.cols + m]
    }

    /// Real-valued copy for arithmetic.
    pub fn to_matrix(&self) -> Matrix {
        Matrix::from_vec(self.rows, self.cols, self.scores.iter().map(|&s| s as f64).collect())
            .expect("shape is consistent")
    }

    pub fn select_columns(&self, cols: &[usize]) -> QuantileMatrix {
        let mut scores = Vec::with_capacity(self.rows * cols.len());
        for i in 0..self.rows {
            scores.extend(cols.iter().map(|&c| self.get(i, c)));
        }
        QuantileMatrix { rows: self.rows, cols: cols.len(), scores, n_quantiles: self.n_quantiles }
    }
}
