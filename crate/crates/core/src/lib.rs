//! Dirichlet Bayesian weighted quantile sum (DBWQS) regression.
//!
//! A compositional outcome (rows on the unit simplex) is regressed on a
//! weighted quantile sum index of correlated exposures through a Dirichlet
//! likelihood with a multinomial-logit link. The crate ships everything needed
//! to fit the model end to end:
//!
//! - [`quantizer`]: per-exposure quantile scoring.
//! - [`dirichlet`]: Dirichlet densities and sampling.
//! - [`model`]: the joint log-posterior, its gradient and the parameter transforms.
//! - [`sampler`]: a multinomial No-U-Turn sampler with warm-up adaptation.
//! - [`diagnostics`]: split R-hat, effective sample size and posterior summaries.
//! - [`effects`]: relative and absolute effect estimates derived from the draws.
//! - [`simulation`]: the data generator and Monte Carlo study harness.
//! - [`cli`]: the `dbwqs` command-line front end.

pub mod cli;
pub mod diagnostics;
pub mod dirichlet;
pub mod effects;
mod error;
pub mod linalg;
pub mod model;
pub mod quantizer;
pub mod sampler;
pub mod simulation;
pub mod special;

pub use error::{Error, Result};
