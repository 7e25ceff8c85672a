//! Uncertainty-aware decision making under model uncertainty.
//!
//! An agent who estimates a model from limited data and then optimizes as if
//! the estimate were true (the *plug-in* strategy) is exposed to estimation
//! error. This crate implements the alternative of drawing a distribution of
//! candidate models and maximizing an outer *uncertainty measure* (entropic
//! risk or CVaR) of the model-wise objective, together with the tooling needed
//! to study it:
//!
//! - [`mathkit`]: normal distribution functions, Cholesky, seeded streams.
//! - [`risk`]: entropic, mean-variance, VaR and CVaR on samples and normals.
//! - [`gauss1d`]: the one-dimensional Gaussian lab with closed-form strategies
//!   and their out-of-sample performance.
//! - [`gausshd`]: the d-dimensional Gaussian lab.
//! - [`modeldist`]: model distributions built by drift uncertainty,
//!   subsampling or bootstrapping.
//! - [`cvarsgd`]: memory-bounded CVaR stochastic gradient ascent.
//! - [`nnpolicy`]: a small feedforward policy with reverse-mode gradients.
//! - [`hedgelab`]: Heston paths, cliquet hedging and robust deep hedges.
//!
//! Monte Carlo loops run through [`exec::Execution`], which uses rayon when the
//! `parallel` feature is enabled and falls back to plain iteration otherwise.
//! Every random draw is keyed by an explicit `(seed, stream)` pair so results do
//! not depend on the number of worker threads.

pub mod cvarsgd;
pub mod error;
pub mod exec;
pub mod gauss1d;
pub mod gausshd;
pub mod hedgelab;
pub mod mathkit;
pub mod modeldist;
pub mod nnpolicy;
pub mod risk;

pub use error::{Error, Result};
pub use exec::Execution;
pub use mathkit::Rng;
