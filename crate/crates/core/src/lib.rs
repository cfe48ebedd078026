//! Random generalised-partition-of-unity (RGPU) bivariate copulas under a
//! Dirichlet process prior.
//!
//! The library provides two model variants built from discrete generating
//! functions on the unit interval:
//!
//! - **NegBinC** — negative-binomial generating function. The induced
//!   partition of `[0,1]` is infinite and accumulates at 1, so the copula can
//!   carry upper tail dependence (or lower, through rotation).
//! - **BernsteinCBP** — binomial generating function. The partition is finite
//!   and the copula is a random Bernstein polynomial copula with no tail
//!   dependence.
//!
//! Both are infinite mixtures of products of beta densities with
//! stick-breaking weights. Inference is a slice-augmented Gibbs sampler with
//! adaptive random-walk Metropolis–Hastings moves for the mixture atoms and
//! the smoothing parameter.
//!
//! Module map:
//!
//! - [`partition`] — deterministic copula mathematics: generating functions,
//!   breakpoints, the interval locator, beta kernels, mixture densities, and
//!   the diagonal-dominance tail coefficient.
//! - [`sampler`] — the Gibbs sampler and its chain state.
//! - [`parametric`] — Frank, Gumbel, Clayton, Joe, and Gaussian copulas used
//!   as data generators and fitted baselines.
//! - [`data`] — copula samples, pseudo-observations, mixture simulation,
//!   CSV round trips, and train/test splitting.
//! - [`evaluate`] — log-predictive scores, posterior predictive sampling,
//!   density grids, and Kendall's tau.
//! - [`draws`] — the persisted posterior-draw file format.

pub mod data;
pub mod draws;
pub mod error;
pub mod evaluate;
pub mod numeric;
pub mod parametric;
pub mod partition;
pub mod rng;
pub mod sampler;

pub use error::{Error, Result};
