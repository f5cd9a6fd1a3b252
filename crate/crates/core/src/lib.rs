//! Exponential inequalities for nonstationary one-step contracting Markov
//! chains, and their use for periodic autoregressive prediction.
//!
//! The crate is organised bottom-up:
//!
//! - [`chain`] defines chain models `X_t = F_t(X_{t-1}, ε_t)`, simulates them
//!   reproducibly and evaluates the mean-distance functions `G_ε`, `G_{X₁}`.
//! - [`martingale`] enumerates finite-support chains exactly and verifies the
//!   martingale-difference bounds that drive every inequality.
//! - [`concentration`] holds the closed-form tail bounds (Bernstein, Cramér,
//!   Rio/McDiarmid).
//! - [`periodic_ar`] implements empirical risk minimisation over covering nets
//!   of periodic AR predictors, penalised period selection and the slope
//!   heuristic.
//! - [`experiments`] ties everything together with Monte Carlo validation.
//! - [`io`] contains the file formats and configuration schemas.

pub mod chain;
pub mod concentration;
pub mod error;
pub mod experiments;
pub mod io;
pub mod martingale;
pub mod parallel;
pub mod periodic_ar;
pub mod seed;
pub mod special;

pub use error::{Error, Result};
