//! Finite-horizon ruin of an insurance reserve invested in risky assets.
//!
//! The reserve follows a linear stochastic integral equation driven by a
//! portfolio semimartingale and perturbed by a heavy-tailed
//! premiums-minus-claims process. This crate simulates that equation
//! pathwise through its explicit solution (the Doleans-Dade exponential
//! scaled by a perturbed initial capital), evaluates the closed-form
//! constants that govern the small-noise ruin asymptotics, constructs
//! asymptotically optimal investment strategies, and estimates ruin
//! probabilities by reproducible parallel Monte Carlo.
//!
//! Module map:
//! - [`levy`]: the claims process and its Levy-measure tail
//! - [`market`]: interest rate and asset models (GBM, exponential-Levy,
//!   CIR stochastic volatility)
//! - [`stoch`]: grids, increments, the stochastic exponential, integrals,
//!   the explicit reserve solution
//! - [`strategy`]: investment strategies, the portfolio process, condition
//!   checkers
//! - [`asymptotics`]: the constant `K`, ruin approximations, reduction
//!   ratios
//! - [`engine`]: Monte Carlo estimators and convergence studies

// Validation throughout uses `if !(x > 0.0)` so that NaN fails the check
// and gets rejected; the positive form would let NaN through.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
// Per-cell fills walk several same-length arrays in lockstep; index loops
// read better than zipped iterator chains there.
#![allow(clippy::needless_range_loop)]

pub mod asymptotics;
pub mod engine;
pub mod error;
pub mod levy;
pub mod market;
pub mod rng;
pub mod stoch;
pub mod strategy;

pub use error::{Error, Result};
