//! Cost-optimal file-segment caching for mobile device-to-device networks.
//!
//! Mobile users carry caches of coded file segments and exchange them
//! opportunistically when they meet; meetings per user pair follow independent
//! Poisson processes. A user that has not collected enough distinct segments
//! of its requested file by a deadline downloads the shortfall from the
//! network at a higher per-segment cost. This crate provides:
//!
//! - the exact expected-cost evaluator for a caching placement, together with
//!   a Monte Carlo contact simulator that serves as an independent check
//!   ([`cost`], [`sim`]);
//! - a linear lower-bounding objective and an exact branch-and-bound solver
//!   for the resulting integer program, yielding certified lower bounds on
//!   the (NP-hard) placement problem ([`acocp`]);
//! - a polynomial-time user-by-user placement algorithm based on a per-user
//!   dynamic program ([`mauu`]);
//! - popularity-based and randomized baseline policies ([`baselines`]);
//! - brute-force reference solvers for tiny instances ([`oracle`]);
//! - instance generators, a 3-SAT reduction gadget, and file formats
//!   ([`model`]);
//! - a CLI front end for generation, solving, simulation, and experiment
//!   sweeps with CSV output ([`cli`]).

// Index-heavy numerical loops over several parallel arrays read better with
// explicit indices, and validity checks are written so NaN fails them.
#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod acocp;
pub mod baselines;
pub mod cli;
pub mod cost;
pub mod mauu;
pub mod model;
pub mod oracle;
pub mod prob;
pub mod sim;

use thiserror::Error;

/// Errors shared across the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("invalid placement: {0}")]
    InvalidPlacement(String),
    #[error("search space too large: {0}")]
    BudgetExceeded(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

/// Compensated (Kahan) accumulator. Summation order then only affects
/// results at the level of double rounding, which keeps parallel and
/// sequential reductions within 1e-12 of each other.
#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct KahanSum {
    sum: f64,
    c: f64,
}

impl KahanSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, value: f64) {
        let y = value - self.c;
        let t = self.sum + y;
        self.c = (t - self.sum) - y;
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum
    }
}
