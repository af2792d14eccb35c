//! Distributionally robust path integral (DRPI) control.
//!
//! Monte Carlo path-integral controllers for control-affine SDEs, robustified
//! against a misestimated disturbance drift through a KL ambiguity set. The
//! robust problem is split into a univariate master problem over the risk
//! parameter `theta` and a risk-sensitive subproblem that is evaluated with
//! uncontrolled rollouts (Feynman–Kac), so one batch of sampled costs serves
//! both.
//!
//! Module map:
//!
//! - [`models`]: dynamics, model registry and the Euler–Maruyama step
//! - [`costs`]: state, terminal and control costs
//! - [`uncertainty`]: drift estimation, ambiguity radius schedules, guarantees
//! - [`rollout`]: counter-based noise streams and the parallel rollout engine
//! - [`solver`]: master problem, effective temperature, weights and controls
//! - [`controller`]: closed-loop DRPI / PIC episodes
//! - [`oracles`]: LQR, LEQG and quadrature references used for validation
//! - [`harness`]: experiment configs, statistics and output files

// `!(x > 0.0)` is used throughout so that NaN inputs are rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod controller;
pub mod costs;
pub mod error;
pub mod harness;
pub mod models;
pub mod oracles;
pub mod rollout;
pub mod solver;
pub mod uncertainty;

pub use error::{DrpiError, Result};
