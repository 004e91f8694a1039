//! Equilibrium strategies and performance measures for an M/M/1 queue whose
//! queue length is alternately hidden and visible to arriving customers.

// `!(x > 0.0)` style checks are there to reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod equilibrium;
pub mod error;
pub mod experiments;
pub mod genfunc;
pub mod measures;
pub mod model;
pub mod payoff;
pub mod poly;
pub mod simulator;
pub mod steady_state;

pub use equilibrium::{equilibrium_q, equilibrium_q_with, Case, EquilibriumResult};
pub use error::{AltqError, Result};
pub use experiments::{detect_shape, run_sweep, Shape, SweepFamily, SweepRow, SweepSpec};
pub use measures::{measures, solve, Measures, Solution};
pub use model::{validate, ModelParams, Strategy, ValidatedParams};
pub use payoff::{conditional_benefit, unconditional_benefit, BenefitBreakdown, Method};
pub use simulator::{simulate, simulate_tagged, Estimate, SimConfig, SimEstimates};
pub use steady_state::{solve_censored_qbd, SteadyState};
