//! Equilibrium joining probability for customers arriving while the queue
//! is hidden.

use serde::Serialize;

use crate::error::{AltqError, Result};
use crate::model::{Strategy, ValidatedParams};
use crate::payoff::{unconditional_benefit_detailed, Method};

/// Relative residual target, scaled by [`ModelParams::money_scale`](crate::ModelParams::money_scale).
pub const RESIDUAL_TOLERANCE: f64 = 1e-9;
/// Bisection stops once the bracket is this narrow.
pub const WIDTH_TOLERANCE: f64 = 1e-12;
const MAX_ITERATIONS: u32 = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Case {
    AllBalk,
    Interior,
    AllJoin,
}

impl Case {
    pub fn as_str(&self) -> &'static str {
        match self {
            Case::AllBalk => "AllBalk",
            Case::Interior => "Interior",
            Case::AllJoin => "AllJoin",
        }
    }
}

impl std::fmt::Display for Case {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EquilibriumResult {
    pub q_e: f64,
    pub case: Case,
    /// Net benefit of joining at `q_e`.
    pub residual: f64,
    /// Number of benefit evaluations inside the bisection loop.
    pub iterations: u32,
    pub n_e: u32,
    pub n_s: u32,
    /// Number of evaluations where the generating-function solver had to be
    /// replaced by the QBD one.
    pub fallbacks: u32,
}

impl EquilibriumResult {
    pub fn strategy(&self) -> Strategy {
        Strategy {
            n_e: self.n_e,
            n_s: self.n_s,
            q: self.q_e,
        }
    }
}

/// Equilibrium using the QBD solver for the net benefit.
pub fn equilibrium_q(params: &ValidatedParams) -> Result<EquilibriumResult> {
    equilibrium_q_with(params, Method::Qbd)
}

pub fn equilibrium_q_with(params: &ValidatedParams, method: Method) -> Result<EquilibriumResult> {
    let base = Strategy::for_params(params, 0.0)?;
    let tol = RESIDUAL_TOLERANCE * params.money_scale();
    let mut fallbacks = 0;
    let mut eval = |q: f64| -> Result<f64> {
        let e = unconditional_benefit_detailed(&base.with_q(q)?, params, method)?;
        if e.fallback.is_some() {
            fallbacks += 1;
        }
        Ok(e.value)
    };

    let at_zero = eval(0.0)?;
    let at_one = eval(1.0)?;
    if !at_zero.is_finite() || !at_one.is_finite() || at_one > at_zero + tol {
        return Err(AltqError::NoSignChange { at_zero, at_one });
    }
    let done = |q_e: f64, case: Case, residual: f64, iterations: u32, fallbacks: u32| EquilibriumResult {
        q_e,
        case,
        residual,
        iterations,
        n_e: base.n_e,
        n_s: base.n_s,
        fallbacks,
    };
    if at_zero <= 0.0 {
        return Ok(done(0.0, Case::AllBalk, at_zero, 0, fallbacks));
    }
    if at_one >= 0.0 {
        return Ok(done(1.0, Case::AllJoin, at_one, 0, fallbacks));
    }

    // Invariant: U(lo) > 0 > U(hi).
    let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
    let (mut u_lo, mut u_hi) = (at_zero, at_one);
    let mut iterations = 0;
    while hi - lo > WIDTH_TOLERANCE && iterations < MAX_ITERATIONS {
        let mid = 0.5 * (lo + hi);
        let u = eval(mid)?;
        iterations += 1;
        if !u.is_finite() {
            return Err(AltqError::NoSignChange { at_zero, at_one });
        }
        if u.abs() <= tol {
            return Ok(done(mid, Case::Interior, u, iterations, fallbacks));
        }
        if u > 0.0 {
            lo = mid;
            u_lo = u;
        } else {
            hi = mid;
            u_hi = u;
        }
    }
    let (q_e, residual) = if u_lo.abs() <= u_hi.abs() { (lo, u_lo) } else { (hi, u_hi) };
    Ok(done(q_e, Case::Interior, residual, iterations, fallbacks))
}
