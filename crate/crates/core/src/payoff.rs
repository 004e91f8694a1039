//! Expected net benefit of a customer who arrives during an unobservable
//! period and joins.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{AltqError, Result};
use crate::genfunc::{pgf_eval, solve_boundary};
use crate::model::{Strategy, ValidatedParams};
use crate::steady_state::{solve_censored_qbd, SteadyState};

/// Which stationary solver feeds the unconditional benefit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Qbd,
    Genfunc,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Qbd => "qbd",
            Method::Genfunc => "genfunc",
        })
    }
}

impl FromStr for Method {
    type Err = AltqError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "qbd" => Ok(Method::Qbd),
            "genfunc" => Ok(Method::Genfunc),
            other => Err(AltqError::Config(format!("unknown method `{other}`"))),
        }
    }
}

/// Expected net benefit split into what the customer receives and pays.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BenefitBreakdown {
    pub value: f64,
    pub reward: f64,
    pub fees: f64,
    pub waiting_cost: f64,
    pub refund: f64,
}

/// `mu / (mu + theta)`: probability that a service completes before the
/// unobservable period ends.
fn service_wins(params: &ValidatedParams) -> f64 {
    params.mu / (params.mu + params.theta)
}

/// Expected net benefit of joining with `n` customers ahead, given that
/// everybody reneges down to `n_s` at the next switch.
///
/// A customer at position `n + 1 <= n_s` is never asked to leave. Beyond
/// that the customer must see `n + 1 - n_s` services before the period ends
/// to be safe; otherwise they leave with the refund at the switch.
pub fn conditional_benefit(n: u64, strategy: &Strategy, params: &ValidatedParams) -> BenefitBreakdown {
    let (mu, c) = (params.mu, params.cost);
    let ns = strategy.n_s as u64;
    if n < ns {
        let reward = params.reward;
        let fees = params.entrance_fee + params.service_fee;
        let waiting_cost = c * (n + 1) as f64 / mu;
        return BenefitBreakdown {
            value: reward - fees - waiting_cost,
            reward,
            fees,
            waiting_cost,
            refund: 0.0,
        };
    }
    let k = n + 1 - ns;
    let safe = service_wins(params).powf(k as f64);
    let reward = params.reward * safe;
    let fees = params.entrance_fee + params.service_fee * safe;
    let waiting_cost = c / params.theta * (1.0 - safe) + c * ns as f64 / mu * safe;
    let refund = params.refund * (1.0 - safe);
    // Same quantity in the grouped form, which is less prone to cancellation.
    let value = params.refund - params.entrance_fee - c / params.theta
        + bottom_gain(params, strategy) * safe;
    BenefitBreakdown {
        value,
        reward,
        fees,
        waiting_cost,
        refund,
    }
}

/// `R - r - f_s - C n_s / mu + C / theta`.
fn bottom_gain(params: &ValidatedParams, strategy: &Strategy) -> f64 {
    params.reward - params.refund - params.service_fee - params.cost * strategy.n_s as f64 / params.mu
        + params.cost / params.theta
}

/// `(zeta + theta) / zeta`: converts joint probabilities `p(n, 0)` into the
/// distribution seen by an arrival in an unobservable period.
fn mode_factor(params: &ValidatedParams) -> f64 {
    (params.zeta + params.theta) / params.zeta
}

/// Unconditional benefit from a solved stationary vector.
pub fn benefit_from_steady_state(
    ss: &SteadyState,
    strategy: &Strategy,
    params: &ValidatedParams,
) -> f64 {
    let ns = strategy.n_s as usize;
    let (mu, c) = (params.mu, params.cost);
    let k = params.reward - params.entrance_fee - params.service_fee;
    let mut body = 0.0;
    for n in 0..ns {
        body += ss.p0[n] * (k - c * (n + 1) as f64 / mu);
    }
    let rho = ss.rho_minus;
    let w = service_wins(params);
    let tail = ss.anchor()
        * ((params.refund - params.entrance_fee - c / params.theta) / (1.0 - rho)
            + bottom_gain(params, strategy) * w / (1.0 - rho * w));
    mode_factor(params) * (body + tail)
}

fn genfunc_benefit(params: &ValidatedParams, strategy: &Strategy) -> Result<f64> {
    let bp = solve_boundary(params, strategy)?;
    let v = pgf_eval(params, strategy, &bp)?;
    let (mu, c) = (params.mu, params.cost);
    let k = params.reward - params.entrance_fee - params.service_fee - c / mu;
    let w = service_wins(params);
    let inner = k * (v.p0a_at_1 + v.p0b_at_1)
        - c * strategy.n_e as f64 / mu * v.p0b_at_1
        + (params.refund - params.entrance_fee - c / params.theta) * v.p0c_at_1
        - c / mu * (v.p0a_prime_at_1 + v.p0b_prime_at_1)
        + bottom_gain(params, strategy) * w * v.p0c_at_w;
    Ok(mode_factor(params) * inner)
}

/// An unconditional benefit together with the solver that produced it.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenefitEvaluation {
    pub value: f64,
    pub method: Method,
    /// Set when the generating-function solver was requested but could not
    /// be used.
    pub fallback: Option<String>,
}

/// Like [`unconditional_benefit`] but reports which solver was used.
pub fn unconditional_benefit_detailed(
    strategy: &Strategy,
    params: &ValidatedParams,
    method: Method,
) -> Result<BenefitEvaluation> {
    if method == Method::Genfunc {
        match genfunc_benefit(params, strategy) {
            Ok(value) => {
                return Ok(BenefitEvaluation {
                    value,
                    method,
                    fallback: None,
                })
            }
            Err(
                e @ (AltqError::DegenerateQ
                | AltqError::EmptyBand { .. }
                | AltqError::RepeatedRoots(..)
                | AltqError::IllConditioned(_)
                | AltqError::SingularSystem(_)),
            ) => {
                log::warn!("generating-function solver unavailable ({e}); using QBD");
                let ss = solve_censored_qbd(params, strategy)?;
                return Ok(BenefitEvaluation {
                    value: benefit_from_steady_state(&ss, strategy, params),
                    method: Method::Qbd,
                    fallback: Some(e.to_string()),
                });
            }
            Err(e) => return Err(e),
        }
    }
    let ss = solve_censored_qbd(params, strategy)?;
    Ok(BenefitEvaluation {
        value: benefit_from_steady_state(&ss, strategy, params),
        method: Method::Qbd,
        fallback: None,
    })
}

/// Expected net benefit of an arrival in an unobservable period who joins,
/// when everybody else follows `strategy`.
pub fn unconditional_benefit(strategy: &Strategy, params: &ValidatedParams, method: Method) -> Result<f64> {
    unconditional_benefit_detailed(strategy, params, method).map(|e| e.value)
}
