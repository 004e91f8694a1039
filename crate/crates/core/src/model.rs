//! Model parameters, their validity conditions, and the two decision
//! thresholds that pin down the family of candidate strategies.

use serde::{Deserialize, Serialize};

use crate::error::{AltqError, Result};

/// Default upper bound on the reneging threshold `n_s`.
pub const DEFAULT_THRESHOLD_CAP: u64 = 100_000;

/// Number of ULPs the floor arguments are nudged upward before flooring.
const FLOOR_GUARD_ULPS: usize = 4;

/// Operational and economic parameters of the alternating-information queue.
///
/// Mode 0 is the unobservable mode (left at rate `theta`), mode 1 the
/// observable one (left at rate `zeta`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelParams {
    pub lambda: f64,
    pub mu: f64,
    pub theta: f64,
    pub zeta: f64,
    #[serde(rename = "R")]
    pub reward: f64,
    #[serde(rename = "C")]
    pub cost: f64,
    #[serde(rename = "fe")]
    pub entrance_fee: f64,
    #[serde(rename = "fs")]
    pub service_fee: f64,
    #[serde(rename = "r")]
    pub refund: f64,
}

impl ModelParams {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| AltqError::Config(e.to_string()))
    }

    pub fn validate(self) -> Result<ValidatedParams> {
        validate(self)
    }

    /// Mean length of one unobservable plus one observable period.
    pub fn cycle(&self) -> f64 {
        1.0 / self.theta + 1.0 / self.zeta
    }

    /// Long-run fraction of time spent in observable mode.
    pub fn gamma(&self) -> f64 {
        self.theta / (self.theta + self.zeta)
    }

    /// Natural money scale of the net-benefit function, `|R| + |r| + C/mu`.
    pub fn money_scale(&self) -> f64 {
        self.reward.abs() + self.refund.abs() + self.cost / self.mu
    }
}

/// Parameters that passed [`validate`]. Only constructible through it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(transparent)]
pub struct ValidatedParams(ModelParams);

impl ValidatedParams {
    pub fn get(&self) -> &ModelParams {
        &self.0
    }

    pub fn into_inner(self) -> ModelParams {
        self.0
    }

    pub fn threshold_ne(&self) -> u32 {
        threshold_ne(self)
    }

    pub fn threshold_ns(&self) -> Result<u32> {
        threshold_ns(self)
    }

    /// Copy with fields modified by `f`, re-validated.
    pub fn with(&self, f: impl FnOnce(&mut ModelParams)) -> Result<ValidatedParams> {
        let mut p = self.0;
        f(&mut p);
        validate(p)
    }
}

impl std::ops::Deref for ValidatedParams {
    type Target = ModelParams;

    fn deref(&self) -> &ModelParams {
        &self.0
    }
}

/// Checks positivity of rates and costs, nonnegativity of fees, and the two
/// non-triviality conditions `R > f_e + f_s + C/mu` and `r <= f_e`.
pub fn validate(params: ModelParams) -> Result<ValidatedParams> {
    let rates = [
        ("lambda", params.lambda),
        ("mu", params.mu),
        ("theta", params.theta),
        ("zeta", params.zeta),
    ];
    for (name, value) in rates {
        if !(value.is_finite() && value > 0.0) {
            return Err(AltqError::NonPositiveRate { name, value });
        }
    }
    let finite = [
        ("R", params.reward),
        ("C", params.cost),
        ("fe", params.entrance_fee),
        ("fs", params.service_fee),
        ("r", params.refund),
    ];
    for (name, value) in finite {
        if !value.is_finite() {
            return Err(AltqError::NonFinite { name, value });
        }
    }
    if !(params.cost > 0.0) {
        return Err(AltqError::NonPositiveCost(params.cost));
    }
    for (name, value) in [("fe", params.entrance_fee), ("fs", params.service_fee)] {
        if value < 0.0 {
            return Err(AltqError::NegativeFee { name, value });
        }
    }
    let bound = params.entrance_fee + params.service_fee + params.cost / params.mu;
    if !(params.reward > bound) {
        return Err(AltqError::TrivialSystem {
            reward: params.reward,
            bound,
        });
    }
    if params.refund > params.entrance_fee {
        return Err(AltqError::InstantReneger {
            refund: params.refund,
            entrance_fee: params.entrance_fee,
        });
    }
    Ok(ValidatedParams(params))
}

fn guarded_floor(x: f64) -> f64 {
    let mut y = x;
    for _ in 0..FLOOR_GUARD_ULPS {
        y = y.next_up();
    }
    y.floor()
}

/// Naor threshold for observable arrivals: join iff the post-join position
/// is at most `floor(mu (R - f_e - f_s) / C)`. Ties join.
pub fn threshold_ne(params: &ValidatedParams) -> u32 {
    let p = params.get();
    let arg = p.mu * (p.reward - p.entrance_fee - p.service_fee) / p.cost;
    // validation guarantees arg > 1; the cap on n_s also bounds n_e.
    guarded_floor(arg).max(1.0).min(u32::MAX as f64) as u32
}

/// Reneging threshold at unobservable-to-observable switches:
/// stay iff the position is at most `floor(mu (R - r - f_s) / C)`.
pub fn threshold_ns(params: &ValidatedParams) -> Result<u32> {
    threshold_ns_capped(params, DEFAULT_THRESHOLD_CAP)
}

pub fn threshold_ns_capped(params: &ValidatedParams, cap: u64) -> Result<u32> {
    let p = params.get();
    let arg = guarded_floor(p.mu * (p.reward - p.refund - p.service_fee) / p.cost);
    if arg > cap as f64 || arg > u32::MAX as f64 {
        return Err(AltqError::ThresholdCapExceeded { value: arg, cap });
    }
    Ok((arg as u32).max(threshold_ne(params)))
}

/// A potential equilibrium strategy `(n_e, n_s, q)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Strategy {
    pub n_e: u32,
    pub n_s: u32,
    pub q: f64,
}

impl Strategy {
    pub fn new(n_e: u32, n_s: u32, q: f64) -> Result<Self> {
        if n_e < 1 {
            return Err(AltqError::InvalidStrategy(format!("n_e = {n_e} must be >= 1")));
        }
        if n_e > n_s {
            return Err(AltqError::InvalidStrategy(format!(
                "n_e = {n_e} exceeds n_s = {n_s}"
            )));
        }
        if !(0.0..=1.0).contains(&q) {
            return Err(AltqError::InvalidStrategy(format!("q = {q} outside [0, 1]")));
        }
        Ok(Strategy { n_e, n_s, q })
    }

    /// The strategy with the thresholds implied by `params` and joining
    /// probability `q`.
    pub fn for_params(params: &ValidatedParams, q: f64) -> Result<Self> {
        Strategy::new(params.threshold_ne(), params.threshold_ns()?, q)
    }

    pub fn with_q(self, q: f64) -> Result<Self> {
        Strategy::new(self.n_e, self.n_s, q)
    }
}
