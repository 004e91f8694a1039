//! Long-run performance measures computed from a stationary solution.

use serde::Serialize;

use crate::equilibrium::{equilibrium_q_with, EquilibriumResult};
use crate::error::Result;
use crate::model::{ModelParams, ValidatedParams};
use crate::payoff::Method;
use crate::steady_state::{solve_censored_qbd, SteadyState};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Measures {
    pub mu_e: f64,
    pub a_e: f64,
    #[serde(rename = "EN")]
    pub en: f64,
    #[serde(rename = "S_e")]
    pub s_e: f64,
    pub q_e: f64,
}

/// Service completions per unit time, `mu (1 - p(0,0) - p(0,1))`.
pub fn throughput(ss: &SteadyState, mu: f64) -> f64 {
    mu * (1.0 - ss.p0[0] - ss.p1[0])
}

/// Reneging customers per unit time: `sum_{n > n_s} (n - n_s) theta p(n, 0)`
/// summed in closed form.
pub fn abandonment_rate(ss: &SteadyState, theta: f64) -> f64 {
    let rho = ss.rho_minus;
    theta * ss.anchor() * rho / ((1.0 - rho) * (1.0 - rho))
}

pub fn mean_number(ss: &SteadyState) -> f64 {
    let body: f64 = ss
        .p0
        .iter()
        .zip(&ss.p1)
        .enumerate()
        .map(|(n, (a, b))| n as f64 * (a + b))
        .sum();
    let rho = ss.rho_minus;
    let ns = ss.n_s() as f64;
    body + ss.anchor() * (ns * rho / (1.0 - rho) + rho / ((1.0 - rho) * (1.0 - rho)))
}

/// `R mu_e + r a_e - C E[N]`. Fees are paid by customers to the provider and
/// cancel out.
pub fn social_welfare(params: &ModelParams, mu_e: f64, a_e: f64, en: f64) -> f64 {
    params.reward * mu_e + params.refund * a_e - params.cost * en
}

/// Customers admitted per unit time: unobservable arrivals with probability
/// `q`, observable arrivals while fewer than `n_e` are present.
pub fn join_rate(ss: &SteadyState) -> f64 {
    let echo = &ss.echo;
    let visible: f64 = ss.p1.iter().take(echo.n_e as usize).sum();
    echo.lambda * (echo.q * ss.unobservable_mass() + visible)
}

pub fn measures(params: &ModelParams, ss: &SteadyState) -> Measures {
    let mu_e = throughput(ss, params.mu);
    let a_e = abandonment_rate(ss, params.theta);
    let en = mean_number(ss);
    Measures {
        mu_e,
        a_e,
        en,
        s_e: social_welfare(params, mu_e, a_e, en),
        q_e: ss.echo.q,
    }
}

/// An equilibrium together with its measures.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Solution {
    pub equilibrium: EquilibriumResult,
    pub measures: Measures,
}

/// Solves for the equilibrium and evaluates the measures at it. Measures
/// always come from the QBD stationary vector.
pub fn solve(params: &ValidatedParams, method: Method) -> Result<Solution> {
    let equilibrium = equilibrium_q_with(params, method)?;
    let ss = solve_censored_qbd(params, &equilibrium.strategy())?;
    Ok(Solution {
        measures: measures(params, &ss),
        equilibrium,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{validate, Strategy};

    fn params(lambda: f64, refund: f64) -> ValidatedParams {
        validate(ModelParams {
            lambda,
            mu: 1.0,
            theta: 1.5,
            zeta: 2.0,
            reward: 6.0,
            cost: 1.0,
            entrance_fee: 0.5,
            service_fee: 0.5,
            refund,
        })
        .unwrap()
    }

    #[test]
    fn rate_conservation() {
        for (lambda, q) in [(0.5, 0.3), (1.2, 0.8), (3.0, 1.0), (0.9, 0.0)] {
            let p = params(lambda, -1.0);
            let s = Strategy::for_params(&p, q).unwrap();
            let ss = solve_censored_qbd(&p, &s).unwrap();
            let m = measures(&p, &ss);
            assert!((join_rate(&ss) - m.mu_e - m.a_e).abs() <= 1e-9, "lambda = {lambda}");
            assert!(m.mu_e >= 0.0 && m.mu_e <= p.mu);
            assert!(m.a_e >= 0.0 && m.en >= 0.0);
            assert!(m.s_e <= p.reward * m.mu_e);
        }
    }

    #[test]
    fn no_abandonment_without_hidden_joins() {
        let p = params(2.0, 0.0);
        let s = Strategy::for_params(&p, 0.0).unwrap();
        let ss = solve_censored_qbd(&p, &s).unwrap();
        assert_eq!(abandonment_rate(&ss, p.theta), 0.0);
    }

    #[test]
    fn closed_forms_match_truncated_sums() {
        let p = params(2.5, -1.0);
        let s = Strategy::for_params(&p, 0.9).unwrap();
        let ss = solve_censored_qbd(&p, &s).unwrap();
        assert!(ss.rho_minus <= 0.99);
        let ns = ss.n_s();
        let mut aband = 0.0;
        let mut tail_n = 0.0;
        for n in ns + 1..=ns + 10_000 {
            let pn = ss.tail_probability(n);
            aband += (n - ns) as f64 * p.theta * pn;
            tail_n += n as f64 * pn;
        }
        assert!((abandonment_rate(&ss, p.theta) - aband).abs() <= 1e-12);
        let body: f64 = (0..=ns).map(|n| n as f64 * (ss.p0[n] + ss.p1[n])).sum();
        assert!((mean_number(&ss) - body - tail_n).abs() <= 1e-12);
    }

    #[test]
    fn light_traffic_is_empty() {
        let p = params(1e-6, -1.0);
        let sol = solve(&p, Method::Qbd).unwrap();
        assert!(sol.measures.mu_e < 1e-5);
        assert!(sol.measures.en < 1e-5);
        assert!(sol.measures.s_e.abs() < 1e-4);
    }
}
