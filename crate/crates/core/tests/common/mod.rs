//! Independent reference computations shared by the integration tests.
#![allow(dead_code)]

use altq::payoff::conditional_benefit;
use altq::steady_state::{rho_minus, SteadyState};
use altq::{validate, ModelParams, Strategy, ValidatedParams};
use nalgebra::{DMatrix, DVector};

/// Stationary vector of the generator truncated at level `top` in the
/// unobservable mode, by a dense LU solve.
pub struct DenseSolution {
    pub p0: Vec<f64>,
    pub p1: Vec<f64>,
}

impl DenseSolution {
    pub fn prob(&self, n: usize, i: usize) -> f64 {
        let v = if i == 0 { &self.p0 } else { &self.p1 };
        v.get(n).copied().unwrap_or(0.0)
    }
}

/// Truncation level with tail mass beyond it below 1e-14.
pub fn truncation_level(params: &ValidatedParams, strategy: &Strategy) -> usize {
    let rho = rho_minus(params.lambda * strategy.q, params.mu, params.theta);
    let extra = (20.0 / (1.0 - rho)).ceil() as usize;
    strategy.n_s as usize + extra.max(400)
}

pub fn dense_stationary(params: &ValidatedParams, strategy: &Strategy) -> DenseSolution {
    let top = truncation_level(params, strategy);
    let ns = strategy.n_s as usize;
    let ne = strategy.n_e as usize;
    let size = top + 1 + ns + 1;
    let hidden = |n: usize| n;
    let shown = |n: usize| top + 1 + n;
    let mut q = DMatrix::<f64>::zeros(size, size);
    let mut add = |from: usize, to: usize, rate: f64| {
        if rate > 0.0 && from != to {
            q[(from, to)] += rate;
            q[(from, from)] -= rate;
        }
    };
    let lq = params.lambda * strategy.q;
    for n in 0..=top {
        if n < top {
            add(hidden(n), hidden(n + 1), lq);
        }
        if n > 0 {
            add(hidden(n), hidden(n - 1), params.mu);
        }
        add(hidden(n), shown(n.min(ns)), params.theta);
    }
    for n in 0..=ns {
        if n < ne {
            add(shown(n), shown(n + 1), params.lambda);
        }
        if n > 0 {
            add(shown(n), shown(n - 1), params.mu);
        }
        add(shown(n), hidden(n), params.zeta);
    }
    // pi Q = 0 with the last balance equation replaced by normalization.
    let mut a = q.transpose();
    for j in 0..size {
        a[(size - 1, j)] = 1.0;
    }
    let mut b = DVector::<f64>::zeros(size);
    b[size - 1] = 1.0;
    let pi = a.lu().solve(&b).expect("dense generator is nonsingular");
    DenseSolution {
        p0: (0..=top).map(|n| pi[hidden(n)]).collect(),
        p1: (0..=ns).map(|n| pi[shown(n)]).collect(),
    }
}

/// Net benefit of a hidden arrival who joins, by direct summation over the
/// dense stationary vector.
pub fn dense_benefit(params: &ValidatedParams, strategy: &Strategy) -> f64 {
    let d = dense_stationary(params, strategy);
    let sum: f64 = d
        .p0
        .iter()
        .enumerate()
        .map(|(n, p)| p * conditional_benefit(n as u64, strategy, params).value)
        .sum();
    sum * (params.zeta + params.theta) / params.zeta
}

/// Sign changes of `f` over `q = 0, 1/steps, ..., 1`, as the grid intervals
/// `(q_k, q_{k+1})` where the sign flips. Zeros count as their own sign.
pub fn sign_changes(f: impl Fn(f64) -> f64, steps: usize) -> Vec<(f64, f64)> {
    let qs: Vec<f64> = (0..=steps).map(|k| k as f64 / steps as f64).collect();
    let vals: Vec<f64> = qs.iter().map(|&q| f(q)).collect();
    let sign = |x: f64| if x > 0.0 { 1 } else if x < 0.0 { -1 } else { 0 };
    let mut out = Vec::new();
    for k in 0..steps {
        if sign(vals[k]) != sign(vals[k + 1]) {
            out.push((qs[k], qs[k + 1]));
        }
    }
    out
}

/// Equilibrium of the fully unobservable M/M/1 queue: the joining
/// probability solving `R - f_e - f_s - C / (mu - lambda q) = 0`, clipped.
pub fn unobservable_equilibrium(p: &ModelParams) -> f64 {
    let net = p.reward - p.entrance_fee - p.service_fee;
    ((p.mu - p.cost / net) / p.lambda).clamp(0.0, 1.0)
}

/// Base parameter sets: short cycle (B = 0.1), announcement and refund studies.
pub fn short_cycle(lambda: f64, gamma: f64) -> ValidatedParams {
    let b = 0.1;
    validate(ModelParams {
        lambda,
        mu: 1.0,
        theta: 1.0 / ((1.0 - gamma) * b),
        zeta: 1.0 / (gamma * b),
        reward: 4.0,
        cost: 1.0,
        entrance_fee: 0.0,
        service_fee: 0.0,
        refund: -30.0,
    })
    .unwrap()
}

pub fn announcement_base(lambda: f64, theta: f64, zeta: f64) -> ModelParams {
    ModelParams {
        lambda,
        mu: 8.0,
        theta,
        zeta,
        reward: 5.0,
        cost: 10.0,
        entrance_fee: 0.0,
        service_fee: 0.0,
        refund: 0.0,
    }
}

pub fn refund_base(reward: f64) -> ModelParams {
    ModelParams {
        lambda: 1.3,
        mu: 1.0,
        theta: 1.0,
        zeta: 10.0,
        reward,
        cost: 1.0,
        entrance_fee: 5.0,
        service_fee: 0.0,
        refund: 0.0,
    }
}

/// A spread of valid parameter sets with moderate thresholds.
pub fn test_grid() -> Vec<ValidatedParams> {
    let mut out = Vec::new();
    for lambda in [0.8, 1.1, 2.3] {
        for gamma in [0.25, 0.5, 0.75] {
            out.push(short_cycle(lambda, gamma));
        }
    }
    for lambda in [7.0, 10.0] {
        out.push(validate(announcement_base(lambda, 2.0, 300.0)).unwrap());
    }
    for reward in [7.0, 10.0, 15.0] {
        let mut p = refund_base(reward);
        p.refund = 2.0;
        out.push(validate(p).unwrap());
    }
    out.push(
        validate(ModelParams {
            lambda: 1.6,
            mu: 1.3,
            theta: 0.7,
            zeta: 2.0,
            reward: 9.0,
            cost: 1.1,
            entrance_fee: 1.5,
            service_fee: 0.4,
            refund: -2.0,
        })
        .unwrap(),
    );
    out
}

/// Standard error of the reneging rate over observed time `t_all` if
/// abandonment epochs were Poisson with geometric batch sizes. Stands in for
/// a replication SE of zero when no replication saw a renege.
pub fn abandonment_se_floor(p: &ValidatedParams, ss: &SteadyState, t_all: f64) -> f64 {
    let rho = ss.rho_minus;
    (p.theta * ss.anchor() * rho * (1.0 + rho) / (1.0 - rho).powi(3) / t_all).sqrt()
}
