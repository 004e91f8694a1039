//! Discrete-event simulation of the queue under a fixed strategy.
//!
//! Every replication owns a ChaCha8 generator seeded with
//! `ChaCha8Rng::seed_from_u64(seed)` and moved to stream `rep` with
//! `set_stream`. Replications may run on any number of threads; results are
//! combined in replication order so the output does not depend on scheduling.

use std::collections::VecDeque;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{AltqError, Result};
use crate::model::{Strategy, ValidatedParams};
use crate::payoff::conditional_benefit;

/// Occupancy estimates are reported for levels `0..=n_s + EXTRA_LEVELS`.
pub const EXTRA_LEVELS: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SimConfig {
    pub seed: u64,
    /// Events per replication, warm-up included.
    pub events: u64,
    pub warmup_fraction: f64,
    pub replications: u32,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            seed: 42,
            events: 1_000_000,
            warmup_fraction: 0.1,
            replications: 20,
        }
    }
}

impl SimConfig {
    pub fn check(&self) -> Result<()> {
        if self.replications < 2 {
            return Err(AltqError::InvalidSimConfig(format!(
                "need at least 2 replications, got {}",
                self.replications
            )));
        }
        if !(0.0..1.0).contains(&self.warmup_fraction) {
            return Err(AltqError::InvalidSimConfig(format!(
                "warmup_fraction {} outside [0, 1)",
                self.warmup_fraction
            )));
        }
        let kept = self.events - (self.warmup_fraction * self.events as f64) as u64;
        if kept == 0 {
            return Err(AltqError::InvalidSimConfig("no events left after warm-up".into()));
        }
        Ok(())
    }
}

/// A Monte Carlo mean and its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate {
    pub mean: f64,
    pub se: f64,
}

impl Estimate {
    /// Mean and standard error of the mean of independent samples.
    pub fn from_samples(xs: &[f64]) -> Estimate {
        let n = xs.len() as f64;
        let mean = kahan_sum(xs.iter().copied()) / n;
        let ss = kahan_sum(xs.iter().map(|x| (x - mean) * (x - mean)));
        let se = if xs.len() > 1 { (ss / (n - 1.0) / n).sqrt() } else { f64::NAN };
        Estimate { mean, se }
    }

    /// `|target - mean|` in units of the standard error.
    pub fn z_score(&self, target: f64) -> f64 {
        let d = (target - self.mean).abs();
        if d == 0.0 {
            0.0
        } else {
            d / self.se
        }
    }

    pub fn within(&self, target: f64, k: f64) -> bool {
        self.z_score(target) <= k
    }
}

pub fn kahan_sum(xs: impl Iterator<Item = f64>) -> f64 {
    let mut sum = 0.0;
    let mut c = 0.0;
    for x in xs {
        let y = x - c;
        let t = sum + y;
        c = (t - sum) - y;
        sum = t;
    }
    sum
}

/// Raw event counts of one replication, from time zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Default)]
pub struct EventCounts {
    pub joins: u64,
    pub unobservable_joins: u64,
    pub completions: u64,
    pub reneges: u64,
    pub in_system: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimEstimates {
    /// `p_hat[n][i]` for `n <= n_s + 50`.
    pub p_hat: Vec<[Estimate; 2]>,
    pub mu_e: Estimate,
    pub a_e: Estimate,
    #[serde(rename = "EN")]
    pub en: Estimate,
    #[serde(rename = "S_e")]
    pub s_e: Estimate,
    /// Mean net benefit of customers who joined while the queue was hidden.
    /// `None` if some replication saw no such customer complete or renege.
    #[serde(rename = "U")]
    pub u_hat: Option<Estimate>,
    pub counts: Vec<EventCounts>,
    /// Simulated time after warm-up, per replication.
    pub observed_time: Vec<f64>,
    pub config: SimConfig,
}

struct Customer {
    arrival: f64,
    hidden: bool,
}

struct Replication {
    occupancy: Vec<[f64; 2]>,
    mu_e: f64,
    a_e: f64,
    en: f64,
    s_e: f64,
    u: Option<f64>,
    counts: EventCounts,
    span: f64,
}

fn exp_sample(rng: &mut ChaCha8Rng, rate: f64) -> f64 {
    // 1 - U lies in (0, 1], so the log is finite.
    -(1.0 - rng.random::<f64>()).ln() / rate
}

fn rep_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn run_replication(params: &ValidatedParams, strategy: &Strategy, config: &SimConfig, rep: u32) -> Replication {
    let mut rng = rep_rng(config.seed, rep as u64);
    let ne = strategy.n_e as usize;
    let ns = strategy.n_s as usize;
    let levels = ns + EXTRA_LEVELS + 1;
    let warmup = (config.warmup_fraction * config.events as f64) as u64;
    let (lambda, mu, q) = (params.lambda, params.mu, strategy.q);
    let (reward, cost, fe, fs, refund) = (
        params.reward,
        params.cost,
        params.entrance_fee,
        params.service_fee,
        params.refund,
    );

    let mut queue: VecDeque<Customer> = VecDeque::new();
    let mut mode = 0usize;
    let mut t = 0.0;
    let mut counts = EventCounts::default();

    let mut t0 = 0.0;
    let mut occupancy = vec![[0.0; 2]; levels];
    let mut area = 0.0;
    let mut completions = 0u64;
    let mut reneged = 0u64;
    let mut u_sum = 0.0;
    let mut u_count = 0u64;

    for event in 0..config.events {
        let measuring = event >= warmup;
        if event == warmup {
            t0 = t;
        }
        let n = queue.len();
        let switch_rate = if mode == 0 { params.theta } else { params.zeta };
        let service_rate = if n > 0 { mu } else { 0.0 };
        let total = lambda + service_rate + switch_rate;
        let dt = exp_sample(&mut rng, total);
        if measuring {
            if n < levels {
                occupancy[n][mode] += dt;
            }
            area += n as f64 * dt;
        }
        t += dt;

        let pick = rng.random::<f64>() * total;
        if pick < lambda {
            let joins = if mode == 0 { rng.random::<f64>() < q } else { n < ne };
            if joins {
                counts.joins += 1;
                if mode == 0 {
                    counts.unobservable_joins += 1;
                }
                queue.push_back(Customer {
                    arrival: t,
                    hidden: mode == 0,
                });
            }
        } else if pick < lambda + service_rate {
            let c = queue.pop_front().expect("service in an empty system");
            counts.completions += 1;
            if measuring {
                completions += 1;
                if c.hidden && c.arrival >= t0 {
                    u_sum += reward - fe - fs - cost * (t - c.arrival);
                    u_count += 1;
                }
            }
        } else if mode == 0 {
            mode = 1;
            while queue.len() > ns {
                let c = queue.pop_back().expect("nonempty");
                counts.reneges += 1;
                if measuring {
                    reneged += 1;
                    if c.hidden && c.arrival >= t0 {
                        u_sum += refund - fe - cost * (t - c.arrival);
                        u_count += 1;
                    }
                }
            }
        } else {
            mode = 0;
        }
    }
    counts.in_system = queue.len() as u64;

    let span = t - t0;
    for row in occupancy.iter_mut() {
        row[0] /= span;
        row[1] /= span;
    }
    let mu_e = completions as f64 / span;
    let a_e = reneged as f64 / span;
    let en = area / span;
    Replication {
        occupancy,
        mu_e,
        a_e,
        en,
        s_e: reward * mu_e + refund * a_e - cost * en,
        u: (u_count > 0).then(|| u_sum / u_count as f64),
        counts,
        span,
    }
}

/// Runs `config.replications` independent replications and reports
/// replication-mean estimates with standard errors.
pub fn simulate(params: &ValidatedParams, strategy: &Strategy, config: &SimConfig) -> Result<SimEstimates> {
    config.check()?;
    let reps: Vec<Replication> = (0..config.replications)
        .into_par_iter()
        .map(|rep| run_replication(params, strategy, config, rep))
        .collect();

    let collect = |f: &dyn Fn(&Replication) -> f64| -> Estimate {
        Estimate::from_samples(&reps.iter().map(f).collect::<Vec<_>>())
    };
    let levels = reps[0].occupancy.len();
    let p_hat = (0..levels)
        .map(|n| [collect(&|r| r.occupancy[n][0]), collect(&|r| r.occupancy[n][1])])
        .collect();
    let u_hat = reps
        .iter()
        .map(|r| r.u)
        .collect::<Option<Vec<f64>>>()
        .map(|xs| Estimate::from_samples(&xs));
    Ok(SimEstimates {
        p_hat,
        mu_e: collect(&|r| r.mu_e),
        a_e: collect(&|r| r.a_e),
        en: collect(&|r| r.en),
        s_e: collect(&|r| r.s_e),
        u_hat,
        counts: reps.iter().map(|r| r.counts).collect(),
        observed_time: reps.iter().map(|r| r.span).collect(),
        config: *config,
    })
}

const TAGGED_BLOCK: u64 = 10_000;

/// Net benefit of one customer who joins during a hidden period with `n`
/// customers ahead. Only the customer's own position matters: later arrivals
/// queue behind them.
fn tagged_once(rng: &mut ChaCha8Rng, n: u64, strategy: &Strategy, params: &ValidatedParams) -> f64 {
    let (mu, theta, cost) = (params.mu, params.theta, params.cost);
    let ns = strategy.n_s as u64;
    let mut position = n + 1;
    let mut t = 0.0;
    // Race services against the end of the hidden period while the customer
    // could still be told to leave.
    while position > ns {
        let dt = exp_sample(rng, mu + theta);
        t += dt;
        if rng.random::<f64>() * (mu + theta) < theta {
            return params.refund - params.entrance_fee - cost * t;
        }
        position -= 1;
    }
    // Safe from here on: positions never grow.
    for _ in 0..position {
        t += exp_sample(rng, mu);
    }
    params.reward - params.entrance_fee - params.service_fee - cost * t
}

/// Monte Carlo estimate of the conditional net benefit with `n` customers
/// ahead, from `reps` independent customers.
pub fn simulate_tagged(
    n: u64,
    strategy: &Strategy,
    params: &ValidatedParams,
    reps: u64,
    seed: u64,
) -> Result<Estimate> {
    if reps < 2 {
        return Err(AltqError::InvalidSimConfig("need at least 2 replications".into()));
    }
    let blocks = reps.div_ceil(TAGGED_BLOCK);
    let partial: Vec<(f64, f64, u64)> = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let mut rng = rep_rng(seed, b);
            let count = TAGGED_BLOCK.min(reps - b * TAGGED_BLOCK);
            let xs: Vec<f64> = (0..count).map(|_| tagged_once(&mut rng, n, strategy, params)).collect();
            let sum = kahan_sum(xs.iter().copied());
            let mean = sum / count as f64;
            let ss = kahan_sum(xs.iter().map(|x| (x - mean) * (x - mean)));
            (sum, ss, count)
        })
        .collect();
    // Combine block means and sums of squares (parallel variance formula).
    let total = reps as f64;
    let mean = kahan_sum(partial.iter().map(|p| p.0)) / total;
    let ss = kahan_sum(partial.iter().map(|&(sum, ss, count)| {
        let d = sum / count as f64 - mean;
        ss + count as f64 * d * d
    }));
    Ok(Estimate {
        mean,
        se: (ss / (total - 1.0) / total).sqrt(),
    })
}

/// Outcome of a common-random-numbers run of two joining probabilities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CouplingReport {
    pub events: u64,
    /// Events after which the smaller-`q` system held more customers.
    pub violations: u64,
    pub max_gap: i64,
}

/// Runs the systems with joining probabilities `q_low <= q_high` on the same
/// sample path. The mode process, arrival epochs and potential service
/// epochs are shared; a hidden arrival joins the `q_high` system with
/// probability `q_high` and, given that, the `q_low` system with probability
/// `q_low / q_high`.
pub fn simulate_coupled(
    params: &ValidatedParams,
    strategy: &Strategy,
    q_low: f64,
    q_high: f64,
    events: u64,
    seed: u64,
) -> Result<CouplingReport> {
    if !(0.0 <= q_low && q_low <= q_high && q_high <= 1.0) {
        return Err(AltqError::InvalidSimConfig(format!(
            "need 0 <= q_low <= q_high <= 1, got {q_low} and {q_high}"
        )));
    }
    let mut rng = rep_rng(seed, 0);
    let ne = strategy.n_e as u64;
    let ns = strategy.n_s as u64;
    let (lambda, mu) = (params.lambda, params.mu);
    let (mut lo, mut hi) = (0u64, 0u64);
    let mut mode = 0;
    let mut report = CouplingReport {
        events,
        violations: 0,
        max_gap: 0,
    };
    for _ in 0..events {
        let switch_rate = if mode == 0 { params.theta } else { params.zeta };
        let total = lambda + mu + switch_rate;
        let pick = rng.random::<f64>() * total;
        if pick < lambda {
            if mode == 0 {
                if rng.random::<f64>() < q_high {
                    hi += 1;
                    if rng.random::<f64>() * q_high < q_low {
                        lo += 1;
                    }
                }
            } else {
                if hi < ne {
                    hi += 1;
                }
                if lo < ne {
                    lo += 1;
                }
            }
        } else if pick < lambda + mu {
            lo = lo.saturating_sub(1);
            hi = hi.saturating_sub(1);
        } else if mode == 0 {
            mode = 1;
            lo = lo.min(ns);
            hi = hi.min(ns);
        } else {
            mode = 0;
        }
        if lo > hi {
            report.violations += 1;
            report.max_gap = report.max_gap.max(lo as i64 - hi as i64);
        }
    }
    Ok(report)
}

/// Exact value to compare [`simulate_tagged`] against.
pub fn tagged_reference(n: u64, strategy: &Strategy, params: &ValidatedParams) -> f64 {
    conditional_benefit(n, strategy, params).value
}
