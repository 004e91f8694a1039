//! Stationary distribution of `(N(t), I(t))` under an `(n_e, n_s, q)` strategy.
//!
//! States `(n, 0)` with `n > n_s` are removed by censoring: their mass is the
//! geometric tail `p(n, 0) = rho_minus^(n - n_s) p(n_s, 0)`, and the rate from
//! `(n_s, 0)` to `(n_s, 1)` becomes `theta / (1 - rho_minus)`. The remaining
//! finite QBD over levels `0..=n_s` (two phases per level) is solved by
//! linear level reduction, i.e. block Gaussian elimination from the top level
//! down, followed by back-substitution.

use std::fmt::Write as _;

use serde::Serialize;

use crate::error::{AltqError, Result};
use crate::model::{Strategy, ValidatedParams};

/// Unobservable phase index.
pub const UNOBSERVABLE: usize = 0;
/// Observable phase index.
pub const OBSERVABLE: usize = 1;

/// Sub-unit root of `mu x^2 - (lambda_q + mu + theta) x + lambda_q = 0`.
///
/// Evaluated in the cancellation-free form `2 lambda_q / (b + sqrt(b^2 - 4 lambda_q mu))`.
pub fn rho_minus(lambda_q: f64, mu: f64, theta: f64) -> f64 {
    let b = lambda_q + mu + theta;
    let disc = b * b - 4.0 * lambda_q * mu;
    2.0 * lambda_q / (b + disc.max(0.0).sqrt())
}

/// The rates and thresholds a [`SteadyState`] was solved for.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SolveEcho {
    pub lambda: f64,
    pub q: f64,
    pub mu: f64,
    pub theta: f64,
    pub zeta: f64,
    pub n_e: u32,
    pub n_s: u32,
}

impl SolveEcho {
    pub fn new(params: &ValidatedParams, strategy: &Strategy) -> Self {
        SolveEcho {
            lambda: params.lambda,
            q: strategy.q,
            mu: params.mu,
            theta: params.theta,
            zeta: params.zeta,
            n_e: strategy.n_e,
            n_s: strategy.n_s,
        }
    }

    pub fn lambda_q(&self) -> f64 {
        self.lambda * self.q
    }
}

/// Stationary probabilities `p(n, 0)` and `p(n, 1)` for `n <= n_s` plus the
/// geometric tail of `p(n, 0)` beyond `n_s`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SteadyState {
    pub p0: Vec<f64>,
    pub p1: Vec<f64>,
    pub rho_minus: f64,
    pub echo: SolveEcho,
}

impl SteadyState {
    pub fn n_s(&self) -> usize {
        self.echo.n_s as usize
    }

    /// `p(n_s, 0)`, the anchor of the geometric tail.
    pub fn anchor(&self) -> f64 {
        self.p0[self.n_s()]
    }

    /// `p(n, phase)` for any `n`; observable states above `n_s` do not exist.
    pub fn prob(&self, n: usize, phase: usize) -> f64 {
        let ns = self.n_s();
        match phase {
            UNOBSERVABLE if n <= ns => self.p0[n],
            UNOBSERVABLE => self.tail_probability(n),
            _ if n <= ns => self.p1[n],
            _ => 0.0,
        }
    }

    /// `rho_minus^(n - n_s) p(n_s, 0)` for `n >= n_s`.
    pub fn tail_probability(&self, n: usize) -> f64 {
        tail_probability(self, n)
    }

    /// `sum_{n > n_s} p(n, 0)`.
    pub fn tail_mass_above(&self) -> f64 {
        self.anchor() * self.rho_minus / (1.0 - self.rho_minus)
    }

    /// Total unobservable-mode probability including the tail.
    pub fn unobservable_mass(&self) -> f64 {
        self.p0.iter().sum::<f64>() + self.tail_mass_above()
    }

    pub fn observable_mass(&self) -> f64 {
        self.p1.iter().sum()
    }

    pub fn total_mass(&self) -> f64 {
        self.unobservable_mass() + self.observable_mass()
    }

    /// Debug dump: header `n,p0,p1`, one row per level `0..=n_s`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("n,p0,p1\n");
        for n in 0..=self.n_s() {
            let _ = writeln!(out, "{},{:.16e},{:.16e}", n, self.p0[n], self.p1[n]);
        }
        out
    }
}

/// `rho_minus^(n - n_s) p(n_s, 0)`. Panics in debug builds if `n < n_s`.
pub fn tail_probability(ss: &SteadyState, n: usize) -> f64 {
    let ns = ss.n_s();
    debug_assert!(n >= ns, "tail_probability needs n >= n_s");
    let k = n.saturating_sub(ns);
    if k == 0 {
        return ss.anchor();
    }
    ss.anchor() * ss.rho_minus.powi(k as i32)
}

type Block = [[f64; 2]; 2];

fn mat_mul(a: &Block, b: &Block) -> Block {
    let mut c = [[0.0; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            c[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    c
}

fn mat_vec(a: &Block, v: [f64; 2]) -> [f64; 2] {
    [a[0][0] * v[0] + a[0][1] * v[1], a[1][0] * v[0] + a[1][1] * v[1]]
}

fn row_mul(x: [f64; 2], a: &Block) -> [f64; 2] {
    [
        x[0] * a[0][0] + x[1] * a[1][0],
        x[0] * a[0][1] + x[1] * a[1][1],
    ]
}

/// Blocks of the censored generator.
struct CensoredQbd {
    lambda: f64,
    lambda_q: f64,
    mu: f64,
    theta: f64,
    zeta: f64,
    n_e: usize,
    n_s: usize,
    rho: f64,
}

impl CensoredQbd {
    fn up(&self, n: usize) -> Block {
        let obs = if n < self.n_e { self.lambda } else { 0.0 };
        [[self.lambda_q, 0.0], [0.0, obs]]
    }

    fn local(&self, n: usize) -> Block {
        let switch_up = if n == self.n_s {
            self.theta / (1.0 - self.rho)
        } else {
            self.theta
        };
        let service = if n >= 1 { self.mu } else { 0.0 };
        let up = if n < self.n_s { self.up(n) } else { [[0.0; 2]; 2] };
        let out0 = up[0][0] + service + switch_up;
        let out1 = up[1][1] + service + self.zeta;
        [[-out0, switch_up], [self.zeta, -out1]]
    }
}

/// Unique normalized stationary vector of the censored chain, with the tail
/// reconstructed geometrically.
pub fn solve_censored_qbd(params: &ValidatedParams, strategy: &Strategy) -> Result<SteadyState> {
    let strategy = Strategy::new(strategy.n_e, strategy.n_s, strategy.q)?;
    let echo = SolveEcho::new(params, &strategy);
    let lambda_q = echo.lambda_q();
    let rho = rho_minus(lambda_q, params.mu, params.theta);
    let qbd = CensoredQbd {
        lambda: params.lambda,
        lambda_q,
        mu: params.mu,
        theta: params.theta,
        zeta: params.zeta,
        n_e: strategy.n_e as usize,
        n_s: strategy.n_s as usize,
        rho,
    };
    let ns = qbd.n_s;

    // Level reduction in GTH form: each reduced block is a generator of the
    // chain censored to levels 0..=n whose rows leak exactly `mu` downward, so
    // only its off-diagonal rates are kept and nothing is ever subtracted.
    // rates[n] maps x_{n-1} to x_n for n >= 1.
    let mu = qbd.mu;
    let mut rates: Vec<Block> = vec![[[0.0; 2]; 2]; ns + 1];
    let off = |blk: &Block| (blk[0][1], blk[1][0]);
    let (mut b, mut c) = off(&qbd.local(ns));
    for n in (1..=ns).rev() {
        // -inverse of [[-(b+mu), b], [c, -(c+mu)]].
        let det = mu * (b + c + mu);
        let neg_inv: Block = [[(c + mu) / det, b / det], [c / det, (b + mu) / det]];
        let r = mat_mul(&qbd.up(n - 1), &neg_inv);
        rates[n] = r;
        let (lb, lc) = off(&qbd.local(n - 1));
        b = lb + mu * r[0][1];
        c = lc + mu * r[1][0];
    }
    if !(b + c > 0.0) {
        return Err(AltqError::SingularSystem("level 0 is disconnected".into()));
    }

    // Normalization weights; (n_s, 0) carries its tail p(n_s,0)/(1-rho).
    let weight = |n: usize| -> [f64; 2] {
        if n == ns {
            [1.0 / (1.0 - rho), 1.0]
        } else {
            [1.0, 1.0]
        }
    };
    let mut v = weight(ns);
    for n in (1..=ns).rev() {
        let rv = mat_vec(&rates[n], v);
        let w = weight(n - 1);
        v = [w[0] + rv[0], w[1] + rv[1]];
    }

    // Level 0 censored: x0 [[-b, b], [c, -c]] = 0.
    let total = c * v[0] + b * v[1];
    let x0 = [c / total, b / total];

    let mut p0 = Vec::with_capacity(ns + 1);
    let mut p1 = Vec::with_capacity(ns + 1);
    let mut x = x0;
    p0.push(x[0]);
    p1.push(x[1]);
    for rate in rates.iter().skip(1) {
        x = row_mul(x, rate);
        p0.push(x[0]);
        p1.push(x[1]);
    }
    if p0.iter().chain(p1.iter()).any(|v| !v.is_finite()) {
        return Err(AltqError::SingularSystem("non-finite stationary vector".into()));
    }
    Ok(SteadyState {
        p0,
        p1,
        rho_minus: rho,
        echo,
    })
}

/// One balance equation of the original (uncensored) chain:
/// probability flux out of `state` versus flux into it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BalanceResidual {
    pub n: usize,
    pub phase: usize,
    pub outflow: f64,
    pub inflow: f64,
}

impl BalanceResidual {
    pub fn relative(&self) -> f64 {
        (self.outflow - self.inflow).abs() / (self.outflow.abs() + self.inflow.abs() + 1e-300)
    }
}

/// Balance equations of the full chain at every level `0..=n_s` in both
/// phases and at `extra_tail` unobservable levels above `n_s`, with sums over
/// the tail evaluated in closed form.
pub fn balance_residuals(ss: &SteadyState, extra_tail: usize) -> Vec<BalanceResidual> {
    let e = ss.echo;
    let (ne, ns) = (e.n_e as usize, e.n_s as usize);
    let lq = e.lambda_q();
    let p = |n: usize, i: usize| ss.prob(n, i);
    let mut out = Vec::with_capacity(2 * (ns + 1) + extra_tail);
    for n in 0..=ns + extra_tail {
        let service = if n >= 1 { e.mu } else { 0.0 };
        let outflow = (lq + service + e.theta) * p(n, 0);
        let mut inflow = e.mu * p(n + 1, 0);
        if n >= 1 {
            inflow += lq * p(n - 1, 0);
        }
        if n <= ns {
            inflow += e.zeta * p(n, 1);
        }
        out.push(BalanceResidual {
            n,
            phase: UNOBSERVABLE,
            outflow,
            inflow,
        });
    }
    for n in 0..=ns {
        let arrivals = if n < ne { e.lambda } else { 0.0 };
        let service = if n >= 1 { e.mu } else { 0.0 };
        let outflow = (arrivals + service + e.zeta) * p(n, 1);
        let mut inflow = 0.0;
        if n >= 1 && n <= ne {
            inflow += e.lambda * p(n - 1, 1);
        }
        if n < ns {
            inflow += e.mu * p(n + 1, 1) + e.theta * p(n, 0);
        } else {
            inflow += e.theta * ss.anchor() / (1.0 - ss.rho_minus);
        }
        out.push(BalanceResidual {
            n,
            phase: OBSERVABLE,
            outflow,
            inflow,
        });
    }
    out
}
