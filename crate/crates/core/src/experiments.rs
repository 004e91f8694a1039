//! Comparative-statics sweeps and shape classification of their outputs.

use std::fmt::Write as _;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::equilibrium::Case;
use crate::error::{AltqError, Result};
use crate::measures::solve;
use crate::model::{validate, ModelParams};
use crate::payoff::Method;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SweepFamily {
    /// Vary the observable fraction `gamma` at a fixed cycle length `B`:
    /// `theta = 1 / ((1 - gamma) B)`, `zeta = 1 / (gamma B)`.
    Gamma,
    /// Vary `theta` at a fixed `zeta`.
    Theta,
    /// Vary the refund as a fraction of the entrance fee, `r = value * f_e`.
    Refund,
}

impl FromStr for SweepFamily {
    type Err = AltqError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gamma" => Ok(SweepFamily::Gamma),
            "theta" => Ok(SweepFamily::Theta),
            "refund" => Ok(SweepFamily::Refund),
            other => Err(AltqError::InvalidSweep(format!("unknown family `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepSpec {
    pub family: SweepFamily,
    pub base: ModelParams,
    pub grid: Vec<f64>,
    /// `B` for [`SweepFamily::Gamma`], `zeta` for [`SweepFamily::Theta`].
    /// Ignored for refunds. Defaults to the base cycle length or `zeta`.
    pub extra: Option<f64>,
}

impl SweepSpec {
    pub fn check(&self) -> Result<()> {
        if self.grid.is_empty() {
            return Err(AltqError::InvalidSweep("empty grid".into()));
        }
        if self.grid.iter().any(|x| !x.is_finite()) {
            return Err(AltqError::InvalidSweep("grid values must be finite".into()));
        }
        if self.grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(AltqError::InvalidSweep("grid must be strictly increasing".into()));
        }
        match self.family {
            SweepFamily::Gamma => {
                if self.grid.iter().any(|&g| g <= 0.0 || g >= 1.0) {
                    return Err(AltqError::InvalidSweep("gamma grid must lie in (0, 1)".into()));
                }
            }
            SweepFamily::Refund => {
                if self.grid.iter().any(|&g| !(0.0..=1.0).contains(&g)) {
                    return Err(AltqError::InvalidSweep("refund ratios must lie in [0, 1]".into()));
                }
            }
            SweepFamily::Theta => {}
        }
        if let Some(x) = self.extra {
            if !(x.is_finite() && x > 0.0) {
                return Err(AltqError::InvalidSweep(format!("extra parameter must be positive, got {x}")));
            }
        }
        Ok(())
    }

    /// Parameters at one grid value, before validation.
    pub fn point(&self, value: f64) -> ModelParams {
        let mut p = self.base;
        match self.family {
            SweepFamily::Gamma => {
                let b = self.extra.unwrap_or_else(|| self.base.cycle());
                p.theta = 1.0 / ((1.0 - value) * b);
                p.zeta = 1.0 / (value * b);
            }
            SweepFamily::Theta => {
                p.theta = value;
                p.zeta = self.extra.unwrap_or(self.base.zeta);
            }
            SweepFamily::Refund => p.refund = value * self.base.entrance_fee,
        }
        p
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub value: f64,
    pub theta: f64,
    pub zeta: f64,
    pub r: f64,
    pub n_e: Option<u32>,
    pub n_s: Option<u32>,
    pub q_e: Option<f64>,
    pub case: Option<Case>,
    pub mu_e: Option<f64>,
    pub a_e: Option<f64>,
    #[serde(rename = "EN")]
    pub en: Option<f64>,
    #[serde(rename = "S_e")]
    pub s_e: Option<f64>,
    pub error: Option<String>,
}

pub const CSV_HEADER: &str = "value,theta,zeta,r,n_e,n_s,q_e,case,mu_e,a_e,EN,S_e,error";

fn row_at(spec: &SweepSpec, value: f64, method: Method) -> SweepRow {
    let p = spec.point(value);
    let mut row = SweepRow {
        value,
        theta: p.theta,
        zeta: p.zeta,
        r: p.refund,
        n_e: None,
        n_s: None,
        q_e: None,
        case: None,
        mu_e: None,
        a_e: None,
        en: None,
        s_e: None,
        error: None,
    };
    match validate(p).and_then(|v| solve(&v, method)) {
        Ok(sol) => {
            row.n_e = Some(sol.equilibrium.n_e);
            row.n_s = Some(sol.equilibrium.n_s);
            row.q_e = Some(sol.equilibrium.q_e);
            row.case = Some(sol.equilibrium.case);
            row.mu_e = Some(sol.measures.mu_e);
            row.a_e = Some(sol.measures.a_e);
            row.en = Some(sol.measures.en);
            row.s_e = Some(sol.measures.s_e);
        }
        Err(e) => row.error = Some(e.to_string()),
    }
    row
}

/// One row per grid value, in grid order. Points that fail validation or
/// solving carry the error message instead of results.
pub fn run_sweep(spec: &SweepSpec, method: Method) -> Result<Vec<SweepRow>> {
    spec.check()?;
    Ok(spec.grid.par_iter().map(|&v| row_at(spec, v, method)).collect())
}

fn fmt_float(x: f64) -> String {
    format!("{x:.16e}")
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

pub fn rows_to_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    let opt_f = |x: Option<f64>| x.map(fmt_float).unwrap_or_default();
    let opt_u = |x: Option<u32>| x.map(|v| v.to_string()).unwrap_or_default();
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{}",
            fmt_float(r.value),
            fmt_float(r.theta),
            fmt_float(r.zeta),
            fmt_float(r.r),
            opt_u(r.n_e),
            opt_u(r.n_s),
            opt_f(r.q_e),
            r.case.map(|c| c.as_str()).unwrap_or(""),
            opt_f(r.mu_e),
            opt_f(r.a_e),
            opt_f(r.en),
            opt_f(r.s_e),
            csv_field(r.error.as_deref().unwrap_or("")),
        );
    }
    out
}

/// Parses `"a:b:step"` into `a, a + step, ...` up to and including `b`.
pub fn parse_grid(text: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = text.split(':').collect();
    let bad = || AltqError::InvalidSweep(format!("grid `{text}` is not of the form a:b:step"));
    if parts.len() != 3 {
        return Err(bad());
    }
    let nums: Vec<f64> = parts
        .iter()
        .map(|s| s.trim().parse::<f64>().map_err(|_| bad()))
        .collect::<Result<_>>()?;
    let (a, b, step) = (nums[0], nums[1], nums[2]);
    if !(a.is_finite() && b.is_finite() && step.is_finite()) || step <= 0.0 || b < a {
        return Err(bad());
    }
    let count = ((b - a) / step + 1e-9).floor() as usize + 1;
    Ok((0..count).map(|i| a + i as f64 * step).collect())
}

/// `{0.02, 0.04, ..., 0.98}`.
pub fn default_gamma_grid() -> Vec<f64> {
    (1..=49).map(|i| i as f64 * 0.02).collect()
}

/// `{0, 0.01, ..., 1}`.
pub fn default_refund_grid() -> Vec<f64> {
    (0..=100).map(|i| i as f64 * 0.01).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Shape {
    Increasing,
    Decreasing,
    Unimodal,
    Other,
}

pub const SHAPE_TOLERANCE: f64 = 1e-9;

/// Classifies a column as nondecreasing, nonincreasing, unimodal (up then
/// down, one switch) or none of these. Steps smaller than the tolerance,
/// relative to the magnitudes involved, count as ties.
pub fn detect_shape(column: &[f64]) -> Shape {
    let mut rose = false;
    let mut fell = false;
    let mut switches = 0;
    for w in column.windows(2) {
        let tol = SHAPE_TOLERANCE * w[0].abs().max(w[1].abs()).max(1.0);
        let d = w[1] - w[0];
        if d > tol {
            if fell {
                return Shape::Other;
            }
            rose = true;
        } else if d < -tol {
            if !fell && rose {
                switches += 1;
            }
            fell = true;
        }
    }
    match (rose, fell, switches) {
        (_, false, _) => Shape::Increasing,
        (false, true, _) => Shape::Decreasing,
        (true, true, 1) => Shape::Unimodal,
        _ => Shape::Other,
    }
}

/// Splits row indices into maximal runs with the same `n_s`.
pub fn continuity_intervals(rows: &[SweepRow]) -> Vec<std::ops::Range<usize>> {
    let mut out = Vec::new();
    let mut start = 0;
    for i in 1..=rows.len() {
        if i == rows.len() || rows[i].n_s != rows[start].n_s {
            out.push(start..i);
            start = i;
        }
    }
    out
}
