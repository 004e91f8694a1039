//! Second, independent solver: partial probability generating functions.
//!
//! The balance equations are folded into three groups of generating
//! functions (levels `0..n_e`, `n_e..n_s` and the unobservable tail from
//! `n_s` up). Each group is a small linear system in `z` whose determinant
//! has known roots; because the generating functions of the two finite
//! groups are polynomials, the Cramer numerators must vanish at those roots.
//! That yields seven linear equations for the unknown boundary
//! probabilities once `p(n_s, 0)` is fixed to an arbitrary seed and
//! `p(n_s, 1)` follows from the tail. Everything is rescaled at the end so
//! that total probability is one.

use nalgebra::{DMatrix, DVector, Matrix3};
use num_complex::Complex64;
use serde::Serialize;

use crate::error::{AltqError, Result};
use crate::model::{Strategy, ValidatedParams};
use crate::poly::Poly;

/// Condition-number estimate above which the boundary system is rejected.
pub const MAX_CONDITION: f64 = 1e12;
/// Roots of the same determinant closer than this (relative) are treated as
/// repeated.
pub const ROOT_COINCIDENCE: f64 = 1e-8;

/// Roots of the three determinants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PgfRoots {
    /// Roots of `D_c`, `0 < z_c1 < 1 < z_c2`.
    pub z_c1: f64,
    pub z_c2: f64,
    /// Roots of `D_b`; `z_b[0] == 1` exactly.
    pub z_b: [f64; 3],
    /// Roots of `D_a`; `z_a[0] == 1` exactly, the others solve the cubic
    /// factor and may form a conjugate pair.
    #[serde(skip)]
    pub z_a: [Complex64; 4],
}

impl PgfRoots {
    /// `lambda q z_c1 / mu`, the tail ratio seen from this solver.
    pub fn tail_ratio(&self, lambda_q: f64, mu: f64) -> f64 {
        lambda_q * self.z_c1 / mu
    }
}

/// `D_c(z) = (lambda q + mu + theta) z - lambda q z^2 - mu`.
pub fn d_c(params: &ValidatedParams, q: f64) -> Poly {
    let lq = params.lambda * q;
    Poly::from_coeffs(&[-params.mu, lq + params.mu + params.theta, -lq])
}

/// Quadratic factor of `D_b(z) = (z - 1) * quad`.
pub fn d_b_reduced(params: &ValidatedParams, q: f64) -> Poly {
    let (mu, th, ze) = (params.mu, params.theta, params.zeta);
    let lq = params.lambda * q;
    Poly::from_coeffs(&[mu * mu, -(lq + mu + th + ze) * mu, lq * (mu + ze)])
}

/// Cubic factor of `D_a(z) = (z - 1) * cubic`.
pub fn d_a_reduced(params: &ValidatedParams, q: f64) -> Poly {
    let (l, mu, th, ze) = (params.lambda, params.mu, params.theta, params.zeta);
    let lq = l * q;
    Poly::from_coeffs(&[
        mu * mu,
        -mu * (lq + mu + th + ze + l),
        l * (mu + th + (l + mu + ze) * q),
        -l * l * q,
    ])
}

fn a0_poly(params: &ValidatedParams, q: f64) -> Poly {
    d_c(params, q)
}

fn a1_poly(params: &ValidatedParams) -> Poly {
    let (l, mu, ze) = (params.lambda, params.mu, params.zeta);
    Poly::from_coeffs(&[-mu, l + mu + ze, -l])
}

fn g_poly(params: &ValidatedParams) -> Poly {
    Poly::from_coeffs(&[-params.mu, params.mu + params.zeta])
}

fn newton_real(p: &Poly, z: f64) -> f64 {
    let d = p.derivative().eval(z);
    if d == 0.0 {
        return z;
    }
    let step = p.eval(z) / d;
    if step.is_finite() {
        z - step
    } else {
        z
    }
}

fn newton_complex(p: &Poly, z: Complex64) -> Complex64 {
    let d = p.derivative().eval_complex(z);
    if d.norm() == 0.0 {
        return z;
    }
    let step = p.eval_complex(z) / d;
    if step.re.is_finite() && step.im.is_finite() {
        z - step
    } else {
        z
    }
}

/// Real roots `(small, large)` of `a z^2 - b z + c` with `a, b, c > 0` and a
/// nonnegative discriminant, evaluated without cancellation.
fn positive_quadratic_roots(a: f64, b: f64, c: f64) -> (f64, f64) {
    let s = (b * b - 4.0 * a * c).max(0.0).sqrt();
    (2.0 * c / (b + s), (b + s) / (2.0 * a))
}

/// Roots of the three determinants, each polished by one Newton step.
pub fn pgf_roots(params: &ValidatedParams, q: f64) -> Result<PgfRoots> {
    let lq = params.lambda * q;
    if !(lq > 0.0) {
        return Err(AltqError::DegenerateQ);
    }
    let (l, mu, th, ze) = (params.lambda, params.mu, params.theta, params.zeta);

    let dc = d_c(params, q);
    let (c1, c2) = positive_quadratic_roots(lq, lq + mu + th, mu);
    let z_c1 = newton_real(&dc, c1);
    let z_c2 = newton_real(&dc, c2);

    let db = d_b_reduced(params, q);
    let (b2, b3) = positive_quadratic_roots(lq * (mu + ze), (lq + mu + th + ze) * mu, mu * mu);
    let z_b = [1.0, newton_real(&db, b2), newton_real(&db, b3)];

    // Companion matrix of the monic cubic factor of D_a.
    let da = d_a_reduced(params, q);
    let lead = -l * l * q;
    let (a0, a1, a2) = (da.0[0] / lead, da.0[1] / lead, da.0[2] / lead);
    let companion = Matrix3::new(0.0, 0.0, -a0, 1.0, 0.0, -a1, 0.0, 1.0, -a2);
    let eig = companion.complex_eigenvalues();
    let mut cubic: Vec<Complex64> = eig
        .iter()
        .map(|z| newton_complex(&da, Complex64::new(z.re, z.im)))
        .collect();
    tidy_conjugates(&mut cubic);
    cubic.sort_by(|x, y| x.re.total_cmp(&y.re).then(x.im.total_cmp(&y.im)));
    let one = Complex64::new(1.0, 0.0);
    let z_a = [one, cubic[0], cubic[1], cubic[2]];

    Ok(PgfRoots {
        z_c1,
        z_c2,
        z_b,
        z_a,
    })
}

/// Cubic with real coefficients: snap near-real roots to the real axis and
/// make a complex pair exactly conjugate.
fn tidy_conjugates(roots: &mut [Complex64]) {
    let tol = 1e-12;
    let complex: Vec<usize> = (0..roots.len())
        .filter(|&i| roots[i].im.abs() > tol * roots[i].norm().max(1.0))
        .collect();
    for (i, z) in roots.iter_mut().enumerate() {
        if !complex.contains(&i) {
            z.im = 0.0;
        }
    }
    if let [i, j] = complex[..] {
        let re = 0.5 * (roots[i].re + roots[j].re);
        let im = 0.5 * (roots[i].im.abs() + roots[j].im.abs());
        roots[i] = Complex64::new(re, im);
        roots[j] = Complex64::new(re, -im);
    }
}

fn check_distinct(group: &[Complex64]) -> Result<()> {
    for i in 0..group.len() {
        for j in i + 1..group.len() {
            let (x, y) = (group[i], group[j]);
            if (x - y).norm() <= ROOT_COINCIDENCE * x.norm().max(y.norm()).max(1.0) {
                return Err(AltqError::RepeatedRoots(
                    format!("{x}"),
                    format!("{y}"),
                ));
            }
        }
    }
    Ok(())
}

/// The nine boundary probabilities that close the generating-function
/// equations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundaryProbs {
    pub p_0_0: f64,
    pub p_0_1: f64,
    pub p_ne_minus_1_0: f64,
    pub p_ne_minus_1_1: f64,
    pub p_ne_0: f64,
    pub p_ne_1: f64,
    pub p_ns_minus_1_0: f64,
    pub p_ns_0: f64,
    pub p_ns_1: f64,
    /// Condition estimate of the equilibrated boundary system.
    pub condition: f64,
    /// Largest residual of the seven root conditions, each scaled to unit
    /// maximum coefficient, at the normalized probabilities.
    pub max_residual: f64,
}

impl BoundaryProbs {
    /// `(level, phase, probability)` for each of the nine entries.
    pub fn entries(&self, strategy: &Strategy) -> [(usize, usize, f64); 9] {
        let (ne, ns) = (strategy.n_e as usize, strategy.n_s as usize);
        [
            (0, 0, self.p_0_0),
            (0, 1, self.p_0_1),
            (ne - 1, 0, self.p_ne_minus_1_0),
            (ne - 1, 1, self.p_ne_minus_1_1),
            (ne, 0, self.p_ne_0),
            (ne, 1, self.p_ne_1),
            (ns - 1, 0, self.p_ns_minus_1_0),
            (ns, 0, self.p_ns_0),
            (ns, 1, self.p_ns_1),
        ]
    }

    fn from_slots(v: [f64; 9], condition: f64) -> BoundaryProbs {
        BoundaryProbs {
            p_0_0: v[P00],
            p_0_1: v[P01],
            p_ne_minus_1_0: v[NE1_0],
            p_ne_minus_1_1: v[NE1_1],
            p_ne_0: v[NE_0],
            p_ne_1: v[NE_1],
            p_ns_minus_1_0: v[NS1_0],
            p_ns_0: v[NS_0],
            p_ns_1: v[NS_1],
            condition,
            max_residual: 0.0,
        }
    }

    fn slots(&self) -> [f64; 9] {
        [
            self.p_0_0,
            self.p_0_1,
            self.p_ne_minus_1_0,
            self.p_ne_minus_1_1,
            self.p_ne_0,
            self.p_ne_1,
            self.p_ns_minus_1_0,
            self.p_ns_0,
            self.p_ns_1,
        ]
    }

    fn scaled(&self, s: f64) -> BoundaryProbs {
        BoundaryProbs {
            p_0_0: self.p_0_0 * s,
            p_0_1: self.p_0_1 * s,
            p_ne_minus_1_0: self.p_ne_minus_1_0 * s,
            p_ne_minus_1_1: self.p_ne_minus_1_1 * s,
            p_ne_0: self.p_ne_0 * s,
            p_ne_1: self.p_ne_1 * s,
            p_ns_minus_1_0: self.p_ns_minus_1_0 * s,
            p_ns_0: self.p_ns_0 * s,
            p_ns_1: self.p_ns_1 * s,
            ..*self
        }
    }
}

// Slot order matches `BoundaryProbs::entries`.
const P00: usize = 0;
const P01: usize = 1;
const NE1_0: usize = 2;
const NE1_1: usize = 3;
const NE_0: usize = 4;
const NE_1: usize = 5;
const NS1_0: usize = 6;
const NS_0: usize = 7;
const NS_1: usize = 8;

/// `z^k / s^top` with `s = max(1, |z|)`, computed without overflow.
fn scaled_pow(z: Complex64, k: usize, top: usize) -> Complex64 {
    let s = z.norm().max(1.0);
    (z / s).powu(k as u32) * s.powi(k as i32 - top as i32)
}

/// Coefficients of the `n_e..n_s` root condition at `z`, scaled by
/// `max(1,|z|)^-(d+2)`.
fn band_b_row(params: &ValidatedParams, strategy: &Strategy, z: Complex64) -> [Complex64; 9] {
    let (l, mu, ze) = (params.lambda, params.mu, params.zeta);
    let lq = l * strategy.q;
    let d = (strategy.n_s - strategy.n_e) as usize;
    let top = d + 2;
    let s = z.norm().max(1.0);
    let g = ((mu + ze) * z - mu) / s;
    let zp = |k: usize| scaled_pow(z, k, top - 1);
    let mut c = [Complex64::new(0.0, 0.0); 9];
    c[NS_1] = -ze * mu * zp(d + 1) / s;
    c[NE1_1] = -ze * l * zp(2) / s;
    c[NE_1] = ze * mu * zp(1) / s;
    c[NS1_0] = g * lq * zp(d + 1);
    c[NS_0] = -g * mu * zp(d);
    c[NE1_0] = -g * lq * zp(1);
    c[NE_0] = g * mu * zp(0);
    c
}

/// The `n_e..n_s` root condition at `z` with `p(n_s - 1, 0)` eliminated via
/// the level cut `lambda q p(n_s-1, 0) = mu (p(n_s, 0) + p(n_s, 1))`.
///
/// For `|z| > 1` the raw condition is dominated by the `n_s` end and nearly
/// repeats the cut; after the substitution the two ends no longer cancel.
fn band_b_row_reduced(
    params: &ValidatedParams,
    strategy: &Strategy,
    z: Complex64,
) -> [Complex64; 9] {
    let (l, mu, ze) = (params.lambda, params.mu, params.zeta);
    let lq = l * strategy.q;
    let d = (strategy.n_s - strategy.n_e) as usize;
    let top = d + 2;
    let s = z.norm().max(1.0);
    let g = ((mu + ze) * z - mu) / s;
    let zm1 = (z - 1.0) / s;
    let mut c = [Complex64::new(0.0, 0.0); 9];
    c[NE1_1] = -ze * l * scaled_pow(z, 2, top);
    c[NE_1] = ze * mu * scaled_pow(z, 1, top);
    c[NE1_0] = -g * lq * scaled_pow(z, 1, top - 1);
    c[NE_0] = g * mu * scaled_pow(z, 0, top - 1);
    c[NS_0] = g * zm1 * mu * scaled_pow(z, d, top - 2);
    c[NS_1] = zm1 * mu * (mu + ze) * scaled_pow(z, d + 1, top - 1);
    c
}

/// Coefficients of the `0..n_e` root condition at `z`, scaled by
/// `max(1,|z|)^-(n_e+3)`.
fn band_a_row(params: &ValidatedParams, strategy: &Strategy, z: Complex64) -> [Complex64; 9] {
    let (l, mu, ze) = (params.lambda, params.mu, params.zeta);
    let lq = l * strategy.q;
    let ne = strategy.n_e as usize;
    let top = ne + 3;
    let s = z.norm().max(1.0);
    let a1 = ((l + mu + ze) * z - l * z * z - mu) / (s * s);
    let zm1 = (z - 1.0) / s;
    let zp = |k: usize| scaled_pow(z, k, top - 2);
    let mut c = [Complex64::new(0.0, 0.0); 9];
    c[P01] = -ze * mu * zm1 * zp(1) / s;
    c[NE1_1] = ze * l * zp(ne + 2) / (s * s);
    c[NE_1] = -ze * mu * zp(ne + 1) / (s * s);
    c[P00] = -a1 * mu * zm1 * zp(0) * s;
    c[NE1_0] = a1 * lq * zp(ne + 1);
    c[NE_0] = -a1 * mu * zp(ne);
    c
}

/// The root conditions at every root, as real coefficient rows over the
/// nine boundary slots.
struct RootRows {
    /// The seven conditions as stated, for the residual check.
    conditions: Vec<[f64; 9]>,
    /// An equivalent set used for solving. The `z_b = 1` condition is
    /// replaced by the level cut between `n_s - 1` and `n_s` (their
    /// difference is the `n_e` cut, already given by `z_a = 1`); the other
    /// two `D_b` conditions are rewritten with the cut substituted so that the
    /// two ends of the band do not cancel. The cut itself is not a row: it
    /// fixes `p(n_s - 1, 0)` in terms of `p(n_s, 0)`.
    rows: Vec<[f64; 9]>,
}

fn root_rows(params: &ValidatedParams, strategy: &Strategy, roots: &PgfRoots) -> RootRows {
    let mut conditions = Vec::with_capacity(7);
    let mut rows = Vec::with_capacity(6);
    for (k, &z) in roots.z_b.iter().enumerate() {
        let z = Complex64::new(z, 0.0);
        conditions.push(band_b_row(params, strategy, z).map(|v| v.re));
        if k > 0 {
            rows.push(band_b_row_reduced(params, strategy, z).map(|v| v.re));
        }
    }
    for &z in &roots.z_a {
        if z.im < 0.0 {
            continue;
        }
        let c = band_a_row(params, strategy, z);
        rows.push(c.map(|v| v.re));
        conditions.push(c.map(|v| v.re));
        if z.im != 0.0 {
            rows.push(c.map(|v| v.im));
            conditions.push(c.map(|v| v.im));
        }
    }
    debug_assert_eq!(conditions.len(), 7);
    RootRows { conditions, rows }
}

fn slot_state(slot: usize, ne: usize, ns: usize) -> (usize, usize) {
    match slot {
        P00 => (0, 0),
        P01 => (0, 1),
        NE1_0 => (ne - 1, 0),
        NE1_1 => (ne - 1, 1),
        NE_0 => (ne, 0),
        NE_1 => (ne, 1),
        NS1_0 => (ns - 1, 0),
        NS_0 => (ns, 0),
        _ => (ns, 1),
    }
}

/// `p(n_s, 1) / p(n_s, 0)` and `p(n_s - 1, 0) / p(n_s, 0)`.
fn anchor_ratios(params: &ValidatedParams, strategy: &Strategy, roots: &PgfRoots) -> (f64, f64) {
    let lq = params.lambda * strategy.q;
    let rho = roots.tail_ratio(lq, params.mu);
    let kappa = params.theta / ((params.mu + params.zeta) * (1.0 - rho));
    (kappa, params.mu * (1.0 + kappa) / lq)
}

/// Equilibrates, solves in the least-squares sense and reports the
/// condition estimate of the scaled matrix.
fn scaled_solve(mut a: DMatrix<f64>, b: DVector<f64>) -> Result<(DVector<f64>, f64)> {
    let col_norms: Vec<f64> = a.column_iter().map(|c| c.norm()).collect();
    if col_norms.iter().any(|&c| !(c > 0.0)) {
        return Err(AltqError::IllConditioned(f64::INFINITY));
    }
    for (j, &c) in col_norms.iter().enumerate() {
        a.column_mut(j).scale_mut(1.0 / c);
    }
    let svd = a.svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    let condition = if smin > 0.0 { smax / smin } else { f64::INFINITY };
    if !(condition <= MAX_CONDITION) {
        return Err(AltqError::IllConditioned(condition));
    }
    let mut y = svd
        .solve(&b, 0.0)
        .map_err(|e| AltqError::SingularSystem(e.to_string()))?;
    for (j, &c) in col_norms.iter().enumerate() {
        y[j] /= c;
    }
    Ok((y, condition))
}

/// Values for the nine slots with `p(n_s, 0) = seed`, unnormalized.
fn solve_seeded(
    params: &ValidatedParams,
    strategy: &Strategy,
    roots: &PgfRoots,
    rows: &RootRows,
    seed: f64,
) -> Result<([f64; 9], f64)> {
    let (ne, ns) = (strategy.n_e as usize, strategy.n_s as usize);
    let (kappa, cut) = anchor_ratios(params, strategy, roots);
    let known = [
        ((ns - 1, 0), cut * seed),
        ((ns, 0), seed),
        ((ns, 1), kappa * seed),
    ];
    let mut states: Vec<(usize, usize)> = Vec::new();
    let mut column: [Option<usize>; 9] = [None; 9];
    let mut values = [0.0f64; 9];
    for slot in 0..9 {
        let st = slot_state(slot, ne, ns);
        if let Some(&(_, v)) = known.iter().find(|(k, _)| *k == st) {
            values[slot] = v;
            continue;
        }
        column[slot] = Some(match states.iter().position(|&x| x == st) {
            Some(i) => i,
            None => {
                states.push(st);
                states.len() - 1
            }
        });
    }

    let mut a = DMatrix::<f64>::zeros(rows.rows.len(), states.len());
    let mut b = DVector::<f64>::zeros(rows.rows.len());
    for (i, row) in rows.rows.iter().enumerate() {
        let scale = (0..9)
            .filter(|&k| column[k].is_some())
            .fold(0.0f64, |m, k| m.max(row[k].abs()));
        let scale = if scale > 0.0 { scale } else { 1.0 };
        let mut rhs = 0.0;
        for slot in 0..9 {
            match column[slot] {
                Some(j) => a[(i, j)] += row[slot] / scale,
                None => rhs -= row[slot] * values[slot],
            }
        }
        b[i] = rhs / scale;
    }
    let (y, condition) = scaled_solve(a, b)?;
    for slot in 0..9 {
        if let Some(j) = column[slot] {
            values[slot] = y[j];
        }
    }
    Ok((values, condition))
}

/// Values for the nine slots with `p(n_s, 0)` unknown and total probability
/// imposed as an extra equation.
///
/// When the top of the band is exponentially rare, presetting `p(n_s, 0)`
/// forces the remaining unknowns to be exponentially large and the seeded
/// system loses all precision; this form keeps every unknown at its natural
/// scale.
fn solve_normalized(
    params: &ValidatedParams,
    strategy: &Strategy,
    roots: &PgfRoots,
    rows: &RootRows,
) -> Result<([f64; 9], f64)> {
    let (ne, ns) = (strategy.n_e as usize, strategy.n_s as usize);
    let (kappa, cut) = anchor_ratios(params, strategy, roots);
    // Column 0 carries the largest of the three tied states so that the
    // others are derived from it by factors of at most one.
    let top = 1.0f64.max(kappa).max(cut);
    let ratio = |st: (usize, usize)| -> Option<f64> {
        if st == (ns, 0) {
            Some(1.0 / top)
        } else if st == (ns, 1) {
            Some(kappa / top)
        } else if st == (ns - 1, 0) {
            Some(cut / top)
        } else {
            None
        }
    };
    let mut states: Vec<(usize, usize)> = vec![(ns, 0)];
    let mut column = [(0usize, 1.0f64); 9];
    for slot in 0..9 {
        let st = slot_state(slot, ne, ns);
        column[slot] = match ratio(st) {
            Some(f) => (0, f),
            None => match states.iter().position(|&x| x == st) {
                Some(i) => (i, 1.0),
                None => {
                    states.push(st);
                    (states.len() - 1, 1.0)
                }
            },
        };
    }

    // Total probability is linear in the nine slots.
    let mut mass = [0.0f64; 9];
    for (slot, m) in mass.iter_mut().enumerate() {
        let mut unit = [0.0f64; 9];
        unit[slot] = 1.0;
        let bp = BoundaryProbs::from_slots(unit, 0.0);
        *m = eval_with_roots(params, strategy, &bp, roots).total_mass(&bp);
    }

    let n_rows = rows.rows.len() + 1;
    let mut a = DMatrix::<f64>::zeros(n_rows, states.len());
    let mut b = DVector::<f64>::zeros(n_rows);
    let all_rows = rows.rows.iter().chain(std::iter::once(&mass));
    for (i, row) in all_rows.enumerate() {
        for slot in 0..9 {
            let (j, f) = column[slot];
            a[(i, j)] += row[slot] * f;
        }
        let scale = a.row(i).amax();
        let scale = if scale > 0.0 { scale } else { 1.0 };
        a.row_mut(i).scale_mut(1.0 / scale);
        if i == n_rows - 1 {
            b[i] = 1.0 / scale;
        }
    }
    let (y, condition) = scaled_solve(a, b)?;
    let mut values = [0.0f64; 9];
    for slot in 0..9 {
        let (j, f) = column[slot];
        values[slot] = y[j] * f;
    }
    Ok((values, condition))
}

/// Probabilities below this after normalization are rounding noise.
const NEGATIVE_TOLERANCE: f64 = 1e-10;

fn normalize(
    params: &ValidatedParams,
    strategy: &Strategy,
    roots: &PgfRoots,
    values: [f64; 9],
    condition: f64,
) -> Result<BoundaryProbs> {
    if values.iter().any(|v| !v.is_finite()) {
        return Err(AltqError::IllConditioned(condition));
    }
    let raw = BoundaryProbs::from_slots(values, condition);
    let total = eval_with_roots(params, strategy, &raw, roots).total_mass(&raw);
    if !(total.is_finite() && total > 0.0) {
        return Err(AltqError::SingularSystem(format!(
            "generating-function total mass {total:e}"
        )));
    }
    let mut slots = raw.scaled(1.0 / total).slots();
    for v in slots.iter_mut() {
        if *v < -NEGATIVE_TOLERANCE {
            return Err(AltqError::IllConditioned(condition));
        }
        *v = v.max(0.0);
    }
    Ok(BoundaryProbs::from_slots(slots, condition))
}

fn check_applicable(params: &ValidatedParams, strategy: &Strategy) -> Result<()> {
    Strategy::new(strategy.n_e, strategy.n_s, strategy.q)?;
    if strategy.n_s <= strategy.n_e {
        return Err(AltqError::EmptyBand {
            n_e: strategy.n_e,
            n_s: strategy.n_s,
        });
    }
    if !(params.lambda * strategy.q > 0.0) {
        return Err(AltqError::DegenerateQ);
    }
    Ok(())
}

/// Normalized boundary probabilities.
///
/// Fails with [`AltqError::EmptyBand`] when `n_s == n_e`,
/// [`AltqError::DegenerateQ`] when `q == 0`, [`AltqError::RepeatedRoots`] or
/// [`AltqError::IllConditioned`] when the root conditions do not pin the
/// unknowns down reliably. Callers fall back to the QBD solver in all cases.
pub fn solve_boundary(params: &ValidatedParams, strategy: &Strategy) -> Result<BoundaryProbs> {
    solve_boundary_seeded(params, strategy, 1.0)
}

/// [`solve_boundary`] with an explicit value preset for `p(n_s, 0)` before
/// normalization. The normalized result does not depend on it.
///
/// If the seeded system is ill-conditioned the same conditions are solved
/// with total probability as an equation instead.
pub fn solve_boundary_seeded(
    params: &ValidatedParams,
    strategy: &Strategy,
    seed: f64,
) -> Result<BoundaryProbs> {
    check_applicable(params, strategy)?;
    if !(seed.is_finite() && seed > 0.0) {
        return Err(AltqError::InvalidStrategy(format!("seed {seed} must be positive")));
    }
    let roots = pgf_roots(params, strategy.q)?;
    check_distinct(&roots.z_b.map(|z| Complex64::new(z, 0.0)))?;
    check_distinct(&roots.z_a)?;
    let rows = root_rows(params, strategy, &roots);
    let seeded = solve_seeded(params, strategy, &roots, &rows, seed)
        .and_then(|(v, c)| normalize(params, strategy, &roots, v, c));
    let mut bp = match seeded {
        Ok(bp) => bp,
        Err(AltqError::IllConditioned(_)) | Err(AltqError::SingularSystem(_)) => {
            let (v, c) = solve_normalized(params, strategy, &roots, &rows)?;
            normalize(params, strategy, &roots, v, c)?
        }
        Err(e) => return Err(e),
    };
    let normalized = bp.slots();
    bp.max_residual = rows
        .conditions
        .iter()
        .map(|row| {
            let scale = row.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            let sum: f64 = (0..9).map(|k| row[k] * normalized[k]).sum();
            if scale > 0.0 {
                sum.abs() / scale
            } else {
                0.0
            }
        })
        .fold(0.0, f64::max);
    Ok(bp)
}

/// Generating-function values needed by the net-benefit formula, plus the
/// observable-mode group masses used for normalization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PgfValues {
    pub p0a_at_1: f64,
    pub p0b_at_1: f64,
    pub p0c_at_1: f64,
    pub p0a_prime_at_1: f64,
    pub p0b_prime_at_1: f64,
    /// `P_0c(mu / (mu + theta))`.
    pub p0c_at_w: f64,
    pub p1a_at_1: f64,
    pub p1b_at_1: f64,
    /// Tail ratio `lambda q z_c1 / mu`.
    pub tail_ratio: f64,
}

impl PgfValues {
    pub fn unobservable_mass(&self) -> f64 {
        self.p0a_at_1 + self.p0b_at_1 + self.p0c_at_1
    }

    fn total_mass(&self, bp: &BoundaryProbs) -> f64 {
        self.unobservable_mass() + self.p1a_at_1 + self.p1b_at_1 + bp.p_ns_1
    }
}

/// Coefficients of `num / (lead * prod (z - r))`, a polynomial when every
/// root is shared. Each linear factor is divided out top-down when
/// `|r| <= 1` and bottom-up otherwise, so rounding is never amplified. The
/// analytic limit at `z = 1` instead divides by the reduced determinant at
/// 1, which vanishes when the band has zero drift.
fn deflate(num: &Poly, roots: &[Complex64], lead: f64) -> Vec<f64> {
    let mut c: Vec<Complex64> = num.0.iter().map(|&x| Complex64::new(x, 0.0)).collect();
    for &r in roots {
        let m = c.len() - 1;
        let mut out = vec![Complex64::new(0.0, 0.0); m];
        if r.norm() <= 1.0 {
            out[m - 1] = c[m];
            for k in (1..m).rev() {
                out[k - 1] = c[k] + r * out[k];
            }
        } else {
            out[0] = -c[0] / r;
            for k in 1..m {
                out[k] = (out[k - 1] - c[k]) / r;
            }
        }
        c = out;
    }
    c.iter().map(|z| z.re / lead).collect()
}

/// Value and first derivative at `z = 1` from coefficients.
fn at_one(c: &[f64]) -> (f64, f64) {
    let v = c.iter().sum();
    let d = c.iter().enumerate().map(|(k, x)| k as f64 * x).sum();
    (v, d)
}

/// Evaluates the partial generating functions from the boundary
/// probabilities via Cramer's rule, dividing out the determinant roots.
pub fn pgf_eval(
    params: &ValidatedParams,
    strategy: &Strategy,
    bp: &BoundaryProbs,
) -> Result<PgfValues> {
    check_applicable(params, strategy)?;
    let roots = pgf_roots(params, strategy.q)?;
    Ok(eval_with_roots(params, strategy, bp, &roots))
}

fn eval_with_roots(
    params: &ValidatedParams,
    strategy: &Strategy,
    bp: &BoundaryProbs,
    roots: &PgfRoots,
) -> PgfValues {
    let (l, mu, th, ze) = (params.lambda, params.mu, params.theta, params.zeta);
    let q = strategy.q;
    let lq = l * q;
    let ne = strategy.n_e as usize;
    let d = (strategy.n_s - strategy.n_e) as usize;
    let z = Poly::monomial(1.0, 1);
    let zm1 = Poly::from_coeffs(&[-1.0, 1.0]);

    let n0a = zm1
        .scale(mu * bp.p_0_1)
        .add(&Poly::monomial(-l * bp.p_ne_minus_1_1, ne + 1))
        .add(&Poly::monomial(mu * bp.p_ne_1, ne));
    let n1a = zm1
        .scale(mu * bp.p_0_0)
        .add(&Poly::monomial(-lq * bp.p_ne_minus_1_0, ne + 1))
        .add(&Poly::monomial(mu * bp.p_ne_0, ne));
    let n0b = Poly::monomial(mu * bp.p_ns_1, d)
        .add(&Poly::monomial(l * bp.p_ne_minus_1_1, 1))
        .add(&Poly::constant(-mu * bp.p_ne_1));
    let n1b = Poly::monomial(-lq * bp.p_ns_minus_1_0, d + 1)
        .add(&Poly::monomial(mu * bp.p_ns_0, d))
        .add(&Poly::monomial(lq * bp.p_ne_minus_1_0, 1))
        .add(&Poly::constant(-mu * bp.p_ne_0));

    let a0 = a0_poly(params, q);
    let a1 = a1_poly(params);
    let g = g_poly(params);
    let minus_zeta_z = z.scale(-ze);
    let minus_theta_z = z.scale(-th);

    let num0a = minus_zeta_z.mul(&n0a).add(&a1.mul(&n1a).scale(-1.0));
    let num1a = minus_theta_z.mul(&n1a).add(&a0.mul(&n0a).scale(-1.0));
    let num0b = minus_zeta_z.mul(&n0b).add(&g.mul(&n1b).scale(-1.0));
    let num1b = minus_theta_z.mul(&n1b).add(&a0.mul(&n0b).scale(-1.0));

    let lead_a = -l * l * q;
    let lead_b = lq * (mu + ze);
    let roots_b = roots.z_b.map(|z| Complex64::new(z, 0.0));
    let (p0a, p0a_prime) = at_one(&deflate(&num0a, &roots.z_a, lead_a));
    let (p1a, _) = at_one(&deflate(&num1a, &roots.z_a, lead_a));
    let (p0b, p0b_prime) = at_one(&deflate(&num0b, &roots_b, lead_b));
    let (p1b, _) = at_one(&deflate(&num1b, &roots_b, lead_b));

    let rho = roots.tail_ratio(lq, mu);
    let w = mu / (mu + th);
    PgfValues {
        p0a_at_1: p0a,
        p0b_at_1: p0b,
        p0c_at_1: bp.p_ns_0 / (1.0 - rho),
        p0a_prime_at_1: p0a_prime,
        p0b_prime_at_1: p0b_prime,
        p0c_at_w: bp.p_ns_0 / (1.0 - rho * w),
        p1a_at_1: p1a,
        p1b_at_1: p1b,
        tail_ratio: rho,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{validate, ModelParams};
    use crate::steady_state::{rho_minus, solve_censored_qbd};

    fn params(lambda: f64, theta: f64, zeta: f64) -> ValidatedParams {
        validate(ModelParams {
            lambda,
            mu: 1.0,
            theta,
            zeta,
            reward: 4.0,
            cost: 1.0,
            entrance_fee: 0.0,
            service_fee: 0.0,
            refund: -30.0,
        })
        .unwrap()
    }

    #[test]
    fn determinants_factor_through_z_minus_one() {
        for &(lambda, q, theta, zeta) in &[(1.1, 0.5, 20.0, 20.0), (2.0, 0.3, 0.7, 4.0)] {
            let p = params(lambda, theta, zeta);
            let theta_zeta_z2 = Poly::monomial(p.theta * p.zeta, 2);
            let zm1 = Poly::from_coeffs(&[-1.0, 1.0]);
            let da = theta_zeta_z2.add(&a1_poly(&p).mul(&a0_poly(&p, q)).scale(-1.0));
            let da_fact = zm1.mul(&d_a_reduced(&p, q));
            let db = theta_zeta_z2.add(&g_poly(&p).mul(&a0_poly(&p, q)).scale(-1.0));
            let db_fact = zm1.mul(&d_b_reduced(&p, q));
            for (x, y) in da.0.iter().zip(&da_fact.0) {
                assert!((x - y).abs() < 1e-12 * (1.0 + x.abs()));
            }
            for (x, y) in db.0.iter().zip(&db_fact.0) {
                assert!((x - y).abs() < 1e-12 * (1.0 + x.abs()));
            }
        }
    }

    #[test]
    fn quadratic_roots_worked_example() {
        // lambda q = 1, mu = 1, theta = 1
        let p = params(2.0, 1.0, 1.0);
        let r = pgf_roots(&p, 0.5).unwrap();
        assert!((r.z_c1 - (3.0 - 5f64.sqrt()) / 2.0).abs() < 1e-14);
        assert!((r.z_c1 - 0.381_966_01).abs() < 1e-8);
        assert!((r.z_c2 - (3.0 + 5f64.sqrt()) / 2.0).abs() < 1e-14);
        assert!((r.z_c2 - 2.618_033_99).abs() < 1e-8);
        assert!((r.tail_ratio(1.0, 1.0) - rho_minus(1.0, 1.0, 1.0)).abs() < 1e-12);
    }

    #[test]
    fn roots_satisfy_identities() {
        for &(lambda, q, theta, zeta) in &[
            (1.1, 0.5, 20.0, 20.0),
            (2.3, 0.9, 11.1, 100.0),
            (0.8, 0.05, 0.3, 1.0),
            (5.0, 1.0, 0.01, 0.02),
        ] {
            let p = params(lambda, theta, zeta);
            let r = pgf_roots(&p, q).unwrap();
            let lq = lambda * q;
            assert!(r.z_c1 > 0.0 && r.z_c1 < 1.0 && r.z_c2 > 1.0);
            let dc = d_c(&p, q);
            assert!(dc.eval(r.z_c1).abs() <= 1e-12 * (lq + 1.0 + theta));
            assert!(dc.eval(r.z_c2).abs() <= 1e-12 * (lq + 1.0 + theta) * r.z_c2 * r.z_c2);
            assert!((r.z_c1 * r.z_c2 - 1.0 / lq).abs() <= 1e-10 / lq);
            assert_eq!(r.z_b[0], 1.0);
            assert_eq!(r.z_a[0], Complex64::new(1.0, 0.0));
            let prod = r.z_a[1] * r.z_a[2] * r.z_a[3];
            let expect = 1.0 / (lambda * lambda * q);
            assert!((prod.re - expect).abs() <= 1e-10 * expect);
            assert!(prod.im.abs() <= 1e-10 * expect);
            let cubic = d_a_reduced(&p, q);
            for z in &r.z_a[1..] {
                let scale = z.norm().powi(3) * lambda * lambda + 1.0;
                assert!(cubic.eval_complex(*z).norm() <= 1e-11 * scale * (1.0 + lambda + theta + zeta));
            }
            assert!((r.tail_ratio(lq, 1.0) - rho_minus(lq, 1.0, theta)).abs() < 1e-12);
        }
    }

    #[test]
    fn complex_roots_come_in_conjugate_pairs() {
        let mut found_complex = false;
        for lambda in [0.5, 1.0, 2.0, 4.0] {
            for q in [0.1, 0.5, 1.0] {
                for theta in [0.1, 1.0, 10.0] {
                    for zeta in [0.1, 1.0, 10.0] {
                        let p = params(lambda, theta, zeta);
                        let r = pgf_roots(&p, q).unwrap();
                        let cx: Vec<_> = r.z_a.iter().filter(|z| z.im != 0.0).collect();
                        assert!(cx.is_empty() || cx.len() == 2);
                        if cx.len() == 2 {
                            found_complex = true;
                            assert_eq!(*cx[0], cx[1].conj());
                        }
                    }
                }
            }
        }
        // At least the grid is exercised; the cubic may or may not go complex.
        let _ = found_complex;
    }

    #[test]
    fn matches_qbd_on_short_cycle_set() {
        let p = params(1.1, 20.0, 20.0);
        let s = Strategy::new(4, 34, 0.5).unwrap();
        let bp = solve_boundary(&p, &s).unwrap();
        let ss = solve_censored_qbd(&p, &s).unwrap();
        for (n, i, v) in bp.entries(&s) {
            assert!((v - ss.prob(n, i)).abs() < 1e-8, "({n},{i}): {v} vs {}", ss.prob(n, i));
        }
        assert!(bp.max_residual <= 1e-9, "{}", bp.max_residual);
    }

    #[test]
    fn seed_does_not_matter() {
        let p = params(1.3, 1.0, 10.0);
        let s = Strategy::new(2, 7, 0.8).unwrap();
        let a = solve_boundary_seeded(&p, &s, 1.0).unwrap();
        let b = solve_boundary_seeded(&p, &s, 7.0).unwrap();
        for ((_, _, x), (_, _, y)) in a.entries(&s).iter().zip(b.entries(&s).iter()) {
            assert!((x - y).abs() <= 1e-12);
        }
    }

    #[test]
    fn minimal_band_and_unit_naor_threshold() {
        for &(ne, ns) in &[(3, 4), (1, 2), (1, 5)] {
            let p = params(1.1, 2.0, 3.0);
            let s = Strategy::new(ne, ns, 0.7).unwrap();
            let bp = solve_boundary(&p, &s).unwrap();
            let ss = solve_censored_qbd(&p, &s).unwrap();
            for (n, i, v) in bp.entries(&s) {
                assert!((v - ss.prob(n, i)).abs() < 1e-8, "ne={ne} ns={ns} ({n},{i})");
            }
        }
    }

    #[test]
    fn pgf_values_match_qbd_sums() {
        let p = params(1.1, 2.0, 3.0);
        let s = Strategy::new(3, 9, 0.6).unwrap();
        let bp = solve_boundary(&p, &s).unwrap();
        let v = pgf_eval(&p, &s, &bp).unwrap();
        let ss = solve_censored_qbd(&p, &s).unwrap();
        let p0a: f64 = (0..3).map(|n| ss.p0[n]).sum();
        let p0a_prime: f64 = (0..3).map(|n| n as f64 * ss.p0[n]).sum();
        let p0b: f64 = (3..9).map(|n| ss.p0[n]).sum();
        let p0b_prime: f64 = (3..9).map(|n| (n - 3) as f64 * ss.p0[n]).sum();
        assert!((v.p0a_at_1 - p0a).abs() < 1e-8);
        assert!((v.p0a_prime_at_1 - p0a_prime).abs() < 1e-8);
        assert!((v.p0b_at_1 - p0b).abs() < 1e-8);
        assert!((v.p0b_prime_at_1 - p0b_prime).abs() < 1e-8);
        assert!((v.p0c_at_1 - bp.p_ns_0 / (1.0 - ss.rho_minus)).abs() < 1e-12);
        assert!((v.unobservable_mass() - 3.0 / 5.0).abs() < 1e-10);
        let lhs = (p.mu + p.zeta) * bp.p_ns_1;
        assert!((lhs - p.theta * v.p0c_at_1).abs() < 1e-12);
    }

    #[test]
    fn inapplicable_inputs_are_reported() {
        let p = params(1.1, 2.0, 3.0);
        assert_eq!(pgf_roots(&p, 0.0), Err(AltqError::DegenerateQ));
        assert!(matches!(
            solve_boundary(&p, &Strategy::new(3, 3, 0.5).unwrap()),
            Err(AltqError::EmptyBand { .. })
        ));
        assert!(matches!(
            solve_boundary(&p, &Strategy::new(2, 5, 0.0).unwrap()),
            Err(AltqError::DegenerateQ)
        ));
    }

    #[test]
    fn rare_top_of_band() {
        // Light traffic and a long band: p(n_s, 0) is astronomically small.
        let p = params(0.06, 0.066, 0.43);
        for &(ne, ns, q) in &[(5, 48, 0.5), (30, 40, 0.3), (4, 34, 1.0)] {
            let s = Strategy::new(ne, ns, q).unwrap();
            let bp = solve_boundary(&p, &s).unwrap();
            let ss = solve_censored_qbd(&p, &s).unwrap();
            for (n, i, v) in bp.entries(&s) {
                assert!((v - ss.prob(n, i)).abs() < 1e-8, "({n},{i}) {v:e} vs {:e}", ss.prob(n, i));
            }
            assert!(bp.max_residual <= 1e-9);
        }
    }

    #[test]
    fn tiny_joining_probability() {
        let p = params(1.1, 2.0, 3.0);
        let s = Strategy::new(4, 12, 1e-6).unwrap();
        let bp = solve_boundary(&p, &s).unwrap();
        let ss = solve_censored_qbd(&p, &s).unwrap();
        for (n, i, v) in bp.entries(&s) {
            assert!((v - ss.prob(n, i)).abs() < 1e-6);
        }
    }
}
