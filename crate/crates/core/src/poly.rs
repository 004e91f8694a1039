//! Dense real polynomials in ascending-coefficient order.

use num_complex::Complex64;

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Poly(pub Vec<f64>);

impl Poly {
    pub fn zero() -> Self {
        Poly(Vec::new())
    }

    pub fn constant(c: f64) -> Self {
        Poly(vec![c])
    }

    /// `c * z^k`
    pub fn monomial(c: f64, k: usize) -> Self {
        let mut v = vec![0.0; k + 1];
        v[k] = c;
        Poly(v)
    }

    /// Polynomial from ascending coefficients.
    pub fn from_coeffs(coeffs: &[f64]) -> Self {
        Poly(coeffs.to_vec())
    }

    pub fn degree(&self) -> usize {
        self.0.len().saturating_sub(1)
    }

    pub fn add(&self, other: &Poly) -> Poly {
        let n = self.0.len().max(other.0.len());
        let mut v = vec![0.0; n];
        for (i, c) in self.0.iter().enumerate() {
            v[i] += c;
        }
        for (i, c) in other.0.iter().enumerate() {
            v[i] += c;
        }
        Poly(v)
    }

    pub fn scale(&self, s: f64) -> Poly {
        Poly(self.0.iter().map(|c| c * s).collect())
    }

    pub fn mul(&self, other: &Poly) -> Poly {
        if self.0.is_empty() || other.0.is_empty() {
            return Poly::zero();
        }
        let mut v = vec![0.0; self.0.len() + other.0.len() - 1];
        for (i, a) in self.0.iter().enumerate() {
            for (j, b) in other.0.iter().enumerate() {
                v[i + j] += a * b;
            }
        }
        Poly(v)
    }

    pub fn eval(&self, z: f64) -> f64 {
        self.0.iter().rev().fold(0.0, |acc, c| acc * z + c)
    }

    pub fn eval_complex(&self, z: Complex64) -> Complex64 {
        self.0
            .iter()
            .rev()
            .fold(Complex64::new(0.0, 0.0), |acc, &c| acc * z + c)
    }

    pub fn derivative(&self) -> Poly {
        Poly(
            self.0
                .iter()
                .enumerate()
                .skip(1)
                .map(|(k, c)| k as f64 * c)
                .collect(),
        )
    }

    /// Synthetic division by `(z - a)`: returns quotient and remainder.
    pub fn div_linear(&self, a: f64) -> (Poly, f64) {
        if self.0.is_empty() {
            return (Poly::zero(), 0.0);
        }
        let n = self.0.len();
        let mut q = vec![0.0; n.saturating_sub(1)];
        let mut carry = 0.0;
        for k in (0..n).rev() {
            let v = self.0[k] + carry * a;
            if k == 0 {
                return (Poly(q), v);
            }
            q[k - 1] = v;
            carry = v;
        }
        unreachable!()
    }
}
