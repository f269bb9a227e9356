//! Potentials and dense complex polynomials.
//!
//! Coefficient vectors are stored in ascending order: `c[k]` multiplies `z^k`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{EqmError, Result};

pub type C64 = Complex64;

/// The external field `V(z) = z^{2p}/2p + sum_j t_j z^j / j`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Potential {
    p: usize,
    t: Vec<C64>,
}

impl Potential {
    pub fn new(p: usize, t: Vec<C64>) -> Result<Self> {
        if p == 0 {
            return Err(EqmError::InvalidPotential("p must be at least 1".into()));
        }
        if t.len() != 2 * p - 1 {
            return Err(EqmError::InvalidPotential(format!(
                "expected {} coefficients for p = {p}, got {}",
                2 * p - 1,
                t.len()
            )));
        }
        if t.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
            return Err(EqmError::InvalidPotential("non-finite coefficient".into()));
        }
        Ok(Self { p, t })
    }

    /// `V(z) = z^2/2`, the Gaussian field.
    pub fn gaussian() -> Self {
        Self { p: 1, t: vec![C64::new(0.0, 0.0)] }
    }

    /// `V(z) = z^4/4 + sigma z^2/2`.
    pub fn quartic(sigma: C64) -> Self {
        let zero = C64::new(0.0, 0.0);
        Self { p: 2, t: vec![zero, sigma, zero] }
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn t(&self) -> &[C64] {
        &self.t
    }

    /// Largest admissible number of cuts, `2p - 1`.
    pub fn max_cuts(&self) -> usize {
        2 * self.p - 1
    }

    pub fn with_t(&self, t: Vec<C64>) -> Result<Self> {
        Self::new(self.p, t)
    }

    /// Ascending coefficients of the monic `V'`, length `2p`.
    pub fn v_prime_coeffs(&self) -> Vec<C64> {
        let mut c = self.t.clone();
        c.push(C64::new(1.0, 0.0));
        c
    }

    pub fn eval_v_prime(&self, z: C64) -> C64 {
        let mut acc = C64::new(1.0, 0.0);
        for tj in self.t.iter().rev() {
            acc = acc * z + tj;
        }
        acc
    }

    pub fn eval_v(&self, z: C64) -> C64 {
        let n = 2 * self.p;
        let mut acc = C64::new(1.0 / n as f64, 0.0);
        for (j, tj) in self.t.iter().enumerate().rev() {
            acc = acc * z + tj / (j + 1) as f64;
        }
        acc * z
    }

    /// True when `V` is even, i.e. every odd-index `t_j` vanishes.
    pub fn is_even(&self) -> bool {
        self.t.iter().enumerate().all(|(i, c)| (i + 1) % 2 == 0 || c.norm() == 0.0)
    }

    pub fn is_real(&self) -> bool {
        self.t.iter().all(|c| c.im == 0.0)
    }

    /// Linear interpolation `(1 - tau) self + tau other` of the coefficient vectors.
    pub fn lerp(&self, other: &Potential, tau: f64) -> Result<Self> {
        if other.p != self.p {
            return Err(EqmError::InvalidPotential("mismatched degrees".into()));
        }
        let t = self.t.iter().zip(&other.t).map(|(a, b)| a * (1.0 - tau) + b * tau).collect();
        Self::new(self.p, t)
    }
}

pub fn horner(coeffs: &[C64], z: C64) -> C64 {
    coeffs.iter().rev().fold(C64::new(0.0, 0.0), |acc, c| acc * z + c)
}

/// Value and first derivative.
pub fn horner_d(coeffs: &[C64], z: C64) -> (C64, C64) {
    let mut p = C64::new(0.0, 0.0);
    let mut dp = C64::new(0.0, 0.0);
    for c in coeffs.iter().rev() {
        dp = dp * z + p;
        p = p * z + c;
    }
    (p, dp)
}

pub fn derivative(coeffs: &[C64]) -> Vec<C64> {
    coeffs.iter().enumerate().skip(1).map(|(k, c)| c * k as f64).collect()
}

pub fn poly_mul(a: &[C64], b: &[C64]) -> Vec<C64> {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    let mut out = vec![C64::new(0.0, 0.0); a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

/// Monic polynomial with the given roots.
pub fn from_roots(roots: &[C64]) -> Vec<C64> {
    let mut out = vec![C64::new(1.0, 0.0)];
    for r in roots {
        out = poly_mul(&out, &[-r, C64::new(1.0, 0.0)]);
    }
    out
}

/// All roots of a polynomial with nonzero leading coefficient, by
/// Aberth–Ehrlich iteration followed by one Newton polish per root.
///
/// Roots are returned sorted by real part, then imaginary part.
pub fn poly_roots(coeffs: &[C64]) -> Vec<C64> {
    let mut c: Vec<C64> = coeffs.to_vec();
    while c.len() > 1 && c.last().map_or(false, |x| x.norm() == 0.0) {
        c.pop();
    }
    let n = c.len().saturating_sub(1);
    if n == 0 {
        return Vec::new();
    }
    let lead = c[n];
    let c: Vec<C64> = c.iter().map(|x| x / lead).collect();

    // Start on a circle sized by the geometric mean of the root moduli,
    // rotated off the symmetry axes.
    let r0 = {
        let r = c[0].norm().powf(1.0 / n as f64);
        let bound = 1.0 + c[..n].iter().map(|x| x.norm()).fold(0.0, f64::max);
        if r > 0.0 { r.min(bound) } else { 0.5 * bound.min(1.0) + 1e-3 }
    };
    let mut z: Vec<C64> = (0..n)
        .map(|k| C64::from_polar(r0, 2.0 * std::f64::consts::PI * k as f64 / n as f64 + 0.4))
        .collect();

    for _ in 0..800 {
        let mut max_step: f64 = 0.0;
        for k in 0..n {
            let (p, dp) = horner_d(&c, z[k]);
            if p.norm() == 0.0 {
                continue;
            }
            let ratio = p / dp;
            let sum: C64 = (0..n)
                .filter(|&j| j != k)
                .map(|j| {
                    let d = z[k] - z[j];
                    if d.norm() == 0.0 { C64::new(0.0, 0.0) } else { d.inv() }
                })
                .sum();
            let w = ratio / (C64::new(1.0, 0.0) - ratio * sum);
            if w.re.is_finite() && w.im.is_finite() {
                z[k] -= w;
                max_step = max_step.max(w.norm() / (1.0 + z[k].norm()));
            }
        }
        if max_step < 1e-15 {
            break;
        }
    }

    for zk in z.iter_mut() {
        let (p, dp) = horner_d(&c, *zk);
        if dp.norm() > 0.0 {
            let cand = *zk - p / dp;
            if horner(&c, cand).norm() <= p.norm() {
                *zk = cand;
            }
        }
    }
    z.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
    z
}

/// Groups roots lying within `tol` of each other, returning cluster centers
/// with multiplicities.
pub fn cluster_roots(roots: &[C64], tol: f64) -> Vec<(C64, usize)> {
    let mut out: Vec<(C64, usize)> = Vec::new();
    for &r in roots {
        if let Some(slot) = out.iter_mut().find(|(c, _)| (c - r).norm() <= tol) {
            let m = slot.1 as f64;
            slot.0 = (slot.0 * m + r) / (m + 1.0);
            slot.1 += 1;
        } else {
            out.push((r, 1));
        }
    }
    out
}
