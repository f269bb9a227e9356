//! The density polynomial `h`, the resolvent, the equilibrium density and the
//! g-function.

use std::f64::consts::PI;

use serde::Serialize;

use crate::branch::{BranchedSqrtR, EndpointSet, Side};
use crate::error::{EqmError, Result};
use crate::eta::{EtaEvaluator, PathHint};
use crate::laurent::{default_order, inv_sqrt_r, sqrt_r};
use crate::poly::{horner, poly_roots, Potential, C64};
use crate::quad;

/// Monic polynomial part of `V' R^{-1/2}` at infinity, degree `2p - 1 - q`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HPolynomial {
    pub coeffs: Vec<C64>,
    pub zeros: Vec<C64>,
}

impl HPolynomial {
    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn eval(&self, z: C64) -> C64 {
        horner(&self.coeffs, z)
    }
}

pub fn compute_h(pot: &Potential, ep: &EndpointSet) -> Result<HPolynomial> {
    let (p, q) = (pot.p(), ep.q());
    if q > pot.max_cuts() {
        return Err(EqmError::InvalidEndpoints(format!("q = {q} exceeds 2p - 1 = {}", pot.max_cuts())));
    }
    let r = 2 * p - 1 - q;
    let d = inv_sqrt_r(ep, default_order(p, q));
    let v = pot.v_prime_coeffs();
    // z^j * z^{-q-k} contributes to z^i when k = j - q - i.
    let coeffs: Vec<C64> = (0..=r)
        .map(|i| {
            v.iter()
                .enumerate()
                .filter(|(j, _)| *j >= q + i)
                .map(|(j, vj)| vj * d.coeffs[j - q - i])
                .sum()
        })
        .collect();
    let zeros = poly_roots(&coeffs);
    Ok(HPolynomial { coeffs, zeros })
}

/// Coefficients `m_n` of `omega(z) = sum_n m_n z^{-n-1}`, `n = 0..=count`.
pub fn resolvent_series(ep: &EndpointSet, h: &HPolynomial, count: usize) -> Vec<C64> {
    // V' has no negative powers, so only -h R^{1/2} / 2 contributes.
    let q = ep.q();
    let e = sqrt_r(ep, h.degree() + q + count + 1);
    (0..=count)
        .map(|n| {
            let s: C64 = h.coeffs.iter().enumerate().map(|(i, hi)| hi * e.coeffs[i + q + n + 1]).sum();
            -s * 0.5
        })
        .collect()
}

fn critical_scale(ep: &EndpointSet, h: &HPolynomial) -> f64 {
    h.zeros.iter().map(|z| z.norm()).fold(ep.scale(), f64::max)
}

/// `omega(z) = (V'(z) - h(z) R^{1/2}(z)) / 2` off the straight cuts.
pub fn resolvent(pot: &Potential, ep: &EndpointSet, h: &HPolynomial, z: C64) -> Result<C64> {
    let br = BranchedSqrtR::new(ep);
    if br.on_segment(z).is_some() {
        return Err(EqmError::OnCut);
    }
    let scale = critical_scale(ep, h);
    if z.norm() > 8.0 * scale {
        // Direct evaluation cancels catastrophically far out.
        let m = resolvent_series(ep, h, 48);
        let w = z.inv();
        return Ok(m.iter().rev().fold(C64::new(0.0, 0.0), |acc, c| acc * w + c) * w);
    }
    Ok((pot.eval_v_prime(z) - h.eval(z) * br.eval(z, Side::Auto)?) * 0.5)
}

/// A density sample: `rho` is the real density against arclength and
/// `im_residue` the imaginary part left after orientation fixing.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DensitySample {
    pub at: C64,
    pub rho: f64,
    pub im_residue: f64,
}

#[derive(Clone, Debug)]
pub struct EquilibriumMeasure {
    pot: Potential,
    ep: EndpointSet,
    h: HPolynomial,
    branch: BranchedSqrtR,
    orientation: Vec<f64>,
    cut_masses: Vec<C64>,
    quad_tol: f64,
}

impl EquilibriumMeasure {
    pub fn new(pot: &Potential, ep: &EndpointSet, quad_tol: f64) -> Result<Self> {
        let h = compute_h(pot, ep)?;
        let branch = BranchedSqrtR::new(ep);
        let mut em = Self {
            pot: pot.clone(),
            ep: ep.clone(),
            h,
            branch,
            orientation: vec![1.0; ep.q()],
            cut_masses: Vec::new(),
            quad_tol,
        };
        em.cut_masses = (0..ep.q())
            .map(|j| crate::endpoint::cut_integral(pot, ep, &em.h, j, quad_tol).map(|v| v / C64::new(0.0, 2.0 * PI)))
            .collect::<Result<_>>()?;
        for j in 0..ep.q() {
            let mid = em.raw_density(j, 0.0);
            if mid.re < 0.0 {
                em.orientation[j] = -1.0;
            }
        }
        Ok(em)
    }

    pub fn potential(&self) -> &Potential {
        &self.pot
    }

    pub fn endpoints(&self) -> &EndpointSet {
        &self.ep
    }

    pub fn h(&self) -> &HPolynomial {
        &self.h
    }

    /// `(1/2 pi i) int_{a_j}^{b_j} h R_+^{1/2}` for each cut.
    pub fn cut_masses(&self) -> &[C64] {
        &self.cut_masses
    }

    pub fn total_mass(&self) -> C64 {
        self.cut_masses.iter().sum()
    }

    fn raw_density(&self, j: usize, x: f64) -> C64 {
        let half = self.branch.cut_half(j);
        let s = self.branch.cut_mid(j) + half * x;
        let unit = half / half.norm();
        self.h.eval(s) * self.branch.boundary_value(j, x, Side::Plus) * unit / C64::new(0.0, 2.0 * PI)
    }

    /// Density at a point of the straight segment of cut `j`.
    pub fn density_at(&self, j: usize, s: C64) -> Result<DensitySample> {
        if j >= self.ep.q() {
            return Err(EqmError::OutOfRange { index: j, limit: self.ep.q() });
        }
        let (a, b) = (self.ep.a()[j], self.ep.b()[j]);
        if (s - a).norm() < 1e-8 || (s - b).norm() < 1e-8 {
            return Err(EqmError::InvalidEndpoints("density sample inside the endpoint exclusion zone".into()));
        }
        match self.branch.on_segment(s) {
            Some((k, x)) if k == j => {
                let v = self.raw_density(j, x) * self.orientation[j];
                Ok(DensitySample { at: s, rho: v.re, im_residue: v.im })
            }
            _ => Err(EqmError::NotOnCut(s)),
        }
    }

    /// Density along a traced cut polyline (from `a_j` to `b_j`), continuing
    /// `R^{1/2}` along the samples. The sign is fixed by the first sample.
    pub fn density_along(&self, line: &[C64]) -> Vec<DensitySample> {
        let mut out = Vec::new();
        if line.len() < 3 {
            return out;
        }
        let (first, last) = (line[0], line[line.len() - 1]);
        let mut prev: Option<C64> = None;
        let mut sign = 0.0;
        for k in 1..line.len() - 1 {
            let s = line[k];
            if (s - first).norm() < 1e-8 || (s - last).norm() < 1e-8 {
                continue;
            }
            let mut r = self.branch.eval_straight(s);
            if let Some(p) = prev {
                if (r - p).norm() > (r + p).norm() {
                    r = -r;
                }
            }
            prev = Some(r);
            let tan = line[k + 1] - line[k - 1];
            let v = self.h.eval(s) * r * (tan / tan.norm()) / C64::new(0.0, 2.0 * PI);
            if sign == 0.0 {
                sign = if v.re < 0.0 { -1.0 } else { 1.0 };
            }
            out.push(DensitySample { at: s, rho: sign * v.re, im_residue: sign * v.im });
        }
        out
    }

    /// Total mass from `-(1/4 pi i) sum_j oint h R^{1/2}` over small
    /// counterclockwise ellipses around each cut.
    pub fn mass_contour(&self) -> Result<C64> {
        let pts = self.ep.points();
        let mut total = C64::new(0.0, 0.0);
        for j in 0..self.ep.q() {
            let (m, d) = (self.branch.cut_mid(j), self.branch.cut_half(j));
            let mut rho: f64 = 0.25;
            let ellipse = |rho: f64, th: f64| m + d * C64::new(rho, th).cosh();
            // Shrink until no other cut is touched.
            'shrink: for _ in 0..40 {
                let inside = |z: C64| {
                    let u = (z - m) / d;
                    (u - 1.0).norm() + (u + 1.0).norm() < 2.0 * rho.cosh()
                };
                let mut bad = pts
                    .iter()
                    .enumerate()
                    .any(|(i, p)| i / 2 != j && inside(*p));
                if !bad {
                    let n = 256;
                    for k in 0..n {
                        let z0 = ellipse(rho, 2.0 * PI * k as f64 / n as f64);
                        let z1 = ellipse(rho, 2.0 * PI * (k + 1) as f64 / n as f64);
                        if self.branch.segment_crosses_cut(z0, z1).is_some() {
                            bad = true;
                            break;
                        }
                    }
                }
                if !bad {
                    break 'shrink;
                }
                rho *= 0.5;
            }
            let mut prev = C64::new(f64::INFINITY, 0.0);
            let mut n = 64;
            let val = loop {
                let mut s = C64::new(0.0, 0.0);
                for k in 0..n {
                    let th = 2.0 * PI * k as f64 / n as f64;
                    let z = ellipse(rho, th);
                    let dz = d * C64::new(rho, th).sinh() * C64::new(0.0, 1.0);
                    s += self.h.eval(z) * self.branch.eval_straight(z) * dz;
                }
                s *= 2.0 * PI / n as f64;
                if (s - prev).norm() <= 1e-13 * s.norm().max(1.0) {
                    break s;
                }
                if n >= 1 << 16 {
                    return Err(EqmError::QuadratureStalled { difference: (s - prev).norm() });
                }
                prev = s;
                n *= 2;
            };
            total += val;
        }
        Ok(-total / C64::new(0.0, 4.0 * PI))
    }

    pub fn quad_tol(&self) -> f64 {
        self.quad_tol
    }
}

/// `g(z) = (V(z) + ell + eta(z)) / 2`.
#[derive(Clone, Debug)]
pub struct GFunction {
    eta: EtaEvaluator,
    ell: C64,
}

impl GFunction {
    pub fn new(pot: &Potential, ep: &EndpointSet) -> Result<Self> {
        let eta = EtaEvaluator::new(pot, ep)?;
        let ell = lagrange_from(&eta)?;
        Ok(Self { eta, ell })
    }

    pub fn ell(&self) -> C64 {
        self.ell
    }

    pub fn eta(&self) -> &EtaEvaluator {
        &self.eta
    }

    /// Only the real part is canonical away from the positive real direction.
    pub fn value(&self, z: C64) -> Result<C64> {
        let pot = self.eta.potential();
        Ok((pot.eval_v(z) + self.ell + self.eta.eta(z, &PathHint::Auto)?) * 0.5)
    }
}

pub fn g_value(gf: &GFunction, z: C64) -> Result<C64> {
    gf.value(z)
}

/// `g(z) - log z` from the resolvent moments.
fn g_tail(m: &[C64], z: C64) -> C64 {
    let w = z.inv();
    let mut s = C64::new(0.0, 0.0);
    let mut wn = C64::new(1.0, 0.0);
    for (n, mn) in m.iter().enumerate().skip(1) {
        wn *= w;
        s -= mn * wn / n as f64;
    }
    s
}

fn lagrange_from(eta: &EtaEvaluator) -> Result<C64> {
    let (pot, ep, h) = (eta.potential(), eta.endpoints(), eta.h());
    let m = resolvent_series(ep, h, 80);
    let r0 = 4.0 * critical_scale(ep, h);
    let at = |r: f64| -> Result<C64> {
        let z = C64::new(r, 0.0);
        Ok((z.ln() + g_tail(&m, z)) * 2.0 - pot.eval_v(z) - eta.eta(z, &PathHint::Auto)?)
    };
    let (l1, l2) = (at(r0)?, at(2.0 * r0)?);
    let gap = (l1 - l2).norm();
    if gap > 1e-8 * l1.norm().max(1.0) {
        return Err(EqmError::LagrangeExtraction(gap));
    }
    Ok(l1)
}

/// `ell = lim (2 log z - V(z) - eta(z))` along the positive real axis.
pub fn lagrange_multiplier(pot: &Potential, ep: &EndpointSet) -> Result<C64> {
    lagrange_from(&EtaEvaluator::new(pot, ep)?)
}

/// Outcome of the Euler–Lagrange checks with the logarithmic potential
/// computed by direct quadrature against the density.
#[derive(Clone, Debug, Serialize)]
pub struct ElReport {
    /// `-Re ell / 2`, the constant the effective potential should take on the support.
    pub constant: f64,
    pub max_equality_error: f64,
    pub min_inequality_margin: f64,
    pub equality_ok: bool,
    pub inequality_ok: bool,
}

/// `U(z) = -int log|z - s| d nu(s)` over straight cuts, splitting at `z`
/// when it lies on a cut.
pub fn log_potential(em: &EquilibriumMeasure, z: C64) -> Result<f64> {
    let mut total = 0.0;
    for j in 0..em.ep.q() {
        let (m, d) = (em.branch.cut_mid(j), em.branch.cut_half(j));
        let weight = |th: f64| -> f64 {
            let x = -th.cos();
            (em.raw_density(j, x) * em.orientation[j]).re * d.norm() * th.sin()
        };
        let kernel = |th: f64| (z - (m + d * (-th.cos()))).norm().ln();
        let onto = em.branch.on_segment(z).filter(|(k, _)| *k == j);
        let part = match onto {
            None => quad::adaptive(|th| C64::new(kernel(th) * weight(th), 0.0), 0.0, PI, 1e-13)?.re,
            Some((_, xz)) => {
                let tz = (-xz).clamp(-1.0, 1.0).acos();
                // theta = tz -+ span u^4 clusters nodes at the log singularity.
                let mut acc = 0.0;
                for (lo, span) in [(tz, -tz), (tz, PI - tz)] {
                    if span.abs() < 1e-15 {
                        continue;
                    }
                    let v = quad::adaptive(
                        |u| {
                            let delta = span * u.powi(4);
                            let th = lo + delta;
                            // |z - s| written through delta so it never rounds to zero.
                            let dist = 2.0 * d.norm() * ((lo + 0.5 * delta).sin() * (0.5 * delta).sin()).abs();
                            C64::new(dist.ln() * weight(th) * 4.0 * span.abs() * u.powi(3), 0.0)
                        },
                        0.0,
                        1.0,
                        1e-13,
                    )?;
                    acc += v.re;
                }
                acc
            }
        };
        total -= part;
    }
    Ok(total)
}

/// Checks `U + Re V / 2 = -Re ell / 2` on the cut probes and `>` on the
/// complementary probes.
pub fn verify_euler_lagrange(
    em: &EquilibriumMeasure,
    gf: &GFunction,
    cut_probes: &[C64],
    outside_probes: &[C64],
) -> Result<ElReport> {
    let constant = -gf.ell().re / 2.0;
    let effective = |z: C64| -> Result<f64> { Ok(log_potential(em, z)? + 0.5 * em.pot.eval_v(z).re) };
    let mut max_err: f64 = 0.0;
    for &z in cut_probes {
        max_err = max_err.max((effective(z)? - constant).abs());
    }
    let mut min_margin = f64::INFINITY;
    for &z in outside_probes {
        min_margin = min_margin.min(effective(z)? - constant);
    }
    Ok(ElReport {
        constant,
        max_equality_error: max_err,
        min_inequality_margin: min_margin,
        equality_ok: max_err <= 1e-7,
        inequality_ok: outside_probes.is_empty() || min_margin > 0.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn semicircle() -> (Potential, EndpointSet) {
        (Potential::gaussian(), EndpointSet::new(vec![c(-2.0, 0.0)], vec![c(2.0, 0.0)]).unwrap())
    }

    #[test]
    fn h_examples() {
        let (pot, ep) = semicircle();
        let h = compute_h(&pot, &ep).unwrap();
        assert_eq!(h.degree(), 0);
        assert!((h.coeffs[0] - c(1.0, 0.0)).norm() < 1e-15);

        let (sigma, b) = (c(0.7, -0.3), c(1.3, 0.2));
        let ep = EndpointSet::new(vec![-b], vec![b]).unwrap();
        let h = compute_h(&Potential::quartic(sigma), &ep).unwrap();
        let want = [sigma + b * b / 2.0, c(0.0, 0.0), c(1.0, 0.0)];
        for (g, w) in h.coeffs.iter().zip(want) {
            assert!((g - w).norm() < 1e-14);
        }

        let ep = EndpointSet::new(vec![c(-5f64.sqrt(), 0.0), c(1.0, 0.0)], vec![c(-1.0, 0.0), c(5f64.sqrt(), 0.0)]).unwrap();
        let h = compute_h(&Potential::quartic(c(-3.0, 0.0)), &ep).unwrap();
        assert_eq!(h.degree(), 1);
        assert!(h.coeffs[0].norm() < 1e-14);
    }

    #[test]
    fn resolvent_examples() {
        let (pot, ep) = semicircle();
        let h = compute_h(&pot, &ep).unwrap();
        let w = resolvent(&pot, &ep, &h, c(3.0, 0.0)).unwrap();
        assert!((w - c((3.0 - 5f64.sqrt()) / 2.0, 0.0)).norm() < 1e-15);
        let z = c(1e6, 0.0);
        let w = resolvent(&pot, &ep, &h, z).unwrap();
        assert!((w - z.inv()).norm() / z.inv().norm() < 1e-10);
        assert!(matches!(resolvent(&pot, &ep, &h, c(0.5, 0.0)), Err(EqmError::OnCut)));
    }

    #[test]
    fn semicircle_density_and_mass() {
        let (pot, ep) = semicircle();
        let em = EquilibriumMeasure::new(&pot, &ep, 1e-13).unwrap();
        let d = em.density_at(0, c(0.0, 0.0)).unwrap();
        assert!((d.rho - 1.0 / PI).abs() < 1e-14);
        assert!(d.im_residue.abs() < 1e-15);
        assert!((em.total_mass() - c(1.0, 0.0)).norm() < 1e-13);
        assert!((em.mass_contour().unwrap() - c(1.0, 0.0)).norm() < 1e-12);
        let near = em.density_at(0, c(2.0 - 1e-7, 0.0)).unwrap();
        assert!(near.rho >= 0.0 && near.rho < 1e-3);
        assert!(em.density_at(0, c(2.0 - 1e-9, 0.0)).is_err());
    }

    #[test]
    fn semicircle_g_and_ell() {
        let (pot, ep) = semicircle();
        let gf = GFunction::new(&pot, &ep).unwrap();
        assert!((gf.ell() - c(-1.0, 0.0)).norm() < 1e-10);
        assert!((gf.value(c(2.0, 0.0)).unwrap() - c(0.5, 0.0)).norm() < 1e-10);
        assert!((gf.value(c(0.0, 1e-12)).unwrap().re + 0.5).abs() < 1e-10);
        let z = c(1e3, 0.0);
        assert!((gf.value(z).unwrap() - z.ln()).norm() < 1e-2);
    }

    #[test]
    fn semicircle_euler_lagrange_and_negative_control() {
        let (pot, ep) = semicircle();
        let em = EquilibriumMeasure::new(&pot, &ep, 1e-13).unwrap();
        let gf = GFunction::new(&pot, &ep).unwrap();
        let cut: Vec<C64> = [-1.9, -1.0, -0.3, 0.0, 0.77, 1.5, 1.99].iter().map(|&x| c(x, 0.0)).collect();
        let out: Vec<C64> = [2.5, 4.0, 7.0, 10.0].iter().map(|&x| c(x, 0.0)).collect();
        let rep = verify_euler_lagrange(&em, &gf, &cut, &out).unwrap();
        assert!(rep.max_equality_error < 1e-9, "{rep:?}");
        assert!(rep.inequality_ok && rep.equality_ok);

        // Density of the wrong support against the true constant.
        let wrong = EndpointSet::new(vec![c(-2.5, 0.0)], vec![c(2.5, 0.0)]).unwrap();
        let em = EquilibriumMeasure::new(&pot, &wrong, 1e-13).unwrap();
        assert!(GFunction::new(&pot, &wrong).is_err());
        let cut: Vec<C64> = [-2.0, 0.0, 1.0].iter().map(|&x| c(x, 0.0)).collect();
        let rep = verify_euler_lagrange(&em, &gf, &cut, &[]).unwrap();
        assert!(rep.max_equality_error > 1e-3);
    }
}
