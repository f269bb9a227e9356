//! The natural parameter `eta(z) = -int_{b_q}^z h R^{1/2} ds`.
//!
//! Values are computed on the straight-cut branch by integrating from the
//! nearest endpoint along a path that avoids every straight cut segment; the
//! endpoints themselves carry stored anchor values. When traced cut
//! polylines are installed, points inside a lens take the other sheet, which
//! negates the real part.

use std::f64::consts::PI;

use crate::branch::{segment_distance, BranchedSqrtR, EndpointSet};
use crate::error::{EqmError, Result};
use crate::measure::{compute_h, HPolynomial};
use crate::poly::{horner, Potential, C64};
use crate::quad;

/// `int_alpha^beta f` where both ends are square-root branch points.
pub(crate) fn integrate_both_singular<F: Fn(C64) -> C64>(f: &F, alpha: C64, beta: C64, tol: f64) -> Result<C64> {
    let d = beta - alpha;
    quad::adaptive(
        |th| {
            let s = alpha + d * ((1.0 - th.cos()) * 0.5);
            f(s) * d * (th.sin() * 0.5)
        },
        0.0,
        PI,
        tol,
    )
}

/// `int_alpha^w f` where only `alpha` is a branch point.
pub(crate) fn integrate_from_singular<F: Fn(C64) -> C64>(f: &F, alpha: C64, w: C64, tol: f64) -> Result<C64> {
    let d = w - alpha;
    quad::adaptive(|u| f(alpha + d * (u * u)) * d * (2.0 * u), 0.0, 1.0, tol)
}

/// `int_z0^z1 f` along the segment.
pub(crate) fn integrate_regular<F: Fn(C64) -> C64>(f: &F, z0: C64, z1: C64, tol: f64) -> Result<C64> {
    let d = z1 - z0;
    quad::adaptive(|u| f(z0 + d * u) * d, 0.0, 1.0, tol)
}

/// Path selection for [`EtaEvaluator::eta`].
#[derive(Clone, Debug, Default)]
pub enum PathHint {
    /// Nearest endpoint, straight or with one detour waypoint.
    #[default]
    Auto,
    /// Explicit waypoints from `b_q` to the target.
    Via(Vec<C64>),
}

#[derive(Clone, Debug)]
pub struct EtaEvaluator {
    pot: Potential,
    ep: EndpointSet,
    h: HPolynomial,
    branch: BranchedSqrtR,
    points: Vec<C64>,
    anchors: Vec<C64>,
    base: usize,
    quad_tol: f64,
}

impl EtaEvaluator {
    pub fn new(pot: &Potential, ep: &EndpointSet) -> Result<Self> {
        Self::with_tolerance(pot, ep, 1e-13)
    }

    pub fn with_tolerance(pot: &Potential, ep: &EndpointSet, quad_tol: f64) -> Result<Self> {
        let h = compute_h(pot, ep)?;
        let branch = BranchedSqrtR::new(ep);
        let points = ep.points();
        let base = 2 * ep.q() - 1;
        let mut ev = Self {
            pot: pot.clone(),
            ep: ep.clone(),
            h,
            branch,
            points,
            anchors: Vec::new(),
            base,
            quad_tol,
        };
        ev.anchors = ev.compute_anchors()?;
        Ok(ev)
    }

    /// Same evaluator with traced cut polylines installed (`lines[k]` runs
    /// from `a_k` to `b_k`).
    pub fn with_cut_polylines(&self, lines: &[Option<Vec<C64>>]) -> Self {
        let mut ev = self.clone();
        ev.branch = BranchedSqrtR::new(&self.ep).with_polylines(lines);
        ev
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

    pub fn branch(&self) -> &BranchedSqrtR {
        &self.branch
    }

    /// `h R^{1/2}` on the straight branch.
    pub fn integrand(&self, s: C64) -> C64 {
        horner(&self.h.coeffs, s) * self.branch.eval_straight(s)
    }

    /// Stored `eta` at `a_1, b_1, a_2, ...` (`points()` order).
    pub fn anchors(&self) -> &[C64] {
        &self.anchors
    }

    pub fn base_point(&self) -> C64 {
        self.points[self.base]
    }

    fn clear(&self, p0: C64, p1: C64) -> bool {
        self.branch.segment_crosses_cut(p0, p1).is_none()
    }

    /// Candidate detour points: off each cut's midpoint on both sides and on
    /// a ring outside everything.
    fn waypoints(&self) -> Vec<C64> {
        let mut w = Vec::new();
        for k in 0..self.ep.q() {
            let m = self.branch.cut_mid(k);
            let d = self.branch.cut_half(k);
            for s in [0.6, 1.2] {
                w.push(m + d * C64::new(0.0, s));
                w.push(m - d * C64::new(0.0, s));
            }
        }
        let r = 2.0 * self.ep.scale();
        for k in 0..16 {
            w.push(C64::from_polar(r, 2.0 * PI * (k as f64 + 0.5) / 16.0));
        }
        w
    }

    /// Hops that graze another branch point make the quadrature stall.
    fn hop_ok(&self, p0: C64, p1: C64) -> bool {
        let len = (p1 - p0).norm();
        self.clear(p0, p1)
            && self
                .points
                .iter()
                .filter(|p| **p != p0 && **p != p1)
                .all(|p| segment_distance(*p, p0, p1).0 >= 0.05 * len)
    }

    fn compute_anchors(&self) -> Result<Vec<C64>> {
        let n = self.points.len();
        let f = |s: C64| self.integrand(s);
        let mut eta: Vec<Option<C64>> = vec![None; n];
        eta[self.base] = Some(C64::new(0.0, 0.0));
        let way = self.waypoints();
        let mut failure = None;
        // Direct hops first, then single-waypoint hops, from any known anchor.
        for use_waypoints in [false, true] {
            loop {
                let mut progress = false;
                for j in 0..n {
                    if eta[j].is_some() {
                        continue;
                    }
                    let mut known: Vec<usize> = (0..n).filter(|&i| eta[i].is_some()).collect();
                    known.sort_by(|&x, &y| {
                        let dx = (self.points[x] - self.points[j]).norm();
                        let dy = (self.points[y] - self.points[j]).norm();
                        dx.total_cmp(&dy)
                    });
                    'known: for i in known {
                        let (pi, pj) = (self.points[i], self.points[j]);
                        let attempts: Vec<Result<C64>> = if !use_waypoints {
                            if !self.hop_ok(pi, pj) {
                                continue;
                            }
                            vec![integrate_both_singular(&f, pi, pj, self.quad_tol)]
                        } else {
                            let mut via: Vec<C64> =
                                way.iter().copied().filter(|&w| self.hop_ok(pi, w) && self.hop_ok(w, pj)).collect();
                            via.sort_by(|x, y| {
                                ((x - pi).norm() + (x - pj).norm()).total_cmp(&((y - pi).norm() + (y - pj).norm()))
                            });
                            via.into_iter()
                                .take(4)
                                .map(|w| {
                                    Ok(integrate_from_singular(&f, pi, w, self.quad_tol)?
                                        - integrate_from_singular(&f, pj, w, self.quad_tol)?)
                                })
                                .collect()
                        };
                        for val in attempts {
                            match val {
                                Ok(v) => {
                                    eta[j] = Some(eta[i].unwrap() - v);
                                    progress = true;
                                    break 'known;
                                }
                                Err(e) => failure = Some(e),
                            }
                        }
                    }
                }
                if !progress {
                    break;
                }
            }
        }
        if let (Some(e), true) = (failure, eta.iter().any(Option::is_none)) {
            return Err(e);
        }
        eta.into_iter()
            .enumerate()
            .map(|(j, v)| v.ok_or(EqmError::NoPath(self.points[j])))
            .collect()
    }

    /// `eta` on the straight branch. Branch points return their anchors.
    pub fn eta_straight(&self, z: C64, hint: &PathHint) -> Result<C64> {
        if let Some(j) = self.points.iter().position(|p| *p == z) {
            return Ok(self.anchors[j]);
        }
        let f = |s: C64| self.integrand(s);
        match hint {
            PathHint::Via(way) => {
                let mut prev = self.base_point();
                let mut acc = C64::new(0.0, 0.0);
                for (k, &w) in way.iter().chain(std::iter::once(&z)).enumerate() {
                    if !self.clear(prev, w) {
                        return Err(EqmError::NoPath(z));
                    }
                    acc -= if k == 0 {
                        integrate_from_singular(&f, prev, w, self.quad_tol)?
                    } else {
                        integrate_regular(&f, prev, w, self.quad_tol)?
                    };
                    prev = w;
                }
                Ok(acc)
            }
            PathHint::Auto => {
                let mut order: Vec<usize> = (0..self.points.len()).collect();
                order.sort_by(|&x, &y| (self.points[x] - z).norm().total_cmp(&(self.points[y] - z).norm()));
                for &j in &order {
                    let p = self.points[j];
                    if self.clear(p, z) {
                        return Ok(self.anchors[j] - integrate_from_singular(&f, p, z, self.quad_tol)?);
                    }
                }
                let way = self.waypoints();
                let mut best: Option<(f64, usize, C64)> = None;
                for &j in &order {
                    let p = self.points[j];
                    for &w in &way {
                        if self.clear(p, w) && self.clear(w, z) {
                            let len = (w - p).norm() + (z - w).norm();
                            if best.map_or(true, |b| len < b.0) {
                                best = Some((len, j, w));
                            }
                        }
                    }
                }
                let (_, j, w) = best.ok_or(EqmError::NoPath(z))?;
                let p = self.points[j];
                Ok(self.anchors[j]
                    - integrate_from_singular(&f, p, w, self.quad_tol)?
                    - integrate_regular(&f, w, z, self.quad_tol)?)
            }
        }
    }

    /// `eta` on the branch defined by the installed cuts. Only the real part
    /// is canonical; imaginary parts depend on the homotopy class of the path.
    pub fn eta(&self, z: C64, hint: &PathHint) -> Result<C64> {
        let v = self.eta_straight(z, hint)?;
        Ok(if self.branch.lens_sign(z) < 0.0 { -v } else { v })
    }

    pub fn re_eta(&self, z: C64) -> Result<f64> {
        Ok(self.eta(z, &PathHint::Auto)?.re)
    }

    /// `eta'(z) = -h R^{1/2}` on the installed branch.
    pub fn eta_prime(&self, z: C64) -> C64 {
        -self.integrand(z) * self.branch.lens_sign(z)
    }
}
