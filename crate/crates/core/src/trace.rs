//! Trajectories of `Q dz^2 = h^2 R dz^2 / 4` along level sets of `Re eta`.
//!
//! A trajectory follows the unit-speed flow `dz/ds = i conj(F) / |F|` with
//! `F = h R^{1/2} = -eta'`, using a midpoint step followed by a transverse
//! Newton correction back onto the level. `R^{1/2}` is continued along the
//! path by sign continuity, and `eta` is accumulated by Gauss-Legendre
//! quadrature over each step, so the tracer never needs a global branch.

use std::f64::consts::PI;

use serde::Serialize;

use crate::error::{EqmError, Result};
use crate::eta::{integrate_regular, EtaEvaluator, PathHint};
use crate::poly::{cluster_roots, C64};
use crate::quad;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TraceSettings {
    /// Level adherence and the on-graph test for zeros of `h`.
    pub traj_tol: f64,
    /// Snap radius relative to the critical scale.
    pub snap_rel: f64,
    pub max_steps: usize,
    /// Smallest admissible step relative to the critical scale.
    pub min_step_rel: f64,
}

impl Default for TraceSettings {
    fn default() -> Self {
        Self { traj_tol: 1e-8, snap_rel: 1e-6, max_steps: 200_000, min_step_rel: 1e-12 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CritKind {
    Branch,
    Zero,
}

/// A finite critical point of `Q dz^2`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CritPoint {
    pub z: C64,
    pub kind: CritKind,
    /// Multiplicity as a zero of `h` (1 for branch points).
    pub multiplicity: usize,
    /// Order as a zero of `Q`.
    pub order: usize,
    pub re_eta: f64,
    pub on_level: bool,
    /// Radius inside which an arriving trajectory snaps.
    pub home_radius: f64,
    /// Launch offset.
    pub launch_radius: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TrajEnd {
    /// Index into [`Tracer::crit`].
    Crit(usize),
    /// Asymptotic angle index `k`, direction `pi/4p + k pi/2p`.
    Infinity(usize),
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Trajectory {
    pub points: Vec<C64>,
    pub start: TrajEnd,
    pub end: TrajEnd,
    pub length: f64,
    pub level: f64,
    /// Largest `|Re eta - level| / (1 + |eta|)` seen at a sample.
    pub max_level_error: f64,
    /// Direction leaving the start (chord to the projected launch point).
    pub departure: Option<f64>,
    /// Direction from the end node to the last sample before it, or the
    /// final tangent for escapes.
    pub arrival: f64,
}

#[derive(Clone, Copy, Debug)]
struct State {
    z: C64,
    r: C64,
    eta: C64,
    dir: C64,
}

fn align(v: C64, reference: C64) -> C64 {
    if (v * reference.conj()).re >= 0.0 { v } else { -v }
}

fn unit(v: C64) -> C64 {
    v / v.norm()
}

/// Level-set tracer bound to one evaluator.
pub struct Tracer<'a> {
    ev: &'a EtaEvaluator,
    crit: Vec<CritPoint>,
    settings: TraceSettings,
    scale: f64,
    r_escape: f64,
    p: usize,
}

impl<'a> Tracer<'a> {
    pub fn new(ev: &'a EtaEvaluator, settings: TraceSettings) -> Result<Self> {
        let ep = ev.endpoints();
        let mut crit: Vec<CritPoint> = Vec::new();
        for (i, &z) in ep.points().iter().enumerate() {
            crit.push(CritPoint {
                z,
                kind: CritKind::Branch,
                multiplicity: 1,
                order: 1,
                re_eta: ev.anchors()[i].re,
                on_level: true,
                home_radius: 0.0,
                launch_radius: 0.0,
            });
        }
        for (z, m) in cluster_roots(&ev.h().zeros, 1e-7) {
            let re_eta = ev.eta_straight(z, &PathHint::Auto)?.re;
            crit.push(CritPoint {
                z,
                kind: CritKind::Zero,
                multiplicity: m,
                order: 2 * m,
                re_eta,
                on_level: re_eta.abs() <= settings.traj_tol,
                home_radius: 0.0,
                launch_radius: 0.0,
            });
        }
        let scale = crit.iter().map(|c| c.z.norm()).fold(1.0, f64::max);
        let mut sep = f64::INFINITY;
        for i in 0..crit.len() {
            let mut own = f64::INFINITY;
            for j in 0..crit.len() {
                if i != j {
                    own = own.min((crit[i].z - crit[j].z).norm());
                }
            }
            sep = sep.min(own);
            crit[i].launch_radius = (1e-4 * scale).min(0.005 * own);
        }
        let home = (settings.snap_rel * scale).max(0.05 * sep.min(scale));
        for c in &mut crit {
            c.home_radius = home;
        }
        let r_escape = 10.0 * (1.0 + crit.iter().map(|c| c.z.norm()).fold(0.0, f64::max));
        Ok(Self { ev, crit, settings, scale, r_escape, p: ev.potential().p() })
    }

    pub fn crit(&self) -> &[CritPoint] {
        &self.crit
    }

    pub fn evaluator(&self) -> &EtaEvaluator {
        self.ev
    }

    pub fn settings(&self) -> &TraceSettings {
        &self.settings
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn r_escape(&self) -> f64 {
        self.r_escape
    }

    /// Number of asymptotic directions, `4p`.
    pub fn n_angles(&self) -> usize {
        4 * self.p
    }

    pub fn asymptotic_angle(&self, k: usize) -> f64 {
        let p = self.p as f64;
        PI / (4.0 * p) + k as f64 * PI / (2.0 * p)
    }

    /// Nearest asymptotic angle index for direction `theta`.
    pub fn angle_index(&self, theta: f64) -> usize {
        let p = self.p as f64;
        let k = ((theta - PI / (4.0 * p)) / (PI / (2.0 * p))).round() as i64;
        k.rem_euclid(4 * self.p as i64) as usize
    }

    fn f(&self, z: C64, r: C64) -> C64 {
        self.ev.h().eval(z) * r
    }

    fn flow(&self, z: C64, r: C64) -> C64 {
        unit(C64::new(0.0, 1.0) * self.f(z, r).conj())
    }

    fn dist_to_crit(&self, z: C64) -> f64 {
        self.crit.iter().map(|c| (c.z - z).norm()).fold(f64::INFINITY, f64::min)
    }

    /// Local departure directions: 3 at a branch point, `2m + 2` at a zero of
    /// multiplicity `m`.
    pub fn launch_angles(&self, i: usize) -> Vec<f64> {
        let c = &self.crit[i];
        let (kappa, n) = match c.kind {
            CritKind::Branch => {
                // F ~ h(a) sqrt(R'(a)) (z - a)^{1/2}
                let others: C64 = self
                    .crit
                    .iter()
                    .enumerate()
                    .filter(|(j, o)| *j != i && o.kind == CritKind::Branch)
                    .map(|(_, o)| c.z - o.z)
                    .product();
                (self.ev.h().eval(c.z) * others.sqrt(), 1.5)
            }
            CritKind::Zero => {
                let others: C64 = self
                    .crit
                    .iter()
                    .enumerate()
                    .filter(|(j, o)| *j != i && o.kind == CritKind::Zero)
                    .map(|(_, o)| (c.z - o.z).powu(o.multiplicity as u32))
                    .product();
                let r = self.ev.branch().eval_straight(c.z);
                (others * r, (c.multiplicity + 1) as f64)
            }
        };
        let count = match c.kind {
            CritKind::Branch => 3,
            CritKind::Zero => 2 * c.multiplicity + 2,
        };
        (0..count)
            .map(|k| ((PI / 2.0 + k as f64 * PI - kappa.arg()) / n).rem_euclid(2.0 * PI))
            .collect()
    }

    fn seg_integral(&self, z0: C64, r0: C64, z1: C64, r1: C64) -> C64 {
        let rule = quad::rule(1);
        let half = (z1 - z0) * 0.5;
        let mut acc = C64::new(0.0, 0.0);
        for (x, w) in rule.nodes.iter().zip(&rule.weights) {
            let s = z0 + half * (x + 1.0);
            let rs = align(self.ev.branch().eval_straight(s), if *x < 0.0 { r0 } else { r1 });
            acc += self.f(s, rs) * *w;
        }
        acc * half
    }

    /// Newton corrections transverse to the flow, each capped at `cap`.
    fn project(&self, mut z: C64, mut r: C64, mut eta: C64, level: f64, cap: f64) -> (C64, C64, C64) {
        for _ in 0..3 {
            let e = eta.re - level;
            if e.abs() <= 1e-3 * self.settings.traj_tol * (1.0 + eta.norm()) {
                break;
            }
            let f = self.f(z, r);
            let mut dz = f.conj() * (e / f.norm_sqr());
            if dz.norm() > cap {
                dz *= cap / dz.norm();
            }
            let z2 = z + dz;
            let r2 = align(self.ev.branch().eval_straight(z2), r);
            eta -= self.seg_integral(z, r, z2, r2);
            z = z2;
            r = r2;
        }
        (z, r, eta)
    }

    fn step(&self, st: &State, h: f64, level: f64) -> State {
        let br = self.ev.branch();
        let d1 = align(self.flow(st.z, st.r), st.dir);
        let zm = st.z + d1 * (0.5 * h);
        let rm = align(br.eval_straight(zm), st.r);
        let d2 = align(self.flow(zm, rm), d1);
        let z = st.z + d2 * h;
        let r = align(br.eval_straight(z), rm);
        let eta = st.eta - self.seg_integral(st.z, st.r, z, r);
        let (z, r, eta) = self.project(z, r, eta, level, 0.5 * h);
        State { z, r, eta, dir: d2 }
    }

    /// Traces from critical point `i` leaving in direction `theta`.
    pub fn trace_from(&self, i: usize, theta: f64) -> Result<Trajectory> {
        let c = &self.crit[i];
        let br = self.ev.branch();
        let r0 = c.launch_radius;
        let z0 = c.z + C64::from_polar(r0, theta);
        let tol = 1e-14;
        let (r, eta0) = match c.kind {
            CritKind::Branch => {
                let others: Vec<C64> = self
                    .crit
                    .iter()
                    .enumerate()
                    .filter(|(j, o)| *j != i && o.kind == CritKind::Branch)
                    .map(|(_, o)| o.z)
                    .collect();
                let g = |s: C64| others.iter().map(|o| s - o).product::<C64>();
                let d = z0 - c.z;
                let w = d.sqrt();
                let g0 = g(z0).sqrt();
                let integral = quad::adaptive(
                    |u| {
                        let s = c.z + d * (u * u);
                        self.ev.h().eval(s) * w * u * align(g(s).sqrt(), g0) * d * (2.0 * u)
                    },
                    0.0,
                    1.0,
                    tol,
                )?;
                (w * g0, self.ev.anchors()[i] - integral)
            }
            CritKind::Zero => {
                let rb = br.eval_straight(c.z);
                let f = |s: C64| self.f(s, align(br.eval_straight(s), rb));
                let integral = integrate_regular(&f, c.z, z0, tol)?;
                let eta_node = self.ev.eta_straight(c.z, &PathHint::Auto)?;
                (align(br.eval_straight(z0), rb), eta_node - integral)
            }
        };
        let level = match c.kind {
            CritKind::Branch => self.ev.anchors()[i].re,
            CritKind::Zero => c.re_eta,
        };
        let (z0, r, eta0) = self.project(z0, r, eta0, level, 0.1 * r0);
        let st = State { z: z0, r, eta: eta0, dir: C64::from_polar(1.0, theta) };
        self.run(st, level, vec![c.z, z0], TrajEnd::Crit(i), r0, false)
    }

    /// Traces the level-zero curve entering from asymptotic angle `k`, if
    /// `Re eta` changes sign across the sector around it on the escape
    /// circle.
    pub fn trace_from_infinity(&self, k: usize) -> Result<Option<Trajectory>> {
        let half = 0.9 * PI / (4.0 * self.p as f64);
        let center = self.asymptotic_angle(k);
        let re = |th: f64| -> Result<f64> {
            Ok(self.ev.eta_straight(C64::from_polar(self.r_escape, th), &PathHint::Auto)?.re)
        };
        let (mut lo, mut hi) = (center - half, center + half);
        let (mut flo, fhi) = (re(lo)?, re(hi)?);
        if flo.signum() == fhi.signum() {
            return Ok(None);
        }
        for _ in 0..64 {
            let mid = 0.5 * (lo + hi);
            let fm = re(mid)?;
            if fm == 0.0 {
                lo = mid;
                hi = mid;
                break;
            }
            if fm.signum() == flo.signum() {
                lo = mid;
                flo = fm;
            } else {
                hi = mid;
            }
            if hi - lo < 1e-15 {
                break;
            }
        }
        let z0 = C64::from_polar(self.r_escape, 0.5 * (lo + hi));
        let r = self.ev.branch().eval_straight(z0);
        let eta = self.ev.eta_straight(z0, &PathHint::Auto)?;
        let mut dir = self.flow(z0, r);
        if (dir * z0.conj()).re > 0.0 {
            dir = -dir;
        }
        let (z0, r, eta) = self.project(z0, r, eta, 0.0, 1e-3 * self.r_escape);
        let st = State { z: z0, r, eta, dir };
        self.run(st, 0.0, vec![z0], TrajEnd::Infinity(k), 0.0, true).map(Some)
    }

    fn run(
        &self,
        mut st: State,
        level: f64,
        mut points: Vec<C64>,
        start: TrajEnd,
        launch: f64,
        from_infinity: bool,
    ) -> Result<Trajectory> {
        let min_step = self.settings.min_step_rel * self.scale;
        let snap = self.settings.snap_rel * self.scale;
        let start_node = match start {
            TrajEnd::Crit(i) => Some(i),
            TrajEnd::Infinity(_) => None,
        };
        let mut left_home = start_node.is_none();
        let mut length = points.windows(2).map(|w| (w[1] - w[0]).norm()).sum::<f64>();
        let mut max_err = (st.eta.re - level).abs() / (1.0 + st.eta.norm());
        let departure = start_node.map(|s| (points[1] - self.crit[s].z).arg());
        for _ in 0..self.settings.max_steps {
            let h = (0.2 * self.dist_to_crit(st.z)).min(0.05 * (1.0 + st.z.norm()));
            if h < min_step {
                return Err(EqmError::StepUnderflow(st.z));
            }
            let next = self.step(&st, h, level);
            length += (next.z - st.z).norm();
            st = next;
            points.push(st.z);
            max_err = max_err.max((st.eta.re - level).abs() / (1.0 + st.eta.norm()));
            if let Some(s) = start_node {
                let d = (st.z - self.crit[s].z).norm();
                if !left_home && d > 2.0 * self.crit[s].home_radius.max(launch) {
                    left_home = true;
                }
            }
            for (j, c) in self.crit.iter().enumerate() {
                if !c.on_level || (Some(j) == start_node && !left_home) {
                    continue;
                }
                let d = c.z - st.z;
                let dist = d.norm();
                let toward = (st.dir * (d / dist).conj()).re > 0.8;
                if dist < snap || (dist < c.home_radius && toward && dist <= c.launch_radius) {
                    points.push(c.z);
                    length += dist;
                    return Ok(Trajectory {
                        points,
                        start,
                        end: TrajEnd::Crit(j),
                        length,
                        level,
                        max_level_error: max_err,
                        departure,
                        arrival: (-d).arg(),
                    });
                }
            }
            let escaped = st.z.norm() > self.r_escape && (!from_infinity || length > 0.5 * self.r_escape);
            if escaped {
                return Ok(Trajectory {
                    points,
                    start,
                    end: TrajEnd::Infinity(self.angle_index(st.z.arg())),
                    length,
                    level,
                    max_level_error: max_err,
                    departure,
                    arrival: st.dir.arg(),
                });
            }
            if length > 50.0 * self.r_escape {
                return Err(EqmError::Runaway(length));
            }
        }
        Err(EqmError::Runaway(length))
    }
}

/// Angular distance on the circle.
pub fn angle_gap(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(2.0 * PI);
    d.min(2.0 * PI - d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::{EndpointSet, Potential};

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn semicircle() -> EtaEvaluator {
        let ep = EndpointSet::new(vec![c(-2.0, 0.0)], vec![c(2.0, 0.0)]).unwrap();
        EtaEvaluator::new(&Potential::gaussian(), &ep).unwrap()
    }

    #[test]
    fn branch_point_directions_are_spaced_evenly() {
        let ev = semicircle();
        let tr = Tracer::new(&ev, TraceSettings::default()).unwrap();
        let mut th = tr.launch_angles(1);
        th.sort_by(f64::total_cmp);
        assert_eq!(th.len(), 3);
        assert!(th.iter().any(|t| angle_gap(*t, PI) < 1e-12));
        assert!((th[1] - th[0] - 2.0 * PI / 3.0).abs() < 1e-12);
        assert!((th[2] - th[1] - 2.0 * PI / 3.0).abs() < 1e-12);
    }

    #[test]
    fn semicircle_rays_and_cut() {
        let ev = semicircle();
        let tr = Tracer::new(&ev, TraceSettings::default()).unwrap();
        let mut ends = Vec::new();
        for th in tr.launch_angles(1) {
            let t = tr.trace_from(1, th).unwrap();
            assert!(t.max_level_error < 1e-8, "{th} {} {:?} {}", t.max_level_error, t.end, t.points.len());
            // Independent check against the evaluator's own Re eta.
            for z in t.points.iter().step_by(7) {
                let v = ev.re_eta(*z).unwrap();
                assert!(v.abs() < 1e-8 * (1.0 + ev.eta(*z, &PathHint::Auto).unwrap().norm()), "{z} {v}");
            }
            ends.push(t.end);
        }
        ends.sort_by_key(|e| format!("{e:?}"));
        assert_eq!(ends, vec![TrajEnd::Crit(0), TrajEnd::Infinity(0), TrajEnd::Infinity(3)]);
    }

    #[test]
    fn angle_index_rounds_to_nearest_asymptote() {
        let ev = semicircle();
        let tr = Tracer::new(&ev, TraceSettings::default()).unwrap();
        assert_eq!(tr.angle_index(PI / 4.0 + 0.1), 0);
        assert_eq!(tr.angle_index(-PI / 4.0), 3);
        assert_eq!(tr.angle_index(0.75 * PI), 1);
        assert_eq!(tr.n_angles(), 4);
    }
}
