//! Stable lands `{Re eta < 0}` on a rectangular grid.
//!
//! `Re eta` is propagated across grid edges by quadrature on the straight
//! branch (edges crossing a straight cut or passing close to a branch point
//! are skipped; nodes near branch points are evaluated directly), then the
//! lens sign of the installed cut polylines is applied. Negative nodes are
//! joined by 4-neighbour union-find. Near each simple zero of `h` the
//! quadratic model `Re eta ~ v + Re(c w^2)` decides whether the saddle joins
//! or separates the two negative valleys, so straits narrower than the grid
//! are still resolved.

use std::collections::{HashSet, VecDeque};

use serde::Serialize;

use crate::branch::{polyline_distance, segment_distance};
use crate::error::{EqmError, Result};
use crate::eta::{EtaEvaluator, PathHint};
use crate::poly::{cluster_roots, derivative, horner, C64};
use crate::quad;
use crate::trace::{CritKind, TraceSettings, Tracer};

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Window {
    pub center: C64,
    pub half_width: f64,
}

impl Window {
    /// Square window on the real axis containing every critical point with
    /// a margin of twice the critical diameter.
    pub fn around(ev: &EtaEvaluator) -> Self {
        let mut crit = ev.endpoints().points();
        crit.extend(ev.h().zeros.iter().copied());
        let cx = crit.iter().map(|z| z.re).sum::<f64>() / crit.len() as f64;
        let center = C64::new(cx, 0.0);
        let mut diam: f64 = 0.0;
        for a in &crit {
            for b in &crit {
                diam = diam.max((a - b).norm());
            }
        }
        let reach = crit.iter().map(|z| (z - center).norm()).fold(0.0, f64::max);
        Self { center, half_width: reach + 2.0 * diam.max(1.0) }
    }
}

/// Local picture at a simple zero of `h`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StraitDiagnostic {
    pub zero: C64,
    /// `Re eta` at the zero on the installed branch.
    pub re_eta: f64,
    /// Width of the negative corridor through the saddle, 0 when closed.
    pub width: f64,
    /// `|c|` of the quadratic model.
    pub curvature: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BranchSeed {
    pub point: C64,
    /// Seed just off the branch point inside its negative sector.
    pub seed: Option<C64>,
    pub component: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StableLandMask {
    pub window: Window,
    pub resolution: usize,
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
    /// Row-major `Re eta` at the nodes, `index = j * (n + 1) + i`.
    #[serde(skip)]
    pub re_eta: Vec<f64>,
    /// Component id of each negative node, `None` elsewhere.
    #[serde(skip)]
    pub labels: Vec<Option<usize>>,
    pub components: usize,
    pub seeds: Vec<BranchSeed>,
    pub right: Option<usize>,
    pub left: Option<usize>,
    pub straits: Vec<StraitDiagnostic>,
}

impl StableLandMask {
    pub fn index(&self, i: usize, j: usize) -> usize {
        j * (self.resolution + 1) + i
    }

    pub fn node(&self, i: usize, j: usize) -> C64 {
        C64::new(self.xs[i], self.ys[j])
    }

    /// Partition of `{seeds..., right, left}` into components, normalized to
    /// first-occurrence order; `None` for points without a component.
    pub fn signature(&self) -> Vec<Option<usize>> {
        let items: Vec<Option<usize>> =
            self.seeds.iter().map(|s| s.component).chain([self.right, self.left]).collect();
        let mut seen: Vec<usize> = Vec::new();
        items
            .into_iter()
            .map(|c| {
                c.map(|c| match seen.iter().position(|s| *s == c) {
                    Some(k) => k,
                    None => {
                        seen.push(c);
                        seen.len() - 1
                    }
                })
            })
            .collect()
    }
}

struct Dsu(Vec<usize>);

impl Dsu {
    fn find(&mut self, mut x: usize) -> usize {
        while self.0[x] != x {
            self.0[x] = self.0[self.0[x]];
            x = self.0[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.0[ra.max(rb)] = ra.min(rb);
        }
    }
}

/// Nodes `center + alpha sinh(u)` for `u` uniform, spacing finest at the
/// center.
fn stretched(center: f64, half: f64, alpha: f64, n: usize) -> Vec<f64> {
    let umax = (half / alpha).asinh();
    (0..=n)
        .map(|k| {
            if 2 * k == n {
                center
            } else {
                center + alpha * (umax * (2.0 * k as f64 / n as f64 - 1.0)).sinh()
            }
        })
        .collect()
}

fn spacing(v: &[f64], k: usize) -> f64 {
    let lo = if k > 0 { v[k] - v[k - 1] } else { 0.0 };
    let hi = if k + 1 < v.len() { v[k + 1] - v[k] } else { 0.0 };
    lo.max(hi)
}

fn nearest(v: &[f64], x: f64) -> usize {
    match v.binary_search_by(|p| p.total_cmp(&x)) {
        Ok(k) => k,
        Err(k) if k == 0 => 0,
        Err(k) if k >= v.len() => v.len() - 1,
        Err(k) => {
            if x - v[k - 1] < v[k] - x {
                k - 1
            } else {
                k
            }
        }
    }
}

/// Mask at `resolution`, then refined 2x (and 4x if needed) until the
/// component partition of seeds and escape targets stops changing.
pub fn stable_land_mask(ev: &EtaEvaluator, window: &Window, resolution: usize) -> Result<StableLandMask> {
    let n = resolution.max(8) & !1;
    let coarse = compute_mask(ev, window, n)?;
    let fine = compute_mask(ev, window, 2 * n)?;
    if coarse.signature() == fine.signature() {
        return Ok(fine);
    }
    let finer = compute_mask(ev, window, 4 * n)?;
    if finer.signature() == fine.signature() {
        return Ok(finer);
    }
    Err(EqmError::ResolutionInsufficient(format!(
        "component partition changes between {} and {} cells per side",
        2 * n,
        4 * n
    )))
}

/// One grid evaluation without the refinement check (`n` even).
pub fn compute_mask(ev: &EtaEvaluator, window: &Window, n: usize) -> Result<StableLandMask> {
    let n = n.max(8) & !1;
    let br = ev.branch();
    let points = ev.endpoints().points();
    let tracer = Tracer::new(ev, TraceSettings::default())?;
    let reach = points
        .iter()
        .chain(ev.h().zeros.iter())
        .map(|z| (z - window.center).norm())
        .fold(0.0, f64::max);
    let alpha = (0.25 * reach).max(0.05 * window.half_width).max(1e-3);
    let xs = stretched(window.center.re, window.half_width, alpha, n);
    let ys = stretched(window.center.im, window.half_width, alpha, n);
    let m = n + 1;
    let idx = |i: usize, j: usize| j * m + i;
    let at = |k: usize| C64::new(xs[k % m], ys[k / m]);
    let local = |k: usize| spacing(&xs, k % m).max(spacing(&ys, k / m));

    // Straight-branch eta by edge integration.
    let f = |s: C64| ev.integrand(s);
    let rule = quad::rule(1);
    let edge_integral = |z0: C64, z1: C64| {
        let half = (z1 - z0) * 0.5;
        let mut acc = C64::new(0.0, 0.0);
        for (x, w) in rule.nodes.iter().zip(&rule.weights) {
            acc += f(z0 + half * (x + 1.0)) * *w;
        }
        acc * half
    };
    let edge_ok = |z0: C64, z1: C64| {
        let len = (z1 - z0).norm();
        br.segment_crosses_cut(z0, z1).is_none()
            && points.iter().all(|p| segment_distance(*p, z0, z1).0 >= 3.0 * len)
    };
    let scale = ev.endpoints().scale();
    let segs: Vec<(C64, C64)> = ev.endpoints().a().iter().copied().zip(ev.endpoints().b().iter().copied()).collect();
    // Nodes on a straight segment are evaluated just off it and never
    // propagate, since the straight branch jumps there.
    let mut probe: Vec<C64> = (0..m * m).map(at).collect();
    let mut frozen = vec![false; m * m];
    for k in 0..m * m {
        if let Some(&(a, b)) = segs.iter().find(|(a, b)| segment_distance(probe[k], *a, *b).0 < 1e-9 * scale) {
            probe[k] += (b - a).unscale((b - a).norm()) * C64::new(0.0, 1e-7 * scale);
            frozen[k] = true;
        }
    }
    // Direct evaluation, nudged when the quadrature does not settle.
    let direct = |z: C64| -> Result<C64> {
        let mut last = None;
        for s in [0.0, 1e-6, -1e-6, 1e-4] {
            match ev.eta_straight(z + C64::new(s, 0.5 * s) * scale, &PathHint::Auto) {
                Ok(v) => return Ok(v),
                Err(e) => last = Some(e),
            }
        }
        Err(last.unwrap())
    };
    let mut eta: Vec<Option<C64>> = vec![None; m * m];
    let mut queue = VecDeque::new();
    for k in 0..m * m {
        if frozen[k] {
            eta[k] = Some(direct(probe[k])?);
        } else if points.iter().any(|p| (probe[k] - p).norm() < 4.0 * local(k)) {
            if let Ok(v) = ev.eta_straight(probe[k], &PathHint::Auto) {
                eta[k] = Some(v);
                queue.push_back(k);
            }
        }
    }
    let mut next_unvisited = 0;
    loop {
        while let Some(k) = queue.pop_front() {
            let (i, j) = (k % m, k / m);
            let zk = at(k);
            let vk = eta[k].unwrap();
            let mut nbrs = [None; 4];
            if i > 0 {
                nbrs[0] = Some(idx(i - 1, j));
            }
            if i + 1 < m {
                nbrs[1] = Some(idx(i + 1, j));
            }
            if j > 0 {
                nbrs[2] = Some(idx(i, j - 1));
            }
            if j + 1 < m {
                nbrs[3] = Some(idx(i, j + 1));
            }
            for nb in nbrs.into_iter().flatten() {
                if eta[nb].is_some() {
                    continue;
                }
                let zn = at(nb);
                if edge_ok(zk, zn) {
                    eta[nb] = Some(vk - edge_integral(zk, zn));
                    queue.push_back(nb);
                }
            }
        }
        while next_unvisited < m * m && eta[next_unvisited].is_some() {
            next_unvisited += 1;
        }
        if next_unvisited == m * m {
            break;
        }
        eta[next_unvisited] = Some(direct(at(next_unvisited))?);
        queue.push_back(next_unvisited);
    }
    // Re eta > 0 on both sides of a cut; the band where the polyline chord
    // and the true arc disagree is clamped to that sign.
    let zero_gap = ev
        .h()
        .zeros
        .iter()
        .flat_map(|z| (0..points.len() / 2).map(move |j| polyline_distance(*z, &br.cut_polyline(j))))
        .fold(f64::INFINITY, f64::min);
    let band = (1e-3 * scale).min(0.25 * zero_gap);
    let tiny = 1e-10 * (1.0 + scale);
    let re_eta: Vec<f64> = (0..m * m)
        .map(|k| {
            let v = br.lens_sign(probe[k]) * eta[k].unwrap().re;
            if v < 0.0 && (v > -tiny || br.near_cut_interior(at(k), band)) {
                v.abs()
            } else {
                v
            }
        })
        .collect();

    // Quadratic models at simple zeros.
    let dh = derivative(&ev.h().coeffs);
    let mut straits = Vec::new();
    let mut models = Vec::new();
    for (zl, mult) in cluster_roots(&ev.h().zeros, 1e-7) {
        if mult != 1 {
            continue;
        }
        let lens = br.lens_sign(zl);
        let v = ev.eta(zl, &PathHint::Auto)?.re;
        let c = -lens * horner(&dh, zl) * br.eval_straight(zl) * 0.5;
        let width = if v < 0.0 { 2.0 * (-v / c.norm()).sqrt() } else { 0.0 };
        straits.push(StraitDiagnostic { zero: zl, re_eta: v, width, curvature: c.norm() });
        let inside = (zl.re - window.center.re).abs() < window.half_width
            && (zl.im - window.center.im).abs() < window.half_width;
        if inside {
            let gap = points
                .iter()
                .chain(ev.h().zeros.iter())
                .map(|p| (p - zl).norm())
                .filter(|d| *d > 1e-7)
                .fold(f64::INFINITY, f64::min);
            let k = idx(nearest(&xs, zl.re), nearest(&ys, zl.im));
            let rho = (3.0 * local(k)).min(0.3 * gap);
            models.push((zl, v, c, rho));
        }
    }
    let model = |zl: C64, v: f64, c: C64, z: C64| {
        let w = z - zl;
        v + (c * w * w).re
    };

    let mut dsu = Dsu((0..m * m).collect());
    let mut blocked: HashSet<(usize, usize)> = HashSet::new();
    for &(zl, v, c, rho) in &models {
        let (i0, j0) = (nearest(&xs, zl.re), nearest(&ys, zl.im));
        let span = 8;
        let near: Vec<usize> = (j0.saturating_sub(span)..=(j0 + span).min(n))
            .flat_map(|j| (i0.saturating_sub(span)..=(i0 + span).min(n)).map(move |i| j * m + i))
            .filter(|&k| (at(k) - zl).norm() <= rho && re_eta[k] < 0.0)
            .collect();
        if v < 0.0 {
            let joined: Vec<usize> = near.iter().copied().filter(|&k| model(zl, v, c, at(k)) < 0.0).collect();
            for w in joined.windows(2) {
                dsu.union(w[0], w[1]);
            }
        } else {
            for &k in &near {
                for nb in [k + 1, k + m] {
                    if nb >= m * m || (nb == k + 1 && k % m == n) {
                        continue;
                    }
                    let (z0, z1) = (at(k), at(nb));
                    if (0..=8).any(|s| model(zl, v, c, z0 + (z1 - z0) * (s as f64 / 8.0)) > 0.0) {
                        blocked.insert((k, nb));
                    }
                }
            }
        }
    }
    for j in 0..m {
        for i in 0..m {
            let k = idx(i, j);
            if re_eta[k] >= 0.0 {
                continue;
            }
            if i + 1 < m && re_eta[k + 1] < 0.0 && !blocked.contains(&(k, k + 1)) {
                dsu.union(k, k + 1);
            }
            if j + 1 < m && re_eta[k + m] < 0.0 && !blocked.contains(&(k, k + m)) {
                dsu.union(k, k + m);
            }
        }
    }
    let mut ids = vec![usize::MAX; m * m];
    let mut components = 0;
    let mut labels = vec![None; m * m];
    for k in 0..m * m {
        if re_eta[k] < 0.0 {
            let r = dsu.find(k);
            if ids[r] == usize::MAX {
                ids[r] = components;
                components += 1;
            }
            labels[k] = Some(ids[r]);
        }
    }

    // Seeds in the negative sector of each branch point.
    let mut seeds = Vec::new();
    for (pi, &alpha_pt) in points.iter().enumerate() {
        let gap = tracer
            .crit()
            .iter()
            .map(|c| (c.z - alpha_pt).norm())
            .filter(|d| *d > 0.0)
            .fold(f64::INFINITY, f64::min);
        let (i0, j0) = (nearest(&xs, alpha_pt.re), nearest(&ys, alpha_pt.im));
        let rho = (2.0 * local(idx(i0, j0))).min(0.3 * gap);
        let mut dirs = tracer.launch_angles(pi);
        debug_assert_eq!(tracer.crit()[pi].kind, CritKind::Branch);
        dirs.sort_by(f64::total_cmp);
        let mut best = BranchSeed { point: alpha_pt, seed: None, component: None };
        for s in 0..dirs.len() {
            let next = if s + 1 < dirs.len() { dirs[s + 1] } else { dirs[0] + 2.0 * std::f64::consts::PI };
            let beta = 0.5 * (dirs[s] + next);
            let z = alpha_pt + C64::from_polar(rho, beta);
            if ev.eta(z, &PathHint::Auto)?.re >= 0.0 {
                continue;
            }
            best.seed = Some(z);
            let (ci, cj) = (nearest(&xs, z.re), nearest(&ys, z.im));
            let span = 6;
            let mut cand: Vec<usize> = (cj.saturating_sub(span)..=(cj + span).min(n))
                .flat_map(|j| (ci.saturating_sub(span)..=(ci + span).min(n)).map(move |i| j * m + i))
                .filter(|&k| labels[k].is_some())
                .collect();
            cand.sort_by(|&a, &b| (at(a) - z).norm().total_cmp(&(at(b) - z).norm()));
            for &k in cand.iter().take(10) {
                let zk = at(k);
                let mut ok = true;
                for t in 1..8 {
                    let zt = z + (zk - z) * (t as f64 / 8.0);
                    if ev.eta(zt, &PathHint::Auto)?.re >= 0.0 {
                        ok = false;
                        break;
                    }
                }
                if ok {
                    best.component = labels[k];
                    break;
                }
            }
            if best.component.is_some() {
                break;
            }
        }
        seeds.push(best);
    }

    // Escape targets on the vertical edges, closest to the real direction.
    let sector = std::f64::consts::PI / (4.0 * ev.potential().p() as f64);
    let edge_target = |i: usize| -> Option<usize> {
        let mut rows: Vec<usize> = (0..m).collect();
        rows.sort_by(|&a, &b| ys[a].abs().total_cmp(&ys[b].abs()));
        rows.into_iter()
            .filter(|&j| (ys[j] / (xs[i] - window.center.re).abs().max(1e-300)).atan().abs() < sector)
            .find_map(|j| labels[idx(i, j)])
    };
    let right = edge_target(n);
    let left = edge_target(0);

    Ok(StableLandMask {
        window: *window,
        resolution: n,
        xs,
        ys,
        re_eta,
        labels,
        components,
        seeds,
        right,
        left,
        straits,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::{EndpointSet, Potential};

    fn semicircle() -> EtaEvaluator {
        let ep = EndpointSet::new(vec![C64::new(-2.0, 0.0)], vec![C64::new(2.0, 0.0)]).unwrap();
        EtaEvaluator::new(&Potential::gaussian(), &ep).unwrap()
    }

    /// Closed form on the principal branch: Re eta(z) = -Re(z s/2 - 2 log((z + s)/2)),
    /// s = sqrt(z - 2) sqrt(z + 2).
    fn closed_re_eta(z: C64) -> f64 {
        let s = (z - 2.0).sqrt() * (z + 2.0).sqrt();
        -(z * s * 0.5 - ((z + s) * 0.5).ln() * 2.0).re
    }

    #[test]
    fn semicircle_signs_match_closed_form() {
        let ev = semicircle();
        let w = Window::around(&ev);
        let mask = compute_mask(&ev, &w, 60).unwrap();
        let mut checked = 0;
        for j in 0..=60 {
            for i in 0..=60 {
                let z = mask.node(i, j);
                let want = closed_re_eta(z);
                let got = mask.re_eta[mask.index(i, j)];
                // Nodes on the cut are sampled 1e-7 off it.
                let tol = if z.im == 0.0 && z.re.abs() < 2.0 { 1e-6 } else { 1e-9 * (1.0 + want.abs()) };
                assert!((got - want).abs() < tol, "{z}: {got} vs {want}");
                checked += 1;
            }
        }
        assert_eq!(checked, 61 * 61);
    }

    #[test]
    fn semicircle_escapes() {
        let ev = semicircle();
        let mask = stable_land_mask(&ev, &Window::around(&ev), 40).unwrap();
        let right = mask.right.unwrap();
        let left = mask.left.unwrap();
        assert_ne!(right, left);
        assert_eq!(mask.seeds[0].component, Some(left));
        assert_eq!(mask.seeds[1].component, Some(right));
        assert_eq!(mask.signature(), vec![Some(0), Some(1), Some(1), Some(0)]);
    }
}
