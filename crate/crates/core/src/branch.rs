//! Endpoint sets and the branch of `R(z)^{1/2}`.
//!
//! Each factor `((z - a_k)(z - b_k))^{1/2}` is cut along the straight segment
//! from `a_k` to `b_k` and behaves like `z` at infinity. A traced polyline can
//! replace the straight segment; the factor then flips sign inside the region
//! enclosed by the polyline and the straight segment.

use serde::{Deserialize, Serialize};

use crate::error::{EqmError, Result};
use crate::poly::{from_roots, C64};

/// Branch points `a_1..a_q`, `b_1..b_q`. Index order is the traversal order
/// along the contour from the `-inf` side to the `+inf` side; cut `k` is
/// oriented from `a[k]` to `b[k]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EndpointSet {
    a: Vec<C64>,
    b: Vec<C64>,
}

impl EndpointSet {
    pub fn new(a: Vec<C64>, b: Vec<C64>) -> Result<Self> {
        if a.is_empty() || a.len() != b.len() {
            return Err(EqmError::InvalidEndpoints(format!(
                "need q >= 1 matching a/b lists, got {} and {}",
                a.len(),
                b.len()
            )));
        }
        if a.iter().chain(&b).any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(EqmError::InvalidEndpoints("non-finite endpoint".into()));
        }
        Ok(Self { a, b })
    }

    pub fn q(&self) -> usize {
        self.a.len()
    }

    pub fn a(&self) -> &[C64] {
        &self.a
    }

    pub fn b(&self) -> &[C64] {
        &self.b
    }

    /// `a_1, b_1, a_2, b_2, ...`
    pub fn points(&self) -> Vec<C64> {
        self.a.iter().zip(&self.b).flat_map(|(a, b)| [*a, *b]).collect()
    }

    /// Ascending coefficients of the monic `R`.
    pub fn r_coeffs(&self) -> Vec<C64> {
        from_roots(&self.points())
    }

    pub fn eval_r(&self, z: C64) -> C64 {
        self.points().iter().map(|p| z - p).product()
    }

    pub fn min_separation(&self) -> f64 {
        let pts = self.points();
        let mut best = f64::INFINITY;
        for i in 0..pts.len() {
            for j in i + 1..pts.len() {
                best = best.min((pts[i] - pts[j]).norm());
            }
        }
        best
    }

    /// `max(1, max |endpoint|)`.
    pub fn scale(&self) -> f64 {
        self.points().iter().map(|z| z.norm()).fold(1.0, f64::max)
    }

    /// Real coordinates `(Re a_1, Im a_1, .., Re a_q, Im a_q, Re b_1, Im b_1, ..)`.
    pub fn to_real_vec(&self) -> Vec<f64> {
        self.a.iter().chain(&self.b).flat_map(|z| [z.re, z.im]).collect()
    }

    pub fn from_real_vec(x: &[f64]) -> Result<Self> {
        if x.len() % 4 != 0 || x.is_empty() {
            return Err(EqmError::InvalidEndpoints(format!("bad vector length {}", x.len())));
        }
        let q = x.len() / 4;
        let z: Vec<C64> = x.chunks(2).map(|c| C64::new(c[0], c[1])).collect();
        Self::new(z[..q].to_vec(), z[q..].to_vec())
    }

    /// Reorders cuts by `perm` (new index `i` takes old cut `perm[i]`) and
    /// reverses the orientation of cut `i` when `flip[i]`.
    pub fn relabel(&self, perm: &[usize], flip: &[bool]) -> Result<Self> {
        let q = self.q();
        if perm.len() != q || flip.len() != q {
            return Err(EqmError::InvalidEndpoints("relabel length mismatch".into()));
        }
        let mut seen = vec![false; q];
        for &k in perm {
            if k >= q || seen[k] {
                return Err(EqmError::InvalidEndpoints("relabel is not a permutation".into()));
            }
            seen[k] = true;
        }
        let (mut a, mut b) = (Vec::with_capacity(q), Vec::with_capacity(q));
        for (i, &k) in perm.iter().enumerate() {
            if flip[i] {
                a.push(self.b[k]);
                b.push(self.a[k]);
            } else {
                a.push(self.a[k]);
                b.push(self.b[k]);
            }
        }
        Self::new(a, b)
    }
}

/// Which boundary value to take on a cut. `Plus` is the limit from the left
/// of the oriented segment `a_k -> b_k`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Side {
    Auto,
    Plus,
    Minus,
}

#[derive(Clone, Debug)]
struct CutGeom {
    a: C64,
    b: C64,
    mid: C64,
    half: C64,
    lens: Option<Lens>,
}

/// Closed polygon `a -> polyline -> b -> a` used for the even-odd flip.
#[derive(Clone, Debug)]
struct Lens {
    ring: Vec<C64>,
    lo: C64,
    hi: C64,
}

impl Lens {
    fn new(polyline: &[C64]) -> Self {
        let ring = polyline.to_vec();
        let mut lo = C64::new(f64::INFINITY, f64::INFINITY);
        let mut hi = C64::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
        for z in &ring {
            lo = C64::new(lo.re.min(z.re), lo.im.min(z.im));
            hi = C64::new(hi.re.max(z.re), hi.im.max(z.im));
        }
        Self { ring, lo, hi }
    }

    fn contains(&self, z: C64) -> bool {
        if z.re < self.lo.re || z.re > self.hi.re || z.im < self.lo.im || z.im > self.hi.im {
            return false;
        }
        point_in_ring(&self.ring, z)
    }
}

/// Principal square root without the polar round trip; agrees with
/// `C64::sqrt`, including the sign of a zero imaginary part.
#[inline]
pub fn principal_sqrt(z: C64) -> C64 {
    if z.re == 0.0 && z.im == 0.0 {
        return C64::new(0.0, z.im);
    }
    let r = (z.re * z.re + z.im * z.im).sqrt();
    if z.re >= 0.0 {
        let t = (0.5 * (r + z.re)).sqrt();
        C64::new(t, z.im / (2.0 * t))
    } else {
        let t = (0.5 * (r - z.re)).sqrt();
        C64::new(z.im.abs() / (2.0 * t), t.copysign(z.im))
    }
}

/// Even-odd test against the closed ring through `ring` (last joins first).
pub fn point_in_ring(ring: &[C64], z: C64) -> bool {
    let n = ring.len();
    let mut inside = false;
    let mut j = n - 1;
    for i in 0..n {
        let (pi, pj) = (ring[i], ring[j]);
        if (pi.im > z.im) != (pj.im > z.im) {
            let x = pj.re + (z.im - pj.im) * (pi.re - pj.re) / (pi.im - pj.im);
            if z.re < x {
                inside = !inside;
            }
        }
        j = i;
    }
    inside
}

fn cross(u: C64, v: C64) -> f64 {
    u.re * v.im - u.im * v.re
}

/// Parameters `(s, u)` where `p0 + s (p1 - p0) = q0 + u (q1 - q0)`, or `None`
/// for parallel segments.
pub fn segment_intersection(p0: C64, p1: C64, q0: C64, q1: C64) -> Option<(f64, f64)> {
    let r = p1 - p0;
    let s = q1 - q0;
    let den = cross(r, s);
    if den.abs() <= 1e-300 || den.abs() <= 1e-14 * r.norm() * s.norm() {
        return None;
    }
    let d = q0 - p0;
    Some((cross(d, s) / den, cross(d, r) / den))
}

/// Distance from `z` to the segment `[p, q]`, and the clamped parameter.
pub fn segment_distance(z: C64, p: C64, q: C64) -> (f64, f64) {
    let d = q - p;
    let l2 = d.norm_sqr();
    let u = if l2 == 0.0 { 0.0 } else { ((z - p) * d.conj()).re / l2 };
    let u = u.clamp(0.0, 1.0);
    ((z - (p + d * u)).norm(), u)
}

pub fn polyline_distance(z: C64, line: &[C64]) -> f64 {
    match line.len() {
        0 => f64::INFINITY,
        1 => (z - line[0]).norm(),
        _ => line.windows(2).map(|w| segment_distance(z, w[0], w[1]).0).fold(f64::INFINITY, f64::min),
    }
}

/// `R^{1/2}` with per-factor straight cuts and optional polyline overrides.
#[derive(Clone, Debug)]
pub struct BranchedSqrtR {
    ep: EndpointSet,
    cuts: Vec<CutGeom>,
    snap: f64,
}

impl BranchedSqrtR {
    pub fn new(ep: &EndpointSet) -> Self {
        let cuts = ep
            .a()
            .iter()
            .zip(ep.b())
            .map(|(&a, &b)| CutGeom { a, b, mid: (a + b) * 0.5, half: (b - a) * 0.5, lens: None })
            .collect();
        Self { ep: ep.clone(), cuts, snap: 1e-12 * ep.scale() }
    }

    /// Replaces cut `k`'s discontinuity by the traced polyline (which must
    /// start at `a_k` and end at `b_k`); `None` keeps the straight segment.
    pub fn with_polylines(mut self, lines: &[Option<Vec<C64>>]) -> Self {
        for (cut, line) in self.cuts.iter_mut().zip(lines) {
            cut.lens = line.as_ref().filter(|l| l.len() >= 3).map(|l| Lens::new(l));
        }
        self
    }

    pub fn endpoints(&self) -> &EndpointSet {
        &self.ep
    }

    pub fn has_polylines(&self) -> bool {
        self.cuts.iter().any(|c| c.lens.is_some())
    }

    fn factor(cut: &CutGeom, z: C64) -> C64 {
        let w = z - cut.mid;
        if w.re == 0.0 && w.im == 0.0 {
            return C64::new(0.0, 1.0) * cut.half;
        }
        let x = cut.half / w;
        w * principal_sqrt(C64::new(1.0, 0.0) - x * x)
    }

    /// Straight-cut branch, no side handling. Values exactly on a segment are
    /// one of the two boundary values.
    pub fn eval_straight(&self, z: C64) -> C64 {
        self.cuts.iter().map(|c| Self::factor(c, z)).product()
    }

    /// Sign relating the polyline branch to the straight branch at `z`.
    pub fn lens_sign(&self, z: C64) -> f64 {
        let mut s = 1.0;
        for c in &self.cuts {
            if let Some(lens) = &c.lens {
                if lens.contains(z) {
                    s = -s;
                }
            }
        }
        s
    }

    /// Locates `z` on a straight cut segment: returns the cut index and the
    /// coordinate `x` with `z = mid + half * x`, `x` in `[-1, 1]`.
    pub fn on_segment(&self, z: C64) -> Option<(usize, f64)> {
        self.cuts.iter().enumerate().find_map(|(k, c)| {
            let (d, u) = segment_distance(z, c.a, c.b);
            (d <= self.snap).then_some((k, 2.0 * u - 1.0))
        })
    }

    /// Boundary value on cut `k` at `mid + half * x` (straight geometry).
    pub fn boundary_value(&self, k: usize, x: f64, side: Side) -> C64 {
        let c = &self.cuts[k];
        let s = c.mid + c.half * x;
        let own = C64::new(0.0, 1.0) * c.half * (1.0 - x * x).max(0.0).sqrt();
        let rest: C64 = self
            .cuts
            .iter()
            .enumerate()
            .filter(|(j, _)| *j != k)
            .map(|(_, c)| Self::factor(c, s))
            .product();
        let v = own * rest;
        if side == Side::Minus { -v } else { v }
    }

    /// `R^{1/2}(z)`. Branch points give 0. Off the cuts, `side` must be
    /// `Auto`; on a straight cut `Auto` resolves to the `+` value. Boundary
    /// values always refer to the straight segment geometry.
    pub fn eval(&self, z: C64, side: Side) -> Result<C64> {
        if self.ep.points().iter().any(|p| *p == z) {
            return Ok(C64::new(0.0, 0.0));
        }
        match (self.on_segment(z), side) {
            (Some((k, x)), Side::Auto) => Ok(self.boundary_value(k, x, Side::Plus)),
            (Some((k, x)), s) => Ok(self.boundary_value(k, x, s)),
            (None, Side::Auto) => Ok(self.eval_straight(z) * self.lens_sign(z)),
            (None, _) => Err(EqmError::NotOnCut(z)),
        }
    }

    /// First cut segment crossed by the open segment `(p0, p1)`, ignoring
    /// contacts at the segment's own endpoints.
    pub fn segment_crosses_cut(&self, p0: C64, p1: C64) -> Option<usize> {
        let tol = 1e-10;
        self.cuts.iter().enumerate().find_map(|(k, c)| {
            match segment_intersection(p0, p1, c.a, c.b) {
                Some((s, u)) => {
                    (s > tol && s < 1.0 - tol && u >= -tol && u <= 1.0 + tol).then_some(k)
                }
                None => {
                    // Parallel: only collinear overlap counts.
                    let (d0, _) = segment_distance(c.a, p0, p1);
                    let (d1, _) = segment_distance(c.b, p0, p1);
                    let (e0, _) = segment_distance(p0, c.a, c.b);
                    let (e1, _) = segment_distance(p1, c.a, c.b);
                    let eps = 1e-12 * (1.0 + (p1 - p0).norm());
                    let overlap = (d0 < eps && c.a != p0 && c.a != p1)
                        || (d1 < eps && c.b != p0 && c.b != p1)
                        || (e0 < eps && e1 < eps);
                    overlap.then_some(k)
                }
            }
        })
    }

    /// Whether `z` is within `tol` of the interior of an installed cut
    /// polyline, i.e. the nearest polyline point is not an endpoint.
    pub fn near_cut_interior(&self, z: C64, tol: f64) -> bool {
        self.cuts.iter().filter_map(|c| c.lens.as_ref()).any(|lens| {
            if z.re < lens.lo.re - tol || z.re > lens.hi.re + tol || z.im < lens.lo.im - tol || z.im > lens.hi.im + tol {
                return false;
            }
            let n = lens.ring.len();
            let mut best = (f64::INFINITY, false);
            for (i, w) in lens.ring.windows(2).enumerate() {
                let (d, u) = segment_distance(z, w[0], w[1]);
                if d < best.0 {
                    let at_end = (i == 0 && u == 0.0) || (i == n - 2 && u == 1.0);
                    best = (d, !at_end);
                }
            }
            best.0 < tol && best.1
        })
    }

    /// Installed polyline of cut `k`, or its straight segment.
    pub fn cut_polyline(&self, k: usize) -> Vec<C64> {
        let c = &self.cuts[k];
        c.lens.as_ref().map_or_else(|| vec![c.a, c.b], |l| l.ring.clone())
    }

    pub fn cut_mid(&self, k: usize) -> C64 {
        self.cuts[k].mid
    }

    pub fn cut_half(&self, k: usize) -> C64 {
        self.cuts[k].half
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn semicircle() -> BranchedSqrtR {
        BranchedSqrtR::new(&EndpointSet::new(vec![c(-2.0, 0.0)], vec![c(2.0, 0.0)]).unwrap())
    }

    #[test]
    fn principal_sqrt_matches_library() {
        for z in [c(3.0, 4.0), c(-3.0, 4.0), c(-3.0, -4.0), c(-2.0, 0.0), c(-2.0, -0.0), c(5.0, 0.0), c(0.0, -1e-9), c(-1e-12, 1e-30)] {
            let (x, y) = (principal_sqrt(z), z.sqrt());
            assert!((x - y).norm() <= 1e-15 * (1.0 + y.norm()), "{z}: {x} vs {y}");
            assert_eq!(x.im.is_sign_negative(), y.im.is_sign_negative(), "{z}");
        }
    }

    #[test]
    fn positive_for_large_real() {
        let v = semicircle().eval(c(3.0, 0.0), Side::Auto).unwrap();
        assert!((v - c(5f64.sqrt(), 0.0)).norm() < 1e-14);
    }

    #[test]
    fn plus_value_is_left_limit() {
        let br = semicircle();
        let plus = br.eval(c(0.0, 0.0), Side::Plus).unwrap();
        let minus = br.eval(c(0.0, 0.0), Side::Minus).unwrap();
        assert!((plus * plus + 4.0).norm() < 1e-14);
        assert!((plus + minus).norm() < 1e-15);
        let left = br.eval(c(0.0, 1e-9), Side::Auto).unwrap();
        assert!((left - plus).norm() < 1e-8);
        assert!((plus - c(0.0, 2.0)).norm() < 1e-14);
    }

    #[test]
    fn side_off_cut_is_error() {
        assert!(matches!(semicircle().eval(c(0.0, 1.0), Side::Plus), Err(EqmError::NotOnCut(_))));
    }

    #[test]
    fn branch_point_is_zero() {
        assert_eq!(semicircle().eval(c(2.0, 0.0), Side::Auto).unwrap(), c(0.0, 0.0));
    }

    #[test]
    fn lens_flips_inside_polyline_region() {
        let ep = EndpointSet::new(vec![c(-1.0, 0.0)], vec![c(1.0, 0.0)]).unwrap();
        let arc: Vec<C64> = (0..=32)
            .map(|k| C64::from_polar(1.0, std::f64::consts::PI * (1.0 - k as f64 / 32.0)))
            .collect();
        let br = BranchedSqrtR::new(&ep).with_polylines(&[Some(arc)]);
        let z = c(0.0, 0.5);
        let v = br.eval(z, Side::Auto).unwrap();
        assert!((v + br.eval_straight(z)).norm() < 1e-15);
        // Continuity across the straight segment, discontinuity across the arc.
        let below = br.eval(c(0.0, -1e-9), Side::Auto).unwrap();
        let above = br.eval(c(0.0, 1e-9), Side::Auto).unwrap();
        assert!((below - above).norm() < 1e-8);
        let out = br.eval(c(0.0, 1.0 + 1e-9), Side::Auto).unwrap();
        let inn = br.eval(c(0.0, 1.0 - 1e-9), Side::Auto).unwrap();
        assert!((out + inn).norm() < 1e-7);
    }

    #[test]
    fn relabel_roundtrip() {
        let ep = EndpointSet::new(vec![c(-3.0, 0.0), c(1.0, 0.0)], vec![c(-1.0, 0.0), c(3.0, 1.0)]).unwrap();
        let r = ep.relabel(&[1, 0], &[true, false]).unwrap();
        assert_eq!(r.a(), &[c(3.0, 1.0), c(-3.0, 0.0)]);
        assert_eq!(r.b(), &[c(1.0, 0.0), c(-1.0, 0.0)]);
        assert!(ep.relabel(&[0, 0], &[false, false]).is_err());
        let v = ep.to_real_vec();
        assert_eq!(EndpointSet::from_real_vec(&v).unwrap(), ep);
    }

    #[test]
    fn crossing_detection() {
        let br = semicircle();
        assert_eq!(br.segment_crosses_cut(c(0.0, 1.0), c(0.0, -1.0)), Some(0));
        assert_eq!(br.segment_crosses_cut(c(0.0, 1.0), c(5.0, -1.0)), None);
        assert_eq!(br.segment_crosses_cut(c(2.0, 0.0), c(3.0, 0.0)), None);
        assert_eq!(br.segment_crosses_cut(c(2.0, 0.0), c(0.0, 0.0)), Some(0));
    }
}
