//! Gauss–Legendre rules and a doubling integrator.

use std::sync::OnceLock;

use crate::error::{EqmError, Result};
use crate::poly::C64;

/// Nodes and weights on `[-1, 1]`.
#[derive(Debug)]
pub struct GlRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GlRule {
    pub fn compute(n: usize) -> Self {
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let m = (n + 1) / 2;
        for i in 0..m {
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 1.0;
            for _ in 0..100 {
                let (mut p0, mut p1) = (1.0, x);
                for k in 2..=n {
                    let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                    p0 = p1;
                    p1 = p2;
                }
                let pn = if n == 1 { x } else { p1 };
                let pm = if n == 1 { 1.0 } else { p0 };
                dp = n as f64 * (x * pn - pm) / (x * x - 1.0);
                let dx = pn / dp;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        Self { nodes, weights }
    }
}

const SIZES: [usize; 10] = [4, 8, 16, 32, 64, 128, 256, 512, 1024, 2048];
static RULES: [OnceLock<GlRule>; 10] = [
    OnceLock::new(),
    OnceLock::new(),
    OnceLock::new(),
    OnceLock::new(),
    OnceLock::new(),
    OnceLock::new(),
    OnceLock::new(),
    OnceLock::new(),
    OnceLock::new(),
    OnceLock::new(),
];

/// Cached rule with `4 * 2^level` nodes, `level` in `0..10`.
pub fn rule(level: usize) -> &'static GlRule {
    RULES[level].get_or_init(|| GlRule::compute(SIZES[level]))
}

/// Fixed-order rule on `[a, b]`.
pub fn fixed<F: FnMut(f64) -> C64>(f: F, a: f64, b: f64, level: usize) -> C64 {
    fixed_with_magnitude(f, a, b, level).0
}

/// The rule's value and its estimate of `int |f|`.
fn fixed_with_magnitude<F: FnMut(f64) -> C64>(mut f: F, a: f64, b: f64, level: usize) -> (C64, f64) {
    let r = rule(level);
    let (c, h) = ((a + b) * 0.5, (b - a) * 0.5);
    let mut s = C64::new(0.0, 0.0);
    let mut m = 0.0;
    for (x, w) in r.nodes.iter().zip(&r.weights) {
        let v = f(c + h * x) * *w;
        s += v;
        m += v.norm_sqr().sqrt();
    }
    (s * h, m * h.abs())
}

/// Integrates over `[a, b]` with 16, 32, ... nodes until successive
/// estimates agree to `tol * max(1, int |f|)`. A difference that stops
/// shrinking within `1e3 * tol`, or is still inside that band at the finest
/// rule, is taken as the roundoff floor.
pub fn adaptive<F: FnMut(f64) -> C64>(mut f: F, a: f64, b: f64, tol: f64) -> Result<C64> {
    let (mut prev, _) = fixed_with_magnitude(&mut f, a, b, 2);
    let mut diff = f64::INFINITY;
    for level in 3..SIZES.len() {
        let (cur, mag) = fixed_with_magnitude(&mut f, a, b, level);
        let last = diff;
        diff = (cur - prev).norm();
        let scale = mag.max(1.0);
        let floor = diff <= 1e3 * tol * scale && (diff >= 0.25 * last || level + 1 == SIZES.len());
        if diff <= tol * scale || floor {
            return Ok(cur);
        }
        prev = cur;
    }
    Err(EqmError::QuadratureStalled { difference: diff })
}
