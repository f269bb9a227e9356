//! The `4q` real endpoint equations and their Newton solver.
//!
//! Moments are normalized so the conditions read `T_l = 0` for `l < q` and
//! `T_q = -1`:
//! `T_l = -1/2 [z^{-1}] (z^l V'(z) R^{-1/2}(z))`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::branch::{BranchedSqrtR, EndpointSet, Side};
use crate::error::{EqmError, Result};
use crate::eta::{integrate_both_singular, integrate_from_singular};
use crate::laurent::{default_order, inv_sqrt_r};
use crate::measure::{compute_h, HPolynomial};
use crate::poly::{Potential, C64};
use crate::quad;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverOptions {
    pub newton_tol: f64,
    pub quad_tol: f64,
    pub max_iter: usize,
    /// Forward-difference step is `fd_rel * (1 + |x_i|)`.
    pub fd_rel: f64,
    pub cond_limit: f64,
    pub coalesce_tol: f64,
    /// Rank-one (Broyden) Jacobian updates between finite-difference
    /// rebuilds.
    pub broyden: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self { newton_tol: 1e-11, quad_tol: 1e-13, max_iter: 50, fd_rel: 1e-7, cond_limit: 1e12, coalesce_tol: 1e-8, broyden: true }
    }
}

/// Normalized moment `T_l`, `0 <= l <= q`.
pub fn moment(pot: &Potential, ep: &EndpointSet, l: usize) -> Result<C64> {
    let q = ep.q();
    if l > q {
        return Err(EqmError::OutOfRange { index: l, limit: q + 1 });
    }
    let d = inv_sqrt_r(ep, default_order(pot.p(), q));
    // z^{j+l} * z^{-q-k} hits z^{-1} when k = j + l - q + 1.
    let s: C64 = pot
        .v_prime_coeffs()
        .iter()
        .enumerate()
        .filter(|(j, _)| j + l + 1 >= q)
        .filter_map(|(j, vj)| d.coeffs.get(j + l + 1 - q).map(|dk| vj * dk))
        .sum();
    Ok(-s * 0.5)
}

pub fn moments(pot: &Potential, ep: &EndpointSet) -> Result<Vec<C64>> {
    (0..=ep.q()).map(|l| moment(pot, ep, l)).collect()
}

/// `int_{a_j}^{b_j} h R_+^{1/2} ds` along the straight segment (0-based `j`).
pub fn cut_integral(_pot: &Potential, ep: &EndpointSet, h: &HPolynomial, j: usize, quad_tol: f64) -> Result<C64> {
    if j >= ep.q() {
        return Err(EqmError::OutOfRange { index: j, limit: ep.q() });
    }
    let br = BranchedSqrtR::new(ep);
    let (m, d) = (br.cut_mid(j), br.cut_half(j));
    quad::adaptive(
        |th| {
            let x = -th.cos();
            h.eval(m + d * x) * br.boundary_value(j, x, Side::Plus) * d * th.sin()
        },
        0.0,
        std::f64::consts::PI,
        quad_tol,
    )
}

/// Waypoints for routing around straight cuts.
fn detour_points(br: &BranchedSqrtR, ep: &EndpointSet) -> Vec<C64> {
    let mut w = Vec::new();
    for k in 0..ep.q() {
        let (m, d) = (br.cut_mid(k), br.cut_half(k));
        for s in [0.6, 1.2, 2.0] {
            w.push(m + d * C64::new(0.0, s));
            w.push(m - d * C64::new(0.0, s));
        }
        w.push(ep.a()[k] - d * 0.5);
        w.push(ep.b()[k] + d * 0.5);
    }
    w
}

/// `int_{b_j}^{a_{j+1}} h R^{1/2} ds` (0-based `j < q - 1`), straight when
/// possible, otherwise through one detour waypoint.
pub fn gap_integral(_pot: &Potential, ep: &EndpointSet, h: &HPolynomial, j: usize, quad_tol: f64) -> Result<C64> {
    let q = ep.q();
    if q < 2 || j >= q - 1 {
        return Err(EqmError::OutOfRange { index: j, limit: q.saturating_sub(1) });
    }
    let br = BranchedSqrtR::new(ep);
    let f = |s: C64| h.eval(s) * br.eval_straight(s);
    let (from, to) = (ep.b()[j], ep.a()[j + 1]);
    if br.segment_crosses_cut(from, to).is_none() {
        return integrate_both_singular(&f, from, to, quad_tol);
    }
    let w = detour_points(&br, ep)
        .into_iter()
        .filter(|&w| br.segment_crosses_cut(from, w).is_none() && br.segment_crosses_cut(w, to).is_none())
        .min_by(|x, y| ((x - from).norm() + (x - to).norm()).total_cmp(&((y - from).norm() + (y - to).norm())))
        .ok_or(EqmError::GapPathBlocked(j, j + 1))?;
    Ok(integrate_from_singular(&f, from, w, quad_tol)? - integrate_from_singular(&f, to, w, quad_tol)?)
}

/// The `4q` entries: `(Re T_l + delta_{lq}, Im T_l)` for `l = 0..=q`, then
/// the first `q - 1` cut conditions, then the `q - 1` gap conditions.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ResidualVector(pub Vec<f64>);

impl ResidualVector {
    pub fn norm_inf(&self) -> f64 {
        self.0.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

pub fn residual(pot: &Potential, ep: &EndpointSet, quad_tol: f64) -> Result<ResidualVector> {
    let q = ep.q();
    let h = compute_h(pot, ep)?;
    let mut out = Vec::with_capacity(4 * q);
    for (l, t) in moments(pot, ep)?.into_iter().enumerate() {
        let shift = if l == q { 1.0 } else { 0.0 };
        out.push(t.re + shift);
        out.push(t.im);
    }
    for j in 0..q.saturating_sub(1) {
        out.push(cut_integral(pot, ep, &h, j, quad_tol)?.re);
    }
    for j in 0..q.saturating_sub(1) {
        out.push(gap_integral(pot, ep, &h, j, quad_tol)?.re);
    }
    Ok(ResidualVector(out))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SolveReport {
    pub converged: bool,
    pub endpoints: EndpointSet,
    pub residual_norm: f64,
    pub iterations: usize,
    pub jacobian_condition: f64,
    pub trail: Vec<f64>,
}

fn eval_at(pot: &Potential, x: &[f64], opts: &SolverOptions) -> Result<(EndpointSet, f64, Vec<f64>)> {
    let ep = EndpointSet::from_real_vec(x)?;
    let sep = ep.min_separation();
    if sep < opts.coalesce_tol {
        return Err(EqmError::CoalescingEndpoints(sep));
    }
    let r = residual(pot, &ep, opts.quad_tol)?;
    Ok((ep, r.norm_inf(), r.0))
}

fn fd_jacobian(pot: &Potential, x: &[f64], f0: &[f64], opts: &SolverOptions) -> Result<DMatrix<f64>> {
    let n = x.len();
    let mut jac = DMatrix::zeros(n, n);
    let mut xp = x.to_vec();
    for i in 0..n {
        let h = opts.fd_rel * (1.0 + x[i].abs());
        xp[i] = x[i] + h;
        let (_, _, fp) = eval_at(pot, &xp, opts)?;
        for r in 0..n {
            jac[(r, i)] = (fp[r] - f0[r]) / h;
        }
        xp[i] = x[i];
    }
    Ok(jac)
}

pub fn condition_number(jac: &DMatrix<f64>) -> f64 {
    let sv = jac.clone().svd(false, false).singular_values;
    let max = sv.iter().cloned().fold(0.0, f64::max);
    let min = sv.iter().cloned().fold(f64::INFINITY, f64::min);
    if min == 0.0 { f64::INFINITY } else { max / min }
}

/// Finite-difference Jacobian of the residual at `ep`.
pub fn jacobian(pot: &Potential, ep: &EndpointSet, opts: &SolverOptions) -> Result<DMatrix<f64>> {
    let x = ep.to_real_vec();
    let (_, _, f0) = eval_at(pot, &x, opts)?;
    fd_jacobian(pot, &x, &f0, opts)
}

/// Damped Newton with a halving line search. The forward-difference
/// Jacobian is rebuilt when a step is damped or contracts poorly and is
/// otherwise carried forward by Broyden updates (if enabled).
pub fn solve_endpoints(pot: &Potential, q: usize, initial: &EndpointSet, opts: &SolverOptions) -> Result<SolveReport> {
    if initial.q() != q || q > pot.max_cuts() {
        return Err(EqmError::InvalidEndpoints(format!("seed has {} cuts, wanted {q} <= {}", initial.q(), pot.max_cuts())));
    }
    let mut x = initial.to_real_vec();
    let (_, mut norm, mut f) = eval_at(pot, &x, opts)?;
    let mut trail = vec![norm];
    let mut iterations = 0;
    let mut jac: Option<DMatrix<f64>> = None;
    while norm > opts.newton_tol {
        if iterations >= opts.max_iter {
            return Err(EqmError::NoConvergence { iterations, residual: norm });
        }
        iterations += 1;
        let fresh = jac.is_none();
        let j = match jac.take() {
            Some(j) => j,
            None => {
                let j = fd_jacobian(pot, &x, &f, opts)?;
                let cond = condition_number(&j);
                if !(cond <= opts.cond_limit) {
                    return Err(EqmError::NearSingular(cond));
                }
                j
            }
        };
        let rhs = -DVector::from_vec(f.clone());
        let Some(dx) = j.clone().lu().solve(&rhs) else {
            if fresh {
                return Err(EqmError::NearSingular(f64::INFINITY));
            }
            continue;
        };
        let mut lambda = 1.0;
        let accepted = loop {
            let trial: Vec<f64> = x.iter().zip(dx.iter()).map(|(a, d)| a + lambda * d).collect();
            if let Ok((_, tn, tf)) = eval_at(pot, &trial, opts) {
                if tn < norm {
                    break Some((trial, tn, tf));
                }
            }
            lambda *= 0.5;
            if lambda < 1e-3 || (!fresh && lambda < 0.25) {
                break None;
            }
        };
        let Some((xn, tn, fnew)) = accepted else {
            if fresh {
                return Err(EqmError::NoConvergence { iterations, residual: norm });
            }
            continue;
        };
        if opts.broyden && lambda == 1.0 && tn < 0.5 * norm {
            let s = DVector::from_iterator(x.len(), xn.iter().zip(&x).map(|(a, b)| a - b));
            let y = DVector::from_iterator(f.len(), fnew.iter().zip(&f).map(|(a, b)| a - b));
            let ss = s.norm_squared();
            if ss > 0.0 {
                let mut j = j;
                let r = y - &j * &s;
                j += r * s.transpose() / ss;
                jac = Some(j);
            }
        }
        x = xn;
        norm = tn;
        f = fnew;
        trail.push(norm);
    }
    let jac = fd_jacobian(pot, &x, &f, opts)?;
    Ok(SolveReport {
        converged: true,
        endpoints: EndpointSet::from_real_vec(&x)?,
        residual_norm: norm,
        iterations,
        jacobian_condition: condition_number(&jac),
        trail,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepPolicy {
    pub initial: f64,
    pub min: f64,
    pub max: f64,
    pub shrink: f64,
    pub grow: f64,
}

impl Default for StepPolicy {
    fn default() -> Self {
        Self { initial: 0.1, min: 1e-4, max: 0.25, shrink: 0.5, grow: 1.5 }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ContinuationStep {
    pub tau: f64,
    pub report: SolveReport,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub enum PathOutcome {
    Completed,
    /// Step underflow: no admissible solution just beyond `last_tau`.
    BoundaryReached { last_tau: f64 },
}

#[derive(Clone, Debug, Serialize)]
pub struct ContinuationPath {
    pub start: Potential,
    pub end: Potential,
    pub policy: StepPolicy,
    pub steps: Vec<ContinuationStep>,
    pub outcome: PathOutcome,
}

impl ContinuationPath {
    pub fn last(&self) -> &ContinuationStep {
        self.steps.last().expect("a path always holds its seed step")
    }
}

/// Linear continuation `t(tau) = (1 - tau) t_start + tau t_end`.
pub fn continue_in_t(
    start: &Potential,
    end: &Potential,
    q: usize,
    seed: &EndpointSet,
    policy: &StepPolicy,
    opts: &SolverOptions,
) -> Result<ContinuationPath> {
    continue_gated(start, end, q, seed, policy, opts, |_, _| true)
}

/// As [`continue_in_t`], additionally rejecting steps where `accept` fails;
/// rejected steps shrink like solver failures, so the path stops at the
/// first point where `accept` flips.
pub fn continue_gated<G: Fn(&Potential, &SolveReport) -> bool>(
    start: &Potential,
    end: &Potential,
    q: usize,
    seed: &EndpointSet,
    policy: &StepPolicy,
    opts: &SolverOptions,
    accept: G,
) -> Result<ContinuationPath> {
    let first = solve_endpoints(start, q, seed, opts)?;
    let mut steps = vec![ContinuationStep { tau: 0.0, report: first }];
    let mut tau = 0.0;
    let mut step = policy.initial.min(policy.max);
    let zero_length = start == end;
    let mut outcome = PathOutcome::Completed;
    while !zero_length && tau < 1.0 {
        let next = (tau + step).min(1.0);
        let pot = start.lerp(end, next)?;
        let last = steps.last().unwrap();
        // Secant predictor from the last two accepted points.
        let mut guess = last.report.endpoints.to_real_vec();
        if steps.len() >= 2 {
            let prev = &steps[steps.len() - 2];
            let ratio = (next - last.tau) / (last.tau - prev.tau);
            let pv = prev.report.endpoints.to_real_vec();
            for (g, p) in guess.iter_mut().zip(pv) {
                *g += (*g - p) * ratio;
            }
        }
        let attempt = EndpointSet::from_real_vec(&guess)
            .and_then(|g| solve_endpoints(&pot, q, &g, opts))
            .or_else(|_| solve_endpoints(&pot, q, &last.report.endpoints, opts));
        match attempt {
            Ok(rep) if accept(&pot, &rep) => {
                tau = next;
                steps.push(ContinuationStep { tau, report: rep });
                step = (step * policy.grow).min(policy.max);
            }
            _ => {
                step *= policy.shrink;
                if step < policy.min {
                    outcome = PathOutcome::BoundaryReached { last_tau: tau };
                    break;
                }
            }
        }
    }
    Ok(ContinuationPath { start: start.clone(), end: end.clone(), policy: policy.clone(), steps, outcome })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn one_cut(a: f64, b: f64) -> EndpointSet {
        EndpointSet::new(vec![c(a, 0.0)], vec![c(b, 0.0)]).unwrap()
    }

    #[test]
    fn semicircle_moments() {
        let pot = Potential::gaussian();
        let ep = one_cut(-2.0, 2.0);
        assert!((moment(&pot, &ep, 1).unwrap() + 1.0).norm() < 1e-15);
        assert!(moment(&pot, &ep, 0).unwrap().norm() < 1e-15);
        assert!(moment(&pot, &ep, 2).is_err());
    }

    #[test]
    fn quartic_moment_identity() {
        let sigma = 0.8;
        let b2 = (-4.0 * sigma + (16.0 * sigma * sigma + 192.0f64).sqrt()) / 6.0;
        let b = b2.sqrt();
        let ep = one_cut(-b, b);
        let pot = Potential::quartic(c(sigma, 0.0));
        assert!(moment(&pot, &ep, 0).unwrap().norm() < 1e-14);
        assert!((moment(&pot, &ep, 1).unwrap() + 1.0).norm() < 1e-13);
    }

    #[test]
    fn residual_examples() {
        let pot = Potential::gaussian();
        assert!(residual(&pot, &one_cut(-2.0, 2.0), 1e-13).unwrap().norm_inf() < 1e-12);
        assert!(residual(&pot, &one_cut(-2.1, 2.0), 1e-13).unwrap().norm_inf() > 1e-3);
        let s5 = 5f64.sqrt();
        let ep = EndpointSet::new(vec![c(-s5, 0.0), c(1.0, 0.0)], vec![c(-1.0, 0.0), c(s5, 0.0)]).unwrap();
        let r = residual(&Potential::quartic(c(-3.0, 0.0)), &ep, 1e-13).unwrap();
        assert_eq!(r.0.len(), 8);
        assert!(r.norm_inf() < 1e-10, "{r:?}");
    }

    #[test]
    fn cut_and_gap_integrals_two_cut() {
        let s5 = 5f64.sqrt();
        let ep = EndpointSet::new(vec![c(-s5, 0.0), c(1.0, 0.0)], vec![c(-1.0, 0.0), c(s5, 0.0)]).unwrap();
        let pot = Potential::quartic(c(-3.0, 0.0));
        let h = compute_h(&pot, &ep).unwrap();
        let cut = cut_integral(&pot, &ep, &h, 0, 1e-13).unwrap();
        assert!(cut.re.abs() < 1e-12);
        assert!((cut.im.abs() - std::f64::consts::PI).abs() < 1e-10);
        assert!(gap_integral(&pot, &ep, &h, 0, 1e-13).unwrap().norm() < 1e-12);
        assert!(cut_integral(&pot, &ep, &h, 2, 1e-13).is_err());
        let one = one_cut(-2.0, 2.0);
        let h1 = compute_h(&Potential::gaussian(), &one).unwrap();
        assert!(gap_integral(&Potential::gaussian(), &one, &h1, 0, 1e-13).is_err());
    }

    #[test]
    fn semicircle_newton() {
        let rep = solve_endpoints(&Potential::gaussian(), 1, &one_cut(-1.5, 1.7), &SolverOptions::default()).unwrap();
        assert!(rep.converged && rep.residual_norm <= 1e-11);
        assert!((rep.endpoints.a()[0] - c(-2.0, 0.0)).norm() < 1e-10);
        assert!((rep.endpoints.b()[0] - c(2.0, 0.0)).norm() < 1e-10);
    }

    #[test]
    fn coalescing_seed_is_refused() {
        let r = solve_endpoints(&Potential::gaussian(), 1, &one_cut(0.3, 0.3), &SolverOptions::default());
        assert!(matches!(r, Err(EqmError::CoalescingEndpoints(_))));
    }

    #[test]
    fn zero_length_continuation() {
        let pot = Potential::gaussian();
        let path = continue_in_t(&pot, &pot, 1, &one_cut(-2.0, 2.0), &StepPolicy::default(), &SolverOptions::default()).unwrap();
        assert_eq!(path.steps.len(), 1);
        assert_eq!(path.outcome, PathOutcome::Completed);
    }
}
