//! Initial endpoint configurations: closed forms, continuation from a
//! reference field, a nearest-neighbour cache and seeded multistart.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::branch::EndpointSet;
use crate::endpoint::{continue_in_t, SolverOptions, StepPolicy};
use crate::error::{EqmError, Result};
use crate::poly::{Potential, C64};

/// Where a seed came from, in the order they are tried.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeedSource {
    Explicit,
    Neighbor,
    ClosedForm,
    Continuation,
    Cache,
    Multistart,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Seed {
    pub source: SeedSource,
    pub endpoints: EndpointSet,
}

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// Both one-cut solutions `[-b, b]` of the even quartic,
/// `3 b^4 + 4 sigma b^2 = 16`.
pub fn quartic_one_cut(sigma: C64) -> Vec<EndpointSet> {
    let disc = (sigma * sigma * 16.0 + 192.0).sqrt();
    [1.0, -1.0]
        .iter()
        .filter_map(|s| {
            let b = ((-sigma * 4.0 + disc * *s) / 6.0).sqrt();
            EndpointSet::new(vec![-b], vec![b]).ok()
        })
        .collect()
}

/// Symmetric two-cut configurations over the three pairings of
/// `{+-a, +-b}`, `a^2 = -sigma - 2`, `b^2 = -sigma + 2`.
pub fn quartic_two_cut(sigma: C64) -> Vec<EndpointSet> {
    let a = (-sigma - 2.0).sqrt();
    let b = (-sigma + 2.0).sqrt();
    [
        (vec![-b, a], vec![-a, b]),
        (vec![-b, -a], vec![a, b]),
        (vec![-b, b], vec![-a, a]),
    ]
    .into_iter()
    .filter_map(|(x, y)| EndpointSet::new(x, y).ok())
    .collect()
}

/// Three-cut guesses: a one-cut solution with a short cut born at each zero
/// `+-z0` of `h`, for two orientations and two lengths.
pub fn quartic_three_cut(sigma: C64) -> Vec<EndpointSet> {
    let mut out = Vec::new();
    for one in quartic_one_cut(sigma) {
        let b = one.b()[0];
        let z0 = (-sigma - b * b * 0.5).sqrt();
        for eps in [0.15, 0.35] {
            for dir in [c(1.0, 0.0), c(0.0, 1.0)] {
                let d = dir * eps * z0.norm().max(0.5);
                if let Ok(ep) = EndpointSet::new(vec![-z0 - d, -b, z0 - d], vec![-z0 + d, b, z0 + d]) {
                    out.push(ep);
                }
            }
        }
    }
    out
}

/// One-cut endpoints `[-b, b]` for the monomial field `z^{2p}/2p`, where
/// `(b/2)^{2p} binom(2p, p) = 2`.
pub fn monomial_one_cut(p: usize) -> EndpointSet {
    let mut binom = 1.0;
    for k in 0..p {
        binom = binom * (2 * p - k) as f64 / (k + 1) as f64;
    }
    let b = 2.0 * (2.0 / binom).powf(1.0 / (2 * p) as f64);
    EndpointSet::new(vec![c(-b, 0.0)], vec![c(b, 0.0)]).expect("finite")
}

/// Closed-form seeds for fields with a known symmetric solution.
pub fn closed_form(pot: &Potential, q: usize) -> Vec<EndpointSet> {
    let t = pot.t();
    match (pot.p(), q) {
        (1, 1) => {
            let m = -t[0];
            vec![EndpointSet::new(vec![m - 2.0], vec![m + 2.0]).expect("finite")]
        }
        (2, _) if pot.is_even() => match q {
            1 => quartic_one_cut(t[1]),
            2 => quartic_two_cut(t[1]),
            3 => quartic_three_cut(t[1]),
            _ => Vec::new(),
        },
        _ => Vec::new(),
    }
}

/// Reference field whose closed-form seeds are continued to `pot`: the even
/// part of a quartic, or the monomial otherwise.
pub fn reference_potential(pot: &Potential) -> Potential {
    let zero = c(0.0, 0.0);
    if pot.p() == 2 {
        Potential::quartic(pot.t()[1])
    } else {
        Potential::new(pot.p(), vec![zero; pot.max_cuts()]).expect("valid")
    }
}

fn reference_seeds(reference: &Potential, q: usize) -> Vec<EndpointSet> {
    let seeds = closed_form(reference, q);
    if seeds.is_empty() && q == 1 {
        vec![monomial_one_cut(reference.p())]
    } else {
        seeds
    }
}

/// Solutions at `pot` continued from the reference field's closed forms.
pub fn continuation_seeds(pot: &Potential, q: usize, opts: &SolverOptions) -> Vec<EndpointSet> {
    let reference = reference_potential(pot);
    if &reference == pot {
        return Vec::new();
    }
    let policy = StepPolicy { initial: 0.25, max: 0.5, ..StepPolicy::default() };
    reference_seeds(&reference, q)
        .iter()
        .filter_map(|s| continue_in_t(&reference, pot, q, s, &policy, opts).ok())
        .filter(|path| path.last().tau == 1.0)
        .map(|path| path.last().report.endpoints.clone())
        .collect()
}

/// Random configurations: `q` short cuts scattered in a disc sized by the
/// roots of `V'`. Deterministic in `seed`.
pub fn multistart(pot: &Potential, q: usize, count: usize, seed: u64) -> Vec<EndpointSet> {
    let radius = 1.0
        + pot
            .t()
            .iter()
            .enumerate()
            .map(|(j, t)| t.norm().powf(1.0 / (2 * pot.p() - 1 - j) as f64))
            .fold(0.0, f64::max);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (q as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15));
    (0..count)
        .filter_map(|_| {
            let mut a = Vec::with_capacity(q);
            let mut b = Vec::with_capacity(q);
            for _ in 0..q {
                let m = C64::from_polar(radius * rng.gen::<f64>().sqrt(), rng.gen_range(0.0..std::f64::consts::TAU));
                let d = C64::from_polar(0.2 + 0.6 * rng.gen::<f64>(), rng.gen_range(0.0..std::f64::consts::TAU));
                a.push(m - d);
                b.push(m + d);
            }
            EndpointSet::new(a, b).ok()
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CacheEntry {
    pub potential: Potential,
    pub endpoints: EndpointSet,
}

/// Solved configurations keyed by potential; lookups return the entry with
/// the closest coefficient vector.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SeedCache {
    pub schema_version: u32,
    pub entries: Vec<CacheEntry>,
}

pub const CACHE_SCHEMA_VERSION: u32 = 1;

fn t_distance(x: &Potential, y: &Potential) -> f64 {
    x.t().iter().zip(y.t()).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt()
}

impl SeedCache {
    pub fn new() -> Self {
        Self { schema_version: CACHE_SCHEMA_VERSION, entries: Vec::new() }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| EqmError::InvalidEndpoints(format!("cache {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| EqmError::InvalidEndpoints(format!("cache {}: {e}", path.display())))
    }

    pub fn save(&self, path: &Path) -> std::io::Result<()> {
        std::fs::write(path, serde_json::to_string(self).expect("cache serializes"))
    }

    pub fn insert(&mut self, potential: &Potential, endpoints: &EndpointSet) {
        let duplicate = self.entries.iter().any(|e| {
            e.potential == *potential && e.endpoints.q() == endpoints.q() && same_configuration(&e.endpoints, endpoints, 1e-8)
        });
        if !duplicate {
            self.entries.push(CacheEntry { potential: potential.clone(), endpoints: endpoints.clone() });
        }
    }

    /// Up to `k` entries with `q` cuts, nearest first.
    pub fn nearest(&self, pot: &Potential, q: usize, k: usize) -> Vec<EndpointSet> {
        let mut hits: Vec<(f64, &CacheEntry)> = self
            .entries
            .iter()
            .filter(|e| e.potential.p() == pot.p() && e.endpoints.q() == q)
            .map(|e| (t_distance(&e.potential, pot), e))
            .collect();
        hits.sort_by(|a, b| a.0.total_cmp(&b.0));
        hits.into_iter().take(k).map(|(_, e)| e.endpoints.clone()).collect()
    }
}

/// Same set of branch points with the same cut pairing, up to labels and
/// orientation.
pub fn same_configuration(x: &EndpointSet, y: &EndpointSet, tol: f64) -> bool {
    if x.q() != y.q() {
        return false;
    }
    let close = |u: C64, v: C64| (u - v).norm() <= tol * (1.0 + u.norm());
    let mut used = vec![false; y.q()];
    x.a().iter().zip(x.b()).all(|(&a, &b)| {
        let hit = (0..y.q()).find(|&k| {
            !used[k]
                && ((close(a, y.a()[k]) && close(b, y.b()[k])) || (close(a, y.b()[k]) && close(b, y.a()[k])))
        });
        hit.map(|k| used[k] = true).is_some()
    })
}

/// Ordered seed list for `(pot, q)`: explicit, closed form, continuation,
/// cache, then `restarts` multistart configurations.
pub fn seed_list(
    pot: &Potential,
    q: usize,
    explicit: Option<&EndpointSet>,
    cache: Option<&SeedCache>,
    restarts: usize,
    opts: &SolverOptions,
) -> Vec<Seed> {
    let mut out: Vec<Seed> = Vec::new();
    let mut push = |source, endpoints: EndpointSet| {
        if endpoints.q() == q && !out.iter().any(|s| same_configuration(&s.endpoints, &endpoints, 1e-10)) {
            out.push(Seed { source, endpoints });
        }
    };
    if let Some(e) = explicit {
        push(SeedSource::Explicit, e.clone());
    }
    for e in closed_form(pot, q) {
        push(SeedSource::ClosedForm, e);
    }
    if let Some(cache) = cache {
        for e in cache.nearest(pot, q, 2) {
            push(SeedSource::Cache, e);
        }
    }
    if closed_form(pot, q).is_empty() {
        for e in continuation_seeds(pot, q, opts) {
            push(SeedSource::Continuation, e);
        }
    }
    for e in multistart(pot, q, restarts, 0x5eed) {
        push(SeedSource::Multistart, e);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::endpoint::residual;

    #[test]
    fn monomial_matches_quartic_closed_form() {
        let b = monomial_one_cut(2).b()[0].re;
        assert!((3.0 * b.powi(4) - 16.0).abs() < 1e-12);
        assert!((monomial_one_cut(1).b()[0].re - 2.0).abs() < 1e-14);
    }

    #[test]
    fn closed_forms_solve_the_system() {
        let opts = SolverOptions::default();
        let g = Potential::new(1, vec![c(0.5, -0.25)]).unwrap();
        let ep = &closed_form(&g, 1)[0];
        assert!(residual(&g, ep, opts.quad_tol).unwrap().norm_inf() < 1e-12);
        let pot = Potential::quartic(c(-3.0, 0.0));
        let ep = &quartic_two_cut(c(-3.0, 0.0))[0];
        assert!(residual(&pot, ep, opts.quad_tol).unwrap().norm_inf() < 1e-10);
    }

    #[test]
    fn configuration_equality_ignores_labels() {
        let x = EndpointSet::new(vec![c(-1.0, 0.0), c(2.0, 0.0)], vec![c(1.0, 0.0), c(3.0, 0.0)]).unwrap();
        let y = x.relabel(&[1, 0], &[true, false]).unwrap();
        assert!(same_configuration(&x, &y, 1e-12));
        let z = EndpointSet::new(vec![c(-1.0, 0.0), c(1.0, 0.0)], vec![c(2.0, 0.0), c(3.0, 0.0)]).unwrap();
        assert!(!same_configuration(&x, &z, 1e-12));
    }

    #[test]
    fn multistart_is_deterministic() {
        let pot = Potential::quartic(c(1.0, 1.0));
        assert_eq!(multistart(&pot, 2, 4, 7), multistart(&pot, 2, 4, 7));
        assert_ne!(multistart(&pot, 2, 4, 7), multistart(&pot, 2, 4, 8));
    }

    #[test]
    fn continuation_reaches_odd_quartic() {
        let opts = SolverOptions::default();
        let pot = Potential::new(2, vec![c(0.3, 0.1), c(1.0, 1.0), c(-0.2, 0.0)]).unwrap();
        let sols = continuation_seeds(&pot, 1, &opts);
        assert!(!sols.is_empty());
        for ep in &sols {
            assert!(residual(&pot, ep, opts.quad_tol).unwrap().norm_inf() < 1e-10);
        }
    }
}
