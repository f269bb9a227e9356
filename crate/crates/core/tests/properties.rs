//! Property tests for the algebraic and analytic building blocks.

use eqm::eta::{EtaEvaluator, PathHint};
use eqm::laurent::{inv_sqrt_r, sqrt_r};
use eqm::measure::compute_h;
use eqm::poly::{from_roots, horner, poly_roots};
use eqm::{BranchedSqrtR, EndpointSet, Potential, C64};
use proptest::prelude::*;

fn complex(r: f64) -> impl Strategy<Value = C64> {
    (-r..r, -r..r).prop_map(|(x, y)| C64::new(x, y))
}

/// Endpoint sets with 1 to 3 cuts and well separated points.
fn endpoint_set() -> impl Strategy<Value = EndpointSet> {
    (1usize..=3)
        .prop_flat_map(|q| proptest::collection::vec(complex(3.0), 2 * q))
        .prop_filter("separated", |z| {
            z.iter().enumerate().all(|(i, a)| z[i + 1..].iter().all(|b| (a - b).norm() > 0.2))
        })
        .prop_map(|z| {
            let q = z.len() / 2;
            EndpointSet::new(z[..q].to_vec(), z[q..].to_vec()).unwrap()
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn sqrt_squares_to_r(ep in endpoint_set(), z in complex(5.0)) {
        let br = BranchedSqrtR::new(&ep);
        let s = br.eval_straight(z);
        let r = ep.eval_r(z);
        prop_assert!((s * s - r).norm() <= 1e-10 * (1.0 + r.norm()));
    }

    #[test]
    fn laurent_tail_matches_the_branch_far_out(ep in endpoint_set(), theta in 0.0..std::f64::consts::TAU) {
        let n = 40;
        let z = C64::from_polar(8.0 * ep.scale().max(1.0), theta);
        let br = BranchedSqrtR::new(&ep);
        let s = br.eval_straight(z);
        prop_assert!((sqrt_r(&ep, n).eval(z) - s).norm() <= 1e-9 * s.norm());
        prop_assert!((inv_sqrt_r(&ep, n).eval(z) * s - 1.0).norm() <= 1e-9);
    }

    #[test]
    fn roots_are_recovered(roots in proptest::collection::vec(complex(2.0), 1..7)) {
        prop_assume!(roots.iter().enumerate().all(|(i, a)| roots[i + 1..].iter().all(|b| (a - b).norm() > 0.1)));
        let coeffs = from_roots(&roots);
        let found = poly_roots(&coeffs);
        prop_assert_eq!(found.len(), roots.len());
        for r in &roots {
            let d = found.iter().map(|f| (f - r).norm()).fold(f64::INFINITY, f64::min);
            prop_assert!(d < 1e-8, "root {} missed by {}", r, d);
        }
        for f in &found {
            prop_assert!(horner(&coeffs, *f).norm() < 1e-8);
        }
    }

    #[test]
    fn relabeling_keeps_r_and_h(ep in endpoint_set(), perm_seed in 0usize..6, flips in proptest::collection::vec(any::<bool>(), 3)) {
        let q = ep.q();
        let mut perm: Vec<usize> = (0..q).collect();
        perm.rotate_left(perm_seed % q);
        if perm_seed >= 3 {
            perm.reverse();
        }
        let other = ep.relabel(&perm, &flips[..q]).unwrap();
        for (x, y) in ep.r_coeffs().iter().zip(other.r_coeffs()) {
            prop_assert!((x - y).norm() <= 1e-12 * (1.0 + x.norm()));
        }
        let pot = Potential::quartic(C64::new(0.3, -0.7));
        let (h1, h2) = (compute_h(&pot, &ep).unwrap(), compute_h(&pot, &other).unwrap());
        for (x, y) in h1.coeffs.iter().zip(&h2.coeffs) {
            prop_assert!((x - y).norm() <= 1e-10 * (1.0 + x.norm()));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// `Re eta` does not depend on the path once it avoids the cuts.
    #[test]
    fn re_eta_is_path_independent(z in complex(3.0), k in 0usize..8) {
        let pot = Potential::quartic(C64::new(1.0, 1.0));
        let ep = eqm::seeds::quartic_one_cut(C64::new(1.0, 1.0)).into_iter().next().unwrap();
        let ev = EtaEvaluator::new(&pot, &ep).unwrap();
        let direct = ev.eta_straight(z, &PathHint::Auto);
        prop_assume!(direct.is_ok());
        let r = 12.0;
        let start = std::f64::consts::TAU * k as f64 / 8.0;
        let way: Vec<C64> = (0..=16).map(|s| C64::from_polar(r, start + std::f64::consts::PI * s as f64 / 16.0)).collect();
        let around = ev.eta_straight(z, &PathHint::Via(way));
        prop_assume!(around.is_ok());
        prop_assert!((direct.unwrap().re - around.unwrap().re).abs() < 1e-8);
    }
}
