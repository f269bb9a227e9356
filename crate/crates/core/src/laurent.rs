//! Expansions at infinity of `R^{-1/2}` and `R^{1/2}`.

use crate::branch::EndpointSet;
use crate::poly::C64;

/// `f(z) = z^m * sum_{k=0}^{N} c_k z^{-k}`.
#[derive(Clone, Debug, PartialEq)]
pub struct LaurentTail {
    pub lead_power: i32,
    pub coeffs: Vec<C64>,
}

impl LaurentTail {
    pub fn order(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn eval(&self, z: C64) -> C64 {
        let w = z.inv();
        let s = self.coeffs.iter().rev().fold(C64::new(0.0, 0.0), |acc, c| acc * w + c);
        s * z.powi(self.lead_power)
    }
}

/// Coefficients of `prod_k (1 - alpha_k w)^e` up to `w^n`.
fn binomial_product(points: &[C64], e: f64, n: usize) -> Vec<C64> {
    let mut acc = vec![C64::new(0.0, 0.0); n + 1];
    acc[0] = C64::new(1.0, 0.0);
    let mut factor = vec![C64::new(0.0, 0.0); n + 1];
    for &alpha in points {
        factor[0] = C64::new(1.0, 0.0);
        for k in 1..=n {
            factor[k] = factor[k - 1] * alpha * ((k as f64 - 1.0 - e) / k as f64);
        }
        for i in (0..=n).rev() {
            let mut s = C64::new(0.0, 0.0);
            for j in 0..=i {
                s += acc[i - j] * factor[j];
            }
            acc[i] = s;
        }
    }
    acc
}

/// `R(z)^{-1/2} = z^{-q} (1 + d_1/z + ...)`, `n + 1` coefficients.
pub fn inv_sqrt_r(ep: &EndpointSet, n: usize) -> LaurentTail {
    LaurentTail { lead_power: -(ep.q() as i32), coeffs: binomial_product(&ep.points(), -0.5, n) }
}

/// `R(z)^{1/2} = z^{q} (1 + e_1/z + ...)`, `n + 1` coefficients.
pub fn sqrt_r(ep: &EndpointSet, n: usize) -> LaurentTail {
    LaurentTail { lead_power: ep.q() as i32, coeffs: binomial_product(&ep.points(), 0.5, n) }
}

/// Default truncation `2p + 2q + 8`.
pub fn default_order(p: usize, q: usize) -> usize {
    2 * p + 2 * q + 8
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::branch::{BranchedSqrtR, Side};

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn semicircle_coefficients() {
        let ep = EndpointSet::new(vec![c(-2.0, 0.0)], vec![c(2.0, 0.0)]).unwrap();
        let s = inv_sqrt_r(&ep, 6);
        assert_eq!(s.lead_power, -1);
        let expect = [1.0, 0.0, 2.0, 0.0, 6.0, 0.0, 20.0];
        for (got, want) in s.coeffs.iter().zip(expect) {
            assert!((got - c(want, 0.0)).norm() < 1e-13);
        }
    }

    #[test]
    fn double_zero_gives_pure_power() {
        let ep = EndpointSet::new(vec![c(0.0, 0.0)], vec![c(0.0, 0.0)]).unwrap();
        let s = inv_sqrt_r(&ep, 5);
        assert_eq!(s.coeffs[0], c(1.0, 0.0));
        assert!(s.coeffs[1..].iter().all(|x| x.norm() == 0.0));
    }

    #[test]
    fn symmetric_sets_have_even_tails() {
        let ep = EndpointSet::new(vec![c(-2.0, 0.5), c(0.7, 0.1)], vec![c(-0.7, -0.1), c(2.0, -0.5)]).unwrap();
        let s = inv_sqrt_r(&ep, 12);
        for k in (1..=12).step_by(2) {
            assert!(s.coeffs[k].norm() < 1e-13, "odd coefficient {k}");
        }
    }

    #[test]
    fn series_times_inverse_is_one() {
        let ep = EndpointSet::new(vec![c(-1.0, 0.3), c(0.4, 1.0)], vec![c(0.2, -0.8), c(1.5, 0.1)]).unwrap();
        let n = 14;
        let a = inv_sqrt_r(&ep, n);
        let b = sqrt_r(&ep, n);
        for k in 0..=n {
            let s: C64 = (0..=k).map(|j| a.coeffs[j] * b.coeffs[k - j]).sum();
            let want = if k == 0 { 1.0 } else { 0.0 };
            assert!((s - want).norm() < 1e-12);
        }
        let br = BranchedSqrtR::new(&ep);
        let z = c(30.0, -17.0);
        let direct = br.eval(z, Side::Auto).unwrap();
        assert!((b.eval(z) - direct).norm() / direct.norm() < 1e-12);
    }
}
