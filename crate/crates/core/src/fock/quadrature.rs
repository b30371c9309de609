use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::error::{invalid, Result};

/// Gauss–Legendre nodes and weights on `[−1, 1]`, nodes ascending.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl QuadratureRule {
    /// Number of nodes.
    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    /// Abscissae in `[−1, 1]`.
    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    /// Positive weights summing to 2.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// `Σ w_q f(u_q)`, summed in node order.
    pub fn integrate(&self, mut f: impl FnMut(f64) -> f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&u, &w)| w * f(u))
            .sum()
    }
}

/// Legendre `P_n(x)` and its derivative.
fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let nf = n as f64;
    let dp = nf * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

/// Gauss–Legendre rule with `order` nodes, found by Newton iteration on
/// `P_order` from the usual cosine initial guesses.
pub fn gauss_legendre(order: usize) -> Result<QuadratureRule> {
    if order < 1 {
        return Err(invalid("order", "quadrature order must be >= 1"));
    }
    if order == 1 {
        return Ok(QuadratureRule {
            nodes: vec![0.0],
            weights: vec![2.0],
        });
    }
    let mut nodes = vec![0.0; order];
    let mut weights = vec![0.0; order];
    let nf = order as f64;
    for i in 0..order.div_ceil(2) {
        let mut x = libm::cos(PI * (i as f64 + 0.75) / (nf + 0.5));
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(order, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if libm::fabs(dx) <= 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(order, x);
        dp = if d.is_finite() { d } else { dp };
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        // x runs from near +1 downwards
        nodes[order - 1 - i] = x;
        weights[order - 1 - i] = w;
        nodes[i] = -x;
        weights[i] = w;
    }
    if order % 2 == 1 {
        let mid = order / 2;
        nodes[mid] = 0.0;
        let (_, d) = legendre_with_derivative(order, 0.0);
        weights[mid] = 2.0 / (d * d);
    }
    Ok(QuadratureRule { nodes, weights })
}

/// Angular distribution of spontaneous emission projected on the trap axis,
/// `N(u) = 3/8 (1 + u²)` on `u ∈ [−1, 1]`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct DipolePattern;

impl DipolePattern {
    /// Probability density at direction cosine `u`; zero outside `[−1, 1]`.
    pub fn density(&self, u: f64) -> f64 {
        if (-1.0..=1.0).contains(&u) {
            0.375 * (1.0 + u * u)
        } else {
            0.0
        }
    }

    /// `F(u) = (3u + u³ + 4) / 8`.
    pub fn cdf(&self, u: f64) -> f64 {
        let u = u.clamp(-1.0, 1.0);
        (3.0 * u + u * u * u + 4.0) / 8.0
    }

    /// Solves `F(u) = r` for `r ∈ [0, 1]`.
    ///
    /// `u³ + 3u + 4 − 8r = 0` has a single real root,
    /// `u = 2 sinh(asinh(4r − 2) / 3)`.
    pub fn inverse_cdf(&self, r: f64) -> f64 {
        let u = 2.0 * libm::sinh(libm::asinh(4.0 * r - 2.0) / 3.0);
        u.clamp(-1.0, 1.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn low_orders() {
        let r = gauss_legendre(1).unwrap();
        assert_eq!(r.nodes(), &[0.0]);
        assert_eq!(r.weights(), &[2.0]);
        let r = gauss_legendre(2).unwrap();
        let a = 1.0 / libm::sqrt(3.0);
        assert!((r.nodes()[0] + a).abs() < 1e-15);
        assert!((r.nodes()[1] - a).abs() < 1e-15);
        assert!((r.weights()[0] - 1.0).abs() < 1e-15);
        assert!((r.weights()[1] - 1.0).abs() < 1e-15);
        assert!(gauss_legendre(0).is_err());
    }

    #[test]
    fn weights_sum_to_two_and_nodes_ascend() {
        for order in [3, 7, 32, 64, 257, 1024] {
            let r = gauss_legendre(order).unwrap();
            let s: f64 = r.weights().iter().sum();
            assert!((s - 2.0).abs() < 1e-12, "order {order}: {s}");
            assert!(r.weights().iter().all(|&w| w > 0.0));
            assert!(r.nodes().windows(2).all(|p| p[0] < p[1]));
        }
    }

    #[test]
    fn exact_on_monomials() {
        for order in [1, 2, 5, 12] {
            let r = gauss_legendre(order).unwrap();
            for k in 0..2 * order {
                let got = r.integrate(|u| libm::pow(u, k as f64));
                let want = if k % 2 == 1 {
                    0.0
                } else {
                    2.0 / (k as f64 + 1.0)
                };
                assert!((got - want).abs() < 1e-13, "order {order}, degree {k}");
            }
        }
    }

    #[test]
    fn dipole_pattern_moments() {
        let n = DipolePattern;
        let r = gauss_legendre(8).unwrap();
        assert!((r.integrate(|u| n.density(u)) - 1.0).abs() < 1e-14);
        // degree-4 integrand, constant of the shift formula
        let r3 = gauss_legendre(3).unwrap();
        let m2 = r3.integrate(|u| n.density(u) * (1.0 + u) * (1.0 + u));
        assert!((m2 - 1.4).abs() < 1e-14);
        let m4 = r.integrate(|u| n.density(u) * libm::pow(1.0 + u, 4.0));
        assert!((m4 - 128.0 / 35.0).abs() < 1e-14);
    }

    #[test]
    fn inverse_cdf_round_trip() {
        let n = DipolePattern;
        assert_eq!(n.inverse_cdf(0.5), 0.0);
        assert!((n.inverse_cdf(1.0) - 1.0).abs() < 1e-15);
        assert!((n.inverse_cdf(0.0) + 1.0).abs() < 1e-15);
        for i in 0..=100 {
            let r = i as f64 / 100.0;
            assert!((n.cdf(n.inverse_cdf(r)) - r).abs() < 1e-14);
        }
    }
}
