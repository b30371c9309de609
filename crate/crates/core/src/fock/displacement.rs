//! Matrix elements of the recoil operator `exp(−iβ(a + a†))`.
//!
//! For `m ≥ n` and `x = β²`
//!
//! ```text
//! ⟨m| exp(−iβ(a+a†)) |n⟩ = (−i)^(m−n) · e^(−x/2) β^(m−n) √(n!/m!) L_n^(m−n)(x)
//! ```
//!
//! and the matrix is symmetric. The real factor is evaluated along each
//! diagonal `d = m − n` with the three-term Laguerre recurrence rescaled by
//! `√(n!/(n+d)!)`, so no factorial is ever formed:
//!
//! ```text
//! h_{k+1} = [(2k+1+d−x) h_k − √(k(k+d)) h_{k−1}] / √((k+1)(k+d+1))
//! h_0     = e^(−x/2) β^d / √(d!)
//! ```

use alloc::vec::Vec;

use super::SquareMatrix;
use crate::error::{invalid, Result};

fn check(beta: f64) -> Result<()> {
    if !beta.is_finite() {
        return Err(invalid("beta", "must be finite"));
    }
    Ok(())
}

/// Calls `visit(m, n, r)` for every `m ≥ n` in `0..dim`, where `r` is the
/// real part-free amplitude: `⟨m|exp(−iβ(a+a†))|n⟩ = (−i)^(m−n) r`.
///
/// Visiting order is diagonal by diagonal, `n` ascending within a diagonal.
/// Diagonals whose leading value underflows to zero are skipped.
pub fn visit_displacement(beta: f64, dim: usize, mut visit: impl FnMut(usize, usize, f64)) {
    let x = beta * beta;
    let mut lead = libm::exp(-0.5 * x);
    for d in 0..dim {
        if d > 0 {
            lead *= beta / libm::sqrt(d as f64);
        }
        if lead == 0.0 {
            break;
        }
        let df = d as f64;
        let mut prev = 0.0;
        let mut cur = lead;
        for k in 0..dim - d {
            visit(k + d, k, cur);
            let kf = k as f64;
            let next = ((2.0 * kf + 1.0 + df - x) * cur - libm::sqrt(kf * (kf + df)) * prev)
                / libm::sqrt((kf + 1.0) * (kf + df + 1.0));
            prev = cur;
            cur = next;
        }
    }
}

/// Real amplitudes `r[m][n]` of `exp(−iβ(a+a†))` on levels `0..=n_max`,
/// with `⟨m|·|n⟩ = (−i)^|m−n| r[m][n]`.
pub fn displacement_amplitudes(beta: f64, n_max: usize) -> Result<SquareMatrix> {
    check(beta)?;
    let dim = n_max + 1;
    let mut out = SquareMatrix::zeros(dim);
    visit_displacement(beta, dim, |m, n, r| {
        out.set(m, n, r);
        out.set(n, m, r);
    });
    Ok(out)
}

/// `|⟨m| exp(iβ(a+a†)) |n⟩|²` on levels `0..=n_max`.
pub fn displacement_magnitude_sq(beta: f64, n_max: usize) -> Result<SquareMatrix> {
    check(beta)?;
    let dim = n_max + 1;
    let mut out = SquareMatrix::zeros(dim);
    visit_displacement(beta, dim, |m, n, r| {
        out.set(m, n, r * r);
        out.set(n, m, r * r);
    });
    Ok(out)
}

/// Signed-integer entry point used by front ends.
pub fn displacement_magnitude_sq_checked(beta: f64, n_max: i64) -> Result<SquareMatrix> {
    if n_max < 0 {
        return Err(invalid("n_max", "must be >= 0"));
    }
    displacement_magnitude_sq(beta, n_max as usize)
}

#[allow(dead_code)]
pub(crate) fn column_norms(m: &SquareMatrix) -> Vec<f64> {
    (0..m.dim())
        .map(|c| (0..m.dim()).map(|r| m.get(r, c)).sum())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_beta_is_identity() {
        let m = displacement_magnitude_sq(0.0, 12).unwrap();
        assert_eq!(m, SquareMatrix::identity(13));
    }

    #[test]
    fn vacuum_overlap() {
        for &b in &[0.1, 0.5, 1.3] {
            let m = displacement_magnitude_sq(b, 4).unwrap();
            assert!((m.get(0, 0) - libm::exp(-b * b)).abs() < 1e-15);
        }
    }

    #[test]
    fn one_zero_element() {
        // β² e^(−β²) at β = 0.5
        let m = displacement_magnitude_sq(0.5, 3).unwrap();
        let expected = 0.25 * libm::exp(-0.25);
        assert!((m.get(1, 0) - expected).abs() < 1e-15);
        assert!((m.get(1, 0) - 0.194_700_195_767_851_1).abs() < 1e-15);
        assert_eq!(m.get(1, 0), m.get(0, 1));
    }

    #[test]
    fn rejects_bad_input() {
        assert!(displacement_magnitude_sq(f64::NAN, 3).is_err());
        assert!(displacement_magnitude_sq(f64::INFINITY, 3).is_err());
        assert!(displacement_magnitude_sq_checked(0.3, -1).is_err());
    }

    #[test]
    fn negative_beta_flips_odd_diagonals() {
        let p = displacement_amplitudes(0.7, 10).unwrap();
        let q = displacement_amplitudes(-0.7, 10).unwrap();
        for m in 0..11 {
            for n in 0..11 {
                let sign = if (m + n) % 2 == 0 { 1.0 } else { -1.0 };
                assert!((p.get(m, n) - sign * q.get(m, n)).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn interior_columns_are_normalised() {
        let m = displacement_magnitude_sq(1.2, 400).unwrap();
        let norms = column_norms(&m);
        for (n, s) in norms.iter().enumerate().take(200) {
            assert!((s - 1.0).abs() < 1e-11, "column {n}: {s}");
        }
    }
}
