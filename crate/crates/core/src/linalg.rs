use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::fock::SquareMatrix;

/// Solves `a x = b` by Gaussian elimination with partial pivoting.
pub(crate) fn solve_dense(a: &SquareMatrix, b: &[f64]) -> Result<Vec<f64>> {
    let n = a.dim();
    assert_eq!(b.len(), n);
    let mut m: Vec<f64> = a.as_slice().to_vec();
    let mut x: Vec<f64> = b.to_vec();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| libm::fabs(m[i * n + col]).total_cmp(&libm::fabs(m[j * n + col])))
            .unwrap_or(col);
        let p = m[pivot * n + col];
        if p == 0.0 || !p.is_finite() {
            return Err(Error::SingularSystem { pivot: col });
        }
        if pivot != col {
            for k in 0..n {
                m.swap(col * n + k, pivot * n + k);
            }
            x.swap(col, pivot);
        }
        let (upper, lower) = m.split_at_mut((col + 1) * n);
        let pivot_row = &upper[col * n..];
        for r in 0..n - col - 1 {
            let row = &mut lower[r * n..(r + 1) * n];
            let f = row[col] / p;
            if f == 0.0 {
                continue;
            }
            for k in col..n {
                row[k] -= f * pivot_row[k];
            }
            x[col + 1 + r] -= f * x[col];
        }
    }
    for col in (0..n).rev() {
        let row = &m[col * n..(col + 1) * n];
        let mut acc = x[col];
        for k in col + 1..n {
            acc -= row[k] * x[k];
        }
        x[col] = acc / row[col];
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_system() {
        let mut a = SquareMatrix::zeros(3);
        let vals = [[0.0, 2.0, 1.0], [1.0, 1.0, 0.0], [3.0, 0.0, 1.0]];
        for (i, r) in vals.iter().enumerate() {
            for (j, v) in r.iter().enumerate() {
                a.set(i, j, *v);
            }
        }
        let x = solve_dense(&a, &[5.0, 3.0, 4.0]).unwrap();
        for (got, want) in x.iter().zip([1.0, 2.0, 1.0]) {
            assert!((got - want).abs() < 1e-14);
        }
    }

    #[test]
    fn singular() {
        let a = SquareMatrix::zeros(2);
        assert!(matches!(
            solve_dense(&a, &[1.0, 1.0]),
            Err(Error::SingularSystem { .. })
        ));
    }
}
