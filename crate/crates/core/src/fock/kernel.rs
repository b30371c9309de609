use alloc::vec::Vec;

use super::displacement::visit_displacement;
use super::quadrature::{gauss_legendre, DipolePattern, QuadratureRule};
use super::SquareMatrix;
use crate::error::{invalid, Error, Result};

/// Default number of Gauss–Legendre nodes for the emission-angle integral.
pub const DEFAULT_QUAD_ORDER: usize = 32;
/// Highest order the doubling check escalates to.
pub const MAX_QUAD_ORDER: usize = 4096;
/// Entrywise change allowed between a rule and its doubled order.
pub const QUAD_DOUBLING_TOL: f64 = 1e-12;

/// Diagonal single-scattering map on a truncated Fock basis:
///
/// `T[s, n] = ∫ du N(u) |⟨s| exp(iη(1+u)(a+a†)) |n⟩|²`.
///
/// Column `n` is the distribution over final levels after one spontaneous
/// emission starting from `|n⟩`; `1 − Σ_s T[s, n]` is the probability that
/// escaped past `n_max`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScatteringKernel {
    eta: f64,
    n_max: usize,
    quad_order: usize,
    doubling_deviation: f64,
    matrix: SquareMatrix,
    column_leakage: Vec<f64>,
}

impl ScatteringKernel {
    /// Lamb-Dicke parameter.
    pub fn eta(&self) -> f64 {
        self.eta
    }

    /// Highest retained level.
    pub fn n_max(&self) -> usize {
        self.n_max
    }

    /// Basis dimension.
    pub fn dim(&self) -> usize {
        self.n_max + 1
    }

    /// Quadrature order the entries were integrated with.
    pub fn quad_order(&self) -> usize {
        self.quad_order
    }

    /// Largest entry change seen on the last quadrature doubling (0 if the
    /// kernel was assembled without the check).
    pub fn doubling_deviation(&self) -> f64 {
        self.doubling_deviation
    }

    /// `T[s, n]`.
    #[inline]
    pub fn get(&self, s: usize, n: usize) -> f64 {
        self.matrix.get(s, n)
    }

    /// The kernel matrix.
    pub fn matrix(&self) -> &SquareMatrix {
        &self.matrix
    }

    /// `1 − Σ_s T[s, n]` for every column.
    pub fn column_leakage(&self) -> &[f64] {
        &self.column_leakage
    }

    /// Worst column leakage.
    pub fn max_leakage(&self) -> f64 {
        self.column_leakage.iter().copied().fold(0.0, f64::max)
    }

    /// `out = T x`.
    pub fn apply(&self, x: &[f64], out: &mut [f64]) {
        self.matrix.mul_vec_into(x, out);
    }

    /// The same kernel restricted to levels `0..=n_max`.
    ///
    /// Entries do not depend on the cutoff, so this is bit-identical to
    /// assembling a kernel at the smaller `n_max` with the same quadrature.
    pub fn truncated(&self, n_max: usize) -> ScatteringKernel {
        assert!(n_max <= self.n_max, "cannot truncate upwards");
        let matrix = self.matrix.leading_block(n_max + 1);
        let column_leakage = leakage_of(&matrix);
        ScatteringKernel {
            eta: self.eta,
            n_max,
            quad_order: self.quad_order,
            doubling_deviation: self.doubling_deviation,
            matrix,
            column_leakage,
        }
    }

    /// Assembles the kernel with a fixed rule, without convergence checks.
    pub fn assemble(eta: f64, n_max: usize, quad: &QuadratureRule) -> Result<Self> {
        check_eta(eta)?;
        let dim = n_max + 1;
        if eta == 0.0 {
            // no recoil: skip the quadrature so the identity is exact
            return Ok(Self {
                eta,
                n_max,
                quad_order: quad.order(),
                doubling_deviation: 0.0,
                matrix: SquareMatrix::identity(dim),
                column_leakage: alloc::vec![0.0; dim],
            });
        }
        let pattern = DipolePattern;
        let mut matrix = SquareMatrix::zeros(dim);
        for (&u, &w) in quad.nodes().iter().zip(quad.weights()) {
            let weight = w * pattern.density(u);
            let beta = eta * (1.0 + u);
            visit_displacement(beta, dim, |m, n, r| matrix.add(m, n, weight * r * r));
        }
        for m in 0..dim {
            for n in 0..m {
                let v = matrix.get(m, n);
                matrix.set(n, m, v);
            }
        }
        let column_leakage = leakage_of(&matrix);
        Ok(Self {
            eta,
            n_max,
            quad_order: quad.order(),
            doubling_deviation: 0.0,
            matrix,
            column_leakage,
        })
    }
}

fn check_eta(eta: f64) -> Result<()> {
    if !eta.is_finite() || eta < 0.0 {
        return Err(invalid("eta", "must be finite and >= 0"));
    }
    Ok(())
}

fn leakage_of(matrix: &SquareMatrix) -> Vec<f64> {
    let dim = matrix.dim();
    let mut sums = alloc::vec![0.0; dim];
    for s in 0..dim {
        for (acc, v) in sums.iter_mut().zip(matrix.row(s)) {
            *acc += v;
        }
    }
    sums.into_iter().map(|c| (1.0 - c).max(0.0)).collect()
}

/// Builds `T` starting from `quad` and doubling the order until no entry
/// moves by more than [`QUAD_DOUBLING_TOL`]. The returned kernel carries the
/// doubled (finer) rule.
pub fn build_kernel(eta: f64, n_max: usize, quad: &QuadratureRule) -> Result<ScatteringKernel> {
    check_eta(eta)?;
    if eta == 0.0 {
        return ScatteringKernel::assemble(eta, n_max, quad);
    }
    let mut coarse = ScatteringKernel::assemble(eta, n_max, quad)?;
    let mut order = quad.order();
    loop {
        let finer_order = 2 * order;
        if finer_order > MAX_QUAD_ORDER {
            return Err(Error::QuadratureNotConverged {
                order,
                deviation: coarse.doubling_deviation,
            });
        }
        let rule = gauss_legendre(finer_order)?;
        let mut fine = ScatteringKernel::assemble(eta, n_max, &rule)?;
        let deviation = fine.matrix.max_abs_diff(&coarse.matrix);
        fine.doubling_deviation = deviation;
        if deviation <= QUAD_DOUBLING_TOL {
            return Ok(fine);
        }
        coarse = fine;
        order = finer_order;
    }
}

/// Starting cutoff for the adaptive truncation:
/// `n0 + ⌈40 (1 + 2η)² / (1 − p_e)⌉`.
///
/// The mean number of emissions is `1/(1 − p_e)` and each one moves at
/// most about `(2η)²` quanta on average, so the support grows linearly in
/// both.
pub fn suggested_n_max(eta: f64, p_e: f64, n0: usize) -> usize {
    let spread = 40.0 * (1.0 + 2.0 * eta) * (1.0 + 2.0 * eta) / (1.0 - p_e);
    // absorb rounding in (1 + 2η)² / (1 − p_e) before taking the ceiling
    n0 + libm::ceil(spread - 1e-9) as usize
}
