//! Truncated oscillator basis, recoil matrix elements, the dipole emission
//! pattern and the single-scattering kernel built from them.

mod displacement;
mod kernel;
mod quadrature;

pub use displacement::{
    displacement_amplitudes, displacement_magnitude_sq, displacement_magnitude_sq_checked,
    visit_displacement,
};
pub use kernel::{
    build_kernel, suggested_n_max, ScatteringKernel, DEFAULT_QUAD_ORDER, MAX_QUAD_ORDER,
    QUAD_DOUBLING_TOL,
};
pub use quadrature::{gauss_legendre, DipolePattern, QuadratureRule};

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{invalid, Result};

/// Harmonic-oscillator basis `{|0⟩, …, |n_max⟩}`. Level `s` has energy `s`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FockBasis {
    n_max: usize,
}

impl FockBasis {
    /// Basis holding levels `0..=n_max`.
    pub fn new(n_max: usize) -> Self {
        Self { n_max }
    }

    /// Checked constructor for values coming from signed user input.
    pub fn from_signed(n_max: i64) -> Result<Self> {
        if n_max < 0 {
            return Err(invalid("n_max", "must be >= 0"));
        }
        Ok(Self::new(n_max as usize))
    }

    /// Highest retained level.
    pub fn n_max(&self) -> usize {
        self.n_max
    }

    /// Number of retained levels.
    pub fn dim(&self) -> usize {
        self.n_max + 1
    }

    /// Energy of level `s` in trap quanta.
    pub fn energy(&self, s: usize) -> f64 {
        s as f64
    }
}

/// Dense row-major square matrix of reals.
#[derive(Debug, Clone, PartialEq)]
pub struct SquareMatrix {
    dim: usize,
    data: Vec<f64>,
}

impl SquareMatrix {
    /// All-zero matrix.
    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            data: vec![0.0; dim * dim],
        }
    }

    /// Identity matrix.
    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m.set(i, i, 1.0);
        }
        m
    }

    /// Side length.
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Entry at (`row`, `col`).
    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.dim + col]
    }

    /// Overwrite entry at (`row`, `col`).
    #[inline]
    pub fn set(&mut self, row: usize, col: usize, value: f64) {
        self.data[row * self.dim + col] = value;
    }

    #[inline]
    pub(crate) fn add(&mut self, row: usize, col: usize, value: f64) {
        self.data[row * self.dim + col] += value;
    }

    /// One row as a slice.
    pub fn row(&self, row: usize) -> &[f64] {
        &self.data[row * self.dim..(row + 1) * self.dim]
    }

    /// Raw row-major storage.
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// Leading `dim × dim` block.
    pub fn leading_block(&self, dim: usize) -> Self {
        assert!(dim <= self.dim, "block larger than matrix");
        let mut data = Vec::with_capacity(dim * dim);
        for r in 0..dim {
            data.extend_from_slice(&self.row(r)[..dim]);
        }
        Self { dim, data }
    }

    /// `out = self · x`, rows summed left to right.
    pub fn mul_vec_into(&self, x: &[f64], out: &mut [f64]) {
        assert_eq!(x.len(), self.dim);
        assert_eq!(out.len(), self.dim);
        for (r, o) in out.iter_mut().enumerate() {
            *o = self.row(r).iter().zip(x).map(|(a, b)| a * b).sum();
        }
    }

    /// Largest entrywise absolute difference.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        assert_eq!(self.dim, other.dim);
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| libm::fabs(a - b))
            .fold(0.0, f64::max)
    }

    /// Largest `|A[i,j] − A[j,i]|`.
    pub fn symmetry_deviation(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.dim {
            for j in 0..i {
                worst = worst.max(libm::fabs(self.get(i, j) - self.get(j, i)));
            }
        }
        worst
    }
}
