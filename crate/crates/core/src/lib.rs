//! Numerical core for the heating produced by the incoherent repumping pulse
//! of pulsed Raman sideband cooling when the excited level can decay back
//! into the state it is pumped out of.
//!
//! Everything here is expressed in trap units (`ħ = ν = 1`): energies in
//! quanta of the trap frequency, times in units of `1/ν`.
//!
//! * [`fock`] builds the truncated oscillator basis, the displacement
//!   (recoil) matrix elements, the dipole emission pattern with its
//!   quadrature and the single-scattering kernel `T[s, n]`.
//! * [`analytics`] holds the closed-form sum-rule results.
//! * [`pump`] computes the final motional distribution after the pulse by
//!   geometric resummation of kernel applications.
//! * [`trajectory`] unravels the reduced master equation into quantum-jump
//!   trajectories, keeping the coherent free evolution between jumps.
//!
//! The crate is `no_std` and only needs `alloc`.
#![no_std]
#![forbid(unsafe_code)]
#![warn(missing_docs)]

extern crate alloc;
#[cfg(any(test, feature = "std"))]
extern crate std;

pub mod analytics;
pub mod error;
pub mod fock;
mod linalg;
pub mod pump;
pub mod stats;
pub mod trajectory;

pub use analytics::{MomentReport, MomentSource, MultilevelParams, RelErr, SchemeParams};
pub use error::{Error, Result};
pub use fock::{
    build_kernel, displacement_magnitude_sq, gauss_legendre, DipolePattern, FockBasis,
    QuadratureRule, ScatteringKernel,
};
pub use pump::{PumpDistribution, SolveMethod};
pub use trajectory::{TrajectoryConfig, TrajectoryEnsemble};
