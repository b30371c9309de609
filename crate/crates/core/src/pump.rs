//! Final motional distribution after the repumping pulse.
//!
//! Starting from `|e, n0⟩`, every emission applies the kernel `T`; the atom
//! ends in |g⟩ after exactly `m` emissions with probability `p_g p_e^(m−1)`,
//! so
//!
//! ```text
//! D = Σ_{m≥1} p_g p_e^(m−1) T^m e_{n0} = p_g T (I − p_e T)^(−1) e_{n0}.
//! ```
//!
//! Coherences between Fock levels created by one emission and consumed by
//! the next are dropped (the secular map); [`crate::trajectory`] keeps them.

use alloc::vec;
use alloc::vec::Vec;

use crate::analytics::{self, rel_err, MomentReport, MomentSource, RelErr, SchemeParams};
use crate::error::{invalid, Error, Result};
use crate::fock::{
    build_kernel, gauss_legendre, suggested_n_max, ScatteringKernel, SquareMatrix,
    DEFAULT_QUAD_ORDER,
};
use crate::linalg::solve_dense;

/// Default bound on the neglected geometric tail of the series.
pub const DEFAULT_SERIES_TOL: f64 = 1e-10;
/// Default bound on probability lost past `n_max`.
pub const DEFAULT_LEAK_TOL: f64 = 1e-8;
/// Relative change of the two lowest moments accepted between `n_max` and
/// `2 n_max`.
pub const TRUNCATION_STABILITY_TOL: f64 = 1e-8;
/// Weight above which a level counts as reachable for leakage checks.
pub const REACHABLE_WEIGHT: f64 = 1e-10;

/// How a [`PumpDistribution`] was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveMethod {
    /// Truncated geometric series of kernel applications.
    Series,
    /// One dense linear solve of the resummed series.
    LinearSolve,
}

impl SolveMethod {
    /// Stable lower-case tag.
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Series => "series",
            Self::LinearSolve => "linear_solve",
        }
    }
}

/// Probability of ending in `|g, s⟩` for `s = 0..=n_max`.
#[derive(Debug, Clone, PartialEq)]
pub struct PumpDistribution {
    /// `D_{n0}(s)`.
    pub probs: Vec<f64>,
    /// Parameters the distribution was computed for.
    pub params: SchemeParams,
    /// `Σ_s probs[s]`.
    pub total_mass: f64,
    /// `1 − total_mass`.
    pub leakage: f64,
    /// Route used.
    pub method: SolveMethod,
    /// Number of series terms summed (0 for the linear solve).
    pub series_terms: usize,
}

impl PumpDistribution {
    fn new(probs: Vec<f64>, params: SchemeParams, method: SolveMethod, terms: usize) -> Self {
        let total_mass: f64 = probs.iter().sum();
        Self {
            probs,
            params,
            total_mass,
            leakage: 1.0 - total_mass,
            method,
            series_terms: terms,
        }
    }

    /// Highest level carried.
    pub fn n_max(&self) -> usize {
        self.probs.len() - 1
    }

    /// Initial level.
    pub fn n0(&self) -> usize {
        self.params.n0
    }

    /// Largest entrywise difference to another distribution, padding the
    /// shorter one with zeros.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        let len = self.probs.len().max(other.probs.len());
        (0..len)
            .map(|s| {
                let a = self.probs.get(s).copied().unwrap_or(0.0);
                let b = other.probs.get(s).copied().unwrap_or(0.0);
                libm::fabs(a - b)
            })
            .fold(0.0, f64::max)
    }

    /// `(ΔE, σ_E²)` without any leakage check.
    pub fn raw_moments(&self) -> (f64, f64) {
        raw_moments(&self.probs, self.params.n0)
    }
}

pub(crate) fn raw_moments(probs: &[f64], n0: usize) -> (f64, f64) {
    let n0 = n0 as f64;
    let shift: f64 = probs
        .iter()
        .enumerate()
        .map(|(s, p)| (s as f64 - n0) * p)
        .sum();
    let var: f64 = probs
        .iter()
        .enumerate()
        .map(|(s, p)| {
            let d = s as f64 - n0 - shift;
            d * d * p
        })
        .sum();
    (shift, var)
}

fn check_inputs(kernel: &ScatteringKernel, p: &SchemeParams) -> Result<()> {
    p.require_steady_state()?;
    if kernel.eta() != p.eta {
        return Err(Error::ParameterMismatch(alloc::format!(
            "kernel built for eta = {}, parameters have eta = {}",
            kernel.eta(),
            p.eta
        )));
    }
    if p.n0 > kernel.n_max() {
        return Err(Error::LevelOutOfRange {
            n0: p.n0,
            n_max: kernel.n_max(),
        });
    }
    Ok(())
}

/// Sums `p_g p_e^(m−1) T^m e_{n0}` until the neglected tail
/// `p_e^M / (1 − p_e)` drops below `tol`.
pub fn solve_series(
    kernel: &ScatteringKernel,
    p: &SchemeParams,
    tol: f64,
) -> Result<PumpDistribution> {
    check_inputs(kernel, p)?;
    if tol.is_nan() || tol <= 0.0 {
        return Err(invalid("tol", "must be > 0"));
    }
    let dim = kernel.dim();
    let mut current = vec![0.0; dim];
    current[p.n0] = 1.0;
    let mut next = vec![0.0; dim];
    let mut acc = vec![0.0; dim];
    let mut weight = p.p_g();
    let mut terms = 0usize;
    loop {
        kernel.apply(&current, &mut next);
        core::mem::swap(&mut current, &mut next);
        terms += 1;
        for (a, c) in acc.iter_mut().zip(&current) {
            *a += weight * c;
        }
        weight *= p.p_e;
        let tail = libm::pow(p.p_e, terms as f64) / p.p_g();
        if tail < tol {
            break;
        }
    }
    Ok(PumpDistribution::new(acc, *p, SolveMethod::Series, terms))
}

/// Solves `(I − p_e T) y = e_{n0}` and returns `p_g T y`.
pub fn solve_linear(kernel: &ScatteringKernel, p: &SchemeParams) -> Result<PumpDistribution> {
    check_inputs(kernel, p)?;
    let dim = kernel.dim();
    let mut system = SquareMatrix::identity(dim);
    for r in 0..dim {
        for c in 0..dim {
            system.add(r, c, -p.p_e * kernel.get(r, c));
        }
    }
    let mut rhs = vec![0.0; dim];
    rhs[p.n0] = 1.0;
    let y = solve_dense(&system, &rhs)?;
    let mut probs = vec![0.0; dim];
    kernel.apply(&y, &mut probs);
    for v in probs.iter_mut() {
        *v *= p.p_g();
    }
    Ok(PumpDistribution::new(
        probs,
        *p,
        SolveMethod::LinearSolve,
        0,
    ))
}

/// Shift and variance of `d`, compared with the closed forms.
///
/// Refuses distributions whose leakage exceeds `leak_tol`, since the
/// missing mass would bias both moments.
pub fn moments(d: &PumpDistribution, leak_tol: f64) -> Result<MomentReport> {
    if d.leakage > leak_tol {
        return Err(Error::LeakageTooLarge {
            leakage: d.leakage,
            tolerance: leak_tol,
            n_max: d.n_max(),
        });
    }
    let (delta_e, sigma2_e) = d.raw_moments();
    let closed = analytics::closed_form_report(&d.params)?;
    Ok(MomentReport {
        delta_e,
        sigma2_e,
        sigma2_first_term: closed.sigma2_first_term,
        k_eff_over_k: closed.k_eff_over_k,
        source: MomentSource::KernelSeries,
        rel_err_vs_closed_form: Some(RelErr {
            delta_e: rel_err(delta_e, closed.delta_e),
            sigma2_e: rel_err(sigma2_e, closed.sigma2_e),
        }),
    })
}

/// `T^m e_{n0}`.
pub fn kernel_power_column(kernel: &ScatteringKernel, n0: usize, m: usize) -> Vec<f64> {
    let dim = kernel.dim();
    let mut current = vec![0.0; dim];
    current[n0] = 1.0;
    let mut next = vec![0.0; dim];
    for _ in 0..m {
        kernel.apply(&current, &mut next);
        core::mem::swap(&mut current, &mut next);
    }
    current
}

/// Per-`m` contributions to the variance (`a`) and the shift (`b`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AppendixTerms {
    /// `p_g p_e^(m−1) Σ_s (s − n0 − ΔE)² (T^m)[s, n0]`, `ΔE` from the closed form.
    pub a: f64,
    /// `p_g p_e^(m−1) Σ_s (s − n0) (T^m)[s, n0]`.
    pub b: f64,
}

/// Contracts the `m`-fold kernel power directly.
pub fn brute_force_am_bm(
    kernel: &ScatteringKernel,
    p: &SchemeParams,
    m: usize,
) -> Result<AppendixTerms> {
    check_inputs(kernel, p)?;
    if m < 1 {
        return Err(invalid("m", "number of emissions must be >= 1"));
    }
    let shift = analytics::shift_closed_form(p)?;
    let col = kernel_power_column(kernel, p.n0, m);
    let weight = p.p_g() * libm::pow(p.p_e, (m - 1) as f64);
    let n0 = p.n0 as f64;
    let mut a = 0.0;
    let mut b = 0.0;
    for (s, v) in col.iter().enumerate() {
        let d = s as f64 - n0;
        b += d * v;
        a += (d - shift) * (d - shift) * v;
    }
    Ok(AppendixTerms {
        a: weight * a,
        b: weight * b,
    })
}

/// Knobs of [`solve_adaptive`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveOptions {
    /// Resummation route.
    pub method: SolveMethod,
    /// Tail bound for the series route.
    pub series_tol: f64,
    /// Accepted truncation leakage.
    pub leak_tol: f64,
    /// Starting quadrature order for the kernel.
    pub quad_order: usize,
    /// Fixed cutoff; disables escalation.
    pub n_max: Option<usize>,
    /// Largest cutoff escalation may reach.
    pub max_n_max: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            method: SolveMethod::Series,
            series_tol: DEFAULT_SERIES_TOL,
            leak_tol: DEFAULT_LEAK_TOL,
            quad_order: DEFAULT_QUAD_ORDER,
            n_max: None,
            max_n_max: 1 << 13,
        }
    }
}

/// Keeps the largest kernel built so far for one `η` and serves smaller
/// cutoffs as leading blocks of it.
#[derive(Debug, Clone, Default)]
pub struct KernelCache {
    kernel: Option<(usize, ScatteringKernel)>,
}

impl KernelCache {
    /// Empty cache.
    pub fn new() -> Self {
        Self::default()
    }

    /// Kernel for `eta` on levels `0..=n_max`, starting the quadrature
    /// doubling at `quad_order`.
    pub fn get(&mut self, eta: f64, n_max: usize, quad_order: usize) -> Result<ScatteringKernel> {
        if let Some((order, k)) = &self.kernel {
            if *order == quad_order && k.eta() == eta && k.n_max() >= n_max {
                return Ok(if k.n_max() == n_max {
                    k.clone()
                } else {
                    k.truncated(n_max)
                });
            }
        }
        let rule = gauss_legendre(quad_order)?;
        let k = build_kernel(eta, n_max, &rule)?;
        self.kernel = Some((quad_order, k.clone()));
        Ok(k)
    }
}

/// Result of [`solve_adaptive`].
#[derive(Debug, Clone, PartialEq)]
pub struct AdaptiveSolution {
    /// Distribution at the accepted cutoff.
    pub distribution: PumpDistribution,
    /// Worst leakage among kernel columns the distribution reaches.
    pub reachable_column_leakage: f64,
    /// Quadrature order of the kernel used.
    pub quad_order: usize,
    /// Entry change on the kernel's last quadrature doubling.
    pub quad_doubling_deviation: f64,
}

fn solve_with(
    kernel: &ScatteringKernel,
    p: &SchemeParams,
    opts: &SolveOptions,
) -> Result<PumpDistribution> {
    match opts.method {
        SolveMethod::Series => solve_series(kernel, p, opts.series_tol),
        SolveMethod::LinearSolve => solve_linear(kernel, p),
    }
}

fn reachable_leakage(kernel: &ScatteringKernel, d: &PumpDistribution) -> f64 {
    d.probs
        .iter()
        .zip(kernel.column_leakage())
        .filter(|(p, _)| **p > REACHABLE_WEIGHT)
        .map(|(_, l)| *l)
        .fold(0.0, f64::max)
}

fn stable(a: f64, b: f64) -> bool {
    libm::fabs(a - b) <= TRUNCATION_STABILITY_TOL * libm::fabs(b).max(f64::MIN_POSITIVE)
}

/// Solves for `D` with automatic cutoff selection.
///
/// Starts at [`suggested_n_max`] and doubles until the shift and variance
/// agree between `n_max` and `2 n_max` to relative 1e−8 and both the
/// distribution and every reachable kernel column leak less than
/// `leak_tol`. The result at the larger cutoff is returned.
pub fn solve_adaptive(
    p: &SchemeParams,
    opts: &SolveOptions,
    cache: &mut KernelCache,
) -> Result<AdaptiveSolution> {
    p.require_steady_state()?;
    let finish = |kernel: &ScatteringKernel, d: PumpDistribution| AdaptiveSolution {
        reachable_column_leakage: reachable_leakage(kernel, &d),
        quad_order: kernel.quad_order(),
        quad_doubling_deviation: kernel.doubling_deviation(),
        distribution: d,
    };
    if let Some(n_max) = opts.n_max {
        let kernel = cache.get(p.eta, n_max, opts.quad_order)?;
        let d = solve_with(&kernel, p, opts)?;
        if d.leakage > opts.leak_tol {
            return Err(Error::LeakageTooLarge {
                leakage: d.leakage,
                tolerance: opts.leak_tol,
                n_max,
            });
        }
        return Ok(finish(&kernel, d));
    }
    let mut n_max = suggested_n_max(p.eta, p.p_e, p.n0);
    let kernel = cache.get(p.eta, n_max, opts.quad_order)?;
    let mut previous = solve_with(&kernel, p, opts)?;
    loop {
        let larger = 2 * n_max;
        if larger > opts.max_n_max {
            return Err(Error::TruncationNotConverged {
                cap: opts.max_n_max,
            });
        }
        let kernel = cache.get(p.eta, larger, opts.quad_order)?;
        let d = solve_with(&kernel, p, opts)?;
        let (s0, v0) = previous.raw_moments();
        let (s1, v1) = d.raw_moments();
        let ok = stable(s0, s1)
            && stable(v0, v1)
            && d.leakage <= opts.leak_tol
            && reachable_leakage(&kernel, &d) <= opts.leak_tol;
        if ok {
            return Ok(finish(&kernel, d));
        }
        previous = d;
        n_max = larger;
    }
}
