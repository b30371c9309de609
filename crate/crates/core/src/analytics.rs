//! Closed-form sum-rule results for the repumping pulse.
//!
//! With `κ = (7/5) η²` (the mean recoil of one emission in trap quanta):
//!
//! ```text
//! ΔE    = κ / (1 − p_e)
//! σ_E²  = κ (2n + 1) / (1 − p_e) + κ² (58/49) p_e / (1 − p_e)²
//! B_m^n = p_g p_e^(m−1) κ m
//! A_m^n = p_g p_e^(m−1) [κ (2n + 1) m + κ² (29/49) m (m − 1)]
//! ```

use crate::error::{invalid, Error, Result};

/// `∫ N(u) (1 + u)² du`, the mean squared recoil factor of one emission.
pub const RECOIL_FACTOR: f64 = 7.0 / 5.0;

/// Physical inputs of the two-level repumping model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SchemeParams {
    /// Lamb-Dicke parameter `η = k a₀`.
    pub eta: f64,
    /// Probability that a decay returns the atom to |e⟩.
    pub p_e: f64,
    /// Initial Fock level.
    pub n0: usize,
    /// Effective linewidth of |e⟩ in units of the trap frequency. Only the
    /// trajectory simulation uses it.
    pub gamma_e_over_nu: f64,
}

/// Linewidth used when none is given: deep in the resolved, secular regime.
pub const DEFAULT_GAMMA_E_OVER_NU: f64 = 0.05;

impl SchemeParams {
    /// Validated parameters with the default linewidth ratio.
    ///
    /// `p_e = 1` is accepted here; operations that need a steady state
    /// reject it.
    pub fn new(eta: f64, p_e: f64, n0: usize) -> Result<Self> {
        if !eta.is_finite() || eta < 0.0 {
            return Err(invalid("eta", "must be finite and >= 0"));
        }
        if !(0.0..=1.0).contains(&p_e) {
            return Err(invalid("p_e", "must lie in [0, 1)"));
        }
        Ok(Self {
            eta,
            p_e,
            n0,
            gamma_e_over_nu: DEFAULT_GAMMA_E_OVER_NU,
        })
    }

    /// Replaces the linewidth ratio `γ_e/ν`.
    pub fn with_gamma_ratio(mut self, gamma_e_over_nu: f64) -> Result<Self> {
        if !gamma_e_over_nu.is_finite() || gamma_e_over_nu <= 0.0 {
            return Err(invalid("gamma_e_over_nu", "must be finite and > 0"));
        }
        self.gamma_e_over_nu = gamma_e_over_nu;
        Ok(self)
    }

    /// `p_g = 1 − p_e`.
    pub fn p_g(&self) -> f64 {
        1.0 - self.p_e
    }

    /// Mean recoil per emission, `(7/5) η²`.
    pub fn kappa(&self) -> f64 {
        RECOIL_FACTOR * self.eta * self.eta
    }

    pub(crate) fn require_steady_state(&self) -> Result<()> {
        if self.p_e >= 1.0 {
            Err(Error::NoSteadyState)
        } else {
            Ok(())
        }
    }
}

/// Branching of the extended level schemes with an extra lower state |1⟩
/// and, optionally, a second excited state |2⟩.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MultilevelParams {
    /// Decay probability from |r⟩ into |e⟩.
    pub p_e_prime: f64,
    /// Decay probability from |r⟩ into |1⟩.
    pub p_1: f64,
    /// Decay probability from |r⟩ into |g⟩.
    pub p_g_prime: f64,
    /// Ratio of scattering through |r⟩ to scattering through |2⟩; `None`
    /// for the scheme without |2⟩.
    pub a_ratio: Option<f64>,
}

impl MultilevelParams {
    /// Validates the probability triple (nonnegative, summing to 1 within
    /// 1e−12) and the ratio.
    pub fn new(p_e_prime: f64, p_1: f64, p_g_prime: f64, a_ratio: Option<f64>) -> Result<Self> {
        for (name, v) in [
            ("p_e_prime", p_e_prime),
            ("p_1", p_1),
            ("p_g_prime", p_g_prime),
        ] {
            if !v.is_finite() || v < 0.0 {
                return Err(invalid(name, "probabilities must be finite and >= 0"));
            }
        }
        let total = p_e_prime + p_1 + p_g_prime;
        if libm::fabs(total - 1.0) > 1e-12 {
            return Err(invalid(
                "p_g_prime",
                alloc::format!("p_e' + p_1 + p_g' = {total}, must be 1"),
            ));
        }
        if let Some(a) = a_ratio {
            if !a.is_finite() || a <= 0.0 {
                return Err(invalid("a_ratio", "must be finite and > 0"));
            }
        }
        Ok(Self {
            p_e_prime,
            p_1,
            p_g_prime,
            a_ratio,
        })
    }

    /// Builds the triple from `p_e'` and `p_1`, setting `p_g' = 1 − p_e' − p_1`.
    pub fn from_two(p_e_prime: f64, p_1: f64, a_ratio: Option<f64>) -> Result<Self> {
        Self::new(p_e_prime, p_1, 1.0 - p_e_prime - p_1, a_ratio)
    }
}

/// Which route produced a [`MomentReport`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MomentSource {
    /// Closed-form expressions.
    ClosedForm,
    /// Deterministic kernel resummation.
    KernelSeries,
    /// Quantum-jump trajectory ensemble.
    MonteCarlo,
}

impl MomentSource {
    /// Stable lower-case tag.
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::ClosedForm => "closed_form",
            Self::KernelSeries => "kernel_series",
            Self::MonteCarlo => "monte_carlo",
        }
    }
}

/// Relative deviations of a numeric result from the closed forms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RelErr {
    /// For the energy shift.
    pub delta_e: f64,
    /// For the energy variance.
    pub sigma2_e: f64,
}

impl RelErr {
    /// Larger of the two.
    pub fn max(&self) -> f64 {
        self.delta_e.max(self.sigma2_e)
    }
}

/// Shift and variance of the motional energy after the pulse.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentReport {
    /// Mean energy change, trap quanta.
    pub delta_e: f64,
    /// Energy variance, trap quanta squared.
    pub sigma2_e: f64,
    /// Single-effective-kick part of the variance, `κ(2n+1)/(1−p_e)`.
    pub sigma2_first_term: f64,
    /// `k_eff / k`.
    pub k_eff_over_k: f64,
    /// Route that produced `delta_e` and `sigma2_e`.
    pub source: MomentSource,
    /// Deviation from the closed forms, for numeric sources.
    pub rel_err_vs_closed_form: Option<RelErr>,
}

/// `|a − b| / |b|`, or `|a|` when `b = 0`.
pub fn rel_err(a: f64, b: f64) -> f64 {
    if b == 0.0 {
        libm::fabs(a)
    } else {
        libm::fabs(a - b) / libm::fabs(b)
    }
}

/// Mean energy shift `κ / (1 − p_e)`; does not depend on `n0`.
pub fn shift_closed_form(p: &SchemeParams) -> Result<f64> {
    p.require_steady_state()?;
    Ok(p.kappa() / p.p_g())
}

/// The two parts of the closed-form variance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VarianceTerms {
    /// Full expression.
    pub total: f64,
    /// `κ (2n+1) / (1 − p_e)` alone.
    pub first_term: f64,
}

/// Closed-form energy variance and its first term.
pub fn variance_closed_form(p: &SchemeParams) -> Result<VarianceTerms> {
    p.require_steady_state()?;
    let kappa = p.kappa();
    let p_g = p.p_g();
    let first_term = kappa * (2.0 * p.n0 as f64 + 1.0) / p_g;
    let second = kappa * kappa * (58.0 / 49.0) * p.p_e / (p_g * p_g);
    Ok(VarianceTerms {
        total: first_term + second,
        first_term,
    })
}

/// `k_eff / k = √(7/5) / √(1 − p_e)`.
pub fn k_eff(p: &SchemeParams) -> Result<f64> {
    p.require_steady_state()?;
    Ok(libm::sqrt(RECOIL_FACTOR / p.p_g()))
}

/// Effective Lamb-Dicke parameter `η k_eff / k`.
pub fn eta_eff(p: &SchemeParams) -> Result<f64> {
    Ok(p.eta * k_eff(p)?)
}

/// Whether a coherent pulse with axial two-photon wave vector
/// `k_x_coh_over_k · k` can compensate the mean kick, `k_x^coh ≥ k_eff`.
///
/// Compared as `r² (1 − p_e) ≥ 7/5` with a 1e−12 relative allowance, so the
/// boundary itself counts as fulfilled despite rounding.
pub fn confinement_condition(p: &SchemeParams, k_x_coh_over_k: f64) -> Result<bool> {
    if !k_x_coh_over_k.is_finite() || k_x_coh_over_k <= 0.0 {
        return Err(invalid("k_x_coh_over_k", "must be finite and > 0"));
    }
    p.require_steady_state()?;
    let lhs = k_x_coh_over_k * k_x_coh_over_k * p.p_g();
    Ok(lhs >= RECOIL_FACTOR * (1.0 - 1e-12))
}

/// Effective return probability of the extended schemes.
///
/// Without |2⟩ it is `p_e' + p_1`; with it,
/// `(p_e' + p_1) a/(1+a) + 1/(1+a)`.
pub fn effective_pe_multilevel(m: &MultilevelParams) -> f64 {
    let direct = m.p_e_prime + m.p_1;
    match m.a_ratio {
        None => direct,
        Some(a) => direct * a / (1.0 + a) + 1.0 / (1.0 + a),
    }
}

fn path_weight(p: &SchemeParams, m: usize) -> Result<f64> {
    p.require_steady_state()?;
    if m < 1 {
        return Err(invalid("m", "number of emissions must be >= 1"));
    }
    Ok(p.p_g() * libm::pow(p.p_e, (m - 1) as f64))
}

/// `B_m^n = p_g p_e^(m−1) κ m`.
pub fn appendix_term_b(p: &SchemeParams, m: usize) -> Result<f64> {
    Ok(path_weight(p, m)? * p.kappa() * m as f64)
}

/// `A_m^n = p_g p_e^(m−1) [κ (2n+1) m + κ² (29/49) m (m−1)]`.
pub fn appendix_term_a(p: &SchemeParams, m: usize) -> Result<f64> {
    let kappa = p.kappa();
    let mf = m as f64;
    let bracket =
        kappa * (2.0 * p.n0 as f64 + 1.0) * mf + kappa * kappa * (29.0 / 49.0) * mf * (mf - 1.0);
    Ok(path_weight(p, m)? * bracket)
}

/// Closed-form report for `p`.
pub fn closed_form_report(p: &SchemeParams) -> Result<MomentReport> {
    let var = variance_closed_form(p)?;
    Ok(MomentReport {
        delta_e: shift_closed_form(p)?,
        sigma2_e: var.total,
        sigma2_first_term: var.first_term,
        k_eff_over_k: k_eff(p)?,
        source: MomentSource::ClosedForm,
        rel_err_vs_closed_form: None,
    })
}
