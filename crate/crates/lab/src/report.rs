//! JSON shapes printed by the subcommands. Field order is the key order.

use repump_core::pump::AdaptiveSolution;
use repump_core::trajectory::{SolverComparison, TrajectoryConfig, TrajectoryEnsemble};
use repump_core::{MomentReport, MultilevelParams, SchemeParams};
use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RelErrJson {
    #[serde(rename = "delta_E")]
    pub delta_e: f64,
    #[serde(rename = "sigma2_E")]
    pub sigma2_e: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MomentJson {
    pub source: &'static str,
    #[serde(rename = "delta_E")]
    pub delta_e: f64,
    #[serde(rename = "sigma2_E")]
    pub sigma2_e: f64,
    pub sigma2_first_term: f64,
    pub k_eff_over_k: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rel_err_vs_closed_form: Option<RelErrJson>,
}

impl From<&MomentReport> for MomentJson {
    fn from(r: &MomentReport) -> Self {
        Self {
            source: r.source.as_str(),
            delta_e: r.delta_e,
            sigma2_e: r.sigma2_e,
            sigma2_first_term: r.sigma2_first_term,
            k_eff_over_k: r.k_eff_over_k,
            rel_err_vs_closed_form: r.rel_err_vs_closed_form.map(|e| RelErrJson {
                delta_e: e.delta_e,
                sigma2_e: e.sigma2_e,
            }),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ParamsJson {
    pub eta: f64,
    pub p_e: f64,
    pub p_g: f64,
    pub n0: usize,
}

impl From<&SchemeParams> for ParamsJson {
    fn from(p: &SchemeParams) -> Self {
        Self {
            eta: p.eta,
            p_e: p.p_e,
            p_g: p.p_g(),
            n0: p.n0,
        }
    }
}

/// Solver details reported next to the kernel-series moments.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolverJson {
    #[serde(flatten)]
    pub moments: MomentJson,
    pub method: &'static str,
    pub n_max: usize,
    pub leakage: f64,
    pub reachable_column_leakage: f64,
    pub quad_order: usize,
    pub series_terms: usize,
}

impl SolverJson {
    pub fn new(report: &MomentReport, sol: &AdaptiveSolution) -> Self {
        let d = &sol.distribution;
        Self {
            moments: report.into(),
            method: d.method.as_str(),
            n_max: d.n_max(),
            leakage: d.leakage,
            reachable_column_leakage: sol.reachable_column_leakage,
            quad_order: sol.quad_order,
            series_terms: d.series_terms,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VerifyJson {
    pub tolerance: f64,
    pub max_rel_err: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MomentsOutput {
    pub params: ParamsJson,
    pub closed_form: MomentJson,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kernel_series: Option<SolverJson>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub verification: Option<VerifyJson>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MultilevelJson {
    pub p_e_prime: f64,
    pub p_1: f64,
    pub p_g_prime: f64,
    pub a: Option<f64>,
}

impl From<&MultilevelParams> for MultilevelJson {
    fn from(m: &MultilevelParams) -> Self {
        Self {
            p_e_prime: m.p_e_prime,
            p_1: m.p_1,
            p_g_prime: m.p_g_prime,
            a: m.a_ratio,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MultilevelOutput {
    pub scheme: &'static str,
    #[serde(flatten)]
    pub probabilities: MultilevelJson,
    pub p_e_effective: f64,
    pub params: ParamsJson,
    pub closed_form: MomentJson,
}

/// Echo of the trajectory configuration. The worker count is left out so
/// the report does not depend on it.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct McConfigJson {
    pub eta: f64,
    pub p_e: f64,
    pub n0: usize,
    pub gamma_e_over_nu: f64,
    pub gamma_1_over_nu: Option<f64>,
    pub multilevel: Option<MultilevelJson>,
    pub n_trajectories: u64,
    pub seed: u64,
    pub n_max: usize,
    pub max_jumps: u32,
}

impl From<&TrajectoryConfig> for McConfigJson {
    fn from(c: &TrajectoryConfig) -> Self {
        Self {
            eta: c.params.eta,
            p_e: c.params.p_e,
            n0: c.params.n0,
            gamma_e_over_nu: c.params.gamma_e_over_nu,
            gamma_1_over_nu: c.gamma_1_over_nu,
            multilevel: c.multilevel.as_ref().map(Into::into),
            n_trajectories: c.n_trajectories,
            seed: c.seed,
            n_max: c.n_max,
            max_jumps: c.max_jumps,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonJson {
    pub solver_shift: f64,
    pub solver_variance: f64,
    pub shift_z: f64,
    pub variance_z: f64,
    pub jumps_expected: f64,
    pub jumps_z: f64,
    pub tv_null_quantile: f64,
    pub tv_p_value: f64,
    pub consistent: bool,
}

/// Solver comparison plus the jump-count check.
#[derive(Debug, Clone, Copy)]
pub struct CheckedComparison<'a> {
    pub comparison: &'a SolverComparison,
    pub jumps_expected: f64,
    pub jumps_z: f64,
    /// Solver agreement and `|jumps_z|` within the critical value.
    pub consistent: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct McOutput {
    pub config: McConfigJson,
    pub mean_shift: f64,
    pub stderr_shift: f64,
    pub variance_estimate: f64,
    pub stderr_variance: f64,
    pub mean_jumps: f64,
    pub stderr_jumps: f64,
    pub n_accepted: u64,
    pub excluded_trajectories: u64,
    pub max_truncation_loss: f64,
    pub tv_distance_vs_solver: Option<f64>,
    pub comparison: Option<ComparisonJson>,
    pub final_populations: Vec<f64>,
}

impl McOutput {
    pub fn new(
        cfg: &TrajectoryConfig,
        ens: &TrajectoryEnsemble,
        cmp: Option<&CheckedComparison<'_>>,
    ) -> Self {
        Self {
            config: cfg.into(),
            mean_shift: ens.mean_shift,
            stderr_shift: ens.stderr_shift,
            variance_estimate: ens.variance_estimate,
            stderr_variance: ens.stderr_variance,
            mean_jumps: ens.mean_jump_count,
            stderr_jumps: ens.stderr_jump_count,
            n_accepted: ens.n_accepted,
            excluded_trajectories: ens.excluded_trajectories,
            max_truncation_loss: ens.max_truncation_loss,
            tv_distance_vs_solver: cmp.map(|c| c.comparison.tv_distance),
            comparison: cmp.map(|k| {
                let c = k.comparison;
                ComparisonJson {
                    solver_shift: c.solver_shift,
                    solver_variance: c.solver_variance,
                    shift_z: c.shift_z,
                    variance_z: c.variance_z,
                    jumps_expected: k.jumps_expected,
                    jumps_z: k.jumps_z,
                    tv_null_quantile: c.tv_null_quantile,
                    tv_p_value: c.tv_p_value,
                    consistent: k.consistent,
                }
            }),
            final_populations: ens.final_populations.clone(),
        }
    }
}
