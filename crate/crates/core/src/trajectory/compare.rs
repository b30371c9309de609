use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use super::{trajectory_rng, TrajectoryEnsemble};
use crate::error::{invalid, Error, Result};
use crate::pump::PumpDistribution;

/// Significance settings for [`compare_to_solver`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CompareOptions {
    /// Largest accepted `|z|` for the moment comparisons.
    pub z_crit: f64,
    /// Significance level of the total-variation test.
    pub alpha: f64,
    /// Multinomial replicates drawn for the total-variation null.
    pub null_replicates: u32,
    /// Seed of the null draws.
    pub null_seed: u64,
}

impl Default for CompareOptions {
    fn default() -> Self {
        Self {
            z_crit: 3.0,
            alpha: 0.05,
            null_replicates: 400,
            null_seed: 0x005e_ed0f_7e57,
        }
    }
}

/// Statistical comparison of a trajectory ensemble with the secular
/// distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverComparison {
    /// `(P̄_s − D_s) / se_s` per level.
    pub per_bin_z: Vec<f64>,
    /// `½ Σ_s |P̄_s − D_s|`, with `D` renormalised to unit mass.
    pub tv_distance: f64,
    /// `1 − alpha` quantile of the TV distance between `D` and the
    /// empirical distribution of the same number of multinomial draws.
    pub tv_null_quantile: f64,
    /// Fraction of null replicates at least as far from `D` as the ensemble.
    pub tv_p_value: f64,
    /// Shift from the solver distribution.
    pub solver_shift: f64,
    /// Variance from the solver distribution.
    pub solver_variance: f64,
    /// `(mean_shift − solver_shift) / stderr_shift`.
    pub shift_z: f64,
    /// `(variance_estimate − solver_variance) / stderr_variance`.
    pub variance_z: f64,
    /// Both moment `z`s within `z_crit` and TV not significant at `alpha`.
    pub consistent: bool,
}

fn z_score(diff: f64, se: f64) -> f64 {
    if se > 0.0 {
        diff / se
    } else if libm::fabs(diff) <= 1e-12 {
        0.0
    } else {
        f64::INFINITY
    }
}

fn tv(a: &[f64], b: &[f64]) -> f64 {
    let len = a.len().max(b.len());
    0.5 * (0..len)
        .map(|s| {
            let x = a.get(s).copied().unwrap_or(0.0);
            let y = b.get(s).copied().unwrap_or(0.0);
            libm::fabs(x - y)
        })
        .sum::<f64>()
}

/// Compares `ens` with the solver distribution `d` for the same
/// `(η, p_e, n0)`.
pub fn compare_to_solver(
    ens: &TrajectoryEnsemble,
    d: &PumpDistribution,
    opts: &CompareOptions,
) -> Result<SolverComparison> {
    let (a, b) = (&ens.params, &d.params);
    if a.eta != b.eta || libm::fabs(a.p_e - b.p_e) > 1e-12 || a.n0 != b.n0 {
        return Err(Error::ParameterMismatch(format!(
            "ensemble (eta {}, p_e {}, n0 {}) vs solver (eta {}, p_e {}, n0 {})",
            a.eta, a.p_e, a.n0, b.eta, b.p_e, b.n0
        )));
    }
    if ens.n_accepted == 0 {
        return Err(invalid("ensemble", "no accepted trajectories"));
    }
    if !(opts.alpha > 0.0 && opts.alpha < 1.0) || opts.null_replicates == 0 {
        return Err(invalid(
            "alpha",
            "need 0 < alpha < 1 and at least one replicate",
        ));
    }

    // the solver distribution is renormalised so truncation leakage and the
    // series tail do not count as disagreement
    let total: f64 = d.probs.iter().sum();
    let target: Vec<f64> = d.probs.iter().map(|p| p / total).collect();
    let len = ens.final_populations.len().max(target.len());
    let per_bin_z = (0..len)
        .map(|s| {
            let p = ens.final_populations.get(s).copied().unwrap_or(0.0);
            let q = target.get(s).copied().unwrap_or(0.0);
            let se = ens.population_stderr.get(s).copied().unwrap_or(0.0);
            z_score(p - q, se)
        })
        .collect();
    let tv_distance = tv(&ens.final_populations, &target);

    let mut cdf = Vec::with_capacity(target.len());
    let mut run = 0.0;
    for p in &target {
        run += p;
        cdf.push(run);
    }
    let draws = ens.n_accepted;
    let mut null = Vec::with_capacity(opts.null_replicates as usize);
    let mut counts = vec![0u64; cdf.len()];
    for r in 0..opts.null_replicates {
        let mut rng = trajectory_rng(opts.null_seed, r as u64);
        counts.iter_mut().for_each(|c| *c = 0);
        for _ in 0..draws {
            let x = rng.random::<f64>();
            let s = cdf.partition_point(|&c| c <= x).min(cdf.len() - 1);
            counts[s] += 1;
        }
        let emp: Vec<f64> = counts.iter().map(|&c| c as f64 / draws as f64).collect();
        null.push(tv(&emp, &target));
    }
    null.sort_by(f64::total_cmp);
    let at_least = null.iter().filter(|&&t| t >= tv_distance).count();
    let tv_p_value = (1 + at_least) as f64 / (1 + null.len()) as f64;
    let q_index = libm::ceil((1.0 - opts.alpha) * null.len() as f64) as usize;
    let tv_null_quantile = null[q_index.clamp(1, null.len()) - 1];

    let (solver_shift, solver_variance) = d.raw_moments();
    let shift_z = z_score(ens.mean_shift - solver_shift, ens.stderr_shift);
    let variance_z = z_score(ens.variance_estimate - solver_variance, ens.stderr_variance);
    let consistent = libm::fabs(shift_z) <= opts.z_crit
        && libm::fabs(variance_z) <= opts.z_crit
        && tv_p_value >= opts.alpha;
    Ok(SolverComparison {
        per_bin_z,
        tv_distance,
        tv_null_quantile,
        tv_p_value,
        solver_shift,
        solver_variance,
        shift_z,
        variance_z,
        consistent,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytics::SchemeParams;
    use crate::fock::{build_kernel, gauss_legendre};
    use crate::pump::solve_series;
    use crate::trajectory::{run_ensemble, TrajectoryConfig};

    fn setup(eta: f64, p_e: f64, gamma: f64, traj: u64) -> (TrajectoryEnsemble, PumpDistribution) {
        let p = SchemeParams::new(eta, p_e, 0)
            .unwrap()
            .with_gamma_ratio(gamma)
            .unwrap();
        let ens = run_ensemble(&TrajectoryConfig::new(p, traj, 9)).unwrap();
        let k = build_kernel(eta, 150, &gauss_legendre(32).unwrap()).unwrap();
        let d = solve_series(&k, &p, 1e-12).unwrap();
        (ens, d)
    }

    #[test]
    fn trivial_distributions_have_zero_distance() {
        let (ens, d) = setup(0.0, 0.4, 0.05, 50);
        let c = compare_to_solver(&ens, &d, &CompareOptions::default()).unwrap();
        assert_eq!(c.tv_distance, 0.0);
        assert!(c.consistent);
    }

    #[test]
    fn single_emission_matches_kernel_column_for_any_linewidth() {
        for gamma in [0.05, 10.0] {
            let (ens, d) = setup(0.5, 0.0, gamma, 3000);
            let c = compare_to_solver(&ens, &d, &CompareOptions::default()).unwrap();
            assert!(c.consistent, "gamma {gamma}: {c:?}");
        }
    }

    #[test]
    fn mismatched_parameters_rejected() {
        let (ens, _) = setup(0.2, 0.5, 0.05, 10);
        let (_, d) = setup(0.3, 0.5, 0.05, 1);
        assert!(matches!(
            compare_to_solver(&ens, &d, &CompareOptions::default()),
            Err(Error::ParameterMismatch(_))
        ));
    }
}
