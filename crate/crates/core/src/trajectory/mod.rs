//! Quantum-jump unraveling of the reduced repumping dynamics.
//!
//! A trajectory starts in `|e, n0⟩`. While the internal state can decay,
//! the waiting time to the next emission is exponential with that state's
//! linewidth (the anti-Hermitian part of the effective Hamiltonian is
//! proportional to the internal projector, so the norm decays uniformly)
//! and every Fock amplitude picks up the phase `e^(−i s τ)`. At an emission
//! the direction cosine `u` is drawn from the dipole pattern, the motional
//! state is kicked by `exp(−iη(1+u)(a+a†))` and the internal state is
//! routed by the branching probabilities. The trajectory ends when the
//! atom reaches |g⟩.
//!
//! Unlike [`crate::pump`], coherences between Fock levels survive from one
//! emission to the next, so the ensemble also measures what the secular map
//! leaves out.

mod compare;

pub use compare::{compare_to_solver, CompareOptions, SolverComparison};

use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::analytics::{effective_pe_multilevel, MultilevelParams, SchemeParams};
use crate::error::{invalid, Error, Result};
use crate::fock::{suggested_n_max, visit_displacement, DipolePattern};
use crate::stats::{mean_and_stderr, mixture_variance_jackknife};

/// Norm a trajectory may lose past `n_max` before the run is rejected.
pub const MAX_TRUNCATION_LOSS: f64 = 1e-6;
/// Amplitudes with `|ψ_s|²` below this are dropped from the top of the
/// working window after each kick.
const TRIM_THRESHOLD: f64 = 1e-30;
/// Default cap on emissions per trajectory.
pub const DEFAULT_MAX_JUMPS: u32 = 10_000;

/// Settings of an ensemble run.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryConfig {
    /// Physical parameters. With `multilevel` set, `p_e` holds the
    /// effective return probability of that scheme.
    pub params: SchemeParams,
    /// Extended level scheme used for routing, if any.
    pub multilevel: Option<MultilevelParams>,
    /// Linewidth of |1⟩ over `ν`; defaults to `γ_e/ν`.
    pub gamma_1_over_nu: Option<f64>,
    /// Number of trajectories.
    pub n_trajectories: u64,
    /// Seed of the per-trajectory generator streams.
    pub seed: u64,
    /// Highest Fock level a trajectory may occupy.
    pub n_max: usize,
    /// Emissions after which a trajectory is abandoned and excluded.
    pub max_jumps: u32,
}

/// Non-fatal configuration remarks.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ConfigWarning {
    /// The mean number of emissions is not small against `max_jumps`.
    JumpCapTight {
        /// `1 / (1 − p_e)`.
        expected_jumps: f64,
        /// Configured cap.
        max_jumps: u32,
    },
}

impl TrajectoryConfig {
    /// Two-level configuration with the suggested cutoff and default cap.
    pub fn new(params: SchemeParams, n_trajectories: u64, seed: u64) -> Self {
        let n_max = if params.p_e < 1.0 {
            suggested_n_max(params.eta, params.p_e, params.n0)
        } else {
            params.n0
        };
        Self {
            params,
            multilevel: None,
            gamma_1_over_nu: None,
            n_trajectories,
            seed,
            n_max,
            max_jumps: DEFAULT_MAX_JUMPS,
        }
    }

    /// Switches to multilevel routing; `params.p_e` and the suggested
    /// cutoff follow the effective return probability.
    pub fn with_multilevel(mut self, m: MultilevelParams) -> Self {
        self.params.p_e = effective_pe_multilevel(&m);
        self.multilevel = Some(m);
        if self.params.p_e < 1.0 {
            self.n_max = suggested_n_max(self.params.eta, self.params.p_e, self.params.n0);
        }
        self
    }

    /// Checks the invariants and reports soft problems.
    pub fn validate(&self) -> Result<Vec<ConfigWarning>> {
        self.params.require_steady_state()?;
        if self.n_trajectories < 1 {
            return Err(invalid("n_trajectories", "must be >= 1"));
        }
        if self.max_jumps < 1 {
            return Err(invalid("max_jumps", "must be >= 1"));
        }
        if self.params.n0 > self.n_max {
            return Err(Error::LevelOutOfRange {
                n0: self.params.n0,
                n_max: self.n_max,
            });
        }
        let g = self.params.gamma_e_over_nu;
        if !g.is_finite() || g <= 0.0 {
            return Err(invalid("gamma_e_over_nu", "must be finite and > 0"));
        }
        if let Some(g1) = self.gamma_1_over_nu {
            if !g1.is_finite() || g1 <= 0.0 {
                return Err(invalid("gamma_1_over_nu", "must be finite and > 0"));
            }
        }
        let mut warnings = Vec::new();
        let expected_jumps = 1.0 / self.params.p_g();
        if expected_jumps * 100.0 > self.max_jumps as f64 {
            warnings.push(ConfigWarning::JumpCapTight {
                expected_jumps,
                max_jumps: self.max_jumps,
            });
        }
        Ok(warnings)
    }

    fn rate(&self, state: Internal) -> f64 {
        match state {
            Internal::One => self.gamma_1_over_nu.unwrap_or(self.params.gamma_e_over_nu),
            _ => self.params.gamma_e_over_nu,
        }
    }

    fn route<R: RngCore>(&self, rng: &mut R) -> Internal {
        match &self.multilevel {
            None => {
                if rng.random::<f64>() < self.params.p_g() {
                    Internal::G
                } else {
                    Internal::E
                }
            }
            Some(m) => {
                let through_r = match m.a_ratio {
                    None => true,
                    Some(a) => rng.random::<f64>() < a / (1.0 + a),
                };
                let r = rng.random::<f64>();
                if through_r {
                    if r < m.p_g_prime {
                        Internal::G
                    } else if r < m.p_g_prime + m.p_e_prime {
                        Internal::E
                    } else {
                        Internal::One
                    }
                } else if r < 0.5 {
                    // |2⟩ decays back to |e⟩ or |1⟩ only
                    Internal::E
                } else {
                    Internal::One
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Internal {
    E,
    One,
    G,
}

/// Draws an emission direction cosine with density `3/8 (1 + u²)`.
pub fn sample_emission_direction<R: RngCore>(rng: &mut R) -> f64 {
    DipolePattern.inverse_cdf(rng.random::<f64>())
}

/// Generator for trajectory `index`: the seed fixes the key, the index
/// selects the stream, so trajectories are independent of scheduling.
pub fn trajectory_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Result of one trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryOutcome {
    /// `|⟨s|φ⟩|²` of the final motional state, levels `0..len`.
    pub populations: Vec<f64>,
    /// Number of emissions.
    pub jumps: u32,
    /// Norm lost past `n_max` (and by trimming negligible amplitudes).
    pub truncation_loss: f64,
    /// Hit the jump cap; not part of the statistics.
    pub excluded: bool,
}

#[inline]
fn minus_i_pow(d: usize) -> Complex64 {
    match d % 4 {
        0 => Complex64::new(1.0, 0.0),
        1 => Complex64::new(0.0, -1.0),
        2 => Complex64::new(-1.0, 0.0),
        _ => Complex64::new(0.0, 1.0),
    }
}

/// Applies `exp(−iβ(a+a†))` to `psi`, growing the window as needed but never
/// past `n_max`. Returns the new state (renormalised) and the norm lost.
fn kick(psi: &[Complex64], beta: f64, n_max: usize) -> (Vec<Complex64>, f64) {
    let len = psi.len();
    let norm_in: f64 = psi.iter().map(|a| a.norm_sqr()).sum();
    let spread = libm::fabs(beta) * libm::sqrt(len as f64);
    let mut margin = 8 + libm::ceil(6.0 * spread + 2.0 * beta * beta) as usize;
    loop {
        let top = (len - 1 + margin).min(n_max);
        let dim = top + 1;
        let mut out = vec![Complex64::new(0.0, 0.0); dim];
        visit_displacement(beta, dim, |m, n, r| {
            let phase = minus_i_pow(m - n) * r;
            if n < len {
                out[m] += phase * psi[n];
            }
            if m != n && m < len {
                out[n] += phase * psi[m];
            }
        });
        let norm_out: f64 = out.iter().map(|a| a.norm_sqr()).sum();
        let lost = (norm_in - norm_out).max(0.0);
        if top < n_max && lost > 1e-13 {
            margin *= 2;
            continue;
        }
        let keep = out
            .iter()
            .rposition(|a| a.norm_sqr() > TRIM_THRESHOLD)
            .map_or(1, |i| i + 1);
        let trimmed: f64 = out[keep..].iter().map(|a| a.norm_sqr()).sum();
        out.truncate(keep);
        let norm = norm_out - trimmed;
        let scale = 1.0 / libm::sqrt(norm);
        for a in out.iter_mut() {
            *a *= scale;
        }
        let loss = if top == n_max { lost } else { 0.0 } + trimmed;
        return (out, loss);
    }
}

/// Runs trajectory `index` of `cfg`.
pub fn simulate_trajectory(cfg: &TrajectoryConfig, index: u64) -> Result<TrajectoryOutcome> {
    let mut rng = trajectory_rng(cfg.seed, index);
    let eta = cfg.params.eta;
    let mut psi = vec![Complex64::new(0.0, 0.0); cfg.params.n0 + 1];
    psi[cfg.params.n0] = Complex64::new(1.0, 0.0);
    let mut state = Internal::E;
    let mut jumps = 0u32;
    let mut loss = 0.0;
    while state != Internal::G {
        if jumps >= cfg.max_jumps {
            return Ok(TrajectoryOutcome {
                populations: Vec::new(),
                jumps,
                truncation_loss: loss,
                excluded: true,
            });
        }
        let rate = cfg.rate(state);
        let tau = -libm::log(1.0 - rng.random::<f64>()) / rate;
        for (s, a) in psi.iter_mut().enumerate() {
            let phi = s as f64 * tau;
            *a *= Complex64::new(libm::cos(phi), -libm::sin(phi));
        }
        let u = sample_emission_direction(&mut rng);
        let (next, lost) = kick(&psi, eta * (1.0 + u), cfg.n_max);
        psi = next;
        loss += lost;
        if loss > MAX_TRUNCATION_LOSS {
            return Err(Error::TruncationOverflow {
                trajectory: index,
                loss,
                n_max: cfg.n_max,
            });
        }
        jumps += 1;
        state = cfg.route(&mut rng);
    }
    Ok(TrajectoryOutcome {
        populations: psi.iter().map(|a| a.norm_sqr()).collect(),
        jumps,
        truncation_loss: loss,
        excluded: false,
    })
}

/// Ensemble statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryEnsemble {
    /// Parameters simulated (effective `p_e` for multilevel runs).
    pub params: SchemeParams,
    /// Seed of the run.
    pub seed: u64,
    /// Trajectories requested.
    pub n_trajectories: u64,
    /// Trajectories that reached |g⟩ within the jump cap.
    pub n_accepted: u64,
    /// Trajectories dropped at the jump cap.
    pub excluded_trajectories: u64,
    /// Mean final populations over accepted trajectories.
    pub final_populations: Vec<f64>,
    /// Standard error of each mean population.
    pub population_stderr: Vec<f64>,
    /// Mean energy change, trap quanta.
    pub mean_shift: f64,
    /// Its standard error.
    pub stderr_shift: f64,
    /// Variance of the pooled final energy distribution.
    pub variance_estimate: f64,
    /// Jackknife standard error of `variance_estimate`.
    pub stderr_variance: f64,
    /// Mean number of emissions.
    pub mean_jump_count: f64,
    /// Its standard error.
    pub stderr_jump_count: f64,
    /// Largest per-trajectory truncation loss.
    pub max_truncation_loss: f64,
}

/// Folds trajectory outcomes in the order they are pushed.
#[derive(Debug, Clone, Default)]
pub struct EnsembleAccumulator {
    n0: usize,
    pop_sum: Vec<f64>,
    pop_sq_sum: Vec<f64>,
    first: Vec<f64>,
    second: Vec<f64>,
    jumps: Vec<f64>,
    excluded: u64,
    max_loss: f64,
}

impl EnsembleAccumulator {
    /// Accumulator for trajectories started at level `n0`.
    pub fn new(n0: usize) -> Self {
        Self {
            n0,
            ..Self::default()
        }
    }

    /// Adds one outcome.
    pub fn push(&mut self, outcome: &TrajectoryOutcome) {
        self.max_loss = self.max_loss.max(outcome.truncation_loss);
        if outcome.excluded {
            self.excluded += 1;
            return;
        }
        let p = &outcome.populations;
        if p.len() > self.pop_sum.len() {
            self.pop_sum.resize(p.len(), 0.0);
            self.pop_sq_sum.resize(p.len(), 0.0);
        }
        let n0 = self.n0 as f64;
        let mut m1 = 0.0;
        let mut m2 = 0.0;
        for (s, &v) in p.iter().enumerate() {
            self.pop_sum[s] += v;
            self.pop_sq_sum[s] += v * v;
            let d = s as f64 - n0;
            m1 += d * v;
            m2 += d * d * v;
        }
        self.first.push(m1);
        self.second.push(m2);
        self.jumps.push(outcome.jumps as f64);
    }

    /// Final statistics.
    pub fn finish(self, cfg: &TrajectoryConfig) -> TrajectoryEnsemble {
        let n = self.first.len();
        let nf = n as f64;
        let final_populations: Vec<f64> = self.pop_sum.iter().map(|s| s / nf).collect();
        let population_stderr = self
            .pop_sum
            .iter()
            .zip(&self.pop_sq_sum)
            .map(|(s, sq)| {
                if n < 2 {
                    return 0.0;
                }
                let mean = s / nf;
                let var = ((sq - nf * mean * mean) / (nf - 1.0)).max(0.0);
                libm::sqrt(var / nf)
            })
            .collect();
        let (mean_shift, stderr_shift) = mean_and_stderr(&self.first);
        let (variance_estimate, stderr_variance) =
            mixture_variance_jackknife(&self.first, &self.second);
        let (mean_jump_count, stderr_jump_count) = mean_and_stderr(&self.jumps);
        TrajectoryEnsemble {
            params: cfg.params,
            seed: cfg.seed,
            n_trajectories: cfg.n_trajectories,
            n_accepted: n as u64,
            excluded_trajectories: self.excluded,
            final_populations,
            population_stderr,
            mean_shift,
            stderr_shift,
            variance_estimate,
            stderr_variance,
            mean_jump_count,
            stderr_jump_count,
            max_truncation_loss: self.max_loss,
        }
    }
}

/// Runs the whole ensemble sequentially.
pub fn run_ensemble(cfg: &TrajectoryConfig) -> Result<TrajectoryEnsemble> {
    cfg.validate()?;
    let mut acc = EnsembleAccumulator::new(cfg.params.n0);
    for i in 0..cfg.n_trajectories {
        acc.push(&simulate_trajectory(cfg, i)?);
    }
    Ok(acc.finish(cfg))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytics::shift_closed_form;

    fn cfg(eta: f64, p_e: f64, n0: usize, gamma: f64, traj: u64, seed: u64) -> TrajectoryConfig {
        let p = SchemeParams::new(eta, p_e, n0)
            .unwrap()
            .with_gamma_ratio(gamma)
            .unwrap();
        TrajectoryConfig::new(p, traj, seed)
    }

    #[test]
    fn no_recoil_stays_put() {
        let e = run_ensemble(&cfg(0.0, 0.3, 2, 1.0, 100, 7)).unwrap();
        assert_eq!(e.mean_shift, 0.0);
        assert_eq!(e.variance_estimate, 0.0);
        assert_eq!(e.final_populations[2], 1.0);
        assert_eq!(e.final_populations.iter().sum::<f64>(), 1.0);
    }

    #[test]
    fn kick_preserves_norm_and_matches_magnitudes() {
        let mut psi = vec![Complex64::new(0.0, 0.0); 4];
        psi[3] = Complex64::new(1.0, 0.0);
        let (out, loss) = kick(&psi, 0.8, 200);
        assert!(loss < 1e-20);
        let norm: f64 = out.iter().map(|a| a.norm_sqr()).sum();
        assert!((norm - 1.0).abs() < 1e-13);
        let m = crate::fock::displacement_magnitude_sq(0.8, 60).unwrap();
        for (s, a) in out.iter().enumerate().take(40) {
            assert!((a.norm_sqr() - m.get(s, 3)).abs() < 1e-14);
        }
    }

    #[test]
    fn kick_reports_truncation_loss() {
        let mut psi = vec![Complex64::new(0.0, 0.0); 3];
        psi[2] = Complex64::new(1.0, 0.0);
        let (_, loss) = kick(&psi, 1.5, 3);
        assert!(loss > 1e-3);
    }

    #[test]
    fn overflow_is_an_error() {
        let mut c = cfg(0.8, 0.5, 0, 0.05, 50, 1);
        c.n_max = 2;
        assert!(matches!(
            run_ensemble(&c),
            Err(Error::TruncationOverflow { .. })
        ));
    }

    #[test]
    fn jump_cap_excludes() {
        let mut c = cfg(0.1, 0.9, 0, 0.05, 200, 3);
        c.max_jumps = 1;
        let e = run_ensemble(&c).unwrap();
        assert!(e.excluded_trajectories > 100);
        assert_eq!(e.n_accepted + e.excluded_trajectories, 200);
        assert_eq!(e.mean_jump_count, 1.0);
        assert!(!c.validate().unwrap().is_empty());
    }

    #[test]
    fn identical_seeds_identical_ensembles() {
        let c = cfg(0.3, 0.5, 1, 0.05, 300, 42);
        assert_eq!(run_ensemble(&c).unwrap(), run_ensemble(&c).unwrap());
        let mut other = c.clone();
        other.seed = 43;
        assert_ne!(run_ensemble(&c).unwrap(), run_ensemble(&other).unwrap());
    }

    #[test]
    fn secular_shift_within_noise() {
        let c = cfg(0.3, 0.5, 0, 0.05, 4000, 11);
        let e = run_ensemble(&c).unwrap();
        let want = shift_closed_form(&c.params).unwrap();
        assert!((e.mean_shift - want).abs() <= 3.0 * e.stderr_shift);
        assert!((e.final_populations.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn multilevel_jump_statistics() {
        let m = MultilevelParams::from_two(0.1, 0.2, Some(1.0)).unwrap();
        let c = cfg(0.2, 0.0, 0, 0.05, 4000, 5).with_multilevel(m);
        assert!((c.params.p_e - 0.65).abs() < 1e-15);
        let e = run_ensemble(&c).unwrap();
        let want = 1.0 / 0.35;
        assert!((e.mean_jump_count - want).abs() <= 3.0 * e.stderr_jump_count);
    }

    #[test]
    fn emission_direction_in_range() {
        let mut rng = trajectory_rng(1, 0);
        for _ in 0..10_000 {
            let u = sample_emission_direction(&mut rng);
            assert!((-1.0..=1.0).contains(&u));
        }
    }

    #[test]
    fn invalid_configs() {
        let mut c = cfg(0.1, 0.5, 0, 0.05, 10, 1);
        c.n_trajectories = 0;
        assert!(c.validate().is_err());
        let c = cfg(0.1, 1.0, 0, 0.05, 10, 1);
        assert_eq!(c.validate(), Err(Error::NoSteadyState));
    }
}
