//! The invariant suite behind `repump validate`.

use rand::Rng;
use repump_core::analytics::{
    appendix_term_a, appendix_term_b, closed_form_report, confinement_condition,
    effective_pe_multilevel, k_eff, rel_err,
};
use repump_core::fock::{build_kernel, gauss_legendre, suggested_n_max, DEFAULT_QUAD_ORDER};
use repump_core::pump::{
    brute_force_am_bm, moments, solve_adaptive, solve_linear, solve_series, KernelCache,
    SolveOptions,
};
use repump_core::trajectory::{
    compare_to_solver, trajectory_rng, CompareOptions, TrajectoryConfig,
};
use repump_core::{MomentReport, MultilevelParams, Result as CoreResult, SchemeParams};

use crate::error::{LabError, Result};
use crate::parallel::run_ensemble_parallel;
use crate::sweep::{self, SweepSpec};

/// Relative tolerance of the closed-form comparisons.
pub const CLOSED_FORM_TOL: f64 = 1e-6;

/// Lamb-Dicke parameters of the deterministic grid.
pub const GRID_ETAS: [f64; 3] = [0.1, 0.3, 0.6];
/// Return probabilities of the deterministic grid.
pub const GRID_PES: [f64; 4] = [0.0, 0.2, 0.5, 0.8];
/// Initial levels of the moment grid.
pub const GRID_N0S: [usize; 3] = [0, 1, 5];
/// Initial levels of the per-emission grid.
pub const APPENDIX_N0S: [usize; 2] = [0, 2];
/// `(η, p_e)` points of the Monte Carlo checks.
pub const MC_POINTS: [(f64, f64); 2] = [(0.1, 0.5), (0.3, 0.2)];

/// How much of the suite to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SuiteLevel {
    /// Deterministic checks only.
    Quick,
    /// Deterministic checks and a 2000-trajectory Monte Carlo check.
    Default,
    /// Deterministic checks and 10^4-trajectory Monte Carlo checks.
    Full,
}

/// Which exit code a failing check maps to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CheckKind {
    Numerical,
    Statistical,
}

/// One row of the table.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub name: String,
    pub kind: CheckKind,
    pub passed: bool,
    pub detail: String,
}

impl CheckResult {
    fn new(name: &str, kind: CheckKind, passed: bool, detail: String) -> Self {
        Self {
            name: name.to_string(),
            kind,
            passed,
            detail,
        }
    }

    fn from_outcome(name: &str, kind: CheckKind, r: CoreResult<(bool, String)>) -> Self {
        match r {
            Ok((passed, detail)) => Self::new(name, kind, passed, detail),
            Err(e) => Self::new(name, kind, false, format!("error: {e}")),
        }
    }
}

/// Closed form and solver moments at one grid point.
#[derive(Debug, Clone, PartialEq)]
pub struct GridPoint {
    pub params: SchemeParams,
    pub closed: MomentReport,
    pub solved: MomentReport,
    pub n_max: usize,
}

/// Solves every `(η, p_e, n0)` of the grid with the adaptive cutoff.
///
/// Points are visited with the largest cutoff first so one kernel per `η`
/// serves the rest of that row.
pub fn moment_grid(etas: &[f64], pes: &[f64], n0s: &[usize]) -> CoreResult<Vec<GridPoint>> {
    let mut points = Vec::new();
    let opts = SolveOptions::default();
    for &eta in etas {
        let mut cache = KernelCache::new();
        let mut order: Vec<(f64, usize)> = pes
            .iter()
            .flat_map(|&p| n0s.iter().map(move |&n| (p, n)))
            .collect();
        order.sort_by(|a, b| b.0.total_cmp(&a.0).then(b.1.cmp(&a.1)));
        for (p_e, n0) in order {
            let params = SchemeParams::new(eta, p_e, n0)?;
            let sol = solve_adaptive(&params, &opts, &mut cache)?;
            points.push(GridPoint {
                params,
                closed: closed_form_report(&params)?,
                solved: moments(&sol.distribution, opts.leak_tol)?,
                n_max: sol.distribution.n_max(),
            });
        }
    }
    Ok(points)
}

/// Kernel invariants at one `η`: leakage of the columns up to `n_max/2`,
/// symmetry, the first-moment sum rule for `n ∈ {0, 5}` and quadrature
/// stability.
pub fn kernel_properties(eta: f64) -> CoreResult<(bool, String)> {
    let n_max = suggested_n_max(eta, 0.0, 5);
    let k = build_kernel(eta, n_max, &gauss_legendre(DEFAULT_QUAD_ORDER)?)?;
    let leak = k.column_leakage()[..=n_max / 2]
        .iter()
        .copied()
        .fold(0.0, f64::max);
    let sym = k.matrix().symmetry_deviation();
    let target = 1.4 * eta * eta;
    let sum_rule = [0usize, 5]
        .iter()
        .map(|&n| {
            let m: f64 = (0..k.dim())
                .map(|s| (s as f64 - n as f64) * k.get(s, n))
                .sum();
            (m - target).abs()
        })
        .fold(0.0, f64::max);
    let dev = k.doubling_deviation();
    let passed = leak <= 1e-8 && sym <= 1e-12 && sum_rule <= 1e-8 && dev <= 1e-12;
    Ok((
        passed,
        format!(
            "n_max {n_max}, leakage {leak:.1e}, symmetry {sym:.1e}, sum rule {sum_rule:.1e}, doubling {dev:.1e} (order {})",
            k.quad_order()
        ),
    ))
}

fn worst(points: &[GridPoint], pick: impl Fn(&GridPoint) -> f64) -> (f64, String) {
    let mut worst = (0.0f64, String::new());
    for g in points {
        let e = pick(g);
        if e >= worst.0 || e.is_nan() {
            let p = &g.params;
            worst = (e, format!("eta {}, p_e {}, n0 {}", p.eta, p.p_e, p.n0));
        }
    }
    worst
}

/// Largest relative error between solver and closed form, per moment.
pub fn grid_checks(points: &[GridPoint]) -> [(bool, String); 2] {
    let (s, at_s) = worst(points, |g| rel_err(g.solved.delta_e, g.closed.delta_e));
    let (v, at_v) = worst(points, |g| rel_err(g.solved.sigma2_e, g.closed.sigma2_e));
    [
        (
            s <= CLOSED_FORM_TOL,
            format!("max rel err {s:.2e} at {at_s}"),
        ),
        (
            v <= CLOSED_FORM_TOL,
            format!("max rel err {v:.2e} at {at_v}"),
        ),
    ]
}

/// Brute-force per-emission terms against the closed forms for `m ≤ 5`.
/// Returns the shift-term and variance-term outcomes.
pub fn appendix_checks() -> CoreResult<[(bool, String); 2]> {
    let mut worst_b = (0.0f64, String::new());
    let mut worst_a = (0.0f64, String::new());
    let mut n_spread = 0.0f64;
    for &eta in &GRID_ETAS {
        let n_max = suggested_n_max(eta, 0.0, 2) + 60;
        let k = build_kernel(eta, n_max, &gauss_legendre(DEFAULT_QUAD_ORDER)?)?;
        for &p_e in &GRID_PES {
            for m in 1..=5 {
                let mut b_by_n = Vec::new();
                for &n0 in &APPENDIX_N0S {
                    let p = SchemeParams::new(eta, p_e, n0)?;
                    let t = brute_force_am_bm(&k, &p, m)?;
                    let at = format!("eta {eta}, p_e {p_e}, n0 {n0}, m {m}");
                    let eb = rel_err(t.b, appendix_term_b(&p, m)?);
                    if eb >= worst_b.0 {
                        worst_b = (eb, at.clone());
                    }
                    let ea = rel_err(t.a, appendix_term_a(&p, m)?);
                    if ea >= worst_a.0 {
                        worst_a = (ea, at);
                    }
                    b_by_n.push(t.b);
                }
                n_spread = n_spread.max(rel_err(b_by_n[0], b_by_n[1]));
            }
        }
    }
    let (fitted, claimed) = curvature_fit(0.3, 0.5, 0)?;
    let ec = rel_err(fitted, claimed);
    Ok([
        (
            worst_b.0 <= CLOSED_FORM_TOL && n_spread <= CLOSED_FORM_TOL,
            format!(
                "max rel err {:.2e} at {}; n0 spread {n_spread:.1e}",
                worst_b.0, worst_b.1
            ),
        ),
        (
            worst_a.0 <= CLOSED_FORM_TOL && ec <= CLOSED_FORM_TOL,
            format!(
                "max rel err {:.2e} at {}; m(m-1) coefficient {fitted:.6e} vs {claimed:.6e}",
                worst_a.0, worst_a.1
            ),
        ),
    ])
}

/// Fits `A_m / (p_g p_e^(m−1)) = c0 + c1 m + c2 m(m−1)` through
/// `m = 1, 2, 3` of the brute-force terms; returns `c2` and the closed-form
/// coefficient `κ² · 29/49`.
pub fn curvature_fit(eta: f64, p_e: f64, n0: usize) -> CoreResult<(f64, f64)> {
    let p = SchemeParams::new(eta, p_e, n0)?;
    let n_max = suggested_n_max(eta, 0.0, n0) + 60;
    let k = build_kernel(eta, n_max, &gauss_legendre(DEFAULT_QUAD_ORDER)?)?;
    let y = |m: usize| -> CoreResult<f64> {
        let w = p.p_g() * p_e.powi(m as i32 - 1);
        Ok(brute_force_am_bm(&k, &p, m)?.a / w)
    };
    let (y1, y2, y3) = (y(1)?, y(2)?, y(3)?);
    // second difference of c0 + c1 m + c2 m(m−1) is 2 c2
    let c2 = (y3 - 2.0 * y2 + y1) / 2.0;
    Ok((c2, p.kappa() * p.kappa() * 29.0 / 49.0))
}

/// Series and dense-solve distributions agree entrywise.
pub fn method_equivalence() -> CoreResult<(bool, String)> {
    let mut worst = 0.0f64;
    for (eta, p_e, n0) in [(0.3, 0.5, 1), (0.6, 0.8, 0)] {
        let p = SchemeParams::new(eta, p_e, n0)?;
        let k = build_kernel(
            eta,
            suggested_n_max(eta, p_e, n0),
            &gauss_legendre(DEFAULT_QUAD_ORDER)?,
        )?;
        let a = solve_series(&k, &p, 1e-12)?;
        let b = solve_linear(&k, &p)?;
        worst = worst.max(a.max_abs_diff(&b));
    }
    Ok((
        worst <= 1e-10,
        format!("max |D_series - D_linear| {worst:.1e}"),
    ))
}

/// Sweep rows coincide at `p_e = 0`, and the relative gap follows
/// `κ (58/49) p_e/(1−p_e)`.
pub fn sweep_check() -> CoreResult<(bool, String)> {
    let grid = sweep::parse_grid(sweep::DEFAULT_PE_GRID).expect("default grid parses");
    let rows = SweepSpec::new(sweep::DEFAULT_ETAS.to_vec(), grid, 0)
        .expect("default sweep is valid")
        .rows()
        .map_err(|e| match e {
            LabError::Core(c) => c,
            other => repump_core::Error::ParameterMismatch(other.to_string()),
        })?;
    let mut coincide = true;
    let mut worst = 0.0f64;
    let mut small_eta_ok = true;
    let mut anchor = f64::NAN;
    for r in &rows {
        if r.p_e == 0.0 {
            coincide &= r.sigma2_total == r.sigma2_first_term;
        }
        let gap = (r.sigma2_total - r.sigma2_first_term) / r.sigma2_first_term;
        let ratio = r.p_e / (1.0 - r.p_e);
        let expected = 1.4 * r.eta * r.eta * 58.0 / 49.0 * ratio;
        worst = worst.max((gap - expected).abs() / expected.max(f64::MIN_POSITIVE));
        if r.eta == 0.1 {
            small_eta_ok &= gap <= 0.017 * ratio;
        }
        if r.eta == 0.6 && r.p_e == 0.2 {
            anchor = gap;
        }
    }
    let passed = coincide && worst <= 1e-12 && small_eta_ok && (anchor - 0.149).abs() < 5e-4;
    Ok((
        passed,
        format!(
            "{} rows, gap formula err {worst:.1e}, gap at (0.6, 0.2) {anchor:.4}",
            rows.len()
        ),
    ))
}

/// Confinement threshold at `k_x = 2k` and `k_eff(0)`.
pub fn threshold_check() -> CoreResult<(bool, String)> {
    let at = |p_e| confinement_condition(&SchemeParams::new(0.1, p_e, 0)?, 2.0);
    let inside = at(0.65)?;
    let outside = at(0.650001)?;
    let k0 = k_eff(&SchemeParams::new(0.1, 0.0, 0)?)?;
    let dk = (k0 - 1.4f64.sqrt()).abs();
    Ok((
        inside && !outside && dk <= 1e-12,
        format!("p_e 0.65 -> {inside}, 0.650001 -> {outside}, |k_eff(0) - sqrt(7/5)| {dk:.1e}"),
    ))
}

/// Effective `p_e` of the extended schemes on pseudo-random triples.
pub fn multilevel_check() -> CoreResult<(bool, String)> {
    let mut rng = trajectory_rng(2024, 0);
    let mut worst = 0.0f64;
    let mut monotone = true;
    let mut limit = 0.0f64;
    for _ in 0..10 {
        let (x, y): (f64, f64) = (rng.random(), rng.random());
        let (lo, hi) = (x.min(y), x.max(y));
        let (pep, p1) = (lo, hi - lo);
        let mut last = f64::INFINITY;
        for a in [0.1, 1.0, 10.0] {
            let m = MultilevelParams::from_two(pep, p1, Some(a))?;
            let got = effective_pe_multilevel(&m);
            let hand = (pep + p1) * a / (1.0 + a) + 1.0 / (1.0 + a);
            worst = worst.max((got - hand).abs());
            monotone &= got < last;
            last = got;
        }
        let big = effective_pe_multilevel(&MultilevelParams::from_two(pep, p1, Some(1e9))?);
        limit = limit.max((big - (pep + p1)).abs());
    }
    Ok((
        worst <= 1e-12 && monotone && limit <= 1e-8,
        format!("max err {worst:.1e}, monotone {monotone}, large-a err {limit:.1e}"),
    ))
}

/// Ensemble against the closed-form shift, the mean emission count and
/// the solver distribution.
pub fn mc_check(eta: f64, p_e: f64, n_traj: u64, workers: Option<usize>) -> Result<(bool, String)> {
    let p = SchemeParams::new(eta, p_e, 0)?.with_gamma_ratio(0.05)?;
    let cfg = TrajectoryConfig::new(p, n_traj, 1);
    let (ens, _) = run_ensemble_parallel(&cfg, workers)?;
    let shift = closed_form_report(&p)?.delta_e;
    let z_shift = (ens.mean_shift - shift) / ens.stderr_shift;
    let z_jumps = (ens.mean_jump_count - 1.0 / p.p_g()) / ens.stderr_jump_count;
    let sol = solve_adaptive(&p, &SolveOptions::default(), &mut KernelCache::new())?;
    let cmp = compare_to_solver(
        &ens,
        &sol.distribution,
        &CompareOptions {
            null_seed: 1,
            ..CompareOptions::default()
        },
    )?;
    let passed = z_shift.abs() <= 3.0 && z_jumps.abs() <= 3.0 && cmp.tv_p_value >= 0.05;
    Ok((
        passed,
        format!(
            "{n_traj} traj: shift z {z_shift:.2}, jumps z {z_jumps:.2}, TV {:.4} (p {:.3})",
            cmp.tv_distance, cmp.tv_p_value
        ),
    ))
}

/// Runs the suite.
pub fn run_suite(level: SuiteLevel, workers: Option<usize>) -> Vec<CheckResult> {
    use CheckKind::{Numerical, Statistical};
    let mut out = Vec::new();
    for &eta in &GRID_ETAS {
        out.push(CheckResult::from_outcome(
            &format!("kernel properties eta={eta}"),
            Numerical,
            kernel_properties(eta),
        ));
    }
    match moment_grid(&GRID_ETAS, &GRID_PES, &GRID_N0S) {
        Ok(points) => {
            let [s, v] = grid_checks(&points);
            out.push(CheckResult::new(
                "solver shift vs closed form",
                Numerical,
                s.0,
                s.1,
            ));
            out.push(CheckResult::new(
                "solver variance vs closed form",
                Numerical,
                v.0,
                v.1,
            ));
        }
        Err(e) => out.push(CheckResult::new(
            "solver moments vs closed form",
            Numerical,
            false,
            format!("error: {e}"),
        )),
    }
    match appendix_checks() {
        Ok([b, a]) => {
            out.push(CheckResult::new(
                "per-emission shift terms",
                Numerical,
                b.0,
                b.1,
            ));
            out.push(CheckResult::new(
                "per-emission variance terms",
                Numerical,
                a.0,
                a.1,
            ));
        }
        Err(e) => out.push(CheckResult::new(
            "per-emission terms",
            Numerical,
            false,
            format!("error: {e}"),
        )),
    }
    out.push(CheckResult::from_outcome(
        "series vs dense solve",
        Numerical,
        method_equivalence(),
    ));
    out.push(CheckResult::from_outcome(
        "variance sweep",
        Numerical,
        sweep_check(),
    ));
    out.push(CheckResult::from_outcome(
        "confinement threshold",
        Numerical,
        threshold_check(),
    ));
    out.push(CheckResult::from_outcome(
        "multilevel reduction",
        Numerical,
        multilevel_check(),
    ));
    let (points, n_traj): (&[(f64, f64)], u64) = match level {
        SuiteLevel::Quick => (&[], 0),
        SuiteLevel::Default => (&MC_POINTS[..1], 2000),
        SuiteLevel::Full => (&MC_POINTS, 10_000),
    };
    for &(eta, p_e) in points {
        let name = format!("monte carlo eta={eta} p_e={p_e}");
        out.push(match mc_check(eta, p_e, n_traj, workers) {
            Ok((passed, detail)) => CheckResult::new(&name, Statistical, passed, detail),
            Err(e) => CheckResult::new(&name, Statistical, false, format!("error: {e}")),
        });
    }
    out
}

/// Fixed-width pass/fail table.
pub fn render_table(results: &[CheckResult]) -> String {
    let width = results.iter().map(|r| r.name.len()).max().unwrap_or(0);
    let mut s = String::new();
    for r in results {
        let kind = match r.kind {
            CheckKind::Numerical => "numerical",
            CheckKind::Statistical => "statistical",
        };
        let mark = if r.passed { "PASS" } else { "FAIL" };
        s.push_str(&format!(
            "{mark}  {:<width$}  {kind:<11}  {}\n",
            r.name, r.detail
        ));
    }
    let failed = results.iter().filter(|r| !r.passed).count();
    s.push_str(&format!("{} checks, {failed} failed\n", results.len()));
    s
}

/// Numerical failures take precedence over statistical ones.
pub fn verdict(results: &[CheckResult]) -> Result<()> {
    let failed = |k| results.iter().filter(|r| !r.passed && r.kind == k).count();
    match (failed(CheckKind::Numerical), failed(CheckKind::Statistical)) {
        (0, 0) => Ok(()),
        (0, s) => Err(LabError::Statistical(format!("{s} check(s) failed"))),
        (n, _) => Err(LabError::Numerical(format!("{n} check(s) failed"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn verdict_precedence() {
        let row = |kind, passed| CheckResult::new("x", kind, passed, String::new());
        assert!(verdict(&[row(CheckKind::Numerical, true)]).is_ok());
        let e = verdict(&[
            row(CheckKind::Numerical, false),
            row(CheckKind::Statistical, false),
        ]);
        assert_eq!(e.unwrap_err().exit_code(), 2);
        let e = verdict(&[row(CheckKind::Statistical, false)]);
        assert_eq!(e.unwrap_err().exit_code(), 3);
    }

    #[test]
    fn small_checks_pass() {
        assert!(threshold_check().unwrap().0);
        assert!(multilevel_check().unwrap().0);
        assert!(sweep_check().unwrap().0);
    }
}
