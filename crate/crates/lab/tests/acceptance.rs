//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any fails.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::Command;

use rand::Rng;
use repump_core::analytics::{
    appendix_term_a, appendix_term_b, closed_form_report, confinement_condition,
    effective_pe_multilevel, k_eff, rel_err,
};
use repump_core::fock::{build_kernel, gauss_legendre, suggested_n_max, DEFAULT_QUAD_ORDER};
use repump_core::pump::{brute_force_am_bm, moments, solve_adaptive, KernelCache, SolveOptions};
use repump_core::trajectory::{
    compare_to_solver, trajectory_rng, CompareOptions, TrajectoryConfig,
};
use repump_core::{MultilevelParams, SchemeParams};
use repump_lab::parallel::run_ensemble_parallel;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

const BIN: &str = env!("CARGO_BIN_EXE_repump");
const ETAS: [f64; 3] = [0.1, 0.3, 0.6];
const PES: [f64; 4] = [0.0, 0.2, 0.5, 0.8];

fn verdict(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn closed_form_moments() -> Outcome {
    let opts = SolveOptions::default();
    let (mut shift_err, mut var_err) = ((0.0f64, String::new()), (0.0f64, String::new()));
    for eta in ETAS {
        let mut cache = KernelCache::new();
        for &p_e in PES.iter().rev() {
            for n0 in [5usize, 1, 0] {
                let p = SchemeParams::new(eta, p_e, n0).unwrap();
                let sol = solve_adaptive(&p, &opts, &mut cache).map_err(|e| e.to_string())?;
                let got = moments(&sol.distribution, opts.leak_tol).map_err(|e| e.to_string())?;
                let want = closed_form_report(&p).unwrap();
                let at = format!("({eta}, {p_e}, {n0})");
                let es = rel_err(got.delta_e, want.delta_e);
                if es >= shift_err.0 {
                    shift_err = (es, at.clone());
                }
                let ev = rel_err(got.sigma2_e, want.sigma2_e);
                if ev >= var_err.0 {
                    var_err = (ev, at);
                }
            }
        }
    }
    verdict(
        shift_err.0 <= 1e-6 && var_err.0 <= 1e-6,
        format!(
            "shift max rel err {:.2e} at {}, variance max rel err {:.2e} at {} (tol 1e-6)",
            shift_err.0, shift_err.1, var_err.0, var_err.1
        ),
    )
}

fn per_emission_terms() -> Outcome {
    let (mut b_err, mut a_err, mut spread) = (0.0f64, 0.0f64, 0.0f64);
    for eta in ETAS {
        let k = build_kernel(
            eta,
            suggested_n_max(eta, 0.0, 2) + 60,
            &gauss_legendre(32).unwrap(),
        )
        .unwrap();
        for p_e in PES {
            for m in 1..=5 {
                let mut b = Vec::new();
                for n0 in [0usize, 2] {
                    let p = SchemeParams::new(eta, p_e, n0).unwrap();
                    let t = brute_force_am_bm(&k, &p, m).unwrap();
                    b_err = b_err.max(rel_err(t.b, appendix_term_b(&p, m).unwrap()));
                    a_err = a_err.max(rel_err(t.a, appendix_term_a(&p, m).unwrap()));
                    b.push(t.b);
                }
                spread = spread.max(rel_err(b[0], b[1]));
            }
        }
    }
    // m(m-1) coefficient of A_m / (p_g p_e^(m-1)) from its second difference
    let (eta, p_e) = (0.3, 0.5);
    let p = SchemeParams::new(eta, p_e, 0).unwrap();
    let k = build_kernel(
        eta,
        suggested_n_max(eta, 0.0, 0) + 60,
        &gauss_legendre(32).unwrap(),
    )
    .unwrap();
    let y: Vec<f64> = (1..=3)
        .map(|m| brute_force_am_bm(&k, &p, m).unwrap().a / (p.p_g() * p_e.powi(m as i32 - 1)))
        .collect();
    let fitted = (y[2] - 2.0 * y[1] + y[0]) / 2.0;
    let claimed = p.kappa() * p.kappa() * 29.0 / 49.0;
    let fit_err = rel_err(fitted, claimed);
    verdict(
        b_err <= 1e-6 && spread <= 1e-6 && a_err <= 1e-6 && fit_err <= 1e-6,
        format!(
            "B max rel err {b_err:.1e}, B n0 spread {spread:.1e}, A max rel err {a_err:.2e}, \
             m(m-1) coefficient {fitted:.6e} vs (7eta^2/5)^2 29/49 = {claimed:.6e}"
        ),
    )
}

fn variance_sweep() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("sweep.csv");
    let status = Command::new(BIN)
        .args(["fig2", "--out"])
        .arg(&path)
        .status()
        .unwrap();
    if !status.success() {
        return Err(format!("fig2 exited with {status}"));
    }
    let mut reader = csv::Reader::from_path(&path).unwrap();
    let header: Vec<String> = reader.headers().unwrap().iter().map(String::from).collect();
    if header != ["eta", "p_e", "sigma2_total", "sigma2_first_term"] {
        return Err(format!("unexpected header {header:?}"));
    }
    let (mut coincide, mut formula_err, mut small_eta, mut anchor, mut rows) =
        (true, 0.0f64, true, f64::NAN, 0);
    for rec in reader.records() {
        let v: Vec<f64> = rec.unwrap().iter().map(|c| c.parse().unwrap()).collect();
        let (eta, p_e, total, first) = (v[0], v[1], v[2], v[3]);
        rows += 1;
        if p_e == 0.0 {
            coincide &= total == first;
            continue;
        }
        let gap = (total - first) / first;
        let ratio = p_e / (1.0 - p_e);
        let expected = 1.4 * eta * eta * 58.0 / 49.0 * ratio;
        formula_err = formula_err.max(rel_err(gap, expected));
        if eta == 0.1 {
            small_eta &= gap <= 0.017 * ratio;
        }
        if eta == 0.6 && p_e == 0.2 {
            anchor = gap;
        }
    }
    verdict(
        rows == 60
            && coincide
            && formula_err <= 1e-12
            && small_eta
            && (anchor - 0.149).abs() < 5e-4,
        format!(
            "{rows} rows, coincide at p_e=0: {coincide}, gap formula rel err {formula_err:.1e}, \
             gap(0.6, 0.2) = {anchor:.4}, eta=0.1 bound holds: {small_eta}"
        ),
    )
}

fn confinement_threshold() -> Outcome {
    let cond = |p_e| confinement_condition(&SchemeParams::new(0.1, p_e, 0).unwrap(), 2.0).unwrap();
    let (at, above) = (cond(0.65), cond(0.650001));
    let dk =
        (k_eff(&SchemeParams::new(0.1, 0.0, 0).unwrap()).unwrap() - (7.0f64 / 5.0).sqrt()).abs();
    verdict(
        at && !above && dk <= 1e-12,
        format!("p_e=0.65 -> {at}, p_e=0.650001 -> {above}, |k_eff(0) - sqrt(7/5)| = {dk:.1e}"),
    )
}

fn multilevel_reduction() -> Outcome {
    let mut rng = trajectory_rng(99, 0);
    let (mut err, mut monotone, mut limit) = (0.0f64, true, 0.0f64);
    for _ in 0..10 {
        let (x, y): (f64, f64) = (rng.random(), rng.random());
        let (pep, p1) = (x.min(y), (x - y).abs());
        let mut last = f64::INFINITY;
        for a in [0.1, 1.0, 10.0] {
            let got =
                effective_pe_multilevel(&MultilevelParams::from_two(pep, p1, Some(a)).unwrap());
            let hand = (pep + p1) * a / (1.0 + a) + 1.0 / (1.0 + a);
            err = err.max((got - hand).abs());
            monotone &= got < last;
            last = got;
        }
        let big = effective_pe_multilevel(&MultilevelParams::from_two(pep, p1, Some(1e9)).unwrap());
        limit = limit.max((big - (pep + p1)).abs());
    }
    verdict(
        err <= 1e-12 && monotone && limit <= 1e-8,
        format!(
            "max err {err:.1e}, decreasing in a: {monotone}, |p_e(1e9) - (p_e' + p_1)| {limit:.1e}"
        ),
    )
}

fn monte_carlo() -> Outcome {
    let mut lines = Vec::new();
    let mut ok = true;
    for (eta, p_e) in [(0.1, 0.5), (0.3, 0.2)] {
        let p = SchemeParams::new(eta, p_e, 0)
            .unwrap()
            .with_gamma_ratio(0.05)
            .unwrap();
        let cfg = TrajectoryConfig::new(p, 10_000, 1);
        let (ens, _) = run_ensemble_parallel(&cfg, None).map_err(|e| e.to_string())?;
        let shift = closed_form_report(&p).unwrap().delta_e;
        let z_shift = (ens.mean_shift - shift) / ens.stderr_shift;
        let z_jumps = (ens.mean_jump_count - 1.0 / (1.0 - p_e)) / ens.stderr_jump_count;
        let sol = solve_adaptive(&p, &SolveOptions::default(), &mut KernelCache::new()).unwrap();
        let cmp = compare_to_solver(&ens, &sol.distribution, &CompareOptions::default()).unwrap();
        ok &= z_shift.abs() <= 3.0 && z_jumps.abs() <= 3.0 && cmp.tv_p_value >= 0.05;
        lines.push(format!(
            "({eta}, {p_e}): shift z {z_shift:.2}, jumps z {z_jumps:.2}, TV {:.2e} p {:.2}",
            cmp.tv_distance, cmp.tv_p_value
        ));
    }
    verdict(ok, lines.join("; "))
}

fn determinism() -> Outcome {
    let run = |workers: &str| {
        let out = Command::new(BIN)
            .args([
                "mc", "--eta", "0.3", "--pe", "0.5", "--traj", "3000", "--seed", "11",
            ])
            .args(["--workers", workers])
            .output()
            .unwrap();
        assert!(
            out.status.success(),
            "mc failed: {}",
            String::from_utf8_lossy(&out.stderr)
        );
        out.stdout
    };
    let reference = run("1");
    let same = ["1", "2", "4"].iter().all(|w| run(w) == reference);
    verdict(
        same,
        format!(
            "{} bytes, identical across repeats and 1/2/4 workers: {same}",
            reference.len()
        ),
    )
}

fn kernel_properties() -> Outcome {
    let mut ok = true;
    let mut lines = Vec::new();
    for eta in ETAS {
        let n_max = suggested_n_max(eta, 0.0, 5);
        let k = build_kernel(eta, n_max, &gauss_legendre(DEFAULT_QUAD_ORDER).unwrap()).unwrap();
        // columns that can carry population: those well inside the cutoff
        let leak = k.column_leakage()[..=n_max / 2]
            .iter()
            .copied()
            .fold(0.0, f64::max);
        let sym = k.matrix().symmetry_deviation();
        let rule = [0usize, 5]
            .iter()
            .map(|&n| {
                let m: f64 = (0..k.dim())
                    .map(|s| (s as f64 - n as f64) * k.get(s, n))
                    .sum();
                (m - 1.4 * eta * eta).abs()
            })
            .fold(0.0, f64::max);
        let dev = k.doubling_deviation();
        ok &= leak <= 1e-8 && sym <= 1e-12 && rule <= 1e-8 && dev <= 1e-12;
        lines.push(format!(
            "eta {eta}: leak {leak:.0e} sym {sym:.0e} sum rule {rule:.0e} doubling {dev:.0e}"
        ));
    }
    verdict(ok, lines.join("; "))
}

fn main() {
    let criteria: [Criterion; 8] = [
        ("closed-form moments vs solver", closed_form_moments),
        ("per-emission sum rules", per_emission_terms),
        ("variance sweep", variance_sweep),
        ("confinement threshold", confinement_threshold),
        ("multilevel reduction", multilevel_reduction),
        ("monte carlo vs secular solver", monte_carlo),
        ("mc determinism", determinism),
        ("kernel properties", kernel_properties),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = std::time::Instant::now();
        let outcome =
            catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|_| Err("panicked".to_string()));
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(d) => println!("PASS {} {name}: {d} [{secs:.1}s]", i + 1),
            Err(d) => {
                failed += 1;
                println!("FAIL {} {name}: {d} [{secs:.1}s]", i + 1);
            }
        }
    }
    println!(
        "acceptance: {} passed, {failed} failed",
        criteria.len() - failed
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
