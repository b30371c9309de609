use repump_core::analytics::SchemeParams;
use repump_core::fock::{build_kernel, gauss_legendre, DipolePattern};
use repump_core::pump::solve_series;
use repump_core::trajectory::{
    compare_to_solver, run_ensemble, sample_emission_direction, simulate_trajectory,
    trajectory_rng, CompareOptions, EnsembleAccumulator, TrajectoryConfig,
};

fn params(eta: f64, p_e: f64, n0: usize, gamma: f64) -> SchemeParams {
    SchemeParams::new(eta, p_e, n0)
        .unwrap()
        .with_gamma_ratio(gamma)
        .unwrap()
}

fn sample_mean_and_se(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

#[test]
fn emission_directions_follow_dipole_pattern() {
    let mut rng = trajectory_rng(2024, 0);
    let u: Vec<f64> = (0..1_000_000)
        .map(|_| sample_emission_direction(&mut rng))
        .collect();
    // exact moments by quadrature of the density
    let rule = gauss_legendre(16).unwrap();
    let pattern = DipolePattern;
    let exact2 = rule.integrate(|x| pattern.density(x) * (1.0 + x).powi(2));
    let exact4 = rule.integrate(|x| pattern.density(x) * (1.0 + x).powi(4));
    assert!((exact2 - 7.0 / 5.0).abs() < 1e-14);
    assert!((exact4 - 128.0 / 35.0).abs() < 1e-14);

    let (m1, se1) = sample_mean_and_se(&u);
    assert!(m1.abs() <= 3.0 * se1, "mean {m1} ± {se1}");
    let sq: Vec<f64> = u.iter().map(|x| (1.0 + x).powi(2)).collect();
    let (m2, se2) = sample_mean_and_se(&sq);
    assert!((m2 - exact2).abs() <= 3.0 * se2, "E(1+u)^2 = {m2} ± {se2}");
    let quart: Vec<f64> = u.iter().map(|x| (1.0 + x).powi(4)).collect();
    let (m4, se4) = sample_mean_and_se(&quart);
    assert!((m4 - exact4).abs() <= 3.0 * se4, "E(1+u)^4 = {m4} ± {se4}");
}

#[test]
fn jump_counts_are_geometric() {
    for &p_e in &[0.0, 0.5, 0.8] {
        let cfg = TrajectoryConfig::new(params(0.1, p_e, 0, 0.05), 5000, 17);
        let ens = run_ensemble(&cfg).unwrap();
        let want = 1.0 / (1.0 - p_e);
        if p_e == 0.0 {
            assert_eq!(ens.mean_jump_count, 1.0);
        } else {
            assert!((ens.mean_jump_count - want).abs() <= 3.0 * ens.stderr_jump_count);
        }
    }
}

#[test]
fn single_emission_reproduces_kernel_column() {
    let k = build_kernel(0.6, 150, &gauss_legendre(32).unwrap()).unwrap();
    for &gamma in &[0.05, 1.0, 10.0] {
        let p = params(0.6, 0.0, 2, gamma);
        let ens = run_ensemble(&TrajectoryConfig::new(p, 4000, 3)).unwrap();
        let d = solve_series(&k, &p, 1e-12).unwrap();
        let c = compare_to_solver(&ens, &d, &CompareOptions::default()).unwrap();
        assert!(c.consistent, "gamma {gamma}: {c:?}");
    }
}

#[test]
fn ensemble_does_not_depend_on_push_partitioning() {
    let cfg = TrajectoryConfig::new(params(0.3, 0.5, 1, 0.05), 500, 99);
    let whole = run_ensemble(&cfg).unwrap();
    // simulate out of order, fold in index order
    let mut outcomes: Vec<_> = (0..cfg.n_trajectories)
        .rev()
        .map(|i| (i, simulate_trajectory(&cfg, i).unwrap()))
        .collect();
    outcomes.sort_by_key(|(i, _)| *i);
    let mut acc = EnsembleAccumulator::new(1);
    for (_, o) in &outcomes {
        acc.push(o);
    }
    assert_eq!(acc.finish(&cfg), whole);
}

#[test]
fn populations_are_normalised() {
    let cfg = TrajectoryConfig::new(params(0.6, 0.8, 0, 0.05), 500, 5);
    let ens = run_ensemble(&cfg).unwrap();
    let total: f64 = ens.final_populations.iter().sum();
    assert!((total - 1.0).abs() <= 1e-12);
    assert!(ens.final_populations.iter().all(|&p| p >= 0.0));
    assert!(ens.max_truncation_loss < 1e-6);
}
