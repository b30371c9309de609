//! Multi-threaded ensemble driver.
//!
//! Trajectories run on a rayon pool in chunks; each chunk's outcomes are
//! folded in trajectory-index order, so the ensemble is bit-identical to
//! the sequential [`repump_core::trajectory::run_ensemble`] for any number of
//! workers.

use rayon::prelude::*;
use repump_core::trajectory::{
    simulate_trajectory, ConfigWarning, EnsembleAccumulator, TrajectoryConfig, TrajectoryEnsemble,
};

use crate::error::{LabError, Result};

const CHUNK: u64 = 4096;

/// Runs `cfg` on `workers` threads (rayon's default when `None`).
pub fn run_ensemble_parallel(
    cfg: &TrajectoryConfig,
    workers: Option<usize>,
) -> Result<(TrajectoryEnsemble, Vec<ConfigWarning>)> {
    let warnings = cfg.validate()?;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(w) = workers {
        if w == 0 {
            return Err(LabError::Usage("--workers must be >= 1".into()));
        }
        builder = builder.num_threads(w);
    }
    let pool = builder
        .build()
        .map_err(|e| LabError::Usage(format!("cannot start worker pool: {e}")))?;
    let mut acc = EnsembleAccumulator::new(cfg.params.n0);
    let mut start = 0;
    while start < cfg.n_trajectories {
        let end = (start + CHUNK).min(cfg.n_trajectories);
        let outcomes = pool.install(|| {
            (start..end)
                .into_par_iter()
                .map(|i| simulate_trajectory(cfg, i))
                .collect::<std::result::Result<Vec<_>, _>>()
        })?;
        for o in &outcomes {
            acc.push(o);
        }
        start = end;
    }
    Ok((acc.finish(cfg), warnings))
}

#[cfg(test)]
mod tests {
    use super::*;
    use repump_core::trajectory::run_ensemble;
    use repump_core::SchemeParams;

    #[test]
    fn worker_count_does_not_change_results() {
        let p = SchemeParams::new(0.3, 0.5, 0).unwrap();
        let cfg = TrajectoryConfig::new(p, 5000, 21);
        let serial = run_ensemble(&cfg).unwrap();
        for w in [1, 3, 8] {
            let (par, _) = run_ensemble_parallel(&cfg, Some(w)).unwrap();
            assert_eq!(par, serial);
        }
    }

    #[test]
    fn zero_workers_rejected() {
        let p = SchemeParams::new(0.3, 0.5, 0).unwrap();
        let cfg = TrajectoryConfig::new(p, 5, 1);
        assert!(run_ensemble_parallel(&cfg, Some(0)).is_err());
    }
}
