//! Argument parsing and the subcommands.

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use repump_core::analytics::{closed_form_report, effective_pe_multilevel};
use repump_core::fock::{build_kernel, gauss_legendre, suggested_n_max};
use repump_core::pump::{moments, solve_adaptive, AdaptiveSolution, KernelCache, SolveOptions};
use repump_core::trajectory::{compare_to_solver, CompareOptions, ConfigWarning, TrajectoryConfig};
use repump_core::{MultilevelParams, SchemeParams, SolveMethod};

use crate::config::{FileConfig, Format, Settings};
use crate::error::{LabError, Result, EXIT_OK, EXIT_USAGE};
use crate::export::{self, DistributionJson, DistributionMeta, KernelJson, KernelMeta};
use crate::parallel::run_ensemble_parallel;
use crate::report::{
    CheckedComparison, McOutput, MomentsOutput, MultilevelOutput, SolverJson, VerifyJson,
};
use crate::sweep::{self, SweepSpec};
use crate::validate::{self, SuiteLevel};

/// Relative tolerance of `moments --verify`.
pub const VERIFY_TOL: f64 = 1e-6;

const ABOUT: &str = "Motional energy shift and spread of a trapped ion after incoherent repumping.

All energies are in trap quanta (hbar = nu = 1); variances are in quanta squared.
Flags override values from --config, which override built-in defaults.";

#[derive(Debug, Parser)]
#[command(name = "repump", version, about = ABOUT)]
pub struct Cli {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(subcommand)]
    pub command: Command,
}

/// Flags accepted by every subcommand.
#[derive(Debug, Clone, Default, Args)]
pub struct CommonArgs {
    /// Lamb-Dicke parameter eta [default: 0.1]
    #[arg(long, global = true)]
    pub eta: Option<f64>,
    /// Probability of returning to the excited state per emission [default: 0]
    #[arg(long, global = true)]
    pub pe: Option<f64>,
    /// Initial Fock level [default: 0]
    #[arg(long, global = true)]
    pub n0: Option<usize>,
    /// Fock cutoff; automatic when omitted
    #[arg(long, global = true)]
    pub nmax: Option<usize>,
    /// Starting Gauss-Legendre order [default: 32]
    #[arg(long, global = true)]
    pub quad: Option<usize>,
    /// Monte Carlo seed [default: 1]
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Number of trajectories [default: 10000]
    #[arg(long, global = true)]
    pub traj: Option<u64>,
    /// Excited-state decay rate over the trap frequency [default: 0.05]
    #[arg(long = "gamma-ratio", global = true)]
    pub gamma_ratio: Option<f64>,
    /// Output file, written atomically
    #[arg(long, global = true, value_name = "PATH")]
    pub out: Option<PathBuf>,
    /// Output encoding
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    /// TOML file with default values for the flags above
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Export the single-emission kernel T[s,n] with a JSON sidecar
    Kernel,
    /// Energy shift and variance after the pulse, as JSON
    Moments(MomentsArgs),
    /// Variance against p_e for several eta: total and first term
    Fig2(Fig2Args),
    /// Quantum-jump Monte Carlo of the pulse, as JSON
    Mc(McArgs),
    /// Effective p_e of the schemes with extra levels
    Multilevel(MultilevelArgs),
    /// Run the invariant suite and print a pass/fail table
    Validate(ValidateArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Series,
    Linear,
}

impl From<MethodArg> for SolveMethod {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Series => SolveMethod::Series,
            MethodArg::Linear => SolveMethod::LinearSolve,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct MomentsArgs {
    /// Also solve for the distribution and compare with the closed form
    #[arg(long)]
    pub verify: bool,
    /// Resummation used by the solver
    #[arg(long, value_enum, default_value = "series")]
    pub method: MethodArg,
}

#[derive(Debug, Clone, Args)]
pub struct Fig2Args {
    /// Comma-separated eta values [default: 0.1,0.3,0.6]
    #[arg(long, value_name = "LIST")]
    pub etas: Option<String>,
    /// p_e grid as start:stop:step [default: 0:0.95:0.05]
    #[arg(long = "pe-grid", value_name = "GRID")]
    pub pe_grid: Option<String>,
}

#[derive(Debug, Clone, Args)]
pub struct McArgs {
    /// Worker threads; does not affect the output
    #[arg(long)]
    pub workers: Option<usize>,
    /// Decay rate of the auxiliary level over the trap frequency [default: gamma-ratio]
    #[arg(long = "gamma1-ratio")]
    pub gamma1_ratio: Option<f64>,
    /// Emission cap per trajectory
    #[arg(long = "max-jumps")]
    pub max_jumps: Option<u32>,
    /// Return probability to |e> from |r> (enables the extended scheme)
    #[arg(long, requires = "p1")]
    pub pep: Option<f64>,
    /// Branching probability from |r> to the auxiliary level
    #[arg(long, requires = "pep")]
    pub p1: Option<f64>,
    /// Ratio a of the intermediate-level branches
    #[arg(long, requires = "pep")]
    pub a: Option<f64>,
    /// Exit with status 3 unless the ensemble agrees with the secular solver
    #[arg(long = "expect-secular")]
    pub expect_secular: bool,
    /// Skip the solver comparison
    #[arg(long = "no-compare", conflicts_with = "expect_secular")]
    pub no_compare: bool,
}

#[derive(Debug, Clone, Args)]
pub struct MultilevelArgs {
    /// Return probability to |e> from |r>
    #[arg(long)]
    pub pep: f64,
    /// Branching probability to the auxiliary level
    #[arg(long)]
    pub p1: f64,
    /// Branching probability to |g>; defaults to 1 - pep - p1
    #[arg(long)]
    pub pg: Option<f64>,
    /// Ratio a of the intermediate-level branches; omit for the direct scheme
    #[arg(long)]
    pub a: Option<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct ValidateArgs {
    /// Deterministic checks only
    #[arg(long, conflicts_with = "full")]
    pub quick: bool,
    /// Monte Carlo checks with 10^4 trajectories at two points
    #[arg(long)]
    pub full: bool,
    /// Worker threads for the Monte Carlo checks
    #[arg(long)]
    pub workers: Option<usize>,
}

/// Parses `args` and runs the command, writing results to `out` and
/// diagnostics to `err`. Returns the process exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() {
                err.write_all(text.as_bytes())
            } else {
                out.write_all(text.as_bytes())
            };
            return code;
        }
    };
    match execute(cli, out, err) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(err, "repump: {e}");
            e.exit_code()
        }
    }
}

fn settings(cli: &Cli) -> Result<Settings> {
    let file = match &cli.common.config {
        Some(p) => FileConfig::load(p)?,
        None => FileConfig::default(),
    };
    let c = &cli.common;
    let mut flags = FileConfig {
        eta: c.eta,
        pe: c.pe,
        n0: c.n0,
        nmax: c.nmax,
        quad: c.quad,
        seed: c.seed,
        traj: c.traj,
        gamma_ratio: c.gamma_ratio,
        out: c.out.clone(),
        format: c.format,
        ..FileConfig::default()
    };
    match &cli.command {
        Command::Mc(a) => flags.workers = a.workers,
        Command::Validate(a) => flags.workers = a.workers,
        Command::Fig2(a) => {
            flags.etas = a.etas.as_deref().map(sweep::parse_etas).transpose()?;
            flags.pe_grid = a.pe_grid.clone();
        }
        _ => {}
    }
    Ok(Settings::merge(file, flags))
}

fn execute(cli: Cli, out: &mut dyn Write, err: &mut dyn Write) -> Result<()> {
    let s = settings(&cli)?;
    match &cli.command {
        Command::Kernel => cmd_kernel(&s, out, err),
        Command::Moments(a) => cmd_moments(&s, a, out),
        Command::Fig2(_) => cmd_fig2(&s, out),
        Command::Mc(a) => cmd_mc(&s, a, cli.common.pe.is_some(), out, err),
        Command::Multilevel(a) => cmd_multilevel(&s, a, out),
        Command::Validate(a) => cmd_validate(a, &s, out),
    }
}

fn emit(s: &Settings, text: &str, out: &mut dyn Write) -> Result<()> {
    match &s.out {
        Some(path) => export::write_atomic(path, text.as_bytes()),
        None => Ok(out.write_all(text.as_bytes())?),
    }
}

fn json_only(s: &Settings, cmd: &str) -> Result<()> {
    if s.format == Some(Format::Csv) {
        return Err(LabError::Usage(format!("{cmd} writes JSON only")));
    }
    Ok(())
}

fn solve_options(s: &Settings, method: SolveMethod) -> SolveOptions {
    SolveOptions {
        method,
        quad_order: s.quad,
        n_max: s.nmax,
        ..SolveOptions::default()
    }
}

fn cmd_kernel(s: &Settings, out: &mut dyn Write, err: &mut dyn Write) -> Result<()> {
    let n_max = match s.nmax {
        Some(n) => n,
        None => {
            let p = SchemeParams::new(s.eta, s.pe, s.n0)?;
            if p.p_e >= 1.0 {
                return Err(LabError::Usage("--nmax is required when p_e = 1".into()));
            }
            suggested_n_max(p.eta, p.p_e, p.n0)
        }
    };
    let k = build_kernel(s.eta, n_max, &gauss_legendre(s.quad)?)?;
    let meta = KernelMeta::of(&k);
    match s.format.unwrap_or(Format::Csv) {
        Format::Csv => {
            let csv = export::kernel_csv(&k);
            let sidecar = export::to_json(&meta)?;
            match &s.out {
                Some(path) => {
                    export::write_atomic(path, csv.as_bytes())?;
                    export::write_atomic(&export::sidecar_path(path), sidecar.as_bytes())?;
                }
                None => {
                    out.write_all(csv.as_bytes())?;
                    err.write_all(sidecar.as_bytes())?;
                }
            }
            Ok(())
        }
        Format::Json => {
            let rows = (0..k.dim()).map(|r| k.matrix().row(r).to_vec()).collect();
            emit(s, &export::to_json(&KernelJson { meta, rows })?, out)
        }
    }
}

fn cmd_moments(s: &Settings, a: &MomentsArgs, out: &mut dyn Write) -> Result<()> {
    let p = SchemeParams::new(s.eta, s.pe, s.n0)?;
    let closed = closed_form_report(&p)?;
    let mut output = MomentsOutput {
        params: (&p).into(),
        closed_form: (&closed).into(),
        kernel_series: None,
        verification: None,
    };
    let mut solution: Option<AdaptiveSolution> = None;
    if a.verify || s.out.is_some() {
        let opts = solve_options(s, a.method.into());
        let sol = solve_adaptive(&p, &opts, &mut KernelCache::new())?;
        let report = moments(&sol.distribution, opts.leak_tol)?;
        output.kernel_series = Some(SolverJson::new(&report, &sol));
        if a.verify {
            let max_rel_err = report.rel_err_vs_closed_form.map_or(0.0, |e| e.max());
            output.verification = Some(VerifyJson {
                tolerance: VERIFY_TOL,
                max_rel_err,
                passed: max_rel_err <= VERIFY_TOL,
            });
        }
        solution = Some(sol);
    }
    out.write_all(export::to_json(&output)?.as_bytes())?;
    if let (Some(path), Some(sol)) = (&s.out, &solution) {
        let d = &sol.distribution;
        match s.format.unwrap_or(Format::Csv) {
            Format::Csv => {
                export::write_atomic(path, export::distribution_csv(d).as_bytes())?;
                let meta = export::to_json(&DistributionMeta::of(d))?;
                export::write_atomic(&export::sidecar_path(path), meta.as_bytes())?;
            }
            Format::Json => {
                let j = DistributionJson {
                    meta: DistributionMeta::of(d),
                    probabilities: d.probs.clone(),
                };
                export::write_atomic(path, export::to_json(&j)?.as_bytes())?;
            }
        }
    }
    match output.verification {
        Some(v) if !v.passed => Err(LabError::Numerical(format!(
            "solver and closed form differ by relative {:.3e} > {:e}",
            v.max_rel_err, v.tolerance
        ))),
        _ => Ok(()),
    }
}

fn cmd_fig2(s: &Settings, out: &mut dyn Write) -> Result<()> {
    let etas = s
        .etas
        .clone()
        .unwrap_or_else(|| sweep::DEFAULT_ETAS.to_vec());
    let grid = sweep::parse_grid(s.pe_grid.as_deref().unwrap_or(sweep::DEFAULT_PE_GRID))?;
    let rows = SweepSpec::new(etas, grid, s.n0)?.rows()?;
    let text = match s.format.unwrap_or(Format::Csv) {
        Format::Csv => export::csv_text(
            &["eta", "p_e", "sigma2_total", "sigma2_first_term"],
            rows.iter()
                .map(|r| [r.eta, r.p_e, r.sigma2_total, r.sigma2_first_term].map(export::fmt_f64)),
        ),
        Format::Json => export::to_json(&rows)?,
    };
    emit(s, &text, out)
}

fn cmd_mc(
    s: &Settings,
    a: &McArgs,
    pe_flag: bool,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> Result<()> {
    json_only(s, "mc")?;
    let mut cfg = match (a.pep, a.p1) {
        (Some(pep), Some(p1)) => {
            if pe_flag {
                return Err(LabError::Usage("--pe conflicts with --pep/--p1".into()));
            }
            let m = MultilevelParams::from_two(pep, p1, a.a)?;
            let p = SchemeParams::new(s.eta, effective_pe_multilevel(&m), s.n0)?
                .with_gamma_ratio(s.gamma_ratio)?;
            TrajectoryConfig::new(p, s.traj, s.seed).with_multilevel(m)
        }
        _ => {
            let p = SchemeParams::new(s.eta, s.pe, s.n0)?.with_gamma_ratio(s.gamma_ratio)?;
            TrajectoryConfig::new(p, s.traj, s.seed)
        }
    };
    if let Some(n) = s.nmax {
        cfg.n_max = n;
    }
    cfg.gamma_1_over_nu = a.gamma1_ratio;
    if let Some(j) = a.max_jumps {
        cfg.max_jumps = j;
    }
    let (ens, warnings) = run_ensemble_parallel(&cfg, s.workers)?;
    for w in warnings {
        match w {
            ConfigWarning::JumpCapTight {
                expected_jumps,
                max_jumps,
            } => writeln!(
                err,
                "warning: {expected_jumps:.1} emissions expected per trajectory, cap is {max_jumps}"
            )?,
        }
    }
    let opts = CompareOptions {
        null_seed: s.seed,
        ..CompareOptions::default()
    };
    let comparison = if a.no_compare {
        None
    } else {
        let sol = solve_adaptive(
            &cfg.params,
            &solve_options(s, SolveMethod::Series),
            &mut KernelCache::new(),
        )?;
        Some(compare_to_solver(&ens, &sol.distribution, &opts)?)
    };
    let checked = comparison.as_ref().map(|c| {
        let jumps_expected = 1.0 / cfg.params.p_g();
        let diff = ens.mean_jump_count - jumps_expected;
        let jumps_z = if ens.stderr_jump_count > 0.0 {
            diff / ens.stderr_jump_count
        } else if diff.abs() <= 1e-12 {
            0.0
        } else {
            f64::INFINITY
        };
        CheckedComparison {
            comparison: c,
            jumps_expected,
            jumps_z,
            consistent: c.consistent && jumps_z.abs() <= opts.z_crit,
        }
    });
    let text = export::to_json(&McOutput::new(&cfg, &ens, checked.as_ref()))?;
    emit(s, &text, out)?;
    match checked {
        Some(c) if a.expect_secular && !c.consistent => Err(LabError::Statistical(format!(
            "ensemble disagrees with the secular solver (shift z {:.2}, variance z {:.2}, jumps z {:.2}, TV p-value {:.3})",
            c.comparison.shift_z, c.comparison.variance_z, c.jumps_z, c.comparison.tv_p_value
        ))),
        _ => Ok(()),
    }
}

fn cmd_multilevel(s: &Settings, a: &MultilevelArgs, out: &mut dyn Write) -> Result<()> {
    json_only(s, "multilevel")?;
    let m = match a.pg {
        Some(pg) => MultilevelParams::new(a.pep, a.p1, pg, a.a)?,
        None => MultilevelParams::from_two(a.pep, a.p1, a.a)?,
    };
    let p_e = effective_pe_multilevel(&m);
    let p = SchemeParams::new(s.eta, p_e, s.n0)?;
    let output = MultilevelOutput {
        scheme: if m.a_ratio.is_some() {
            "via_intermediate"
        } else {
            "direct"
        },
        probabilities: (&m).into(),
        p_e_effective: p_e,
        params: (&p).into(),
        closed_form: (&closed_form_report(&p)?).into(),
    };
    emit(s, &export::to_json(&output)?, out)
}

fn cmd_validate(a: &ValidateArgs, s: &Settings, out: &mut dyn Write) -> Result<()> {
    let level = if a.quick {
        SuiteLevel::Quick
    } else if a.full {
        SuiteLevel::Full
    } else {
        SuiteLevel::Default
    };
    let results = validate::run_suite(level, s.workers);
    out.write_all(validate::render_table(&results).as_bytes())?;
    validate::verdict(&results)
}
