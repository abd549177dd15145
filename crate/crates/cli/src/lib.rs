//! Command-line front end: reads an experiment file, runs every method on
//! a shared seed panel and writes CSV files for plotting.

pub mod config;
pub mod output;

use std::ffi::OsString;
use std::fmt;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use lazo_core::diagnostics::{mean_std, symmetry_diagnostic, validate_bounds};
use lazo_core::estimators::Threshold;
use lazo_core::numerics::Purpose;
use lazo_core::optimizer::{run_trials, RunConfig, Runner, Trajectory};
use lazo_core::parallel::Execution;

use config::Experiment;
use output::{SweepRow, SymmetryRow};

#[derive(Debug, Parser)]
#[command(
    name = "lazo",
    version,
    about = "Lazy-query zeroth-order optimization benchmarks"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run every method and write trajectory, aggregate and summary CSVs.
    Run(Common),
    /// Examine the symmetry of the lazy-reuse region at chosen rounds.
    DiagnoseSymmetry(Common),
    /// Check the residual-estimator bounds on every round of every trial.
    Validate(Common),
    /// Grid search over threshold, step size and perturbation radius.
    Sweep(Common),
}

#[derive(Debug, Args)]
pub struct Common {
    /// Experiment file (JSON).
    #[arg(long, value_name = "PATH")]
    pub config: PathBuf,
    /// Output directory; overrides `output_dir` in the file.
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Worker threads for trials and Monte Carlo loops (default: all cores).
    #[arg(long, value_name = "N")]
    pub jobs: Option<usize>,
    /// Base seed; overrides `seed` in the file.
    #[arg(long, value_name = "OVERRIDE")]
    pub seed: Option<u64>,
}

#[derive(Debug)]
pub enum CliError {
    /// Bad arguments or experiment file (exit code 1).
    Config(String),
    /// Failure while running or writing results (exit code 2).
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 1,
            CliError::Runtime(_) => 2,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "config error: {m}"),
            CliError::Runtime(m) => write!(f, "runtime error: {m}"),
        }
    }
}

impl From<lazo_core::Error> for CliError {
    fn from(e: lazo_core::Error) -> Self {
        if e.is_config_error() {
            CliError::Config(e.to_string())
        } else {
            CliError::Runtime(e.to_string())
        }
    }
}

/// Parse `args` (including the program name), run, and return the exit code.
pub fn run_cli<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match execute(&cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("lazo: {e}");
            e.exit_code()
        }
    }
}

pub fn execute(command: &Command) -> Result<(), CliError> {
    let common = match command {
        Command::Run(c)
        | Command::DiagnoseSymmetry(c)
        | Command::Validate(c)
        | Command::Sweep(c) => c,
    };
    let exp = config::load(&common.config, common.out.as_deref(), common.seed)?;
    let jobs = common.jobs.unwrap_or(0);
    if common.jobs == Some(0) {
        return Err(CliError::Config("--jobs must be at least 1".into()));
    }
    let exec = if jobs == 1 {
        Execution::Sequential
    } else {
        Execution::Parallel
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| CliError::Runtime(format!("cannot start worker pool: {e}")))?;
    std::fs::create_dir_all(&exp.output_dir).map_err(|e| {
        CliError::Runtime(format!("cannot create {}: {e}", exp.output_dir.display()))
    })?;
    pool.install(|| match command {
        Command::Run(_) => cmd_run(&exp, exec),
        Command::DiagnoseSymmetry(_) => cmd_symmetry(&exp, exec),
        Command::Validate(_) => cmd_validate(&exp, exec),
        Command::Sweep(_) => cmd_sweep(&exp, exec),
    })
}

fn trials_for(
    config: &RunConfig,
    trials: usize,
    exec: Execution,
) -> Result<Vec<Trajectory>, CliError> {
    Ok(run_trials(config, trials, exec)?)
}

fn path(exp: &Experiment, file: &str) -> PathBuf {
    exp.output_dir.join(file)
}

fn cmd_run(exp: &Experiment, exec: Execution) -> Result<(), CliError> {
    let mut all = Vec::new();
    for (name, cfg) in &exp.methods {
        let trajs = trials_for(cfg, exp.trials, exec)?;
        for t in &trajs {
            output::write_trajectory(&path(exp, &format!("{name}_trial{:03}.csv", t.trial)), t)?;
        }
        output::write_aggregate(&path(exp, &format!("{name}_aggregate.csv")), &trajs)?;
        let finals: Vec<f64> = trajs.iter().map(Trajectory::final_loss).collect();
        let queries: Vec<f64> = trajs.iter().map(|t| t.total_queries() as f64).collect();
        println!(
            "{name}: final loss {:.6e} (std {:.3e}), queries {:.1}",
            mean_std(&finals).0,
            mean_std(&finals).1,
            mean_std(&queries).0
        );
        all.push((name.as_str(), trajs));
    }
    let rows: Vec<(&str, &Trajectory)> = all
        .iter()
        .flat_map(|(n, ts)| ts.iter().map(move |t| (*n, t)))
        .collect();
    output::write_summary(&path(exp, "summary.csv"), &rows)?;
    println!("wrote results to {}", exp.output_dir.display());
    Ok(())
}

fn cmd_symmetry(exp: &Experiment, exec: Execution) -> Result<(), CliError> {
    let sym = &exp.diagnostics.symmetry;
    if sym.rounds.is_empty() || sym.rounds.contains(&0) {
        return Err(CliError::Config(
            "symmetry rounds must be non-empty and >= 1 (round 0 has no cached query)".into(),
        ));
    }
    if sym.samples < 2 || sym.projection_dim == 0 {
        return Err(CliError::Config(
            "symmetry needs samples >= 2 and projection_dim >= 1".into(),
        ));
    }
    let lazy: Vec<&(String, RunConfig)> = exp
        .methods
        .iter()
        .filter(|(_, c)| {
            c.estimator.variant.rule().is_some() && !c.estimator.variant.is_multipoint()
        })
        .collect();
    if lazy.is_empty() {
        return Err(CliError::Config(
            "diagnose-symmetry needs at least one lazo_a or lazo_b method".into(),
        ));
    }
    let mut rows = Vec::new();
    for (name, cfg) in lazy {
        let rule = cfg.estimator.variant.rule().expect("lazy method");
        for &round in &sym.rounds {
            if round > cfg.horizon {
                return Err(CliError::Config(format!(
                    "symmetry round {round} exceeds the horizon {}",
                    cfg.horizon
                )));
            }
            let mut runner = Runner::new(cfg.clone(), sym.trial)?;
            runner.freeze_at(round)?;
            let rng = cfg
                .trial_rng(sym.trial)
                .fork(Purpose::Diagnostics, round as u64);
            let mut thresholds = vec![(name.clone(), cfg.estimator.threshold)];
            if sym.control {
                thresholds.push((format!("{name}_control"), Threshold::INFINITE));
            }
            for (label, threshold) in thresholds {
                let report = symmetry_diagnostic(
                    &runner,
                    rule,
                    threshold,
                    cfg.estimator.lipschitz,
                    sym.samples,
                    sym.projections,
                    sym.projection_dim,
                    &rng,
                    exec,
                )?;
                output::write_symmetry(
                    &path(exp, &format!("symmetry_{label}_round{round}.csv")),
                    &report,
                )?;
                println!(
                    "{label} round {round}: asymmetry score {:.6}, member fraction {:.4}",
                    report.score, report.member_fraction
                );
                rows.push(SymmetryRow {
                    config: label,
                    threshold: threshold.value(),
                    round,
                    samples: report.samples.len(),
                    member_fraction: report.member_fraction,
                    score: report.score,
                });
            }
        }
    }
    output::write_symmetry_summary(&path(exp, "symmetry_summary.csv"), &rows)
}

fn cmd_validate(exp: &Experiment, exec: Execution) -> Result<(), CliError> {
    let lipschitz = exp.diagnostics.validate.lipschitz;
    if !(lipschitz > 0.0) {
        return Err(CliError::Config(
            "validate.lipschitz must be positive".into(),
        ));
    }
    let mut checked = 0;
    for (name, cfg) in &exp.methods {
        if cfg.estimator.variant.is_multipoint() {
            eprintln!("lazo: skipping {name}: bounds apply to single-direction estimators");
            continue;
        }
        let cfg = RunConfig {
            record_probes: true,
            ..cfg.clone()
        };
        let trajs = trials_for(&cfg, exp.trials, exec)?;
        let mut reports = Vec::with_capacity(trajs.len());
        for t in &trajs {
            reports.push((t.trial, validate_bounds(t, lipschitz)?));
        }
        let bound: usize = reports
            .iter()
            .map(|(_, r)| r.instance_bound_violations)
            .sum();
        let rounds: usize = reports.iter().map(|(_, r)| r.rounds_checked).sum();
        let reduced: usize = reports.iter().map(|(_, r)| r.reduced_norm_violations).sum();
        println!("{name}: {bound} instance-bound violations, {reduced} reduced-norm violations over {rounds} rounds");
        output::write_bounds(&path(exp, &format!("bounds_{name}.csv")), name, &reports)?;
        checked += 1;
    }
    if checked == 0 {
        return Err(CliError::Config(
            "no single-direction method to validate".into(),
        ));
    }
    Ok(())
}

fn cmd_sweep(exp: &Experiment, exec: Execution) -> Result<(), CliError> {
    let grid = exp
        .sweep
        .as_ref()
        .ok_or_else(|| CliError::Config("sweep needs a `sweep` section".into()))?;
    let mut rows = Vec::new();
    for (name, base) in &exp.methods {
        let thresholds = or_own(&grid.threshold, base.estimator.threshold);
        let etas = or_own(&grid.eta, base.eta);
        let deltas = or_own(&grid.delta, base.estimator.delta);
        for &threshold in &thresholds {
            for &eta in &etas {
                for &delta in &deltas {
                    let mut cfg = base.clone();
                    cfg.estimator.threshold = threshold;
                    cfg.estimator.delta = delta;
                    cfg.eta = eta;
                    cfg.validate()
                        .map_err(|e| CliError::Config(format!("{name}: {e}")))?;
                    let trajs = trials_for(&cfg, exp.trials, exec)?;
                    let finals: Vec<f64> = trajs.iter().map(Trajectory::final_loss).collect();
                    let queries: Vec<f64> =
                        trajs.iter().map(|t| t.total_queries() as f64).collect();
                    let (m, s) = mean_std(&finals);
                    rows.push(SweepRow {
                        config: name.clone(),
                        threshold: threshold.value(),
                        eta,
                        delta,
                        final_loss_mean: m,
                        final_loss_std: s,
                        total_queries_mean: mean_std(&queries).0,
                    });
                }
            }
        }
    }
    println!("{} grid points", rows.len());
    output::write_sweep(&path(exp, "sweep.csv"), &rows)
}

fn or_own<T: Copy>(grid: &[T], own: T) -> Vec<T> {
    if grid.is_empty() {
        vec![own]
    } else {
        grid.to_vec()
    }
}

/// Convenience for tests and scripts: the trajectory CSV path of a method
/// and trial inside `dir`.
pub fn trajectory_path(dir: &Path, method: &str, trial: usize) -> PathBuf {
    dir.join(format!("{method}_trial{trial:03}.csv"))
}
