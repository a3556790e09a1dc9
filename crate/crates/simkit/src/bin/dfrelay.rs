use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use dfrelay_core::baseline::oracle_small;
use dfrelay_core::dual::{solve_dual, ModeSpec, SubgradientConfig};
use dfrelay_core::model::normalize_gains;
use dfrelay_core::{ChannelGains, Error as CoreError, RelayOrder};
use dfrelay_simkit::channel::draw_coefficients;
use dfrelay_simkit::experiment::{run_experiment, run_solver, summarize, system_at};
use dfrelay_simkit::instances::seeded_gains;
use dfrelay_simkit::io::{
    load_config, load_gains, stdout_name, write_json, write_json_file, write_rows_csv, write_rows_file,
    write_summary_csv, AllocationReport,
};
use dfrelay_simkit::metrics::SolverKind;
use dfrelay_simkit::{Error, Result};

/// Exit status of an `oracle-check` whose bounds do not hold.
const CHECK_FAILED: u8 = 7;

#[derive(Parser)]
#[command(name = "dfrelay", version, about = "Resource allocation for DF-relay-aided OFDM links")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Joint mode, relay and power allocation by dual decomposition
    SolveDual(InstanceArgs),
    /// Coordinate ascent over modes and powers
    SolveIterative(InstanceArgs),
    /// Uniform-power heuristic allocation
    Heuristic(InstanceArgs),
    /// Compare the dual solver with the exhaustive grid oracle on a random instance
    OracleCheck {
        #[arg(long, default_value_t = 2)]
        k: usize,
        #[arg(long, default_value_t = 1)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Power grid step of the oracle
        #[arg(long, default_value_t = 0.05)]
        grid: f64,
    },
    /// Power sweep over seeded channel realizations, written as CSV
    Experiment {
        #[arg(long)]
        config: PathBuf,
        /// Results file; standard output when omitted
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        /// Per-(solver, power) averages as CSV; printed to stderr when omitted
        #[arg(long)]
        summary: Option<PathBuf>,
    },
    /// Draw one realization and write its normalized gains as JSON
    GenChannel {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value_t = 0)]
        realization: u64,
        /// Source and relay power; the config's system powers when omitted
        #[arg(long)]
        power_dbw: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct InstanceArgs {
    /// Normalized gains file
    #[arg(long, required_unless_present = "config", conflicts_with = "config")]
    gains: Option<PathBuf>,
    /// Simulation config; a channel realization is drawn from its scenario
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, requires = "config")]
    seed: Option<u64>,
    #[arg(long, default_value_t = 0, requires = "config")]
    realization: u64,
    #[arg(long, requires = "config")]
    power_dbw: Option<f64>,
    /// Allocation JSON; standard output when omitted
    #[arg(long)]
    out: Option<PathBuf>,
}

fn draw_gains(
    config: &Path,
    seed: Option<u64>,
    realization: u64,
    power_dbw: Option<f64>,
) -> Result<(ChannelGains, SubgradientConfig)> {
    let mut cfg = load_config(config)?;
    if let Some(seed) = seed {
        cfg.scenario.seed = seed;
    }
    let system = match power_dbw {
        Some(p) => system_at(&cfg.system, p),
        None => cfg.system.clone(),
    };
    let coeff = draw_coefficients(&cfg.scenario, realization)?;
    Ok((normalize_gains(&coeff, &system)?, cfg.solver))
}

fn emit_json<T: serde::Serialize>(value: &T, out: Option<&Path>) -> Result<()> {
    match out {
        Some(path) => write_json_file(value, path),
        None => write_json(value, io::stdout().lock(), &stdout_name()),
    }
}

fn solve(kind: SolverKind, args: &InstanceArgs) -> Result<()> {
    let (gains, solver_cfg) = match (&args.gains, &args.config) {
        (Some(path), _) => (load_gains(path)?, SubgradientConfig::default()),
        (None, Some(config)) => draw_gains(config, args.seed, args.realization, args.power_dbw)?,
        (None, None) => return Err(Error::Config("either --gains or --config is required".into())),
    };
    let order = RelayOrder::new(&gains);
    let run = run_solver(kind, &gains, &order, &solver_cfg)?;
    let report = AllocationReport::new(kind.name(), run.converged, run.allocation, &gains, &order)?;
    emit_json(&report, args.out.as_deref())
}

fn oracle_check(k: usize, n: usize, seed: u64, grid: f64) -> Result<bool> {
    let gains = seeded_gains(k, n, seed);
    let order = RelayOrder::new(&gains);
    let oracle = oracle_small(&gains, &order, grid)?;
    // (primal rate, converged, iterations) when a feasible iterate exists
    let (primal, bound) = match solve_dual(&gains, &order, &SubgradientConfig::default(), &ModeSpec::Free) {
        Ok(sol) => (Some((sol.sum_rate, sol.converged, sol.trace.iterations)), sol.trace.best_dual_value),
        Err(CoreError::NoFeasibleIterate { best_dual_value, .. }) => (None, best_dual_value),
        Err(e) => return Err(e.into()),
    };
    let upper_ok = oracle.sum_rate <= bound + 0.05;
    let lower_ok = primal.is_none_or(|(rate, converged, _)| !converged || rate >= oracle.sum_rate - 0.1);
    let pass = upper_ok && lower_ok;
    let mut out = io::stdout().lock();
    let res = (|| {
        writeln!(out, "instance     K={k} N={n} seed={seed}")?;
        writeln!(out, "oracle       {:.6} bpts (grid {grid})", oracle.sum_rate)?;
        match primal {
            Some((rate, converged, iterations)) => writeln!(
                out,
                "dual primal  {rate:.6} bpts ({}, {iterations} iterations)",
                if converged { "converged" } else { "not converged" },
            )?,
            None => writeln!(out, "dual primal  none (no feasible iterate)")?,
        }
        writeln!(out, "dual value   {bound:.6} bpts")?;
        writeln!(out, "{}", if pass { "PASS" } else { "FAIL" })
    })();
    res.map_err(|source| Error::Io {
        path: stdout_name(),
        source,
    })?;
    Ok(pass)
}

fn experiment(config: &Path, out: Option<&Path>, seed: Option<u64>, summary: Option<&Path>) -> Result<()> {
    let mut cfg = load_config(config)?;
    if let Some(seed) = seed {
        cfg.scenario.seed = seed;
    }
    let rows = run_experiment(&cfg.scenario, &cfg.system, &cfg.solver, &cfg.experiment)?;
    match out {
        Some(path) => write_rows_file(&rows, path)?,
        None => write_rows_csv(&rows, io::stdout().lock())?,
    }
    let averages = summarize(&rows);
    match summary {
        Some(path) => write_summary_csv(
            &averages,
            std::fs::File::create(path).map_err(|source| Error::Io {
                path: path.to_path_buf(),
                source,
            })?,
        ),
        None => write_summary_csv(&averages, io::stderr().lock()),
    }
}

fn run(cli: Cli) -> Result<u8> {
    match cli.command {
        Command::SolveDual(args) => solve(SolverKind::Dual, &args)?,
        Command::SolveIterative(args) => solve(SolverKind::Iterative, &args)?,
        Command::Heuristic(args) => solve(SolverKind::Heuristic, &args)?,
        Command::OracleCheck { k, n, seed, grid } => {
            if !oracle_check(k, n, seed, grid)? {
                return Ok(CHECK_FAILED);
            }
        }
        Command::Experiment {
            config,
            out,
            seed,
            summary,
        } => experiment(&config, out.as_deref(), seed, summary.as_deref())?,
        Command::GenChannel {
            config,
            seed,
            realization,
            power_dbw,
            out,
        } => {
            let (gains, _) = draw_gains(&config, seed, realization, power_dbw)?;
            emit_json(&gains, out.as_deref())?;
        }
    }
    Ok(0)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("dfrelay: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
