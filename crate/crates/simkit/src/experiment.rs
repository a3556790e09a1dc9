//! Power sweeps over seeded channel realizations.

use dfrelay_core::baseline::heuristic_ra;
use dfrelay_core::dual::{solve_dual, ModeSpec, SubgradientConfig};
use dfrelay_core::iterative::solve_iterative;
use dfrelay_core::model::{normalize_gains, sum_rate};
use dfrelay_core::{Allocation, Error as CoreError, ChannelGains, CoefficientPowers, RelayOrder, SystemConfig};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{draw_coefficients, Scenario};
use crate::error::{Error, Result};
use crate::metrics::{dbw_to_watts, tetib, MetricsRow, SolverKind};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentSpec {
    /// Source power points; every relay uses the same power.
    pub powers_dbw: Vec<f64>,
    pub realizations: u64,
    pub solvers: Vec<SolverKind>,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        ExperimentSpec {
            powers_dbw: vec![10.0, 20.0, 30.0, 40.0, 50.0],
            realizations: 100,
            solvers: SolverKind::ALL.to_vec(),
        }
    }
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<()> {
        if self.powers_dbw.is_empty() || self.powers_dbw.iter().any(|p| !p.is_finite()) {
            return Err(Error::Config("powers_dbw must be a nonempty list of finite values".into()));
        }
        if self.realizations == 0 {
            return Err(Error::Config("realizations must be at least 1".into()));
        }
        if self.solvers.is_empty() {
            return Err(Error::Config("no solvers selected".into()));
        }
        Ok(())
    }
}

/// Outcome of running one solver on one instance.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverRun {
    pub allocation: Allocation,
    pub sum_rate: f64,
    pub converged: bool,
}

pub fn run_solver(kind: SolverKind, gains: &ChannelGains, order: &RelayOrder, cfg: &SubgradientConfig) -> Result<SolverRun> {
    let run = match kind {
        SolverKind::Dual => {
            let s = solve_dual(gains, order, cfg, &ModeSpec::Free)?;
            SolverRun {
                allocation: s.allocation,
                sum_rate: s.sum_rate,
                converged: s.converged,
            }
        }
        SolverKind::Iterative => {
            let s = solve_iterative(gains, order, cfg)?;
            SolverRun {
                allocation: s.allocation,
                sum_rate: s.sum_rate,
                converged: s.converged && s.inner_converged,
            }
        }
        SolverKind::Heuristic => {
            let allocation = heuristic_ra(gains, order);
            let sum_rate = sum_rate(&allocation, gains, order)?.sum_rate;
            SolverRun {
                allocation,
                sum_rate,
                converged: true,
            }
        }
    };
    Ok(run)
}

/// System configuration at a power point, with `P_s = P_ri`.
pub fn system_at(base: &SystemConfig, power_dbw: f64) -> SystemConfig {
    let watts = dbw_to_watts(power_dbw);
    SystemConfig {
        source_power: watts,
        relay_powers: vec![watts; base.relays],
        ..base.clone()
    }
}

pub fn check_dimensions(scenario: &Scenario, system: &SystemConfig) -> Result<()> {
    if scenario.subcarriers != system.subcarriers || scenario.relays() != system.relays {
        return Err(Error::Config(format!(
            "scenario has K = {}, N = {} but system has K = {}, N = {}",
            scenario.subcarriers,
            scenario.relays(),
            system.subcarriers,
            system.relays
        )));
    }
    Ok(())
}

fn run_realization(
    coeff: &CoefficientPowers,
    realization: u64,
    system: &SystemConfig,
    solver_cfg: &SubgradientConfig,
    spec: &ExperimentSpec,
) -> Result<Vec<MetricsRow>> {
    let mut rows = Vec::with_capacity(spec.powers_dbw.len() * spec.solvers.len());
    for &power in &spec.powers_dbw {
        let config = system_at(system, power);
        let gains = normalize_gains(coeff, &config)?;
        let order = RelayOrder::new(&gains);
        for &kind in &spec.solvers {
            let row = match run_solver(kind, &gains, &order, solver_cfg) {
                Ok(run) => {
                    let rates = sum_rate(&run.allocation, &gains, &order)?;
                    MetricsRow {
                        solver: kind,
                        source_power_dbw: power,
                        realization,
                        sum_rate: run.sum_rate,
                        tetib: tetib(&run.allocation, &rates, &config).ok(),
                        converged: run.converged,
                    }
                }
                Err(Error::Solver(CoreError::NoFeasibleIterate { .. })) => MetricsRow {
                    solver: kind,
                    source_power_dbw: power,
                    realization,
                    sum_rate: f64::NAN,
                    tetib: None,
                    converged: false,
                },
                Err(e) => return Err(e),
            };
            rows.push(row);
        }
    }
    Ok(rows)
}

/// Runs every realization, power point and solver. Rows come back ordered
/// by power, then solver, then realization, regardless of scheduling.
///
/// A solve that finds no feasible allocation is recorded with a NaN sum
/// rate instead of aborting the run.
pub fn run_experiment(
    scenario: &Scenario,
    system: &SystemConfig,
    solver_cfg: &SubgradientConfig,
    spec: &ExperimentSpec,
) -> Result<Vec<MetricsRow>> {
    scenario.validate()?;
    system.validate()?;
    solver_cfg.validate()?;
    spec.validate()?;
    check_dimensions(scenario, system)?;

    let per_realization: Vec<Vec<MetricsRow>> = (0..spec.realizations)
        .into_par_iter()
        .map(|r| {
            let coeff = draw_coefficients(scenario, r)?;
            run_realization(&coeff, r, system, solver_cfg, spec)
        })
        .collect::<Result<_>>()?;

    let mut rows: Vec<MetricsRow> = per_realization.into_iter().flatten().collect();
    let power_rank = |p: f64| spec.powers_dbw.iter().position(|q| *q == p).unwrap_or(usize::MAX);
    let solver_rank = |s: SolverKind| spec.solvers.iter().position(|q| *q == s).unwrap_or(usize::MAX);
    rows.sort_by_key(|r| (power_rank(r.source_power_dbw), solver_rank(r.solver), r.realization));
    Ok(rows)
}

/// Averages for one (solver, power) pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub solver: SolverKind,
    pub source_power_dbw: f64,
    pub realizations: usize,
    /// Runs that produced no allocation; excluded from the means.
    pub failed: usize,
    pub mean_sum_rate: f64,
    /// Mean over rows with a defined energy per bit.
    pub mean_tetib: f64,
    pub converged: usize,
}

pub fn summarize(rows: &[MetricsRow]) -> Vec<Summary> {
    let mut out: Vec<Summary> = Vec::new();
    let mut tetib_counts: Vec<usize> = Vec::new();
    for row in rows {
        let idx = match out
            .iter()
            .position(|s| s.solver == row.solver && s.source_power_dbw == row.source_power_dbw)
        {
            Some(i) => i,
            None => {
                out.push(Summary {
                    solver: row.solver,
                    source_power_dbw: row.source_power_dbw,
                    realizations: 0,
                    failed: 0,
                    mean_sum_rate: 0.0,
                    mean_tetib: 0.0,
                    converged: 0,
                });
                tetib_counts.push(0);
                out.len() - 1
            }
        };
        let s = &mut out[idx];
        s.realizations += 1;
        s.converged += row.converged as usize;
        if row.sum_rate.is_nan() {
            s.failed += 1;
            continue;
        }
        s.mean_sum_rate += row.sum_rate;
        if let Some(e) = row.tetib {
            s.mean_tetib += e;
            tetib_counts[idx] += 1;
        }
    }
    for (s, n) in out.iter_mut().zip(tetib_counts) {
        let ok = s.realizations - s.failed;
        s.mean_sum_rate = if ok > 0 { s.mean_sum_rate / ok as f64 } else { f64::NAN };
        s.mean_tetib = if n > 0 { s.mean_tetib / n as f64 } else { f64::NAN };
    }
    out
}
