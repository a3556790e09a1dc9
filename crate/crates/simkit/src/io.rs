//! Configuration, gains and result files.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use dfrelay_core::dual::SubgradientConfig;
use dfrelay_core::model::{check_feasible, sum_rate};
use dfrelay_core::{Allocation, ChannelGains, RelayOrder, SystemConfig};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::channel::Scenario;
use crate::error::{Error, Result};
use crate::experiment::{check_dimensions, ExperimentSpec, Summary};
use crate::metrics::MetricsRow;

pub const RESULTS_HEADER: [&str; 6] = [
    "solver",
    "ps_dbw",
    "realization",
    "sum_rate_bpts",
    "tetib_j_per_bit",
    "converged",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    #[serde(default)]
    pub scenario: Scenario,
    pub system: SystemConfig,
    #[serde(default)]
    pub solver: SubgradientConfig,
    #[serde(default)]
    pub experiment: ExperimentSpec,
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        self.scenario.validate()?;
        self.system.validate()?;
        self.solver.validate()?;
        self.experiment.validate()?;
        check_dimensions(&self.scenario, &self.system)
    }
}

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    serde_json::from_reader(BufReader::new(open(path)?)).map_err(|source| Error::Json {
        path: path.to_path_buf(),
        source,
    })
}

/// Pretty-printed JSON with a trailing newline.
pub fn write_json<T: Serialize, W: Write>(value: &T, mut out: W, name: &Path) -> Result<()> {
    let io_err = |source| Error::Io {
        path: name.to_path_buf(),
        source,
    };
    serde_json::to_writer_pretty(&mut out, value).map_err(|source| Error::Json {
        path: name.to_path_buf(),
        source,
    })?;
    writeln!(out).map_err(io_err)?;
    out.flush().map_err(io_err)
}

pub fn write_json_file<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    write_json(value, create(path)?, path)
}

pub fn load_config(path: &Path) -> Result<SimConfig> {
    let cfg: SimConfig = read_json(path)?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_gains(path: &Path) -> Result<ChannelGains> {
    let gains: ChannelGains = read_json(path)?;
    gains.validate()?;
    Ok(gains)
}

/// Allocation dump with its rates and constraint checks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AllocationReport {
    pub solver: String,
    pub converged: bool,
    pub sum_rate: f64,
    pub per_subcarrier_rate: Vec<f64>,
    pub feasible: bool,
    pub respects_assisting_sets: bool,
    /// `1 - sum of power fractions` for the source, then each relay.
    pub slack: Vec<f64>,
    pub allocation: Allocation,
}

impl AllocationReport {
    pub fn new(
        solver: &str,
        converged: bool,
        allocation: Allocation,
        gains: &ChannelGains,
        order: &RelayOrder,
    ) -> Result<Self> {
        let rates = sum_rate(&allocation, gains, order)?;
        let feas = check_feasible(&allocation);
        Ok(AllocationReport {
            solver: solver.to_string(),
            converged,
            sum_rate: rates.sum_rate,
            per_subcarrier_rate: rates.per_subcarrier,
            feasible: feas.feasible,
            respects_assisting_sets: allocation.respects_assisting_sets(order),
            slack: feas.slack,
            allocation,
        })
    }
}

fn float(v: f64) -> String {
    format!("{v:.9e}")
}

pub fn write_rows_csv<W: Write>(rows: &[MetricsRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(RESULTS_HEADER)?;
    for r in rows {
        w.write_record([
            r.solver.name().to_string(),
            float(r.source_power_dbw),
            r.realization.to_string(),
            float(r.sum_rate),
            r.tetib.map(float).unwrap_or_default(),
            r.converged.to_string(),
        ])?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

pub fn write_rows_file(rows: &[MetricsRow], path: &Path) -> Result<()> {
    write_rows_csv(rows, create(path)?)
}

pub fn write_summary_csv<W: Write>(summary: &[Summary], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "solver",
        "ps_dbw",
        "realizations",
        "failed",
        "mean_sum_rate_bpts",
        "mean_tetib_j_per_bit",
        "converged",
    ])?;
    for s in summary {
        w.write_record([
            s.solver.name().to_string(),
            float(s.source_power_dbw),
            s.realizations.to_string(),
            s.failed.to_string(),
            float(s.mean_sum_rate),
            float(s.mean_tetib),
            s.converged.to_string(),
        ])?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

/// Path shown in diagnostics for standard output.
pub fn stdout_name() -> PathBuf {
    PathBuf::from("<stdout>")
}
