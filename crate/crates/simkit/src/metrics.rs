//! Energy accounting and unit conversion.

use dfrelay_core::{Allocation, RateReport, SystemConfig};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub fn dbw_to_watts(dbw: f64) -> f64 {
    10f64.powf(dbw / 10.0)
}

pub fn watts_to_dbw(watts: f64) -> f64 {
    10.0 * watts.log10()
}

/// Energy of the source and relays in one frame, in joules.
///
/// Direct mode spends half the subcarrier power in each of the two slots
/// and relay-aided mode spends all of it in the broadcast slot, so both
/// cost `P_s psi_s slot_duration` at the source.
pub fn frame_energy(alloc: &Allocation, config: &SystemConfig) -> f64 {
    let source = config.source_power * alloc.p_s.iter().sum::<f64>();
    let relays: f64 = config
        .relay_powers
        .iter()
        .zip(&alloc.p_r)
        .map(|(p, row)| p * row.iter().sum::<f64>())
        .sum();
    config.slot_duration * (source + relays)
}

/// Total energy per delivered bit, in joules per bit.
pub fn tetib(alloc: &Allocation, rates: &RateReport, config: &SystemConfig) -> Result<f64> {
    if !(rates.sum_rate > 0.0) {
        return Err(Error::ZeroRate);
    }
    Ok(frame_energy(alloc, config) / rates.sum_rate)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolverKind {
    Dual,
    Iterative,
    Heuristic,
}

impl SolverKind {
    pub const ALL: [SolverKind; 3] = [SolverKind::Dual, SolverKind::Iterative, SolverKind::Heuristic];

    pub fn name(self) -> &'static str {
        match self {
            SolverKind::Dual => "dual",
            SolverKind::Iterative => "iterative",
            SolverKind::Heuristic => "heuristic",
        }
    }
}

/// One solver run on one realization at one power point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub solver: SolverKind,
    pub source_power_dbw: f64,
    pub realization: u64,
    /// Bits per two-slot frame.
    pub sum_rate: f64,
    /// Joules per bit; absent when the sum rate is zero.
    pub tetib: Option<f64>,
    pub converged: bool,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config() -> SystemConfig {
        SystemConfig::uniform(2, 1, 10.0, 1e-5, 1e-3)
    }

    #[test]
    fn power_conversion() {
        assert!((dbw_to_watts(20.0) - 100.0).abs() < 1e-12);
        assert!((dbw_to_watts(10.0) - 10.0).abs() < 1e-12);
        assert!((dbw_to_watts(0.0) - 1.0).abs() < 1e-15);
        assert!((watts_to_dbw(1000.0) - 30.0).abs() < 1e-12);
    }

    #[test]
    fn energy_per_bit() {
        let mut alloc = Allocation::zeros(2, 1);
        alloc.p_s = vec![0.5, 0.5];
        let rates = RateReport {
            per_subcarrier: vec![50.0, 50.0],
            sum_rate: 100.0,
        };
        let e = tetib(&alloc, &rates, &config()).unwrap();
        assert!((e - 1e-4).abs() < 1e-18);

        let doubled = RateReport {
            per_subcarrier: vec![100.0, 100.0],
            sum_rate: 200.0,
        };
        assert!((tetib(&alloc, &doubled, &config()).unwrap() - 0.5e-4).abs() < 1e-18);
    }

    #[test]
    fn relay_energy_counts() {
        let mut alloc = Allocation::zeros(2, 1);
        alloc.p_s = vec![1.0, 0.0];
        alloc.p_r[0] = vec![0.0, 0.5];
        // 1 ms * (10 W + 5 W)
        assert!((frame_energy(&alloc, &config()) - 0.015).abs() < 1e-15);
    }

    #[test]
    fn zero_rate_is_an_error() {
        let alloc = Allocation::zeros(2, 1);
        let rates = RateReport {
            per_subcarrier: vec![0.0, 0.0],
            sum_rate: 0.0,
        };
        assert!(matches!(tetib(&alloc, &rates, &config()), Err(Error::ZeroRate)));
    }
}
