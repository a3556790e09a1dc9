//! Domain types and the closed-form link quantities.
//!
//! All rates are in bits per two-slot frame (bpts). Gains are normalized
//! power gains `P |C|^2 / noise`, so an SNR is simply a power fraction times
//! a gain.

use alloc::vec;
use alloc::vec::Vec;

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

use crate::error::{check_len, invalid, Error, Result};

pub(crate) const LOG2_E: f64 = core::f64::consts::LOG2_E;

/// Powers, noise and timing of one link.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct SystemConfig {
    #[cfg_attr(feature = "serde", serde(rename = "K"))]
    pub subcarriers: usize,
    #[cfg_attr(feature = "serde", serde(rename = "N"))]
    pub relays: usize,
    /// Source sum power in watts.
    pub source_power: f64,
    /// Sum power of every relay in watts.
    pub relay_powers: Vec<f64>,
    /// Noise variance in watts, identical at every receiver.
    pub noise_variance: f64,
    /// Duration of one time slot in seconds.
    pub slot_duration: f64,
}

impl SystemConfig {
    /// Configuration where the source and every relay share the same sum power.
    pub fn uniform(
        subcarriers: usize,
        relays: usize,
        power: f64,
        noise_variance: f64,
        slot_duration: f64,
    ) -> Self {
        SystemConfig {
            subcarriers,
            relays,
            source_power: power,
            relay_powers: vec![power; relays],
            noise_variance,
            slot_duration,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.subcarriers == 0 {
            return Err(invalid("K", "at least one subcarrier required"));
        }
        if self.relays == 0 {
            return Err(invalid("N", "at least one relay required"));
        }
        check_len("relay_powers", self.relays, self.relay_powers.len())?;
        if !(self.source_power > 0.0 && self.source_power.is_finite()) {
            return Err(invalid("source_power", "must be positive and finite"));
        }
        if self.relay_powers.iter().any(|p| !(*p > 0.0 && p.is_finite())) {
            return Err(invalid("relay_powers", "must be positive and finite"));
        }
        if !(self.noise_variance > 0.0 && self.noise_variance.is_finite()) {
            return Err(invalid("noise_variance", "must be positive and finite"));
        }
        if !(self.slot_duration > 0.0 && self.slot_duration.is_finite()) {
            return Err(invalid("slot_duration", "must be positive and finite"));
        }
        Ok(())
    }
}

/// Squared channel magnitudes `|C|^2` per link, before normalization.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct CoefficientPowers {
    pub c_sd: Vec<f64>,
    /// Indexed `[relay][subcarrier]`.
    pub c_sr: Vec<Vec<f64>>,
    /// Indexed `[relay][subcarrier]`.
    pub c_rd: Vec<Vec<f64>>,
}

/// Normalized per-subcarrier power gains of every link.
///
/// Relay-indexed arrays are laid out `[relay][subcarrier]`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct ChannelGains {
    pub g_sd: Vec<f64>,
    pub g_sr: Vec<Vec<f64>>,
    pub g_rd: Vec<Vec<f64>>,
}

fn check_matrix(what: &'static str, m: &[Vec<f64>], rows: usize, cols: usize) -> Result<()> {
    check_len(what, rows, m.len())?;
    for row in m {
        check_len(what, cols, row.len())?;
    }
    Ok(())
}

fn check_entries(what: &'static str, values: &[f64]) -> Result<()> {
    if values.iter().all(|v| *v >= 0.0 && v.is_finite()) {
        Ok(())
    } else {
        Err(invalid(what, "entries must be nonnegative and finite"))
    }
}

impl ChannelGains {
    pub fn new(g_sd: Vec<f64>, g_sr: Vec<Vec<f64>>, g_rd: Vec<Vec<f64>>) -> Result<Self> {
        let gains = ChannelGains { g_sd, g_sr, g_rd };
        gains.validate()?;
        Ok(gains)
    }

    pub fn validate(&self) -> Result<()> {
        let k = self.g_sd.len();
        let n = self.g_sr.len();
        if k == 0 {
            return Err(invalid("g_sd", "at least one subcarrier required"));
        }
        if n == 0 {
            return Err(invalid("g_sr", "at least one relay required"));
        }
        check_matrix("g_sr", &self.g_sr, n, k)?;
        check_matrix("g_rd", &self.g_rd, n, k)?;
        check_entries("g_sd", &self.g_sd)?;
        for row in self.g_sr.iter().chain(self.g_rd.iter()) {
            check_entries("relay gains", row)?;
        }
        Ok(())
    }

    pub fn subcarriers(&self) -> usize {
        self.g_sd.len()
    }

    pub fn relays(&self) -> usize {
        self.g_sr.len()
    }

    /// Largest source-relay gain on subcarrier `k`.
    pub fn best_source_relay(&self, k: usize) -> f64 {
        self.g_sr.iter().map(|row| row[k]).fold(0.0, f64::max)
    }
}

/// Normalizes squared channel magnitudes into gains `P |C|^2 / noise`.
pub fn normalize_gains(coeff: &CoefficientPowers, config: &SystemConfig) -> Result<ChannelGains> {
    config.validate()?;
    let k = config.subcarriers;
    let n = config.relays;
    check_len("c_sd", k, coeff.c_sd.len())?;
    check_matrix("c_sr", &coeff.c_sr, n, k)?;
    check_matrix("c_rd", &coeff.c_rd, n, k)?;
    check_entries("c_sd", &coeff.c_sd)?;
    for row in coeff.c_sr.iter().chain(coeff.c_rd.iter()) {
        check_entries("relay coefficients", row)?;
    }

    let scale_s = config.source_power / config.noise_variance;
    let g_sd = coeff.c_sd.iter().map(|c| scale_s * c).collect();
    let g_sr = coeff
        .c_sr
        .iter()
        .map(|row| row.iter().map(|c| scale_s * c).collect())
        .collect();
    let g_rd = coeff
        .c_rd
        .iter()
        .zip(&config.relay_powers)
        .map(|(row, p)| {
            let scale = p / config.noise_variance;
            row.iter().map(|c| scale * c).collect()
        })
        .collect();
    ChannelGains::new(g_sd, g_sr, g_rd)
}

/// Per-subcarrier ordering of relays by ascending source-relay gain.
///
/// Position `cut` of subcarrier `k` holds the relay whose source-relay link
/// is the bottleneck when the relays at positions `cut..N` assist. Positions
/// and relay indices are zero-based. Equal gains keep ascending relay index.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RelayOrder {
    order: Vec<Vec<usize>>,
}

impl RelayOrder {
    pub fn new(gains: &ChannelGains) -> Self {
        let n = gains.relays();
        let order = (0..gains.subcarriers())
            .map(|k| {
                let mut idx: Vec<usize> = (0..n).collect();
                // stable sort keeps index order on ties
                idx.sort_by(|&a, &b| gains.g_sr[a][k].total_cmp(&gains.g_sr[b][k]));
                idx
            })
            .collect();
        RelayOrder { order }
    }

    pub fn subcarriers(&self) -> usize {
        self.order.len()
    }

    pub fn relays(&self) -> usize {
        self.order.first().map_or(0, Vec::len)
    }

    /// Relay at position `pos` of subcarrier `k`.
    pub fn relay(&self, k: usize, pos: usize) -> usize {
        self.order[k][pos]
    }

    /// Relays at positions `cut..N` of subcarrier `k`.
    pub fn assisting(&self, k: usize, cut: usize) -> &[usize] {
        &self.order[k][cut..]
    }

    /// Position of relay `relay` on subcarrier `k`.
    pub fn position(&self, k: usize, relay: usize) -> usize {
        self.order[k]
            .iter()
            .position(|&r| r == relay)
            .expect("relay index within range")
    }

    /// Source-relay gain of the bottleneck relay for a given cut.
    pub fn cut_gain(&self, gains: &ChannelGains, k: usize, cut: usize) -> f64 {
        gains.g_sr[self.order[k][cut]][k]
    }

    /// Smallest cut whose bottleneck gain beats the direct link, if any.
    pub fn first_useful_cut(&self, gains: &ChannelGains, k: usize) -> Option<usize> {
        let g_sd = gains.g_sd[k];
        self.order[k].iter().position(|&r| gains.g_sr[r][k] > g_sd)
    }

    fn check(&self, gains: &ChannelGains) -> Result<()> {
        check_len("relay order subcarriers", gains.subcarriers(), self.subcarriers())?;
        check_len("relay order relays", gains.relays(), self.relays())
    }
}

/// Transmission mode of one subcarrier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum Mode {
    Direct,
    Relay,
}

/// A complete resource allocation.
///
/// `cut[k]` is only meaningful where `mode[k]` is [`Mode::Relay`]. Power
/// fractions are relative to each device's sum power.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct Allocation {
    pub mode: Vec<Mode>,
    pub cut: Vec<usize>,
    pub p_s: Vec<f64>,
    /// Indexed `[relay][subcarrier]`.
    pub p_r: Vec<Vec<f64>>,
}

impl Allocation {
    pub fn zeros(subcarriers: usize, relays: usize) -> Self {
        Allocation {
            mode: vec![Mode::Direct; subcarriers],
            cut: vec![0; subcarriers],
            p_s: vec![0.0; subcarriers],
            p_r: vec![vec![0.0; subcarriers]; relays],
        }
    }

    pub fn subcarriers(&self) -> usize {
        self.p_s.len()
    }

    pub fn relays(&self) -> usize {
        self.p_r.len()
    }

    pub fn check_dims(&self, gains: &ChannelGains) -> Result<()> {
        let k = gains.subcarriers();
        let n = gains.relays();
        check_len("mode", k, self.mode.len())?;
        check_len("cut", k, self.cut.len())?;
        check_len("p_s", k, self.p_s.len())?;
        check_matrix("p_r", &self.p_r, n, k)?;
        if let Some(&c) = self.cut.iter().find(|&&c| c >= n) {
            return Err(Error::IndexOutOfRange {
                what: "cut",
                index: c,
                len: n,
            });
        }
        Ok(())
    }

    /// True when direct subcarriers carry no relay power and relay-aided
    /// ones only power relays inside their assisting set.
    pub fn respects_assisting_sets(&self, order: &RelayOrder) -> bool {
        (0..self.subcarriers()).all(|k| {
            let first = match self.mode[k] {
                Mode::Direct => self.relays(),
                Mode::Relay => self.cut[k],
            };
            (0..first).all(|pos| self.p_r[order.relay(k, pos)][k] == 0.0)
        })
    }
}

/// Per-subcarrier and total rates, in bpts.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct RateReport {
    pub per_subcarrier: Vec<f64>,
    pub sum_rate: f64,
}

/// Sum-power feasibility of an allocation.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct Feasibility {
    pub feasible: bool,
    /// `1 - g(x)`: source first, then one entry per relay.
    pub slack: Vec<f64>,
}

pub(crate) fn direct_rate(p_s: f64, g_sd: f64) -> f64 {
    2.0 * libm::log2(1.0 + 0.5 * p_s * g_sd)
}

fn check_index(what: &'static str, index: usize, len: usize) -> Result<()> {
    if index < len {
        Ok(())
    } else {
        Err(Error::IndexOutOfRange { what, index, len })
    }
}

fn check_point(alloc: &Allocation, gains: &ChannelGains, order: &RelayOrder, k: usize, cut: usize) -> Result<()> {
    alloc.check_dims(gains)?;
    order.check(gains)?;
    check_index("subcarrier", k, gains.subcarriers())?;
    check_index("cut", cut, gains.relays())
}

pub(crate) fn mrc_snr(alloc: &Allocation, gains: &ChannelGains, order: &RelayOrder, k: usize, cut: usize) -> f64 {
    let amplitude: f64 = order
        .assisting(k, cut)
        .iter()
        .map(|&r| libm::sqrt(alloc.p_r[r][k] * gains.g_rd[r][k]))
        .sum();
    alloc.p_s[k] * gains.g_sd[k] + amplitude * amplitude
}

pub(crate) fn relay_rate(alloc: &Allocation, gains: &ChannelGains, order: &RelayOrder, k: usize, cut: usize) -> f64 {
    let snr = mrc_snr(alloc, gains, order, k, cut);
    let relay_snr = alloc.p_s[k] * order.cut_gain(gains, k, cut);
    libm::log2(1.0 + snr.min(relay_snr))
}

/// SNR after maximum ratio combining of the broadcast and relayed samples
/// when the relays at positions `cut..N` assist.
pub fn snr_mrc(alloc: &Allocation, gains: &ChannelGains, order: &RelayOrder, k: usize, cut: usize) -> Result<f64> {
    check_point(alloc, gains, order, k, cut)?;
    Ok(mrc_snr(alloc, gains, order, k, cut))
}

/// Relay-aided rate: limited by the weakest assisting source-relay link and
/// by the combined SNR at the destination.
pub fn rate_relay(alloc: &Allocation, gains: &ChannelGains, order: &RelayOrder, k: usize, cut: usize) -> Result<f64> {
    check_point(alloc, gains, order, k, cut)?;
    Ok(relay_rate(alloc, gains, order, k, cut))
}

/// Direct-mode rate over both slots, with the power split evenly.
pub fn rate_direct(p_s: f64, g_sd: f64) -> Result<f64> {
    if !(p_s >= 0.0 && g_sd >= 0.0) {
        return Err(invalid("rate_direct", "inputs must be nonnegative"));
    }
    Ok(direct_rate(p_s, g_sd))
}

pub fn sum_rate(alloc: &Allocation, gains: &ChannelGains, order: &RelayOrder) -> Result<RateReport> {
    alloc.check_dims(gains)?;
    order.check(gains)?;
    Ok(rate_report(alloc, gains, order))
}

pub(crate) fn rate_report(alloc: &Allocation, gains: &ChannelGains, order: &RelayOrder) -> RateReport {
    let per_subcarrier: Vec<f64> = (0..gains.subcarriers())
        .map(|k| match alloc.mode[k] {
            Mode::Relay => relay_rate(alloc, gains, order, k, alloc.cut[k]),
            Mode::Direct => direct_rate(alloc.p_s[k], gains.g_sd[k]),
        })
        .collect();
    let sum_rate = per_subcarrier.iter().sum();
    RateReport {
        per_subcarrier,
        sum_rate,
    }
}

/// Checks the sum-power and nonnegativity constraints of every device.
pub fn check_feasible(alloc: &Allocation) -> Feasibility {
    let mut slack = Vec::with_capacity(alloc.relays() + 1);
    slack.push(1.0 - alloc.p_s.iter().sum::<f64>());
    slack.extend(alloc.p_r.iter().map(|row| 1.0 - row.iter().sum::<f64>()));
    let nonnegative = alloc
        .p_s
        .iter()
        .chain(alloc.p_r.iter().flatten())
        .all(|p| *p >= 0.0);
    let feasible = nonnegative && slack.iter().all(|s| *s >= 0.0);
    Feasibility { feasible, slack }
}
