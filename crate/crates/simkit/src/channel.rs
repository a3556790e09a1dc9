//! Frequency-selective links: a tap delay line with an exponential power
//! profile, distance path loss and per-link log-normal shadowing.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use dfrelay_core::CoefficientPowers;

pub type Point = [f64; 2];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Scenario {
    pub source_pos: Point,
    pub dest_pos: Point,
    pub relay_pos: Vec<Point>,
    pub pathloss_exponent: f64,
    /// Standard deviation of `10 log10(xi)` in dB; zero disables shadowing.
    pub shadowing_sigma_db: f64,
    pub tap_count: usize,
    /// Tap `l` has variance proportional to `exp(-tap_decay * l)`.
    pub tap_decay: f64,
    #[serde(rename = "K")]
    pub subcarriers: usize,
    pub seed: u64,
}

impl Default for Scenario {
    /// Source at the origin, destination 15 m south, six relays on the line
    /// 7 m south.
    fn default() -> Self {
        Scenario {
            source_pos: [0.0, 0.0],
            dest_pos: [0.0, -15.0],
            relay_pos: [-6.0, -4.0, -2.0, 2.0, 4.0, 6.0].iter().map(|x| [*x, -7.0]).collect(),
            pathloss_exponent: 3.0,
            shadowing_sigma_db: 1.0,
            tap_count: 6,
            tap_decay: 3.0,
            subcarriers: 256,
            seed: 1,
        }
    }
}

fn finite_point(p: &Point) -> bool {
    p.iter().all(|c| c.is_finite())
}

pub fn distance(a: Point, b: Point) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

impl Scenario {
    pub fn relays(&self) -> usize {
        self.relay_pos.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.tap_count == 0 {
            return Err(Error::Config("tap_count must be at least 1".into()));
        }
        if self.subcarriers < self.tap_count {
            return Err(Error::Config(format!(
                "K = {} is smaller than tap_count = {}",
                self.subcarriers, self.tap_count
            )));
        }
        if self.relay_pos.is_empty() {
            return Err(Error::Config("at least one relay position required".into()));
        }
        if !finite_point(&self.source_pos) || !finite_point(&self.dest_pos) || !self.relay_pos.iter().all(finite_point) {
            return Err(Error::Config("positions must be finite".into()));
        }
        if !(self.pathloss_exponent.is_finite() && self.pathloss_exponent >= 0.0) {
            return Err(Error::Config("pathloss_exponent must be finite and nonnegative".into()));
        }
        if !(self.shadowing_sigma_db.is_finite() && self.shadowing_sigma_db >= 0.0) {
            return Err(Error::Config("shadowing_sigma_db must be finite and nonnegative".into()));
        }
        if !(self.tap_decay.is_finite() && self.tap_decay >= 0.0) {
            return Err(Error::Config("tap_decay must be finite and nonnegative".into()));
        }
        for (a, b) in self.links() {
            if !(distance(a, b) > 0.0) {
                return Err(Error::Config("link endpoints must be distinct".into()));
            }
        }
        Ok(())
    }

    /// Endpoints in generation order: source-destination, then every
    /// source-relay link, then every relay-destination link.
    pub fn links(&self) -> Vec<(Point, Point)> {
        let mut out = vec![(self.source_pos, self.dest_pos)];
        out.extend(self.relay_pos.iter().map(|r| (self.source_pos, *r)));
        out.extend(self.relay_pos.iter().map(|r| (*r, self.dest_pos)));
        out
    }

    /// Normalized tap variances; they sum to one.
    pub fn tap_profile(&self) -> Vec<f64> {
        let raw: Vec<f64> = (0..self.tap_count).map(|l| (-self.tap_decay * l as f64).exp()).collect();
        let total: f64 = raw.iter().sum();
        raw.into_iter().map(|v| v / total).collect()
    }

    /// `E[xi]` for the configured shadowing.
    pub fn shadowing_mean(&self) -> f64 {
        let s = self.shadowing_sigma_db * std::f64::consts::LN_10 / 10.0;
        (0.5 * s * s).exp()
    }

    /// Expected `|H[k]|^2` of a link of length `d`.
    pub fn mean_link_power(&self, d: f64) -> f64 {
        self.shadowing_mean() * d.powf(-self.pathloss_exponent)
    }

    /// Generator for one realization; streams differ per realization so
    /// results do not depend on evaluation order.
    pub fn rng(&self, realization: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(realization);
        rng
    }
}

/// Draws `xi = 10^(sigma_db Z / 10)`.
pub fn draw_shadowing<R: Rng + ?Sized>(sigma_db: f64, rng: &mut R) -> f64 {
    if sigma_db == 0.0 {
        return 1.0;
    }
    let normal = Normal::new(0.0, sigma_db).expect("sigma validated");
    10f64.powf(normal.sample(rng) / 10.0)
}

/// One link's impulse response, with shadowing and path loss folded into
/// the tap amplitudes.
pub fn draw_taps<R: Rng + ?Sized>(scenario: &Scenario, d: f64, rng: &mut R) -> Vec<Complex64> {
    let xi = draw_shadowing(scenario.shadowing_sigma_db, rng);
    let scale = xi * d.powf(-scenario.pathloss_exponent);
    scenario
        .tap_profile()
        .iter()
        .map(|var| {
            let sd = (0.5 * var * scale).sqrt();
            let re: f64 = StandardNormal.sample(rng);
            let im: f64 = StandardNormal.sample(rng);
            Complex64::new(sd * re, sd * im)
        })
        .collect()
}

/// K-point transform `H[k] = sum_l h_l exp(-j 2 pi k l / K)`.
pub fn frequency_response(taps: &[Complex64], subcarriers: usize) -> Vec<Complex64> {
    (0..subcarriers)
        .map(|k| {
            taps.iter()
                .enumerate()
                .map(|(l, h)| {
                    let phase = -2.0 * std::f64::consts::PI * ((k * l) % subcarriers) as f64 / subcarriers as f64;
                    h * Complex64::from_polar(1.0, phase)
                })
                .sum()
        })
        .collect()
}

/// Frequency response of the link `from -> to`.
pub fn gen_channel<R: Rng + ?Sized>(scenario: &Scenario, from: Point, to: Point, rng: &mut R) -> Vec<Complex64> {
    let taps = draw_taps(scenario, distance(from, to), rng);
    frequency_response(&taps, scenario.subcarriers)
}

/// Squared magnitudes of every link for one realization.
pub fn draw_coefficients(scenario: &Scenario, realization: u64) -> Result<CoefficientPowers> {
    scenario.validate()?;
    let mut rng = scenario.rng(realization);
    let n = scenario.relays();
    let mut powers: Vec<Vec<f64>> = scenario
        .links()
        .into_iter()
        .map(|(a, b)| gen_channel(scenario, a, b, &mut rng).iter().map(|h| h.norm_sqr()).collect())
        .collect();
    let c_rd = powers.split_off(1 + n);
    let c_sr = powers.split_off(1);
    let c_sd = powers.pop().expect("source-destination link");
    Ok(CoefficientPowers { c_sd, c_sr, c_rd })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_geometry() {
        let s = Scenario::default();
        s.validate().unwrap();
        assert_eq!(s.relays(), 6);
        assert_eq!(distance(s.source_pos, s.dest_pos), 15.0);
        assert!((distance(s.source_pos, [6.0, -7.0]) - 85f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn tap_profile_is_normalized_and_decays() {
        let p = Scenario::default().tap_profile();
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        for w in p.windows(2) {
            assert!((w[1] / w[0] - (-3.0f64).exp()).abs() < 1e-12);
        }
    }

    #[test]
    fn single_tap_response_is_flat() {
        let h = frequency_response(&[Complex64::new(0.3, -0.4)], 8);
        assert!(h.iter().all(|v| (v.norm() - 0.5).abs() < 1e-15));
    }

    #[test]
    fn response_matches_hand_computed_transform() {
        let taps = [Complex64::new(1.0, 0.0), Complex64::new(0.0, 1.0)];
        let h = frequency_response(&taps, 4);
        // 1 + j exp(-j pi k / 2)
        let expect = [
            Complex64::new(1.0, 1.0),
            Complex64::new(2.0, 0.0),
            Complex64::new(1.0, -1.0),
            Complex64::new(0.0, 0.0),
        ];
        for (a, b) in h.iter().zip(expect) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn rejects_bad_scenarios() {
        let s = Scenario {
            subcarriers: 4,
            ..Scenario::default()
        };
        assert!(s.validate().is_err());
        let mut s = Scenario::default();
        s.relay_pos[0] = s.dest_pos;
        assert!(s.validate().is_err());
        let s = Scenario {
            tap_count: 0,
            ..Scenario::default()
        };
        assert!(s.validate().is_err());
    }

    #[test]
    fn coefficient_layout() {
        let s = Scenario {
            subcarriers: 16,
            ..Scenario::default()
        };
        let c = draw_coefficients(&s, 0).unwrap();
        assert_eq!(c.c_sd.len(), 16);
        assert_eq!(c.c_sr.len(), 6);
        assert_eq!(c.c_rd.len(), 6);
        assert!(c.c_rd.iter().all(|row| row.len() == 16));
        assert_ne!(c, draw_coefficients(&s, 1).unwrap());
    }
}
