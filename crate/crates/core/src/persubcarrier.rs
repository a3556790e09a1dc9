//! Per-subcarrier maximization of the Lagrangian for a fixed dual vector.
//!
//! For a fixed cut the relay-aided problem is concave but not differentiable
//! where a relay carries zero power, so it is solved in closed form: the
//! combined relay contribution `x` is chosen first from the sensitivity of
//! the source subproblem, then split across relays at minimum price.

use alloc::vec;
use alloc::vec::Vec;

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

use crate::error::{check_len, invalid, Error, Result};
use crate::model::{direct_rate, ChannelGains, Mode, RelayOrder, LOG2_E};

/// Smallest source multiplier for which the Lagrangian stays bounded.
pub const MU_FLOOR: f64 = 1e-12;

/// Multipliers of the source and per-relay sum-power constraints.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct DualVector {
    pub mu_s: f64,
    pub mu_r: Vec<f64>,
}

impl DualVector {
    pub fn new(mu_s: f64, mu_r: Vec<f64>) -> Result<Self> {
        let mu = DualVector { mu_s, mu_r };
        if !mu.iter().all(|m| m >= 0.0 && m.is_finite()) {
            return Err(invalid("dual vector", "multipliers must be nonnegative and finite"));
        }
        Ok(mu)
    }

    /// Every multiplier set to one.
    pub fn ones(relays: usize) -> Self {
        DualVector {
            mu_s: 1.0,
            mu_r: vec![1.0; relays],
        }
    }

    pub fn relays(&self) -> usize {
        self.mu_r.len()
    }

    /// Source multiplier followed by the relay multipliers.
    pub fn iter(&self) -> impl Iterator<Item = f64> + '_ {
        core::iter::once(self.mu_s).chain(self.mu_r.iter().copied())
    }

    /// `mu^T v` for a vector laid out like [`DualVector::iter`].
    pub fn dot(&self, v: &[f64]) -> f64 {
        self.iter().zip(v).map(|(m, x)| m * x).sum()
    }

    /// Sum of all multipliers, the constant term `mu^T 1` of the dual function.
    pub fn total(&self) -> f64 {
        self.iter().sum()
    }
}

/// Which closed-form branch produced a solution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum SolutionCase {
    /// Direct mode water-filling.
    Direct,
    /// Relay-aided, but relaying does not pay: every relay stays idle.
    RelayIdle,
    /// Relay-aided with both SNR constraints tight.
    RelayBalanced,
    /// Relay-aided where some assisting relay has a zero multiplier.
    RelayFree,
}

/// Lagrangian-optimal decision for one subcarrier.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct SubcarrierSolution {
    pub mode: Mode,
    /// Valid only in relay mode.
    pub cut: usize,
    pub p_s: f64,
    /// Indexed by relay.
    pub p_r: Vec<f64>,
    pub lagrangian: f64,
    pub case: SolutionCase,
    /// Combined relay contribution `(sum sqrt(p_r g_rd))^2` at the optimum.
    pub x_opt: f64,
    /// Multiplier of the source-relay SNR constraint.
    pub alpha: f64,
    /// Multiplier of the combined-SNR constraint.
    pub beta: f64,
}

/// Aggregate relay-destination weight of an assisting set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RelayWeight {
    /// `sum g_rd / mu_r` over the assisting relays; all multipliers positive.
    Finite(f64),
    /// Some assisting relay with a usable link has a zero multiplier.
    FreeRelays,
}

/// Relays with a dead relay-destination link never contribute and are
/// skipped.
pub fn gbar(mu: &DualVector, gains: &ChannelGains, order: &RelayOrder, k: usize, cut: usize) -> RelayWeight {
    let mut total = 0.0;
    for &r in order.assisting(k, cut) {
        let g = gains.g_rd[r][k];
        if g <= 0.0 {
            continue;
        }
        if mu.mu_r[r] <= 0.0 {
            return RelayWeight::FreeRelays;
        }
        total += g / mu.mu_r[r];
    }
    RelayWeight::Finite(total)
}

/// `[log2(e) / mu - 1 / g]^+`, zero on a dead channel.
fn water_level(mu: f64, g: f64) -> f64 {
    if g <= 0.0 {
        0.0
    } else {
        (LOG2_E / mu - 1.0 / g).max(0.0)
    }
}

fn check_mu_s(mu_s: f64) -> Result<()> {
    if mu_s >= MU_FLOOR && mu_s.is_finite() {
        Ok(())
    } else {
        Err(Error::UnboundedDual { mu_s })
    }
}

pub(crate) fn check_inputs(mu: &DualVector, gains: &ChannelGains, order: &RelayOrder) -> Result<()> {
    check_len("dual vector", gains.relays(), mu.relays())?;
    check_len("relay order subcarriers", gains.subcarriers(), order.subcarriers())?;
    check_len("relay order relays", gains.relays(), order.relays())?;
    if mu.mu_r.iter().any(|m| !(*m >= 0.0 && m.is_finite())) {
        return Err(invalid("mu_r", "relay multipliers must be nonnegative and finite"));
    }
    check_mu_s(mu.mu_s)
}

fn check_subcarrier(gains: &ChannelGains, k: usize) -> Result<()> {
    if k < gains.subcarriers() {
        Ok(())
    } else {
        Err(Error::IndexOutOfRange {
            what: "subcarrier",
            index: k,
            len: gains.subcarriers(),
        })
    }
}

/// Direct-mode water-filling: returns the source fraction and `L_k`.
pub fn solve_direct(mu_s: f64, g_sd: f64) -> Result<(f64, f64)> {
    check_mu_s(mu_s)?;
    if !(g_sd >= 0.0) {
        return Err(invalid("g_sd", "gain must be nonnegative"));
    }
    Ok(direct_point(mu_s, g_sd))
}

pub(crate) fn direct_point(mu_s: f64, g_sd: f64) -> (f64, f64) {
    let p = 2.0 * water_level(mu_s, g_sd);
    (p, direct_rate(p, g_sd) - mu_s * p)
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct RelayPoint {
    pub p_s: f64,
    pub lagrangian: f64,
    pub case: SolutionCase,
    pub x_opt: f64,
    pub alpha: f64,
    pub beta: f64,
}

/// Closed-form relay-aided optimum for a fixed cut. Writes relay fractions
/// into `p_r` (indexed by relay, fully overwritten).
pub(crate) fn relay_point(
    mu: &DualVector,
    gains: &ChannelGains,
    order: &RelayOrder,
    k: usize,
    cut: usize,
    p_r: &mut [f64],
) -> RelayPoint {
    p_r.iter_mut().for_each(|p| *p = 0.0);
    let mu_s = mu.mu_s;
    let g_sd = gains.g_sd[k];
    let g_sr = order.cut_gain(gains, k, cut);
    let delta = g_sr - g_sd;
    let assisting = order.assisting(k, cut);

    let (p_s, case, x_opt, alpha, beta) = if delta <= 0.0 {
        // the source-relay link always binds, so relays cannot help
        let alpha = if g_sr > 0.0 { mu_s / g_sr } else { 0.0 };
        (water_level(mu_s, g_sr), SolutionCase::RelayIdle, 0.0, alpha, 0.0)
    } else {
        match gbar(mu, gains, order, k, cut) {
            RelayWeight::Finite(weight) if mu_s * weight <= g_sd => {
                let beta = if g_sd > 0.0 { mu_s / g_sd } else { 0.0 };
                (water_level(mu_s, g_sd), SolutionCase::RelayIdle, 0.0, 0.0, beta)
            }
            RelayWeight::Finite(weight) => {
                let p = (LOG2_E / (mu_s + delta / weight) - 1.0 / g_sr).max(0.0);
                let x = p * delta;
                for &r in assisting {
                    let g = gains.g_rd[r][k];
                    if g > 0.0 {
                        let scale = mu.mu_r[r] * weight;
                        p_r[r] = g / (scale * scale) * x;
                    }
                }
                let alpha = (mu_s - g_sd / weight) / g_sr;
                (p, SolutionCase::RelayBalanced, x, alpha, 1.0 / weight)
            }
            RelayWeight::FreeRelays => {
                let p = water_level(mu_s, g_sr);
                let x = delta * p;
                let free_gain: f64 = assisting
                    .iter()
                    .filter(|&&r| mu.mu_r[r] <= 0.0 && gains.g_rd[r][k] > 0.0)
                    .map(|&r| gains.g_rd[r][k])
                    .sum();
                for &r in assisting {
                    let g = gains.g_rd[r][k];
                    if mu.mu_r[r] <= 0.0 && g > 0.0 {
                        p_r[r] = g * x / (free_gain * free_gain);
                    }
                }
                (p, SolutionCase::RelayFree, x, mu_s / g_sr, 0.0)
            }
        }
    };

    let amplitude: f64 = assisting
        .iter()
        .map(|&r| libm::sqrt(p_r[r] * gains.g_rd[r][k]))
        .sum();
    let snr = (p_s * g_sd + amplitude * amplitude).min(p_s * g_sr);
    let cost: f64 = p_r.iter().zip(&mu.mu_r).map(|(p, m)| p * m).sum();
    RelayPoint {
        p_s,
        lagrangian: libm::log2(1.0 + snr) - mu_s * p_s - cost,
        case,
        x_opt,
        alpha,
        beta,
    }
}

/// Relay-aided optimum of the per-subcarrier Lagrangian for a fixed cut.
///
/// Meant for cuts whose source-relay gain exceeds the direct gain. For other
/// cuts the relays stay idle and the source-relay link is the bottleneck.
pub fn solve_relay_fixed_b(
    mu: &DualVector,
    gains: &ChannelGains,
    order: &RelayOrder,
    k: usize,
    cut: usize,
) -> Result<SubcarrierSolution> {
    check_inputs(mu, gains, order)?;
    check_subcarrier(gains, k)?;
    if cut >= gains.relays() {
        return Err(Error::IndexOutOfRange {
            what: "cut",
            index: cut,
            len: gains.relays(),
        });
    }
    let mut p_r = vec![0.0; gains.relays()];
    let pt = relay_point(mu, gains, order, k, cut, &mut p_r);
    Ok(SubcarrierSolution {
        mode: Mode::Relay,
        cut,
        p_s: pt.p_s,
        p_r,
        lagrangian: pt.lagrangian,
        case: pt.case,
        x_opt: pt.x_opt,
        alpha: pt.alpha,
        beta: pt.beta,
    })
}

/// Outcome of [`best_into`]; relay fractions live in the caller's buffer.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Choice {
    pub mode: Mode,
    pub cut: usize,
    pub point: RelayPoint,
}

fn direct_choice(mu_s: f64, g_sd: f64) -> Choice {
    let (p, l) = direct_point(mu_s, g_sd);
    let beta = if g_sd > 0.0 { mu_s / g_sd } else { 0.0 };
    Choice {
        mode: Mode::Direct,
        cut: 0,
        point: RelayPoint {
            p_s: p,
            lagrangian: l,
            case: SolutionCase::Direct,
            x_opt: 0.0,
            alpha: 0.0,
            beta,
        },
    }
}

/// Exhaustive search over mode and cut. `best` receives the winning relay
/// fractions, `scratch` is workspace; both have one slot per relay.
pub(crate) fn best_into(
    mu: &DualVector,
    gains: &ChannelGains,
    order: &RelayOrder,
    k: usize,
    scratch: &mut [f64],
    best: &mut [f64],
) -> Choice {
    let direct = direct_choice(mu.mu_s, gains.g_sd[k]);
    best.iter_mut().for_each(|p| *p = 0.0);
    let Some(first) = order.first_useful_cut(gains, k) else {
        return direct;
    };
    let mut winner: Option<Choice> = None;
    for cut in first..gains.relays() {
        let pt = relay_point(mu, gains, order, k, cut, scratch);
        if winner.is_none_or(|w| pt.lagrangian > w.point.lagrangian) {
            winner = Some(Choice {
                mode: Mode::Relay,
                cut,
                point: pt,
            });
            best.copy_from_slice(scratch);
        }
    }
    match winner {
        Some(w) if w.point.lagrangian > direct.point.lagrangian => w,
        _ => {
            best.iter_mut().for_each(|p| *p = 0.0);
            direct
        }
    }
}

/// Lagrangian-optimal mode, cut and powers for subcarrier `k`.
///
/// Cuts whose bottleneck gain does not beat the direct link are never
/// better than direct mode and are skipped. Ties go to the smallest cut, and
/// a tie between direct and relay-aided goes to direct.
pub fn solve_subcarrier(mu: &DualVector, gains: &ChannelGains, order: &RelayOrder, k: usize) -> Result<SubcarrierSolution> {
    check_inputs(mu, gains, order)?;
    check_subcarrier(gains, k)?;
    let n = gains.relays();
    let mut scratch = vec![0.0; n];
    let mut p_r = vec![0.0; n];
    let c = best_into(mu, gains, order, k, &mut scratch, &mut p_r);
    Ok(SubcarrierSolution {
        mode: c.mode,
        cut: c.cut,
        p_s: c.point.p_s,
        p_r,
        lagrangian: c.point.lagrangian,
        case: c.point.case,
        x_opt: c.point.x_opt,
        alpha: c.point.alpha,
        beta: c.point.beta,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{mrc_snr, Allocation};

    fn single(g_sd: f64, g_sr: &[f64], g_rd: &[f64]) -> (ChannelGains, RelayOrder) {
        let gains = ChannelGains::new(
            vec![g_sd],
            g_sr.iter().map(|g| vec![*g]).collect(),
            g_rd.iter().map(|g| vec![*g]).collect(),
        )
        .unwrap();
        let order = RelayOrder::new(&gains);
        (gains, order)
    }

    #[test]
    fn direct_at_threshold_and_dead_channel() {
        let (p, l) = solve_direct(LOG2_E, 1.0).unwrap();
        assert_eq!(p, 0.0);
        assert_eq!(l, 0.0);
        assert_eq!(solve_direct(1.0, 0.0).unwrap(), (0.0, 0.0));
    }

    #[test]
    fn direct_rejects_tiny_multiplier() {
        assert!(matches!(solve_direct(1e-13, 1.0), Err(Error::UnboundedDual { .. })));
        assert!(matches!(solve_direct(0.0, 1.0), Err(Error::UnboundedDual { .. })));
    }

    #[test]
    fn gbar_examples() {
        let (gains, order) = single(1.0, &[2.0], &[2.0]);
        let mu = DualVector::new(1.0, vec![0.5]).unwrap();
        assert_eq!(gbar(&mu, &gains, &order, 0, 0), RelayWeight::Finite(4.0));

        let (gains, order) = single(1.0, &[2.0, 3.0], &[1.0, 3.0]);
        let mu = DualVector::ones(2);
        assert_eq!(gbar(&mu, &gains, &order, 0, 0), RelayWeight::Finite(4.0));
        let mu = DualVector::new(1.0, vec![1.0, 0.0]).unwrap();
        assert_eq!(gbar(&mu, &gains, &order, 0, 0), RelayWeight::FreeRelays);
        // only relay 1 assists at cut 1
        let mu = DualVector::new(1.0, vec![0.0, 1.0]).unwrap();
        assert_eq!(gbar(&mu, &gains, &order, 0, 1), RelayWeight::Finite(3.0));
    }

    #[test]
    fn dead_relay_link_ignored_by_gbar() {
        let (gains, order) = single(1.0, &[2.0, 3.0], &[0.0, 3.0]);
        let mu = DualVector::new(1.0, vec![0.0, 1.0]).unwrap();
        assert_eq!(gbar(&mu, &gains, &order, 0, 0), RelayWeight::Finite(3.0));
    }

    #[test]
    fn relay_case_idle() {
        let (gains, order) = single(1.0, &[4.0], &[2.0]);
        let mu = DualVector::new(0.1, vec![0.5]).unwrap();
        let s = solve_relay_fixed_b(&mu, &gains, &order, 0, 0).unwrap();
        assert_eq!(s.case, SolutionCase::RelayIdle);
        assert_eq!(s.x_opt, 0.0);
        assert_eq!(s.p_r, vec![0.0]);
        assert!((s.p_s - (LOG2_E / 0.1 - 1.0)).abs() < 1e-12);
    }

    #[test]
    fn relay_case_balanced_ties_both_constraints() {
        let (gains, order) = single(1.0, &[4.0], &[2.0]);
        let mu = DualVector::new(1.0, vec![0.5]).unwrap();
        let s = solve_relay_fixed_b(&mu, &gains, &order, 0, 0).unwrap();
        assert_eq!(s.case, SolutionCase::RelayBalanced);
        assert!((s.p_s - 0.574_397).abs() < 1e-6);
        assert!((s.x_opt - 1.723_191).abs() < 1e-6);
        assert!((s.p_r[0] - 0.861_596).abs() < 1e-6);
        let lhs = s.p_s * 4.0;
        let rhs = s.p_s * 1.0 + s.x_opt;
        assert!((lhs - rhs).abs() < 1e-12);
        assert!((lhs - 2.297_6).abs() < 1e-4);
    }

    #[test]
    fn relay_case_free_relay() {
        let (gains, order) = single(1.0, &[4.0], &[2.0]);
        let mu = DualVector::new(1.0, vec![0.0]).unwrap();
        let s = solve_relay_fixed_b(&mu, &gains, &order, 0, 0).unwrap();
        assert_eq!(s.case, SolutionCase::RelayFree);
        assert!((s.p_s - 1.192_695).abs() < 1e-6);
        assert!((s.x_opt - 3.578_085).abs() < 1e-6);
        assert!((s.p_r[0] - 1.789_043).abs() < 1e-6);
        assert!((libm::sqrt(s.p_r[0] * 2.0) - libm::sqrt(s.x_opt)).abs() < 1e-12);
    }

    #[test]
    fn free_split_minimizes_relay_power() {
        // two free relays; compare against a grid over splits meeting the
        // amplitude constraint sqrt(p1 g1) + sqrt(p2 g2) = sqrt(x)
        let (gains, order) = single(1.0, &[4.0, 5.0], &[2.0, 3.0]);
        let mu = DualVector::new(1.0, vec![0.0, 0.0]).unwrap();
        let s = solve_relay_fixed_b(&mu, &gains, &order, 0, 0).unwrap();
        let amp = libm::sqrt(s.x_opt);
        let got = s.p_r[0] + s.p_r[1];
        let amp_sum = libm::sqrt(s.p_r[0] * 2.0) + libm::sqrt(s.p_r[1] * 3.0);
        assert!((amp_sum - amp).abs() < 1e-12);
        let mut best = f64::INFINITY;
        for i in 0..=10_000 {
            let a1 = amp * i as f64 / 10_000.0;
            let a2 = amp - a1;
            best = best.min(a1 * a1 / 2.0 + a2 * a2 / 3.0);
        }
        assert!(got <= best + 1e-12);
        assert!(best - got < 1e-6);
    }

    #[test]
    fn non_improving_cut_keeps_relays_idle() {
        let (gains, order) = single(2.0, &[1.0], &[5.0]);
        let mu = DualVector::new(1.0, vec![0.0]).unwrap();
        let s = solve_relay_fixed_b(&mu, &gains, &order, 0, 0).unwrap();
        assert_eq!(s.p_r, vec![0.0]);
        assert!((s.p_s - (LOG2_E - 1.0)).abs() < 1e-12);
    }

    #[test]
    fn subcarrier_prefers_direct_when_direct_dominates() {
        let (gains, order) = single(5.0, &[4.0, 5.0], &[10.0, 10.0]);
        for mu in [DualVector::ones(2), DualVector::new(0.01, vec![0.0, 0.0]).unwrap()] {
            let s = solve_subcarrier(&mu, &gains, &order, 0).unwrap();
            assert_eq!(s.mode, Mode::Direct);
            assert_eq!(s.p_r, vec![0.0, 0.0]);
        }
    }

    #[test]
    fn subcarrier_picks_relay_when_lagrangian_is_higher() {
        let (gains, order) = single(1.0, &[4.0], &[2.0]);
        let mu = DualVector::new(1.0, vec![0.5]).unwrap();
        let s = solve_subcarrier(&mu, &gains, &order, 0).unwrap();
        let (_, l_direct) = solve_direct(1.0, 1.0).unwrap();
        assert_eq!(s.mode, Mode::Relay);
        assert!(s.lagrangian > l_direct);
    }

    #[test]
    fn subcarrier_tie_goes_to_direct() {
        // at mu_s = log2(e) * g both modes are idle with L = 0
        let (gains, order) = single(1.0, &[4.0], &[2.0]);
        let mu = DualVector::new(10.0, vec![1.0]).unwrap();
        let s = solve_subcarrier(&mu, &gains, &order, 0).unwrap();
        assert_eq!(s.lagrangian, 0.0);
        assert_eq!(s.mode, Mode::Direct);
    }

    #[test]
    fn bottleneck_rule_on_relay_outputs() {
        let (gains, order) = single(0.7, &[1.5, 4.0, 9.0], &[2.0, 0.3, 1.1]);
        let mu = DualVector::new(0.8, vec![0.2, 0.0, 1.3]).unwrap();
        for cut in 0..3 {
            let s = solve_relay_fixed_b(&mu, &gains, &order, 0, cut).unwrap();
            let mut alloc = Allocation::zeros(1, 3);
            alloc.p_s[0] = s.p_s;
            for r in 0..3 {
                alloc.p_r[r][0] = s.p_r[r];
            }
            let snr = mrc_snr(&alloc, &gains, &order, 0, cut);
            assert!(snr <= s.p_s * order.cut_gain(&gains, 0, cut) + 1e-9);
        }
    }

    #[test]
    fn input_validation() {
        let (gains, order) = single(1.0, &[4.0], &[2.0]);
        let mu = DualVector::ones(2);
        assert!(matches!(
            solve_subcarrier(&mu, &gains, &order, 0),
            Err(Error::DimensionMismatch { .. })
        ));
        let mu = DualVector::ones(1);
        assert!(solve_subcarrier(&mu, &gains, &order, 1).is_err());
        assert!(solve_relay_fixed_b(&mu, &gains, &order, 0, 1).is_err());
        let mu = DualVector { mu_s: 0.0, mu_r: vec![1.0] };
        assert!(matches!(
            solve_relay_fixed_b(&mu, &gains, &order, 0, 0),
            Err(Error::UnboundedDual { .. })
        ));
        assert!(DualVector::new(1.0, vec![-1.0]).is_err());
    }
}
