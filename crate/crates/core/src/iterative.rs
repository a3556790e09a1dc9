//! Coordinate ascent over modes and powers.
//!
//! Each outer iteration computes the optimal powers for the current modes
//! and cuts, then updates every subcarrier's mode and cut for those powers.
//! A subcarrier that falls back to direct mode stays direct, and the cut of a
//! relay-aided subcarrier only ever shrinks, so the assignment eventually
//! repeats.

use alloc::vec::Vec;

use crate::dual::{solve_dual, ModeSpec, SubgradientConfig};
use crate::error::{check_len, Error, Result};
use crate::model::{direct_rate, mrc_snr, relay_rate, Allocation, ChannelGains, Mode, RelayOrder};

/// Relative slack on the cut threshold test; absorbs rounding in the
/// closed-form tie between the two SNR constraints.
const CUT_TOLERANCE: f64 = 1e-9;

/// Modes and cuts of one outer iteration.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModeState {
    /// Subcarriers whose direct link beats every source-relay link.
    pub d_set: Vec<bool>,
    pub mode: Vec<Mode>,
    /// Zero for direct subcarriers.
    pub cut: Vec<usize>,
    pub iteration: usize,
}

impl ModeState {
    pub fn same_assignment(&self, other: &ModeState) -> bool {
        self.mode == other.mode && self.cut == other.cut
    }

    pub fn spec(&self) -> ModeSpec {
        ModeSpec::Fixed {
            mode: self.mode.clone(),
            cut: self.cut.clone(),
        }
    }
}

/// Flags subcarrier `k` when `max_i g_sr[i][k] <= g_sd[k]`.
pub fn compute_d_set(gains: &ChannelGains) -> Vec<bool> {
    (0..gains.subcarriers())
        .map(|k| gains.best_source_relay(k) <= gains.g_sd[k])
        .collect()
}

/// Direct mode on the D set; elsewhere relay-aided with only the strongest
/// source-relay link assisting.
pub fn init_modes(gains: &ChannelGains, order: &RelayOrder) -> ModeState {
    let d_set = compute_d_set(gains);
    let last = order.relays() - 1;
    let (mode, cut) = d_set
        .iter()
        .map(|&direct| if direct { (Mode::Direct, 0) } else { (Mode::Relay, last) })
        .unzip();
    ModeState {
        d_set,
        mode,
        cut,
        iteration: 1,
    }
}

/// Picks modes and cuts that maximize each subcarrier's rate at `alloc`'s
/// powers.
///
/// A relay-aided subcarrier switches to direct only when the direct rate is
/// strictly higher. Otherwise its new cut is the smallest position whose
/// source-relay SNR still covers the combined SNR, searched among cuts that
/// beat the direct link and no larger than the current one.
pub fn update_modes(state: &ModeState, alloc: &Allocation, gains: &ChannelGains, order: &RelayOrder) -> Result<ModeState> {
    let k_count = gains.subcarriers();
    alloc.check_dims(gains)?;
    check_len("mode state", k_count, state.mode.len())?;
    check_len("mode state cuts", k_count, state.cut.len())?;
    check_len("mode state D set", k_count, state.d_set.len())?;

    let mut next = state.clone();
    next.iteration += 1;
    for k in 0..k_count {
        if state.d_set[k] || state.mode[k] == Mode::Direct {
            continue;
        }
        let cut = state.cut[k];
        debug_assert!((0..cut).all(|pos| alloc.p_r[order.relay(k, pos)][k] == 0.0));
        let r_relay = relay_rate(alloc, gains, order, k, cut);
        let r_direct = direct_rate(alloc.p_s[k], gains.g_sd[k]);
        if r_relay < r_direct {
            next.mode[k] = Mode::Direct;
            next.cut[k] = 0;
            continue;
        }
        let snr = mrc_snr(alloc, gains, order, k, cut);
        let p_s = alloc.p_s[k];
        let first = order.first_useful_cut(gains, k).unwrap_or(cut).min(cut);
        next.cut[k] = (first..=cut)
            .find(|&pos| snr <= p_s * order.cut_gain(gains, k, pos) * (1.0 + CUT_TOLERANCE))
            .unwrap_or(cut);
    }
    Ok(next)
}

/// Result of coordinate ascent.
#[derive(Debug, Clone, PartialEq)]
pub struct IterativeSolution {
    pub allocation: Allocation,
    pub sum_rate: f64,
    /// Sum rate after each outer power solve.
    pub rate_trace: Vec<f64>,
    /// Assignment used by each outer iteration.
    pub states: Vec<ModeState>,
    /// False when the cycle guard stopped the loop before a fixpoint, or a
    /// later power solve found no feasible point.
    pub converged: bool,
    /// True when every inner power solve met its termination test.
    pub inner_converged: bool,
}

/// Cycle guard on outer iterations: `K (N + 1) + 10`.
pub fn outer_iteration_cap(gains: &ChannelGains) -> usize {
    gains.subcarriers() * (gains.relays() + 1) + 10
}

pub fn solve_iterative(gains: &ChannelGains, order: &RelayOrder, cfg: &SubgradientConfig) -> Result<IterativeSolution> {
    cfg.validate()?;
    gains.validate()?;
    let cap = outer_iteration_cap(gains);
    let mut state = init_modes(gains, order);
    let mut rate_trace = Vec::new();
    let mut states = Vec::new();
    let mut inner_converged = true;
    let mut best: Option<(Allocation, f64)> = None;

    loop {
        let sol = match solve_dual(gains, order, cfg, &state.spec()) {
            Ok(sol) => sol,
            // a later power solve that never finds a feasible point ends the
            // ascent with the best assignment so far
            Err(Error::NoFeasibleIterate { .. }) if best.is_some() => {
                let (allocation, sum_rate) = best.expect("checked above");
                return Ok(IterativeSolution {
                    allocation,
                    sum_rate,
                    rate_trace,
                    states,
                    converged: false,
                    inner_converged: false,
                });
            }
            Err(e) => return Err(e),
        };
        inner_converged &= sol.converged;
        rate_trace.push(sol.sum_rate);
        if best.as_ref().is_none_or(|(_, r)| sol.sum_rate > *r) {
            best = Some((sol.allocation.clone(), sol.sum_rate));
        }
        let next = update_modes(&state, &sol.allocation, gains, order)?;
        let fixpoint = next.same_assignment(&state);
        states.push(state);
        if fixpoint {
            return Ok(IterativeSolution {
                allocation: sol.allocation,
                sum_rate: sol.sum_rate,
                rate_trace,
                states,
                converged: true,
                inner_converged,
            });
        }
        if states.len() >= cap {
            let (allocation, sum_rate) = best.expect("at least one outer iteration ran");
            return Ok(IterativeSolution {
                allocation,
                sum_rate,
                rate_trace,
                states,
                converged: false,
                inner_converged,
            });
        }
        state = next;
    }
}
