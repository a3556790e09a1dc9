//! Subgradient minimization of the dual function.
//!
//! The same loop serves the free problem, where every subcarrier picks its
//! mode and cut, and the fixed-mode power allocation used by coordinate
//! ascent.

use alloc::vec;
use alloc::vec::Vec;

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

use crate::error::{check_len, invalid, Error, Result};
use crate::model::{check_feasible, rate_report, Allocation, ChannelGains, Mode, RelayOrder};
use crate::persubcarrier::{best_into, check_inputs, direct_point, relay_point, DualVector, MU_FLOOR};

/// Parameters of the subgradient loop.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct SubgradientConfig {
    /// Termination threshold on `mu^T (1 - g(x))`.
    pub epsilon: f64,
    /// Offset `Q` of the step schedule `(1 + Q) / (q + Q)`.
    pub q_offset: f64,
    pub max_iterations: usize,
    /// Lower clamp applied to the source multiplier after each step.
    pub mu_floor: f64,
    /// Keep every dual iterate in the trace.
    pub record_history: bool,
}

impl Default for SubgradientConfig {
    fn default() -> Self {
        SubgradientConfig {
            epsilon: 0.1,
            q_offset: 50.0,
            max_iterations: 20_000,
            mu_floor: MU_FLOOR,
            record_history: false,
        }
    }
}

impl SubgradientConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0) {
            return Err(invalid("epsilon", "must be positive"));
        }
        if !(self.q_offset >= 1.0) {
            return Err(invalid("q_offset", "must be at least 1"));
        }
        if self.max_iterations == 0 {
            return Err(invalid("max_iterations", "must be at least 1"));
        }
        if !(self.mu_floor >= MU_FLOOR) {
            return Err(invalid("mu_floor", "must not be below the unbounded-dual floor"));
        }
        Ok(())
    }
}

/// Step size `(1 + Q) / (q + Q)` of iteration `q` (starting at 1).
pub fn step_size(q: usize, cfg: &SubgradientConfig) -> f64 {
    (1.0 + cfg.q_offset) / (q as f64 + cfg.q_offset)
}

/// Projected subgradient step `[mu - delta_q (1 - g)]^+`, with the source
/// multiplier additionally held at `cfg.mu_floor`.
pub fn subgradient_step(mu: &DualVector, slack: &[f64], q: usize, cfg: &SubgradientConfig) -> DualVector {
    debug_assert_eq!(slack.len(), mu.relays() + 1);
    let delta = step_size(q, cfg);
    DualVector {
        mu_s: (mu.mu_s - delta * slack[0]).max(cfg.mu_floor),
        mu_r: mu
            .mu_r
            .iter()
            .zip(&slack[1..])
            .map(|(m, s)| (m - delta * s).max(0.0))
            .collect(),
    }
}

/// How modes and cuts are chosen inside the Lagrangian maximization.
#[derive(Debug, Clone, PartialEq)]
pub enum ModeSpec {
    /// Each subcarrier searches over direct mode and every useful cut.
    Free,
    /// Modes and cuts are given; only powers are optimized.
    Fixed { mode: Vec<Mode>, cut: Vec<usize> },
}

impl ModeSpec {
    fn validate(&self, gains: &ChannelGains) -> Result<()> {
        if let ModeSpec::Fixed { mode, cut } = self {
            check_len("fixed mode", gains.subcarriers(), mode.len())?;
            check_len("fixed cut", gains.subcarriers(), cut.len())?;
            for (m, c) in mode.iter().zip(cut) {
                if *m == Mode::Relay && *c >= gains.relays() {
                    return Err(Error::IndexOutOfRange {
                        what: "cut",
                        index: *c,
                        len: gains.relays(),
                    });
                }
            }
        }
        Ok(())
    }
}

/// Maximizer of the Lagrangian and the dual function value there.
#[derive(Debug, Clone, PartialEq)]
pub struct LagrangianMax {
    pub allocation: Allocation,
    pub dual_value: f64,
}

struct Workspace {
    scratch: Vec<f64>,
    best: Vec<f64>,
}

/// Overwrites `alloc` with the maximizer of `L(x, mu)` and returns `d(mu)`.
fn maximize_into(
    mu: &DualVector,
    gains: &ChannelGains,
    order: &RelayOrder,
    spec: &ModeSpec,
    alloc: &mut Allocation,
    ws: &mut Workspace,
) -> f64 {
    let mut total = mu.total();
    for k in 0..gains.subcarriers() {
        let (mode, cut, p_s, l) = match spec {
            ModeSpec::Free => {
                let c = best_into(mu, gains, order, k, &mut ws.scratch, &mut ws.best);
                (c.mode, c.cut, c.point.p_s, c.point.lagrangian)
            }
            ModeSpec::Fixed { mode, cut } => match mode[k] {
                Mode::Relay => {
                    let pt = relay_point(mu, gains, order, k, cut[k], &mut ws.best);
                    (Mode::Relay, cut[k], pt.p_s, pt.lagrangian)
                }
                Mode::Direct => {
                    ws.best.iter_mut().for_each(|p| *p = 0.0);
                    let (p, l) = direct_point(mu.mu_s, gains.g_sd[k]);
                    (Mode::Direct, cut[k], p, l)
                }
            },
        };
        alloc.mode[k] = mode;
        alloc.cut[k] = cut;
        alloc.p_s[k] = p_s;
        for (row, p) in alloc.p_r.iter_mut().zip(&ws.best) {
            row[k] = *p;
        }
        total += l;
    }
    total
}

/// Maximizes the Lagrangian subcarrier by subcarrier and evaluates the dual
/// function `d(mu) = sum_k L_k + mu^T 1`.
pub fn maximize_lagrangian(
    mu: &DualVector,
    gains: &ChannelGains,
    order: &RelayOrder,
    spec: &ModeSpec,
) -> Result<LagrangianMax> {
    check_inputs(mu, gains, order)?;
    spec.validate(gains)?;
    let n = gains.relays();
    let mut ws = Workspace {
        scratch: vec![0.0; n],
        best: vec![0.0; n],
    };
    let mut allocation = Allocation::zeros(gains.subcarriers(), n);
    let dual_value = maximize_into(mu, gains, order, spec, &mut allocation, &mut ws);
    Ok(LagrangianMax {
        allocation,
        dual_value,
    })
}

/// Record of one dual solve.
#[derive(Debug, Clone, PartialEq)]
pub struct DualTrace {
    /// Number of subgradient steps taken.
    pub iterations: usize,
    /// Dual iterates after every step; empty unless requested.
    pub mu_history: Vec<DualVector>,
    /// `mu^T (1 - g(x_mu))` after every step.
    pub slack_gap_history: Vec<f64>,
    /// Feasible iterate with the highest sum rate, and that rate.
    pub best_feasible: Option<(Allocation, f64)>,
    /// `d(mu)` at termination.
    pub dual_value: f64,
    /// Smallest `d(mu)` seen, the tightest upper bound on the optimum.
    pub best_dual_value: f64,
    pub final_mu: DualVector,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DualSolution {
    /// The terminating iterate when converged, else the best feasible one.
    pub allocation: Allocation,
    pub sum_rate: f64,
    pub converged: bool,
    pub trace: DualTrace,
}

/// Runs the subgradient dual solver from `mu = 1`.
///
/// Terminates once `x_mu` is feasible and `mu^T (1 - g(x_mu)) < epsilon`,
/// which bounds the suboptimality of `x_mu` by epsilon whenever the duality
/// gap is zero. Hitting `max_iterations` returns the best feasible iterate
/// with `converged == false`.
pub fn solve_dual(
    gains: &ChannelGains,
    order: &RelayOrder,
    cfg: &SubgradientConfig,
    spec: &ModeSpec,
) -> Result<DualSolution> {
    cfg.validate()?;
    let n = gains.relays();
    let mut mu = DualVector::ones(n);
    check_inputs(&mu, gains, order)?;
    spec.validate(gains)?;

    let mut ws = Workspace {
        scratch: vec![0.0; n],
        best: vec![0.0; n],
    };
    let mut x = Allocation::zeros(gains.subcarriers(), n);
    let mut dual_value = maximize_into(&mu, gains, order, spec, &mut x, &mut ws);
    let mut best_dual_value = dual_value;
    let mut feas = check_feasible(&x);

    let mut mu_history = Vec::new();
    let mut slack_gap_history = Vec::new();
    let mut best_feasible: Option<(Allocation, f64)> = None;
    let mut converged = false;
    let mut q = 1;

    while q <= cfg.max_iterations {
        mu = subgradient_step(&mu, &feas.slack, q, cfg);
        q += 1;
        dual_value = maximize_into(&mu, gains, order, spec, &mut x, &mut ws);
        best_dual_value = best_dual_value.min(dual_value);
        feas = check_feasible(&x);
        let gap = mu.dot(&feas.slack);
        slack_gap_history.push(gap);
        if cfg.record_history {
            mu_history.push(mu.clone());
        }
        if feas.feasible {
            let rate = rate_report(&x, gains, order).sum_rate;
            if best_feasible.as_ref().is_none_or(|(_, r)| rate > *r) {
                best_feasible = Some((x.clone(), rate));
            }
            if gap < cfg.epsilon {
                converged = true;
                break;
            }
        }
    }

    let iterations = q - 1;
    let (allocation, sum_rate) = if converged {
        let rate = rate_report(&x, gains, order).sum_rate;
        (x, rate)
    } else {
        match &best_feasible {
            Some((a, r)) => (a.clone(), *r),
            None => {
                return Err(Error::NoFeasibleIterate {
                    iterations,
                    best_dual_value,
                })
            }
        }
    };
    Ok(DualSolution {
        allocation,
        sum_rate,
        converged,
        trace: DualTrace {
            iterations,
            mu_history,
            slack_gap_history,
            best_feasible,
            dual_value,
            best_dual_value,
            final_mu: mu,
        },
    })
}

/// Empirical duality gap of the free problem.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GapProbe {
    /// Smallest dual value seen by the subgradient loop.
    pub dual_value: f64,
    /// Highest sum rate among feasible iterates.
    pub best_primal: f64,
    pub gap: f64,
}

/// Runs the free dual solver and compares the best upper bound with the
/// best feasible sum rate it encountered. When no iterate was feasible the
/// all-zero allocation, with rate zero, stands in as the primal point.
pub fn duality_gap_probe(gains: &ChannelGains, order: &RelayOrder, cfg: &SubgradientConfig) -> Result<GapProbe> {
    let (dual_value, best_primal) = match solve_dual(gains, order, cfg, &ModeSpec::Free) {
        Ok(sol) => {
            let best = sol
                .trace
                .best_feasible
                .as_ref()
                .map_or(sol.sum_rate, |(_, r)| r.max(sol.sum_rate));
            (sol.trace.best_dual_value, best)
        }
        Err(Error::NoFeasibleIterate { best_dual_value, .. }) => (best_dual_value, 0.0),
        Err(e) => return Err(e),
    };
    Ok(GapProbe {
        dual_value,
        best_primal,
        gap: dual_value - best_primal,
    })
}
