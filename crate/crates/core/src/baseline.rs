//! Reference allocations: the uniform-power heuristic and two validation
//! oracles that do not rely on the closed-form solutions.
//!
//! [`oracle_small`] enumerates every mode and cut together with a grid of
//! power fractions, exactly, by dynamic programming over subcarriers.
//! [`oracle_convex_fixed`] solves the concave fixed-mode problem with a
//! log-barrier Newton method on the epigraph form of the relay rate.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{check_len, invalid, Error, Result};
use crate::iterative::compute_d_set;
use crate::linalg::cholesky_solve;
use crate::model::{
    check_feasible, direct_rate, rate_report, relay_rate, Allocation, ChannelGains, Mode, RelayOrder, LOG2_E,
};
use crate::persubcarrier::DualVector;

/// Uniform source power over all subcarriers; each relay spreads its power
/// uniformly over the non-D subcarriers where it has the strongest
/// source-relay link (lowest index on ties). A subcarrier goes relay-aided,
/// with only that relay assisting, when this beats the direct rate strictly.
/// Relay power assigned to a subcarrier that ends up direct is left unused.
pub fn heuristic_ra(gains: &ChannelGains, order: &RelayOrder) -> Allocation {
    let k_count = gains.subcarriers();
    let n = gains.relays();
    let d_set = compute_d_set(gains);
    let owner: Vec<Option<usize>> = (0..k_count)
        .map(|k| {
            if d_set[k] {
                return None;
            }
            let mut best = 0;
            for r in 1..n {
                if gains.g_sr[r][k] > gains.g_sr[best][k] {
                    best = r;
                }
            }
            Some(best)
        })
        .collect();
    let mut share = vec![0usize; n];
    for r in owner.iter().flatten() {
        share[*r] += 1;
    }

    let mut alloc = Allocation::zeros(k_count, n);
    let p_s = 1.0 / k_count as f64;
    alloc.p_s.iter_mut().for_each(|p| *p = p_s);
    for (k, owner_k) in owner.iter().enumerate() {
        let Some(r) = *owner_k else { continue };
        alloc.p_r[r][k] = 1.0 / share[r] as f64;
        let cut = order.position(k, r);
        let r_relay = relay_rate(&alloc, gains, order, k, cut);
        let r_direct = direct_rate(p_s, gains.g_sd[k]);
        if r_direct >= r_relay {
            alloc.p_r[r][k] = 0.0;
        } else {
            alloc.mode[k] = Mode::Relay;
            alloc.cut[k] = cut;
        }
    }
    alloc
}

pub const ORACLE_MAX_SUBCARRIERS: usize = 4;
pub const ORACLE_MAX_RELAYS: usize = 2;

/// Best allocation found on the power grid.
#[derive(Debug, Clone, PartialEq)]
pub struct GridOracle {
    pub allocation: Allocation,
    pub sum_rate: f64,
}

/// Budget lattice over the source and every relay, flattened with the
/// source dimension fastest.
#[derive(Debug, Clone, Copy)]
struct Lattice {
    units: usize,
    ext: [usize; 3],
    len: usize,
}

impl Lattice {
    fn new(units: usize, devices: usize) -> Self {
        let mut ext = [1; 3];
        for e in ext.iter_mut().take(devices) {
            *e = units + 1;
        }
        Lattice {
            units,
            ext,
            len: ext.iter().product(),
        }
    }

    fn index(&self, c: [usize; 3]) -> usize {
        c[0] + self.ext[0] * (c[1] + self.ext[1] * c[2])
    }

    fn coords(&self, idx: usize) -> [usize; 3] {
        [
            idx % self.ext[0],
            (idx / self.ext[0]) % self.ext[1],
            idx / (self.ext[0] * self.ext[1]),
        ]
    }

    fn full(&self) -> usize {
        self.len - 1
    }

    fn complement(&self, idx: usize) -> usize {
        let c = self.coords(idx);
        self.index([self.ext[0] - 1 - c[0], self.ext[1] - 1 - c[1], self.ext[2] - 1 - c[2]])
    }

    fn minus(&self, a: usize, b: usize) -> usize {
        let (a, b) = (self.coords(a), self.coords(b));
        self.index([a[0] - b[0], a[1] - b[1], a[2] - b[2]])
    }
}

/// Fraction represented by `units` lattice steps. The factor just below one
/// keeps every budget sum at or under one despite rounding.
fn fraction(units: usize, total: usize) -> f64 {
    units as f64 / total as f64 * (1.0 - 1e-14)
}

/// Best rate of subcarrier `k` at every lattice point, with the winning
/// choice (0 for direct, `1 + cut` for relay-aided).
fn stage_values(gains: &ChannelGains, order: &RelayOrder, k: usize, lat: &Lattice) -> (Vec<f64>, Vec<u8>) {
    let n = gains.relays();
    let mut values = vec![0.0; lat.len];
    let mut choice = vec![0u8; lat.len];
    let mut p_r = [0.0; ORACLE_MAX_RELAYS];
    for idx in 0..lat.len {
        let c = lat.coords(idx);
        let p_s = fraction(c[0], lat.units);
        for (r, p) in p_r.iter_mut().enumerate().take(n) {
            *p = fraction(c[1 + r], lat.units);
        }
        let mut best = direct_rate(p_s, gains.g_sd[k]);
        let mut pick = 0u8;
        for cut in 0..n {
            let amp: f64 = order
                .assisting(k, cut)
                .iter()
                .map(|&r| libm::sqrt(p_r[r] * gains.g_rd[r][k]))
                .sum();
            let snr = (p_s * gains.g_sd[k] + amp * amp).min(p_s * order.cut_gain(gains, k, cut));
            let rate = libm::log2(1.0 + snr);
            if rate > best {
                best = rate;
                pick = 1 + cut as u8;
            }
        }
        values[idx] = best;
        choice[idx] = pick;
    }
    (values, choice)
}

/// Largest `f[i] + g[i]`, reduced over independent lanes.
fn row_max(f: &[f64], g: &[f64]) -> f64 {
    let mut lanes = [f64::NEG_INFINITY; 4];
    let mut fc = f.chunks_exact(4);
    let mut gc = g.chunks_exact(4);
    for (a, b) in (&mut fc).zip(&mut gc) {
        for j in 0..4 {
            let v = a[j] + b[j];
            lanes[j] = if v > lanes[j] { v } else { lanes[j] };
        }
    }
    for (a, b) in fc.remainder().iter().zip(gc.remainder()) {
        let v = a + b;
        lanes[0] = if v > lanes[0] { v } else { lanes[0] };
    }
    lanes[0].max(lanes[1]).max(lanes[2].max(lanes[3]))
}

/// Max-plus convolution over the lattice: `out[s] = max_{a <= s} f[a] + v[s - a]`,
/// with the maximizing `a` recorded (the first one in scan order on ties).
fn convolve(lat: &Lattice, f: &[f64], v: &[f64]) -> (Vec<f64>, Vec<u32>) {
    let [e0, e1, e2] = lat.ext;
    // v reversed along the source axis, so the inner scan runs forward
    let mut vrev = vec![0.0; lat.len];
    for (idx, slot) in vrev.iter_mut().enumerate() {
        let c = lat.coords(idx);
        *slot = v[lat.index([e0 - 1 - c[0], c[1], c[2]])];
    }
    let mut out = vec![f64::NEG_INFINITY; lat.len];
    let mut arg = vec![0u32; lat.len];
    for s2 in 0..e2 {
        for s1 in 0..e1 {
            for s0 in 0..e0 {
                let mut best = f64::NEG_INFINITY;
                let mut best_a = 0usize;
                for a2 in 0..=s2 {
                    for a1 in 0..=s1 {
                        let fbase = lat.index([0, a1, a2]);
                        let vbase = lat.index([e0 - 1 - s0, s1 - a1, s2 - a2]);
                        let fs = &f[fbase..=fbase + s0];
                        let vs = &vrev[vbase..=vbase + s0];
                        if row_max(fs, vs) > best {
                            for (a0, (x, y)) in fs.iter().zip(vs).enumerate() {
                                if x + y > best {
                                    best = x + y;
                                    best_a = fbase + a0;
                                }
                            }
                        }
                    }
                }
                let s = lat.index([s0, s1, s2]);
                out[s] = best;
                arg[s] = best_a as u32;
            }
        }
    }
    (out, arg)
}

/// Exhaustive search over modes, cuts and a power grid of step `grid_step`
/// for every device. Limited to 4 subcarriers and 2 relays.
pub fn oracle_small(gains: &ChannelGains, order: &RelayOrder, grid_step: f64) -> Result<GridOracle> {
    gains.validate()?;
    let k_count = gains.subcarriers();
    let n = gains.relays();
    if k_count > ORACLE_MAX_SUBCARRIERS || n > ORACLE_MAX_RELAYS {
        return Err(Error::InstanceTooLarge {
            subcarriers: k_count,
            relays: n,
        });
    }
    if !(0.01 - 1e-12..=0.25 + 1e-12).contains(&grid_step) {
        return Err(invalid("grid_step", "must lie in [0.01, 0.25]"));
    }
    let units_f = 1.0 / grid_step;
    let units = libm::round(units_f) as usize;
    if (units_f - units as f64).abs() > 1e-9 {
        return Err(invalid("grid_step", "must divide one evenly"));
    }

    let lat = Lattice::new(units, n + 1);
    let stages: Vec<(Vec<f64>, Vec<u8>)> = (0..k_count).map(|k| stage_values(gains, order, k, &lat)).collect();

    // budgets[k] is the lattice point spent on subcarrier k
    let mut budgets = vec![0usize; k_count];
    if k_count == 1 {
        budgets[0] = lat.full();
    } else {
        let mut acc = stages[0].0.clone();
        let mut args: Vec<Vec<u32>> = Vec::new();
        for stage in &stages[1..k_count - 1] {
            let (next, arg) = convolve(&lat, &acc, &stage.0);
            acc = next;
            args.push(arg);
        }
        let last = &stages[k_count - 1].0;
        let mut best = f64::NEG_INFINITY;
        let mut split = 0;
        for (a, val) in acc.iter().enumerate() {
            let total = val + last[lat.complement(a)];
            if total > best {
                best = total;
                split = a;
            }
        }
        budgets[k_count - 1] = lat.complement(split);
        let mut rest = split;
        for k in (1..k_count - 1).rev() {
            let a = args[k - 1][rest] as usize;
            budgets[k] = lat.minus(rest, a);
            rest = a;
        }
        budgets[0] = rest;
    }

    let mut allocation = Allocation::zeros(k_count, n);
    for k in 0..k_count {
        let c = lat.coords(budgets[k]);
        let pick = stages[k].1[budgets[k]];
        allocation.p_s[k] = fraction(c[0], units);
        if pick == 0 {
            continue;
        }
        let cut = (pick - 1) as usize;
        allocation.mode[k] = Mode::Relay;
        allocation.cut[k] = cut;
        for &r in order.assisting(k, cut) {
            allocation.p_r[r][k] = fraction(c[1 + r], units);
        }
    }
    debug_assert!(check_feasible(&allocation).feasible);
    let sum_rate = rate_report(&allocation, gains, order).sum_rate;
    Ok(GridOracle { allocation, sum_rate })
}

/// Objective of the fixed-mode convex oracle.
#[derive(Debug, Clone, PartialEq)]
pub enum FixedObjective {
    /// Sum rate under the per-device sum-power constraints.
    SumRate,
    /// `sum_k L_k` for the given multipliers, over nonnegative powers only.
    Lagrangian(DualVector),
}

/// Solution of the fixed-mode convex oracle.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvexOracle {
    pub allocation: Allocation,
    /// Objective at `allocation`, evaluated with the exact rate formulas.
    pub value: f64,
    pub sum_rate: f64,
    /// False if some Newton solve stalled before its decrement test.
    pub converged: bool,
}

#[derive(Debug, Clone)]
enum RateTerm {
    Direct { p: usize, g: f64 },
    Relay { s: usize },
}

/// Affine constraint `c + a^T z > 0`.
#[derive(Debug, Clone)]
struct Affine {
    c: f64,
    a: Vec<(usize, f64)>,
}

/// Combined-SNR constraint `p g_sd + (sum sqrt(g_i p_i))^2 - s > 0`.
#[derive(Debug, Clone)]
struct Combining {
    p: usize,
    g_sd: f64,
    relays: Vec<(usize, f64)>,
    s: usize,
}

impl Combining {
    fn amplitude(&self, z: &[f64]) -> f64 {
        self.relays.iter().map(|&(i, g)| libm::sqrt(g * z[i])).sum()
    }

    fn value(&self, z: &[f64]) -> f64 {
        let amp = self.amplitude(z);
        z[self.p] * self.g_sd + amp * amp - z[self.s]
    }
}

struct BarrierProblem {
    dim: usize,
    rates: Vec<RateTerm>,
    /// Linear objective coefficients (the negated multipliers).
    cost: Vec<f64>,
    affine: Vec<Affine>,
    combining: Vec<Combining>,
}

impl BarrierProblem {
    fn constraint_count(&self) -> usize {
        self.affine.len() + self.combining.len()
    }

    fn objective(&self, z: &[f64]) -> f64 {
        let rates: f64 = self
            .rates
            .iter()
            .map(|t| match *t {
                RateTerm::Direct { p, g } => direct_rate(z[p], g),
                RateTerm::Relay { s } => libm::log2(1.0 + z[s]),
            })
            .sum();
        rates + self.cost.iter().zip(z).map(|(c, x)| c * x).sum::<f64>()
    }

    fn interior(&self, z: &[f64]) -> bool {
        self.affine
            .iter()
            .all(|h| h.c + h.a.iter().map(|&(i, a)| a * z[i]).sum::<f64>() > 0.0)
            && self.combining.iter().all(|h| h.value(z) > 0.0)
    }

    fn barrier_value(&self, z: &[f64], t: f64) -> f64 {
        if !self.interior(z) {
            return f64::NEG_INFINITY;
        }
        let logs: f64 = self
            .affine
            .iter()
            .map(|h| libm::log(h.c + h.a.iter().map(|&(i, a)| a * z[i]).sum::<f64>()))
            .chain(self.combining.iter().map(|h| libm::log(h.value(z))))
            .sum();
        t * self.objective(z) + logs
    }

    /// Gradient and Hessian of the barrier function at an interior point.
    fn derivatives(&self, z: &[f64], t: f64, grad: &mut [f64], hess: &mut [f64]) {
        let n = self.dim;
        grad.iter_mut().for_each(|g| *g = 0.0);
        hess.iter_mut().for_each(|h| *h = 0.0);
        for term in &self.rates {
            match *term {
                RateTerm::Direct { p, g } => {
                    let d = 1.0 + 0.5 * g * z[p];
                    grad[p] += t * LOG2_E * g / d;
                    hess[p * n + p] -= t * LOG2_E * g * g / (2.0 * d * d);
                }
                RateTerm::Relay { s } => {
                    let d = 1.0 + z[s];
                    grad[s] += t * LOG2_E / d;
                    hess[s * n + s] -= t * LOG2_E / (d * d);
                }
            }
        }
        for (g, c) in grad.iter_mut().zip(&self.cost) {
            *g += t * c;
        }
        for h in &self.affine {
            let val = h.c + h.a.iter().map(|&(i, a)| a * z[i]).sum::<f64>();
            for &(i, ai) in &h.a {
                grad[i] += ai / val;
                for &(j, aj) in &h.a {
                    hess[i * n + j] -= ai * aj / (val * val);
                }
            }
        }
        let mut dh: Vec<(usize, f64)> = Vec::new();
        for h in &self.combining {
            let val = h.value(z);
            let amp = h.amplitude(z);
            dh.clear();
            dh.push((h.p, h.g_sd));
            dh.push((h.s, -1.0));
            for &(i, g) in &h.relays {
                dh.push((i, amp * libm::sqrt(g / z[i])));
            }
            for &(i, di) in &dh {
                grad[i] += di / val;
                for &(j, dj) in &dh {
                    hess[i * n + j] -= di * dj / (val * val);
                }
            }
            for &(i, gi) in &h.relays {
                let ri = libm::sqrt(gi / z[i]);
                for &(j, gj) in &h.relays {
                    let rj = libm::sqrt(gj / z[j]);
                    hess[i * n + j] += 0.5 * ri * rj / val;
                }
                hess[i * n + i] -= amp * libm::sqrt(gi) / (2.0 * z[i] * libm::sqrt(z[i])) / val;
            }
        }
    }

    /// Damped Newton ascent on the barrier function for a fixed `t`.
    fn center(&self, z: &mut [f64], t: f64, goal: f64) -> bool {
        let n = self.dim;
        let mut grad = vec![0.0; n];
        let mut hess = vec![0.0; n * n];
        let mut step = vec![0.0; n];
        let mut trial = vec![0.0; n];
        for _ in 0..200 {
            self.derivatives(z, t, &mut grad, &mut hess);
            hess.iter_mut().for_each(|h| *h = -*h);
            let mut solved = false;
            let mut shift = 0.0;
            let scale = (0..n).map(|i| hess[i * n + i].abs()).fold(1.0, f64::max);
            for _ in 0..8 {
                let mut m = hess.clone();
                for i in 0..n {
                    m[i * n + i] += shift;
                }
                step.copy_from_slice(&grad);
                if cholesky_solve(&mut m, n, &mut step) {
                    solved = true;
                    break;
                }
                shift = if shift == 0.0 { 1e-12 * scale } else { shift * 100.0 };
            }
            if !solved {
                return false;
            }
            let decrement: f64 = grad.iter().zip(&step).map(|(g, s)| g * s).sum();
            // the objective error left by a Newton decrement d is about d / 2t
            if decrement < goal {
                return true;
            }
            let base = self.barrier_value(z, t);
            let mut alpha = 1.0;
            let mut accepted = false;
            for _ in 0..80 {
                for i in 0..n {
                    trial[i] = z[i] + alpha * step[i];
                }
                let val = self.barrier_value(&trial, t);
                if val >= base + 1e-4 * alpha * decrement && trial != *z {
                    accepted = true;
                    break;
                }
                alpha *= 0.5;
            }
            if !accepted {
                // no representable ascent left; accept if the remaining gain
                // is below the rounding level of the barrier value
                return decrement < goal.max(1e-6 + 1e-12 * base.abs());
            }
            z.copy_from_slice(&trial);
        }
        false
    }
}

/// Solves the concave fixed-mode problem numerically.
///
/// `tolerance` is the target absolute accuracy of the objective; the
/// barrier parameter grows until the duality-gap bound drops below it.
pub fn oracle_convex_fixed(
    gains: &ChannelGains,
    order: &RelayOrder,
    mode: &[Mode],
    cut: &[usize],
    objective: &FixedObjective,
    tolerance: f64,
) -> Result<ConvexOracle> {
    gains.validate()?;
    let k_count = gains.subcarriers();
    let n = gains.relays();
    check_len("mode", k_count, mode.len())?;
    check_len("cut", k_count, cut.len())?;
    if let Some(&c) = cut.iter().zip(mode).find(|(c, m)| **m == Mode::Relay && **c >= n).map(|(c, _)| c) {
        return Err(Error::IndexOutOfRange {
            what: "cut",
            index: c,
            len: n,
        });
    }
    if !(tolerance > 0.0) {
        return Err(invalid("tolerance", "must be positive"));
    }
    let penalty = match objective {
        FixedObjective::SumRate => None,
        FixedObjective::Lagrangian(mu) => {
            check_len("dual vector", n, mu.relays())?;
            if !(mu.mu_s > 0.0) || mu.mu_r.iter().any(|m| !(*m >= 0.0)) {
                return Err(invalid("dual vector", "need mu_s > 0 and mu_r >= 0"));
            }
            Some(mu)
        }
    };

    // variable slots: (subcarrier, None) for the source, (subcarrier, Some(r)) for relays
    let mut owner: Vec<(usize, Option<usize>)> = Vec::new();
    let mut rates = Vec::new();
    let mut affine = Vec::new();
    let mut combining = Vec::new();
    let mut s_slots = Vec::new();

    for k in 0..k_count {
        let p = owner.len();
        owner.push((k, None));
        affine.push(Affine { c: 0.0, a: vec![(p, 1.0)] });
        if mode[k] == Mode::Direct {
            rates.push(RateTerm::Direct { p, g: gains.g_sd[k] });
            continue;
        }
        let mut relays = Vec::new();
        for &r in order.assisting(k, cut[k]) {
            let g = gains.g_rd[r][k];
            if g > 0.0 {
                let i = owner.len();
                owner.push((k, Some(r)));
                affine.push(Affine { c: 0.0, a: vec![(i, 1.0)] });
                relays.push((i, g));
            }
        }
        let s = owner.len();
        owner.push((k, None));
        s_slots.push(s);
        rates.push(RateTerm::Relay { s });
        affine.push(Affine {
            c: 0.0,
            a: vec![(p, order.cut_gain(gains, k, cut[k])), (s, -1.0)],
        });
        affine.push(Affine { c: 1.0, a: vec![(s, 1.0)] });
        combining.push(Combining {
            p,
            g_sd: gains.g_sd[k],
            relays,
            s,
        });
    }
    let dim = owner.len();
    let is_s = |i: usize| s_slots.binary_search(&i).is_ok();

    let mut cost = vec![0.0; dim];
    let mut z = vec![0.0; dim];
    match penalty {
        None => {
            let mut members: Vec<Vec<usize>> = vec![Vec::new(); n + 1];
            for (i, &(_, r)) in owner.iter().enumerate() {
                if is_s(i) {
                    continue;
                }
                members[r.map_or(0, |r| r + 1)].push(i);
            }
            for group in members.iter().filter(|g| !g.is_empty()) {
                affine.push(Affine {
                    c: 1.0,
                    a: group.iter().map(|&i| (i, -1.0)).collect(),
                });
                for &i in group {
                    z[i] = 0.5 / group.len() as f64;
                }
            }
        }
        Some(mu) => {
            let source_cap = 1.5 * LOG2_E / mu.mu_s + 1.0;
            for (i, &(k, r)) in owner.iter().enumerate() {
                if is_s(i) {
                    continue;
                }
                let cap = match r {
                    None => {
                        cost[i] = -mu.mu_s;
                        source_cap
                    }
                    Some(r) => {
                        cost[i] = -mu.mu_r[r];
                        1.5 * source_cap * order.cut_gain(gains, k, cut[k]) / gains.g_rd[r][k] + 1.0
                    }
                };
                affine.push(Affine { c: cap, a: vec![(i, -1.0)] });
                z[i] = 0.5 * cap;
            }
        }
    }

    let mut problem = BarrierProblem {
        dim,
        rates,
        cost,
        affine,
        combining,
    };
    for h in &problem.combining {
        let amp = h.amplitude(&z);
        let k_gain = problem.affine.iter().find(|a| a.a.len() == 2 && a.a[0].0 == h.p && a.a[1].0 == h.s);
        let source_relay = k_gain.map_or(0.0, |a| a.a[0].1 * z[h.p]);
        let combined = z[h.p] * h.g_sd + amp * amp;
        z[h.s] = source_relay.min(combined) - 0.5;
    }
    problem.affine.shrink_to_fit();

    let m = problem.constraint_count() as f64;
    let mut t = 1.0;
    let mut converged = true;
    loop {
        converged &= problem.center(&mut z, t, (1e-4 * t * tolerance).max(1e-9));
        if m / t < tolerance {
            break;
        }
        t = (t * 20.0).min(m / tolerance * 1.01);
    }

    let mut allocation = Allocation::zeros(k_count, n);
    allocation.mode = mode.to_vec();
    allocation.cut = cut.to_vec();
    for (i, &(k, r)) in owner.iter().enumerate() {
        if is_s(i) {
            continue;
        }
        let v = z[i].max(0.0);
        match r {
            None => allocation.p_s[k] = v,
            Some(r) => allocation.p_r[r][k] = v,
        }
    }
    let sum_rate = rate_report(&allocation, gains, order).sum_rate;
    let value = match penalty {
        None => sum_rate,
        Some(mu) => {
            let spent = mu.mu_s * allocation.p_s.iter().sum::<f64>()
                + allocation
                    .p_r
                    .iter()
                    .zip(&mu.mu_r)
                    .map(|(row, m)| m * row.iter().sum::<f64>())
                    .sum::<f64>();
            sum_rate - spent
        }
    };
    Ok(ConvexOracle {
        allocation,
        value,
        sum_rate,
        converged,
    })
}
