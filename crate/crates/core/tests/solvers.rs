//! End-to-end behavior of the dual, coordinate-ascent and reference solvers
//! on small instances.

use dfrelay_core::baseline::{heuristic_ra, oracle_convex_fixed, oracle_small, FixedObjective};
use dfrelay_core::dual::{duality_gap_probe, solve_dual, ModeSpec, SubgradientConfig};
use dfrelay_core::iterative::{init_modes, solve_iterative};
use dfrelay_core::model::{check_feasible, sum_rate};
use dfrelay_core::{ChannelGains, Error, Mode, RelayOrder};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn instance(k: usize, n: usize, seed: u64) -> ChannelGains {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let link = |rng: &mut ChaCha8Rng| {
        let mean = 10f64.powf(rng.random_range(-1.0..2.0));
        (0..k)
            .map(|_| -mean * (1.0 - rng.random::<f64>()).ln())
            .collect::<Vec<f64>>()
    };
    let sd = link(&mut rng);
    let sr = (0..n).map(|_| link(&mut rng)).collect();
    let rd = (0..n).map(|_| link(&mut rng)).collect();
    ChannelGains::new(sd, sr, rd).unwrap()
}

fn tight(epsilon: f64, max_iterations: usize) -> SubgradientConfig {
    SubgradientConfig {
        epsilon,
        max_iterations,
        ..SubgradientConfig::default()
    }
}

#[test]
fn single_direct_subcarrier_takes_all_power() {
    let g = 10.0;
    let gains = ChannelGains::new(vec![g], vec![vec![2.0]], vec![vec![5.0]]).unwrap();
    let order = RelayOrder::new(&gains);
    let sol = solve_dual(&gains, &order, &tight(1e-3, 20_000), &ModeSpec::Free).unwrap();
    assert!(sol.converged);
    assert_eq!(sol.allocation.mode, vec![Mode::Direct]);
    let full = 2.0 * (1.0 + g / 2.0).log2();
    // grid over the only free variable
    let grid = (0..=1000)
        .map(|i| 2.0 * (1.0 + i as f64 / 1000.0 * g / 2.0).log2())
        .fold(0.0, f64::max);
    assert_eq!(grid, full);
    assert!(sol.sum_rate <= full + 1e-12);
    assert!(full - sol.sum_rate < 1e-3, "{}", sol.sum_rate);
    assert!((sol.allocation.p_s[0] - 1.0).abs() < 1e-2);
}

#[test]
fn termination_certifies_small_gap() {
    let cfg = SubgradientConfig::default();
    let mut converged = 0;
    for seed in 0..20 {
        let gains = instance(4, 2, seed);
        let order = RelayOrder::new(&gains);
        let sol = solve_dual(&gains, &order, &cfg, &ModeSpec::Free).unwrap();
        assert!(check_feasible(&sol.allocation).feasible);
        assert!(sol.allocation.respects_assisting_sets(&order));
        let rate = sum_rate(&sol.allocation, &gains, &order).unwrap().sum_rate;
        assert!((rate - sol.sum_rate).abs() < 1e-12);
        // no primal value exceeds any dual value
        assert!(sol.sum_rate <= sol.trace.best_dual_value + 1e-9);
        if sol.converged {
            converged += 1;
            assert!(*sol.trace.slack_gap_history.last().unwrap() < cfg.epsilon);
            assert!(sol.trace.iterations < cfg.max_iterations);
        } else {
            assert_eq!(sol.trace.iterations, cfg.max_iterations);
        }
    }
    assert!(converged > 0);
}

#[test]
fn grid_oracle_never_beats_the_dual_bound() {
    for seed in 0..4 {
        let gains = instance(3, 2, seed);
        let order = RelayOrder::new(&gains);
        let oracle = oracle_small(&gains, &order, 0.05).unwrap();
        assert!(check_feasible(&oracle.allocation).feasible);
        let probe = duality_gap_probe(&gains, &order, &SubgradientConfig::default()).unwrap();
        assert!(oracle.sum_rate <= probe.dual_value + 1e-9);
        assert!(probe.gap >= -1e-9);
    }
}

#[test]
fn fixed_modes_match_the_convex_oracle() {
    let cfg = tight(1e-4, 200_000);
    let mut checked = 0;
    for seed in 0..20 {
        let gains = instance(4, 2, seed);
        let order = RelayOrder::new(&gains);
        let start = heuristic_ra(&gains, &order);
        let spec = ModeSpec::Fixed {
            mode: start.mode.clone(),
            cut: start.cut.clone(),
        };
        let convex = oracle_convex_fixed(&gains, &order, &start.mode, &start.cut, &FixedObjective::SumRate, 1e-10).unwrap();
        assert!(convex.converged);
        let all_direct = start.mode.iter().all(|m| *m == Mode::Direct);
        match solve_dual(&gains, &order, &cfg, &spec) {
            Ok(sol) => {
                assert!(sol.sum_rate <= convex.sum_rate + 1e-6);
                if sol.converged {
                    checked += 1;
                    assert!(sol.sum_rate >= convex.sum_rate - cfg.epsilon - 1e-6, "seed {seed}");
                } else {
                    assert!(!all_direct, "seed {seed}");
                }
            }
            Err(Error::NoFeasibleIterate { .. }) => assert!(!all_direct),
            Err(e) => panic!("seed {seed}: {e}"),
        }
    }
    assert!(checked >= 3);
}

#[test]
fn coordinate_ascent_invariants() {
    let cfg = SubgradientConfig::default();
    for seed in 0..20 {
        let gains = instance(4, 2, seed);
        let order = RelayOrder::new(&gains);
        let sol = match solve_iterative(&gains, &order, &cfg) {
            Ok(sol) => sol,
            Err(Error::NoFeasibleIterate { .. }) => continue,
            Err(e) => panic!("seed {seed}: {e}"),
        };
        assert!(check_feasible(&sol.allocation).feasible);
        assert!(sol.sum_rate <= duality_gap_probe(&gains, &order, &cfg).unwrap().dual_value + 1e-9);
        let init = init_modes(&gains, &order);
        assert!(sol.states[0].same_assignment(&init));
        for pair in sol.states.windows(2) {
            let (a, b) = (&pair[0], &pair[1]);
            assert_eq!(b.iteration, a.iteration + 1);
            for k in 0..gains.subcarriers() {
                if a.mode[k] == Mode::Direct {
                    assert_eq!(b.mode[k], Mode::Direct);
                }
                if b.mode[k] == Mode::Relay {
                    assert!(b.cut[k] <= a.cut[k]);
                }
            }
        }
        for (k, &direct) in init.d_set.iter().enumerate() {
            if direct {
                assert_eq!(sol.allocation.mode[k], Mode::Direct);
            }
        }
    }
}

#[test]
fn free_solution_survives_fixing_its_modes() {
    let cfg = SubgradientConfig::default();
    for seed in [2, 14, 17] {
        let gains = instance(4, 2, seed);
        let order = RelayOrder::new(&gains);
        let free = solve_dual(&gains, &order, &cfg, &ModeSpec::Free).unwrap();
        assert!(free.converged, "seed {seed}");
        let spec = ModeSpec::Fixed {
            mode: free.allocation.mode.clone(),
            cut: free.allocation.cut.clone(),
        };
        let fixed = solve_dual(&gains, &order, &cfg, &spec).unwrap();
        assert!((fixed.sum_rate - free.sum_rate).abs() <= 2.0 * cfg.epsilon, "seed {seed}");
    }
}

#[test]
fn heuristic_is_feasible_and_below_the_bound() {
    for seed in 0..10 {
        let gains = instance(6, 3, seed);
        let order = RelayOrder::new(&gains);
        let h = heuristic_ra(&gains, &order);
        assert!(check_feasible(&h).feasible);
        assert!(h.respects_assisting_sets(&order));
        let rate = sum_rate(&h, &gains, &order).unwrap().sum_rate;
        let probe = duality_gap_probe(&gains, &order, &SubgradientConfig::default()).unwrap();
        assert!(rate <= probe.dual_value + 1e-9);
    }
}
