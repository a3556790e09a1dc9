//! Random normalized-gain instances for checks that do not need geometry.

use dfrelay_core::ChannelGains;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1};

/// Exponentially distributed gains whose per-link means are log-uniform
/// on `[0.1, 100]`.
pub fn random_gains<R: Rng + ?Sized>(subcarriers: usize, relays: usize, rng: &mut R) -> ChannelGains {
    let link = |rng: &mut R| -> Vec<f64> {
        let mean = 10f64.powf(rng.random_range(-1.0..2.0));
        (0..subcarriers)
            .map(|_| {
                let e: f64 = Exp1.sample(rng);
                mean * e
            })
            .collect()
    };
    let g_sd = link(rng);
    let g_sr = (0..relays).map(|_| link(rng)).collect();
    let g_rd = (0..relays).map(|_| link(rng)).collect();
    ChannelGains::new(g_sd, g_sr, g_rd).expect("dimensions are consistent")
}

pub fn seeded_gains(subcarriers: usize, relays: usize, seed: u64) -> ChannelGains {
    random_gains(subcarriers, relays, &mut ChaCha8Rng::seed_from_u64(seed))
}
