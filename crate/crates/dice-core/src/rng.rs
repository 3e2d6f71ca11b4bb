//! Deterministic randomness.
//!
//! Every stochastic ingredient of a run (initial noise, renoising draws,
//! measurement noise, probe vectors) comes from a named stream derived from
//! one root seed, so a run is reproducible from `(seed)` alone and streams
//! never alias each other across stages.

use alloc::vec::Vec;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;

/// splitmix64 finalizer; decorrelates structurally close inputs.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// FNV-1a over the label bytes, then mixed with the root seed.
///
/// Distinct labels give independent streams under the same root; the same
/// label always gives the same stream.
pub fn derive_seed(root: u64, label: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in label.as_bytes() {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    mix(root ^ mix(h))
}

/// A seeded Gaussian/uniform source backing one stage of a run.
pub struct SeedStream {
    rng: ChaCha12Rng,
}

impl SeedStream {
    pub fn new(seed: u64) -> Self {
        Self {
            rng: ChaCha12Rng::seed_from_u64(seed),
        }
    }

    /// Stream for `label` under `root`; see [`derive_seed`].
    pub fn named(root: u64, label: &str) -> Self {
        Self::new(derive_seed(root, label))
    }

    /// One standard normal draw.
    pub fn standard_normal(&mut self) -> f64 {
        self.rng.sample(StandardNormal)
    }

    /// n i.i.d. standard normal draws.
    pub fn standard_normal_vec(&mut self, n: usize) -> Vec<f64> {
        (0..n)
            .map(|_| self.rng.sample::<f64, _>(StandardNormal))
            .collect()
    }

    /// Uniform in [0, 1).
    pub fn uniform(&mut self) -> f64 {
        self.rng.gen::<f64>()
    }

    /// Choose `k` distinct indices out of `0..n`, ascending.
    ///
    /// Floyd's algorithm; consumes exactly `k` draws.
    pub fn choose_indices(&mut self, n: usize, k: usize) -> Vec<usize> {
        assert!(k <= n, "cannot choose {k} of {n}");
        let mut chosen: Vec<usize> = Vec::with_capacity(k);
        for j in (n - k)..n {
            let t = self.rng.gen_range(0..=j);
            if chosen.contains(&t) {
                chosen.push(j);
            } else {
                chosen.push(t);
            }
        }
        chosen.sort_unstable();
        chosen
    }
}
