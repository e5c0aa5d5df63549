// SPDX-License-Identifier: Apache-2.0

//! Counter-addressed random streams.
//!
//! Every draw is a pure function of `(seed, realization, bond)`: the seed
//! keys a ChaCha8 generator, the realization index selects its 64-bit
//! stream, and bond `b` consumes the `b`-th 64-bit word of that stream.
//! Ensembles are therefore reproducible regardless of which thread builds
//! which realization, or in what order.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// A positioned stream for one disorder realization.
#[derive(Debug, Clone)]
pub struct RealizationStream {
    rng: ChaCha8Rng,
}

impl RealizationStream {
    pub fn new(seed: u64, realization: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(realization);
        rng.set_word_pos(0);
        Self { rng }
    }

    /// Jump directly to the draw belonging to `bond`.
    pub fn seek(&mut self, bond: usize) {
        // one f64 draw consumes one u64 = two 32-bit words
        self.rng.set_word_pos(2 * bond as u128);
    }

    /// Uniform draw in [0, 1) for the current bond, advancing to the next one.
    pub fn uniform(&mut self) -> f64 {
        self.rng.gen::<f64>()
    }
}

/// Uniform draw for a single `(seed, realization, bond)` address.
pub fn uniform_at(seed: u64, realization: u64, bond: usize) -> f64 {
    let mut s = RealizationStream::new(seed, realization);
    s.seek(bond);
    s.uniform()
}
