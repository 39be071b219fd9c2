//! Seeded randomness, split into independent streams by stable derivation so
//! that adding one actor never perturbs another actor's draws.

use rand_chacha::ChaCha20Rng;
use rand_core::{RngCore, SeedableRng};

use crate::crypto::{derive_subseed, Address};

/// One deterministic stream derived from the scenario seed and a context
/// label.
pub struct DetRng {
    inner: ChaCha20Rng,
}

impl DetRng {
    pub fn from_context(scenario_seed: u64, context: &[u8]) -> Self {
        let seed = derive_subseed(&scenario_seed.to_le_bytes(), context);
        DetRng {
            inner: ChaCha20Rng::from_seed(seed),
        }
    }

    /// The stream that drives one actor's behavior.
    pub fn for_actor(scenario_seed: u64, address: Address) -> Self {
        let mut context = Vec::with_capacity(6 + Address::LEN);
        context.extend_from_slice(b"actor:");
        context.extend_from_slice(address.as_bytes());
        Self::from_context(scenario_seed, &context)
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    /// Uniform in [0, 1).
    pub fn unit_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform in [lo, hi); returns lo when the range is empty.
    pub fn range_f64(&mut self, lo: f64, hi: f64) -> f64 {
        if hi <= lo {
            return lo;
        }
        lo + self.unit_f64() * (hi - lo)
    }

    /// Uniform in [0, n); n must be nonzero.
    pub fn below(&mut self, n: u64) -> u64 {
        debug_assert!(n > 0);
        // Desk-scale ranges; modulo bias is irrelevant here.
        self.next_u64() % n
    }

    pub fn chance(&mut self, probability: f64) -> bool {
        probability > 0.0 && self.unit_f64() < probability
    }
}
