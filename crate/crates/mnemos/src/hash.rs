//! Stable 64-bit hashing and the seeded generator used everywhere determinism
//! matters. Nothing here depends on the platform or the standard library's
//! hasher, so hashes and random sequences are reproducible across builds.

/// Seed constant shared by the token hash and the splitmix64 increment.
pub const HASH_SEED: u64 = 0x9E37_79B9_7F4A_7C15;

const FNV_PRIME: u64 = 0x0000_0100_0000_01B3;

/// splitmix64 finalizer: full-avalanche mix of a 64-bit state.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Stable hash of a byte string: FNV-1a folding seeded with `HASH_SEED`,
/// followed by a mix64 finalization for bit avalanche.
pub fn stable_hash(bytes: &[u8]) -> u64 {
    let mut h = HASH_SEED;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(FNV_PRIME);
    }
    mix64(h)
}

/// Deterministic splitmix64 sequence generator.
#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        Self { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(HASH_SEED);
        mix64(self.state)
    }

    /// Uniform draw in `[0, bound)` via the multiply-shift reduction.
    pub fn next_below(&mut self, bound: u64) -> u64 {
        assert!(bound > 0, "bound must be positive");
        ((u128::from(self.next_u64()) * u128::from(bound)) >> 64) as u64
    }

    /// Uniform draw in `[0, 1)`.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 / (1u64 << 53) as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stable_hash_is_deterministic() {
        assert_eq!(stable_hash(b"cat"), stable_hash(b"cat"));
        assert_ne!(stable_hash(b"cat"), stable_hash(b"dog"));
    }

    #[test]
    fn splitmix_sequences_repeat_per_seed() {
        let mut a = SplitMix64::new(7);
        let mut b = SplitMix64::new(7);
        for _ in 0..100 {
            assert_eq!(a.next_u64(), b.next_u64());
        }
        let mut c = SplitMix64::new(8);
        assert_ne!(SplitMix64::new(7).next_u64(), c.next_u64());
    }

    #[test]
    fn next_below_stays_in_range() {
        let mut rng = SplitMix64::new(42);
        for _ in 0..10_000 {
            assert!(rng.next_below(10) < 10);
        }
    }
}
