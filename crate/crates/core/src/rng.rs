//! Counter-keyed random streams.
//!
//! Every trial, restart or cell derives its own generator from the user
//! seed and a small key path, so results never depend on the order in
//! which parallel work is scheduled.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// One round of the splitmix64 finaliser.
#[inline]
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Hashes `seed` together with an ordered key path into a 64-bit value.
pub fn derive(seed: u64, keys: &[u64]) -> u64 {
    let mut h = splitmix64(seed);
    for (depth, &k) in keys.iter().enumerate() {
        h = splitmix64(h ^ splitmix64(k.wrapping_add((depth as u64 + 1).wrapping_mul(GOLDEN))));
    }
    h
}

/// A ChaCha8 generator keyed by `(seed, keys...)`.
pub fn stream(seed: u64, keys: &[u64]) -> StreamRng {
    let mut state = derive(seed, keys);
    let mut bytes = [0u8; 32];
    for chunk in bytes.chunks_exact_mut(8) {
        state = splitmix64(state);
        chunk.copy_from_slice(&state.to_le_bytes());
    }
    ChaCha8Rng::from_seed(bytes)
}

/// Deterministic pseudo-random value in `[-1, 1)` for index `i`; used for
/// start vectors where pulling a full generator would be overkill.
#[inline]
pub(crate) fn hash_unit(salt: u64, i: u64) -> f64 {
    let bits = splitmix64(salt ^ splitmix64(i)) >> 11;
    (bits as f64) * (1.0 / (1u64 << 52) as f64) - 1.0
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let a: u64 = stream(7, &[1, 2]).random();
        let b: u64 = stream(7, &[1, 2]).random();
        let c: u64 = stream(7, &[2, 1]).random();
        let d: u64 = stream(8, &[1, 2]).random();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_ne!(a, d);
    }

    #[test]
    fn hash_unit_range() {
        for i in 0..10_000 {
            let v = hash_unit(3, i);
            assert!((-1.0..1.0).contains(&v));
        }
    }
}
