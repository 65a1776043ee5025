//! Deterministic random-number substreams.
//!
//! Every stochastic stage (firm generation, bootstrap iteration, Monte Carlo
//! replication) owns a ChaCha8 stream derived from `(master seed, domain
//! label, index)`. Streams for distinct `(domain, index)` pairs are
//! statistically independent, and a stage's stream never depends on how work
//! is scheduled, so parallel and serial execution consume identical
//! randomness.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// FNV-1a hash of a byte string.
///
/// Used instead of `std::hash` so that stream derivation is stable across
/// Rust releases and platforms.
pub fn stable_hash(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// SplitMix64 finalizer: a bijective avalanche mix on 64 bits.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn stream_state(master: u64, domain: &str, index: u64) -> u64 {
    let mut s = mix(master);
    s = mix(s ^ stable_hash(domain.as_bytes()));
    mix(s ^ index)
}

/// The RNG stream for (`domain`, `index`) under `master`.
pub fn substream(master: u64, domain: &str, index: u64) -> ChaCha8Rng {
    let mut s = stream_state(master, domain, index);
    let mut seed = [0u8; 32];
    for chunk in seed.chunks_exact_mut(8) {
        s = mix(s);
        chunk.copy_from_slice(&s.to_le_bytes());
    }
    ChaCha8Rng::from_seed(seed)
}

/// A derived 64-bit seed, for nesting one seeded stage inside another.
pub fn derive_seed(master: u64, domain: &str, index: u64) -> u64 {
    mix(stream_state(master, domain, index))
}
