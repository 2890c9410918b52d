//! Derived random streams.
//!
//! Every random decision in the toolkit is drawn from a ChaCha8 stream whose
//! 256-bit key is built from `(seed, domain, aux)` and whose 64-bit stream id is
//! chosen by the caller. Two draws that share a key and stream id see the same
//! numbers no matter which thread produces them or in what order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Name recorded in output metadata.
pub const GENERATOR_NAME: &str = "ChaCha8Rng (rand_chacha 0.9), key=(seed, domain, aux), stream=id";

/// Per-category error flags of a synthetic population.
pub(crate) const DOMAIN_FLAGS: u64 = 0x464c_4147;
/// Sentence samples drawn from a population.
pub(crate) const DOMAIN_SAMPLE: u64 = 0x5341_4d50;
/// PED value draws.
pub(crate) const DOMAIN_PED: u64 = 0x5045_4421;

pub(crate) fn stream(seed: u64, domain: u64, aux: u64, id: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&domain.to_le_bytes());
    key[16..24].copy_from_slice(&aux.to_le_bytes());
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(id);
    rng
}
