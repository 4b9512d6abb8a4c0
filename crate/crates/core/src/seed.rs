//! Deterministic seed derivation for independent random substreams.
//!
//! Every stochastic component of a run draws from its own substream, keyed by
//! a `(domain, entity)` pair derived from the single master seed. Two
//! substreams with different keys are statistically independent, and the
//! stream for one entity does not move when another entity is added, removed,
//! or re-keyed. This is what makes run logs reproducible byte-for-byte and
//! lets per-human streams survive changes to the rest of the configuration.
//!
//! Derivation is a SplitMix64 chain: each input word is folded into the state
//! with the 64-bit golden-ratio increment and passed through the SplitMix64
//! finalizer. The resulting 64-bit key seeds a ChaCha8 generator.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Coincidence-emission stream of a run.
pub const DOMAIN_COINCIDENCE: u64 = 0x01;
/// Per-human intervention pulse streams.
pub const DOMAIN_INTERVENTION: u64 = 0x02;
/// Per-coincidence outcome sampling.
pub const DOMAIN_OUTCOME: u64 = 0x03;

/// Sub-channel within a human's intervention stream: template-passing pulse times.
pub const SUB_PASSING_TIMES: u64 = 0x00;
/// Sub-channel: raw (non-passing) pulse times.
pub const SUB_RAW_TIMES: u64 = 0x01;
/// Sub-channel: template class labels.
pub const SUB_TEMPLATE_LABELS: u64 = 0x02;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derive a 64-bit substream key from a parent key and one word.
#[inline]
pub fn derive(parent: u64, word: u64) -> u64 {
    splitmix64(parent.wrapping_add(GOLDEN).wrapping_add(splitmix64(word)))
}

/// Derive the key for a `(domain, entity)` substream of `master`.
#[inline]
pub fn substream_key(master: u64, domain: u64, entity: u64) -> u64 {
    derive(derive(master, domain), entity)
}

/// ChaCha8 generator for the `(domain, entity)` substream of `master`.
pub fn substream(master: u64, domain: u64, entity: u64) -> ChaCha8Rng {
    rng_from_key(substream_key(master, domain, entity))
}

/// ChaCha8 generator directly from a derived key.
pub fn rng_from_key(key: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(key)
}
