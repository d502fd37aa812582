//! Seed plumbing. All randomness in the toolkit flows from one 64-bit seed;
//! each stage derives its own counter-based stream so that sub-stages stay
//! reproducible independently of each other.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;

/// The RNG handed to every stage. ChaCha is counter-based, so streams derived
/// from distinct keys never correlate and re-runs are bit-identical.
pub type StageRng = ChaCha12Rng;

/// 64-bit mixer (splitmix64 finalizer). Used to fold stage tags into the seed.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn fold_tag(state: u64, tag: &str) -> u64 {
    let mut acc = state;
    for chunk in tag.as_bytes().chunks(8) {
        let mut word = [0u8; 8];
        word[..chunk.len()].copy_from_slice(chunk);
        acc = mix(acc ^ u64::from_le_bytes(word));
    }
    acc
}

/// Derives a stage key from the master seed and a path of tags, e.g.
/// `stage_rng(seed, &["generate", "identity", "17"])`.
pub fn stage_rng(seed: u64, tags: &[&str]) -> StageRng {
    let mut key = mix(seed);
    for tag in tags {
        key = fold_tag(key, tag);
    }
    ChaCha12Rng::seed_from_u64(key)
}

/// Stage key variant for numeric coordinates (epoch, step, sample index ...).
pub fn stage_rng_indexed(seed: u64, tags: &[&str], indices: &[u64]) -> StageRng {
    let mut key = mix(seed);
    for tag in tags {
        key = fold_tag(key, tag);
    }
    for idx in indices {
        key = mix(key ^ *idx);
    }
    ChaCha12Rng::seed_from_u64(key)
}
