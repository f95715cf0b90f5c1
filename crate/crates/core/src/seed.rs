//! Deterministic seed derivation.
//!
//! Every random stream in the crate is seeded from a master seed mixed with
//! stable context words (identity label hash, session index, modality tag).
//! The mix is splitmix64 over FNV-1a so it does not depend on the standard
//! library's hasher, which is not guaranteed stable across releases.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Generator used for every stochastic component.
pub type StreamRng = ChaCha8Rng;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

/// FNV-1a over the UTF-8 bytes of `label`.
pub fn label_hash(label: &str) -> u64 {
    label
        .bytes()
        .fold(FNV_OFFSET, |h, b| (h ^ b as u64).wrapping_mul(FNV_PRIME))
}

/// splitmix64 finalizer.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Folds each word into the running state with splitmix64.
pub fn mix(master: u64, words: &[u64]) -> u64 {
    words.iter().fold(splitmix64(master), |acc, &w| {
        splitmix64(acc ^ splitmix64(w))
    })
}

/// Modality tags used in stream seed derivation.
pub const GAZE_TAG: u64 = 0x6761_7a65;
pub const BODY_TAG: u64 = 0x626f_6479;

/// Seed for the mechanism applied to one (identity, session, modality) stream.
pub fn stream_seed(master: u64, identity: &str, session: u32, modality_tag: u64) -> u64 {
    mix(
        master,
        &[label_hash(identity), session as u64, modality_tag],
    )
}

pub fn rng_from_seed(seed: u64) -> StreamRng {
    StreamRng::seed_from_u64(seed)
}
