//! Deterministic random streams.
//!
//! Every random consumer draws from a ChaCha8 stream keyed by the master
//! seed; the stream number is a 64-bit FNV-1a hash of a purpose label and
//! an index. Two consumers with different `(purpose, index)` never share a
//! stream, and the mapping does not depend on the order in which streams
//! are created.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

fn fnv1a(bytes: impl IntoIterator<Item = u8>, mut hash: u64) -> u64 {
    for b in bytes {
        hash ^= u64::from(b);
        hash = hash.wrapping_mul(FNV_PRIME);
    }
    hash
}

/// Stream id for `(purpose, index)`.
pub fn stream_id(purpose: &str, index: u64) -> u64 {
    let h = fnv1a(purpose.bytes(), FNV_OFFSET);
    fnv1a(index.to_le_bytes(), h)
}

/// A generator for `(purpose, index)` under `master_seed`.
pub fn stream(master_seed: u64, purpose: &str, index: u64) -> SimRng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(stream_id(purpose, index));
    rng
}
