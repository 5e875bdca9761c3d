//! Named random substreams derived from one root seed.
//!
//! Every consumer of randomness asks for its own stream by name, so adding a
//! draw in one place never shifts the numbers another component sees.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub const INIT: &str = "init";
pub const SAMPLING: &str = "sampling";
pub const ENVIRONMENT: &str = "environment";
pub const CORPUS: &str = "corpus";
pub const ATTENTION: &str = "attention";
pub const BASELINE: &str = "baseline";

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut hash = 0xcbf2_9ce4_8422_2325u64;
    for b in bytes {
        hash ^= u64::from(*b);
        hash = hash.wrapping_mul(0x0100_0000_01b3);
    }
    hash
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed for the substream `name` under `root`.
pub fn substream_seed(root: u64, name: &str) -> u64 {
    splitmix(root ^ splitmix(fnv1a(name.as_bytes())))
}

pub fn stream(root: u64, name: &str) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(substream_seed(root, name))
}

/// Stream keyed by a name and an integer index (e.g. one per token id).
pub fn indexed_stream(root: u64, name: &str, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(splitmix(substream_seed(root, name) ^ splitmix(index)))
}
