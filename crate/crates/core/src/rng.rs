//! Counter-based random streams derived from a single master seed.
//!
//! Every replica, cloud and auxiliary draw gets its own ChaCha stream, so the
//! numbers a replica sees do not depend on how replicas are scheduled.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Purposes get disjoint blocks of stream ids.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Purpose {
    Replica = 1,
    Cloud = 2,
    Initial = 3,
    Validation = 4,
    Reference = 5,
}

pub fn stream(seed: u64, purpose: Purpose, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((purpose as u64) << 48) | (index & ((1 << 48) - 1)));
    rng
}
