//! Deterministic random substreams.
//!
//! Every simulated quantity draws from a ChaCha8 stream keyed by
//! `(seed, purpose, index)`: the key `(seed, purpose)` selects the ChaCha
//! key and `index` selects the 64-bit stream id. Paths therefore get the
//! same numbers no matter which worker simulates them, and loss, trigger and
//! rate draws never share a stream.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type PathRng = ChaCha8Rng;

/// What a substream is used for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u64)]
pub enum Purpose {
    Loss = 1,
    Trigger = 2,
    Rate = 3,
    Arrivals = 4,
    LossCdf = 5,
    Severity = 6,
    Scenario = 7,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub fn substream(seed: u64, purpose: Purpose, index: u64) -> PathRng {
    let key = splitmix64(seed ^ splitmix64(purpose as u64));
    let mut rng = ChaCha8Rng::seed_from_u64(key);
    rng.set_stream(index);
    rng
}
