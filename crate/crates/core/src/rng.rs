//! Counter-derived random streams.
//!
//! Every random draw in a campaign comes from a stream keyed by
//! `(master_seed, trial_index, purpose)`. Streams never depend on which
//! worker thread runs a trial, so campaign output is a pure function of the
//! configuration and the master seed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// What a stream is used for. Distinct purposes of the same trial get
/// statistically independent streams.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Purpose {
    Topology,
    /// Mobile snapshot of hop `t` (zero based).
    Mobiles(u32),
    SectorArea,
    LosAverage,
    NlosAverage,
    Fading,
    Validation,
    Custom(u32),
}

impl Purpose {
    fn tag(self) -> u64 {
        match self {
            Purpose::Topology => 1,
            Purpose::Mobiles(t) => 0x100 + t as u64,
            Purpose::SectorArea => 2,
            Purpose::LosAverage => 3,
            Purpose::NlosAverage => 4,
            Purpose::Fading => 5,
            Purpose::Validation => 6,
            Purpose::Custom(c) => 0x1_0000_0000 + c as u64,
        }
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Stream for `(master_seed, trial_index, purpose)`.
pub fn stream(master_seed: u64, trial_index: u64, purpose: Purpose) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(splitmix64(master_seed));
    rng.set_stream(splitmix64(trial_index ^ splitmix64(purpose.tag())));
    rng
}
