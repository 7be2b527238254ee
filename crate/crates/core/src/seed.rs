//! Seed splitting.
//!
//! Every random stream in an experiment is derived from one master seed as
//! `child = mix(mix(master ^ purpose) ^ index)` where `mix` is the SplitMix64
//! finalizer. Each consumer owns its stream, so changing how often one
//! consumer draws never shifts another consumer's numbers.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// The RNG used for every stream in the simulator.
pub type Stream = ChaCha8Rng;

/// What a derived stream is used for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Purpose {
    Graph,
    Partition,
    Init,
    Noise,
    Batches,
    Protocol,
    Scheduler,
    TrainData,
    TestData,
}

impl Purpose {
    fn tag(self) -> u64 {
        match self {
            Purpose::Graph => 0x01,
            Purpose::Partition => 0x02,
            Purpose::Init => 0x03,
            Purpose::Noise => 0x04,
            Purpose::Batches => 0x05,
            Purpose::Protocol => 0x06,
            Purpose::Scheduler => 0x07,
            Purpose::TrainData => 0x08,
            Purpose::TestData => 0x09,
        }
    }
}

fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Child seed for `purpose`, distinguished further by `index` (agent id or 0).
pub fn child_seed(master: u64, purpose: Purpose, index: u64) -> u64 {
    mix(mix(master ^ purpose.tag().wrapping_mul(0xA24B_AED4_963E_E407)) ^ index)
}

pub fn stream(master: u64, purpose: Purpose, index: u64) -> Stream {
    Stream::seed_from_u64(child_seed(master, purpose, index))
}
