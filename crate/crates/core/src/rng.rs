//! Seed derivation for independent, reproducible random sub-streams.
//!
//! Every stochastic component (particle initialisation, per-step noise,
//! resampling, annealing per candidate) draws from its own stream derived
//! from a master seed and a path of tags, so results do not depend on
//! evaluation order or thread scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

/// Stream tags used by the simulator.
pub mod tag {
    pub const TRAJECTORY: u64 = 0x7261_6a00;
    pub const INIT: u64 = 0x696e_6974;
    pub const NOISE: u64 = 0x6e6f_6973;
    pub const RESAMPLE: u64 = 0x7265_736d;
    pub const POLICY: u64 = 0x706f_6c69;
    pub const MSE: u64 = 0x6d73_6500;
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Hash a master seed and a tag path into a child seed.
pub fn derive_seed(master: u64, path: &[u64]) -> u64 {
    path.iter()
        .fold(splitmix64(master), |acc, &t| splitmix64(acc ^ splitmix64(t)))
}

/// A generator for the sub-stream identified by `path`.
pub fn substream(master: u64, path: &[u64]) -> SimRng {
    SimRng::seed_from_u64(derive_seed(master, path))
}
