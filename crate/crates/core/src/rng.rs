// SPDX-License-Identifier: Apache-2.0

//! Seeded random streams.
//!
//! Every random draw in the crate comes from a single master seed. A consumer
//! asks for a stream by [`Purpose`] and an index (sample number, epoch, ...);
//! the stream seed is a SplitMix64 mix of `(master, purpose, index)` and the
//! generator is Xoshiro256++. Streams for different purposes never share
//! state, so turning one source of randomness on or off (e.g. feedback noise)
//! leaves every other stream untouched.

use rand::{Rng as _, SeedableRng};
use rand_distr::StandardNormal;
use rand_xoshiro::Xoshiro256PlusPlus;

pub type Rng = Xoshiro256PlusPlus;

/// What a random stream is used for.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Purpose {
    Dataset,
    Init,
    Epsilon,
    ChannelNoise,
    Shuffle,
    Dropout,
}

impl Purpose {
    fn tag(self) -> u64 {
        match self {
            Purpose::Dataset => 0x6461_7461,
            Purpose::Init => 0x696e_6974,
            Purpose::Epsilon => 0x6570_7369,
            Purpose::ChannelNoise => 0x6e6f_6973,
            Purpose::Shuffle => 0x7368_7566,
            Purpose::Dropout => 0x6472_6f70,
        }
    }
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// Derive the independent stream for `(master, purpose, index)`.
pub fn stream(master: u64, purpose: Purpose, index: u64) -> Rng {
    let seed = splitmix64(splitmix64(master ^ splitmix64(purpose.tag())) ^ index);
    Rng::seed_from_u64(seed)
}

pub fn normal(rng: &mut Rng) -> f32 {
    rng.sample::<f32, _>(StandardNormal)
}

pub fn normal_f64(rng: &mut Rng) -> f64 {
    rng.sample::<f64, _>(StandardNormal)
}

pub fn uniform(rng: &mut Rng, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * rng.random::<f64>()
}
