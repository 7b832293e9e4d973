//! Deterministic random streams.
//!
//! Every stochastic operation in the crate draws from [`SimRng`], the ChaCha
//! stream cipher with 8 rounds (`rand_chacha::ChaCha8Rng`), keyed through
//! `seed_from_u64`. ChaCha is counter based, so its output is identical on
//! every platform and word size. Independent parts of one simulation use
//! distinct ChaCha stream ids: turning one noise source on or off never
//! shifts the samples drawn for another.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

/// Stream ids reserved by the simulators.
pub mod streams {
    pub const QUANTUM: u64 = 1;
    pub const ELECTRICAL: u64 = 2;
    pub const SPUR: u64 = 3;
    pub const TOEPLITZ_SEED: u64 = 4;
    pub const DATA_DRIVE: u64 = 5;
    pub const LINK_BITS: u64 = 6;
    pub const LINK_NOISE: u64 = 7;
    pub const LINK_PHASE: u64 = 8;
    pub const REFERENCE: u64 = 9;
    /// Side channel `i` uses `SIDE_CHANNEL_BASE + i`.
    pub const SIDE_CHANNEL_BASE: u64 = 64;
    /// Polarization `p` of a link uses `POLARIZATION_BASE * (p + 1)` added to the link streams.
    pub const POLARIZATION_BASE: u64 = 1 << 16;
}

pub fn stream(seed: u64, stream: u64) -> SimRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Derives a sub-seed from a parent seed and a label (SplitMix64 finalizer
/// over an FNV-1a hash of the label).
pub fn derive_seed(seed: u64, label: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in label.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    let mut z = seed ^ h;
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
