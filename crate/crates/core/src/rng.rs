//! Counter-style random streams.
//!
//! Every random quantity is drawn from a ChaCha8 stream addressed by
//! `(seed, stream id)`; the seed itself is derived from the master seed and a
//! purpose tag. A trajectory therefore sees the same numbers no matter which
//! thread runs it or in which order.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

use crate::geometry::P3;
use crate::math::{cos, sin, sqrt, PI};

pub const TAG_HARMONIC: u64 = 0x6861_726d;
pub const TAG_GREEN: u64 = 0x6772_6565;
pub const TAG_AUDIT: u64 = 0x6175_6469;

/// SplitMix64 finalizer applied to a combination of two words.
pub fn mix(a: u64, b: u64) -> u64 {
    let mut z = a ^ b.wrapping_mul(0x9E37_79B9_7F4A_7C15).rotate_left(17);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed for one batch of streams: master seed, purpose tag and a batch index
/// (probe number, quadrature node, ...).
pub fn derive_seed(master: u64, tag: u64, index: u64) -> u64 {
    mix(mix(master, tag), index)
}

pub struct Stream(ChaCha8Rng);

impl Stream {
    pub fn new(seed: u64, id: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(id);
        Stream(rng)
    }

    /// Uniform in [0, 1) with 53 random bits.
    #[inline]
    pub fn uniform(&mut self) -> f64 {
        (self.0.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform direction on the unit sphere of R^3 (Archimedes' projection).
    #[inline]
    pub fn unit_vector(&mut self) -> P3 {
        let z = 2.0 * self.uniform() - 1.0;
        let phi = 2.0 * PI * self.uniform();
        let s = sqrt((1.0 - z * z).max(0.0));
        P3::new([s * cos(phi), s * sin(phi), z])
    }
}
