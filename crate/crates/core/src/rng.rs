//! Deterministic random streams.
//!
//! Every stream is a xoshiro256++ generator whose 256-bit state is filled by
//! splitmix64 from a 64-bit stream seed. Stream seeds are derived from the run
//! seed and a fixed stream index, so the disturbance sequence `w_t` and the
//! observation noise are independent of each other and of any other setting.
//!
//! Floats are produced from the top 53 bits of each output and normals use the
//! basic Box-Muller transform, so a trace can be reproduced from the algorithm
//! description alone.

use rand_core::{RngCore, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;

/// Substream carrying the process disturbance `w_t`.
pub const W_STREAM: u64 = 1;
/// Substream carrying the residual observation noise.
pub const OBS_STREAM: u64 = 2;

const GOLDEN_GAMMA: u64 = 0x9e37_79b9_7f4a_7c15;

/// One splitmix64 output for the given input state.
pub fn splitmix64(state: u64) -> u64 {
    let mut z = state.wrapping_add(GOLDEN_GAMMA);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed of substream `stream` under run seed `seed`.
pub fn stream_seed(seed: u64, stream: u64) -> u64 {
    splitmix64(seed ^ splitmix64(stream))
}

#[derive(Debug, Clone)]
pub struct StreamRng {
    inner: Xoshiro256PlusPlus,
}

impl StreamRng {
    pub fn from_seed_u64(seed: u64) -> Self {
        Self {
            inner: Xoshiro256PlusPlus::seed_from_u64(seed),
        }
    }

    /// The named substream of a run seed.
    pub fn substream(seed: u64, stream: u64) -> Self {
        Self::from_seed_u64(stream_seed(seed, stream))
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    /// Uniform in `[0, 1)` with 53 bits of resolution.
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform in `[lo, hi)`.
    pub fn uniform_range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    /// Standard normal via Box-Muller; one normal per two uniforms, the
    /// sine branch is discarded.
    pub fn standard_normal(&mut self) -> f64 {
        // 1 - U lies in (0, 1], so the log is finite.
        let u1 = 1.0 - self.uniform();
        let u2 = self.uniform();
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }
}
