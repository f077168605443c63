//! Deterministic, splittable random number streams and the variate
//! generators the sampler stack is built on.
//!
//! A [`RngStream`] is keyed by `(seed, path)`. Splitting derives a child
//! path with a 64-bit mix, so replicate `i` of an experiment always sees
//! the same stream no matter how work is scheduled across threads.

use rand_chacha::ChaCha12Rng;
use rand_core::{RngCore, SeedableRng};

use crate::error::{Error, Result};

#[inline]
fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seeded random stream with deterministic sub-stream splitting.
#[derive(Debug, Clone)]
pub struct RngStream {
    seed: u64,
    path: u64,
    rng: ChaCha12Rng,
    normal_spare: Option<f64>,
}

impl RngStream {
    pub fn new(seed: u64) -> Self {
        Self::with_path(seed, 0)
    }

    fn with_path(seed: u64, path: u64) -> Self {
        let mut key = [0u8; 32];
        let mut s = seed ^ 0xA076_1D64_78BD_642F;
        let mut t = path ^ 0xE703_7ED1_A0B4_28DB;
        for chunk in key.chunks_exact_mut(8) {
            let w = splitmix64(&mut s) ^ splitmix64(&mut t);
            chunk.copy_from_slice(&w.to_le_bytes());
        }
        RngStream { seed, path, rng: ChaCha12Rng::from_seed(key), normal_spare: None }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Derive the `index`-th independent sub-stream. Children of distinct
    /// indices (and of distinct parents) never overlap.
    pub fn split(&self, index: u64) -> RngStream {
        let mut s = self.path ^ index.wrapping_mul(0xD6E8_FEB8_6659_FD93);
        let child = splitmix64(&mut s) ^ index.rotate_left(17);
        Self::with_path(self.seed, child)
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    /// Uniform in [0, 1) with 53-bit resolution.
    #[inline]
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / 9_007_199_254_740_992.0)
    }

    /// Uniform in (0, 1), never exactly zero.
    #[inline]
    pub fn uniform_open(&mut self) -> f64 {
        loop {
            let u = self.uniform();
            if u > 0.0 {
                return u;
            }
        }
    }

    /// Standard normal via Box-Muller (second variate cached).
    pub fn normal(&mut self) -> f64 {
        if let Some(z) = self.normal_spare.take() {
            return z;
        }
        let u1 = self.uniform_open();
        let u2 = self.uniform();
        let rad = (-2.0 * u1.ln()).sqrt();
        let ang = std::f64::consts::TAU * u2;
        self.normal_spare = Some(rad * ang.sin());
        rad * ang.cos()
    }

    /// Two-point variate: `hi` with probability `p_hi`, else `lo`.
    pub fn two_point(&mut self, p_hi: f64, hi: f64, lo: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&p_hi) {
            return Err(Error::domain("sample_two_point", format!("p_hi must be in [0,1], got {p_hi}")));
        }
        Ok(if self.uniform() < p_hi { hi } else { lo })
    }

    /// Gamma(shape, rate) via Marsaglia-Tsang squeeze/rejection; the
    /// shape < 1 case is boosted through Gamma(shape + 1).
    pub fn gamma(&mut self, shape: f64, rate: f64) -> Result<f64> {
        if !(shape > 0.0) || !(rate > 0.0) {
            return Err(Error::domain("sample_gamma", format!("shape and rate must be positive, got ({shape}, {rate})")));
        }
        Ok(self.gamma_unchecked(shape) / rate)
    }

    pub(crate) fn gamma_unchecked(&mut self, shape: f64) -> f64 {
        if shape < 1.0 {
            let g = self.gamma_unchecked(shape + 1.0);
            let u = self.uniform_open();
            return g * u.powf(1.0 / shape);
        }
        let d = shape - 1.0 / 3.0;
        let c = 1.0 / (9.0 * d).sqrt();
        loop {
            let x = self.normal();
            let t = 1.0 + c * x;
            if t <= 0.0 {
                continue;
            }
            let v = t * t * t;
            let u = self.uniform_open();
            let x2 = x * x;
            // squeeze test, then full acceptance test
            if u < 1.0 - 0.0331 * x2 * x2 {
                return d * v;
            }
            if u.ln() < 0.5 * x2 + d * (1.0 - v + v.ln()) {
                return d * v;
            }
        }
    }

    /// Inverse gamma: 1 / Gamma(shape, rate).
    pub fn inverse_gamma(&mut self, shape: f64, rate: f64) -> Result<f64> {
        Ok(1.0 / self.gamma(shape, rate)?)
    }
}
