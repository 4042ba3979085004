//! Seeded pseudo-random streams for the simulator.
//!
//! The generator is xoshiro256++ seeded through splitmix64. Independent
//! streams are derived from a master seed and a path of integer ids
//! (dataset, subject, trial, ...):
//!
//! ```text
//! s₀ = master
//! sₖ = splitmix64(sₖ₋₁ ⊕ splitmix64(idₖ + 0x9E3779B97F4A7C15))
//! ```
//!
//! Uniforms take the top 53 bits of each output; normals use the cosine
//! branch of Box–Muller, one output per two uniforms.

use rand_core::{RngCore, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

#[inline]
pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives the seed of a sub-stream from a master seed and an id path.
pub fn derive_seed(master: u64, path: &[u64]) -> u64 {
    path.iter()
        .fold(master, |s, &id| splitmix64(s ^ splitmix64(id.wrapping_add(GOLDEN))))
}

#[derive(Debug, Clone)]
pub struct SimRng(Xoshiro256PlusPlus);

impl SimRng {
    pub fn seed_from(seed: u64) -> Self {
        Self(Xoshiro256PlusPlus::seed_from_u64(seed))
    }

    pub fn stream(master: u64, path: &[u64]) -> Self {
        Self::seed_from(derive_seed(master, path))
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        self.0.next_u64()
    }

    /// Uniform in `[0, 1)`.
    #[inline]
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Standard normal.
    pub fn normal(&mut self) -> f64 {
        let u1 = 1.0 - self.uniform();
        let u2 = self.uniform();
        libm::sqrt(-2.0 * libm::log(u1)) * libm::cos(2.0 * core::f64::consts::PI * u2)
    }

    /// Fisher–Yates shuffle.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = ((self.uniform() * (i + 1) as f64) as usize).min(i);
            items.swap(i, j);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn splitmix_reference_values() {
        // First outputs of the reference splitmix64 sequence seeded with 0.
        assert_eq!(splitmix64(0), 0xE220_A839_7B1D_CDAF);
        assert_eq!(splitmix64(GOLDEN), 0x6E78_9E6A_A1B9_65F4);
    }

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let a: alloc::vec::Vec<u64> = {
            let mut r = SimRng::stream(42, &[1, 2]);
            (0..4).map(|_| r.next_u64()).collect()
        };
        let mut r = SimRng::stream(42, &[1, 2]);
        for v in &a {
            assert_eq!(*v, r.next_u64());
        }
        let mut other = SimRng::stream(42, &[2, 1]);
        assert_ne!(a[0], other.next_u64());
    }

    #[test]
    fn normal_moments() {
        let mut r = SimRng::seed_from(7);
        let n = 200_000;
        let xs: alloc::vec::Vec<f64> = (0..n).map(|_| r.normal()).collect();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n as f64;
        assert!(mean.abs() < 0.01);
        assert!((var - 1.0).abs() < 0.01);
    }
}
