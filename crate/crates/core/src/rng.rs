//! Seeded random streams.
//!
//! Every realization owns three independent ChaCha8 streams (gates,
//! measurement coins, measurement outcomes). Their keys are derived from
//! `(seed, realization)` by SplitMix64 mixing and the role selects the
//! ChaCha stream id, so draws never depend on scheduling and switching
//! measurements off leaves the gate stream untouched.

use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::linalg::ComplexMatrix;
use crate::scalar::Real;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum StreamRole {
    Gates = 0,
    MeasurementCoins = 1,
    MeasurementOutcomes = 2,
}

/// One round of SplitMix64.
#[inline]
pub fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Folds a sequence of words into one 64-bit key.
pub fn mix_seed(words: &[u64]) -> u64 {
    words
        .iter()
        .fold(0x6A09_E667_F3BC_C909, |acc, &w| splitmix64(acc ^ splitmix64(w)))
}

pub fn substream(seed: u64, realization: u64, role: StreamRole) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(&[seed, realization]));
    rng.set_stream(role as u64);
    rng
}

/// The three random streams driving one circuit realization.
#[derive(Clone, Debug)]
pub struct CircuitRng {
    pub gates: ChaCha8Rng,
    pub coins: ChaCha8Rng,
    pub outcomes: ChaCha8Rng,
}

impl CircuitRng {
    pub fn new(seed: u64, realization: u64) -> Self {
        Self {
            gates: substream(seed, realization, StreamRole::Gates),
            coins: substream(seed, realization, StreamRole::MeasurementCoins),
            outcomes: substream(seed, realization, StreamRole::MeasurementOutcomes),
        }
    }
}

/// Complex standard normal `(x + iy)/√2` with `E|z|² = 1`.
pub fn complex_normal<T: Real, R: Rng + ?Sized>(rng: &mut R) -> Complex<T> {
    let x: f64 = rng.sample(StandardNormal);
    let y: f64 = rng.sample(StandardNormal);
    let s = std::f64::consts::FRAC_1_SQRT_2;
    Complex::new(T::lit(x * s), T::lit(y * s))
}

/// `rows x cols` Ginibre matrix, entries drawn in row-major order.
pub fn ginibre<T: Real, R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> ComplexMatrix<T> {
    ComplexMatrix::from_fn(rows, cols, |_, _| complex_normal(rng))
}

/// Uniform draw in `[0, 1)`.
#[inline]
pub fn uniform01<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.random::<f64>()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn streams_are_reproducible() {
        let mut a = CircuitRng::new(7, 3);
        let mut b = CircuitRng::new(7, 3);
        for _ in 0..16 {
            assert_eq!(a.gates.random::<u64>(), b.gates.random::<u64>());
            assert_eq!(a.outcomes.random::<u64>(), b.outcomes.random::<u64>());
        }
    }

    #[test]
    fn roles_and_realizations_differ() {
        let g = substream(1, 0, StreamRole::Gates).random::<u64>();
        let c = substream(1, 0, StreamRole::MeasurementCoins).random::<u64>();
        let r1 = substream(1, 1, StreamRole::Gates).random::<u64>();
        assert_ne!(g, c);
        assert_ne!(g, r1);
    }

    #[test]
    fn drawing_coins_leaves_gates_untouched() {
        let mut a = CircuitRng::new(11, 0);
        let mut b = CircuitRng::new(11, 0);
        for _ in 0..100 {
            let _: f64 = b.coins.random();
        }
        assert_eq!(a.gates.random::<u64>(), b.gates.random::<u64>());
    }

    #[test]
    fn complex_normal_has_unit_second_moment() {
        let mut rng = substream(5, 0, StreamRole::Gates);
        let n = 20_000;
        let m2: f64 = (0..n)
            .map(|_| complex_normal::<f64, _>(&mut rng).norm_sqr())
            .sum::<f64>()
            / n as f64;
        assert!((m2 - 1.0).abs() < 5.0 / (n as f64).sqrt());
    }
}
