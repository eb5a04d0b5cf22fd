//! Seeded random streams.
//!
//! Every random quantity comes from a ChaCha8 generator. ChaCha is a
//! counter-based cipher, so its output depends only on `(seed, stream,
//! position)` and is identical on every platform. Experiments split a master
//! seed into independent streams keyed by trial index and purpose.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// What a derived stream is used for.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Purpose {
    Matrix = 0,
    Signal = 1,
    Noise = 2,
    Sampler = 3,
}

const PURPOSES: u64 = 8;

/// Generator seeded from a single `u64`.
pub fn from_seed(seed: u64) -> StreamRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Independent stream for `(master_seed, trial, purpose)`.
pub fn substream(master_seed: u64, trial: u64, purpose: Purpose) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(trial.wrapping_mul(PURPOSES).wrapping_add(purpose as u64));
    rng
}

/// A `u64` seed drawn from [`substream`], for APIs that take plain seeds.
pub fn derive_seed(master_seed: u64, trial: u64, purpose: Purpose) -> u64 {
    substream(master_seed, trial, purpose).random()
}

/// Uniform on `(0, 1]`.
fn open_unit<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    1.0 - rng.random::<f64>()
}

/// Standard normal variates by the Box–Muller transform, caching the
/// second variate of each pair.
#[derive(Debug, Clone, Default)]
pub struct Gaussian {
    spare: Option<f64>,
}

impl Gaussian {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn sample<R: Rng + ?Sized>(&mut self, rng: &mut R) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        let r = (-2.0 * open_unit(rng).ln()).sqrt();
        let theta = std::f64::consts::TAU * rng.random::<f64>();
        let (s, c) = theta.sin_cos();
        self.spare = Some(r * s);
        r * c
    }

    pub fn fill<R: Rng + ?Sized>(&mut self, rng: &mut R, out: &mut [f64]) {
        for v in out {
            *v = self.sample(rng);
        }
    }
}
