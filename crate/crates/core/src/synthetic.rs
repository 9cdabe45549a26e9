//! Seeded synthetic series for experiments and self-checks.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::Result;
use crate::series::PriceSeries;

/// `len` independent normal draws with standard deviation `std`.
pub fn white_noise(len: usize, std: f64, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..len)
        .map(|_| {
            let z: f64 = StandardNormal.sample(&mut rng);
            std * z
        })
        .collect()
}

/// `level + amplitude * sin(2 pi i / period) + noise`.
pub fn noisy_sinusoid(
    len: usize,
    period: f64,
    amplitude: f64,
    noise_std: f64,
    level: f64,
    seed: u64,
) -> Result<PriceSeries> {
    let noise = white_noise(len, noise_std, seed);
    let values = noise
        .iter()
        .enumerate()
        .map(|(i, e)| level + amplitude * (std::f64::consts::TAU * i as f64 / period).sin() + e)
        .collect();
    PriceSeries::new(format!("sinusoid-{seed}"), values)
}
