//! Direct Monte Carlo of GKP shift rounding.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

/// Fraction of `N(0, variance)` shifts whose nearest multiple of `sqrt(pi)`
/// is odd, with its standard error.
pub fn flip_rate(variance: f64, samples: u64, seed: u64) -> (f64, f64) {
    let normal = Normal::new(0.0, variance.sqrt()).expect("finite variance");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let spacing = std::f64::consts::PI.sqrt();
    let flips = (0..samples)
        .filter(|_| {
            let k = (normal.sample(&mut rng) / spacing).round() as i64;
            k.rem_euclid(2) == 1
        })
        .count() as f64;
    let n = samples as f64;
    let p = flips / n;
    (p, (p * (1.0 - p) / n).sqrt())
}
