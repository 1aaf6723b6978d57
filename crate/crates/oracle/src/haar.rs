//! Moment estimates for the two-qubit Haar sampler.

use mbqv_core::sim::haar_su4;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Sample mean and standard error of `|tr U|^2`; Haar measure gives 1.
pub fn trace_moment(samples: usize, seed: u64) -> (f64, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let xs: Vec<f64> = (0..samples).map(|_| haar_su4(&mut rng).trace().norm_sqr()).collect();
    let n = samples as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}
