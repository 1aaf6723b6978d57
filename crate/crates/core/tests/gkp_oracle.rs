use mbqv_core::gkp::{
    cluster_noise, effective_channel_gkp, flip_probability, infidelity_vs_squeezing, ChannelMode,
    CzMode, GkpNoiseParams,
};
use mbqv_core::mbqc::{standard_pattern, Gate};
use mbqv_oracle::rounding::flip_rate;

#[test]
fn flip_probability_matches_rounding() {
    for (i, sigma) in [0.1f64, 0.2, 0.4, 0.8].into_iter().enumerate() {
        let ours = flip_probability(sigma * sigma).unwrap();
        let (mc, se) = flip_rate(sigma * sigma, 1_000_000, i as u64);
        let se = se.max((ours * (1.0 - ours) / 1e6).sqrt());
        assert!((ours - mc).abs() <= 3.0 * se, "sigma={sigma}: {ours} vs {mc} +- {se}");
    }
}

#[test]
fn sampled_mode_is_reproducible_and_near_analytic() {
    // CZs correlate neighbouring shifts, so the modes differ at the percent level
    let analytic = GkpNoiseParams::new(10.0, 0.97).unwrap();
    let sampled = GkpNoiseParams { mode: ChannelMode::Sampled { samples: 200_000, seed: 3 }, ..analytic };
    let pattern = standard_pattern(Gate::Hadamard).unwrap();
    let a = effective_channel_gkp(&pattern, &analytic).unwrap();
    let s = effective_channel_gkp(&pattern, &sampled).unwrap();
    assert_eq!(s, effective_channel_gkp(&pattern, &sampled).unwrap());
    let rel = (s.error_mass() - a.error_mass()).abs() / a.error_mass();
    assert!(rel < 0.2, "{} vs {}", s.error_mass(), a.error_mass());
}

#[test]
fn cz_noise_keeps_covariance_physical() {
    for g in [Gate::Hadamard, Gate::Cnot, Gate::Cz] {
        let p = GkpNoiseParams::new(12.0, 0.9).unwrap().with_cz_db(12.0).unwrap();
        let cov = cluster_noise(&standard_pattern(g).unwrap(), &p).unwrap();
        assert!(cov.min_eigenvalue() >= -1e-10, "{g}");
    }
}

#[test]
fn infidelity_falls_with_squeezing_without_loss() {
    let base = GkpNoiseParams::new(20.0, 1.0).unwrap();
    let curve = infidelity_vs_squeezing(Gate::Hadamard, &base, &[10.0, 14.0, 18.0, 22.0], CzMode::Off).unwrap();
    assert!(curve.windows(2).all(|w| w[1].1 < w[0].1), "{curve:?}");
}
