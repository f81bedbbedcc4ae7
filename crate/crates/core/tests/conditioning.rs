mod common;

use glsysid::conditioning::{cross_term_report, empirical_covariance, empirical_cross_covariance, isometry_report};
use glsysid::dynsys::{simulate, simulate_stream, NoiseKind, NoiseModel};
use glsysid::linalg;
use glsysid::stability::find_certificate;
use glsysid::{LinkFunction, WeightMatrix};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn covariance_is_symmetric_psd(d in 1usize..=5, n in 3usize..200, s in 0.0f64..0.95, seed in any::<u64>()) {
        let mut r = common::rng_for("cov-prop", seed);
        let theta = common::spectral_theta(&mut r, d, s.max(1e-3));
        let traj = simulate(&theta, &LinkFunction::Relu, &NoiseModel::gaussian(d).unwrap(), n, seed).unwrap();
        let cov = empirical_covariance(&traj);
        prop_assert_eq!(&cov, &cov.transpose());
        let eig = linalg::symmetric_eigenvalues(&cov);
        let scale = cov.trace().max(1.0);
        prop_assert!(eig.iter().all(|&l| l >= -1e-12 * scale));
    }
}

#[test]
fn covariance_matches_direct_sum() {
    let theta = WeightMatrix::scaled_identity(2, 0.5);
    let traj = simulate(&theta, &LinkFunction::Identity, &NoiseModel::gaussian(2).unwrap(), 50, 3).unwrap();
    let mut cov = nalgebra::DMatrix::<f64>::zeros(2, 2);
    let mut cross = nalgebra::DMatrix::<f64>::zeros(2, 2);
    for i in 1..=50 {
        let x = nalgebra::DVector::from_column_slice(traj.state(i));
        let y = nalgebra::DVector::from_column_slice(traj.state(i + 1));
        cov += &x * x.transpose();
        cross += &y * x.transpose();
    }
    cov /= 50.0;
    cross /= 50.0;
    assert!((empirical_covariance(&traj) - cov).abs().max() < 1e-12);
    assert!((empirical_cross_covariance(&traj) - cross).abs().max() < 1e-12);
}

/// Θ = 0 gives i.i.d. Gaussian states; n = 64d is enough for λ_min ≥ 1/4.
#[test]
fn iid_baseline_lower_isometry() {
    let d = 4;
    let theta = WeightMatrix::zeros(d);
    let cert = find_certificate(&theta).unwrap().unwrap();
    let noise = NoiseModel::gaussian(d).unwrap();
    let ok = (0..100)
        .filter(|&t| {
            let traj = simulate_stream(&theta, &LinkFunction::Identity, &noise, 64 * d, 17, t).unwrap();
            isometry_report(&traj, &cert).unwrap().lower_ok
        })
        .count();
    assert!(ok >= 95, "{ok}/100");
}

#[test]
fn zero_noise_cross_term_vanishes() {
    let theta = WeightMatrix::scaled_identity(3, 0.5);
    let cert = find_certificate(&theta).unwrap().unwrap();
    let traj = simulate(&theta, &LinkFunction::Relu, &NoiseModel::new(NoiseKind::Zero, 3).unwrap(), 20, 0).unwrap();
    let rep = cross_term_report(&traj, &theta, &LinkFunction::Relu, &cert, 0.0, 0.05).unwrap();
    assert_eq!(rep.cross_norm, 0.0);
    assert_eq!(rep.mu_bound, 0.0);
}

#[test]
fn cross_term_shrinks_with_n() {
    let mut r = common::rng_for("cross-shrink", 0);
    let theta = common::spectral_theta(&mut r, 3, 0.6);
    let cert = find_certificate(&theta).unwrap().unwrap();
    let noise = NoiseModel::gaussian(3).unwrap();
    let link = LinkFunction::leaky_relu(0.5).unwrap();
    let median = |n: usize| {
        let vals: Vec<f64> = (0..30)
            .map(|t| {
                let traj = simulate_stream(&theta, &link, &noise, n, 1, t).unwrap();
                cross_term_report(&traj, &theta, &link, &cert, 1.0, 0.05).unwrap().cross_norm
            })
            .collect();
        linalg::median(&vals)
    };
    let (small, large) = (median(256), median(16384));
    // expected ratio 8 for n^{-1/2}
    assert!(small / large > 5.0 && small / large < 12.0, "{small} / {large}");
}
