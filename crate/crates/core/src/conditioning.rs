//! Empirical covariance diagnostics.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::dynsys::{LinkFunction, Trajectory, WeightMatrix};
use crate::error::{invalid, Result};
use crate::linalg;
use crate::stability::LyapunovCertificate;

/// Default failure probability used for reference bounds.
pub const DEFAULT_DELTA: f64 = 0.05;

/// `(1/n) Σ_{i=1}^{n} x_i x_iᵀ`.
pub fn empirical_covariance(traj: &Trajectory) -> DMatrix<f64> {
    let d = traj.dim();
    let mut acc = vec![0.0; d * d];
    for i in 1..=traj.n() {
        let x = traj.state(i);
        for (r, &xr) in x.iter().enumerate() {
            if xr == 0.0 {
                continue;
            }
            let row = &mut acc[r * d..(r + 1) * d];
            for (a, &xc) in row.iter_mut().zip(x) {
                *a += xr * xc;
            }
        }
    }
    let n = traj.n() as f64;
    let m = DMatrix::from_row_slice(d, d, &acc) / n;
    linalg::symmetrize(&m)
}

/// `(1/n) Σ_{i=1}^{n} x_{i+1} x_iᵀ`.
pub fn empirical_cross_covariance(traj: &Trajectory) -> DMatrix<f64> {
    let d = traj.dim();
    let mut acc = DMatrix::zeros(d, d);
    for (x, y) in traj.transitions() {
        for r in 0..d {
            for c in 0..d {
                acc[(r, c)] += y[r] * x[c];
            }
        }
    }
    acc / traj.n() as f64
}

/// Ratio of extreme eigenvalues of the empirical covariance.
pub fn covariance_condition_number(traj: &Trajectory) -> f64 {
    let (lo, hi) = linalg::eigen_extremes(&empirical_covariance(traj));
    if lo <= 0.0 {
        f64::INFINITY
    } else {
        hi / lo
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct IsometryReport {
    pub lambda_min: f64,
    pub lambda_max: f64,
    /// `λ_min ≥ 1/4`.
    pub lower_ok: bool,
    /// `λ_max ≤ 4R`.
    pub upper_ok: bool,
    pub n: usize,
    pub effective_radius: f64,
}

pub fn isometry_report(traj: &Trajectory, cert: &LyapunovCertificate) -> Result<IsometryReport> {
    if cert.dim() != traj.dim() {
        return Err(invalid("certificate and trajectory dimensions differ"));
    }
    let (lo, hi) = linalg::eigen_extremes(&empirical_covariance(traj));
    // clamp rounding noise on PSD matrices
    let lambda_min = lo.max(0.0);
    let lambda_max = hi.max(lambda_min);
    let r = cert.effective_radius();
    Ok(IsometryReport {
        lambda_min,
        lambda_max,
        lower_ok: lambda_min >= 0.25,
        upper_ok: lambda_max <= 4.0 * r,
        n: traj.n(),
        effective_radius: r,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct CrossTermReport {
    /// `‖(1/n) Σ x_i ε_iᵀ‖_F`.
    pub cross_norm: f64,
    /// Reference scale `τ √(d tr(K) / (n(1-ρ)) · log(4tr(K)/(δ(1-ρ)) + 1))`
    /// with unit constant.
    pub mu_bound: f64,
    pub trace_cov: f64,
    /// `4 tr(K)/(1-ρ)`.
    pub b_bound: f64,
}

impl CrossTermReport {
    pub fn ratio(&self) -> f64 {
        if self.mu_bound > 0.0 {
            self.cross_norm / self.mu_bound
        } else {
            f64::NAN
        }
    }
}

/// Reference value `μ` with unit constant.
pub fn mu_reference(d: usize, n: usize, cert: &LyapunovCertificate, tau: f64, delta: f64) -> f64 {
    let tr = cert.trace();
    let gap = 1.0 - cert.rho();
    let log_term = (4.0 * tr / (delta * gap) + 1.0).ln();
    tau * (d as f64 * tr / (n as f64 * gap) * log_term).sqrt()
}

/// Recovers `ε_i = x_{i+1} − σ(Θ* x_i)` and reports the cross-term norm
/// alongside its reference scales. The caller must pass the true
/// generator; a wrong one is not detected.
pub fn cross_term_report(
    traj: &Trajectory,
    theta_star: &WeightMatrix,
    link: &LinkFunction,
    cert: &LyapunovCertificate,
    tau: f64,
    delta: f64,
) -> Result<CrossTermReport> {
    let d = traj.dim();
    if theta_star.dim() != d || cert.dim() != d {
        return Err(invalid("theta, certificate and trajectory dimensions differ"));
    }
    if !(delta > 0.0 && delta < 1.0) || !(tau >= 0.0) {
        return Err(invalid("need tau >= 0 and delta in (0, 1)"));
    }
    let mut cross = DMatrix::<f64>::zeros(d, d);
    let mut pred = vec![0.0; d];
    for (x, y) in traj.transitions() {
        theta_star.apply_into(x, &mut pred);
        link.apply_in_place(&mut pred);
        for r in 0..d {
            for c in 0..d {
                cross[(r, c)] += x[r] * (y[c] - pred[c]);
            }
        }
    }
    let n = traj.n();
    let cross_norm = cross.norm() / n as f64;
    let trace_cov = empirical_covariance(traj).trace();
    Ok(CrossTermReport {
        cross_norm,
        mu_bound: mu_reference(d, n, cert, tau, delta),
        trace_cov,
        b_bound: 4.0 * cert.trace() / (1.0 - cert.rho()),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynsys::{simulate, NoiseModel};

    #[test]
    fn zero_trajectory_has_zero_covariance() {
        let t = Trajectory::from_states(&vec![vec![0.0; 3]; 6], 0).unwrap();
        assert!(empirical_covariance(&t).iter().all(|v| *v == 0.0));
        let cert = LyapunovCertificate::identity(3, 0.0).unwrap();
        let r = isometry_report(&t, &cert).unwrap();
        assert!(!r.lower_ok);
        assert!(r.upper_ok);
    }

    #[test]
    fn single_state_outer_product() {
        let t = Trajectory::from_states(&[vec![0.0, 0.0], vec![1.0, 0.0], vec![5.0, 5.0]], 0).unwrap();
        let c = empirical_covariance(&t);
        assert_eq!(c, DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]));
    }

    #[test]
    fn iid_covariance_is_near_identity() {
        let n = 10_000;
        let t = simulate(&WeightMatrix::zeros(3), &LinkFunction::Identity, &NoiseModel::gaussian(3).unwrap(), n, 4)
            .unwrap();
        let c = empirical_covariance(&t);
        let tol = 5.0 / (n as f64).sqrt();
        for i in 0..3 {
            for j in 0..3 {
                let target = if i == j { 1.0 } else { 0.0 };
                assert!((c[(i, j)] - target).abs() < tol);
            }
        }
    }

    #[test]
    fn zero_noise_cross_term_vanishes() {
        let theta = WeightMatrix::scaled_identity(2, 0.5);
        let t = simulate(&theta, &LinkFunction::Relu, &NoiseModel::zero(2).unwrap(), 50, 0).unwrap();
        let cert = LyapunovCertificate::identity(2, 0.25).unwrap();
        let r = cross_term_report(&t, &theta, &LinkFunction::Relu, &cert, 1.0, DEFAULT_DELTA).unwrap();
        assert_eq!(r.cross_norm, 0.0);
        assert_eq!(r.b_bound, 4.0 * 2.0 / 0.75);
    }

    #[test]
    fn mu_reference_formula() {
        let cert = LyapunovCertificate::identity(4, 0.25).unwrap();
        let mu = mu_reference(4, 100, &cert, 1.0, 0.05);
        let expected = (4.0 * 4.0 / (100.0 * 0.75) * (16.0 / (0.05 * 0.75) + 1.0f64).ln()).sqrt();
        assert!((mu - expected).abs() < 1e-14);
    }
}
