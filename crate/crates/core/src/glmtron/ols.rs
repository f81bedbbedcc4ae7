use nalgebra::DMatrix;

use crate::conditioning::{covariance_condition_number, empirical_covariance, empirical_cross_covariance};
use crate::dynsys::{Trajectory, WeightMatrix};
use crate::error::{Error, Result};

/// Condition numbers above this are treated as singular.
const MAX_CONDITION: f64 = 1e12;

/// Ordinary least squares over linear maps:
/// `Θ̂ = (Σ x_{i+1} x_iᵀ)(Σ x_i x_iᵀ)^{-1}`.
pub fn ols_fit(traj: &Trajectory) -> Result<WeightMatrix> {
    let cond = covariance_condition_number(traj);
    if !(cond.is_finite() && cond < MAX_CONDITION) {
        return Err(Error::RankDeficient { condition_number: cond });
    }
    let cov = empirical_covariance(traj);
    let cross = empirical_cross_covariance(traj);
    // Θ̂ Σ = C  <=>  Σ Θ̂ᵀ = Cᵀ
    let chol = cov.cholesky().ok_or(Error::RankDeficient { condition_number: cond })?;
    let theta_t: DMatrix<f64> = chol.solve(&cross.transpose());
    WeightMatrix::new(theta_t.transpose())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynsys::{simulate, LinkFunction, NoiseModel};

    #[test]
    fn all_zero_trajectory_is_rank_deficient() {
        let t = simulate(
            &WeightMatrix::scaled_identity(2, 0.5),
            &LinkFunction::Identity,
            &NoiseModel::zero(2).unwrap(),
            20,
            0,
        )
        .unwrap();
        assert!(matches!(ols_fit(&t), Err(Error::RankDeficient { .. })));
    }

    #[test]
    fn recovers_linear_system() {
        let theta = WeightMatrix::from_rows(&[vec![0.5, 0.1], vec![-0.2, 0.3]]).unwrap();
        let t = simulate(&theta, &LinkFunction::Identity, &NoiseModel::gaussian(2).unwrap(), 20_000, 8).unwrap();
        let est = ols_fit(&t).unwrap();
        assert!((est.as_matrix() - theta.as_matrix()).norm() < 0.05);
    }
}
