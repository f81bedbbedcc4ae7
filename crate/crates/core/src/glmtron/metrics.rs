use crate::dynsys::{LinkFunction, Trajectory, WeightMatrix};
use crate::error::{invalid, Result};

/// In-sample prediction error `(1/n) Σ ‖σ(Θ_a x_i) − σ(Θ_b x_i)‖²`.
pub fn prediction_error(
    theta_a: &WeightMatrix,
    theta_b: &WeightMatrix,
    traj: &Trajectory,
    link: &LinkFunction,
) -> Result<f64> {
    let d = traj.dim();
    if theta_a.dim() != d || theta_b.dim() != d {
        return Err(invalid("matrix and trajectory dimensions differ"));
    }
    let mut a = vec![0.0; d];
    let mut b = vec![0.0; d];
    let mut total = 0.0;
    for i in 1..=traj.n() {
        let x = traj.state(i);
        theta_a.apply_into(x, &mut a);
        theta_b.apply_into(x, &mut b);
        link.apply_in_place(&mut a);
        link.apply_in_place(&mut b);
        total += a.iter().zip(&b).map(|(p, q)| (p - q) * (p - q)).sum::<f64>();
    }
    Ok(total / traj.n() as f64)
}

/// `‖Θ̂ − Θ*‖²_F`.
pub fn parameter_error(theta_hat: &WeightMatrix, theta_star: &WeightMatrix) -> Result<f64> {
    if theta_hat.dim() != theta_star.dim() {
        return Err(invalid("matrix dimensions differ"));
    }
    Ok((theta_hat.as_matrix() - theta_star.as_matrix()).norm_squared())
}
