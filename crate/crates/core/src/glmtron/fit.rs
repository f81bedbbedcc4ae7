use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::metrics::{parameter_error, prediction_error};
use super::schedule::practical_step;
use crate::conditioning::{empirical_covariance, empirical_cross_covariance};
use crate::dynsys::{LinkFunction, Trajectory, WeightMatrix};
use crate::error::{invalid, Error, Result};
use crate::linalg;
use crate::rng;

/// Pseudogradient norm below which the opt-in early exit fires.
pub const EARLY_STOP_THRESHOLD: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum StepSize {
    Constant(f64),
    /// `1/(4 · max(λ_max(Σ̂), 1))`, computed from the trajectory.
    Practical,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReturnOption {
    LastIterate,
    UniformRandom,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GlmtronConfig {
    /// Radius `W` of the Frobenius ball the iterates are projected onto.
    pub w_bound: f64,
    pub step: StepSize,
    pub iterations: usize,
    pub option: ReturnOption,
    /// Seeds the uniform iterate draw.
    pub seed: u64,
    pub record_history: bool,
    pub early_stop: bool,
}

impl GlmtronConfig {
    pub fn new(w_bound: f64, step: StepSize, iterations: usize) -> Self {
        Self {
            w_bound,
            step,
            iterations,
            option: ReturnOption::LastIterate,
            seed: 0,
            record_history: false,
            early_stop: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.w_bound > 0.0) {
            return Err(invalid("w_bound must be positive"));
        }
        if let StepSize::Constant(eta) = self.step {
            if !(eta > 0.0 && eta.is_finite()) {
                return Err(invalid("step size must be positive and finite"));
            }
        }
        if self.iterations == 0 {
            return Err(invalid("at least one iteration is required"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IterationRecord {
    /// `‖Θ^(t) − Θ*‖²_F` after step `t`, when `Θ*` is known.
    pub param_err_sq: Option<f64>,
    /// Frobenius norm of the pseudogradient used in step `t`.
    pub pseudogradient_norm: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct EstimateReport {
    pub theta_hat: WeightMatrix,
    pub iterations_run: usize,
    pub step_size: f64,
    /// 1-based index of the returned iterate.
    pub chosen_iterate: usize,
    pub history: Option<Vec<IterationRecord>>,
    pub prediction_error: Option<f64>,
    pub param_err_sq: Option<f64>,
}

/// `(1/n) Σ_{i=1}^{n} (σ(Θx_i) − x_{i+1}) x_iᵀ`.
pub fn pseudogradient(theta: &WeightMatrix, traj: &Trajectory, link: &LinkFunction) -> Result<DMatrix<f64>> {
    let d = traj.dim();
    if theta.dim() != d {
        return Err(invalid("theta and trajectory dimensions differ"));
    }
    let mut g = DMatrix::<f64>::zeros(d, d);
    let mut z = vec![0.0; d];
    for (x, y) in traj.transitions() {
        theta.apply_into(x, &mut z);
        link.apply_in_place(&mut z);
        for r in 0..d {
            let res = z[r] - y[r];
            for c in 0..d {
                g[(r, c)] += res * x[c];
            }
        }
    }
    g /= traj.n() as f64;
    if !linalg::all_finite(&g) {
        return Err(invalid("pseudogradient is not finite"));
    }
    Ok(g)
}

/// Radial projection onto `{Θ : ‖Θ‖_F ≤ W}`. Panics if `w_bound ≤ 0`.
pub fn project_frobenius(theta: &WeightMatrix, w_bound: f64) -> WeightMatrix {
    assert!(w_bound > 0.0, "w_bound must be positive");
    let norm = theta.frobenius_norm();
    if norm <= w_bound {
        return theta.clone();
    }
    WeightMatrix::new(theta.as_matrix() * (w_bound / norm)).expect("scaling keeps entries finite")
}

fn project_in_place(theta: &mut [f64], w_bound: f64) {
    let scale = theta.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if scale == 0.0 {
        return;
    }
    // scaled to avoid overflow in the sum of squares
    let norm = scale * theta.iter().map(|v| (v / scale) * (v / scale)).sum::<f64>().sqrt();
    if norm > w_bound {
        let s = w_bound / norm;
        theta.iter_mut().for_each(|v| *v *= s);
    }
}

/// Sufficient statistics reused across iterations. Matrices are row-major.
struct Design<'a> {
    traj: &'a Trajectory,
    d: usize,
    cross: Vec<f64>,
    cov: Option<Vec<f64>>,
}

fn row_major(m: &DMatrix<f64>) -> Vec<f64> {
    m.transpose().as_slice().to_vec()
}

impl<'a> Design<'a> {
    fn new(traj: &'a Trajectory, link: &LinkFunction) -> Self {
        let cov = matches!(link, LinkFunction::Identity).then(|| row_major(&empirical_covariance(traj)));
        Self { traj, d: traj.dim(), cross: row_major(&empirical_cross_covariance(traj)), cov }
    }

    /// Writes the pseudogradient at `theta` (row-major) into `g`.
    fn pseudogradient(&self, theta: &[f64], link: &LinkFunction, g: &mut [f64], z: &mut [f64]) {
        let d = self.d;
        g.iter_mut().for_each(|v| *v = 0.0);
        if let Some(cov) = &self.cov {
            // identity link: Θ Σ̂ − C
            for r in 0..d {
                for k in 0..d {
                    let t = theta[r * d + k];
                    if t == 0.0 {
                        continue;
                    }
                    for c in 0..d {
                        g[r * d + c] += t * cov[k * d + c];
                    }
                }
            }
        } else {
            for i in 1..=self.traj.n() {
                let x = self.traj.state(i);
                for r in 0..d {
                    let row = &theta[r * d..(r + 1) * d];
                    z[r] = link.scalar(linalg::dot(row, x));
                }
                for r in 0..d {
                    let zr = z[r];
                    if zr == 0.0 {
                        continue;
                    }
                    let grow = &mut g[r * d..(r + 1) * d];
                    for (gv, &xc) in grow.iter_mut().zip(x) {
                        *gv += zr * xc;
                    }
                }
            }
            let inv_n = 1.0 / self.traj.n() as f64;
            g.iter_mut().for_each(|v| *v *= inv_n);
        }
        for (gv, cv) in g.iter_mut().zip(&self.cross) {
            *gv -= cv;
        }
    }
}

fn to_weight(theta: &[f64], d: usize) -> Result<WeightMatrix> {
    WeightMatrix::new(DMatrix::from_row_slice(d, d, theta))
}

/// Runs `m` projected pseudogradient steps from `Θ = 0` and returns the last
/// iterate or a uniformly drawn one.
pub fn glmtron_fit(
    traj: &Trajectory,
    link: &LinkFunction,
    config: &GlmtronConfig,
    theta_star: Option<&WeightMatrix>,
) -> Result<EstimateReport> {
    config.validate()?;
    let d = traj.dim();
    if let Some(ts) = theta_star {
        if ts.dim() != d {
            return Err(invalid("theta_star and trajectory dimensions differ"));
        }
    }
    let eta = match config.step {
        StepSize::Constant(eta) => eta,
        StepSize::Practical => practical_step(linalg::eigen_extremes(&empirical_covariance(traj)).1),
    };
    let m = config.iterations;
    let target = match config.option {
        ReturnOption::LastIterate => m,
        ReturnOption::UniformRandom => {
            let mut r = rng::stream(config.seed, rng::stream_id("option-ii", &[]));
            r.random_range(1..=m)
        }
    };
    let star = theta_star.map(|t| row_major(t.as_matrix()));

    let design = Design::new(traj, link);
    let mut theta = vec![0.0; d * d];
    let mut grad = vec![0.0; d * d];
    let mut z = vec![0.0; d];
    let mut chosen: Option<(usize, Vec<f64>)> = None;
    let mut history = config.record_history.then(|| Vec::with_capacity(m));
    let mut iterations_run = 0;

    for t in 1..=m {
        design.pseudogradient(&theta, link, &mut grad, &mut z);
        let gnorm = grad.iter().map(|v| v * v).sum::<f64>().sqrt();
        if config.early_stop && gnorm < EARLY_STOP_THRESHOLD {
            break;
        }
        for (th, g) in theta.iter_mut().zip(&grad) {
            *th -= eta * g;
        }
        if theta.iter().any(|v| !v.is_finite()) {
            return Err(Error::FitDivergence { iteration: t });
        }
        project_in_place(&mut theta, config.w_bound);
        iterations_run = t;
        if let Some(h) = history.as_mut() {
            let err = star.as_ref().map(|s| s.iter().zip(&theta).map(|(a, b)| (a - b) * (a - b)).sum());
            h.push(IterationRecord { param_err_sq: err, pseudogradient_norm: gnorm });
        }
        if t == target {
            chosen = Some((t, theta.clone()));
        }
    }

    // early exit before the drawn index returns the final iterate
    let (chosen_iterate, chosen_theta) = chosen.unwrap_or((iterations_run, theta));
    let theta_hat = to_weight(&chosen_theta, d)?;
    let (prediction_error, param_err_sq) = match theta_star {
        Some(ts) => (Some(prediction_error(&theta_hat, ts, traj, link)?), Some(parameter_error(&theta_hat, ts)?)),
        None => (None, None),
    };
    Ok(EstimateReport {
        theta_hat,
        iterations_run,
        step_size: eta,
        chosen_iterate,
        history,
        prediction_error,
        param_err_sq,
    })
}
