use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::stability::LyapunovCertificate;

/// Which guarantee the schedule targets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    /// Lipschitz link only; prediction error at rate `√(d²/n)` with a
    /// uniformly drawn iterate.
    Slow,
    /// Link slopes bounded below by `ζ > 0`; linear convergence.
    Fast,
    /// ReLU link with Gaussian noise.
    Relu,
}

impl Regime {
    pub fn name(self) -> &'static str {
        match self {
            Regime::Slow => "slow",
            Regime::Fast => "fast",
            Regime::Relu => "relu",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Schedule {
    pub eta: f64,
    pub iterations: usize,
    /// Unrounded iteration order before the multiplier and the floor at 1.
    pub order: f64,
}

impl Schedule {
    /// Same step, `ceil(multiplier · order)` iterations (at least 1).
    pub fn scaled(self, multiplier: f64) -> Schedule {
        Schedule { iterations: ceil_at_least_one(multiplier * self.order), ..self }
    }
}

fn ceil_at_least_one(x: f64) -> usize {
    if x.is_finite() && x > 1.0 {
        x.ceil() as usize
    } else {
        1
    }
}

/// Step size and iteration count prescribed for each regime, with every
/// unspecified absolute constant set to one:
///
/// * slow: `η = 1/(16R)`, `m = √n`
/// * fast: `η = ζ²/(16R)²`, `m = log(1 + nW²B²/(τ²R))` with `B = 4R`
/// * relu: `η = (16R)^{-2} e^{-4ρR}`, `m = log n`
#[allow(clippy::too_many_arguments)]
pub fn theory_schedule(
    cert: &LyapunovCertificate,
    zeta: f64,
    tau: f64,
    regime: Regime,
    n: usize,
    w_bound: f64,
    delta: f64,
) -> Result<Schedule> {
    if n == 0 {
        return Err(invalid("n must be at least 1"));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(invalid("delta must lie in (0, 1)"));
    }
    if !(w_bound > 0.0) {
        return Err(invalid("w_bound must be positive"));
    }
    let r = cert.effective_radius();
    let n_f = n as f64;
    let (eta, order) = match regime {
        Regime::Slow => (1.0 / (16.0 * r), n_f.sqrt()),
        Regime::Fast => {
            if !(zeta > 0.0 && zeta <= 1.0) {
                return Err(invalid("the fast regime needs zeta in (0, 1]"));
            }
            if !(tau > 0.0) {
                return Err(invalid("the fast regime needs tau > 0"));
            }
            let b = 4.0 * r;
            let m = (1.0 + n_f * w_bound * w_bound * b * b / (tau * tau * r)).ln();
            (zeta * zeta / (16.0 * r).powi(2), m)
        }
        Regime::Relu => ((16.0 * r).powi(-2) * (-4.0 * cert.rho() * r).exp(), n_f.ln()),
    };
    Ok(Schedule { eta, iterations: ceil_at_least_one(order), order })
}

/// `1/(4 · max(λ_max(Σ̂), 1))`.
pub fn practical_step(cov_lambda_max: f64) -> f64 {
    1.0 / (4.0 * cov_lambda_max.max(1.0))
}
