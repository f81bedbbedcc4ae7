use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::rng::StreamRng;

const SQRT_3: f64 = 1.732_050_807_568_877_2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseKind {
    /// `N(0, I)`.
    Gaussian,
    /// Independent ±1 signs.
    ScaledRademacher,
    /// Independent `Uniform[-√3, √3]`, unit variance.
    UniformBox,
    /// All draws are zero (the noiseless system).
    Zero,
}

/// Isotropic, zero-mean, independent increments in `R^d`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseModel {
    kind: NoiseKind,
    d: usize,
}

/// Anything that can fill the innovation of step `step` (the term added to
/// produce `x_{step+1}`).
pub trait NoiseSource {
    fn dim(&self) -> usize;
    fn fill(&self, step: usize, rng: &mut StreamRng, out: &mut [f64]);
}

impl NoiseModel {
    pub fn new(kind: NoiseKind, d: usize) -> Result<Self> {
        if d == 0 {
            return Err(invalid("noise dimension must be positive"));
        }
        Ok(Self { kind, d })
    }

    pub fn gaussian(d: usize) -> Result<Self> {
        Self::new(NoiseKind::Gaussian, d)
    }

    pub fn zero(d: usize) -> Result<Self> {
        Self::new(NoiseKind::Zero, d)
    }

    pub fn kind(&self) -> NoiseKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    /// Subgaussian variance proxy of each coordinate.
    pub fn tau(&self) -> f64 {
        match self.kind {
            NoiseKind::Gaussian | NoiseKind::ScaledRademacher => 1.0,
            // bounded in [-a, a] => subG(a²)
            NoiseKind::UniformBox => SQRT_3,
            NoiseKind::Zero => 0.0,
        }
    }

    pub fn sample_into(&self, rng: &mut StreamRng, out: &mut [f64]) {
        match self.kind {
            NoiseKind::Gaussian => out.iter_mut().for_each(|e| *e = rng.sample(StandardNormal)),
            NoiseKind::ScaledRademacher => {
                out.iter_mut().for_each(|e| *e = if rng.random::<bool>() { 1.0 } else { -1.0 })
            }
            NoiseKind::UniformBox => out.iter_mut().for_each(|e| *e = rng.random_range(-SQRT_3..SQRT_3)),
            NoiseKind::Zero => out.iter_mut().for_each(|e| *e = 0.0),
        }
    }
}

impl NoiseSource for NoiseModel {
    fn dim(&self) -> usize {
        self.d
    }

    fn fill(&self, _step: usize, rng: &mut StreamRng, out: &mut [f64]) {
        self.sample_into(rng, out);
    }
}
