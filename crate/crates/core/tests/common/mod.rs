#![allow(dead_code)]

use glsysid::linalg;
use glsysid::rng::{self, StreamRng};
use glsysid::WeightMatrix;
use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

pub fn rng_for(tag: &str, seed: u64) -> StreamRng {
    rng::stream(seed, rng::stream_id(tag, &[]))
}

pub fn gaussian_matrix(r: &mut StreamRng, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| r.sample(StandardNormal))
}

pub fn gaussian_vec(r: &mut StreamRng, d: usize) -> Vec<f64> {
    (0..d).map(|_| r.sample(StandardNormal)).collect()
}

/// Gaussian matrix rescaled to operator norm `s`.
pub fn spectral_theta(r: &mut StreamRng, d: usize, s: f64) -> WeightMatrix {
    let g = gaussian_matrix(r, d, d);
    let op = linalg::operator_norm(&g);
    WeightMatrix::new(g * (s / op)).unwrap()
}

/// Entrywise-nonnegative matrix rescaled to spectral radius `s`.
pub fn nonneg_theta(r: &mut StreamRng, d: usize, s: f64) -> WeightMatrix {
    let a = gaussian_matrix(r, d, d).map(f64::abs);
    let rad = linalg::spectral_radius(&a);
    WeightMatrix::new(a * (s / rad)).unwrap()
}
