//! Domain types and the trajectory simulator for
//! `x_{i+1} = σ(Θ x_i) + ε_i`.

mod link;
mod matrix;
mod noise;
mod simulate;

pub use link::{LinkFunction, LinkValidation};
pub use matrix::WeightMatrix;
pub use noise::{NoiseKind, NoiseModel, NoiseSource};
pub use simulate::{
    augment, simulate, simulate_from, simulate_stream, simulate_with, AugmentedSystem, ControlNoise, Trajectory,
    DIVERGENCE_BOUND,
};
