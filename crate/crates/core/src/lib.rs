//! Identification of generalized linear dynamical systems from a single
//! trajectory.
//!
//! The system under study is `x_{t+1} = σ(Θ* x_t) + ε_t` started from
//! `x_0 = 0`, where `σ` is a coordinatewise nondecreasing 1-Lipschitz link.
//! The crate covers the whole pipeline:
//!
//! * [`dynsys`]: link functions, noise models, the trajectory simulator and
//!   the reduction of input-driven systems to autonomous ones.
//! * [`stability`]: diagonal Lyapunov certificates `ΘᵀKΘ ⪯ ρK` and the
//!   effective radius `R = tr(K)/(1-ρ)`.
//! * [`conditioning`]: empirical covariance and the isometry / cross-term
//!   diagnostics.
//! * [`glmtron`]: projected pseudogradient descent, step-size schedules, the
//!   least-squares baseline and error metrics.
//! * [`lemmas`]: closed-form Gaussian/ReLU moments with Monte Carlo checks.
//! * [`bench`]: the configuration-driven experiment harness behind the
//!   `glsysid` binary.
//!
//! Independent experiment cells are dispatched through [`par`], which uses
//! rayon when the `parallel` feature is enabled and a plain loop otherwise.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bench;
pub mod conditioning;
pub mod dynsys;
pub mod error;
pub mod glmtron;
pub mod lemmas;
pub mod linalg;
pub mod par;
pub mod rng;
pub mod stability;

pub use dynsys::{LinkFunction, NoiseKind, NoiseModel, Trajectory, WeightMatrix};
pub use error::{Error, Result};
pub use stability::LyapunovCertificate;
