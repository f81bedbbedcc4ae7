//! Closed-form Gaussian/ReLU moments and their Monte Carlo checks.
//!
//! For `ε ~ N(0, I)` and `θ` the angle between `u` and `v`,
//! `E[relu(⟨u,ε⟩) relu(⟨v,ε⟩)] = ‖u‖‖v‖ (sin θ + (π − θ) cos θ) / 2π`,
//! which yields `E[(relu(⟨u,ε⟩) − relu(⟨v,ε⟩))²] ≥ ‖u − v‖²/4`. The
//! functions here evaluate those closed forms and compare them against
//! seeded Monte Carlo estimates.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::linalg::{dot, norm};
use crate::rng;

/// Monte Carlo agreement threshold in standard errors.
pub const MC_SIGMAS: f64 = 4.0;
/// Absolute slack on equality-type verdicts.
pub const EXACT_TOL: f64 = 1e-12;
/// Samples per independently seeded Monte Carlo chunk.
const MC_CHUNK: usize = 1 << 14;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MomentCheckResult {
    pub closed_form: f64,
    pub mc_estimate: f64,
    pub mc_stderr: f64,
    pub samples: usize,
    /// `|closed_form − mc_estimate| ≤ 4·mc_stderr` (plus [`EXACT_TOL`]).
    pub pass: bool,
}

impl MomentCheckResult {
    fn new(closed_form: f64, estimate: McEstimate) -> Self {
        let pass = (closed_form - estimate.mean).abs() <= MC_SIGMAS * estimate.stderr + EXACT_TOL;
        Self { closed_form, mc_estimate: estimate.mean, mc_stderr: estimate.stderr, samples: estimate.samples, pass }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct McEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub samples: usize,
}

/// Mean and standard error of `f(g)` for `g ~ N(0, I_d)`. Samples are drawn
/// in fixed-size chunks, each on its own stream, and merged in chunk order.
pub fn mc_gaussian_mean(d: usize, samples: usize, seed: u64, f: impl Fn(&[f64]) -> f64) -> McEstimate {
    let mut count = 0usize;
    let mut mean = 0.0;
    let mut m2 = 0.0;
    let mut g = vec![0.0; d];
    let chunks = samples.div_ceil(MC_CHUNK);
    for c in 0..chunks {
        let len = MC_CHUNK.min(samples - c * MC_CHUNK);
        let mut r = rng::stream(seed, rng::stream_id("mc-chunk", &[c as u64]));
        let (mut cm, mut cm2) = (0.0, 0.0);
        for k in 0..len {
            g.iter_mut().for_each(|v| *v = r.sample(StandardNormal));
            let y = f(&g);
            let delta = y - cm;
            cm += delta / (k + 1) as f64;
            cm2 += delta * (y - cm);
        }
        // Chan et al. pairwise merge
        let total = count + len;
        let delta = cm - mean;
        mean += delta * len as f64 / total as f64;
        m2 += cm2 + delta * delta * (count as f64) * (len as f64) / total as f64;
        count = total;
    }
    let var = if count > 1 { m2 / (count - 1) as f64 } else { 0.0 };
    McEstimate { mean, stderr: (var / count.max(1) as f64).sqrt(), samples: count }
}

/// Angle in `[0, π]`; the cosine is clamped before `acos`.
pub fn angle(u: &[f64], v: &[f64]) -> f64 {
    let nu = norm(u);
    let nv = norm(v);
    if nu == 0.0 || nv == 0.0 {
        return 0.0;
    }
    (dot(u, v) / (nu * nv)).clamp(-1.0, 1.0).acos()
}

/// `E[relu(⟨u,ε⟩)·relu(⟨v,ε⟩)]` for `ε ~ N(0, I)`. Zero when either vector
/// is zero.
pub fn arccos_kernel_moment(u: &[f64], v: &[f64]) -> f64 {
    assert_eq!(u.len(), v.len(), "vectors must share a dimension");
    let nu = norm(u);
    let nv = norm(v);
    if nu == 0.0 || nv == 0.0 {
        return 0.0;
    }
    let t = angle(u, v);
    nu * nv * (t.sin() + (PI - t) * t.cos()) / (2.0 * PI)
}

/// `E[(relu(⟨u,ε⟩) − relu(⟨v,ε⟩))²]` for `ε ~ N(0, I)`.
pub fn relu_gap_second_moment(u: &[f64], v: &[f64]) -> f64 {
    0.5 * dot(u, u) + 0.5 * dot(v, v) - 2.0 * arccos_kernel_moment(u, v)
}

fn dist_sq(u: &[f64], v: &[f64]) -> f64 {
    u.iter().zip(v).map(|(a, b)| (a - b) * (a - b)).sum()
}

fn relu(x: f64) -> f64 {
    x.max(0.0)
}

/// Closed form of the product moment against Monte Carlo.
pub fn check_arccos_kernel(u: &[f64], v: &[f64], samples: usize, seed: u64) -> MomentCheckResult {
    let est = mc_gaussian_mean(u.len(), samples, seed, |g| relu(dot(u, g)) * relu(dot(v, g)));
    MomentCheckResult::new(arccos_kernel_moment(u, v), est)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GapBoundCheck {
    /// Closed form `γ·E[…]` against Monte Carlo under `N(0, γI)`.
    pub moment: MomentCheckResult,
    pub lhs: f64,
    /// `(γ/4)‖u − v‖²`.
    pub rhs: f64,
    pub bound_holds: bool,
}

/// Checks `E[(relu(⟨u,ε⟩) − relu(⟨v,ε⟩))²] ≥ (γ/4)‖u−v‖²` for
/// `ε ~ N(0, γI)`, using the closed form scaled by `γ`.
pub fn check_relu_gap_bound(u: &[f64], v: &[f64], gamma: f64, samples: usize, seed: u64) -> GapBoundCheck {
    assert!(gamma > 0.0, "gamma must be positive");
    let lhs = gamma * relu_gap_second_moment(u, v);
    let rhs = 0.25 * gamma * dist_sq(u, v);
    let sd = gamma.sqrt();
    let est = mc_gaussian_mean(u.len(), samples, seed, |g| {
        let a = relu(sd * dot(u, g));
        let b = relu(sd * dot(v, g));
        (a - b) * (a - b)
    });
    GapBoundCheck {
        moment: MomentCheckResult::new(lhs, est),
        lhs,
        rhs,
        bound_holds: lhs >= rhs - EXACT_TOL * rhs.max(1.0),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ShiftedGapCheck {
    pub mc_estimate: f64,
    pub mc_stderr: f64,
    pub samples: usize,
    /// `¼ e^{−‖μ‖²} ‖u − v‖²`.
    pub bound: f64,
    /// `mc_estimate ≥ bound − 4·mc_stderr`.
    pub pass: bool,
    /// `bound / 4`: the constant `1/16` obtained when the unshifted bound is
    /// applied at variance `1/2`. The `1/4` form fails e.g. for `u = −e_1`,
    /// `v = −2e_1`, `μ = e_1`, where the left side is about 0.0754 and the
    /// bound `e^{-1}/4` about 0.0920.
    pub relaxed_bound: f64,
    pub relaxed_pass: bool,
}

/// Monte Carlo check of `E[(relu(⟨u,x⟩) − relu(⟨v,x⟩))²] ≥ ¼e^{−‖μ‖²}‖u−v‖²`
/// for `x ~ N(μ, I)`.
pub fn check_shifted_relu_gap(u: &[f64], v: &[f64], mu: &[f64], samples: usize, seed: u64) -> ShiftedGapCheck {
    assert_eq!(u.len(), mu.len(), "mean must share the vector dimension");
    let bound = 0.25 * (-dot(mu, mu)).exp() * dist_sq(u, v);
    let shift_u = dot(u, mu);
    let shift_v = dot(v, mu);
    let est = mc_gaussian_mean(u.len(), samples, seed, |g| {
        let a = relu(dot(u, g) + shift_u);
        let b = relu(dot(v, g) + shift_v);
        (a - b) * (a - b)
    });
    ShiftedGapCheck {
        mc_estimate: est.mean,
        mc_stderr: est.stderr,
        samples: est.samples,
        bound,
        pass: est.mean >= bound - MC_SIGMAS * est.stderr - EXACT_TOL,
        relaxed_bound: 0.25 * bound,
        relaxed_pass: est.mean >= 0.25 * bound - MC_SIGMAS * est.stderr - EXACT_TOL,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrigCheck {
    pub angle: f64,
    /// `(2θ/π)‖u‖‖v‖ sin²(θ/2)`.
    pub lhs: f64,
    /// `¼‖u − v‖²`.
    pub rhs: f64,
    pub holds: bool,
    /// The same inequality with coefficient `θ/π` in place of `2θ/π`, which
    /// holds for every angle in `[0, π]`; the `2θ/π` form fails for obtuse
    /// angles (at `u = −v` unit it reads `2 ≤ 1`).
    pub half_coefficient_holds: bool,
}

pub fn check_trig_bound(u: &[f64], v: &[f64]) -> TrigCheck {
    let t = angle(u, v);
    let half = (t / 2.0).sin();
    let lhs = 2.0 * t / PI * norm(u) * norm(v) * half * half;
    let rhs = 0.25 * dist_sq(u, v);
    TrigCheck {
        angle: t,
        lhs,
        rhs,
        holds: lhs <= rhs + EXACT_TOL,
        half_coefficient_holds: 0.5 * lhs <= rhs + EXACT_TOL,
    }
}
