use nalgebra::DMatrix;

use super::{LinkFunction, NoiseModel, NoiseSource, WeightMatrix};
use crate::error::{invalid, Error, Result};
use crate::rng::{self, StreamRng};

/// Simulation aborts once a state norm exceeds this bound.
pub const DIVERGENCE_BOUND: f64 = 1e12;

/// States `x_0, …, x_{n+1}` of one rollout, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    d: usize,
    n: usize,
    seed: u64,
    states: Vec<f64>,
}

impl Trajectory {
    /// Builds a trajectory from explicit states. The first state must be
    /// zero and at least two transitions' worth of states (`n ≥ 1`) are
    /// required.
    pub fn from_states(states: &[Vec<f64>], seed: u64) -> Result<Self> {
        if states.len() < 3 {
            return Err(invalid("a trajectory needs at least 3 states (n >= 1)"));
        }
        let d = states[0].len();
        if d == 0 || states.iter().any(|s| s.len() != d) {
            return Err(invalid("all states must share a positive dimension"));
        }
        if states[0].iter().any(|&v| v != 0.0) {
            return Err(invalid("the first state must be zero"));
        }
        if states.iter().flatten().any(|v| !v.is_finite()) {
            return Err(invalid("states must be finite"));
        }
        Ok(Self { d, n: states.len() - 2, seed, states: states.concat() })
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    /// Number of transition pairs `(x_i, x_{i+1})`, `i = 1..n`.
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn len(&self) -> usize {
        self.n + 2
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    #[inline]
    pub fn state(&self, i: usize) -> &[f64] {
        &self.states[i * self.d..(i + 1) * self.d]
    }

    pub fn states(&self) -> impl Iterator<Item = &[f64]> {
        self.states.chunks_exact(self.d)
    }

    /// Pairs `(x_i, x_{i+1})` for `i = 1..=n`.
    pub fn transitions(&self) -> impl Iterator<Item = (&[f64], &[f64])> {
        (1..=self.n).map(move |i| (self.state(i), self.state(i + 1)))
    }

    /// The first `k` coordinates of every state, as a new trajectory.
    pub fn leading_coordinates(&self, k: usize) -> Result<Trajectory> {
        if k == 0 || k > self.d {
            return Err(invalid(format!("cannot take {k} of {} coordinates", self.d)));
        }
        let states = self.states().flat_map(|s| s[..k].iter().copied()).collect();
        Ok(Trajectory { d: k, n: self.n, seed: self.seed, states })
    }
}

fn check_dims(theta: &WeightMatrix, d: usize) -> Result<()> {
    if theta.dim() != d {
        return Err(invalid(format!("theta is {0}x{0} but noise has dimension {d}", theta.dim())));
    }
    Ok(())
}

/// Core rollout: `x_0 = 0`, `x_{i+1} = σ(Θx_i) + ε_i`, `i = 0..=n`.
pub fn simulate_with<N: NoiseSource + ?Sized>(
    theta: &WeightMatrix,
    link: &LinkFunction,
    noise: &N,
    n: usize,
    seed: u64,
    rng: &mut StreamRng,
) -> Result<Trajectory> {
    let d = noise.dim();
    check_dims(theta, d)?;
    if n == 0 {
        return Err(invalid("n must be at least 1"));
    }
    let mut states = vec![0.0; (n + 2) * d];
    let mut eps = vec![0.0; d];
    for i in 0..=n {
        let (done, rest) = states.split_at_mut((i + 1) * d);
        let cur = &done[i * d..];
        let next = &mut rest[..d];
        theta.apply_into(cur, next);
        link.apply_in_place(next);
        noise.fill(i, rng, &mut eps);
        let mut sq = 0.0;
        for (x, e) in next.iter_mut().zip(&eps) {
            *x += e;
            sq += *x * *x;
        }
        if !sq.is_finite() || sq.sqrt() > DIVERGENCE_BOUND {
            return Err(Error::Divergence { index: i + 1 });
        }
    }
    Ok(Trajectory { d, n, seed, states })
}

/// Simulates on stream `stream` of `seed`; distinct streams give
/// independent trajectories.
pub fn simulate_stream(
    theta: &WeightMatrix,
    link: &LinkFunction,
    noise: &NoiseModel,
    n: usize,
    seed: u64,
    stream: u64,
) -> Result<Trajectory> {
    let mut r = rng::stream(seed, stream);
    simulate_with(theta, link, noise, n, seed, &mut r)
}

/// Simulates `n` transitions (states `x_0..x_{n+1}`) under `seed`.
pub fn simulate(
    theta: &WeightMatrix,
    link: &LinkFunction,
    noise: &NoiseModel,
    n: usize,
    seed: u64,
) -> Result<Trajectory> {
    simulate_stream(theta, link, noise, n, seed, 0)
}

/// `k` noiseless iterates `f(x), f²(x), …, f^k(x)` of `f = σ∘Θ`.
pub fn simulate_from(theta: &WeightMatrix, link: &LinkFunction, x_init: &[f64], k: usize) -> Result<Vec<Vec<f64>>> {
    check_dims(theta, x_init.len())?;
    if x_init.iter().any(|v| !v.is_finite()) {
        return Err(invalid("initial state must be finite"));
    }
    let d = x_init.len();
    let mut out = Vec::with_capacity(k);
    let mut cur = x_init.to_vec();
    for i in 0..k {
        let mut next = vec![0.0; d];
        theta.apply_into(&cur, &mut next);
        link.apply_in_place(&mut next);
        let norm = next.iter().map(|v| v * v).sum::<f64>().sqrt();
        if !norm.is_finite() || norm > DIVERGENCE_BOUND {
            return Err(Error::Divergence { index: i + 1 });
        }
        out.push(next.clone());
        cur = next;
    }
    Ok(out)
}

/// Innovation for an augmented state `[x; u]`: the first `d` coordinates
/// come from the base noise model, the last `p` are the next control input.
#[derive(Debug, Clone)]
pub struct ControlNoise {
    base: NoiseModel,
    controls: Vec<Vec<f64>>,
}

impl ControlNoise {
    pub fn controls(&self) -> &[Vec<f64>] {
        &self.controls
    }
}

impl NoiseSource for ControlNoise {
    fn dim(&self) -> usize {
        self.base.dim() + self.controls.first().map_or(0, Vec::len)
    }

    fn fill(&self, step: usize, rng: &mut StreamRng, out: &mut [f64]) {
        let d = self.base.dim();
        let (x_part, u_part) = out.split_at_mut(d);
        self.base.sample_into(rng, x_part);
        // controls[step] is u_{step+1}; inputs past the supplied horizon are zero
        match self.controls.get(step) {
            Some(u) => u_part.copy_from_slice(u),
            None => u_part.iter_mut().for_each(|v| *v = 0.0),
        }
    }
}

/// `x_{i+1} = σ(Θx_i + Bu_i) + ε_i` rewritten as an autonomous system on
/// `[x; u]` with block matrix `[[Θ, B], [0, 0]]`.
#[derive(Debug, Clone)]
pub struct AugmentedSystem {
    pub theta: WeightMatrix,
    pub state_dim: usize,
    pub input_dim: usize,
    controls: Vec<Vec<f64>>,
}

impl AugmentedSystem {
    pub fn noise(&self, base: NoiseModel) -> Result<ControlNoise> {
        if base.dim() != self.state_dim {
            return Err(invalid("base noise dimension must equal the state dimension"));
        }
        Ok(ControlNoise { base, controls: self.controls.clone() })
    }

    /// Rolls the augmented system forward. `controls[i]` is used as
    /// `u_{i+1}` (with `u_0 = 0`), so `n` transitions need `n + 1` inputs.
    pub fn simulate(
        &self,
        link: &LinkFunction,
        base: NoiseModel,
        n: usize,
        seed: u64,
        stream: u64,
    ) -> Result<Trajectory> {
        if self.controls.len() < n + 1 {
            return Err(invalid(format!(
                "{} transitions need {} control inputs, got {}",
                n,
                n + 1,
                self.controls.len()
            )));
        }
        let noise = self.noise(base)?;
        let mut r = rng::stream(seed, stream);
        simulate_with(&self.theta, link, &noise, n, seed, &mut r)
    }
}

/// Builds the augmented autonomous form of an input-driven system.
/// `b` is `d × p` and every control has length `p`.
pub fn augment(theta: &WeightMatrix, b: &DMatrix<f64>, controls: &[Vec<f64>]) -> Result<AugmentedSystem> {
    let d = theta.dim();
    let p = b.ncols();
    if b.nrows() != d {
        return Err(invalid(format!("B must have {d} rows, got {}", b.nrows())));
    }
    if p == 0 {
        return Err(invalid("B must have at least one column"));
    }
    if controls.iter().any(|u| u.len() != p) {
        return Err(invalid(format!("every control input must have length {p}")));
    }
    if controls.iter().flatten().any(|v| !v.is_finite()) || b.iter().any(|v| !v.is_finite()) {
        return Err(invalid("B and controls must be finite"));
    }
    let mut big = DMatrix::zeros(d + p, d + p);
    big.view_mut((0, 0), (d, d)).copy_from(theta.as_matrix());
    big.view_mut((0, d), (d, p)).copy_from(b);
    Ok(AugmentedSystem { theta: WeightMatrix::new(big)?, state_dim: d, input_dim: p, controls: controls.to_vec() })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_noise_keeps_origin() {
        let theta = WeightMatrix::from_rows(&[vec![0.9, -3.0], vec![2.0, 0.4]]).unwrap();
        let t = simulate(&theta, &LinkFunction::Relu, &NoiseModel::zero(2).unwrap(), 10, 1).unwrap();
        assert_eq!(t.len(), 12);
        assert!(t.states().flatten().all(|v| *v == 0.0));
    }

    #[test]
    fn first_state_is_zero_and_length_is_n_plus_two() {
        let theta = WeightMatrix::scaled_identity(3, 0.5);
        let t = simulate(&theta, &LinkFunction::Identity, &NoiseModel::gaussian(3).unwrap(), 25, 9).unwrap();
        assert_eq!(t.len(), 27);
        assert_eq!(t.state(0), &[0.0, 0.0, 0.0]);
        assert_eq!(t.n(), 25);
    }

    #[test]
    fn same_seed_is_bit_identical() {
        let theta = WeightMatrix::scaled_identity(2, 0.5);
        let noise = NoiseModel::gaussian(2).unwrap();
        let a = simulate(&theta, &LinkFunction::Identity, &noise, 200, 42).unwrap();
        let b = simulate(&theta, &LinkFunction::Identity, &noise, 200, 42).unwrap();
        let c = simulate(&theta, &LinkFunction::Identity, &noise, 200, 43).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn dimension_mismatch_and_zero_n_are_rejected() {
        let theta = WeightMatrix::zeros(2);
        let noise = NoiseModel::gaussian(3).unwrap();
        assert!(matches!(simulate(&theta, &LinkFunction::Relu, &noise, 5, 0), Err(Error::InvalidInput(_))));
        let noise = NoiseModel::gaussian(2).unwrap();
        assert!(simulate(&theta, &LinkFunction::Relu, &noise, 0, 0).is_err());
    }

    #[test]
    fn unstable_system_reports_divergence_index() {
        let theta = WeightMatrix::scaled_identity(1, 10.0);
        let err = simulate(&theta, &LinkFunction::Identity, &NoiseModel::gaussian(1).unwrap(), 100, 3).unwrap_err();
        match err {
            Error::Divergence { index } => assert!(index > 5 && index < 20, "index {index}"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn noiseless_iterates() {
        let relu_trap = WeightMatrix::from_rows(&[vec![1.0, 1.0], vec![-1.0, -1.0]]).unwrap();
        let it = simulate_from(&relu_trap, &LinkFunction::Relu, &[1.0, 0.0], 3).unwrap();
        assert_eq!(it, vec![vec![1.0, 0.0]; 3]);

        let it = simulate_from(&relu_trap, &LinkFunction::Relu, &[0.0, 0.0], 4).unwrap();
        assert!(it.iter().flatten().all(|v| *v == 0.0));

        let half = WeightMatrix::scaled_identity(2, 0.5);
        let it = simulate_from(&half, &LinkFunction::Identity, &[1.0, 0.0], 2).unwrap();
        assert_eq!(it, vec![vec![0.5, 0.0], vec![0.25, 0.0]]);
    }

    #[test]
    fn augmented_shape_is_block() {
        let theta = WeightMatrix::scaled_identity(3, 0.2);
        let b = DMatrix::from_element(3, 2, 1.0);
        let sys = augment(&theta, &b, &[vec![0.0, 0.0]]).unwrap();
        let m = sys.theta.as_matrix();
        assert_eq!(m.shape(), (5, 5));
        assert!(m.rows(3, 2).iter().all(|v| *v == 0.0));
        assert_eq!(m.view((0, 3), (3, 2)), b);
    }

    #[test]
    fn augmentation_with_zero_input_matrix_matches_autonomous() {
        let theta = WeightMatrix::from_rows(&[vec![0.3, -0.2], vec![0.1, 0.4]]).unwrap();
        let b = DMatrix::zeros(2, 1);
        let controls: Vec<Vec<f64>> = (0..31).map(|i| vec![(i as f64).sin()]).collect();
        let sys = augment(&theta, &b, &controls).unwrap();
        let noise = NoiseModel::gaussian(2).unwrap();
        let aug = sys.simulate(&LinkFunction::Relu, noise, 30, 17, 0).unwrap();
        let direct = simulate(&theta, &LinkFunction::Relu, &noise, 30, 17).unwrap();
        assert_eq!(aug.leading_coordinates(2).unwrap(), direct);
    }

    #[test]
    fn augmentation_needs_enough_controls() {
        let theta = WeightMatrix::zeros(1);
        let sys = augment(&theta, &DMatrix::zeros(1, 1), &vec![vec![1.0]; 3]).unwrap();
        assert!(sys.simulate(&LinkFunction::Relu, NoiseModel::gaussian(1).unwrap(), 3, 0, 0).is_err());
        assert!(augment(&theta, &DMatrix::zeros(2, 1), &[]).is_err());
    }
}
