//! Diagonal Lyapunov certificates `ΘᵀKΘ ⪯ ρK`.
//!
//! With `K` diagonal and positive, the condition is equivalent to
//! `‖K^{1/2} Θ K^{-1/2}‖²_op ≤ ρ`, and any such pair makes `x ↦ σ(Θx)`
//! contract in the `K`-norm for every admissible link. Certificates are
//! searched for in two stages: the identity scaling when `‖Θ‖_op < 1`, then
//! the Perron scaling of `|Θ|` when its spectral radius is below one.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::dynsys::{LinkFunction, WeightMatrix};
use crate::error::{invalid, Error, Result};
use crate::linalg;
use crate::rng;

/// Power iteration cap.
pub const POWER_MAX_ITER: usize = 10_000;
/// Convergence threshold on successive Rayleigh quotients.
pub const POWER_TOL: f64 = 1e-12;
/// Entrywise perturbation that makes `|Θ|` primitive.
pub const PRIMITIVITY_SHIFT: f64 = 1e-12;
/// Relative tolerance of [`default_tolerance`].
pub const RELATIVE_CHECK_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LyapunovCertificate {
    k_diag: Vec<f64>,
    rho: f64,
    effective_radius: f64,
}

impl LyapunovCertificate {
    /// Any positive diagonal and `ρ ∈ [0, 1)`. Use [`Self::normalized`] to
    /// rescale so that `min K_ii = 1`.
    pub fn new(k_diag: Vec<f64>, rho: f64) -> Result<Self> {
        if k_diag.is_empty() {
            return Err(invalid("certificate needs at least one diagonal entry"));
        }
        if k_diag.iter().any(|k| !(k.is_finite() && *k > 0.0)) {
            return Err(invalid("K must have finite positive diagonal"));
        }
        if !(0.0..1.0).contains(&rho) {
            return Err(invalid(format!("rho must lie in [0, 1), got {rho}")));
        }
        let effective_radius = k_diag.iter().sum::<f64>() / (1.0 - rho);
        Ok(Self { k_diag, rho, effective_radius })
    }

    pub fn identity(d: usize, rho: f64) -> Result<Self> {
        Self::new(vec![1.0; d], rho)
    }

    pub fn k_diag(&self) -> &[f64] {
        &self.k_diag
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn dim(&self) -> usize {
        self.k_diag.len()
    }

    pub fn trace(&self) -> f64 {
        self.k_diag.iter().sum()
    }

    pub fn effective_radius(&self) -> f64 {
        self.effective_radius
    }

    pub fn is_normalized(&self) -> bool {
        self.k_diag.iter().copied().fold(f64::INFINITY, f64::min) >= 1.0
    }

    /// Rescales `K` so that its smallest entry is one.
    pub fn normalized(&self) -> Self {
        let min = self.k_diag.iter().copied().fold(f64::INFINITY, f64::min);
        let k: Vec<f64> = self.k_diag.iter().map(|k| k / min).collect();
        Self::new(k, self.rho).expect("rescaling keeps a valid certificate")
    }

    /// `‖x‖²_K`.
    pub fn k_norm_sq(&self, x: &[f64]) -> f64 {
        x.iter().zip(&self.k_diag).map(|(v, k)| k * v * v).sum()
    }
}

/// `R = tr(K)/(1-ρ)`.
pub fn effective_radius(cert: &LyapunovCertificate) -> f64 {
    cert.trace() / (1.0 - cert.rho())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CertificateCheck {
    pub holds: bool,
    /// `λ_max(ΘᵀKΘ − ρK)`.
    pub violation: f64,
}

/// `10⁻⁸ · ‖Θ‖²_op · tr(K)`.
pub fn default_tolerance(theta: &WeightMatrix, cert: &LyapunovCertificate) -> f64 {
    let op = theta.operator_norm();
    RELATIVE_CHECK_TOL * op * op * cert.trace()
}

pub fn check_certificate(theta: &WeightMatrix, cert: &LyapunovCertificate, tol: f64) -> Result<CertificateCheck> {
    if theta.dim() != cert.dim() {
        return Err(invalid(format!("theta has dimension {} but K has {}", theta.dim(), cert.dim())));
    }
    if !(tol >= 0.0) {
        return Err(invalid("tolerance must be non-negative"));
    }
    let t = theta.as_matrix();
    let k = DMatrix::from_diagonal(&DVector::from_column_slice(cert.k_diag()));
    let gap = t.transpose() * &k * t - &k * cert.rho();
    if !linalg::all_finite(&gap) {
        return Err(invalid("certificate check produced non-finite entries"));
    }
    let (_, violation) = linalg::eigen_extremes(&gap);
    Ok(CertificateCheck { holds: violation <= tol, violation })
}

/// Left and right Perron vectors of a nonnegative matrix.
#[derive(Debug, Clone)]
pub struct PerronPair {
    pub value: f64,
    pub right: Vec<f64>,
    pub left: Vec<f64>,
}

fn power_iterate(a: &DMatrix<f64>) -> Result<(f64, DVector<f64>)> {
    let d = a.nrows();
    // A + I shares eigenvectors with A and has a strictly dominant Perron
    // root when A is irreducible, which defeats periodic oscillation.
    let shifted = a + DMatrix::identity(d, d);
    let mut v = DVector::from_element(d, 1.0 / (d as f64).sqrt());
    let mut prev = f64::NAN;
    for it in 0..POWER_MAX_ITER {
        let w = &shifted * &v;
        let q = v.dot(&w);
        let norm = w.norm();
        if !(norm.is_finite() && norm > 0.0) {
            return Err(Error::SearchFailure("power iteration lost the Perron direction".into()));
        }
        v = w / norm;
        if it >= 2 && (q - prev).abs() < POWER_TOL * q.abs().max(1.0) {
            return Ok((q - 1.0, v));
        }
        prev = q;
    }
    Err(Error::SearchFailure(format!("power iteration did not converge in {POWER_MAX_ITER} iterations")))
}

/// Perron root and vectors of an entrywise nonnegative matrix, computed by
/// power iteration on `A + I`.
pub fn perron_vectors(a: &DMatrix<f64>) -> Result<PerronPair> {
    if a.nrows() != a.ncols() || a.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
        return Err(invalid("Perron vectors need a square nonnegative matrix"));
    }
    let (value, right) = power_iterate(a)?;
    let (_, left) = power_iterate(&a.transpose())?;
    Ok(PerronPair { value, right: right.iter().copied().collect(), left: left.iter().copied().collect() })
}

/// `‖D Θ D^{-1}‖²_op` for `D = diag(√k)`.
fn scaled_norm_sq(theta: &DMatrix<f64>, k_diag: &[f64]) -> f64 {
    let d = theta.nrows();
    let scaled = DMatrix::from_fn(d, d, |i, j| theta[(i, j)] * (k_diag[i] / k_diag[j]).sqrt());
    let op = linalg::operator_norm(&scaled);
    op * op
}

/// Searches for a diagonal certificate. `Ok(None)` means the search was
/// inconclusive, not that the system is unstable.
///
/// Candidates are `K = I` (when `‖Θ‖_op < 1`) and the Perron scaling of
/// `|Θ|` (when `ρ(|Θ|) < 1`); the one with the smaller `ρ` is returned, `K = I`
/// on ties. For nonnegative `Θ` the Perron candidate attains `ρ(Θ)²`.
pub fn find_certificate(theta: &WeightMatrix) -> Result<Option<LyapunovCertificate>> {
    let d = theta.dim();
    let op = theta.operator_norm();
    let identity = if op < 1.0 { Some(LyapunovCertificate::identity(d, op * op)?) } else { None };
    let perron = match perron_certificate(theta) {
        Ok(c) => c,
        // the identity candidate does not depend on the power iteration
        Err(e) if identity.is_none() => return Err(e),
        Err(e) => {
            log::debug!("Perron candidate skipped: {e}");
            None
        }
    };
    Ok(match (identity, perron) {
        (Some(i), Some(p)) if p.rho() < i.rho() * (1.0 - 1e-12) => Some(p),
        (Some(i), _) => Some(i),
        (None, p) => p,
    })
}

fn perron_certificate(theta: &WeightMatrix) -> Result<Option<LyapunovCertificate>> {
    let abs = theta.as_matrix().map(f64::abs);
    let perturbed = abs.add_scalar(PRIMITIVITY_SHIFT);
    let perron = perron_vectors(&perturbed)?;
    if perron.value >= 1.0 {
        return Ok(None);
    }
    let ratios: Vec<f64> = perron.left.iter().zip(&perron.right).map(|(u, v)| u / v).collect();
    if ratios.iter().any(|r| !(r.is_finite() && *r > 0.0)) {
        return Ok(None);
    }
    let min = ratios.iter().copied().fold(f64::INFINITY, f64::min);
    let k_diag: Vec<f64> = ratios.iter().map(|r| r / min).collect();
    let rho = scaled_norm_sq(theta.as_matrix(), &k_diag);
    if !(rho < 1.0) {
        return Ok(None);
    }
    let cert = LyapunovCertificate::new(k_diag, rho)?;
    let check = check_certificate(theta, &cert, default_tolerance(theta, &cert))?;
    if !check.holds {
        log::debug!("Perron scaling failed verification (violation {:e})", check.violation);
        return Ok(None);
    }
    Ok(Some(cert))
}

#[derive(Debug, Clone, Serialize)]
pub struct DecayReport {
    /// `max_x ‖f^k(x)‖²_K / ‖x‖²_K` for `k = 1..=k_max`.
    pub max_ratio: Vec<f64>,
    /// Largest `ratio_k / ρ^k` over all `k` (0 when `ρ = 0` and every
    /// iterate vanished).
    pub max_normalized: f64,
    pub holds: bool,
}

/// `‖f^k(x)‖²_K / ‖x‖²_K` for `k = 1..=k_max`.
pub fn decay_ratios(
    theta: &WeightMatrix,
    link: &LinkFunction,
    cert: &LyapunovCertificate,
    x: &[f64],
    k_max: usize,
) -> Result<Vec<f64>> {
    let base = cert.k_norm_sq(x);
    if !(base > 0.0) {
        return Err(invalid("decay ratios need a nonzero start"));
    }
    let iterates = crate::dynsys::simulate_from(theta, link, x, k_max)?;
    Ok(iterates.iter().map(|xk| cert.k_norm_sq(xk) / base).collect())
}

/// Empirical check of `‖f^k(x)‖²_K ≤ ρ^k ‖x‖²_K` over random starting
/// points of unit `K`-norm.
pub fn ges_decay_check(
    theta: &WeightMatrix,
    link: &LinkFunction,
    cert: &LyapunovCertificate,
    k_max: usize,
    trials: usize,
    seed: u64,
) -> Result<DecayReport> {
    let d = theta.dim();
    if cert.dim() != d {
        return Err(invalid("certificate and theta dimensions differ"));
    }
    let mut r = rng::stream(seed, rng::stream_id("ges-decay", &[d as u64]));
    let mut max_ratio = vec![0.0f64; k_max];
    let mut x = vec![0.0; d];
    for trial in 0..trials {
        // alternate isotropic and heavy single-coordinate directions
        for v in x.iter_mut() {
            *v = r.sample(StandardNormal);
        }
        if trial % 4 == 3 {
            let j = r.random_range(0..d);
            x[j] *= 1e3;
        }
        let scale = cert.k_norm_sq(&x).sqrt();
        if scale == 0.0 {
            continue;
        }
        x.iter_mut().for_each(|v| *v /= scale);
        for (m, ratio) in max_ratio.iter_mut().zip(decay_ratios(theta, link, cert, &x, k_max)?) {
            *m = m.max(ratio);
        }
    }
    let mut max_normalized = 0.0f64;
    let mut holds = true;
    for (k, &ratio) in max_ratio.iter().enumerate() {
        let bound = cert.rho().powi(k as i32 + 1);
        if ratio > bound * (1.0 + 1e-9) + 1e-12 {
            holds = false;
        }
        if bound > 0.0 {
            max_normalized = max_normalized.max(ratio / bound);
        } else if ratio > 0.0 {
            max_normalized = f64::INFINITY;
        }
    }
    Ok(DecayReport { max_ratio, max_normalized, holds })
}
