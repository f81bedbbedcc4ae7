use std::fmt;
use std::sync::Arc;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{invalid, Result};
use crate::rng;

type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Coordinatewise link `σ`. Every link is nondecreasing, 1-Lipschitz and
/// fixes zero; `zeta` is the lower slope bound `|σ(a)-σ(b)| ≥ ζ|a-b|`.
#[derive(Clone)]
pub enum LinkFunction {
    Identity,
    Relu,
    LeakyRelu { beta: f64 },
    Custom { name: String, f: ScalarFn, zeta: f64 },
}

/// Outcome of sampling the link contract.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkValidation {
    pub samples: usize,
    pub zero_violation: f64,
    pub lipschitz_violations: usize,
    pub monotone_violations: usize,
    pub zeta_violations: usize,
}

impl LinkValidation {
    pub fn ok(&self) -> bool {
        self.zero_violation == 0.0
            && self.lipschitz_violations == 0
            && self.monotone_violations == 0
            && self.zeta_violations == 0
    }
}

impl LinkFunction {
    pub fn leaky_relu(beta: f64) -> Result<Self> {
        if !(beta > 0.0 && beta <= 1.0) {
            return Err(invalid(format!("leaky relu slope must lie in (0, 1], got {beta}")));
        }
        Ok(LinkFunction::LeakyRelu { beta })
    }

    /// Wraps a user scalar map. The declared `zeta` and the link contract
    /// are checked on 10⁴ sampled pairs before the link is accepted.
    pub fn custom(name: impl Into<String>, f: impl Fn(f64) -> f64 + Send + Sync + 'static, zeta: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&zeta) {
            return Err(invalid(format!("zeta must lie in [0, 1], got {zeta}")));
        }
        let link = LinkFunction::Custom { name: name.into(), f: Arc::new(f), zeta };
        let report = link.validate(10_000, 0);
        if !report.ok() {
            return Err(invalid(format!("custom link violates the link contract: {report:?}")));
        }
        Ok(link)
    }

    pub fn zeta(&self) -> f64 {
        match self {
            LinkFunction::Identity => 1.0,
            LinkFunction::Relu => 0.0,
            LinkFunction::LeakyRelu { beta } => *beta,
            LinkFunction::Custom { zeta, .. } => *zeta,
        }
    }

    pub fn kind_name(&self) -> &str {
        match self {
            LinkFunction::Identity => "identity",
            LinkFunction::Relu => "relu",
            LinkFunction::LeakyRelu { .. } => "leaky_relu",
            LinkFunction::Custom { name, .. } => name,
        }
    }

    #[inline]
    pub fn scalar(&self, a: f64) -> f64 {
        match self {
            LinkFunction::Identity => a,
            LinkFunction::Relu => a.max(0.0),
            LinkFunction::LeakyRelu { beta } => {
                if a >= 0.0 {
                    a
                } else {
                    beta * a
                }
            }
            LinkFunction::Custom { f, .. } => f(a),
        }
    }

    /// Coordinatewise application to a finite vector.
    pub fn apply(&self, v: &[f64]) -> Result<Vec<f64>> {
        if v.iter().any(|x| !x.is_finite()) {
            return Err(invalid("link input has non-finite entries"));
        }
        Ok(v.iter().map(|&a| self.scalar(a)).collect())
    }

    #[inline]
    pub fn apply_in_place(&self, v: &mut [f64]) {
        match self {
            LinkFunction::Identity => {}
            _ => v.iter_mut().for_each(|a| *a = self.scalar(*a)),
        }
    }

    /// Samples scalar pairs (Gaussian at several scales) and counts
    /// violations of `σ(0)=0`, 1-Lipschitz, monotonicity and the `zeta`
    /// lower bound. Relative slack of 1e-12 absorbs rounding.
    pub fn validate(&self, samples: usize, seed: u64) -> LinkValidation {
        let mut r = rng::stream(seed, rng::stream_id("link-validate", &[]));
        let zeta = self.zeta();
        let mut out = LinkValidation {
            samples,
            zero_violation: self.scalar(0.0).abs(),
            lipschitz_violations: 0,
            monotone_violations: 0,
            zeta_violations: 0,
        };
        for k in 0..samples {
            let scale = [1e-3, 1.0, 1e3][k % 3];
            let a: f64 = r.sample::<f64, _>(StandardNormal) * scale;
            let b: f64 = r.sample::<f64, _>(StandardNormal) * scale;
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            let (flo, fhi) = (self.scalar(lo), self.scalar(hi));
            let gap = hi - lo;
            let slack = 1e-12 * (lo.abs() + hi.abs() + 1e-300);
            if fhi - flo > gap + slack {
                out.lipschitz_violations += 1;
            }
            if fhi + slack < flo {
                out.monotone_violations += 1;
            }
            if zeta > 0.0 && fhi - flo + slack < zeta * gap {
                out.zeta_violations += 1;
            }
        }
        out
    }
}

impl fmt::Debug for LinkFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LinkFunction::Identity => write!(f, "Identity"),
            LinkFunction::Relu => write!(f, "Relu"),
            LinkFunction::LeakyRelu { beta } => write!(f, "LeakyRelu({beta})"),
            LinkFunction::Custom { name, zeta, .. } => write!(f, "Custom({name}, zeta={zeta})"),
        }
    }
}
