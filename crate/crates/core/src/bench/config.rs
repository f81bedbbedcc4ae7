use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::dynsys::{LinkFunction, NoiseKind, NoiseModel};
use crate::error::{Error, Result};
use crate::glmtron::{Regime, ReturnOption};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    RateSweep,
    IsometryTrials,
    LemmaSuite,
    SingleFit,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum LinkSpec {
    Identity,
    Relu,
    LeakyRelu { beta: f64 },
}

impl LinkSpec {
    pub fn build(&self) -> Result<LinkFunction> {
        match self {
            LinkSpec::Identity => Ok(LinkFunction::Identity),
            LinkSpec::Relu => Ok(LinkFunction::Relu),
            LinkSpec::LeakyRelu { beta } => LinkFunction::leaky_relu(*beta).map_err(|e| Error::Config(e.to_string())),
        }
    }
}

/// How the true parameter matrix of each cell is produced.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ThetaGen {
    /// Gaussian matrix rescaled to operator norm `scale`.
    Spectral { scale: f64 },
    /// Entrywise `|Gaussian|` rescaled to spectral radius `scale`.
    Nonneg { scale: f64 },
    /// A literal matrix, given row by row.
    Explicit { matrix: Vec<Vec<f64>> },
    /// The zero matrix (i.i.d. states).
    Zero,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSpec {
    pub kind: NoiseKind,
}

impl Default for NoiseSpec {
    fn default() -> Self {
        Self { kind: NoiseKind::Gaussian }
    }
}

impl NoiseSpec {
    pub fn build(&self, d: usize) -> Result<NoiseModel> {
        NoiseModel::new(self.kind, d)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum StepMode {
    /// `1/(4 max(λ_max(Σ̂), 1))`.
    #[default]
    Practical,
    /// The regime's prescribed step.
    Theory,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FitSpec {
    pub regime: Regime,
    pub step: StepMode,
    pub option: ReturnOption,
    /// Fixed iteration count; overrides the regime's order condition.
    pub iterations: Option<usize>,
    pub iteration_multiplier: f64,
    pub early_stop: bool,
    pub record_history: bool,
}

impl Default for FitSpec {
    fn default() -> Self {
        Self {
            regime: Regime::Fast,
            step: StepMode::Practical,
            option: ReturnOption::LastIterate,
            iterations: None,
            iteration_multiplier: 1.0,
            early_stop: false,
            record_history: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LemmaSpec {
    pub max_dim: usize,
    pub kernel_pairs: usize,
    pub kernel_samples: usize,
    pub gap_pairs: usize,
    pub gap_samples: usize,
    pub shifted_cases: usize,
    pub shifted_max_dim: usize,
    pub shifted_samples: usize,
    pub trig_pairs: usize,
}

impl Default for LemmaSpec {
    fn default() -> Self {
        Self {
            max_dim: 6,
            kernel_pairs: 100,
            kernel_samples: 1_000_000,
            gap_pairs: 500,
            gap_samples: 10_000,
            shifted_cases: 200,
            shifted_max_dim: 4,
            shifted_samples: 100_000,
            trig_pairs: 10_000,
        }
    }
}

/// Optional pass/fail thresholds; a violated one makes the CLI exit with
/// status 2.
#[derive(Debug, Clone, PartialEq, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct AssertSpec {
    pub param_slope_min: Option<f64>,
    pub param_slope_max: Option<f64>,
    pub pred_slope_max: Option<f64>,
    pub lower_fraction_min: Option<f64>,
    pub upper_fraction_min: Option<f64>,
    /// Fraction thresholds apply only to cells with at least this many
    /// samples.
    pub min_n: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub kind: Option<ExperimentKind>,
    #[serde(default = "default_dims")]
    pub dims: Vec<usize>,
    #[serde(default)]
    pub n_grid: Vec<usize>,
    #[serde(default = "default_trials")]
    pub trials: usize,
    pub seed: Option<u64>,
    #[serde(default = "default_link")]
    pub link: LinkSpec,
    pub theta_gen: Option<ThetaGen>,
    #[serde(default)]
    pub noise: NoiseSpec,
    #[serde(default)]
    pub fit: FitSpec,
    /// Frobenius radius `W`; defaults to `2‖Θ*‖_F` (or 1 for `Θ* = 0`).
    pub w_bound: Option<f64>,
    #[serde(default = "default_delta")]
    pub delta: f64,
    pub output_path: Option<PathBuf>,
    /// Record per-fit wall time. Off by default so that outputs are
    /// byte-reproducible.
    #[serde(default)]
    pub timing: bool,
    #[serde(default)]
    pub lemmas: LemmaSpec,
    #[serde(default)]
    pub assert: AssertSpec,
}

fn default_dims() -> Vec<usize> {
    vec![3]
}
fn default_trials() -> usize {
    1
}
fn default_link() -> LinkSpec {
    LinkSpec::Identity
}
fn default_delta() -> f64 {
    crate::conditioning::DEFAULT_DELTA
}

impl ExperimentSpec {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    /// Checks fields every experiment relies on.
    pub fn validate_common(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.dims.is_empty() || self.dims.contains(&0) {
            return bad("dims must be a non-empty list of positive integers".into());
        }
        if self.trials == 0 {
            return bad("trials must be at least 1".into());
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return bad(format!("delta must lie in (0, 1), got {}", self.delta));
        }
        if let Some(w) = self.w_bound {
            if !(w > 0.0 && w.is_finite()) {
                return bad(format!("w_bound must be positive, got {w}"));
            }
        }
        if !(self.fit.iteration_multiplier > 0.0 && self.fit.iteration_multiplier.is_finite()) {
            return bad("fit.iteration_multiplier must be positive".into());
        }
        if self.fit.iterations == Some(0) {
            return bad("fit.iterations must be at least 1".into());
        }
        self.link.build()?;
        Ok(())
    }

    /// Validation for experiments that simulate systems: requires a
    /// generator and a strictly increasing `n_grid`.
    pub fn validate_system(&self) -> Result<()> {
        self.validate_generator()?;
        if self.n_grid.is_empty() || self.n_grid.contains(&0) {
            return Err(Error::Config("n_grid must be a non-empty list of positive counts".into()));
        }
        if self.n_grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config("n_grid must be strictly increasing".into()));
        }
        Ok(())
    }

    /// Validation for experiments that only generate parameter matrices.
    pub fn validate_generator(&self) -> Result<()> {
        self.validate_common()?;
        let Some(gen) = &self.theta_gen else {
            return Err(Error::Config("theta_gen is required".into()));
        };
        match gen {
            ThetaGen::Spectral { scale } | ThetaGen::Nonneg { scale } => {
                if !(*scale > 0.0 && *scale < 1.0) {
                    return Err(Error::Config(format!("theta_gen.scale must lie in (0, 1), got {scale}")));
                }
            }
            ThetaGen::Explicit { matrix } => {
                let d = matrix.len();
                if self.dims.iter().any(|&k| k != d) {
                    return Err(Error::Config(format!("explicit theta is {d}x{d} but dims = {:?}", self.dims)));
                }
                crate::dynsys::WeightMatrix::from_rows(matrix).map_err(|e| Error::Config(e.to_string()))?;
            }
            ThetaGen::Zero => {}
        }
        Ok(())
    }

    /// Rejects a spec whose declared kind differs from `expected`.
    pub fn expect_kind(&self, expected: ExperimentKind) -> Result<()> {
        match self.kind {
            Some(k) if k != expected => {
                Err(Error::Config(format!("config declares kind {k:?} but {expected:?} was requested")))
            }
            _ => Ok(()),
        }
    }

    pub fn theta_gen(&self) -> Result<&ThetaGen> {
        self.theta_gen.as_ref().ok_or_else(|| Error::Config("theta_gen is required".into()))
    }
}
