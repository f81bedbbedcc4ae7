//! Configuration-driven experiment harness.
//!
//! An experiment is described by a TOML document ([`ExperimentSpec`]).
//! Work is split into independent cells `(d, n, trial)`; every cell derives
//! its random streams from the master seed and its own coordinates, and
//! results are emitted in canonical `(d, n, trial)` order, so output is
//! identical for any thread count or execution mode.

mod config;
mod harness;
mod lemma_suite;
mod output;

pub use config::{
    AssertSpec, ExperimentKind, ExperimentSpec, FitSpec, LemmaSpec, LinkSpec, NoiseSpec, StepMode, ThetaGen,
};
pub use harness::{
    certify_cells, generate_theta, run_isometry_trials, run_rate_sweep, run_single_fit, simulate_cell, CertifyRow,
    IsometryResult, IsometryRow, IsometrySummary, RateSweepResult, RateSweepRow, SingleFitReport, SkippedCell,
    SlopeFit,
};
pub use lemma_suite::{run_lemma_suite, LemmaRow, LemmaSuiteReport};
pub use output::{
    config_digest, fmt_float, sidecar_path, write_certify_csv, write_isometry_csv, write_isometry_summary_csv,
    write_lemma_csv, write_meta, write_rate_sweep_csv, write_slopes_csv, write_trajectory_csv, RunMeta,
};
