//! Projected pseudogradient descent for generalized linear systems and the
//! companion estimators and metrics.

mod fit;
mod metrics;
mod ols;
mod schedule;

pub use fit::{
    glmtron_fit, project_frobenius, pseudogradient, EstimateReport, GlmtronConfig, IterationRecord, ReturnOption,
    StepSize, EARLY_STOP_THRESHOLD,
};
pub use metrics::{parameter_error, prediction_error};
pub use ols::ols_fit;
pub use schedule::{practical_step, theory_schedule, Regime, Schedule};
