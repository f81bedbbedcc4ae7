use std::collections::BTreeMap;
use std::time::Instant;

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use super::config::{ExperimentSpec, StepMode, ThetaGen};
use crate::conditioning::{cross_term_report, isometry_report, CrossTermReport, IsometryReport};
use crate::dynsys::{simulate_stream, LinkFunction, Trajectory, WeightMatrix};
use crate::error::{Error, Result};
use crate::glmtron::{glmtron_fit, ols_fit, parameter_error, theory_schedule, EstimateReport, GlmtronConfig, StepSize};
use crate::linalg;
use crate::par::{self, Execution};
use crate::rng::{self, StreamRng};
use crate::stability::{check_certificate, default_tolerance, find_certificate, LyapunovCertificate};

/// Draws a parameter matrix of dimension `d` from `gen`.
pub fn generate_theta(gen: &ThetaGen, d: usize, rng: &mut StreamRng) -> Result<WeightMatrix> {
    let mut gaussian = || DMatrix::from_fn(d, d, |_, _| rng.sample::<f64, _>(StandardNormal));
    match gen {
        ThetaGen::Spectral { scale } => {
            let g = gaussian();
            let op = linalg::operator_norm(&g);
            WeightMatrix::new(g * (scale / op))
        }
        ThetaGen::Nonneg { scale } => {
            let a = gaussian().map(f64::abs);
            let radius = linalg::spectral_radius(&a);
            WeightMatrix::new(a * (scale / radius))
        }
        ThetaGen::Explicit { matrix } => {
            if matrix.len() != d {
                return Err(Error::Config(format!("explicit theta is not {d}x{d}")));
            }
            WeightMatrix::from_rows(matrix)
        }
        ThetaGen::Zero => Ok(WeightMatrix::zeros(d)),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
struct Cell {
    d: usize,
    n: usize,
    trial: usize,
}

fn grid(spec: &ExperimentSpec) -> Vec<Cell> {
    let mut cells: Vec<Cell> = spec
        .dims
        .iter()
        .flat_map(|&d| spec.n_grid.iter().flat_map(move |&n| (0..spec.trials).map(move |trial| Cell { d, n, trial })))
        .collect();
    cells.sort();
    cells.dedup();
    cells
}

/// `Θ*` depends on `(seed, d, trial)` only, so a trial keeps its system
/// across the `n` grid.
fn true_system(spec: &ExperimentSpec, seed: u64, d: usize, trial: usize) -> Result<WeightMatrix> {
    let mut r = rng::stream(seed, rng::stream_id("theta", &[d as u64, trial as u64]));
    generate_theta(spec.theta_gen()?, d, &mut r)
}

fn trajectory_for(
    spec: &ExperimentSpec,
    link: &LinkFunction,
    theta: &WeightMatrix,
    seed: u64,
    cell: Cell,
) -> Result<Trajectory> {
    let noise = spec.noise.build(cell.d)?;
    let id = rng::stream_id("trajectory", &[cell.d as u64, cell.n as u64, cell.trial as u64]);
    simulate_stream(theta, link, &noise, cell.n, seed, id)
}

fn certify(theta: &WeightMatrix) -> std::result::Result<LyapunovCertificate, String> {
    match find_certificate(theta) {
        Ok(Some(cert)) => Ok(cert),
        Ok(None) => Err("no diagonal certificate found".into()),
        Err(e) => Err(e.to_string()),
    }
}

fn default_w_bound(theta_star: &WeightMatrix) -> f64 {
    let f = theta_star.frobenius_norm();
    if f > 0.0 {
        2.0 * f
    } else {
        1.0
    }
}

/// Resolves the step size and iteration count of one fit.
fn fit_config(
    spec: &ExperimentSpec,
    cert: Option<&LyapunovCertificate>,
    link: &LinkFunction,
    n: usize,
    w_bound: f64,
    option_seed: u64,
) -> Result<GlmtronConfig> {
    let fit = &spec.fit;
    let needs_theory = fit.step == StepMode::Theory || fit.iterations.is_none();
    let schedule = if needs_theory {
        let cert = cert.ok_or_else(|| Error::Config("theory schedules need a stability certificate".into()))?;
        let tau = spec.noise.build(cert.dim())?.tau();
        Some(
            theory_schedule(cert, link.zeta(), tau, fit.regime, n, w_bound, spec.delta)?
                .scaled(fit.iteration_multiplier),
        )
    } else {
        None
    };
    let step = match (fit.step, schedule) {
        (StepMode::Theory, Some(s)) => StepSize::Constant(s.eta),
        _ => StepSize::Practical,
    };
    let iterations = match (fit.iterations, schedule) {
        (Some(m), _) => m,
        (None, Some(s)) => s.iterations,
        (None, None) => unreachable!("schedule is computed when iterations are unset"),
    };
    Ok(GlmtronConfig {
        w_bound,
        step,
        iterations,
        option: fit.option,
        seed: option_seed,
        record_history: fit.record_history,
        early_stop: fit.early_stop,
    })
}

fn option_seed(seed: u64, cell: Cell) -> u64 {
    rng::stream_id("option-draw", &[seed, cell.d as u64, cell.n as u64, cell.trial as u64])
}

#[derive(Debug, Clone, Serialize)]
pub struct SkippedCell {
    pub d: usize,
    pub n: usize,
    pub trial: usize,
    pub reason: String,
}

enum Outcome<T> {
    Done(T),
    Skipped(SkippedCell),
}

fn skipped<T>(cell: Cell, reason: String) -> Outcome<T> {
    log::warn!("skipping cell d={} n={} trial={}: {reason}", cell.d, cell.n, cell.trial);
    Outcome::Skipped(SkippedCell { d: cell.d, n: cell.n, trial: cell.trial, reason })
}

fn collect<T>(outcomes: Vec<Result<Outcome<T>>>) -> Result<(Vec<T>, Vec<SkippedCell>)> {
    let total = outcomes.len();
    let mut done = Vec::new();
    let mut skips = Vec::new();
    for o in outcomes {
        match o? {
            Outcome::Done(v) => done.push(v),
            Outcome::Skipped(s) => skips.push(s),
        }
    }
    if skips.len() * 2 > total {
        return Err(Error::TooManySkips { skipped: skips.len(), total });
    }
    Ok((done, skips))
}

#[derive(Debug, Clone, Serialize)]
pub struct RateSweepRow {
    pub d: usize,
    pub n: usize,
    pub seed: u64,
    pub trial: usize,
    pub link_kind: String,
    pub regime: String,
    pub rho: f64,
    pub radius: f64,
    pub param_err_sq: f64,
    pub pred_err: f64,
    /// Least-squares (linear model) error on the same trajectory; NaN when
    /// the covariance is singular.
    pub ols_err_sq: f64,
    pub iterations: usize,
    pub eta: f64,
    pub chosen_iterate: usize,
    pub wall_time_seconds: f64,
}

/// Log-log fits of the error summaries of one dimension against `n`.
#[derive(Debug, Clone, Serialize)]
pub struct SlopeFit {
    pub d: usize,
    pub link_kind: String,
    pub regime: String,
    pub n_values: Vec<usize>,
    pub median_param_err: Vec<f64>,
    pub mean_pred_err: Vec<f64>,
    pub median_ols_err: Vec<f64>,
    /// Slope of `log(median param_err_sq)` against `log n`.
    pub param_slope: f64,
    /// Slope of `log(mean pred_err)` against `log n`.
    pub pred_slope: f64,
    pub ols_slope: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct RateSweepResult {
    pub rows: Vec<RateSweepRow>,
    pub slopes: Vec<SlopeFit>,
    pub skipped: Vec<SkippedCell>,
}

fn log_slope(ns: &[usize], ys: &[f64]) -> f64 {
    let pts: Vec<(f64, f64)> = ns
        .iter()
        .zip(ys)
        .filter(|(_, y)| y.is_finite() && **y > 0.0)
        .map(|(n, y)| ((*n as f64).ln(), y.ln()))
        .collect();
    if pts.len() < 2 {
        return f64::NAN;
    }
    let (x, y): (Vec<f64>, Vec<f64>) = pts.into_iter().unzip();
    linalg::fit_line(&x, &y).0
}

fn fit_slopes(rows: &[RateSweepRow]) -> Vec<SlopeFit> {
    let mut by_d: BTreeMap<usize, BTreeMap<usize, Vec<&RateSweepRow>>> = BTreeMap::new();
    for r in rows {
        by_d.entry(r.d).or_default().entry(r.n).or_default().push(r);
    }
    by_d.into_iter()
        .map(|(d, by_n)| {
            let first = by_n.values().next().and_then(|v| v.first()).expect("non-empty group");
            let (link_kind, regime) = (first.link_kind.clone(), first.regime.clone());
            let n_values: Vec<usize> = by_n.keys().copied().collect();
            let pick = |f: fn(&RateSweepRow) -> f64| -> Vec<Vec<f64>> {
                by_n.values().map(|rs| rs.iter().map(|r| f(r)).collect()).collect()
            };
            let median_param_err: Vec<f64> = pick(|r| r.param_err_sq).iter().map(|v| linalg::median(v)).collect();
            let mean_pred_err: Vec<f64> =
                pick(|r| r.pred_err).iter().map(|v| v.iter().sum::<f64>() / v.len() as f64).collect();
            let median_ols_err: Vec<f64> = pick(|r| r.ols_err_sq)
                .iter()
                .map(|v| {
                    let finite: Vec<f64> = v.iter().copied().filter(|x| x.is_finite()).collect();
                    linalg::median(&finite)
                })
                .collect();
            SlopeFit {
                d,
                link_kind,
                regime,
                param_slope: log_slope(&n_values, &median_param_err),
                pred_slope: log_slope(&n_values, &mean_pred_err),
                ols_slope: log_slope(&n_values, &median_ols_err),
                n_values,
                median_param_err,
                mean_pred_err,
                median_ols_err,
            }
        })
        .collect()
}

fn sweep_cell(spec: &ExperimentSpec, link: &LinkFunction, seed: u64, cell: Cell) -> Result<Outcome<RateSweepRow>> {
    let theta_star = true_system(spec, seed, cell.d, cell.trial)?;
    let cert = match certify(&theta_star) {
        Ok(c) => c,
        Err(reason) => return Ok(skipped(cell, reason)),
    };
    let traj = trajectory_for(spec, link, &theta_star, seed, cell)?;
    let w_bound = spec.w_bound.unwrap_or_else(|| default_w_bound(&theta_star));
    let config = fit_config(spec, Some(&cert), link, cell.n, w_bound, option_seed(seed, cell))?;
    let start = Instant::now();
    let report = glmtron_fit(&traj, link, &config, Some(&theta_star))?;
    let elapsed = start.elapsed().as_secs_f64();
    let ols_err_sq = match ols_fit(&traj) {
        Ok(est) => parameter_error(&est, &theta_star)?,
        Err(Error::RankDeficient { .. }) => f64::NAN,
        Err(e) => return Err(e),
    };
    Ok(Outcome::Done(RateSweepRow {
        d: cell.d,
        n: cell.n,
        seed,
        trial: cell.trial,
        link_kind: link.kind_name().to_string(),
        regime: spec.fit.regime.name().to_string(),
        rho: cert.rho(),
        radius: cert.effective_radius(),
        param_err_sq: report.param_err_sq.unwrap_or(f64::NAN),
        pred_err: report.prediction_error.unwrap_or(f64::NAN),
        ols_err_sq,
        iterations: report.iterations_run,
        eta: report.step_size,
        chosen_iterate: report.chosen_iterate,
        wall_time_seconds: if spec.timing { elapsed } else { 0.0 },
    }))
}

/// Generates, certifies, simulates and fits every `(d, n, trial)` cell and
/// fits log-log slopes of the error summaries.
pub fn run_rate_sweep(spec: &ExperimentSpec, seed: u64, exec: Execution) -> Result<RateSweepResult> {
    spec.validate_system()?;
    let link = spec.link.build()?;
    let cells = grid(spec);
    let outcomes = par::map(exec, &cells, |&c| sweep_cell(spec, &link, seed, c));
    let (rows, skipped) = collect(outcomes)?;
    let slopes = fit_slopes(&rows);
    Ok(RateSweepResult { rows, slopes, skipped })
}

#[derive(Debug, Clone, Serialize)]
pub struct IsometryRow {
    pub d: usize,
    pub n: usize,
    pub seed: u64,
    pub trial: usize,
    pub rho: f64,
    pub radius: f64,
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub lower_ok: bool,
    pub upper_ok: bool,
    pub cross_norm: f64,
    pub mu_bound: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct IsometrySummary {
    pub d: usize,
    pub n: usize,
    pub trials: usize,
    pub lower_fraction: f64,
    pub upper_fraction: f64,
    pub median_cross_norm: f64,
    /// Median of `cross_norm / mu_bound`.
    pub median_cross_ratio: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct IsometryResult {
    pub rows: Vec<IsometryRow>,
    pub summary: Vec<IsometrySummary>,
    /// Per dimension, the log-log slope of the median cross-term norm.
    pub cross_slopes: Vec<(usize, f64)>,
    pub skipped: Vec<SkippedCell>,
}

fn isometry_cell(spec: &ExperimentSpec, link: &LinkFunction, seed: u64, cell: Cell) -> Result<Outcome<IsometryRow>> {
    let theta_star = true_system(spec, seed, cell.d, cell.trial)?;
    let cert = match certify(&theta_star) {
        Ok(c) => c,
        Err(reason) => return Ok(skipped(cell, reason)),
    };
    let traj = trajectory_for(spec, link, &theta_star, seed, cell)?;
    let iso: IsometryReport = isometry_report(&traj, &cert)?;
    let tau = spec.noise.build(cell.d)?.tau();
    let cross: CrossTermReport = cross_term_report(&traj, &theta_star, link, &cert, tau, spec.delta)?;
    Ok(Outcome::Done(IsometryRow {
        d: cell.d,
        n: cell.n,
        seed,
        trial: cell.trial,
        rho: cert.rho(),
        radius: cert.effective_radius(),
        lambda_min: iso.lambda_min,
        lambda_max: iso.lambda_max,
        lower_ok: iso.lower_ok,
        upper_ok: iso.upper_ok,
        cross_norm: cross.cross_norm,
        mu_bound: cross.mu_bound,
    }))
}

/// Isometry and cross-term diagnostics for every `(d, n, trial)` cell, with
/// pass fractions per `(d, n)`.
pub fn run_isometry_trials(spec: &ExperimentSpec, seed: u64, exec: Execution) -> Result<IsometryResult> {
    spec.validate_system()?;
    let link = spec.link.build()?;
    let cells = grid(spec);
    let outcomes = par::map(exec, &cells, |&c| isometry_cell(spec, &link, seed, c));
    let (rows, skipped) = collect(outcomes)?;

    let mut groups: BTreeMap<(usize, usize), Vec<&IsometryRow>> = BTreeMap::new();
    for r in &rows {
        groups.entry((r.d, r.n)).or_default().push(r);
    }
    let summary: Vec<IsometrySummary> = groups
        .iter()
        .map(|(&(d, n), rs)| {
            let count = rs.len() as f64;
            let cross: Vec<f64> = rs.iter().map(|r| r.cross_norm).collect();
            let ratio: Vec<f64> = rs.iter().map(|r| r.cross_norm / r.mu_bound).collect();
            IsometrySummary {
                d,
                n,
                trials: rs.len(),
                lower_fraction: rs.iter().filter(|r| r.lower_ok).count() as f64 / count,
                upper_fraction: rs.iter().filter(|r| r.upper_ok).count() as f64 / count,
                median_cross_norm: linalg::median(&cross),
                median_cross_ratio: linalg::median(&ratio),
            }
        })
        .collect();
    let mut cross_slopes = Vec::new();
    for &d in spec.dims.iter().collect::<std::collections::BTreeSet<_>>() {
        let (ns, ys): (Vec<usize>, Vec<f64>) =
            summary.iter().filter(|s| s.d == d).map(|s| (s.n, s.median_cross_norm)).unzip();
        cross_slopes.push((d, log_slope(&ns, &ys)));
    }
    Ok(IsometryResult { rows, summary, cross_slopes, skipped })
}

#[derive(Debug, Clone, Serialize)]
pub struct CertifyRow {
    pub d: usize,
    pub trial: usize,
    pub status: String,
    pub operator_norm: f64,
    pub rho: f64,
    pub radius: f64,
    pub violation: f64,
    pub k_diag: Vec<f64>,
}

/// Generates `trials` matrices per dimension and reports the certificate
/// search outcome for each.
pub fn certify_cells(spec: &ExperimentSpec, seed: u64, exec: Execution) -> Result<Vec<CertifyRow>> {
    spec.validate_generator()?;
    let mut cells: Vec<(usize, usize)> =
        spec.dims.iter().flat_map(|&d| (0..spec.trials).map(move |t| (d, t))).collect();
    cells.sort();
    cells.dedup();
    let rows = par::map(exec, &cells, |&(d, trial)| -> Result<CertifyRow> {
        let theta = true_system(spec, seed, d, trial)?;
        let operator_norm = theta.operator_norm();
        let row = match find_certificate(&theta) {
            Ok(Some(cert)) => {
                let check = check_certificate(&theta, &cert, default_tolerance(&theta, &cert))?;
                CertifyRow {
                    d,
                    trial,
                    status: if check.holds { "certified" } else { "check_failed" }.into(),
                    operator_norm,
                    rho: cert.rho(),
                    radius: cert.effective_radius(),
                    violation: check.violation,
                    k_diag: cert.k_diag().to_vec(),
                }
            }
            Ok(None) => CertifyRow {
                d,
                trial,
                status: "inconclusive".into(),
                operator_norm,
                rho: f64::NAN,
                radius: f64::NAN,
                violation: f64::NAN,
                k_diag: vec![],
            },
            Err(Error::SearchFailure(_)) => CertifyRow {
                d,
                trial,
                status: "search_failure".into(),
                operator_norm,
                rho: f64::NAN,
                radius: f64::NAN,
                violation: f64::NAN,
                k_diag: vec![],
            },
            Err(e) => return Err(e),
        };
        Ok(row)
    });
    rows.into_iter().collect()
}

/// The trajectory of the first `(d, n)` cell, trial 0.
pub fn simulate_cell(spec: &ExperimentSpec, seed: u64) -> Result<Trajectory> {
    spec.validate_system()?;
    let link = spec.link.build()?;
    let cell = Cell { d: spec.dims[0], n: spec.n_grid[0], trial: 0 };
    let theta = true_system(spec, seed, cell.d, cell.trial)?;
    trajectory_for(spec, &link, &theta, seed, cell)
}

#[derive(Debug, Clone, Serialize)]
pub struct SingleFitReport {
    pub d: usize,
    pub n: usize,
    pub seed: u64,
    pub link_kind: String,
    pub regime: String,
    pub w_bound: f64,
    pub theta_star: WeightMatrix,
    pub certificate: Option<LyapunovCertificate>,
    pub estimate: EstimateReport,
    pub isometry: Option<IsometryReport>,
    pub cross_term: Option<CrossTermReport>,
    pub ols_err_sq: Option<f64>,
}

/// One end-to-end run on the first `(d, n)` cell with every diagnostic.
pub fn run_single_fit(spec: &ExperimentSpec, seed: u64) -> Result<SingleFitReport> {
    spec.validate_system()?;
    let link = spec.link.build()?;
    let cell = Cell { d: spec.dims[0], n: spec.n_grid[0], trial: 0 };
    let theta_star = true_system(spec, seed, cell.d, cell.trial)?;
    let cert = certify(&theta_star).ok();
    let traj = trajectory_for(spec, &link, &theta_star, seed, cell)?;
    let w_bound = spec.w_bound.unwrap_or_else(|| default_w_bound(&theta_star));
    let config = fit_config(spec, cert.as_ref(), &link, cell.n, w_bound, option_seed(seed, cell))?;
    let estimate = glmtron_fit(&traj, &link, &config, Some(&theta_star))?;
    let (isometry, cross_term) = match &cert {
        Some(c) => {
            let tau = spec.noise.build(cell.d)?.tau();
            (Some(isometry_report(&traj, c)?), Some(cross_term_report(&traj, &theta_star, &link, c, tau, spec.delta)?))
        }
        None => (None, None),
    };
    let ols_err_sq = match ols_fit(&traj) {
        Ok(est) => Some(parameter_error(&est, &theta_star)?),
        Err(Error::RankDeficient { .. }) => None,
        Err(e) => return Err(e),
    };
    Ok(SingleFitReport {
        d: cell.d,
        n: cell.n,
        seed,
        link_kind: link.kind_name().to_string(),
        regime: spec.fit.regime.name().to_string(),
        w_bound,
        theta_star,
        certificate: cert,
        estimate,
        isometry,
        cross_term,
        ols_err_sq,
    })
}
