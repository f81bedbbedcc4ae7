use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use super::harness::{CertifyRow, IsometryRow, IsometrySummary, RateSweepRow, SlopeFit};
use super::lemma_suite::LemmaRow;
use crate::dynsys::Trajectory;
use crate::error::Result;

/// 17 significant digits, enough to round-trip any `f64`.
pub fn fmt_float(x: f64) -> String {
    if x.is_nan() {
        "NaN".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf" } else { "-inf" }.into()
    } else {
        format!("{x:.16e}")
    }
}

fn f(x: f64) -> String {
    fmt_float(x)
}

fn table<W: Write>(out: W, header: &[&str], rows: impl Iterator<Item = Vec<String>>) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header)?;
    for r in rows {
        debug_assert_eq!(r.len(), header.len());
        w.write_record(&r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_rate_sweep_csv<W: Write>(out: W, rows: &[RateSweepRow]) -> Result<()> {
    let header = [
        "d",
        "n",
        "seed",
        "trial",
        "link_kind",
        "regime",
        "rho",
        "R",
        "param_err_sq",
        "pred_err",
        "ols_err_sq",
        "iterations",
        "eta",
        "chosen_iterate",
        "wall_time_seconds",
    ];
    table(
        out,
        &header,
        rows.iter().map(|r| {
            vec![
                r.d.to_string(),
                r.n.to_string(),
                r.seed.to_string(),
                r.trial.to_string(),
                r.link_kind.clone(),
                r.regime.clone(),
                f(r.rho),
                f(r.radius),
                f(r.param_err_sq),
                f(r.pred_err),
                f(r.ols_err_sq),
                r.iterations.to_string(),
                f(r.eta),
                r.chosen_iterate.to_string(),
                f(r.wall_time_seconds),
            ]
        }),
    )
}

pub fn write_slopes_csv<W: Write>(out: W, slopes: &[SlopeFit]) -> Result<()> {
    let header = ["d", "link_kind", "regime", "points", "param_slope", "pred_slope", "ols_slope"];
    table(
        out,
        &header,
        slopes.iter().map(|s| {
            vec![
                s.d.to_string(),
                s.link_kind.clone(),
                s.regime.clone(),
                s.n_values.len().to_string(),
                f(s.param_slope),
                f(s.pred_slope),
                f(s.ols_slope),
            ]
        }),
    )
}

pub fn write_isometry_csv<W: Write>(out: W, rows: &[IsometryRow]) -> Result<()> {
    let header = [
        "d",
        "n",
        "seed",
        "trial",
        "rho",
        "R",
        "lambda_min",
        "lambda_max",
        "lower_ok",
        "upper_ok",
        "cross_norm",
        "mu_bound",
    ];
    table(
        out,
        &header,
        rows.iter().map(|r| {
            vec![
                r.d.to_string(),
                r.n.to_string(),
                r.seed.to_string(),
                r.trial.to_string(),
                f(r.rho),
                f(r.radius),
                f(r.lambda_min),
                f(r.lambda_max),
                r.lower_ok.to_string(),
                r.upper_ok.to_string(),
                f(r.cross_norm),
                f(r.mu_bound),
            ]
        }),
    )
}

pub fn write_isometry_summary_csv<W: Write>(out: W, summary: &[IsometrySummary]) -> Result<()> {
    let header = ["d", "n", "trials", "lower_fraction", "upper_fraction", "median_cross_norm", "median_cross_ratio"];
    table(
        out,
        &header,
        summary.iter().map(|s| {
            vec![
                s.d.to_string(),
                s.n.to_string(),
                s.trials.to_string(),
                f(s.lower_fraction),
                f(s.upper_fraction),
                f(s.median_cross_norm),
                f(s.median_cross_ratio),
            ]
        }),
    )
}

pub fn write_certify_csv<W: Write>(out: W, rows: &[CertifyRow]) -> Result<()> {
    let header = ["d", "trial", "status", "operator_norm", "rho", "R", "violation", "k_diag"];
    table(
        out,
        &header,
        rows.iter().map(|r| {
            vec![
                r.d.to_string(),
                r.trial.to_string(),
                r.status.clone(),
                f(r.operator_norm),
                f(r.rho),
                f(r.radius),
                f(r.violation),
                r.k_diag.iter().map(|&k| f(k)).collect::<Vec<_>>().join(";"),
            ]
        }),
    )
}

pub fn write_lemma_csv<W: Write>(out: W, rows: &[LemmaRow]) -> Result<()> {
    let header = [
        "family",
        "case",
        "d",
        "param",
        "value",
        "bound",
        "mc_estimate",
        "mc_stderr",
        "samples",
        "mc_consistent",
        "pass",
        "relaxed_pass",
    ];
    table(
        out,
        &header,
        rows.iter().map(|r| {
            vec![
                r.family.to_string(),
                r.case.clone(),
                r.d.to_string(),
                f(r.param),
                f(r.value),
                f(r.bound),
                f(r.mc_estimate),
                f(r.mc_stderr),
                r.samples.to_string(),
                r.mc_consistent.to_string(),
                r.pass.to_string(),
                r.relaxed_pass.to_string(),
            ]
        }),
    )
}

/// One row per state `x_0 … x_{n+1}`.
pub fn write_trajectory_csv<W: Write>(out: W, traj: &Trajectory) -> Result<()> {
    let mut header = vec!["t".to_string()];
    header.extend((0..traj.dim()).map(|j| format!("x{j}")));
    let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
    table(
        out,
        &header_refs,
        traj.states().enumerate().map(|(t, x)| {
            let mut row = vec![t.to_string()];
            row.extend(x.iter().map(|&v| f(v)));
            row
        }),
    )
}

/// Hex SHA-256 of the configuration text.
pub fn config_digest(text: &str) -> String {
    hex::encode(Sha256::digest(text.as_bytes()))
}

/// Sidecar metadata of one output file.
#[derive(Debug, Clone, Serialize)]
pub struct RunMeta {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub config_sha256: String,
    pub seed: u64,
}

impl RunMeta {
    pub fn new(command: &str, config_text: &str, seed: u64) -> Self {
        Self {
            tool: env!("CARGO_PKG_NAME").into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            config_sha256: config_digest(config_text),
            seed,
        }
    }
}

/// `<out>.meta.json`.
pub fn sidecar_path(out: &Path, suffix: &str) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

/// Writes `meta` next to `out` and returns the sidecar path.
pub fn write_meta(out: &Path, meta: &RunMeta) -> Result<PathBuf> {
    let path = sidecar_path(out, ".meta.json");
    let mut text = serde_json::to_string_pretty(meta)?;
    text.push('\n');
    std::fs::write(&path, text)?;
    Ok(path)
}
