//! Command-line front end for the experiment harness.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use glsysid::bench::{
    certify_cells, run_isometry_trials, run_lemma_suite, run_rate_sweep, run_single_fit, sidecar_path, simulate_cell,
    write_certify_csv, write_isometry_csv, write_isometry_summary_csv, write_lemma_csv, write_meta,
    write_rate_sweep_csv, write_slopes_csv, write_trajectory_csv, ExperimentKind, ExperimentSpec, RunMeta,
};
use glsysid::par::{self, Execution};
use glsysid::Error;

#[derive(Parser)]
#[command(name = "glsysid", version, about = "Single-trajectory identification of generalized linear systems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one trajectory (first dimension and horizon of the config).
    Simulate(Common),
    /// Search diagonal Lyapunov certificates for generated matrices.
    Certify(Common),
    /// One end-to-end fit with diagnostics, written as JSON.
    Fit(Common),
    /// Error-versus-n sweep with fitted log-log slopes.
    RateSweep(Common),
    /// Covariance isometry and cross-term trials.
    Isometry(Common),
    /// Closed-form and Monte Carlo checks of the Gaussian/ReLU moment results.
    VerifyLemmas(Common),
}

#[derive(Args)]
struct Common {
    /// TOML experiment description.
    #[arg(long)]
    config: PathBuf,
    /// Master seed; overrides `seed` in the config (default 0).
    #[arg(long)]
    seed: Option<u64>,
    /// Output file; defaults to the config's `output_path`, else stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (0 = rayon default).
    #[arg(long, default_value_t = 0)]
    threads: usize,
    /// Run cells one after another on the calling thread.
    #[arg(long)]
    sequential: bool,
}

/// Failure of a run: configuration/runtime errors or violated assertions.
enum Failure {
    Error(Error),
    Assertion(Vec<String>),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Error(e)
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Error(e.into())
    }
}

struct Context {
    name: &'static str,
    spec: ExperimentSpec,
    config_text: String,
    seed: u64,
    out: Option<PathBuf>,
    exec: Execution,
}

impl Context {
    fn load(name: &'static str, args: &Common) -> Result<Self, Failure> {
        let config_text = std::fs::read_to_string(&args.config)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", args.config.display())))?;
        let spec = ExperimentSpec::from_toml_str(&config_text)?;
        let seed = args.seed.or(spec.seed).unwrap_or(0);
        let out = args.out.clone().or_else(|| spec.output_path.clone());
        let exec = if args.sequential { Execution::Sequential } else { Execution::Parallel };
        Ok(Self { name, spec, config_text, seed, out, exec })
    }

    fn open(&self, path: Option<&Path>) -> Result<Box<dyn Write>, Failure> {
        match path {
            Some(p) => {
                if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                    std::fs::create_dir_all(dir)?;
                }
                Ok(Box::new(BufWriter::new(File::create(p)?)))
            }
            None => Ok(Box::new(io::stdout().lock())),
        }
    }

    fn main_output(&self) -> Result<Box<dyn Write>, Failure> {
        self.open(self.out.as_deref())
    }

    /// Secondary table next to the main output; skipped when writing to stdout.
    fn side_output(&self, suffix: &str) -> Result<Option<Box<dyn Write>>, Failure> {
        match &self.out {
            Some(p) => Ok(Some(self.open(Some(&sidecar_path(p, suffix)))?)),
            None => Ok(None),
        }
    }

    fn finish(&self) -> Result<(), Failure> {
        if let Some(p) = &self.out {
            write_meta(p, &RunMeta::new(self.name, &self.config_text, self.seed))?;
        }
        Ok(())
    }
}

fn simulate(ctx: &Context) -> Result<(), Failure> {
    let traj = simulate_cell(&ctx.spec, ctx.seed)?;
    let mut w = ctx.main_output()?;
    write_trajectory_csv(&mut w, &traj)?;
    w.flush()?;
    ctx.finish()
}

fn certify(ctx: &Context) -> Result<(), Failure> {
    let rows = certify_cells(&ctx.spec, ctx.seed, ctx.exec)?;
    let mut w = ctx.main_output()?;
    write_certify_csv(&mut w, &rows)?;
    w.flush()?;
    let inconclusive = rows.iter().filter(|r| r.status != "certified").count();
    log::info!("{} of {} matrices certified", rows.len() - inconclusive, rows.len());
    ctx.finish()
}

fn fit(ctx: &Context) -> Result<(), Failure> {
    ctx.spec.expect_kind(ExperimentKind::SingleFit)?;
    let report = run_single_fit(&ctx.spec, ctx.seed)?;
    let mut w = ctx.main_output()?;
    serde_json::to_writer_pretty(&mut w, &report).map_err(Error::from)?;
    writeln!(w)?;
    w.flush()?;
    ctx.finish()
}

fn rate_sweep(ctx: &Context) -> Result<(), Failure> {
    ctx.spec.expect_kind(ExperimentKind::RateSweep)?;
    let result = run_rate_sweep(&ctx.spec, ctx.seed, ctx.exec)?;
    let mut w = ctx.main_output()?;
    write_rate_sweep_csv(&mut w, &result.rows)?;
    w.flush()?;
    if let Some(mut s) = ctx.side_output(".slopes.csv")? {
        write_slopes_csv(&mut s, &result.slopes)?;
        s.flush()?;
    }
    for s in &result.slopes {
        log::info!("d={} param_slope={:.4} pred_slope={:.4}", s.d, s.param_slope, s.pred_slope);
    }
    ctx.finish()?;

    let a = &ctx.spec.assert;
    let mut violations = Vec::new();
    for s in &result.slopes {
        if a.param_slope_min.is_some_and(|m| !(s.param_slope >= m)) {
            violations.push(format!("d={}: param slope {} below {}", s.d, s.param_slope, a.param_slope_min.unwrap()));
        }
        if a.param_slope_max.is_some_and(|m| !(s.param_slope <= m)) {
            violations.push(format!("d={}: param slope {} above {}", s.d, s.param_slope, a.param_slope_max.unwrap()));
        }
        if a.pred_slope_max.is_some_and(|m| !(s.pred_slope <= m)) {
            violations.push(format!("d={}: pred slope {} above {}", s.d, s.pred_slope, a.pred_slope_max.unwrap()));
        }
    }
    check(violations)
}

fn isometry(ctx: &Context) -> Result<(), Failure> {
    ctx.spec.expect_kind(ExperimentKind::IsometryTrials)?;
    let result = run_isometry_trials(&ctx.spec, ctx.seed, ctx.exec)?;
    let mut w = ctx.main_output()?;
    write_isometry_csv(&mut w, &result.rows)?;
    w.flush()?;
    if let Some(mut s) = ctx.side_output(".summary.csv")? {
        write_isometry_summary_csv(&mut s, &result.summary)?;
        s.flush()?;
    }
    ctx.finish()?;

    let a = &ctx.spec.assert;
    let min_n = a.min_n.unwrap_or(0);
    let mut violations = Vec::new();
    for s in result.summary.iter().filter(|s| s.n >= min_n) {
        if let Some(m) = a.lower_fraction_min.filter(|&m| s.lower_fraction < m) {
            violations.push(format!("d={} n={}: lower fraction {} below {m}", s.d, s.n, s.lower_fraction));
        }
        if let Some(m) = a.upper_fraction_min.filter(|&m| s.upper_fraction < m) {
            violations.push(format!("d={} n={}: upper fraction {} below {m}", s.d, s.n, s.upper_fraction));
        }
    }
    check(violations)
}

fn verify_lemmas(ctx: &Context) -> Result<(), Failure> {
    ctx.spec.expect_kind(ExperimentKind::LemmaSuite)?;
    ctx.spec.validate_common()?;
    let report = run_lemma_suite(&ctx.spec.lemmas, ctx.seed, ctx.exec);
    let mut w = ctx.main_output()?;
    write_lemma_csv(&mut w, &report.rows)?;
    w.flush()?;
    ctx.finish()?;
    let violations = report
        .family_counts()
        .into_iter()
        .filter(|&(_, _, failed)| failed > 0)
        .map(|(family, cases, failed)| format!("{family}: {failed} of {cases} cases failed"))
        .collect();
    check(violations)
}

fn check(violations: Vec<String>) -> Result<(), Failure> {
    if violations.is_empty() {
        Ok(())
    } else {
        Err(Failure::Assertion(violations))
    }
}

type Action = fn(&Context) -> Result<(), Failure>;

fn run(cli: Cli) -> Result<(), Failure> {
    let (name, args, action): (&'static str, &Common, Action) = match &cli.command {
        Command::Simulate(a) => ("simulate", a, simulate),
        Command::Certify(a) => ("certify", a, certify),
        Command::Fit(a) => ("fit", a, fit),
        Command::RateSweep(a) => ("rate-sweep", a, rate_sweep),
        Command::Isometry(a) => ("isometry", a, isometry),
        Command::VerifyLemmas(a) => ("verify-lemmas", a, verify_lemmas),
    };
    let ctx = Context::load(name, args)?;
    if args.threads > 0 {
        par::with_threads(args.threads, || action(&ctx))
    } else {
        action(&ctx)
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Error(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
        Err(Failure::Assertion(v)) => {
            for line in v {
                eprintln!("assertion failed: {line}");
            }
            ExitCode::from(2)
        }
    }
}
