//! End-to-end acceptance checks. Prints one verdict line per criterion and
//! exits non-zero when a criterion fails in an unexpected way.

mod common;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::{Command, ExitCode};
use std::time::Instant;

use glsysid::bench::{run_isometry_trials, run_lemma_suite, run_rate_sweep, ExperimentSpec, LemmaSuiteReport};
use glsysid::dynsys::simulate_from;
use glsysid::linalg;
use glsysid::par::Execution;
use glsysid::stability::{check_certificate, default_tolerance, find_certificate};
use glsysid::{LinkFunction, LyapunovCertificate, WeightMatrix};
use rand::Rng;

/// `Fail` is unexpected. `KnownFail` marks a claim shown false with a
/// concrete counterexample; the run still asserts the exact failure pattern.
enum Verdict {
    Pass(String),
    Fail(String),
    KnownFail(String),
}

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn load(name: &str) -> ExperimentSpec {
    ExperimentSpec::load(&configs().join(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

fn pass_if(ok: bool, detail: String) -> Verdict {
    if ok {
        Verdict::Pass(detail)
    } else {
        Verdict::Fail(detail)
    }
}

fn c1_certificate_soundness() -> Verdict {
    let mut r = common::rng_for("acceptance-c1", 0);
    let (mut certified, mut unsound, mut nonneg, mut untight) = (0, 0, 0, 0);
    let mut worst_rel = 0.0f64;
    for i in 0..1000 {
        let d = 2 + i % 7;
        let is_nonneg = i % 2 == 0;
        let target = if is_nonneg { r.random_range(0.05..0.999) } else { r.random_range(0.05..1.5) };
        let theta = if is_nonneg {
            common::nonneg_theta(&mut r, d, target)
        } else {
            let g = common::gaussian_matrix(&mut r, d, d);
            let sr = linalg::spectral_radius(&g);
            WeightMatrix::new(g * (target / sr)).unwrap()
        };
        let Some(cert) = find_certificate(&theta).unwrap() else {
            if is_nonneg {
                untight += 1;
            }
            continue;
        };
        certified += 1;
        if !check_certificate(&theta, &cert, default_tolerance(&theta, &cert)).unwrap().holds {
            unsound += 1;
        }
        if is_nonneg {
            nonneg += 1;
            let sr = linalg::spectral_radius(theta.as_matrix());
            let rel = (cert.rho() - sr * sr).abs() / (sr * sr);
            worst_rel = worst_rel.max(rel);
            if rel > 1e-6 {
                untight += 1;
            }
        }
    }
    pass_if(
        unsound == 0 && untight == 0 && nonneg == 500,
        format!(
            "{certified}/1000 certified, {unsound} unsound; nonnegative: {nonneg}/500 certified, max |rho - sr^2|/sr^2 = {worst_rel:.1e}"
        ),
    )
}

fn c2_relu_counterexample() -> Verdict {
    let theta = WeightMatrix::from_rows(&[vec![1.0, 1.0], vec![-1.0, -1.0]]).unwrap();
    let e1 = [1.0, 0.0];
    let orbit = simulate_from(&theta, &LinkFunction::Relu, &e1, 100).unwrap();
    let drift = orbit.iter().map(|x| linalg::norm(&[x[0] - e1[0], x[1] - e1[1]])).fold(0.0, f64::max);
    let cert = LyapunovCertificate::identity(2, 0.99).unwrap();
    let check = check_certificate(&theta, &cert, default_tolerance(&theta, &cert)).unwrap();
    pass_if(
        drift <= 1e-12 && !check.holds,
        format!("max ||f^k(e1) - e1|| = {drift:.1e} over 100 steps; K=I, rho=0.99 violation {:.3}", check.violation),
    )
}

fn c3_isometry() -> Verdict {
    let spec = load("isometry.toml");
    let res = run_isometry_trials(&spec, spec.seed.unwrap(), Execution::Parallel).unwrap();
    let rows: Vec<_> = res.rows.iter().filter(|r| r.n == 4096).collect();
    let rho_ok = rows.iter().all(|r| r.rho <= 0.25 + 1e-12);
    let both = rows.iter().filter(|r| r.lower_ok && r.upper_ok).count();
    pass_if(
        rows.len() == 100 && rho_ok && both >= 95,
        format!(
            "d=4, n=4096: {both}/{} trials with lambda_min >= 1/4 and lambda_max <= 4R (rho <= 0.25: {rho_ok})",
            rows.len()
        ),
    )
}

fn c4_fast_rate() -> Verdict {
    let spec = load("leaky_fast_sweep.toml");
    let res = run_rate_sweep(&spec, spec.seed.unwrap(), Execution::Parallel).unwrap();
    let slope = res.slopes[0].param_slope;
    let rho_ok = res.rows.iter().all(|r| r.rho <= 0.5);

    let control = load("identity_sweep.toml");
    let ctl = run_rate_sweep(&control, control.seed.unwrap(), Execution::Parallel).unwrap();
    let top: Vec<_> = ctl.rows.iter().filter(|r| r.n == 16384).collect();
    let glm = linalg::median(&top.iter().map(|r| r.param_err_sq).collect::<Vec<_>>());
    let ols = linalg::median(&top.iter().map(|r| r.ols_err_sq).collect::<Vec<_>>());
    pass_if(
        (-1.25..=-0.75).contains(&slope) && rho_ok && res.skipped.is_empty() && glm <= 3.0 * ols,
        format!(
            "leaky slope {slope:.3} in [-1.25, -0.75]; identity control at n=2^14: glmtron {glm:.3e} vs OLS {ols:.3e}"
        ),
    )
}

fn c5_relu_rate() -> Verdict {
    let spec = load("relu_sweep.toml");
    let res = run_rate_sweep(&spec, spec.seed.unwrap(), Execution::Parallel).unwrap();
    let slope = res.slopes[0].param_slope;
    pass_if(
        (-1.35..=-0.65).contains(&slope) && res.skipped.is_empty(),
        format!("relu slope {slope:.3} in [-1.35, -0.65]"),
    )
}

fn c6_slow_rate() -> Verdict {
    let spec = load("relu_slow_option2.toml");
    let res = run_rate_sweep(&spec, spec.seed.unwrap(), Execution::Parallel).unwrap();
    let s = &res.slopes[0];
    let decreasing = s.mean_pred_err.windows(2).filter(|w| w[1] < w[0]).count();
    pass_if(
        s.pred_slope <= -0.4,
        format!(
            "mean prediction error slope {:.3} <= -0.4 ({} of {} consecutive steps decrease)",
            s.pred_slope,
            decreasing,
            s.mean_pred_err.len() - 1
        ),
    )
}

fn family(report: &LemmaSuiteReport, name: &str) -> Vec<glsysid::bench::LemmaRow> {
    report.rows.iter().filter(|r| r.family == name).cloned().collect()
}

fn c7_lemma_suite() -> Verdict {
    let spec = load("lemmas.toml");
    let report = run_lemma_suite(&spec.lemmas, spec.seed.unwrap(), Execution::Parallel);
    let kernel = family(&report, "kernel");
    let gap = family(&report, "gap");
    let shifted = family(&report, "shifted");
    let trig = family(&report, "trig");
    let count = |rows: &[glsysid::bench::LemmaRow]| rows.iter().filter(|r| r.pass).count();

    let kernel_random: Vec<_> = kernel.iter().filter(|r| r.case.starts_with("random")).collect();
    let kernel_ok = kernel_random.len() == 100
        && kernel_random.iter().all(|r| r.pass && r.samples == 1_000_000)
        && kernel.iter().all(|r| r.pass);
    let gap_ok = gap.iter().filter(|r| r.case.starts_with("random")).count() == 500 && gap.iter().all(|r| r.pass);
    let tight_ok = gap.iter().any(|r| r.case == "opposite" && r.pass && (r.value - r.bound).abs() <= 1e-12)
        && trig.iter().any(|r| r.case == "orthogonal" && r.pass && (r.value - r.bound).abs() <= 1e-12);

    let shifted_fail: Vec<_> = shifted.iter().filter(|r| !r.pass).collect();
    let trig_fail: Vec<_> = trig.iter().filter(|r| !r.pass).collect();
    // the failures must be exactly the documented ones: shifted rows fail only
    // against the 1/4 constant, trig rows only at obtuse angles
    let pattern_ok = shifted.iter().all(|r| r.relaxed_pass)
        && trig.iter().all(|r| r.relaxed_pass)
        && trig_fail.iter().all(|r| r.param > std::f64::consts::FRAC_PI_2);

    let detail = format!(
        "kernel {}/{}, gap {}/{}, shifted {}/{} (relaxed 1/16: {}/{}), trig {}/{} (coefficient theta/pi: {}/{})",
        count(&kernel),
        kernel.len(),
        count(&gap),
        gap.len(),
        count(&shifted),
        shifted.len(),
        shifted.iter().filter(|r| r.relaxed_pass).count(),
        shifted.len(),
        count(&trig),
        trig.len(),
        trig.iter().filter(|r| r.relaxed_pass).count(),
        trig.len(),
    );
    if !(kernel_ok && gap_ok && tight_ok && pattern_ok) {
        Verdict::Fail(detail)
    } else if shifted_fail.is_empty() && trig_fail.is_empty() {
        Verdict::Pass(detail)
    } else {
        Verdict::KnownFail(format!(
            "{detail}; the trig inequality fails for obtuse angles (u = -v unit: 2 <= 1) and the shifted bound fails \
             e.g. at u = -e1, v = -2e1, mu = e1 (0.0754 < 0.0920)"
        ))
    }
}

fn c8_cross_term() -> Verdict {
    let spec = load("cross_term.toml");
    let res = run_isometry_trials(&spec, spec.seed.unwrap(), Execution::Parallel).unwrap();
    let slope = res.cross_slopes[0].1;
    let max_ratio = res.rows.iter().map(|r| r.cross_norm / r.mu_bound).fold(0.0, f64::max);
    let medians: Vec<f64> = res.summary.iter().map(|s| s.median_cross_ratio).collect();
    let spread = medians.iter().copied().fold(0.0, f64::max) / medians.iter().copied().fold(f64::INFINITY, f64::min);
    pass_if(
        (slope + 0.5).abs() <= 0.15 && max_ratio <= 1.0 && spread <= 2.0 && res.skipped.is_empty(),
        format!(
            "median cross-term slope {slope:.3} (target -0.5 +- 0.15); max ratio to mu {max_ratio:.3}; \
             median ratio spread across n {spread:.2}"
        ),
    )
}

const C9_CONFIGS: [(&str, &str); 6] = [
    ("simulate", "simulate.toml"),
    ("certify", "certify.toml"),
    ("fit", "single_fit.toml"),
    ("rate-sweep", "c9_sweep.toml"),
    ("isometry", "c9_isometry.toml"),
    ("verify-lemmas", "c9_lemmas.toml"),
];

fn run_cli(dir: &Path, sub: &str, config: &Path, out: &Path, extra: &[&str]) -> (i32, Vec<(String, Vec<u8>)>) {
    let status = Command::new(env!("CARGO_BIN_EXE_glsysid"))
        .arg(sub)
        .arg("--config")
        .arg(config)
        .arg("--seed")
        .arg("5")
        .arg("--out")
        .arg(out)
        .args(extra)
        .stderr(std::process::Stdio::null())
        .status()
        .expect("spawn CLI");
    let stem = out.file_name().unwrap().to_string_lossy().to_string();
    let mut files: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.file_name().unwrap().to_string_lossy().starts_with(&stem))
        .map(|p| (p.file_name().unwrap().to_string_lossy().replacen(&stem, "", 1), std::fs::read(&p).unwrap()))
        .collect();
    files.sort();
    (status.code().unwrap_or(-1), files)
}

fn c9_determinism() -> Verdict {
    let dir = tempfile::tempdir().unwrap();
    let small = configs().join("small");
    let mut mismatches = Vec::new();
    let mut checked = 0;
    for (sub, cfg) in C9_CONFIGS {
        let path = if small.join(cfg).exists() { small.join(cfg) } else { configs().join(cfg) };
        let mut runs = BTreeMap::new();
        for (label, extra) in
            [("a", &[][..]), ("b", &[][..]), ("seq", &["--sequential"][..]), ("t1", &["--threads", "1"][..])]
        {
            let out = dir.path().join(format!("{sub}-{label}.out"));
            runs.insert(label, run_cli(dir.path(), sub, &path, &out, extra));
        }
        let reference = &runs["a"];
        // verify-lemmas exits 2 on the refuted trig rows; any other code is a failure
        let expected_exit = if sub == "verify-lemmas" { 2 } else { 0 };
        if reference.1.len() < 2 || reference.0 != expected_exit {
            mismatches.push(format!("{sub}: exit {} with {} files", reference.0, reference.1.len()));
        }
        for (label, run) in &runs {
            if run != reference {
                mismatches.push(format!("{sub}: run {label} differs"));
            }
        }
        checked += reference.1.len();
    }
    pass_if(
        mismatches.is_empty(),
        if mismatches.is_empty() {
            format!("6 subcommands x 4 runs (repeat, --sequential, --threads 1): {checked} files byte-identical")
        } else {
            mismatches.join("; ")
        },
    )
}

fn main() -> ExitCode {
    type Criterion = (&'static str, fn() -> Verdict);
    let criteria: [Criterion; 9] = [
        ("C1 certificate soundness", c1_certificate_soundness),
        ("C2 relu counterexample", c2_relu_counterexample),
        ("C3 covariance isometry", c3_isometry),
        ("C4 fast rate", c4_fast_rate),
        ("C5 relu rate", c5_relu_rate),
        ("C6 slow rate (option II)", c6_slow_rate),
        ("C7 lemma suite", c7_lemma_suite),
        ("C8 cross-term diagnostic", c8_cross_term),
        ("C9 cli determinism", c9_determinism),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut unexpected = 0;
    for (name, f) in criteria {
        if !filter.is_empty() && !filter.iter().any(|p| name.contains(p.as_str())) {
            continue;
        }
        let start = Instant::now();
        let verdict = f();
        let secs = start.elapsed().as_secs_f64();
        let (tag, detail) = match verdict {
            Verdict::Pass(d) => ("PASS", d),
            Verdict::KnownFail(d) => ("FAIL", format!("{d} [claim refuted; failure pattern verified]")),
            Verdict::Fail(d) => {
                unexpected += 1;
                ("FAIL", d)
            }
        };
        println!("{name:<28} {tag}  {detail} ({secs:.1}s)");
    }
    if unexpected == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
