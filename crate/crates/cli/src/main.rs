//! `superres` command-line interface.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use num_complex::Complex64;
use serde_json::{json, Value};

use superres::bench::{read_results, render_success_curve, run_sweep, write_results, SweepSpec};
use superres::certificate::{
    certificate_modulus_on_grid, solve_certificate, verification_grid, verify_certificate,
    CertificateProblem, KernelSpec,
};
use superres::gabor::{
    default_truncation, forward_stft, fourier_coefficients, full_inversion_partial_sum,
    DualPolynomial, Measurements, WindowSpec,
};
use superres::io::to_json_string;
use superres::measure::{random_instance, support_error, tv_norm, InstanceSpec, SpikeTrain};
use superres::recover::{
    default_sigma, recover, recover_fourier_baseline, RecoveryConfig, RecoveryResult,
    RecoveryStatus,
};
use superres::sdpsolve::SolverStatus;

#[derive(Parser, Debug)]
#[command(name = "superres", version, about = "Spike recovery from STFT measurements")]
#[command(arg_required_else_help = true)]
struct Cli {
    /// File of `key = value` lines supplying defaults for subcommand flags.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Diagnostics on stderr: error, warn, info or debug (also SUPERRES_LOG).
    #[arg(long, global = true)]
    log_level: Option<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a random spike train with minimum separation `delta`.
    Gen(GenArgs),
    /// Compute STFT (or plain Fourier) measurements of a spike train.
    Measure(MeasureArgs),
    /// Recover a spike train from measurements.
    Recover(RecoverArgs),
    /// Build and verify an interpolating dual certificate.
    Certify(CertifyArgs),
    /// Run a Monte-Carlo separation sweep.
    Sweep(SweepArgs),
    /// Evaluate the full-measurement inversion partial sum.
    Invert(InvertArgs),
    /// Sample a dual polynomial on a grid.
    Plot(PlotArgs),
}

#[derive(Args, Debug)]
struct GenArgs {
    #[arg(long)]
    delta: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0.0)]
    amp_min: f64,
    #[arg(long, default_value_t = 1000.0)]
    amp_max: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct MeasureArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long = "K")]
    k: usize,
    #[arg(long = "N")]
    n: Option<usize>,
    #[arg(long)]
    sigma: Option<f64>,
    /// Emit plain Fourier coefficients as a single-column measurement.
    #[arg(long)]
    fourier: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct RecoverArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long = "K")]
    k: Option<usize>,
    #[arg(long = "N")]
    n: Option<usize>,
    #[arg(long)]
    sigma: Option<f64>,
    /// Treat the input as Fourier coefficients (written by `measure --fourier`).
    #[arg(long)]
    baseline_fourier: bool,
    /// Ground-truth spike train; prints the support error.
    #[arg(long)]
    truth: Option<PathBuf>,
    #[arg(long)]
    rho: Option<f64>,
    #[arg(long)]
    max_iters: Option<usize>,
    /// Writes the dual polynomial coefficients.
    #[arg(long)]
    dual_out: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct CertifyArgs {
    /// Comma-separated support points.
    #[arg(long, allow_hyphen_values = true)]
    support: Option<String>,
    /// Comma-separated unit signs, each `re` or `re:im`.
    #[arg(long, allow_hyphen_values = true)]
    signs: Option<String>,
    /// Spike train JSON; supplies support and signs.
    #[arg(long = "from")]
    from: Option<PathBuf>,
    /// Cutoff frequency; on the torus it must equal K + 1/2.
    #[arg(long)]
    fc: f64,
    #[arg(long)]
    sigma: Option<f64>,
    /// Use periodized kernels on the torus instead of the real line.
    #[arg(long)]
    torus: bool,
    #[arg(long, default_value_t = 1 << 16)]
    grid: usize,
    #[arg(long, default_value_t = 1e-3)]
    guard: f64,
    #[arg(long)]
    samples_csv: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SweepArgs {
    #[arg(long)]
    spec: PathBuf,
    #[arg(long)]
    out_csv: PathBuf,
    #[arg(long)]
    out_svg: Option<PathBuf>,
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Args, Debug)]
struct InvertArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long = "K")]
    k: usize,
    #[arg(long, allow_hyphen_values = true)]
    t: f64,
    #[arg(long, default_value_t = 0.05)]
    sigma: f64,
}

#[derive(Args, Debug)]
struct PlotArgs {
    #[arg(long)]
    dual_poly: PathBuf,
    #[arg(long, default_value_t = 4096)]
    grid: usize,
    #[arg(long)]
    out_csv: PathBuf,
}

/// Failure classes mapped to exit codes.
enum Failure {
    /// Exit 1: the computation ran but did not succeed.
    Recoverable(String),
    /// Exit 2: bad flags or malformed input.
    Usage(String),
}

type CmdResult = Result<(), Failure>;

fn usage<E: std::fmt::Display>(e: E) -> Failure {
    Failure::Usage(e.to_string())
}

#[derive(Clone, Copy, PartialEq, PartialOrd)]
enum Level {
    Error,
    Warn,
    Info,
    Debug,
}

struct Logger {
    level: Level,
}

impl Logger {
    fn new(flag: Option<&str>) -> Result<Self, String> {
        let env = std::env::var("SUPERRES_LOG").ok();
        let level = match flag.or(env.as_deref()).unwrap_or("warn") {
            "error" => Level::Error,
            "warn" => Level::Warn,
            "info" => Level::Info,
            "debug" => Level::Debug,
            other => return Err(format!("unknown log level {other}")),
        };
        Ok(Logger { level })
    }

    fn info(&self, msg: &str) {
        if self.level >= Level::Info {
            eprintln!("info: {msg}");
        }
    }

    fn warn(&self, msg: &str) {
        if self.level >= Level::Warn {
            eprintln!("warning: {msg}");
        }
    }
}

/// Reads `key = value` lines; `#` starts a comment.
fn parse_config(text: &str) -> Result<BTreeMap<String, String>, String> {
    let mut out = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| format!("config line {} is not `key = value`", i + 1))?;
        let v = v.trim().trim_matches('"');
        out.insert(k.trim().to_string(), v.to_string());
    }
    Ok(out)
}

/// Appends `--key value` for config keys not already given as flags.
fn merge_config(argv: Vec<String>) -> Result<Vec<String>, String> {
    let pos = argv.iter().position(|a| a == "--config");
    let path = match pos {
        Some(i) => argv
            .get(i + 1)
            .cloned()
            .ok_or("--config needs a path")?,
        None => match argv.iter().find_map(|a| a.strip_prefix("--config=")) {
            Some(p) => p.to_string(),
            None => return Ok(argv),
        },
    };
    let text = std::fs::read_to_string(&path).map_err(|e| format!("{path}: {e}"))?;
    let cfg = parse_config(&text)?;
    let mut argv = argv;
    for (k, v) in cfg {
        let flag = format!("--{k}");
        let present = argv
            .iter()
            .any(|a| *a == flag || a.starts_with(&format!("{flag}=")));
        if present {
            continue;
        }
        match v.as_str() {
            "true" => argv.push(flag),
            "false" => {}
            _ => {
                argv.push(flag);
                argv.push(v);
            }
        }
    }
    Ok(argv)
}

fn read_text(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| usage(format!("{}: {e}", path.display())))
}

fn emit(text: &str, out: Option<&Path>) -> CmdResult {
    match out {
        Some(p) => std::fs::write(p, text).map_err(|e| usage(format!("{}: {e}", p.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn json_text(v: &Value) -> Result<String, Failure> {
    to_json_string(v).map_err(usage)
}

fn cmd_gen(a: &GenArgs) -> CmdResult {
    let spec = InstanceSpec {
        delta: a.delta,
        amplitude_range: (a.amp_min, a.amp_max),
        rng_seed: a.seed,
    };
    let m = random_instance(&spec).map_err(usage)?;
    emit(&m.to_json().map_err(usage)?, a.out.as_deref())
}

fn cmd_measure(a: &MeasureArgs) -> CmdResult {
    let m = SpikeTrain::from_json(&read_text(&a.input)?).map_err(usage)?;
    let y = if a.fourier {
        Measurements {
            k: a.k,
            n: 0,
            y: fourier_coefficients(&m, a.k),
        }
    } else {
        let sigma = a.sigma.unwrap_or_else(|| default_sigma(a.k));
        let n = a.n.unwrap_or_else(|| default_truncation(sigma));
        let w = WindowSpec::new(sigma, n).map_err(usage)?;
        forward_stft(&m, &w, a.k)
    };
    emit(&y.to_json().map_err(usage)?, a.out.as_deref())
}

fn recovery_json(r: &RecoveryResult, truth: Option<&SpikeTrain>) -> Result<Value, Failure> {
    let estimate: Value = serde_json::to_value(&r.estimate).map_err(usage)?;
    let mut v = json!({
        "status": format!("{:?}", r.status),
        "estimate": estimate,
        "solver": {
            "status": format!("{:?}", r.solver.status),
            "objective": r.solver.objective,
            "iterations": r.solver.iterations,
            "primal_residual": r.solver.primal_residual,
            "dual_residual": r.solver.dual_residual,
            "rho": r.solver.rho,
            "inconsistency": r.solver.inconsistency,
        },
        "diagnostics": serde_json::to_value(&r.diagnostics).map_err(usage)?,
    });
    if let Some(t) = truth {
        let err = support_error(&r.estimate, t).map_err(usage)?;
        v["support_error"] = json!(if err.is_finite() { Value::from(err) } else { Value::from("inf") });
        v["truth_tv_norm"] = json!(tv_norm(t));
    }
    Ok(v)
}

fn cmd_recover(a: &RecoverArgs, log: &Logger) -> CmdResult {
    let y = Measurements::from_json(&read_text(&a.input)?).map_err(usage)?;
    if let Some(k) = a.k {
        if k != y.k {
            return Err(usage(format!("--K {k} does not match measurements with K = {}", y.k)));
        }
    }
    let truth = match &a.truth {
        Some(p) => Some(SpikeTrain::from_json(&read_text(p)?).map_err(usage)?),
        None => None,
    };
    let result = if a.baseline_fourier {
        if y.n != 0 {
            return Err(usage("--baseline-fourier expects measurements with N = 0"));
        }
        let mut cfg = RecoveryConfig::new(y.k, 0);
        apply_solver_flags(&mut cfg, a);
        recover_fourier_baseline(&y.y, &cfg)
    } else {
        if let Some(n) = a.n {
            if n != y.n {
                return Err(usage(format!("--N {n} does not match measurements with N = {}", y.n)));
            }
        }
        let mut cfg = RecoveryConfig::new(y.k, y.n);
        if let Some(s) = a.sigma {
            cfg.sigma = s;
        }
        apply_solver_flags(&mut cfg, a);
        log.info(&format!(
            "solving with K = {}, N = {}, sigma = {}",
            cfg.k, cfg.n, cfg.sigma
        ));
        recover(&y, &cfg)
    }
    .map_err(usage)?;
    log.info(&format!(
        "solver finished after {} iterations ({:?})",
        result.solver.iterations, result.solver.status
    ));
    if let Some(p) = &a.dual_out {
        let text = result.dual_poly.to_json().map_err(usage)?;
        emit(&text, Some(p))?;
    }
    let v = recovery_json(&result, truth.as_ref())?;
    if let Some(err) = v.get("support_error") {
        eprintln!("support_error = {err}");
    }
    emit(&json_text(&v)?, a.out.as_deref())?;
    if result.status == RecoveryStatus::Failed {
        return Err(Failure::Recoverable(
            result
                .diagnostics
                .failure
                .unwrap_or_else(|| "recovery failed".into()),
        ));
    }
    if result.solver.status == SolverStatus::MaxIters {
        log.warn("solver stopped at the iteration limit");
        return Err(Failure::Recoverable("solver did not converge".into()));
    }
    Ok(())
}

fn apply_solver_flags(cfg: &mut RecoveryConfig, a: &RecoverArgs) {
    if let Some(r) = a.rho {
        cfg.solver.rho = r;
    }
    if let Some(m) = a.max_iters {
        cfg.solver.max_iters = m;
    }
}

fn parse_list(s: &str) -> Result<Vec<&str>, Failure> {
    let items: Vec<&str> = s.split(',').map(str::trim).filter(|x| !x.is_empty()).collect();
    if items.is_empty() {
        return Err(usage("empty list"));
    }
    Ok(items)
}

fn parse_sign(s: &str) -> Result<Complex64, Failure> {
    let num = |x: &str| x.trim().parse::<f64>().map_err(|e| usage(format!("{x}: {e}")));
    match s.split_once(':') {
        Some((re, im)) => Ok(Complex64::new(num(re)?, num(im)?)),
        None => Ok(Complex64::new(num(s)?, 0.0)),
    }
}

fn cmd_certify(a: &CertifyArgs) -> CmdResult {
    let sigma = a.sigma.unwrap_or(0.25 / a.fc);
    let kernel = if a.torus {
        let k = (a.fc - 0.5).round();
        if k < 0.0 || (a.fc - 0.5 - k).abs() > 1e-9 {
            return Err(usage("--torus needs --fc = K + 1/2"));
        }
        KernelSpec::torus(sigma, k as usize)
    } else {
        KernelSpec::line(sigma, a.fc)
    }
    .map_err(usage)?;
    let prob = match (&a.from, &a.support) {
        (Some(p), None) => {
            let m = SpikeTrain::from_json(&read_text(p)?).map_err(usage)?;
            CertificateProblem::from_train(&m, kernel)
        }
        (None, Some(s)) => {
            let support = parse_list(s)?
                .into_iter()
                .map(|x| x.parse::<f64>().map_err(|e| usage(format!("{x}: {e}"))))
                .collect::<Result<Vec<_>, _>>()?;
            let signs = match &a.signs {
                Some(s) => parse_list(s)?
                    .into_iter()
                    .map(parse_sign)
                    .collect::<Result<Vec<_>, _>>()?,
                None => vec![Complex64::new(1.0, 0.0); support.len()],
            };
            CertificateProblem::new(support, signs, kernel)
        }
        _ => return Err(usage("give exactly one of --support or --from")),
    }
    .map_err(usage)?;
    let report = solve_certificate(&prob).map_err(|e| Failure::Recoverable(e.to_string()))?;
    let summary = verify_certificate(&report, &prob, a.grid, a.guard);
    println!("off_support_max = {:.6}", summary.off_support_max);
    println!("far_region_max = {:.6}", summary.far_region_max);
    println!("concavity_violations = {}", summary.concavity_violations);
    println!("interp_residual = {:.3e}", report.interp_residual);
    println!("deriv_residual = {:.3e}", report.deriv_residual);
    if !report.bound_chain.is_empty() {
        println!("bound chain:");
        for (k, v) in &report.bound_chain {
            println!("  {k:<18} {v:.6e}");
        }
    }
    if let Some(p) = &a.samples_csv {
        let grid = verification_grid(&prob, a.grid);
        let vals = certificate_modulus_on_grid(&report, &prob, a.grid);
        let mut text = String::from("t,abs\n");
        for (t, v) in grid.iter().zip(&vals) {
            text.push_str(&format!("{t},{v}\n"));
        }
        emit(&text, Some(p))?;
    }
    if let Some(p) = &a.out {
        let v = json!({
            "problem": serde_json::to_value(&prob).map_err(usage)?,
            "report": serde_json::to_value(&report).map_err(usage)?,
            "verification": serde_json::to_value(&summary).map_err(usage)?,
        });
        emit(&json_text(&v)?, Some(p))?;
    }
    if !summary.valid {
        return Err(Failure::Recoverable("certificate is not valid on the grid".into()));
    }
    Ok(())
}

fn cmd_sweep(a: &SweepArgs, log: &Logger) -> CmdResult {
    let mut spec: SweepSpec = serde_json::from_str(&read_text(&a.spec)?).map_err(usage)?;
    if let Some(w) = a.workers {
        spec.workers = w;
    }
    spec.validate().map_err(usage)?;
    log.info(&format!(
        "running {} delta cells with {} trials each",
        spec.delta_grid.len(),
        spec.trials_per_cell
    ));
    let records = run_sweep(&spec).map_err(usage)?;
    write_results(&records, &a.out_csv).map_err(usage)?;
    if let Some(p) = &a.out_svg {
        let back = read_results(&a.out_csv).map_err(usage)?;
        render_success_curve(&back, p).map_err(usage)?;
    }
    let ok = records.iter().filter(|r| r.success).count();
    println!("{ok} of {} trials succeeded", records.len());
    Ok(())
}

fn cmd_invert(a: &InvertArgs) -> CmdResult {
    let m = SpikeTrain::from_json(&read_text(&a.input)?).map_err(usage)?;
    let w = WindowSpec::new(a.sigma, 0).map_err(usage)?;
    let v = full_inversion_partial_sum(&m, &w, a.k, a.t, true);
    let out = json!({ "t": a.t, "K": a.k, "value": [v.re, v.im], "abs": v.norm() });
    emit(&json_text(&out)?, None)
}

fn cmd_plot(a: &PlotArgs) -> CmdResult {
    let p: DualPolynomial = serde_json::from_str(&read_text(&a.dual_poly)?).map_err(usage)?;
    if a.grid == 0 {
        return Err(usage("--grid must be positive"));
    }
    let vals = p.eval_grid(a.grid);
    let mut text = String::from("t,re,im,abs\n");
    for (j, v) in vals.iter().enumerate() {
        let t = j as f64 / a.grid as f64;
        text.push_str(&format!("{t},{},{},{}\n", v.re, v.im, v.norm()));
    }
    emit(&text, Some(&a.out_csv))
}

fn run(cli: &Cli) -> CmdResult {
    let log = Logger::new(cli.log_level.as_deref()).map_err(usage)?;
    match &cli.command {
        Command::Gen(a) => cmd_gen(a),
        Command::Measure(a) => cmd_measure(a),
        Command::Recover(a) => cmd_recover(a, &log),
        Command::Certify(a) => cmd_certify(a),
        Command::Sweep(a) => cmd_sweep(a, &log),
        Command::Invert(a) => cmd_invert(a),
        Command::Plot(a) => cmd_plot(a),
    }
}

fn main() -> ExitCode {
    let argv = match merge_config(std::env::args().collect()) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Recoverable(msg)) => {
            eprintln!("failure: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
