//! Monte-Carlo sweeps comparing STFT and Fourier recovery, the
//! truncation-convergence study, and result emission (CSV and SVG).

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use crate::error::{Error, Result};
use crate::gabor::{forward_stft, fourier_coefficients};
use crate::measure::{random_instance, support_error, tv_norm, InstanceSpec, SpikeTrain};
use crate::recover::{recover, recover_fourier_baseline, RecoveryConfig, RecoveryStatus};
use crate::sdpsolve::{SolverConfig, SolverStatus};

/// Support error threshold for a successful trial.
pub const SUCCESS_THRESHOLD: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "STFT")]
    Stft,
    Fourier,
}

impl Method {
    pub fn label(self) -> &'static str {
        match self {
            Method::Stft => "STFT",
            Method::Fourier => "Fourier",
        }
    }
}

fn default_methods() -> Vec<Method> {
    vec![Method::Stft, Method::Fourier]
}

fn default_workers() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    #[serde(rename = "K")]
    pub k: usize,
    #[serde(rename = "N_values")]
    pub n_values: Vec<usize>,
    pub sigma_values: Vec<f64>,
    pub delta_grid: Vec<f64>,
    pub trials_per_cell: usize,
    pub seed: u64,
    #[serde(default = "default_workers")]
    pub workers: usize,
    #[serde(default = "default_methods")]
    pub methods: Vec<Method>,
    #[serde(default)]
    pub solver: SolverConfig,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        if self.trials_per_cell == 0 {
            return Err(Error::Config("trials_per_cell must be at least 1".into()));
        }
        if self.delta_grid.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::Config("delta_grid must be sorted ascending".into()));
        }
        if self.delta_grid.iter().any(|&d| !(d > 0.0 && d < 0.5)) {
            return Err(Error::Config("every delta must lie in (0, 1/2)".into()));
        }
        if self.sigma_values.iter().any(|&s| !(s > 0.0 && s < 1.0)) {
            return Err(Error::Config("every sigma must lie in (0, 1)".into()));
        }
        if self.methods.contains(&Method::Stft)
            && (self.sigma_values.is_empty() || self.n_values.is_empty())
        {
            return Err(Error::Config("STFT cells need sigma_values and N_values".into()));
        }
        if self.workers == 0 {
            return Err(Error::Config("workers must be at least 1".into()));
        }
        Ok(())
    }
}

/// How a trial ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Success,
    WrongSupport,
    SolverMaxIters,
    RecoveryFailed,
    Error,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub delta: f64,
    pub method: Method,
    pub sigma: f64,
    #[serde(rename = "N")]
    pub n: usize,
    pub success: bool,
    pub support_err: f64,
    pub duality_gap: f64,
    pub wall_time_s: f64,
    pub seed: u64,
    pub outcome: Outcome,
}

impl TrialRecord {
    /// Equality ignoring wall time.
    pub fn same_result(&self, other: &TrialRecord) -> bool {
        let eq = |a: f64, b: f64| a == b || (a.is_nan() && b.is_nan());
        self.delta == other.delta
            && self.method == other.method
            && self.sigma == other.sigma
            && self.n == other.n
            && self.success == other.success
            && eq(self.support_err, other.support_err)
            && eq(self.duality_gap, other.duality_gap)
            && self.seed == other.seed
            && self.outcome == other.outcome
    }
}

fn splitmix(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Seed of trial `trial` in delta cell `cell`. All methods of a cell share
/// the instance, so comparisons are paired.
pub fn trial_seed(sweep_seed: u64, cell: usize, trial: usize) -> u64 {
    splitmix(splitmix(splitmix(sweep_seed) ^ cell as u64) ^ trial as u64)
}

#[derive(Debug, Clone, Copy)]
struct Job {
    cell: usize,
    delta: f64,
    method: Method,
    sigma: f64,
    n: usize,
    trial: usize,
}

fn jobs(spec: &SweepSpec) -> Vec<Job> {
    let mut out = Vec::new();
    for (cell, &delta) in spec.delta_grid.iter().enumerate() {
        for &method in &spec.methods {
            let params: Vec<(f64, usize)> = match method {
                Method::Stft => spec
                    .sigma_values
                    .iter()
                    .flat_map(|&s| spec.n_values.iter().map(move |&n| (s, n)))
                    .collect(),
                Method::Fourier => vec![(0.0, 0)],
            };
            for (sigma, n) in params {
                for trial in 0..spec.trials_per_cell {
                    out.push(Job {
                        cell,
                        delta,
                        method,
                        sigma,
                        n,
                        trial,
                    });
                }
            }
        }
    }
    out
}

/// Outcome of recovering `truth` with one method.
pub fn run_trial(
    truth: &SpikeTrain,
    k: usize,
    method: Method,
    sigma: f64,
    n: usize,
    solver: &SolverConfig,
) -> (Outcome, f64, f64) {
    let result = match method {
        Method::Stft => {
            let mut cfg = RecoveryConfig::new(k, n);
            cfg.sigma = sigma;
            cfg.solver = *solver;
            cfg.window()
                .and_then(|w| recover(&forward_stft(truth, &w, k), &cfg))
        }
        Method::Fourier => {
            let mut cfg = RecoveryConfig::new(k, 0);
            cfg.solver = *solver;
            recover_fourier_baseline(&fourier_coefficients(truth, k), &cfg)
        }
    };
    let r = match result {
        Ok(r) => r,
        Err(_) => return (Outcome::Error, f64::INFINITY, f64::NAN),
    };
    let gap = (r.solver.objective - tv_norm(truth)).abs();
    if r.solver.status == SolverStatus::MaxIters {
        let err = support_error(&r.estimate, truth).unwrap_or(f64::INFINITY);
        return (Outcome::SolverMaxIters, err, gap);
    }
    if r.status == RecoveryStatus::Failed {
        return (Outcome::RecoveryFailed, f64::INFINITY, gap);
    }
    let err = support_error(&r.estimate, truth).unwrap_or(f64::INFINITY);
    let outcome = if err <= SUCCESS_THRESHOLD {
        Outcome::Success
    } else {
        Outcome::WrongSupport
    };
    (outcome, err, gap)
}

fn run_job(spec: &SweepSpec, job: Job) -> TrialRecord {
    let seed = trial_seed(spec.seed, job.cell, job.trial);
    let start = Instant::now();
    let (outcome, support_err, duality_gap) =
        match random_instance(&InstanceSpec::new(job.delta, seed)) {
            Ok(truth) => run_trial(&truth, spec.k, job.method, job.sigma, job.n, &spec.solver),
            Err(_) => (Outcome::Error, f64::INFINITY, f64::NAN),
        };
    TrialRecord {
        delta: job.delta,
        method: job.method,
        sigma: job.sigma,
        n: job.n,
        success: outcome == Outcome::Success,
        support_err,
        duality_gap,
        wall_time_s: start.elapsed().as_secs_f64(),
        seed,
        outcome,
    }
}

/// Runs every (delta, method, sigma, N) cell. Records come back in job
/// order regardless of the number of workers.
pub fn run_sweep(spec: &SweepSpec) -> Result<Vec<TrialRecord>> {
    spec.validate()?;
    let jobs = jobs(spec);
    if spec.workers == 1 {
        return Ok(jobs.into_iter().map(|j| run_job(spec, j)).collect());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(spec.workers)
        .build()
        .map_err(|e| Error::Config(e.to_string()))?;
    Ok(pool.install(|| jobs.par_iter().map(|&j| run_job(spec, j)).collect()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    #[serde(rename = "N")]
    pub n: usize,
    pub support_err: f64,
    /// Optimal value of the truncated problem, i.e. the TV norm of its
    /// minimizer.
    pub tv_estimate: f64,
    /// TV norm of the extracted spike train.
    pub estimate_tv: f64,
    pub status: SolverStatus,
}

/// Recovers `m` at each truncation level.
pub fn n_convergence_study(
    m: &SpikeTrain,
    k: usize,
    sigma: f64,
    n_values: &[usize],
    solver: &SolverConfig,
) -> Result<Vec<ConvergenceRow>> {
    if n_values.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Config("N_values must be strictly ascending".into()));
    }
    n_values
        .iter()
        .map(|&n| {
            let mut cfg = RecoveryConfig::new(k, n);
            cfg.sigma = sigma;
            cfg.solver = *solver;
            let w = cfg.window()?;
            let r = recover(&forward_stft(m, &w, k), &cfg)?;
            let support_err = if r.status == RecoveryStatus::Recovered {
                support_error(&r.estimate, m).unwrap_or(f64::INFINITY)
            } else {
                f64::INFINITY
            };
            Ok(ConvergenceRow {
                n,
                support_err,
                tv_estimate: r.solver.objective,
                estimate_tv: tv_norm(&r.estimate),
                status: r.solver.status,
            })
        })
        .collect()
}

/// CSV with header
/// `delta,method,sigma,N,success,support_err,duality_gap,wall_time_s,seed,outcome`.
pub fn write_results(records: &[TrialRecord], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    if records.is_empty() {
        w.write_record([
            "delta",
            "method",
            "sigma",
            "N",
            "success",
            "support_err",
            "duality_gap",
            "wall_time_s",
            "seed",
            "outcome",
        ])?;
    }
    for r in records {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_results(path: &Path) -> Result<Vec<TrialRecord>> {
    let mut r = csv::Reader::from_path(path)?;
    let mut out = Vec::new();
    for rec in r.deserialize() {
        out.push(rec?);
    }
    Ok(out)
}

/// One curve of the success chart.
#[derive(Debug, Clone, PartialEq)]
pub struct SuccessCurve {
    pub label: String,
    /// `(delta, success rate)` sorted by delta.
    pub points: Vec<(f64, f64)>,
}

/// Success rate per delta, one curve per (method, sigma, N).
pub fn success_curves(records: &[TrialRecord]) -> Vec<SuccessCurve> {
    let mut keys: Vec<(Method, f64, usize)> = Vec::new();
    for r in records {
        let key = (r.method, r.sigma, r.n);
        if !keys.contains(&key) {
            keys.push(key);
        }
    }
    let n_stft = keys.iter().filter(|k| k.0 == Method::Stft).count();
    keys.iter()
        .map(|&(method, sigma, n)| {
            let mut deltas: Vec<f64> = Vec::new();
            let mut counts: Vec<(usize, usize)> = Vec::new();
            for r in records
                .iter()
                .filter(|r| r.method == method && r.sigma == sigma && r.n == n)
            {
                let i = match deltas.iter().position(|&d| d == r.delta) {
                    Some(i) => i,
                    None => {
                        deltas.push(r.delta);
                        counts.push((0, 0));
                        deltas.len() - 1
                    }
                };
                counts[i].0 += r.success as usize;
                counts[i].1 += 1;
            }
            let mut points: Vec<(f64, f64)> = deltas
                .iter()
                .zip(&counts)
                .map(|(&d, &(s, t))| (d, s as f64 / t as f64))
                .collect();
            points.sort_by(|a, b| a.0.total_cmp(&b.0));
            let label = if method == Method::Stft && n_stft > 1 {
                format!("STFT sigma={sigma} N={n}")
            } else {
                method.label().to_string()
            };
            SuccessCurve { label, points }
        })
        .collect()
}

/// Static SVG chart of success rate against delta.
pub fn render_success_curve(records: &[TrialRecord], path: &Path) -> Result<()> {
    std::fs::write(path, success_svg(records))?;
    Ok(())
}

pub fn success_svg(records: &[TrialRecord]) -> String {
    let curves = success_curves(records);
    let (w, h) = (640.0, 400.0);
    let (left, right, top, bottom) = (60.0, 20.0, 20.0, 50.0);
    let pw = w - left - right;
    let ph = h - top - bottom;
    let xs = curves.iter().flat_map(|c| c.points.iter().map(|p| p.0));
    let (mut xmin, mut xmax) = (f64::INFINITY, f64::NEG_INFINITY);
    for x in xs {
        xmin = xmin.min(x);
        xmax = xmax.max(x);
    }
    if !xmin.is_finite() {
        xmin = 0.0;
        xmax = 1.0;
    }
    if xmax <= xmin {
        xmax = xmin + 1.0;
    }
    let sx = |x: f64| left + (x - xmin) / (xmax - xmin) * pw;
    let sy = |y: f64| top + (1.0 - y) * ph;
    let colors = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#
    );
    let _ = writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<path d="M{l} {t} V{b} H{r}" fill="none" stroke="black"/>"#,
        l = left,
        t = top,
        b = top + ph,
        r = left + pw
    );
    for i in 0..=4 {
        let y = i as f64 / 4.0;
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" font-size="11" text-anchor="end">{:.2}</text>"#,
            left - 6.0,
            sy(y) + 4.0,
            y
        );
        let x = xmin + (xmax - xmin) * i as f64 / 4.0;
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" font-size="11" text-anchor="middle">{:.4}</text>"#,
            sx(x),
            top + ph + 16.0,
            x
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" font-size="12" text-anchor="middle">minimum separation</text>"#,
        left + pw / 2.0,
        h - 10.0
    );
    let _ = writeln!(
        s,
        r#"<text x="14" y="{}" font-size="12" text-anchor="middle" transform="rotate(-90 14 {})">success rate</text>"#,
        top + ph / 2.0,
        top + ph / 2.0
    );
    for (i, c) in curves.iter().enumerate() {
        let color = colors[i % colors.len()];
        let pts: Vec<String> = c
            .points
            .iter()
            .map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y)))
            .collect();
        let _ = writeln!(
            s,
            r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="2"/>"#,
            pts.join(" ")
        );
        let ly = top + 14.0 + 16.0 * i as f64;
        let _ = writeln!(
            s,
            r#"<line x1="{}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"/>"#,
            left + 10.0,
            left + 30.0
        );
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" font-size="12">{}</text>"#,
            left + 36.0,
            ly + 4.0,
            c.label
        );
    }
    s.push_str("</svg>\n");
    s
}
