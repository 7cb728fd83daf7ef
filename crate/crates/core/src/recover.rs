//! Recovery pipeline: SDP solve, dual polynomial, support extraction and
//! amplitude estimation, plus the pure-Fourier baseline.

use faer::linalg::solvers::SolveLstsq;
use faer::Mat;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gabor::{window_coeffs, DualPolynomial, DualVariable, Measurements, WindowSpec};
use crate::measure::{tv_norm, wrap_unit, SpikeTrain};
use crate::sdpsolve::{solve_predual_sdp, solve_trig_sdp, SolverConfig, SolverResult};

/// Grid size used for the feasibility check of the dual polynomial.
pub const FEASIBILITY_GRID: usize = 1 << 16;

/// Settings of the recovery pipeline.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RecoveryConfig {
    pub k: usize,
    pub n: usize,
    pub sigma: f64,
    pub grid_size: usize,
    pub peak_threshold: f64,
    pub newton_iters: usize,
    pub merge_radius: f64,
    pub solver: SolverConfig,
}

impl RecoveryConfig {
    /// Defaults: `sigma = 1 / (4 (K + 1/2))`, grid `2^14` (or the next
    /// power of two reaching `4 (K + N)`).
    pub fn new(k: usize, n: usize) -> Self {
        let mut grid_size = 1 << 14;
        while grid_size < 4 * (k + n) {
            grid_size *= 2;
        }
        RecoveryConfig {
            k,
            n,
            sigma: default_sigma(k),
            grid_size,
            peak_threshold: 1.0 - 1e-4,
            newton_iters: 30,
            merge_radius: 1e-4,
            solver: SolverConfig::default(),
        }
    }

    /// Default configuration with `N` from the `g_N / g_0 <= 1e-12` rule.
    pub fn with_default_truncation(k: usize) -> Self {
        let n = crate::gabor::default_truncation(default_sigma(k));
        RecoveryConfig::new(k, n)
    }

    pub fn validate(&self) -> Result<()> {
        if self.grid_size < 4 * (self.k + self.n) {
            return Err(Error::Config(format!(
                "grid_size {} is below 4 (K + N) = {}",
                self.grid_size,
                4 * (self.k + self.n)
            )));
        }
        if !(self.peak_threshold > 0.0 && self.peak_threshold < 1.0) {
            return Err(Error::Config("peak_threshold must lie in (0, 1)".into()));
        }
        if !(self.merge_radius >= 0.0) {
            return Err(Error::Config("merge_radius must be nonnegative".into()));
        }
        Ok(())
    }

    pub fn window(&self) -> Result<WindowSpec> {
        WindowSpec::new(self.sigma, self.n)
    }
}

/// `sigma = 1 / (4 (K + 1/2))`.
pub fn default_sigma(k: usize) -> f64 {
    1.0 / (4.0 * (k as f64 + 0.5))
}

/// A refined local maximum of `|p|`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Peak {
    pub t: f64,
    pub modulus: f64,
    /// `d/dt |p(t)|^2` after refinement.
    pub slope: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RecoveryStatus {
    Recovered,
    Failed,
}

/// Per-run diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub peaks: Vec<Peak>,
    /// `|objective - tv_norm(estimate)|`.
    pub duality_gap: f64,
    /// `max |p|` on a `2^16` grid.
    pub dual_sup_norm: f64,
    /// Relative Frobenius residual of the amplitude fit.
    pub fit_residual: f64,
    pub inconsistency: f64,
    pub failure: Option<String>,
}

#[derive(Debug, Clone)]
pub struct RecoveryResult {
    pub status: RecoveryStatus,
    pub estimate: SpikeTrain,
    pub dual_poly: DualPolynomial,
    pub solver: SolverResult,
    pub diagnostics: Diagnostics,
}

/// Refined local maxima of `|p|` with modulus at least the threshold.
pub fn extract_peaks(p: &DualPolynomial, cfg: &RecoveryConfig) -> Result<Vec<Peak>> {
    let g = cfg.grid_size;
    let vals: Vec<f64> = p.eval_grid(g).iter().map(|v| v.norm()).collect();
    if vals.iter().all(|&v| v >= cfg.peak_threshold) {
        return Err(Error::Degenerate);
    }
    let h = 1.0 / g as f64;
    // Grid samples may sit below a true peak by O((2 pi L h)^2).
    let pre = cfg.peak_threshold - 0.05;
    let mut peaks = Vec::new();
    for j in 0..g {
        let prev = vals[(j + g - 1) % g];
        let next = vals[(j + 1) % g];
        if vals[j] < pre || vals[j] < prev || vals[j] <= next {
            continue;
        }
        let mut t = j as f64 * h;
        for _ in 0..cfg.newton_iters {
            let [v, d1, d2] = p.eval_with_derivatives(t);
            let f1 = 2.0 * (v.conj() * d1).re;
            let f2 = 2.0 * (d1.norm_sqr() + (v.conj() * d2).re);
            if !(f2 < 0.0) {
                break;
            }
            let step = (-f1 / f2).clamp(-h, h);
            t += step;
            if step.abs() < 1e-16 {
                break;
            }
        }
        let [v, d1, _] = p.eval_with_derivatives(t);
        let modulus = v.norm();
        if modulus >= cfg.peak_threshold {
            peaks.push(Peak {
                t: wrap_unit(t),
                modulus,
                slope: 2.0 * (v.conj() * d1).re,
            });
        }
    }
    Ok(merge_peaks(peaks, cfg.merge_radius))
}

/// Support of the dual polynomial: refined peak locations, sorted.
pub fn extract_support(p: &DualPolynomial, cfg: &RecoveryConfig) -> Result<Vec<f64>> {
    Ok(extract_peaks(p, cfg)?.iter().map(|pk| pk.t).collect())
}

fn merge_peaks(mut peaks: Vec<Peak>, radius: f64) -> Vec<Peak> {
    if peaks.len() < 2 {
        return peaks;
    }
    peaks.sort_by(|a, b| a.t.total_cmp(&b.t));
    // Rotate so that a cluster never straddles the 0/1 boundary.
    let n = peaks.len();
    let gap = |i: usize| {
        let a = peaks[i].t;
        let b = peaks[(i + 1) % n].t;
        (b - a).rem_euclid(1.0)
    };
    let start = match (0..n).find(|&i| gap(i) > radius) {
        Some(i) => (i + 1) % n,
        None => 0,
    };
    let ordered: Vec<Peak> = (0..n).map(|i| peaks[(start + i) % n]).collect();
    let mut out: Vec<Peak> = Vec::new();
    let mut cluster: Vec<Peak> = vec![ordered[0]];
    let flush = |cluster: &mut Vec<Peak>, out: &mut Vec<Peak>| {
        let base = cluster[0].t;
        let wsum: f64 = cluster.iter().map(|p| p.modulus).sum();
        let mean = cluster
            .iter()
            .map(|p| p.modulus * (base + (p.t - base).rem_euclid(1.0)))
            .sum::<f64>()
            / wsum;
        let best = cluster
            .iter()
            .copied()
            .max_by(|a, b| a.modulus.total_cmp(&b.modulus))
            .expect("nonempty cluster");
        out.push(Peak {
            t: wrap_unit(mean),
            modulus: best.modulus,
            slope: best.slope,
        });
        cluster.clear();
    };
    for pk in ordered.into_iter().skip(1) {
        let last = cluster[cluster.len() - 1];
        if (pk.t - last.t).rem_euclid(1.0) <= radius {
            cluster.push(pk);
        } else {
            flush(&mut cluster, &mut out);
            cluster.push(pk);
        }
    }
    flush(&mut cluster, &mut out);
    out.sort_by(|a, b| a.t.total_cmp(&b.t));
    out
}

/// Least-squares weights for `y_{k,n} = sum_l a_l g_n e^{-2 pi i (n+k) t_l}`.
pub fn estimate_amplitudes(
    support: &[f64],
    y: &Measurements,
    w: &WindowSpec,
) -> Result<Vec<Complex64>> {
    if y.n != w.truncation {
        return Err(Error::Dimension("measurements and window disagree on N".into()));
    }
    let g = window_coeffs(w);
    Ok(amplitudes_ls(support, y, &g)?.0)
}

/// Returns the weights and the relative residual of the fit.
fn amplitudes_ls(support: &[f64], y: &Measurements, g: &[f64]) -> Result<(Vec<Complex64>, f64)> {
    if support.is_empty() {
        return Err(Error::RankDeficient("empty support".into()));
    }
    let cols = y.cols();
    let rows = y.rows() * cols;
    let kk = y.k as i64;
    let nn = y.n as i64;
    let l = (y.k + y.n) as i64;
    // Exponentials e^{-2 pi i m t} for m = -L..=L, per support point.
    let expo: Vec<Vec<Complex64>> = support
        .iter()
        .map(|&t| {
            (-l..=l)
                .map(|m| Complex64::cis(-2.0 * std::f64::consts::PI * (m as f64 * t).rem_euclid(1.0)))
                .collect()
        })
        .collect();
    let a = Mat::<Complex64>::from_fn(rows, support.len(), |r, j| {
        let k = (r / cols) as i64 - kk;
        let n = (r % cols) as i64 - nn;
        expo[j][(n + k + l) as usize] * g[r % cols]
    });
    let b = Mat::<Complex64>::from_fn(rows, 1, |r, _| y.y[r]);
    let qr = a.col_piv_qr();
    let rmat = qr.R();
    let d0 = rmat[(0, 0)].norm();
    let dmin = (0..support.len()).map(|i| rmat[(i, i)].norm()).fold(f64::INFINITY, f64::min);
    if !(d0 > 0.0) || dmin <= 1e-10 * d0 {
        return Err(Error::RankDeficient(format!(
            "pivot ratio {:.3e}",
            if d0 > 0.0 { dmin / d0 } else { 0.0 }
        )));
    }
    let x = qr.solve_lstsq(&b);
    let amps: Vec<Complex64> = (0..support.len()).map(|i| x[(i, 0)]).collect();
    let fitted = &a * &x;
    let res = (0..rows)
        .map(|r| (fitted[(r, 0)] - b[(r, 0)]).norm_sqr())
        .sum::<f64>()
        .sqrt();
    let bn = y.frobenius_norm();
    Ok((amps, if bn > 0.0 { res / bn } else { res }))
}

/// Full STFT recovery.
pub fn recover(y: &Measurements, cfg: &RecoveryConfig) -> Result<RecoveryResult> {
    cfg.validate()?;
    if y.k != cfg.k || y.n != cfg.n {
        return Err(Error::Dimension(format!(
            "measurements are {}x{} but config expects K = {}, N = {}",
            y.rows(),
            y.cols(),
            cfg.k,
            cfg.n
        )));
    }
    let w = cfg.window()?;
    let solver = solve_predual_sdp(y, &w, &cfg.solver)?;
    let g = window_coeffs(&w);
    finish(y, &g, solver, cfg)
}

/// Baseline recovery from Fourier coefficients `y_k`, `|k| <= K`, i.e. the
/// degenerate window `N = 0`, `g_0 = 1`.
pub fn recover_fourier_baseline(y: &[Complex64], cfg: &RecoveryConfig) -> Result<RecoveryResult> {
    if y.len() != 2 * cfg.k + 1 {
        return Err(Error::Dimension(format!(
            "expected {} Fourier coefficients, got {}",
            2 * cfg.k + 1,
            y.len()
        )));
    }
    let cfg = RecoveryConfig { n: 0, ..*cfg };
    cfg.validate()?;
    let sol = solve_trig_sdp(y, &cfg.solver)?;
    let meas = Measurements {
        k: cfg.k,
        n: 0,
        y: y.to_vec(),
    };
    let solver = SolverResult {
        c_opt: DualVariable {
            k: cfg.k,
            n: 0,
            c: sol.x.x.clone(),
        },
        dual_poly: sol.x,
        objective: sol.objective,
        primal_residual: sol.primal_residual,
        dual_residual: sol.dual_residual,
        iterations: sol.iterations,
        status: sol.status,
        rho: sol.rho,
        inconsistency: 0.0,
        trace: sol.trace,
    };
    finish(&meas, &[1.0], solver, &cfg)
}

fn finish(
    y: &Measurements,
    g: &[f64],
    solver: SolverResult,
    cfg: &RecoveryConfig,
) -> Result<RecoveryResult> {
    let dual_poly = solver.dual_poly.clone();
    let dual_sup_norm = dual_poly.grid_sup(FEASIBILITY_GRID);
    let mut diagnostics = Diagnostics {
        peaks: Vec::new(),
        duality_gap: solver.objective.abs(),
        dual_sup_norm,
        fit_residual: 0.0,
        inconsistency: solver.inconsistency,
        failure: None,
    };
    let failed = |diagnostics: Diagnostics, reason: &str, solver: SolverResult| {
        let mut diagnostics = diagnostics;
        diagnostics.failure = Some(reason.to_string());
        Ok(RecoveryResult {
            status: RecoveryStatus::Failed,
            estimate: SpikeTrain::empty(),
            dual_poly: solver.dual_poly.clone(),
            solver,
            diagnostics,
        })
    };
    let peaks = match extract_peaks(&dual_poly, cfg) {
        Ok(p) => p,
        Err(Error::Degenerate) => return failed(diagnostics, "degenerate dual polynomial", solver),
        Err(e) => return Err(e),
    };
    if peaks.is_empty() {
        if y.frobenius_norm() == 0.0 {
            return Ok(RecoveryResult {
                status: RecoveryStatus::Recovered,
                estimate: SpikeTrain::empty(),
                dual_poly,
                solver,
                diagnostics,
            });
        }
        return failed(diagnostics, "no peaks reach the threshold", solver);
    }
    diagnostics.peaks = peaks.clone();
    let support: Vec<f64> = peaks.iter().map(|p| p.t).collect();
    let (amps, fit) = amplitudes_ls(&support, y, g)?;
    diagnostics.fit_residual = fit;
    let estimate = match SpikeTrain::new(support, amps) {
        Ok(m) => m,
        Err(e) => return failed(diagnostics, &e.to_string(), solver),
    };
    diagnostics.duality_gap = (solver.objective - tv_norm(&estimate)).abs();
    Ok(RecoveryResult {
        status: RecoveryStatus::Recovered,
        estimate,
        dual_poly,
        solver,
        diagnostics,
    })
}
