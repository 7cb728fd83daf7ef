//! ADMM for the trigonometric-polynomial SDP
//!
//! ```text
//! maximize Re<z, x>  subject to  [[Q, x], [x^H, 1]] >= 0,
//!                                sum_k q_{k,k+l} = delta_{0,l}.
//! ```
//!
//! The iteration is written in its Douglas-Rachford form on a single
//! Hermitian state `A = Z + U` (PSD block plus scaled dual):
//!
//! ```text
//! Z = P_psd(A),  W = P_aff(2Z - A),  A <- A + W - Z
//! ```
//!
//! where `P_aff` is the prox of the linear objective restricted to the
//! affine set (trace-parallel sums and pinned corner). The fixed-point map
//! is accelerated with safeguarded type-II Anderson mixing.

use std::collections::VecDeque;
use std::path::Path;

use faer::{Mat, MatRef, Side};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gabor::{
    apply_g, apply_g_adjoint, gram_diagonal, window_coeffs, DualPolynomial, DualVariable,
    Measurements, WindowSpec,
};

/// ADMM settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    /// Penalty; adapted by residual balancing when `adapt_interval > 0`.
    pub rho: f64,
    pub tol_primal: f64,
    pub tol_dual: f64,
    pub max_iters: usize,
    /// Anderson memory; 0 gives plain ADMM.
    pub anderson_memory: usize,
    /// Iterations between penalty updates; 0 keeps `rho` fixed.
    pub adapt_interval: usize,
    pub record_trace: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            rho: 30.0,
            tol_primal: 1e-7,
            tol_dual: 1e-7,
            max_iters: 50_000,
            anderson_memory: 8,
            adapt_interval: 0,
            record_trace: false,
        }
    }
}

impl SolverConfig {
    fn validate(&self) -> Result<()> {
        if !(self.rho > 0.0 && self.tol_primal > 0.0 && self.tol_dual > 0.0) {
            return Err(Error::Config("rho and tolerances must be positive".into()));
        }
        if self.max_iters == 0 {
            return Err(Error::Config("max_iters must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SolverStatus {
    Converged,
    MaxIters,
}

/// One row of the optional iteration trace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub iter: usize,
    pub objective: f64,
    pub primal_res: f64,
    pub dual_res: f64,
    pub rho: f64,
}

/// Solution of the trigonometric SDP in coefficient form.
#[derive(Debug, Clone)]
pub struct TrigSolution {
    pub x: DualPolynomial,
    /// `Re<z, x>`.
    pub objective: f64,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub iterations: usize,
    pub status: SolverStatus,
    pub rho: f64,
    pub trace: Vec<TraceRow>,
}

/// Result of the STFT predual solve.
#[derive(Debug, Clone)]
pub struct SolverResult {
    pub c_opt: DualVariable,
    pub dual_poly: DualPolynomial,
    /// `Re tr(Y^H C)`.
    pub objective: f64,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub iterations: usize,
    pub status: SolverStatus,
    pub rho: f64,
    /// `||G^* z - Y|| / ||Y||` for the least-squares Fourier data `z`;
    /// zero for exact STFT data.
    pub inconsistency: f64,
    pub trace: Vec<TraceRow>,
}

/// Solves the STFT predual: maximize `Re tr(Y^H C)` over `C` whose dual
/// polynomial `x = G C` satisfies the PSD characterization of
/// `||sum_m x_m e^{2 pi i m t}||_inf <= 1`.
///
/// Since `G G^*` is diagonal, `Y = G^* z` with `z = D^{-1} G Y`, the
/// objective equals `Re<z, x>`, and the optimal `C` is the minimum-norm
/// preimage `G^* D^{-1} x`.
pub fn solve_predual_sdp(
    y: &Measurements,
    w: &WindowSpec,
    cfg: &SolverConfig,
) -> Result<SolverResult> {
    if y.n != w.truncation {
        return Err(Error::Dimension(format!(
            "measurements have N = {} but window has N = {}",
            y.n, w.truncation
        )));
    }
    if y.y.len() != y.rows() * y.cols() {
        return Err(Error::Dimension("measurement storage has the wrong length".into()));
    }
    let g = window_coeffs(w);
    let d = gram_diagonal(y.k, y.n, &g);
    let gy = apply_g(&y.y, y.k, y.n, &g);
    let z: Vec<Complex64> = gy.iter().zip(&d).map(|(v, dm)| v / dm).collect();
    let back = apply_g_adjoint(&z, y.k, y.n, &g);
    let ynorm = y.frobenius_norm();
    let inconsistency = if ynorm > 0.0 {
        back.iter()
            .zip(&y.y)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            .sqrt()
            / ynorm
    } else {
        0.0
    };

    let sol = solve_trig_sdp(&z, cfg)?;
    let scaled: Vec<Complex64> = sol.x.x.iter().zip(&d).map(|(v, dm)| v / dm).collect();
    let c = apply_g_adjoint(&scaled, y.k, y.n, &g);
    let objective = y
        .y
        .iter()
        .zip(&c)
        .map(|(yv, cv)| (yv.conj() * cv).re)
        .sum();
    Ok(SolverResult {
        c_opt: DualVariable { k: y.k, n: y.n, c },
        dual_poly: sol.x,
        objective,
        primal_residual: sol.primal_residual,
        dual_residual: sol.dual_residual,
        iterations: sol.iterations,
        status: sol.status,
        rho: sol.rho,
        inconsistency,
        trace: sol.trace,
    })
}

/// Maximizes `Re<z, x>` over trigonometric polynomials of degree
/// `L = (len(z) - 1) / 2` with sup-norm at most one.
pub fn solve_trig_sdp(z: &[Complex64], cfg: &SolverConfig) -> Result<TrigSolution> {
    cfg.validate()?;
    if z.len() % 2 == 0 {
        return Err(Error::Dimension("coefficient vector must have odd length".into()));
    }
    let znorm = z.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
    if znorm == 0.0 {
        return Ok(TrigSolution {
            x: DualPolynomial::zeros((z.len() - 1) / 2),
            objective: 0.0,
            primal_residual: 0.0,
            dual_residual: 0.0,
            iterations: 0,
            status: SolverStatus::Converged,
            rho: cfg.rho,
            trace: Vec::new(),
        });
    }
    let zn: Vec<Complex64> = z.iter().map(|v| v / znorm).collect();
    let mut solver = Admm::new(zn, cfg);
    solver.run();
    let xz = solver.x_of(&solver.z_blk);
    let objective = znorm * real_dot(&solver.zn, &xz);
    Ok(TrigSolution {
        x: DualPolynomial { x: xz },
        objective,
        primal_residual: solver.primal_res,
        dual_residual: solver.dual_res,
        iterations: solver.iterations,
        status: solver.status,
        rho: solver.rho,
        trace: solver
            .trace
            .into_iter()
            .map(|mut r| {
                r.objective *= znorm;
                r
            })
            .collect(),
    })
}

/// Writes an iteration trace as CSV `iter,objective,primal_res,dual_res,rho`.
pub fn write_trace(rows: &[TraceRow], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

fn real_dot(a: &[Complex64], b: &[Complex64]) -> f64 {
    a.iter().zip(b).map(|(u, v)| (u.conj() * v).re).sum()
}

fn mat_dot(a: &Mat<Complex64>, b: &Mat<Complex64>) -> f64 {
    let mut s = 0.0;
    for j in 0..a.ncols() {
        let ca = a.col(j);
        let cb = b.col(j);
        for i in 0..a.nrows() {
            let u = ca[i];
            let v = cb[i];
            s += u.re * v.re + u.im * v.im;
        }
    }
    s
}

fn mat_norm(a: &Mat<Complex64>) -> f64 {
    mat_dot(a, a).sqrt()
}

/// Positive part `P_psd(A)` of a Hermitian matrix via `faer`.
pub(crate) fn psd_part(a: MatRef<'_, Complex64>) -> Mat<Complex64> {
    let n = a.nrows();
    let evd = a
        .self_adjoint_eigen(Side::Lower)
        .expect("Hermitian eigendecomposition failed");
    let s = evd.S().column_vector();
    let u = evd.U();
    let lam: Vec<f64> = (0..n).map(|i| s[i].re).collect();
    let pos: Vec<usize> = (0..n).filter(|&i| lam[i] > 0.0).collect();
    let neg: Vec<usize> = (0..n).filter(|&i| lam[i] < 0.0).collect();
    // Reconstruct from the smaller eigenspace.
    let (idx, sign) = if pos.len() <= neg.len() {
        (pos, 1.0)
    } else {
        (neg, -1.0)
    };
    let r = idx.len();
    let v = Mat::<Complex64>::from_fn(n, r, |i, j| u[(i, idx[j])]);
    let vs = Mat::<Complex64>::from_fn(n, r, |i, j| u[(i, idx[j])] * lam[idx[j]]);
    let part = &vs * v.adjoint();
    let mut out = if sign > 0.0 {
        part
    } else {
        Mat::<Complex64>::from_fn(n, n, |i, j| a[(i, j)] - part[(i, j)])
    };
    hermitize(&mut out);
    out
}

fn hermitize(m: &mut Mat<Complex64>) {
    let n = m.nrows();
    for i in 0..n {
        m[(i, i)].im = 0.0;
        for j in i + 1..n {
            let v = (m[(i, j)] + m[(j, i)].conj()) * 0.5;
            m[(i, j)] = v;
            m[(j, i)] = v.conj();
        }
    }
}

struct Admm {
    zn: Vec<Complex64>,
    /// Size of Q.
    q: usize,
    cfg: SolverConfig,
    rho: f64,
    a: Mat<Complex64>,
    z_blk: Mat<Complex64>,
    primal_res: f64,
    dual_res: f64,
    iterations: usize,
    status: SolverStatus,
    trace: Vec<TraceRow>,
}

impl Admm {
    fn new(zn: Vec<Complex64>, cfg: &SolverConfig) -> Self {
        let q = zn.len();
        let d = q + 1;
        let mut a = Mat::<Complex64>::zeros(d, d);
        a[(q, q)] = Complex64::new(1.0, 0.0);
        for i in 0..q {
            a[(i, i)] = Complex64::new(1.0 / q as f64, 0.0);
        }
        Admm {
            zn,
            q,
            cfg: *cfg,
            rho: cfg.rho,
            z_blk: a.clone(),
            a,
            primal_res: f64::INFINITY,
            dual_res: f64::INFINITY,
            iterations: 0,
            status: SolverStatus::MaxIters,
            trace: Vec::new(),
        }
    }

    fn x_of(&self, m: &Mat<Complex64>) -> Vec<Complex64> {
        (0..self.q).map(|i| m[(i, self.q)]).collect()
    }

    /// Prox of the linear objective over the affine set, applied to `v`.
    fn affine_prox(&self, v: &Mat<Complex64>) -> Mat<Complex64> {
        let q = self.q;
        let mut w = v.clone();
        for l in 0..q {
            let len = q - l;
            let mut s = Complex64::new(0.0, 0.0);
            for i in 0..len {
                s += v[(i, i + l)];
            }
            let target = if l == 0 { 1.0 } else { 0.0 };
            let corr = (Complex64::new(target, 0.0) - s) / len as f64;
            for i in 0..len {
                let val = v[(i, i + l)] + corr;
                if l == 0 {
                    w[(i, i)] = Complex64::new(val.re, 0.0);
                } else {
                    w[(i, i + l)] = val;
                    w[(i + l, i)] = val.conj();
                }
            }
        }
        let scale = 0.5 / self.rho;
        for i in 0..q {
            let x = (v[(i, q)] + v[(q, i)].conj()) * 0.5 + self.zn[i] * scale;
            w[(i, q)] = x;
            w[(q, i)] = x.conj();
        }
        w[(q, q)] = Complex64::new(1.0, 0.0);
        w
    }

    /// One application of the fixed-point map: returns `(T(A), Z, W)`.
    fn step(&self, a: &Mat<Complex64>) -> (Mat<Complex64>, Mat<Complex64>, Mat<Complex64>) {
        let z = psd_part(a.as_ref());
        let refl = Mat::<Complex64>::from_fn(a.nrows(), a.ncols(), |i, j| {
            z[(i, j)] * 2.0 - a[(i, j)]
        });
        let w = self.affine_prox(&refl);
        let ta = Mat::<Complex64>::from_fn(a.nrows(), a.ncols(), |i, j| {
            a[(i, j)] + w[(i, j)] - z[(i, j)]
        });
        (ta, z, w)
    }

    fn run(&mut self) {
        let m = self.cfg.anderson_memory;
        let mut hist_a: VecDeque<Mat<Complex64>> = VecDeque::new();
        let mut hist_g: VecDeque<Mat<Complex64>> = VecDeque::new();
        let mut z_prev: Option<Mat<Complex64>> = None;
        let mut fallback: Option<Mat<Complex64>> = None;
        let mut g0_norm: Option<f64> = None;
        let mut accepted = 0usize;
        let mut last_adapt = 0usize;

        let mut iter = 0;
        while iter < self.cfg.max_iters {
            iter += 1;
            let (ta, z, w) = self.step(&self.a);
            let g = &ta - &self.a;
            let gn = mat_norm(&g);

            if let Some(fb) = fallback.take() {
                // Safeguard: reject an extrapolated point whose residual
                // grew beyond the decaying envelope.
                let g0 = g0_norm.unwrap_or(gn);
                let envelope = 1e6 * g0 * ((accepted + 1) as f64).powf(-1.000_001);
                if gn > envelope {
                    self.a = fb;
                    hist_a.clear();
                    hist_g.clear();
                    continue;
                }
                accepted += 1;
            }
            if g0_norm.is_none() {
                g0_norm = Some(gn);
            }

            let zn_f = mat_norm(&z);
            let wn_f = mat_norm(&w);
            let rp = mat_norm(&(&w - &z));
            let rd = match &z_prev {
                Some(zp) => self.rho * mat_norm(&(&z - zp)),
                None => f64::INFINITY,
            };
            let dual_scale = self.rho * mat_norm(&(&self.a - &z));
            self.primal_res = rp / (1.0 + zn_f.max(wn_f));
            self.dual_res = rd / (1.0 + dual_scale);
            self.iterations = iter;
            if self.cfg.record_trace {
                let x = self.x_of(&z);
                self.trace.push(TraceRow {
                    iter,
                    objective: real_dot(&self.zn, &x),
                    primal_res: self.primal_res,
                    dual_res: self.dual_res,
                    rho: self.rho,
                });
            }
            self.z_blk = z.clone();
            if self.primal_res <= self.cfg.tol_primal && self.dual_res <= self.cfg.tol_dual {
                self.status = SolverStatus::Converged;
                return;
            }

            if self.cfg.adapt_interval > 0
                && iter - last_adapt >= self.cfg.adapt_interval
                && rd.is_finite()
            {
                let new_rho = if rp > 10.0 * rd {
                    (self.rho * 2.0).min(1e4)
                } else if rd > 10.0 * rp {
                    (self.rho * 0.5).max(1e-4)
                } else {
                    self.rho
                };
                last_adapt = iter;
                if new_rho != self.rho {
                    // Keep Z and rescale the scaled dual (negative part).
                    let ratio = self.rho / new_rho;
                    self.a = Mat::<Complex64>::from_fn(self.q + 1, self.q + 1, |i, j| {
                        z[(i, j)] + (self.a[(i, j)] - z[(i, j)]) * ratio
                    });
                    self.rho = new_rho;
                    hist_a.clear();
                    hist_g.clear();
                    z_prev = Some(z);
                    g0_norm = None;
                    accepted = 0;
                    continue;
                }
            }
            z_prev = Some(z);

            if m == 0 {
                self.a = ta;
                continue;
            }
            hist_a.push_back(self.a.clone());
            hist_g.push_back(g.clone());
            if hist_a.len() > m + 1 {
                hist_a.pop_front();
                hist_g.pop_front();
            }
            match anderson_step(&self.a, &g, &hist_a, &hist_g) {
                Some(next) => {
                    fallback = Some(ta);
                    self.a = next;
                }
                None => self.a = ta,
            }
        }
        self.status = SolverStatus::MaxIters;
    }
}

/// Type-II Anderson extrapolation from the stored iterates and residuals.
fn anderson_step(
    a: &Mat<Complex64>,
    g: &Mat<Complex64>,
    hist_a: &VecDeque<Mat<Complex64>>,
    hist_g: &VecDeque<Mat<Complex64>>,
) -> Option<Mat<Complex64>> {
    let k = hist_a.len();
    if k < 2 {
        return None;
    }
    let m = k - 1;
    let da: Vec<Mat<Complex64>> = (0..m).map(|i| &hist_a[i + 1] - &hist_a[i]).collect();
    let dg: Vec<Mat<Complex64>> = (0..m).map(|i| &hist_g[i + 1] - &hist_g[i]).collect();
    let mut gram = vec![0.0; m * m];
    let mut rhs = vec![0.0; m];
    for i in 0..m {
        for j in i..m {
            let v = mat_dot(&dg[i], &dg[j]);
            gram[i * m + j] = v;
            gram[j * m + i] = v;
        }
        rhs[i] = mat_dot(&dg[i], g);
    }
    let trace: f64 = (0..m).map(|i| gram[i * m + i]).sum();
    if !(trace > 0.0) {
        return None;
    }
    for i in 0..m {
        gram[i * m + i] += 1e-10 * trace;
    }
    let gamma = crate::linalg::solve_dense(&mut gram, &mut rhs, m)?;
    let mut next = a + g;
    for i in 0..m {
        let c = Complex64::new(gamma[i], 0.0);
        next = &next - &((&da[i] + &dg[i]) * faer::Scale(c));
    }
    if gamma.iter().any(|v| !v.is_finite()) {
        return None;
    }
    Some(next)
}
