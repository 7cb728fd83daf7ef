//! Dual certificates `c(t) = sum_l alpha_l u(t - t_l) + beta_l v(t - t_l)`
//! interpolating unit-modulus signs with vanishing derivative on the
//! support, on the real line (finite supports) and on the torus.

pub mod bounds;
pub mod kernel;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::linalg::{norm_inf, Lu};
use crate::measure::{wrap_unit, SpikeTrain};

pub use bounds::{appendix_bound_chain, bound_functions, is_reference_width, BoundFunctions};
pub use kernel::{kernel_all, kernel_eval, KernelKind, KernelSpec};

/// Largest acceptable condition estimate of the Schur complement.
pub const MAX_CONDITION: f64 = 1e12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificateProblem {
    pub support: Vec<f64>,
    pub signs: Vec<Complex64>,
    pub kernel: KernelSpec,
}

impl CertificateProblem {
    /// Sorts the support (wrapping into `[0, 1)` on the torus) and checks
    /// that every sign has unit modulus.
    pub fn new(support: Vec<f64>, signs: Vec<Complex64>, kernel: KernelSpec) -> Result<Self> {
        kernel.validate()?;
        if support.len() != signs.len() {
            return Err(Error::Dimension(format!(
                "{} support points but {} signs",
                support.len(),
                signs.len()
            )));
        }
        if support.is_empty() {
            return Err(Error::InvalidTrain("empty support".into()));
        }
        if support.iter().any(|t| !t.is_finite()) {
            return Err(Error::InvalidTrain("non-finite support point".into()));
        }
        if let Some(e) = signs.iter().find(|e| (e.norm() - 1.0).abs() > 1e-12) {
            return Err(Error::InvalidTrain(format!("sign {e} is not unit modulus")));
        }
        let mut pairs: Vec<(f64, Complex64)> = support
            .into_iter()
            .map(|t| if kernel.periodized { wrap_unit(t) } else { t })
            .zip(signs)
            .collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let prob = CertificateProblem {
            support: pairs.iter().map(|p| p.0).collect(),
            signs: pairs.iter().map(|p| p.1).collect(),
            kernel,
        };
        if prob.len() > 1 && prob.min_separation() <= 1e-12 {
            return Err(Error::InvalidTrain("duplicate support points".into()));
        }
        Ok(prob)
    }

    /// Signs `a_l / |a_l|` of a spike train on the torus.
    pub fn from_train(m: &SpikeTrain, kernel: KernelSpec) -> Result<Self> {
        let signs = m.weights().iter().map(|a| a / a.norm()).collect();
        CertificateProblem::new(m.points().to_vec(), signs, kernel)
    }

    pub fn len(&self) -> usize {
        self.support.len()
    }

    pub fn is_empty(&self) -> bool {
        self.support.is_empty()
    }

    /// Signed offset `t - s`, reduced to `[-1/2, 1/2)` on the torus.
    fn offset(&self, t: f64, s: f64) -> f64 {
        let d = t - s;
        if self.kernel.periodized {
            d - d.round()
        } else {
            d
        }
    }

    /// Minimum (wrap-around on the torus) distance between support points,
    /// `+inf` for a single point.
    pub fn min_separation(&self) -> f64 {
        let n = self.len();
        if n < 2 {
            return f64::INFINITY;
        }
        let mut best = f64::INFINITY;
        for i in 0..n - 1 {
            best = best.min(self.support[i + 1] - self.support[i]);
        }
        if self.kernel.periodized {
            best = best.min(self.support[0] + 1.0 - self.support[n - 1]);
        }
        best
    }

    /// Separation hypotheses `delta > 1 / fc` and `delta > 4 sigma`.
    pub fn hypotheses_hold(&self) -> bool {
        let d = self.min_separation();
        d * self.kernel.fc > 1.0 && d > 4.0 * self.kernel.sigma
    }

    /// Distance from `t` to the nearest support point.
    pub fn distance_to_support(&self, t: f64) -> f64 {
        self.support
            .iter()
            .map(|&s| self.offset(t, s).abs())
            .fold(f64::INFINITY, f64::min)
    }
}

/// The four real `L x L` interpolation matrices, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct InterpolationSystem {
    pub dim: usize,
    pub u0: Vec<f64>,
    pub u1: Vec<f64>,
    pub v0: Vec<f64>,
    pub v1: Vec<f64>,
}

/// `(U_p)_{lm} = u^(p)(t_l - t_m)`, `(V_p)_{lm} = v^(p)(t_l - t_m)`.
pub fn build_interpolation_system(prob: &CertificateProblem) -> InterpolationSystem {
    let n = prob.len();
    let mut sys = InterpolationSystem {
        dim: n,
        u0: vec![0.0; n * n],
        u1: vec![0.0; n * n],
        v0: vec![0.0; n * n],
        v1: vec![0.0; n * n],
    };
    for l in 0..n {
        for m in 0..n {
            let k = kernel_all(&prob.kernel, prob.support[l] - prob.support[m]);
            sys.u0[l * n + m] = k[0];
            sys.u1[l * n + m] = k[1];
            sys.v0[l * n + m] = k[3];
            sys.v1[l * n + m] = k[4];
        }
    }
    sys
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificateReport {
    pub alpha: Vec<Complex64>,
    pub beta: Vec<Complex64>,
    /// `max_l |c(t_l) - eps_l|`.
    pub interp_residual: f64,
    /// `max_l |c'(t_l)|`.
    pub deriv_residual: f64,
    /// `max |c|` on the default verification grid away from the support.
    pub off_support_max: f64,
    /// Condition estimate of the Schur complement `W`.
    pub condition: f64,
    pub bound_chain: BTreeMap<String, f64>,
}

impl CertificateReport {
    pub fn alpha_max(&self) -> f64 {
        self.alpha.iter().map(|a| a.norm()).fold(0.0, f64::max)
    }

    pub fn beta_max(&self) -> f64 {
        self.beta.iter().map(|b| b.norm()).fold(0.0, f64::max)
    }
}

fn mat_mul(a: &[f64], b: &[f64], n: usize) -> Vec<f64> {
    let mut c = vec![0.0; n * n];
    for i in 0..n {
        for k in 0..n {
            let aik = a[i * n + k];
            if aik != 0.0 {
                for j in 0..n {
                    c[i * n + j] += aik * b[k * n + j];
                }
            }
        }
    }
    c
}

fn mat_vec(a: &[f64], x: &[f64], n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| (0..n).map(|j| a[i * n + j] * x[j]).sum())
        .collect()
}

fn solve_complex(lu: &Lu, b: &[Complex64]) -> Vec<Complex64> {
    let re: Vec<f64> = b.iter().map(|v| v.re).collect();
    let im: Vec<f64> = b.iter().map(|v| v.im).collect();
    let xr = lu.solve(&re);
    let xi = lu.solve(&im);
    xr.into_iter()
        .zip(xi)
        .map(|(r, i)| Complex64::new(r, i))
        .collect()
}

/// Solves `U0 alpha + V0 beta = eps`, `U1 alpha + V1 beta = 0` by the Schur
/// complement `alpha = W^{-1} eps`, `beta = -V1^{-1} U1 alpha` with
/// `W = U0 - V0 V1^{-1} U1`.
pub fn solve_certificate(prob: &CertificateProblem) -> Result<CertificateReport> {
    let n = prob.len();
    let sys = build_interpolation_system(prob);
    let ks = &prob.kernel;
    let scale = ks.curvature();
    let v1n: Vec<f64> = sys.v1.iter().map(|v| v / scale).collect();
    let ill = |condition: f64| Error::IllPosed { condition };
    let v1_lu = Lu::new(&v1n, n).ok_or_else(|| ill(f64::INFINITY))?;
    let v1_inv: Vec<f64> = v1_lu.inverse().iter().map(|v| v / scale).collect();
    let v1_cond = norm_inf(&v1n, n) * norm_inf(&v1_lu.inverse(), n);
    if !(v1_cond <= MAX_CONDITION) {
        return Err(ill(v1_cond));
    }
    let v1_inv_u1 = mat_mul(&v1_inv, &sys.u1, n);
    let corr = mat_mul(&sys.v0, &v1_inv_u1, n);
    let w: Vec<f64> = sys.u0.iter().zip(&corr).map(|(a, b)| a - b).collect();
    let w_lu = Lu::new(&w, n).ok_or_else(|| ill(f64::INFINITY))?;
    let condition = norm_inf(&w, n) * norm_inf(&w_lu.inverse(), n);
    if !(condition <= MAX_CONDITION) {
        return Err(ill(condition));
    }
    let alpha = solve_complex(&w_lu, &prob.signs);
    let ar: Vec<f64> = alpha.iter().map(|v| v.re).collect();
    let ai: Vec<f64> = alpha.iter().map(|v| v.im).collect();
    let br = mat_vec(&v1_inv_u1, &ar, n);
    let bi = mat_vec(&v1_inv_u1, &ai, n);
    let beta: Vec<Complex64> = br
        .into_iter()
        .zip(bi)
        .map(|(r, i)| Complex64::new(-r, -i))
        .collect();

    let mut report = CertificateReport {
        alpha,
        beta,
        interp_residual: 0.0,
        deriv_residual: 0.0,
        off_support_max: f64::NAN,
        condition,
        bound_chain: BTreeMap::new(),
    };
    for (l, &t) in prob.support.iter().enumerate() {
        let [c, dc] = certificate_value(&report, prob, t);
        report.interp_residual = report.interp_residual.max((c - prob.signs[l]).norm());
        report.deriv_residual = report.deriv_residual.max(dc.norm());
    }

    if prob.hypotheses_hold() && n > 1 {
        report.bound_chain = appendix_bound_chain(ks.sigma, ks.fc, prob.min_separation())?;
        if is_reference_width(ks.sigma, ks.fc) {
            let a_lim = report.bound_chain["alpha_bound"];
            let b_lim = report.bound_chain["beta_bound"];
            let slack = 1e-9;
            if report.alpha_max() > a_lim * (1.0 + slack) {
                return Err(Error::Bound(format!(
                    "max |alpha| = {} exceeds {a_lim}",
                    report.alpha_max()
                )));
            }
            if report.beta_max() > b_lim * (1.0 + slack) {
                return Err(Error::Bound(format!(
                    "max |beta| = {} exceeds {b_lim}",
                    report.beta_max()
                )));
            }
        }
    }
    let summary = verify_certificate(&report, prob, DEFAULT_GRID, DEFAULT_GUARD);
    report.off_support_max = summary.off_support_max;
    Ok(report)
}

pub const DEFAULT_GRID: usize = 1 << 16;
pub const DEFAULT_GUARD: f64 = 1e-3;

/// `[c(t), c'(t)]` by direct summation.
pub fn certificate_value(
    report: &CertificateReport,
    prob: &CertificateProblem,
    t: f64,
) -> [Complex64; 2] {
    let mut c = Complex64::new(0.0, 0.0);
    let mut dc = Complex64::new(0.0, 0.0);
    for (l, &s) in prob.support.iter().enumerate() {
        let k = kernel_all(&prob.kernel, t - s);
        c += report.alpha[l] * k[0] + report.beta[l] * k[3];
        dc += report.alpha[l] * k[1] + report.beta[l] * k[4];
    }
    [c, dc]
}

/// Verification grid: `[0, 1)` on the torus, otherwise the support hull
/// padded by `max(16 sigma, 4 / fc)`.
pub fn verification_grid(prob: &CertificateProblem, grid_size: usize) -> Vec<f64> {
    let (lo, hi) = grid_bounds(prob);
    let h = (hi - lo) / grid_size as f64;
    (0..grid_size).map(|j| lo + j as f64 * h).collect()
}

fn grid_bounds(prob: &CertificateProblem) -> (f64, f64) {
    if prob.kernel.periodized {
        (0.0, 1.0)
    } else {
        let pad = (16.0 * prob.kernel.sigma).max(4.0 / prob.kernel.fc);
        (prob.support[0] - pad, prob.support[prob.len() - 1] + pad)
    }
}

/// `|c|` on the verification grid, summing only kernel contributions within
/// the cutoff.
pub fn certificate_modulus_on_grid(
    report: &CertificateReport,
    prob: &CertificateProblem,
    grid_size: usize,
) -> Vec<f64> {
    let (lo, hi) = grid_bounds(prob);
    let h = (hi - lo) / grid_size as f64;
    let ks = &prob.kernel;
    let cut = ks.cutoff();
    let mut vals = vec![Complex64::new(0.0, 0.0); grid_size];
    let shifts: Vec<f64> = if ks.periodized {
        let p = ks.period_terms as i64;
        (-p..=p).map(|n| n as f64).collect()
    } else {
        vec![0.0]
    };
    for (l, &s) in prob.support.iter().enumerate() {
        for &shift in &shifts {
            let center = s + shift;
            let j0 = (((center - cut - lo) / h).floor().max(0.0)) as usize;
            let j1 = (((center + cut - lo) / h).ceil().min(grid_size as f64 - 1.0)).max(-1.0);
            if j1 < 0.0 {
                continue;
            }
            for j in j0..=j1 as usize {
                let d = lo + j as f64 * h - center;
                if d.abs() > cut {
                    continue;
                }
                let k = kernel::kernel_values(ks.sigma, ks.fc, d);
                vals[j] += report.alpha[l] * k[0] + report.beta[l] * k[3];
            }
        }
    }
    vals.iter().map(|v| v.norm()).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationSummary {
    pub grid_size: usize,
    pub guard_radius: f64,
    /// `max |c|` at grid points farther than `guard_radius` from the support.
    pub off_support_max: f64,
    /// `max |c|` at grid points farther than `1 / (7 fc)` from the support.
    pub far_region_max: f64,
    /// Grid points within `1 / (7 fc)` of the support where the second
    /// difference of `|c|` is not negative.
    pub concavity_violations: usize,
    pub valid: bool,
}

pub fn verify_certificate(
    report: &CertificateReport,
    prob: &CertificateProblem,
    grid_size: usize,
    guard_radius: f64,
) -> VerificationSummary {
    let vals = certificate_modulus_on_grid(report, prob, grid_size);
    let grid = verification_grid(prob, grid_size);
    let near = 1.0 / (7.0 * prob.kernel.fc);
    let dist: Vec<f64> = grid.iter().map(|&t| prob.distance_to_support(t)).collect();
    let mut off_max: f64 = 0.0;
    let mut far_max: f64 = 0.0;
    let mut violations = 0;
    let g = grid_size;
    for j in 0..g {
        if dist[j] > guard_radius {
            off_max = off_max.max(vals[j]);
        }
        if dist[j] > near {
            far_max = far_max.max(vals[j]);
        } else {
            let (prev, next) = if prob.kernel.periodized {
                ((j + g - 1) % g, (j + 1) % g)
            } else if j == 0 || j + 1 == g {
                continue;
            } else {
                (j - 1, j + 1)
            };
            if vals[prev] - 2.0 * vals[j] + vals[next] >= 0.0 {
                violations += 1;
            }
        }
    }
    VerificationSummary {
        grid_size,
        guard_radius,
        off_support_max: off_max,
        far_region_max: far_max,
        concavity_violations: violations,
        valid: off_max < 1.0 && violations == 0,
    }
}

/// Largest difference of `|c|` on the grid between `period_terms = 3` and
/// `period_terms = 10`, both solved from scratch.
pub fn period_terms_audit(prob: &CertificateProblem, grid_size: usize) -> Result<f64> {
    let mut p3 = prob.clone();
    p3.kernel.period_terms = 3;
    let mut p10 = prob.clone();
    p10.kernel.period_terms = 10;
    let r3 = solve_certificate(&p3)?;
    let r10 = solve_certificate(&p10)?;
    let a = certificate_modulus_on_grid(&r3, &p3, grid_size);
    let b = certificate_modulus_on_grid(&r10, &p10, grid_size);
    Ok(a.iter()
        .zip(&b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max))
}
