//! Periodized Gaussian window, STFT measurements of spike trains, the
//! adjoint (dual polynomial) map and the full-measurement inversion sum.
//!
//! Matrices indexed by `(k, n)` with `|k| <= K`, `|n| <= N` are stored
//! row-major in `k`, with array index 0 corresponding to `k = -K`
//! (respectively `n = -N`). Coefficient vectors indexed by `m` with
//! `|m| <= L` use the same offset convention.

use std::f64::consts::PI;

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measure::SpikeTrain;

/// Periodized Gaussian window of width `sigma`, truncated to `|n| <= N`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindowSpec {
    pub sigma: f64,
    pub truncation: usize,
}

impl WindowSpec {
    pub fn new(sigma: f64, truncation: usize) -> Result<Self> {
        if !(sigma > 0.0 && sigma < 1.0) {
            return Err(Error::Config(format!("sigma must lie in (0, 1), got {sigma}")));
        }
        Ok(WindowSpec { sigma, truncation })
    }

    /// Window with the default truncation rule `g_N / g_0 <= 1e-12`.
    pub fn with_default_truncation(sigma: f64) -> Result<Self> {
        WindowSpec::new(sigma, default_truncation(sigma))
    }

    pub fn coeffs(&self) -> Vec<f64> {
        window_coeffs(self)
    }
}

/// Smallest `N` with `exp(-2 pi sigma^2 N^2) <= 1e-12`.
pub fn default_truncation(sigma: f64) -> usize {
    ((1e12f64.ln() / (2.0 * PI)).sqrt() / sigma).ceil() as usize
}

/// Fourier coefficients `g_n = sqrt(2 sigma) exp(-2 pi sigma^2 n^2)` for
/// `n = -N..=N`.
pub fn window_coeffs(w: &WindowSpec) -> Vec<f64> {
    let nn = w.truncation as i64;
    let s = w.sigma;
    (-nn..=nn)
        .map(|n| (2.0 * s).sqrt() * (-2.0 * PI * s * s * (n * n) as f64).exp())
        .collect()
}

/// STFT coefficients `y_{k,n}`, `|k| <= K`, `|n| <= N`.
#[derive(Debug, Clone, PartialEq)]
pub struct Measurements {
    pub k: usize,
    pub n: usize,
    pub y: Vec<Complex64>,
}

/// Dual variable `c_{k,n}` with the same layout as [`Measurements`].
#[derive(Debug, Clone, PartialEq)]
pub struct DualVariable {
    pub k: usize,
    pub n: usize,
    pub c: Vec<Complex64>,
}

/// Trigonometric polynomial `sum_{|m| <= L} x_m e^{2 pi i m t}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PolyRepr", into = "PolyRepr")]
pub struct DualPolynomial {
    pub x: Vec<Complex64>,
}

macro_rules! kn_matrix {
    ($t:ident, $field:ident) => {
        impl $t {
            pub fn zeros(k: usize, n: usize) -> Self {
                $t {
                    k,
                    n,
                    $field: vec![Complex64::new(0.0, 0.0); (2 * k + 1) * (2 * n + 1)],
                }
            }

            pub fn rows(&self) -> usize {
                2 * self.k + 1
            }

            pub fn cols(&self) -> usize {
                2 * self.n + 1
            }

            fn index(&self, k: i64, n: i64) -> usize {
                let r = (k + self.k as i64) as usize;
                let c = (n + self.n as i64) as usize;
                r * self.cols() + c
            }

            /// Entry at signed indices `(k, n)`.
            pub fn get(&self, k: i64, n: i64) -> Complex64 {
                self.$field[self.index(k, n)]
            }

            pub fn set(&mut self, k: i64, n: i64, v: Complex64) {
                let i = self.index(k, n);
                self.$field[i] = v;
            }

            pub fn frobenius_norm(&self) -> f64 {
                self.$field.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
            }
        }
    };
}

kn_matrix!(Measurements, y);
kn_matrix!(DualVariable, c);

#[derive(Serialize, Deserialize)]
struct MeasurementsRepr {
    #[serde(rename = "K")]
    k: usize,
    #[serde(rename = "N")]
    n: usize,
    #[serde(rename = "Y")]
    y: Vec<Vec<[f64; 2]>>,
}

impl Serialize for Measurements {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let y = self
            .y
            .chunks(self.cols())
            .map(|row| row.iter().map(|v| [v.re, v.im]).collect())
            .collect();
        MeasurementsRepr { k: self.k, n: self.n, y }.serialize(s)
    }
}

impl<'de> Deserialize<'de> for Measurements {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let r = MeasurementsRepr::deserialize(d)?;
        if r.y.len() != 2 * r.k + 1 || r.y.iter().any(|row| row.len() != 2 * r.n + 1) {
            return Err(D::Error::custom("Y has the wrong shape for K and N"));
        }
        let y = r
            .y
            .iter()
            .flat_map(|row| row.iter().map(|v| Complex64::new(v[0], v[1])))
            .collect();
        Ok(Measurements { k: r.k, n: r.n, y })
    }
}

impl Measurements {
    pub fn to_json(&self) -> Result<String> {
        crate::io::to_json_string(self)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

#[derive(Serialize, Deserialize)]
struct PolyRepr {
    x: Vec<[f64; 2]>,
}

impl TryFrom<PolyRepr> for DualPolynomial {
    type Error = Error;

    fn try_from(r: PolyRepr) -> Result<Self> {
        if r.x.len() % 2 == 0 {
            return Err(Error::Dimension("coefficient vector must have odd length".into()));
        }
        Ok(DualPolynomial {
            x: r.x.iter().map(|v| Complex64::new(v[0], v[1])).collect(),
        })
    }
}

impl From<DualPolynomial> for PolyRepr {
    fn from(p: DualPolynomial) -> Self {
        PolyRepr {
            x: p.x.iter().map(|v| [v.re, v.im]).collect(),
        }
    }
}

impl DualPolynomial {
    pub fn new(x: Vec<Complex64>) -> Result<Self> {
        if x.len() % 2 == 0 {
            return Err(Error::Dimension("coefficient vector must have odd length".into()));
        }
        Ok(DualPolynomial { x })
    }

    pub fn zeros(degree: usize) -> Self {
        DualPolynomial {
            x: vec![Complex64::new(0.0, 0.0); 2 * degree + 1],
        }
    }

    /// Largest frequency `L`.
    pub fn degree(&self) -> usize {
        (self.x.len() - 1) / 2
    }

    /// Coefficient `x_m`, zero outside `|m| <= L`.
    pub fn coeff(&self, m: i64) -> Complex64 {
        let l = self.degree() as i64;
        if m.abs() > l {
            Complex64::new(0.0, 0.0)
        } else {
            self.x[(m + l) as usize]
        }
    }

    pub fn eval(&self, t: f64) -> Complex64 {
        eval_dual_poly(self, t)
    }

    /// Value and first two derivatives in `t`.
    pub fn eval_with_derivatives(&self, t: f64) -> [Complex64; 3] {
        let l = self.degree() as i64;
        let w = Complex64::cis(2.0 * PI * t);
        let mut e = Complex64::cis(-2.0 * PI * l as f64 * t);
        let mut out = [Complex64::new(0.0, 0.0); 3];
        for (j, &x) in self.x.iter().enumerate() {
            let m = (j as i64 - l) as f64;
            let om = Complex64::new(0.0, 2.0 * PI * m);
            let term = x * e;
            out[0] += term;
            out[1] += om * term;
            out[2] += om * om * term;
            e *= w;
        }
        out
    }

    /// Samples at `t_j = j / size`, `j = 0..size`.
    pub fn eval_grid(&self, size: usize) -> Vec<Complex64> {
        eval_grid(self, size)
    }

    /// Supremum of the modulus on a uniform grid.
    pub fn grid_sup(&self, size: usize) -> f64 {
        self.eval_grid(size)
            .iter()
            .map(|v| v.norm())
            .fold(0.0, f64::max)
    }

    pub fn to_json(&self) -> Result<String> {
        crate::io::to_json_string(self)
    }
}

/// Fourier coefficients `sum_l a_l e^{-2 pi i m t_l}` for `m = -L..=L`.
pub fn fourier_coefficients(m: &SpikeTrain, l: usize) -> Vec<Complex64> {
    let l = l as i64;
    let mut z = vec![Complex64::new(0.0, 0.0); (2 * l + 1) as usize];
    for (&t, &a) in m.points().iter().zip(m.weights()) {
        for (j, zj) in z.iter_mut().enumerate() {
            let mm = j as i64 - l;
            *zj += a * Complex64::cis(-2.0 * PI * (mm as f64 * t).rem_euclid(1.0));
        }
    }
    z
}

/// `y_{k,n} = g_n sum_l a_l e^{-2 pi i (n + k) t_l}`.
pub fn forward_stft(m: &SpikeTrain, w: &WindowSpec, k: usize) -> Measurements {
    let g = window_coeffs(w);
    let n = w.truncation;
    let z = fourier_coefficients(m, k + n);
    let mut out = Measurements::zeros(k, n);
    let cols = 2 * n + 1;
    for r in 0..2 * k + 1 {
        for c in 0..cols {
            // m = (r - K) + (c - N) lands at offset r + c in z.
            out.y[r * cols + c] = g[c] * z[r + c];
        }
    }
    out
}

/// `x_m = sum_{n = max(-N, m-K)}^{min(N, m+K)} g_n c_{m-n,n}`.
pub fn dual_poly_from_c(cvar: &DualVariable, w: &WindowSpec) -> Result<DualPolynomial> {
    if cvar.n != w.truncation {
        return Err(Error::Dimension(format!(
            "dual variable has N = {} but window has N = {}",
            cvar.n, w.truncation
        )));
    }
    let g = window_coeffs(w);
    Ok(DualPolynomial {
        x: apply_g(&cvar.c, cvar.k, cvar.n, &g),
    })
}

/// The map `G: C -> x` on raw storage.
pub(crate) fn apply_g(c: &[Complex64], k: usize, n: usize, g: &[f64]) -> Vec<Complex64> {
    let cols = 2 * n + 1;
    let mut x = vec![Complex64::new(0.0, 0.0); 2 * (k + n) + 1];
    for r in 0..2 * k + 1 {
        for col in 0..cols {
            x[r + col] += g[col] * c[r * cols + col];
        }
    }
    x
}

/// The adjoint `G^*: x -> C`, `c_{k,n} = g_n x_{k+n}`.
pub(crate) fn apply_g_adjoint(x: &[Complex64], k: usize, n: usize, g: &[f64]) -> Vec<Complex64> {
    let cols = 2 * n + 1;
    let mut c = vec![Complex64::new(0.0, 0.0); (2 * k + 1) * cols];
    for r in 0..2 * k + 1 {
        for col in 0..cols {
            c[r * cols + col] = g[col] * x[r + col];
        }
    }
    c
}

/// Diagonal of `G G^*`: `D_m = sum over admissible n of g_n^2`.
pub(crate) fn gram_diagonal(k: usize, n: usize, g: &[f64]) -> Vec<f64> {
    let mut d = vec![0.0; 2 * (k + n) + 1];
    for r in 0..2 * k + 1 {
        for (col, gc) in g.iter().enumerate() {
            d[r + col] += gc * gc;
        }
    }
    d
}

/// Evaluates the polynomial at `t` by Horner's rule in `e^{2 pi i t}`.
pub fn eval_dual_poly(p: &DualPolynomial, t: f64) -> Complex64 {
    let l = p.degree();
    let w = Complex64::cis(2.0 * PI * t);
    let mut acc = Complex64::new(0.0, 0.0);
    for x in p.x.iter().rev() {
        acc = acc * w + x;
    }
    acc * Complex64::cis(-2.0 * PI * (l as f64 * t).rem_euclid(1.0))
}

/// Evaluates the polynomial at `j / size` for all `j` with one FFT.
pub fn eval_grid(p: &DualPolynomial, size: usize) -> Vec<Complex64> {
    assert!(size > 0, "grid size must be positive");
    let l = p.degree() as i64;
    let mut buf = vec![Complex64::new(0.0, 0.0); size];
    for (j, &x) in p.x.iter().enumerate() {
        let m = j as i64 - l;
        buf[m.rem_euclid(size as i64) as usize] += x;
    }
    let mut planner = FftPlanner::new();
    planner.plan_fft_inverse(size).process(&mut buf);
    buf
}

/// `|Re<A m, C> - Re sum_l conj(a_l) (A^* C)(t_l)|`.
pub fn adjoint_pairing_check(
    m: &SpikeTrain,
    cvar: &DualVariable,
    w: &WindowSpec,
    k: usize,
) -> Result<f64> {
    if cvar.k != k || cvar.n != w.truncation {
        return Err(Error::Dimension("dual variable does not match K and N".into()));
    }
    let y = forward_stft(m, w, k);
    let lhs: f64 = y
        .y
        .iter()
        .zip(&cvar.c)
        .map(|(yv, cv)| (cv * yv.conj()).re)
        .sum();
    let p = dual_poly_from_c(cvar, w)?;
    let rhs: f64 = m
        .points()
        .iter()
        .zip(m.weights())
        .map(|(&t, a)| (a.conj() * p.eval(t)).re)
        .sum();
    Ok((lhs - rhs).abs())
}

/// Largest relative violation of `y_{k,n} / g_n = y_{k',n'} / g_{n'}` on
/// anti-diagonals `n + k = const`, over entries with `g_n > tol`.
pub fn anti_diagonal_residual(y: &Measurements, w: &WindowSpec, tol: f64) -> f64 {
    let g = window_coeffs(w);
    let cols = y.cols();
    let l = y.k + y.n;
    let mut first: Vec<Option<Complex64>> = vec![None; 2 * l + 1];
    let mut worst: f64 = 0.0;
    let mut scale: f64 = 0.0;
    for (i, v) in y.y.iter().enumerate() {
        let gc = g[i % cols];
        if gc > tol {
            scale = scale.max(v.norm() / gc);
        }
    }
    if scale == 0.0 {
        return 0.0;
    }
    for r in 0..y.rows() {
        for c in 0..cols {
            if g[c] <= tol {
                continue;
            }
            let v = y.y[r * cols + c] / g[c];
            match first[r + c] {
                None => first[r + c] = Some(v),
                Some(f) => worst = worst.max((v - f).norm() / scale),
            }
        }
    }
    worst
}

/// Periodized window autocorrelation `sum_{|n| <= 3} exp(-pi (t-n)^2 / (4 sigma^2))`.
pub fn periodized_autocorrelation(sigma: f64, t: f64) -> f64 {
    let t = t - t.round();
    (-3..=3)
        .map(|n| {
            let s = t - n as f64;
            (-PI * s * s / (4.0 * sigma * sigma)).exp()
        })
        .sum()
}

/// Dirichlet kernel `sum_{|k| <= K} e^{2 pi i k t}`.
pub fn dirichlet(k: usize, t: f64) -> f64 {
    let t = t - t.round();
    let s = (PI * t).sin();
    if s.abs() < 1e-300 {
        (2 * k + 1) as f64
    } else {
        ((2 * k + 1) as f64 * PI * t).sin() / s
    }
}

/// Closed-form partial sum of the torus inversion formula,
/// `sum_l a_l R_per(t - t_l) D_K(t - t_l) / (2K + 1)`.
///
/// With `normalize` the result is divided by `||g||^2 = R_per(0)`.
pub fn full_inversion_partial_sum(
    m: &SpikeTrain,
    w: &WindowSpec,
    k: usize,
    t: f64,
    normalize: bool,
) -> Complex64 {
    let sigma = w.sigma;
    let mut acc = Complex64::new(0.0, 0.0);
    for (&tl, &a) in m.points().iter().zip(m.weights()) {
        let d = t - tl;
        acc += a * periodized_autocorrelation(sigma, d) * dirichlet(k, d) / (2 * k + 1) as f64;
    }
    if normalize {
        acc / periodized_autocorrelation(sigma, 0.0)
    } else {
        acc
    }
}
