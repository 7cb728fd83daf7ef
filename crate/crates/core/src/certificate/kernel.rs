//! Interpolation kernels `u(t) = R(t) sinc(2 pi fc t)` and
//! `v(t) = (pi t / (2 sigma^2)) R(t) sinc(2 pi fc t)` with
//! `R(t) = exp(-pi t^2 / (4 sigma^2))`, and their derivatives.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Beyond this many multiples of `sigma` the Gaussian factor is below
/// `1e-60` and contributions are dropped.
pub const CUTOFF_SIGMAS: f64 = 14.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub sigma: f64,
    pub fc: f64,
    pub periodized: bool,
    pub period_terms: usize,
}

impl KernelSpec {
    /// Kernel on the real line.
    pub fn line(sigma: f64, fc: f64) -> Result<Self> {
        let ks = KernelSpec {
            sigma,
            fc,
            periodized: false,
            period_terms: 3,
        };
        ks.validate()?;
        Ok(ks)
    }

    /// Periodized kernel on the torus with `fc = K + 1/2`.
    pub fn torus(sigma: f64, k: usize) -> Result<Self> {
        let ks = KernelSpec {
            sigma,
            fc: k as f64 + 0.5,
            periodized: true,
            period_terms: 3,
        };
        ks.validate()?;
        Ok(ks)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(Error::Config(format!("sigma must be positive, got {}", self.sigma)));
        }
        if !(self.fc > 0.0 && self.fc.is_finite()) {
            return Err(Error::Config(format!("fc must be positive, got {}", self.fc)));
        }
        if self.periodized {
            let k = self.fc - 0.5;
            if (k - k.round()).abs() > 1e-9 || k < -1e-9 {
                return Err(Error::Config(format!(
                    "periodized kernels need fc = K + 1/2, got {}",
                    self.fc
                )));
            }
        }
        Ok(())
    }

    /// `pi / (2 sigma^2)`, which equals `v'(0)` and `-R''(0)`.
    pub fn curvature(&self) -> f64 {
        PI / (2.0 * self.sigma * self.sigma)
    }

    pub fn cutoff(&self) -> f64 {
        CUTOFF_SIGMAS * self.sigma
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum KernelKind {
    U,
    V,
    DU,
    DV,
    D2U,
    D2V,
}

/// `[sinc, sinc', sinc'', sinc''']` at `x`, with `sinc(x) = sin(x) / x`.
pub fn sinc_derivatives(x: f64) -> [f64; 4] {
    if x.abs() < 0.1 {
        let x2 = x * x;
        let s0 = 1.0 - x2 / 6.0 * (1.0 - x2 / 20.0 * (1.0 - x2 / 42.0 * (1.0 - x2 / 72.0)));
        let s1 = x * (-1.0 / 3.0 + x2 * (1.0 / 30.0 - x2 * (1.0 / 840.0 - x2 / 45_360.0)));
        let s2 = -1.0 / 3.0 + x2 * (1.0 / 10.0 - x2 * (1.0 / 168.0 - x2 / 6480.0));
        let s3 = x * (1.0 / 5.0 - x2 * (1.0 / 42.0 - x2 / 1080.0));
        return [s0, s1, s2, s3];
    }
    let (s, c) = x.sin_cos();
    let s0 = s / x;
    let s1 = (c - s0) / x;
    let s2 = -s0 - 2.0 * s1 / x;
    let s3 = -s1 - 2.0 * (s2 - s1 / x) / x;
    [s0, s1, s2, s3]
}

/// `[R, R', R'', R''']` at `t`.
fn gaussian_derivatives(a: f64, t: f64) -> [f64; 4] {
    let r = (-0.5 * a * t * t).exp();
    [
        r,
        -a * t * r,
        (a * a * t * t - a) * r,
        (3.0 * a * a * t - a * a * a * t * t * t) * r,
    ]
}

/// `[u, u', u'', v, v', v'']` at a single shift, without periodization.
pub fn kernel_values(sigma: f64, fc: f64, t: f64) -> [f64; 6] {
    let a = PI / (2.0 * sigma * sigma);
    let b = 2.0 * PI * fc;
    let [r0, r1, r2, r3] = gaussian_derivatives(a, t);
    let [q0, q1, q2, _] = sinc_derivatives(b * t);
    let (s0, s1, s2) = (q0, b * q1, b * b * q2);
    // v = w s with w = -R'.
    let (w0, w1, w2) = (-r1, -r2, -r3);
    [
        r0 * s0,
        r1 * s0 + r0 * s1,
        r2 * s0 + 2.0 * r1 * s1 + r0 * s2,
        w0 * s0,
        w1 * s0 + w0 * s1,
        w2 * s0 + 2.0 * w1 * s1 + w0 * s2,
    ]
}

/// All six kernel values at `t`, periodized when `ks.periodized` is set.
pub fn kernel_all(ks: &KernelSpec, t: f64) -> [f64; 6] {
    let cut = ks.cutoff();
    let mut out = [0.0; 6];
    let mut add = |d: f64| {
        if d.abs() <= cut {
            let v = kernel_values(ks.sigma, ks.fc, d);
            for i in 0..6 {
                out[i] += v[i];
            }
        }
    };
    if ks.periodized {
        let p = ks.period_terms as i64;
        for n in -p..=p {
            add(t - n as f64);
        }
    } else {
        add(t);
    }
    out
}

pub fn kernel_eval(ks: &KernelSpec, which: KernelKind, t: f64) -> f64 {
    let v = kernel_all(ks, t);
    match which {
        KernelKind::U => v[0],
        KernelKind::DU => v[1],
        KernelKind::D2U => v[2],
        KernelKind::V => v[3],
        KernelKind::DV => v[4],
        KernelKind::D2V => v[5],
    }
}
