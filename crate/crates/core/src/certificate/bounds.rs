//! Closed-form bound functions and the Neumann-series bound chain for the
//! interpolation system.

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Values of the bound functions at one argument `x`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundFunctions {
    pub phi: f64,
    pub psi: f64,
    pub xi: f64,
    pub rho: f64,
    pub eta: f64,
    pub gamma_cap: f64,
    pub gamma: f64,
}

/// `phi = -ln(1 - q)`, `psi = x^2 q / (1 - q)^2`, `xi = q / (1 - q)`,
/// `rho = x^2 xi`, `eta = x^2 psi`, `Gamma = q (1 + q) / (1 - q)^3`,
/// `gamma = x^2 Gamma`, all with `q = exp(-pi x^2)`.
pub fn bound_functions(x: f64) -> Result<BoundFunctions> {
    if !(x > 0.0 && x.is_finite()) {
        return Err(Error::Domain(format!("bound functions need x > 0, got {x}")));
    }
    let x2 = x * x;
    let q = (-PI * x2).exp();
    let one_minus = -(-PI * x2).exp_m1();
    let xi = q / one_minus;
    let psi = x2 * q / (one_minus * one_minus);
    let gamma_cap = q * (1.0 + q) / (one_minus * one_minus * one_minus);
    Ok(BoundFunctions {
        phi: -(-q).ln_1p(),
        psi,
        xi,
        rho: x2 * xi,
        eta: x2 * psi,
        gamma_cap,
        gamma: x2 * gamma_cap,
    })
}

/// Headline limits the chain must respect under the reference hypotheses.
pub const V1_DEVIATION_LIMIT: f64 = 3.71e-5;
pub const W_DEVIATION_LIMIT: f64 = 1.12e-6;
pub const ALPHA_LIMIT: f64 = 1.01;
pub const BETA_OVER_SIGMA_LIMIT: f64 = 5.73e-6;
pub const FAR_REGION_LIMIT: f64 = 0.876;

fn check_hypotheses(sigma: f64, fc: f64, delta: f64) -> Result<()> {
    let mut failed = Vec::new();
    if !(sigma > 0.0) {
        failed.push(format!("sigma = {sigma} must be positive"));
    }
    if !(fc > 0.0) {
        failed.push(format!("fc = {fc} must be positive"));
    }
    if !(delta >= 4.0 * sigma * (1.0 - 1e-12)) {
        failed.push(format!("delta = {delta} must be at least 4 sigma = {}", 4.0 * sigma));
    }
    if !(delta * fc >= 1.0 - 1e-12) {
        failed.push(format!("delta = {delta} must be at least 1 / fc = {}", 1.0 / fc));
    }
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Error::Hypothesis(failed))
    }
}

/// True when `sigma = 1 / (4 fc)` up to rounding.
pub fn is_reference_width(sigma: f64, fc: f64) -> bool {
    (4.0 * sigma * fc - 1.0).abs() <= 1e-9
}

/// Every bound of the chain, keyed by name.
///
/// With `x = delta / (2 sigma)` and bound functions at `x`:
/// - `v1_deviation`: bound on `||I - V1 / v'(0)||`.
/// - `v1_inverse`: bound on `||V1^{-1}||`.
/// - `u0_deviation`, `u1_norm`, `v0_norm`: operator norm bounds.
/// - `w_deviation`: bound on `||I - W||`, `W = U0 - V0 V1^{-1} U1`.
/// - `alpha_bound`, `beta_bound`, `beta_over_sigma`.
/// - `far_region`: bound on the certificate at distance at least
///   `1 / (7 fc)` from the support.
///
/// When `sigma = 1 / (4 fc)` the near-region concavity quantities are added
/// (`re_alpha_lower`, `a_r_lower`, `u2_peak`, `u2_peak_scaled`, `u2_tail`,
/// `v2_tail`) and the headline limits are enforced.
pub fn appendix_bound_chain(sigma: f64, fc: f64, delta: f64) -> Result<BTreeMap<String, f64>> {
    check_hypotheses(sigma, fc, delta)?;
    let x = delta / (2.0 * sigma);
    let bf = bound_functions(x)?;
    let (phi, psi, xi, rho) = (bf.phi, bf.psi, bf.xi, bf.rho);
    let fd = fc * delta;

    let v1_dev = ((2.0 / PI) * phi + 2.0 * psi) / fd + 2.0 * xi;
    if v1_dev >= 1.0 {
        return Err(Error::Bound(format!("Neumann series for V1 diverges ({v1_dev})")));
    }
    let v1_inv = (2.0 * sigma * sigma / PI) / (1.0 - v1_dev);
    let u0_dev = phi / (PI * fd);
    let u1 = 2.0 * rho / (fc * delta * delta)
        + phi * (2.0 / delta + 1.0 / (PI * fc * delta * delta));
    let v0 = xi / (2.0 * fc * sigma * sigma);
    let w_dev = u0_dev + v0 * v1_inv * u1;
    if w_dev >= 1.0 {
        return Err(Error::Bound(format!("Neumann series for W diverges ({w_dev})")));
    }
    let alpha = 1.0 / (1.0 - w_dev);
    let beta = v1_inv * u1 * alpha;

    let a = PI / (2.0 * sigma * sigma);
    let r = |t: f64| (-0.5 * a * t * t).exp();
    let d0 = 1.0 / (7.0 * fc);
    let half = 0.5 * delta;
    let u_far = r(d0) / (2.0 * PI * fc * d0) + r(half) / (2.0 * PI * fc * half) + u0_dev;
    let v_far = a * r(d0) / (2.0 * PI * fc) + a * r(half) / (2.0 * PI * fc) + v0;
    let far = alpha * u_far + beta * v_far;

    let mut out = BTreeMap::new();
    let mut put = |k: &str, v: f64| {
        out.insert(k.to_string(), v);
    };
    put("x", x);
    put("phi", phi);
    put("psi", psi);
    put("xi", xi);
    put("rho", rho);
    put("eta", bf.eta);
    put("gamma", bf.gamma);
    put("v1_deviation", v1_dev);
    put("v1_inverse", v1_inv);
    put("u0_deviation", u0_dev);
    put("u1_norm", u1);
    put("v0_norm", v0);
    put("w_deviation", w_dev);
    put("alpha_bound", alpha);
    put("beta_bound", beta);
    put("beta_over_sigma", beta / sigma);
    put("far_region", far);

    if is_reference_width(sigma, fc) {
        let bs = beta / sigma;
        let re = 1.0 - alpha * w_dev;
        let y = 2.0 * PI / 7.0;
        let [s0, s1, s2, _] = super::kernel::sinc_derivatives(y);
        let g = (-4.0 * PI / 49.0).exp();
        let e12 = (-PI * (12.0f64 / 7.0).powi(2)).exp();
        let a_r = re * g * s0
            - bs * (-0.5f64).exp() * (PI / 2.0).sqrt()
            - (alpha * 7.0 * e12 / (12.0 * PI) + bs * e12 + alpha * phi / PI + bs * 2.0 * xi);
        let u2_peak = (8.0 * PI * (8.0 * PI / 49.0 - 1.0) * s0 - 32.0 * PI * PI / 7.0 * s1
            + 4.0 * PI * PI * s2)
            * g;
        let u2_tail = alpha * (16.0 * PI * bf.eta + 32.0 * PI * xi + (4.0 * PI + 28.0 + 2.0 / PI) * phi);
        let v2_tail = bs / 4.0
            * (128.0 * PI * PI * bf.gamma
                + 64.0 * PI * PI * bf.eta
                + (320.0 * PI + 32.0 * PI * PI) * xi
                + (64.0 * PI + 16.0) * phi);
        put("re_alpha_lower", re);
        put("a_r_lower", a_r);
        put("u2_peak", u2_peak);
        put("u2_peak_scaled", u2_peak * re);
        put("u2_tail", u2_tail);
        put("v2_tail", v2_tail);

        let checks = [
            ("v1_deviation", v1_dev, V1_DEVIATION_LIMIT),
            ("w_deviation", w_dev, W_DEVIATION_LIMIT),
            ("alpha_bound", alpha, ALPHA_LIMIT),
            ("beta_over_sigma", bs, BETA_OVER_SIGMA_LIMIT),
            ("far_region", far, FAR_REGION_LIMIT),
        ];
        for (name, v, lim) in checks {
            if v > lim {
                return Err(Error::Bound(format!("{name} = {v:.6e} exceeds {lim:.3e}")));
            }
        }
    }
    Ok(out)
}
