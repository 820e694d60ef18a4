//! QED limits of the blocking model and related square-root limits.
//!
//! `g` is the limiting delay probability, `f` the limit of
//! `sqrt(R1) P(block)` and `h` the limit of `sqrt(R1) E[W]`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::special::{adaptive_simpson, mixed_tail, norm_cdf, norm_pdf, pdf_over_cdf, INV_SQRT_2PI};

/// Below this `|beta|` the `beta = 0` formulas are used for `g` and `f`.
pub const BETA_ZERO: f64 = 1e-8;
/// Half-width of the window in which `h` is interpolated across `beta = 0`.
const H_SEAM: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LimitInputs {
    pub beta: f64,
    pub gamma: f64,
    pub r: f64,
    pub eta: f64,
    pub omega: f64,
}

impl LimitInputs {
    pub fn new(beta: f64, gamma: f64, r: f64) -> Result<Self> {
        if !(r > 0.0 && r < 1.0) {
            return Err(Error::Domain(format!("needy fraction r = {r} must lie in (0, 1)")));
        }
        if !(beta.is_finite() && gamma.is_finite()) {
            return Err(Error::Domain("hedges must be finite".into()));
        }
        let c = (1.0 - r).sqrt();
        Ok(Self {
            beta,
            gamma,
            r,
            eta: (gamma - beta * r.sqrt()) / c,
            omega: (gamma - beta / r.sqrt()) / c,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlockingLimits {
    pub g: f64,
    pub f: f64,
    pub h: f64,
}

/// `int_{-inf}^{beta} Phi((gamma - t sqrt(r)) / sqrt(1 - r)) phi(t) dt`.
pub fn gaussian_mix_integral(beta: f64, gamma: f64, r: f64) -> f64 {
    let (sr, c) = (r.sqrt(), (1.0 - r).sqrt());
    let integrand = |t: f64| norm_cdf((gamma - t * sr) / c) * norm_pdf(t);
    // Below -10 the standard normal mass is under 1e-23.
    let lo = if beta > -10.0 { -10.0 } else { beta - 10.0 };
    adaptive_simpson(&integrand, lo, beta, 1e-13)
}

struct Parts {
    sr: f64,
    ratio: f64,
    a: f64,
}

impl Parts {
    fn new(inp: &LimitInputs) -> Self {
        Self {
            sr: inp.r.sqrt(),
            ratio: ((1.0 - inp.r) / inp.r).sqrt(),
            a: gaussian_mix_integral(inp.beta, inp.gamma, inp.r),
        }
    }
}

fn general_branch(inp: &LimitInputs, parts: &Parts, mu: f64) -> BlockingLimits {
    let LimitInputs { beta, gamma, r, eta, omega } = *inp;
    let m = mixed_tail(beta.hypot(eta), omega);
    let pb = norm_pdf(beta);
    let d = pb * norm_cdf(eta) - m;
    let den = parts.a + d / beta;
    let g = 1.0 / (1.0 + beta * parts.a / d);
    let f = (parts.sr * norm_pdf(gamma) * norm_cdf(-omega * parts.sr) + m) / den;
    let num = pb * norm_cdf(eta) / (beta * beta)
        + (beta / r - gamma / parts.sr - 1.0 / beta) * m / beta
        - parts.ratio * pb * norm_pdf(eta) / beta;
    BlockingLimits { g, f, h: num / den / mu }
}

fn zero_branch(inp: &LimitInputs, parts: &Parts, mu: f64) -> BlockingLimits {
    let LimitInputs { gamma, r, .. } = *inp;
    let eta = gamma / (1.0 - r).sqrt();
    let omega = eta;
    let (ce, pe) = (norm_cdf(eta), norm_pdf(eta));
    let bn = parts.ratio * INV_SQRT_2PI * (eta * ce + pe);
    let g = 1.0 / (1.0 + parts.a / bn);
    let f = (parts.sr * norm_pdf(gamma) * norm_cdf(-omega * parts.sr) + INV_SQRT_2PI * ce)
        / (parts.a + bn);
    let xi_inv = (1.0 - r) / r;
    let h = 0.5 / mu * xi_inv * ((eta * eta + 1.0) * ce + eta * pe)
        / ((2.0 * PI).sqrt() * parts.a + parts.ratio * (eta * ce + pe));
    BlockingLimits { g, f, h }
}

/// Limits `(g, f, h)` of the blocking model.
pub fn limits_blocking(inp: LimitInputs, mu: f64) -> Result<BlockingLimits> {
    if !(mu > 0.0 && mu.is_finite()) {
        return Err(Error::Domain("mu must be positive".into()));
    }
    let inp = LimitInputs::new(inp.beta, inp.gamma, inp.r)?;
    let parts = Parts::new(&inp);
    let mut out = if inp.beta.abs() < BETA_ZERO {
        zero_branch(&inp, &parts, mu)
    } else {
        general_branch(&inp, &parts, mu)
    };
    if inp.beta.abs() < H_SEAM {
        // h divides by beta^2 and loses digits near zero, so it is replaced
        // by the parabola through h(-e), h(0) and h(e).
        let at = |b: f64| {
            let i = LimitInputs::new(b, inp.gamma, inp.r).expect("validated above");
            general_branch(&i, &Parts::new(&i), mu).h
        };
        let zero = LimitInputs::new(0.0, inp.gamma, inp.r)?;
        let h0 = zero_branch(&zero, &Parts::new(&zero), mu).h;
        let (hm, hp) = (at(-H_SEAM), at(H_SEAM));
        let b = inp.beta;
        out.h = h0 + (hp - hm) / (2.0 * H_SEAM) * b + (hp + hm - 2.0 * h0) / (2.0 * H_SEAM * H_SEAM) * b * b;
    }
    Ok(out)
}

/// Convenience wrapper taking the raw hedges.
pub fn blocking_limits(beta: f64, gamma: f64, r: f64, mu: f64) -> Result<BlockingLimits> {
    limits_blocking(LimitInputs::new(beta, gamma, r)?, mu)
}

/// Halfin-Whitt delay probability `(1 + beta Phi(beta) / phi(beta))^-1`.
pub fn halfin_whitt_delay(beta: f64) -> Result<f64> {
    if !(beta > 0.0) || !beta.is_finite() {
        return Err(Error::Domain(format!("beta = {beta} must be positive")));
    }
    Ok(1.0 / (1.0 + beta / pdf_over_cdf(beta)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossLimits {
    pub g: f64,
    pub f: f64,
}

/// Limits of the finite-waiting-room queue (no returns) with `s` and `n`
/// hedged by `beta` and `gamma`.
pub fn loss_model_limits(beta: f64, gamma: f64) -> Result<LossLimits> {
    if !(gamma > beta) || !gamma.is_finite() || !beta.is_finite() {
        return Err(Error::Domain(format!("need gamma > beta, got beta = {beta}, gamma = {gamma}")));
    }
    if beta.abs() < BETA_ZERO {
        let den = gamma + (PI / 2.0).sqrt();
        return Ok(LossLimits { g: gamma / den, f: 1.0 / den });
    }
    let x = -beta * (gamma - beta);
    let one_minus_e = -x.exp_m1();
    let c = beta / pdf_over_cdf(beta);
    let den = one_minus_e + c;
    Ok(LossLimits {
        g: one_minus_e / den,
        f: beta * x.exp() / den,
    })
}

/// Limit of the scaled Erlang-B blocking probability, `sqrt(r) phi(gamma) / Phi(gamma)`.
pub fn erlang_b_tail(gamma: f64, r: f64) -> Result<f64> {
    if !(r > 0.0 && r <= 1.0) {
        return Err(Error::Domain(format!("needy fraction r = {r} must lie in (0, 1]")));
    }
    Ok(r.sqrt() * pdf_over_cdf(gamma))
}
