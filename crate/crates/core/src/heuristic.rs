//! Fixed-point heuristic for the holding model.
//!
//! Customers that would have been blocked are re-admitted later, which adds
//! `alpha sqrt(R1)` to the needy load. Both hedges shrink accordingly and the
//! blocking limits are evaluated at the effective pair.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::limits::blocking_limits;
use crate::model::QedPair;

const DAMPING: f64 = 0.5;
const TOL: f64 = 1e-10;
const MAX_ITER: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FixedPointSolution {
    pub alpha: f64,
    pub effective_beta: f64,
    pub effective_gamma: f64,
    pub iterations: usize,
    pub residual: f64,
    /// Root of the same equation found by bisection, if the bracket has a sign change.
    pub bisection_alpha: Option<f64>,
}

fn effective(pair: QedPair, r: f64, alpha: f64) -> (f64, f64) {
    (pair.beta - alpha, pair.gamma - alpha / r.sqrt())
}

fn blocked_volume(pair: QedPair, r: f64, alpha: f64) -> Result<f64> {
    let (b, g) = effective(pair, r, alpha);
    Ok(blocking_limits(b, g, r, 1.0)?.f)
}

/// Solves `alpha = f_b(beta - alpha, gamma - alpha / sqrt(r))` by damped iteration.
pub fn solve_alpha(pair: QedPair, r: f64) -> Result<FixedPointSolution> {
    if !(r > 0.0 && r < 1.0) {
        return Err(Error::Domain(format!("needy fraction r = {r} must lie in (0, 1)")));
    }
    let mut alpha = 0.0;
    let mut residual = f64::INFINITY;
    for it in 0..MAX_ITER {
        if effective(pair, r, alpha).1 <= 0.0 {
            return Err(Error::Infeasible { alpha });
        }
        let f = blocked_volume(pair, r, alpha)?;
        residual = (alpha - f).abs();
        if !residual.is_finite() {
            break;
        }
        if residual < TOL {
            let (effective_beta, effective_gamma) = effective(pair, r, alpha);
            return Ok(FixedPointSolution {
                alpha,
                effective_beta,
                effective_gamma,
                iterations: it,
                residual,
                bisection_alpha: bisection_alpha(pair, r),
            });
        }
        alpha += DAMPING * (f - alpha);
    }
    Err(Error::NoConvergence { residual })
}

/// Bisection on `alpha - f_b(...)` over `[0, beta + gamma sqrt(r)]`.
pub fn bisection_alpha(pair: QedPair, r: f64) -> Option<f64> {
    let psi = |a: f64| blocked_volume(pair, r, a).ok().map(|f| a - f);
    let mut lo = 0.0;
    let mut hi = pair.beta + pair.gamma * r.sqrt();
    if !(hi > 0.0) {
        return None;
    }
    let (flo, fhi) = (psi(lo)?, psi(hi)?);
    if flo == 0.0 {
        return Some(lo);
    }
    if flo.signum() == fhi.signum() {
        return None;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let fm = psi(mid)?;
        if fm.signum() == flo.signum() {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-14 {
            break;
        }
    }
    Some(0.5 * (lo + hi))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HoldingApprox {
    /// Approximate delay probability.
    pub g: f64,
    /// Approximate scaled wait `sqrt(R1) E[W]`.
    pub h: f64,
    pub fixed_point: FixedPointSolution,
}

pub fn holding_approx(pair: QedPair, r: f64, mu: f64) -> Result<HoldingApprox> {
    let fixed_point = solve_alpha(pair, r)?;
    let l = blocking_limits(fixed_point.effective_beta, fixed_point.effective_gamma, r, mu)?;
    Ok(HoldingApprox { g: l.g, h: l.h, fixed_point })
}
