//! Capacity setting for a target delay probability.
//!
//! The target fixes one equation in two unknowns, so one coordinate is
//! pinned by the caller and the other is found by bisection.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::heuristic::solve_alpha;
use crate::limits::{blocking_limits, halfin_whitt_delay, BlockingLimits};
use crate::model::{
    derive_loads, invert_capacity, qed_capacity, CapacityPair, DerivedLoads, ModelParams, QedPair,
};

/// The coordinate held fixed while solving for the other.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Pin {
    Beta(f64),
    Gamma(f64),
    /// Fixed number of servers; its hedge follows by inversion.
    Servers(u32),
    /// Fixed number of beds; its hedge follows by inversion.
    Beds(u32),
}

/// Limit values and the pre-limit measures they imply.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub g: f64,
    pub f: f64,
    pub h: f64,
    pub p_delay: f64,
    pub p_boundary: f64,
    pub e_wait: f64,
}

impl Prediction {
    fn new(l: BlockingLimits, f: f64, r1: f64) -> Self {
        let scale = r1.sqrt();
        Self {
            g: l.g,
            f,
            h: l.h,
            p_delay: l.g,
            p_boundary: f / scale,
            e_wait: l.h / scale,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DimensioningResult {
    /// Final hedges.
    pub pair: QedPair,
    /// Hedges solving the blocking equation before inflation.
    pub star_pair: QedPair,
    /// Inflation applied to the server hedge; zero for the blocking model.
    pub alpha: f64,
    pub cap: CapacityPair,
    pub predicted: Prediction,
}

#[derive(Clone, Copy, PartialEq)]
enum Free {
    Beta(f64),
    Gamma(f64),
}

fn resolve_pin(pin: Pin, loads: &DerivedLoads) -> Result<Free> {
    Ok(match pin {
        Pin::Beta(b) => Free::Gamma(b),
        Pin::Gamma(g) => Free::Beta(g),
        Pin::Servers(s) => {
            let q = invert_capacity(CapacityPair::new(s, 1)?, loads.r1, loads.r)?;
            Free::Gamma(q.beta)
        }
        Pin::Beds(n) => {
            let q = invert_capacity(CapacityPair::new(1, n)?, loads.r1, loads.r)?;
            Free::Beta(q.gamma)
        }
    })
}

/// Builds the pair from the free coordinate value `x`.
fn pair_of(free: Free, x: f64) -> QedPair {
    match free {
        // Free::Beta carries the pinned gamma and solves for beta.
        Free::Beta(gamma) => QedPair::new(x, gamma),
        Free::Gamma(beta) => QedPair::new(beta, x),
    }
}

/// Finds `x` with `delay(x) = eps`; `delay` may return NaN where undefined.
fn solve_target<F: Fn(f64) -> f64>(eps: f64, delay: F) -> Result<f64> {
    let h = |x: f64| delay(x) - eps;
    let (mut lo, mut hi) = (-5.0, 5.0);
    let mut bracket = None;
    for _ in 0..6 {
        let (fl, fh) = (h(lo), h(hi));
        if fl.is_finite() && fh.is_finite() && fl.signum() != fh.signum() {
            bracket = Some((lo, hi, fl));
            break;
        }
        let w = hi - lo;
        lo -= w / 2.0;
        hi += w / 2.0;
    }
    let (mut lo, mut hi, flo) = bracket.ok_or_else(|| {
        Error::InfeasibleTarget(format!("no hedge in [{lo}, {hi}] reaches delay {eps}"))
    })?;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let fm = h(mid);
        if !fm.is_finite() {
            return Err(Error::InfeasibleTarget(format!("delay undefined at hedge {mid}")));
        }
        if fm.signum() == flo.signum() {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-13 {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

fn check_target(eps: f64, free: Free) -> Result<()> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::Domain(format!("target delay {eps} must lie in (0, 1)")));
    }
    if let Free::Gamma(beta) = free {
        if beta > 0.0 {
            let bound = halfin_whitt_delay(beta)?;
            if eps >= bound {
                return Err(Error::InfeasibleTarget(format!(
                    "delay {eps} is not below the Halfin-Whitt bound {bound:.6} at beta = {beta}"
                )));
            }
        }
    }
    Ok(())
}

fn pinned_capacity(pin: Pin, loads: &DerivedLoads, pair: QedPair) -> Result<CapacityPair> {
    let mut cap = qed_capacity(loads.r1, loads.r, pair)?;
    match pin {
        Pin::Servers(s) => cap.s = s,
        Pin::Beds(n) => cap.n = n,
        _ => {}
    }
    Ok(cap)
}

/// Solves `g_b(beta, gamma) = eps` with one coordinate pinned.
pub fn dimension_blocking(
    eps: f64,
    pin: Pin,
    loads: &DerivedLoads,
    mu: f64,
) -> Result<DimensioningResult> {
    let r = loads.r;
    let free = resolve_pin(pin, loads)?;
    check_target(eps, free)?;
    let x = solve_target(eps, |x| {
        let q = pair_of(free, x);
        blocking_limits(q.beta, q.gamma, r, mu).map(|l| l.g).unwrap_or(f64::NAN)
    })?;
    let pair = pair_of(free, x);
    let l = blocking_limits(pair.beta, pair.gamma, r, mu)?;
    Ok(DimensioningResult {
        pair,
        star_pair: pair,
        alpha: 0.0,
        cap: pinned_capacity(pin, loads, pair)?,
        predicted: Prediction::new(l, l.f, loads.r1),
    })
}

/// Capacity setting for the holding model.
///
/// A pinned hedge (`Beta`, `Gamma`) fixes the pre-inflation coordinate and
/// the steps run as stated: solve the blocking equation, then inflate both
/// hedges by `f_b`. A pinned capacity (`Servers`, `Beds`) fixes the final
/// coordinate, so the pair is solved from the heuristic delay at the final
/// hedges, which is equivalent because the inflation is self-consistent.
pub fn dimension_holding(eps: f64, pin: Pin, params: &ModelParams) -> Result<DimensioningResult> {
    let loads = derive_loads(params)?;
    let r = loads.r;
    if !(r < 1.0) {
        return Err(Error::Domain("holding heuristic needs p > 0".into()));
    }
    let sr = r.sqrt();
    let free = resolve_pin(pin, &loads)?;
    let (star_pair, alpha) = match pin {
        Pin::Beta(_) | Pin::Gamma(_) => {
            check_target(eps, free)?;
            let x = solve_target(eps, |x| {
                let q = pair_of(free, x);
                blocking_limits(q.beta, q.gamma, r, 1.0).map(|l| l.g).unwrap_or(f64::NAN)
            })?;
            let star = pair_of(free, x);
            let f = blocking_limits(star.beta, star.gamma, r, 1.0)?.f;
            (star, f)
        }
        Pin::Servers(_) | Pin::Beds(_) => {
            if !(eps > 0.0 && eps < 1.0) {
                return Err(Error::Domain(format!("target delay {eps} must lie in (0, 1)")));
            }
            let x = solve_target(eps, |x| match solve_alpha(pair_of(free, x), r) {
                Ok(s) => blocking_limits(s.effective_beta, s.effective_gamma, r, 1.0)
                    .map(|l| l.g)
                    .unwrap_or(f64::NAN),
                // Re-admissions cannot be absorbed: the system is saturated.
                Err(Error::Infeasible { .. }) => 1.0,
                Err(_) => f64::NAN,
            })?;
            let s = solve_alpha(pair_of(free, x), r)?;
            (QedPair::new(s.effective_beta, s.effective_gamma), s.alpha)
        }
    };
    let pair = QedPair::new(star_pair.beta + alpha, star_pair.gamma + alpha / sr);
    let l = blocking_limits(star_pair.beta, star_pair.gamma, r, params.mu)?;
    Ok(DimensioningResult {
        pair,
        star_pair,
        alpha,
        cap: pinned_capacity(pin, &loads, pair)?,
        predicted: Prediction::new(l, alpha, loads.r1),
    })
}
