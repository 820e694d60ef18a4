//! Primitive parameters, offered loads and the two-fold square-root scaling.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Rates of an Erlang-R instance: arrivals `lambda`, needy service `mu`,
/// content completion `delta` and return probability `p`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub lambda: f64,
    pub mu: f64,
    pub delta: f64,
    pub p: f64,
}

impl ModelParams {
    pub fn new(lambda: f64, mu: f64, delta: f64, p: f64) -> Result<Self> {
        let params = Self { lambda, mu, delta, p };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.lambda, self.mu, self.delta, self.p]
            .iter()
            .all(|x| x.is_finite());
        if !finite {
            return Err(Error::Domain("rates must be finite".into()));
        }
        if self.lambda <= 0.0 || self.mu <= 0.0 || self.delta <= 0.0 {
            return Err(Error::Domain(
                "lambda, mu and delta must be positive".into(),
            ));
        }
        if self.p >= 1.0 {
            return Err(Error::Domain(
                "p must be below 1 (p = 1 gives infinite load)".into(),
            ));
        }
        if self.p < 0.0 {
            return Err(Error::Domain("p must be non-negative".into()));
        }
        Ok(())
    }

    /// Same service parameters with a different arrival rate.
    pub fn with_lambda(&self, lambda: f64) -> Self {
        Self { lambda, ..*self }
    }

    /// Parameters whose needy offered load equals `r1`.
    pub fn from_load(r1: f64, mu: f64, delta: f64, p: f64) -> Result<Self> {
        Self::new(r1 * (1.0 - p) * mu, mu, delta, p)
    }

    /// Needy-time fraction `delta / (delta + p mu)`.
    pub fn needy_fraction(&self) -> f64 {
        self.delta / (self.delta + self.p * self.mu)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DerivedLoads {
    /// Offered load at the needy station.
    pub r1: f64,
    /// Offered load at the content station.
    pub r2: f64,
    /// Fraction of sojourn time spent needy.
    pub r: f64,
    /// Server utilization `r1 / s`, when a server count is known.
    pub rho: Option<f64>,
}

impl DerivedLoads {
    /// Total offered load `r1 + r2`, which equals `r1 / r`.
    pub fn total(&self) -> f64 {
        self.r1 + self.r2
    }

    pub fn with_servers(mut self, s: u32) -> Self {
        self.rho = Some(self.r1 / s as f64);
        self
    }
}

pub fn derive_loads(params: &ModelParams) -> Result<DerivedLoads> {
    params.validate()?;
    let ModelParams { lambda, mu, delta, p } = *params;
    let r1 = lambda / ((1.0 - p) * mu);
    let r2 = p * lambda / ((1.0 - p) * delta);
    Ok(DerivedLoads {
        r1,
        r2,
        r: params.needy_fraction(),
        rho: None,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CapacityPair {
    /// Servers.
    pub s: u32,
    /// Maximum number of customers inside the facility.
    pub n: u32,
}

impl CapacityPair {
    pub fn new(s: u32, n: u32) -> Result<Self> {
        if s == 0 || n == 0 {
            return Err(Error::Domain("s and n must be at least 1".into()));
        }
        Ok(Self { s, n })
    }
}

/// Server hedge `beta` and bed hedge `gamma`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QedPair {
    pub beta: f64,
    pub gamma: f64,
}

impl QedPair {
    pub fn new(beta: f64, gamma: f64) -> Self {
        Self { beta, gamma }
    }
}

/// How the bed count is rounded to an integer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BedRounding {
    /// Round down; the default.
    #[default]
    Floor,
    /// Round to the nearest integer, as used for the published accuracy tables.
    Nearest,
}

const ROUND_SLACK: f64 = 1e-9;

fn ceil_tol(x: f64) -> f64 {
    (x - ROUND_SLACK * x.abs().max(1.0)).ceil()
}

fn floor_tol(x: f64) -> f64 {
    (x + ROUND_SLACK * x.abs().max(1.0)).floor()
}

fn clamp_count(x: f64) -> u32 {
    if x < 1.0 {
        1
    } else if x > u32::MAX as f64 {
        u32::MAX
    } else {
        x as u32
    }
}

/// Servers `ceil(r1 + beta sqrt(r1))` and beds `floor(r1/r + gamma sqrt(r1/r))`,
/// both at least one.
pub fn qed_capacity(r1: f64, r: f64, pair: QedPair) -> Result<CapacityPair> {
    qed_capacity_with(r1, r, pair, BedRounding::Floor)
}

pub fn qed_capacity_with(
    r1: f64,
    r: f64,
    pair: QedPair,
    rounding: BedRounding,
) -> Result<CapacityPair> {
    check_load(r1, r)?;
    let s = ceil_tol(r1 + pair.beta * r1.sqrt());
    let total = r1 / r;
    let n_real = total + pair.gamma * total.sqrt();
    let n = match rounding {
        BedRounding::Floor => floor_tol(n_real),
        BedRounding::Nearest => n_real.round(),
    };
    Ok(CapacityPair {
        s: clamp_count(s),
        n: clamp_count(n),
    })
}

/// Hedges implied by a given capacity.
pub fn invert_capacity(cap: CapacityPair, r1: f64, r: f64) -> Result<QedPair> {
    check_load(r1, r)?;
    let total = r1 / r;
    Ok(QedPair {
        beta: (cap.s as f64 - r1) / r1.sqrt(),
        gamma: (cap.n as f64 - total) / total.sqrt(),
    })
}

fn check_load(r1: f64, r: f64) -> Result<()> {
    if !(r1 > 0.0 && r1.is_finite()) {
        return Err(Error::Domain("offered load must be positive".into()));
    }
    if !(r > 0.0 && r <= 1.0) {
        return Err(Error::Domain("needy fraction r must lie in (0, 1]".into()));
    }
    Ok(())
}

/// Stationary performance of either model variant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerformanceReport {
    /// Probability that a service request finds all servers busy.
    pub p_delay: f64,
    /// Probability that an arrival is blocked (blocking model) or must hold (holding model).
    pub p_boundary: f64,
    /// Expected wait in the needy queue per service request.
    pub e_wait: f64,
    /// Expected number waiting in the holding room; zero for the blocking model.
    pub e_holding_queue: f64,
    pub rho_s: f64,
    pub rho_n: f64,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn loads_for_reference_instances() {
        let l = derive_loads(&ModelParams::new(2.0, 1.0, 0.25, 0.75).unwrap()).unwrap();
        assert!(close(l.r1, 8.0, 1e-12) && close(l.r2, 24.0, 1e-12) && close(l.r, 0.25, 1e-12));

        let l = derive_loads(&ModelParams::new(0.32, 4.0, 0.4, 0.975).unwrap()).unwrap();
        assert!(close(l.r1, 3.2, 1e-12));
        assert!(close(l.r1 / l.r, 34.4, 1e-10));
        assert!(close(l.r, 0.093, 5e-4));

        let l = derive_loads(&ModelParams::new(1.0, 1.0, 1.0, 0.0).unwrap()).unwrap();
        assert_eq!((l.r1, l.r2, l.r), (1.0, 0.0, 1.0));

        let l = derive_loads(&ModelParams::new(7.0, 6.67, 2.18, 0.76).unwrap()).unwrap();
        assert!(close(l.r, 0.301, 5e-4));
    }

    #[test]
    fn rejects_full_return() {
        assert!(ModelParams::new(1.0, 1.0, 1.0, 1.0).is_err());
        let bad = ModelParams { lambda: 1.0, mu: 1.0, delta: 1.0, p: 1.0 };
        assert!(derive_loads(&bad).is_err());
        assert!(ModelParams::new(0.0, 1.0, 1.0, 0.5).is_err());
    }

    #[test]
    fn capacity_examples() {
        let r = 0.4 / (0.4 + 0.975 * 4.0);
        assert_eq!(
            qed_capacity(3.2, r, QedPair::new(0.36, 1.0)).unwrap(),
            CapacityPair { s: 4, n: 40 }
        );
        assert_eq!(
            qed_capacity(3.2, r, QedPair::new(0.46, 2.0)).unwrap(),
            CapacityPair { s: 5, n: 46 }
        );
        assert_eq!(
            qed_capacity(4.0, 1.0, QedPair::new(0.0, 0.0)).unwrap(),
            CapacityPair { s: 4, n: 4 }
        );
        assert_eq!(
            qed_capacity(1.0, 0.5, QedPair::new(-5.0, -5.0)).unwrap(),
            CapacityPair { s: 1, n: 1 }
        );
    }

    #[test]
    fn nearest_rounding_for_beds() {
        let pair = QedPair::new(1.0, 1.0);
        let floor = qed_capacity(250.0, 0.25, pair).unwrap();
        let nearest = qed_capacity_with(250.0, 0.25, pair, BedRounding::Nearest).unwrap();
        assert_eq!(floor, CapacityPair { s: 266, n: 1031 });
        assert_eq!(nearest, CapacityPair { s: 266, n: 1032 });
    }

    #[test]
    fn inversion_examples() {
        let q = invert_capacity(CapacityPair { s: 8, n: 32 }, 8.0, 0.25).unwrap();
        assert!(close(q.beta, 0.0, 1e-12) && close(q.gamma, 0.0, 1e-12));
        let r = 0.4 / (0.4 + 0.975 * 4.0);
        let q = invert_capacity(CapacityPair { s: 4, n: 40 }, 3.2, r).unwrap();
        assert!(close(q.beta, 0.8 / 3.2f64.sqrt(), 1e-12));
        assert!(close(q.beta, 0.447, 1e-3) && close(q.gamma, 0.955, 1e-3));
    }
}
