//! Modified offered load and time-varying square-root staffing.

use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{qed_capacity, CapacityPair, ModelParams, QedPair};

/// Piecewise-linear arrival rate, optionally periodic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArrivalProfile {
    pub breakpoints: Vec<f64>,
    pub rates: Vec<f64>,
    #[serde(default)]
    pub period: Option<f64>,
}

impl ArrivalProfile {
    pub fn new(breakpoints: Vec<f64>, rates: Vec<f64>, period: Option<f64>) -> Result<Self> {
        let p = Self { breakpoints, rates, period };
        p.validate()?;
        Ok(p)
    }

    pub fn constant(rate: f64) -> Result<Self> {
        Self::new(vec![0.0], vec![rate], None)
    }

    pub fn validate(&self) -> Result<()> {
        if self.breakpoints.is_empty() || self.breakpoints.len() != self.rates.len() {
            return Err(Error::Domain("profile needs matching, non-empty breakpoints and rates".into()));
        }
        if self.breakpoints.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Domain("profile breakpoints must be strictly ascending".into()));
        }
        if self.rates.iter().any(|r| !(r.is_finite() && *r >= 0.0)) {
            return Err(Error::Domain("profile rates must be finite and non-negative".into()));
        }
        if let Some(period) = self.period {
            let span = self.breakpoints[self.breakpoints.len() - 1] - self.breakpoints[0];
            if !(period.is_finite() && period > 0.0 && span < period) {
                return Err(Error::Domain(
                    "profile period must be positive and exceed the breakpoint span".into(),
                ));
            }
        }
        Ok(())
    }

    /// Knots over one period, with the first knot repeated one period later.
    fn cycle(&self) -> (Vec<f64>, Vec<f64>) {
        let mut t = self.breakpoints.clone();
        let mut r = self.rates.clone();
        if let Some(period) = self.period {
            t.push(self.breakpoints[0] + period);
            r.push(self.rates[0]);
        }
        (t, r)
    }

    fn fold(&self, t: f64) -> f64 {
        match self.period {
            Some(period) => {
                let t0 = self.breakpoints[0];
                t0 + (t - t0).rem_euclid(period)
            }
            None => t,
        }
    }

    pub fn rate(&self, t: f64) -> f64 {
        let (knots, rates) = self.cycle();
        let t = self.fold(t);
        if t <= knots[0] {
            return rates[0];
        }
        let last = knots.len() - 1;
        if t >= knots[last] {
            return rates[last];
        }
        let k = knots.partition_point(|&x| x <= t) - 1;
        let w = (t - knots[k]) / (knots[k + 1] - knots[k]);
        rates[k] + w * (rates[k + 1] - rates[k])
    }

    /// Time-average rate over one period, or over the breakpoint span.
    pub fn mean_rate(&self) -> f64 {
        let (knots, rates) = self.cycle();
        if knots.len() == 1 {
            return rates[0];
        }
        let area: f64 = knots
            .windows(2)
            .zip(rates.windows(2))
            .map(|(t, r)| 0.5 * (t[1] - t[0]) * (r[0] + r[1]))
            .sum();
        area / (knots[knots.len() - 1] - knots[0])
    }

    pub fn max_rate(&self) -> f64 {
        self.rates.iter().copied().fold(0.0, f64::max)
    }

    /// Breakpoint times (unfolded) strictly inside `(a, b)`.
    fn kinks_between(&self, a: f64, b: f64) -> Vec<f64> {
        let mut out = Vec::new();
        match self.period {
            Some(period) => {
                let t0 = self.breakpoints[0];
                let mut cycle = ((a - t0) / period).floor() - 1.0;
                loop {
                    let base = cycle * period;
                    if t0 + base >= b {
                        break;
                    }
                    out.extend(
                        self.breakpoints
                            .iter()
                            .map(|x| x + base)
                            .filter(|&x| x > a && x < b),
                    );
                    cycle += 1.0;
                }
            }
            None => out.extend(self.breakpoints.iter().copied().filter(|&x| x > a && x < b)),
        }
        out
    }
}

/// Illustrative weekday emergency-department arrival rate per hour.
pub fn case_study_profile() -> ArrivalProfile {
    let rates = vec![
        6.0, 5.0, 4.5, 4.0, 4.0, 4.5, 6.0, 9.0, 13.0, 17.0, 18.5, 19.0, 18.5, 17.5, 16.0, 15.0,
        14.0, 13.5, 13.0, 12.5, 12.0, 11.0, 9.0, 7.5,
    ];
    let breakpoints = (0..rates.len()).map(|h| h as f64).collect();
    ArrivalProfile { breakpoints, rates, period: Some(24.0) }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoadTrajectory {
    pub grid: Vec<f64>,
    pub r1: Vec<f64>,
    pub r2: Vec<f64>,
    pub period: Option<f64>,
}

impl LoadTrajectory {
    /// Linear interpolation of `(R1, R2)` at `t`, clamped to the grid.
    pub fn at(&self, t: f64) -> (f64, f64) {
        let g = &self.grid;
        if t <= g[0] {
            return (self.r1[0], self.r2[0]);
        }
        let last = g.len() - 1;
        if t >= g[last] {
            return (self.r1[last], self.r2[last]);
        }
        let k = g.partition_point(|&x| x <= t) - 1;
        let w = (t - g[k]) / (g[k + 1] - g[k]);
        (
            self.r1[k] + w * (self.r1[k + 1] - self.r1[k]),
            self.r2[k] + w * (self.r2[k + 1] - self.r2[k]),
        )
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "t,r1,r2")?;
        for i in 0..self.grid.len() {
            writeln!(out, "{},{:.12e},{:.12e}", self.grid[i], self.r1[i], self.r2[i])?;
        }
        Ok(())
    }
}

struct LoadOde<'a> {
    profile: &'a ArrivalProfile,
    mu: f64,
    delta: f64,
    p: f64,
}

impl LoadOde<'_> {
    fn deriv(&self, t: f64, y: [f64; 2]) -> [f64; 2] {
        [
            self.profile.rate(t) + self.delta * y[1] - self.mu * y[0],
            self.p * self.mu * y[0] - self.delta * y[1],
        ]
    }

    fn rk4(&self, t: f64, y: [f64; 2], h: f64) -> [f64; 2] {
        let add = |y: [f64; 2], k: [f64; 2], c: f64| [y[0] + c * k[0], y[1] + c * k[1]];
        let k1 = self.deriv(t, y);
        let k2 = self.deriv(t + 0.5 * h, add(y, k1, 0.5 * h));
        let k3 = self.deriv(t + 0.5 * h, add(y, k2, 0.5 * h));
        let k4 = self.deriv(t + h, add(y, k3, h));
        [
            y[0] + h / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]),
            y[1] + h / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]),
        ]
    }

    /// Integrates from `a` to `b` with steps of at most `h`, stepping exactly
    /// onto every profile breakpoint so the forcing is smooth within a step.
    fn advance(&self, a: f64, b: f64, mut y: [f64; 2], h: f64) -> [f64; 2] {
        let mut stops = self.profile.kinks_between(a, b);
        stops.push(b);
        let mut t = a;
        for stop in stops {
            let m = ((stop - t) / h).ceil().max(1.0) as usize;
            let dt = (stop - t) / m as f64;
            for i in 0..m {
                y = self.rk4(t + i as f64 * dt, y, dt);
            }
            t = stop;
        }
        y
    }
}

/// One minute when time is measured in hours.
pub const DEFAULT_STEP: f64 = 1.0 / 60.0;
const WARM_TOL: f64 = 1e-9;
const MIN_WARM_PERIODS: usize = 3;
const MAX_WARM_PERIODS: usize = 1000;

/// Offered loads `R1(t)`, `R2(t)` on `[0, horizon]` sampled every `step`.
///
/// A periodic profile starts from its periodic steady state: the system is
/// integrated period by period from the stationary loads at the mean rate
/// until the state repeats.
pub fn integrate_offered_load(
    profile: &ArrivalProfile,
    params: &ModelParams,
    horizon: f64,
    step: f64,
) -> Result<LoadTrajectory> {
    profile.validate()?;
    params.validate()?;
    if !(step > 0.0 && horizon > 0.0 && step.is_finite() && horizon.is_finite()) {
        return Err(Error::Domain("step and horizon must be positive".into()));
    }
    let ModelParams { mu, delta, p, .. } = *params;
    let ode = LoadOde { profile, mu, delta, p };
    let mean = profile.mean_rate();
    let mut y = [mean / ((1.0 - p) * mu), p * mean / ((1.0 - p) * delta)];

    if let Some(period) = profile.period {
        for k in 0.. {
            let next = ode.advance(0.0, period, y, step);
            let scale = next[0].abs().max(next[1].abs()).max(1.0);
            let change = (next[0] - y[0]).abs().max((next[1] - y[1]).abs()) / scale;
            y = next;
            if k + 1 >= MIN_WARM_PERIODS && change < WARM_TOL {
                break;
            }
            if k + 1 >= MAX_WARM_PERIODS {
                return Err(Error::NoConvergence { residual: change });
            }
        }
    }

    let m = (horizon / step - 1e-9).ceil().max(1.0) as usize;
    let mut grid = Vec::with_capacity(m + 1);
    let mut r1 = Vec::with_capacity(m + 1);
    let mut r2 = Vec::with_capacity(m + 1);
    grid.push(0.0);
    r1.push(y[0]);
    r2.push(y[1]);
    let mut t = 0.0;
    for i in 1..=m {
        let next_t = (i as f64 * step).min(horizon);
        y = ode.advance(t, next_t, y, step);
        t = next_t;
        grid.push(t);
        r1.push(y[0].max(0.0));
        r2.push(y[1].max(0.0));
    }
    Ok(LoadTrajectory { grid, r1, r2, period: profile.period })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StaffingSchedule {
    pub interval: f64,
    pub s: Vec<u32>,
    pub n: Vec<u32>,
    pub pair: QedPair,
    /// Repeat the schedule with this period when set.
    pub period: Option<f64>,
}

impl StaffingSchedule {
    pub fn constant(cap: CapacityPair, horizon: f64, interval: f64) -> Self {
        let m = (horizon / interval - 1e-9).ceil().max(1.0) as usize;
        Self {
            interval,
            s: vec![cap.s; m],
            n: vec![cap.n; m],
            pair: QedPair::new(f64::NAN, f64::NAN),
            period: None,
        }
    }

    pub fn len(&self) -> usize {
        self.s.len()
    }

    pub fn is_empty(&self) -> bool {
        self.s.is_empty()
    }

    pub fn span(&self) -> f64 {
        self.interval * self.len() as f64
    }

    /// Index of the interval in force at time `t`.
    pub fn index(&self, t: f64) -> Result<usize> {
        let t = match self.period {
            Some(period) => t.rem_euclid(period),
            None => t,
        };
        if !(t >= 0.0) {
            return Err(Error::ScheduleGap(t));
        }
        let k = (t / self.interval).floor() as usize;
        if k < self.len() {
            Ok(k)
        } else if self.period.is_some() {
            // Rounding at the period end.
            Ok(self.len() - 1)
        } else {
            Err(Error::ScheduleGap(t))
        }
    }

    pub fn at(&self, t: f64) -> Result<CapacityPair> {
        let k = self.index(t)?;
        Ok(CapacityPair { s: self.s[k], n: self.n[k] })
    }

    /// Absolute time of the next change of interval after `t`.
    pub fn next_boundary(&self, t: f64) -> f64 {
        ((t / self.interval).floor() + 1.0) * self.interval
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "t_start,t_end,s,n")?;
        for k in 0..self.len() {
            let a = k as f64 * self.interval;
            writeln!(out, "{},{},{},{}", a, a + self.interval, self.s[k], self.n[k])?;
        }
        Ok(())
    }
}

/// Square-root staffing at the load of each interval midpoint.
pub fn mol_schedule(traj: &LoadTrajectory, pair: QedPair, interval: f64) -> Result<StaffingSchedule> {
    if !(interval > 0.0 && interval.is_finite()) {
        return Err(Error::Domain("interval must be positive".into()));
    }
    let horizon = traj.grid[traj.grid.len() - 1];
    let m = (horizon / interval - 1e-9).ceil().max(1.0) as usize;
    let mut s = Vec::with_capacity(m);
    let mut n = Vec::with_capacity(m);
    for k in 0..m {
        let mid = ((k as f64 + 0.5) * interval).min(horizon);
        let (r1, r2) = traj.at(mid);
        let cap = if r1 > 0.0 {
            qed_capacity(r1, r1 / (r1 + r2), pair)?
        } else {
            CapacityPair { s: 1, n: 1 }
        };
        s.push(cap.s);
        n.push(cap.n);
    }
    let period = traj
        .period
        .filter(|p| (m as f64 * interval - p).abs() < 1e-9 * p.max(1.0));
    Ok(StaffingSchedule { interval, s, n, pair, period })
}
