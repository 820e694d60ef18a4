//! Accumulators, interval estimates and time grids for the simulator.

use serde::{Deserialize, Serialize};

use crate::special::t_quantile_975;

/// Point estimate with a 95% confidence half-width.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub half_width: f64,
}

impl Estimate {
    pub fn lower(&self) -> f64 {
        self.mean - self.half_width
    }

    pub fn upper(&self) -> f64 {
        self.mean + self.half_width
    }

    pub fn contains(&self, x: f64) -> bool {
        (x - self.mean).abs() <= self.half_width
    }
}

/// Student-t half-width of the mean of `samples`; NaN entries are skipped.
pub fn half_width(samples: &[f64]) -> f64 {
    let xs: Vec<f64> = samples.iter().copied().filter(|x| x.is_finite()).collect();
    let m = xs.len();
    if m < 2 {
        return f64::NAN;
    }
    let mean = xs.iter().sum::<f64>() / m as f64;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (m - 1) as f64;
    t_quantile_975(m - 1) * (var / m as f64).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    /// Time fraction with all servers busy.
    PDelay,
    /// Fraction of service requests that had to wait.
    PDelayRequests,
    /// Fraction of arrivals blocked or sent to the holding room.
    PBoundary,
    EWait,
    EHoldingQueue,
    RhoS,
    RhoN,
    MeanNeedy,
    MeanNeedyQueue,
    MeanCensus,
    PFull,
    EHoldingWait,
    RequestRate,
    PatientsPerServer,
    MeanServers,
    MeanBeds,
    /// Total needy-queue wait per departing patient.
    ECumulativeWait,
}

impl Metric {
    pub const ALL: [Metric; 17] = [
        Metric::PDelay,
        Metric::PDelayRequests,
        Metric::PBoundary,
        Metric::EWait,
        Metric::EHoldingQueue,
        Metric::RhoS,
        Metric::RhoN,
        Metric::MeanNeedy,
        Metric::MeanNeedyQueue,
        Metric::MeanCensus,
        Metric::PFull,
        Metric::EHoldingWait,
        Metric::RequestRate,
        Metric::PatientsPerServer,
        Metric::MeanServers,
        Metric::MeanBeds,
        Metric::ECumulativeWait,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Metric::PDelay => "p_delay",
            Metric::PDelayRequests => "p_delay_requests",
            Metric::PBoundary => "p_boundary",
            Metric::EWait => "e_wait",
            Metric::EHoldingQueue => "e_holding_queue",
            Metric::RhoS => "rho_s",
            Metric::RhoN => "rho_n",
            Metric::MeanNeedy => "mean_needy",
            Metric::MeanNeedyQueue => "mean_needy_queue",
            Metric::MeanCensus => "mean_census",
            Metric::PFull => "p_full",
            Metric::EHoldingWait => "e_holding_wait",
            Metric::RequestRate => "request_rate",
            Metric::PatientsPerServer => "patients_per_server",
            Metric::MeanServers => "mean_servers",
            Metric::MeanBeds => "mean_beds",
            Metric::ECumulativeWait => "e_cumulative_wait",
        }
    }
}

/// State seen between two events.
#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct Snapshot {
    pub needy: usize,
    pub busy: usize,
    pub servers: usize,
    pub inside: usize,
    pub beds: usize,
    pub holding: usize,
}

/// Sums over one batch or time bin.
#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct Acc {
    pub time: f64,
    pub delay_time: f64,
    pub busy: f64,
    pub servers: f64,
    pub inside: f64,
    pub inside_capped: f64,
    pub beds: f64,
    pub full_time: f64,
    pub holding: f64,
    pub needy: f64,
    pub queue: f64,
    pub arrivals: f64,
    pub boundary: f64,
    pub requests: f64,
    pub delayed: f64,
    pub wait_sum: f64,
    pub wait_count: f64,
    pub admitted: f64,
    pub hold_wait_sum: f64,
    pub departed: f64,
    pub cumulative_wait_sum: f64,
}

fn ratio(a: f64, b: f64) -> f64 {
    if b > 0.0 {
        a / b
    } else {
        f64::NAN
    }
}

impl Acc {
    pub fn add_time(&mut self, dt: f64, s: &Snapshot) {
        self.time += dt;
        if s.needy >= s.servers {
            self.delay_time += dt;
        }
        self.busy += dt * s.busy as f64;
        self.servers += dt * s.servers as f64;
        self.inside += dt * s.inside as f64;
        self.inside_capped += dt * s.inside.min(s.beds) as f64;
        self.beds += dt * s.beds as f64;
        if s.inside >= s.beds {
            self.full_time += dt;
        }
        self.holding += dt * s.holding as f64;
        self.needy += dt * s.needy as f64;
        self.queue += dt * (s.needy - s.busy) as f64;
    }

    pub fn merge(&mut self, o: &Acc) {
        self.time += o.time;
        self.delay_time += o.delay_time;
        self.busy += o.busy;
        self.servers += o.servers;
        self.inside += o.inside;
        self.inside_capped += o.inside_capped;
        self.beds += o.beds;
        self.full_time += o.full_time;
        self.holding += o.holding;
        self.needy += o.needy;
        self.queue += o.queue;
        self.arrivals += o.arrivals;
        self.boundary += o.boundary;
        self.requests += o.requests;
        self.delayed += o.delayed;
        self.wait_sum += o.wait_sum;
        self.wait_count += o.wait_count;
        self.admitted += o.admitted;
        self.hold_wait_sum += o.hold_wait_sum;
        self.departed += o.departed;
        self.cumulative_wait_sum += o.cumulative_wait_sum;
    }

    pub fn metric(&self, m: Metric) -> f64 {
        match m {
            Metric::PDelay => ratio(self.delay_time, self.time),
            Metric::PDelayRequests => ratio(self.delayed, self.requests),
            Metric::PBoundary => {
                if self.arrivals > 0.0 {
                    self.boundary / self.arrivals
                } else if self.time > 0.0 {
                    0.0
                } else {
                    f64::NAN
                }
            }
            Metric::EWait => ratio(self.wait_sum, self.wait_count),
            Metric::EHoldingQueue => ratio(self.holding, self.time),
            Metric::RhoS => ratio(self.busy, self.servers),
            Metric::RhoN => ratio(self.inside_capped, self.beds),
            Metric::MeanNeedy => ratio(self.needy, self.time),
            Metric::MeanNeedyQueue => ratio(self.queue, self.time),
            Metric::MeanCensus => ratio(self.inside, self.time),
            Metric::PFull => ratio(self.full_time, self.time),
            Metric::EHoldingWait => ratio(self.hold_wait_sum, self.admitted),
            Metric::RequestRate => ratio(self.requests, self.time),
            Metric::PatientsPerServer => ratio(self.inside, self.servers),
            Metric::MeanServers => ratio(self.servers, self.time),
            Metric::MeanBeds => ratio(self.beds, self.time),
            Metric::ECumulativeWait => ratio(self.cumulative_wait_sum, self.departed),
        }
    }
}

pub(crate) fn total(accs: &[Acc]) -> Acc {
    let mut t = Acc::default();
    for a in accs {
        t.merge(a);
    }
    t
}

/// Pooled point estimate with the spread of `samples` as the interval.
pub(crate) fn estimate(pooled: &Acc, samples: &[Acc], m: Metric) -> Estimate {
    let xs: Vec<f64> = samples.iter().map(|a| a.metric(m)).collect();
    Estimate { mean: pooled.metric(m), half_width: half_width(&xs) }
}

/// Equal-width time bins, optionally folded onto a period.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Grid {
    pub origin: f64,
    pub width: f64,
    pub count: usize,
    pub wrap: bool,
    /// Nothing before this time is recorded.
    pub from: f64,
}

impl Grid {
    fn cell(&self, t: f64) -> f64 {
        ((t - self.origin) / self.width).floor()
    }

    pub fn index(&self, t: f64) -> Option<usize> {
        if t < self.from || t < self.origin {
            return None;
        }
        let k = self.cell(t) as usize;
        if self.wrap {
            Some(k % self.count)
        } else if k < self.count {
            Some(k)
        } else {
            None
        }
    }

    fn next_edge(&self, t: f64) -> f64 {
        let k = self.cell(t);
        let mut edge = self.origin + (k + 1.0) * self.width;
        if edge <= t {
            edge = self.origin + (k + 2.0) * self.width;
        }
        edge
    }

    pub fn add_time(&self, accs: &mut [Acc], a: f64, b: f64, s: &Snapshot) {
        let mut t = a.max(self.from).max(self.origin);
        while t < b {
            let edge = self.next_edge(t).min(b);
            if let Some(k) = self.index(t) {
                accs[k].add_time(edge - t, s);
            }
            t = edge;
        }
    }

    pub fn at<'a>(&self, accs: &'a mut [Acc], t: f64) -> Option<&'a mut Acc> {
        self.index(t).map(move |k| &mut accs[k])
    }
}
