//! Discrete-event simulation of the blocking, holding and closed-ward models.

mod engine;
pub mod stats;

use std::io::{self, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mol::{ArrivalProfile, StaffingSchedule};
use crate::model::{CapacityPair, ModelParams};
use engine::{run_replication, Arrivals, RunOutput, RunSpec, Staffing, StratumAcc};
pub use stats::{Estimate, Metric};
use stats::{estimate, half_width, total, Acc, Grid};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SimModel {
    Blocking,
    Holding,
    ClosedWard,
}

fn default_batches() -> usize {
    30
}
fn default_max_visits() -> usize {
    30
}
fn default_max_log() -> usize {
    100_000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub horizon: f64,
    /// Initial time excluded from all statistics; 20% of the horizon if absent.
    #[serde(default)]
    pub warmup: Option<f64>,
    pub replications: usize,
    pub seed: u64,
    pub model: SimModel,
    /// Keep a sample-path time series and an event log of the first replication.
    #[serde(default)]
    pub record_paths: bool,
    #[serde(default = "default_batches")]
    pub batches: usize,
    /// Number of bins of the sample-path series.
    #[serde(default)]
    pub series_bins: usize,
    /// Visit counts at or above this value share one stratum.
    #[serde(default = "default_max_visits")]
    pub max_visits: usize,
    #[serde(default = "default_max_log")]
    pub max_log_events: usize,
}

impl SimConfig {
    pub fn new(model: SimModel, horizon: f64, replications: usize, seed: u64) -> Self {
        Self {
            horizon,
            warmup: None,
            replications,
            seed,
            model,
            record_paths: false,
            batches: default_batches(),
            series_bins: 0,
            max_visits: default_max_visits(),
            max_log_events: default_max_log(),
        }
    }

    pub fn with_model(&self, model: SimModel) -> Self {
        Self { model, ..self.clone() }
    }

    pub fn warmup_time(&self) -> f64 {
        self.warmup.unwrap_or(0.2 * self.horizon)
    }

    pub fn validate(&self) -> Result<()> {
        let w = self.warmup_time();
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(Error::Domain("horizon must be positive".into()));
        }
        if !(w >= 0.0 && w < self.horizon) {
            return Err(Error::Domain("warmup must lie in [0, horizon)".into()));
        }
        if self.replications == 0 || self.batches == 0 || self.max_visits == 0 {
            return Err(Error::Domain("replications, batches and max_visits must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LogEvent {
    pub patient_id: u64,
    pub event: &'static str,
    pub t: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VisitStratum {
    /// Number of needy visits; the last stratum collects all larger counts.
    pub visits: usize,
    pub patients: u64,
    pub hold_wait: Estimate,
    pub needy_wait: Estimate,
    pub total_wait: Estimate,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Accounting {
    pub arrivals: u64,
    pub admitted: u64,
    pub blocked: u64,
    pub held: u64,
    pub departed: u64,
    /// Patients inside the facility at the end of the run.
    pub in_system: u64,
    /// Patients still in the holding room at the end of the run.
    pub holding: u64,
}

/// Binned statistics with one value per metric and bin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeSeries {
    pub bin_width: f64,
    pub starts: Vec<f64>,
    pub metrics: Vec<SeriesMetric>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesMetric {
    pub metric: Metric,
    pub values: Vec<Estimate>,
}

impl TimeSeries {
    pub fn get(&self, m: Metric) -> Option<&[Estimate]> {
        self.metrics.iter().find(|s| s.metric == m).map(|s| s.values.as_slice())
    }

    /// Writes `t,metric,value` rows, `t` being the bin midpoint.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "t,metric,value")?;
        for (k, start) in self.starts.iter().enumerate() {
            let t = start + 0.5 * self.bin_width;
            for s in &self.metrics {
                let v = s.values[k].mean;
                if v.is_finite() {
                    writeln!(out, "{},{},{}", t, s.metric.name(), v)?;
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimResult {
    pub model: SimModel,
    pub replications: usize,
    pub horizon: f64,
    pub warmup: f64,
    /// Time fraction with all servers busy.
    pub p_delay: Estimate,
    /// Fraction of service requests that had to wait.
    pub p_delay_requests: Estimate,
    /// Fraction of arrivals blocked or held; zero for the closed ward.
    pub p_boundary: Estimate,
    pub e_wait: Estimate,
    pub e_holding_queue: Estimate,
    pub rho_s: Estimate,
    pub rho_n: Estimate,
    pub mean_needy: Estimate,
    pub mean_needy_queue: Estimate,
    pub mean_census: Estimate,
    pub e_holding_wait: Estimate,
    pub request_rate: Estimate,
    /// Total needy-queue wait per departing patient.
    pub e_cumulative_wait: Estimate,
    /// `P(Q1 + Q2 >= k)` for `k = 0, 1, ...`.
    pub census_tail: Vec<f64>,
    /// `P(Q1 >= k)` for `k = 0, 1, ...`.
    pub needy_tail: Vec<f64>,
    pub visit_strata: Vec<VisitStratum>,
    /// Completed patients per visit count, index = visits.
    pub visit_counts: Vec<u64>,
    pub time_series: Option<TimeSeries>,
    #[serde(skip)]
    pub event_log: Vec<LogEvent>,
    /// Summed over replications.
    pub accounting: Accounting,
}

impl SimResult {
    pub fn get(&self, m: Metric) -> Option<Estimate> {
        Some(match m {
            Metric::PDelay => self.p_delay,
            Metric::PDelayRequests => self.p_delay_requests,
            Metric::PBoundary => self.p_boundary,
            Metric::EWait => self.e_wait,
            Metric::EHoldingQueue => self.e_holding_queue,
            Metric::RhoS => self.rho_s,
            Metric::RhoN => self.rho_n,
            Metric::MeanNeedy => self.mean_needy,
            Metric::MeanNeedyQueue => self.mean_needy_queue,
            Metric::MeanCensus => self.mean_census,
            Metric::EHoldingWait => self.e_holding_wait,
            Metric::RequestRate => self.request_rate,
            Metric::ECumulativeWait => self.e_cumulative_wait,
            _ => return None,
        })
    }

    pub fn write_event_log<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "patient_id,event,t")?;
        for e in &self.event_log {
            writeln!(out, "{},{},{}", e.patient_id, e.event, e.t)?;
        }
        Ok(())
    }
}

fn tail(times: &[f64]) -> Vec<f64> {
    let total: f64 = times.iter().sum();
    let mut out = vec![0.0; times.len()];
    let mut acc = 0.0;
    for k in (0..times.len()).rev() {
        acc += times[k];
        out[k] = if total > 0.0 { acc / total } else { f64::NAN };
    }
    out
}

/// Ratio estimate over pooled strata with a half-width from independent samples
/// (replications, or batches of a single run).
fn stratum_estimate(samples: &[StratumAcc], part: fn(&StratumAcc) -> f64) -> Estimate {
    let mut pooled = StratumAcc::default();
    for s in samples {
        pooled.merge(s);
    }
    if pooled.count == 0.0 {
        return Estimate { mean: f64::NAN, half_width: f64::NAN };
    }
    let means: Vec<f64> = samples
        .iter()
        .map(|s| if s.count > 0.0 { part(s) / s.count } else { f64::NAN })
        .collect();
    Estimate { mean: part(&pooled) / pooled.count, half_width: half_width(&means) }
}

fn series_from(bins: &[Vec<Acc>], grid: &Grid) -> TimeSeries {
    let count = grid.count;
    let metrics = Metric::ALL
        .iter()
        .map(|&m| {
            let values = (0..count)
                .map(|k| {
                    let per_rep: Vec<Acc> = bins.iter().map(|b| b[k]).collect();
                    estimate(&total(&per_rep), &per_rep, m)
                })
                .collect();
            SeriesMetric { metric: m, values }
        })
        .collect();
    TimeSeries {
        bin_width: grid.width,
        starts: (0..count).map(|k| grid.origin + k as f64 * grid.width).collect(),
        metrics,
    }
}

fn assemble(cfg: &SimConfig, runs: Vec<RunOutput>, bin_grid: Option<Grid>, pooled_bins: bool) -> SimResult {
    let reps = runs.len();
    let per_rep: Vec<Acc> = runs.iter().map(|r| total(&r.batches)).collect();
    let pooled = total(&per_rep);
    let samples: Vec<Acc> = if reps >= 2 {
        per_rep.clone()
    } else {
        runs[0].batches.clone()
    };
    let est = |m: Metric| estimate(&pooled, &samples, m);

    let hist_len = runs[0].census_time.len();
    let mut census_time = vec![0.0; hist_len];
    let mut needy_time = vec![0.0; hist_len];
    let mut visit_counts = vec![0u64; cfg.max_visits + 1];
    let mut accounting = Accounting::default();
    for r in &runs {
        for k in 0..hist_len {
            census_time[k] += r.census_time[k];
            needy_time[k] += r.needy_time[k];
        }
        for (a, b) in visit_counts.iter_mut().zip(&r.visit_counts) {
            *a += b;
        }
        let c = r.counts;
        accounting.arrivals += c.arrivals;
        accounting.admitted += c.admitted;
        accounting.blocked += c.blocked;
        accounting.held += c.held;
        accounting.departed += c.departed;
        accounting.in_system += c.in_system;
        accounting.holding += c.holding;
    }
    // Independent samples per visit count: one per replication, or one per batch.
    let strata_samples: Vec<Vec<StratumAcc>> = if reps >= 2 {
        runs.iter()
            .map(|r| {
                let mut acc = vec![StratumAcc::default(); cfg.max_visits + 1];
                for batch in &r.strata {
                    for (a, b) in acc.iter_mut().zip(batch) {
                        a.merge(b);
                    }
                }
                acc
            })
            .collect()
    } else {
        runs[0].strata.clone()
    };
    let visit_strata = (1..=cfg.max_visits)
        .map(|v| {
            let column: Vec<StratumAcc> = strata_samples.iter().map(|s| s[v]).collect();
            VisitStratum {
                visits: v,
                patients: column.iter().map(|s| s.count).sum::<f64>() as u64,
                hold_wait: stratum_estimate(&column, |s| s.hold),
                needy_wait: stratum_estimate(&column, |s| s.needy),
                total_wait: stratum_estimate(&column, |s| s.hold + s.needy),
            }
        })
        .collect();

    let time_series = bin_grid.map(|g| {
        if pooled_bins {
            let bins: Vec<Vec<Acc>> = runs.iter().map(|r| r.bins.clone()).collect();
            series_from(&bins, &g)
        } else {
            series_from(&[runs[0].bins.clone()], &g)
        }
    });

    let mut event_log = Vec::new();
    if cfg.record_paths {
        event_log = runs.into_iter().next().map(|r| r.log).unwrap_or_default();
    }

    SimResult {
        model: cfg.model,
        replications: reps,
        horizon: cfg.horizon,
        warmup: cfg.warmup_time(),
        p_delay: est(Metric::PDelay),
        p_delay_requests: est(Metric::PDelayRequests),
        p_boundary: est(Metric::PBoundary),
        e_wait: est(Metric::EWait),
        e_holding_queue: est(Metric::EHoldingQueue),
        rho_s: est(Metric::RhoS),
        rho_n: est(Metric::RhoN),
        mean_needy: est(Metric::MeanNeedy),
        mean_needy_queue: est(Metric::MeanNeedyQueue),
        mean_census: est(Metric::MeanCensus),
        e_holding_wait: est(Metric::EHoldingWait),
        request_rate: est(Metric::RequestRate),
        e_cumulative_wait: est(Metric::ECumulativeWait),
        census_tail: tail(&census_time),
        needy_tail: tail(&needy_time),
        visit_strata,
        visit_counts,
        time_series,
        event_log,
        accounting,
    }
}

fn batch_grid(cfg: &SimConfig) -> Grid {
    let w = cfg.warmup_time();
    Grid {
        origin: w,
        width: (cfg.horizon - w) / cfg.batches as f64,
        count: cfg.batches,
        wrap: false,
        from: w,
    }
}

/// Stationary simulation with fixed capacities.
pub fn simulate(params: &ModelParams, cap: CapacityPair, cfg: &SimConfig) -> Result<SimResult> {
    params.validate()?;
    cfg.validate()?;
    let bins = (cfg.record_paths && cfg.series_bins > 0).then(|| Grid {
        origin: 0.0,
        width: cfg.horizon / cfg.series_bins as f64,
        count: cfg.series_bins,
        wrap: false,
        from: 0.0,
    });
    let runs: Vec<RunOutput> = (0..cfg.replications)
        .into_par_iter()
        .map(|rep| {
            let spec = RunSpec {
                params: *params,
                model: cfg.model,
                arrivals: Arrivals::Constant(params.lambda),
                staffing: Staffing::Fixed(cap),
                horizon: cfg.horizon,
                warmup: cfg.warmup_time(),
                seed: cfg.seed,
                stream: rep as u64,
                batches: batch_grid(cfg),
                bins: if rep == 0 { bins } else { None },
                max_visits: cfg.max_visits,
                hist_len: cap.n as usize + 1,
                max_log_events: if rep == 0 && cfg.record_paths { cfg.max_log_events } else { 0 },
            };
            run_replication(&spec)
        })
        .collect();
    Ok(assemble(cfg, runs, bins, false))
}

/// Simulation under a time-varying arrival rate and staffing schedule.
///
/// Binned statistics use the schedule interval as bin width and are folded
/// onto the period when the schedule repeats.
pub fn time_varying_simulate(
    profile: &ArrivalProfile,
    schedule: &StaffingSchedule,
    params: &ModelParams,
    cfg: &SimConfig,
) -> Result<SimResult> {
    params.validate()?;
    cfg.validate()?;
    profile.validate()?;
    if schedule.is_empty() {
        return Err(Error::ScheduleGap(0.0));
    }
    if schedule.period.is_none() && schedule.span() < cfg.horizon * (1.0 - 1e-12) {
        return Err(Error::ScheduleGap(schedule.span()));
    }
    let max = profile.max_rate();
    if !(max > 0.0) {
        return Err(Error::Domain("arrival profile is identically zero".into()));
    }
    let warmup = cfg.warmup_time();
    let grid = match schedule.period {
        Some(_) => Grid { origin: 0.0, width: schedule.interval, count: schedule.len(), wrap: true, from: warmup },
        None => Grid {
            origin: 0.0,
            width: schedule.interval,
            count: (cfg.horizon / schedule.interval).ceil() as usize,
            wrap: false,
            from: warmup,
        },
    };
    let n_max = schedule.n.iter().copied().max().unwrap_or(1) as usize;
    let runs: Vec<RunOutput> = (0..cfg.replications)
        .into_par_iter()
        .map(|rep| {
            let spec = RunSpec {
                params: *params,
                model: cfg.model,
                arrivals: Arrivals::Profile { profile, max },
                staffing: Staffing::Schedule(schedule),
                horizon: cfg.horizon,
                warmup,
                seed: cfg.seed,
                stream: rep as u64,
                batches: batch_grid(cfg),
                bins: Some(grid),
                max_visits: cfg.max_visits,
                hist_len: n_max + 1,
                max_log_events: if rep == 0 && cfg.record_paths { cfg.max_log_events } else { 0 },
            };
            run_replication(&spec)
        })
        .collect();
    Ok(assemble(cfg, runs, Some(grid), true))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderingCheck {
    pub name: String,
    pub lower: Estimate,
    pub upper: Estimate,
    /// The ordering holds, or is violated by at most one half-width.
    pub holds: bool,
}

impl OrderingCheck {
    fn new(name: &str, lower: Estimate, upper: Estimate) -> Self {
        let slack = lower.half_width.max(upper.half_width);
        let slack = if slack.is_finite() { slack } else { 0.0 };
        Self {
            name: name.into(),
            lower,
            upper,
            holds: lower.mean <= upper.mean + slack,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderingReport {
    pub blocking: SimResult,
    pub holding: SimResult,
    pub closed_ward: SimResult,
    pub checks: Vec<OrderingCheck>,
}

impl OrderingReport {
    pub fn all_hold(&self) -> bool {
        self.checks.iter().all(|c| c.holds)
    }
}

/// Runs the three models on the same parameters and seed and compares them.
pub fn ordering_experiment(params: &ModelParams, cap: CapacityPair, cfg: &SimConfig) -> Result<OrderingReport> {
    let blocking = simulate(params, cap, &cfg.with_model(SimModel::Blocking))?;
    let holding = simulate(params, cap, &cfg.with_model(SimModel::Holding))?;
    let closed_ward = simulate(params, cap, &cfg.with_model(SimModel::ClosedWard))?;
    let n = Estimate { mean: cap.n as f64, half_width: 0.0 };
    let checks = vec![
        OrderingCheck::new("p_delay blocking <= holding", blocking.p_delay, holding.p_delay),
        OrderingCheck::new("p_delay holding <= closed ward", holding.p_delay, closed_ward.p_delay),
        OrderingCheck::new("p_boundary blocking <= holding", blocking.p_boundary, holding.p_boundary),
        OrderingCheck::new("rho_n blocking <= holding", blocking.rho_n, holding.rho_n),
        OrderingCheck::new("census blocking <= holding", blocking.mean_census, holding.mean_census),
        OrderingCheck::new("census holding <= n", holding.mean_census, n),
        OrderingCheck::new("needy blocking <= holding", blocking.mean_needy, holding.mean_needy),
        OrderingCheck::new("needy holding <= closed ward", holding.mean_needy, closed_ward.mean_needy),
    ];
    Ok(OrderingReport { blocking, holding, closed_ward, checks })
}

/// Half-width of a sample mean; exposed for callers that pool their own runs.
pub fn sample_half_width(samples: &[f64]) -> f64 {
    half_width(samples)
}
