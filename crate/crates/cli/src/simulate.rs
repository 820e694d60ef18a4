use std::path::{Path, PathBuf};

use clap::Args;
use erlangr::model::{CapacityPair, ModelParams, QedPair};
use erlangr::mol::{integrate_offered_load, mol_schedule, DEFAULT_STEP};
use erlangr::sim::{simulate, time_varying_simulate, Metric, SimConfig, SimResult};
use serde::Deserialize;
use serde_json::{json, Value};

use crate::mol::load_profile;
use crate::output::{create, emit, to_value, write_csv, Format, Report};
use crate::{Failure, RunConfig};

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ParamSpec {
    /// Ignored for time-varying runs, where the profile sets the rate.
    lambda: Option<f64>,
    mu: f64,
    delta: f64,
    p: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScheduleSpec {
    profile: String,
    beta: f64,
    gamma: f64,
    #[serde(default = "half_hour")]
    interval: f64,
    #[serde(default = "default_step")]
    step: f64,
}

fn half_hour() -> f64 {
    0.5
}

fn default_step() -> f64 {
    DEFAULT_STEP
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SimFile {
    params: ParamSpec,
    capacity: Option<CapacityPair>,
    schedule: Option<ScheduleSpec>,
    sim: SimConfig,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// JSON configuration file.
    pub config: PathBuf,
    /// Directory for summary.json, strata.csv and, when recorded, series.csv and events.csv.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

fn read_config(path: &Path) -> Result<SimFile, Failure> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::usage(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))
}

fn metric_rows(res: &SimResult) -> Vec<Value> {
    Metric::ALL
        .iter()
        .filter_map(|&m| res.get(m).map(|e| json!({ "metric": m.name(), "mean": e.mean, "half_width": e.half_width })))
        .collect()
}

fn strata_rows(res: &SimResult) -> Vec<Value> {
    res.visit_strata
        .iter()
        .map(|s| {
            json!({
                "visits": s.visits,
                "patients": s.patients,
                "hold_wait": s.hold_wait.mean,
                "hold_wait_hw": s.hold_wait.half_width,
                "needy_wait": s.needy_wait.mean,
                "needy_wait_hw": s.needy_wait.half_width,
                "total_wait": s.total_wait.mean,
                "total_wait_hw": s.total_wait.half_width,
            })
        })
        .collect()
}

fn write_outputs(dir: &Path, doc: &Value, res: &SimResult) -> Result<(), Failure> {
    std::fs::create_dir_all(dir).map_err(Failure::io)?;
    let mut summary = create(&dir.join("summary.json"))?;
    serde_json::to_writer_pretty(&mut summary, doc).map_err(Failure::io)?;
    let strata = Report::table(Value::Null, strata_rows(res));
    write_csv(strata.rows.as_deref().unwrap_or(&[]), create(&dir.join("strata.csv"))?).map_err(Failure::io)?;
    if let Some(ts) = &res.time_series {
        ts.write_csv(create(&dir.join("series.csv"))?).map_err(Failure::io)?;
    }
    if !res.event_log.is_empty() {
        res.write_event_log(create(&dir.join("events.csv"))?).map_err(Failure::io)?;
    }
    Ok(())
}

pub fn run(a: &SimulateArgs, cfg: &RunConfig) -> Result<(), Failure> {
    let file = read_config(&a.config)?;
    let base = a.config.parent().unwrap_or(Path::new("."));
    let mut sim = file.sim;
    if let Some(seed) = cfg.seed {
        sim.seed = seed;
    }
    let ParamSpec { lambda, mu, delta, p } = file.params;
    let (res, setup) = match (file.capacity, file.schedule) {
        (Some(cap), None) => {
            let lambda = lambda.ok_or_else(|| Failure::usage("stationary runs need params.lambda"))?;
            let params = ModelParams::new(lambda, mu, delta, p)?;
            let cap = CapacityPair::new(cap.s, cap.n)?;
            if cap.s > cap.n {
                eprintln!("warning: s = {} exceeds n = {}; at most n servers can be busy", cap.s, cap.n);
            }
            cfg.note(format!("simulating {:?} with s={} n={}", sim.model, cap.s, cap.n));
            let res = simulate(&params, cap, &sim)?;
            (res, json!({ "params": to_value(&params), "capacity": to_value(&cap) }))
        }
        (None, Some(spec)) => {
            let profile = load_profile(&spec.profile, base)?;
            let params = ModelParams::new(profile.mean_rate().max(f64::MIN_POSITIVE), mu, delta, p)?;
            let horizon = profile.period.unwrap_or(sim.horizon);
            let traj = integrate_offered_load(&profile, &params, horizon, spec.step)?;
            let sched = mol_schedule(&traj, QedPair::new(spec.beta, spec.gamma), spec.interval)?;
            cfg.note(format!("simulating {:?} over {} staffing intervals", sim.model, sched.len()));
            let res = time_varying_simulate(&profile, &sched, &params, &sim)?;
            let setup = json!({
                "params": { "mu": mu, "delta": delta, "p": p },
                "schedule": { "profile": spec.profile, "pair": to_value(&sched.pair), "interval": sched.interval, "s": sched.s, "n": sched.n },
            });
            (res, setup)
        }
        _ => return Err(Failure::usage("the configuration needs exactly one of capacity and schedule")),
    };
    let mut doc = setup;
    doc["seed"] = json!(sim.seed);
    doc["result"] = to_value(&res);
    let report = Report::table(doc, metric_rows(&res));
    if let Some(dir) = &a.out_dir {
        write_outputs(dir, &report.json, &res)?;
    }
    emit(&report, cfg, Format::Json)
}
