use std::path::{Path, PathBuf};

use clap::Args;
use erlangr::model::{ModelParams, QedPair};
use erlangr::mol::{case_study_profile, integrate_offered_load, mol_schedule, ArrivalProfile, DEFAULT_STEP};
use serde_json::{json, Value};

use crate::output::{create, emit, to_value, Format, Report};
use crate::{Failure, RunConfig};

/// Name of the bundled profile accepted wherever a profile file is expected.
pub const CASE_STUDY: &str = "case_study";

/// Loads a profile by name or from a JSON file, relative paths resolved against `base`.
pub fn load_profile(spec: &str, base: &Path) -> Result<ArrivalProfile, Failure> {
    if spec == CASE_STUDY {
        return Ok(case_study_profile());
    }
    let path = base.join(spec);
    let text = std::fs::read_to_string(&path)
        .map_err(|e| Failure::usage(format!("cannot read profile {}: {e}", path.display())))?;
    let profile: ArrivalProfile = serde_json::from_str(&text)
        .map_err(|e| Failure::usage(format!("profile {}: {e}", path.display())))?;
    profile.validate()?;
    Ok(profile)
}

#[derive(Debug, Args)]
pub struct MolArgs {
    /// Profile JSON file, or `case_study` for the bundled one.
    #[arg(long, default_value = CASE_STUDY)]
    pub profile: String,
    #[arg(long)]
    pub mu: f64,
    #[arg(long)]
    pub delta: f64,
    #[arg(long)]
    pub p: f64,
    #[arg(long, allow_negative_numbers = true)]
    pub beta: f64,
    #[arg(long, allow_negative_numbers = true)]
    pub gamma: f64,
    /// Length of a staffing interval.
    #[arg(long, default_value_t = 0.5)]
    pub interval: f64,
    /// Time covered; defaults to one period of a periodic profile.
    #[arg(long)]
    pub horizon: Option<f64>,
    /// Integration step of the load equations.
    #[arg(long, default_value_t = DEFAULT_STEP)]
    pub step: f64,
    /// Also write the load trajectory as CSV here.
    #[arg(long)]
    pub trajectory: Option<PathBuf>,
}

pub fn run(a: &MolArgs, cfg: &RunConfig) -> Result<(), Failure> {
    let profile = load_profile(&a.profile, Path::new("."))?;
    let horizon = a
        .horizon
        .or(profile.period)
        .ok_or_else(|| Failure::usage("a profile without period needs --horizon"))?;
    let params = ModelParams::new(profile.mean_rate().max(f64::MIN_POSITIVE), a.mu, a.delta, a.p)?;
    let traj = integrate_offered_load(&profile, &params, horizon, a.step)?;
    let pair = QedPair::new(a.beta, a.gamma);
    let sched = mol_schedule(&traj, pair, a.interval)?;
    cfg.note(format!("{} intervals", sched.len()));
    if let Some(path) = &a.trajectory {
        traj.write_csv(create(path)?).map_err(Failure::io)?;
    }
    let rows: Vec<Value> = (0..sched.len())
        .map(|k| {
            let start = k as f64 * a.interval;
            let mid = ((k as f64 + 0.5) * a.interval).min(horizon);
            let (r1, r2) = traj.at(mid);
            json!({
                "start": start,
                "end": (start + a.interval).min(horizon),
                "s": sched.s[k],
                "n": sched.n[k],
                "lambda": profile.rate(mid),
                "r1": r1,
                "r2": r2,
            })
        })
        .collect();
    let doc = json!({
        "profile": a.profile,
        "mu": a.mu,
        "delta": a.delta,
        "p": a.p,
        "pair": to_value(&pair),
        "interval": a.interval,
        "period": sched.period,
        "schedule": rows,
    });
    emit(&Report::table(doc, rows), cfg, Format::Csv)
}
