use std::path::PathBuf;

use clap::Args;
use erlangr::heuristic::holding_approx;
use erlangr::limits::{blocking_limits, halfin_whitt_delay, loss_model_limits};
use erlangr::model::{ModelParams, QedPair};
use serde::Deserialize;
use serde_json::{json, Value};

use crate::output::{emit, num, Format, Report};
use crate::{Failure, RunConfig};

#[derive(Debug, Args)]
pub struct LimitsArgs {
    /// Server hedge.
    #[arg(long, allow_negative_numbers = true, required_unless_present = "batch")]
    pub beta: Option<f64>,
    /// Bed hedge.
    #[arg(long, allow_negative_numbers = true, required_unless_present = "batch")]
    pub gamma: Option<f64>,
    /// Needy fraction; derived from --delta and --p when absent.
    #[arg(long, conflicts_with_all = ["delta", "p"])]
    pub r: Option<f64>,
    /// Service rate, scales the wait limits.
    #[arg(long, default_value_t = 1.0)]
    pub mu: f64,
    #[arg(long, requires = "p")]
    pub delta: Option<f64>,
    #[arg(long, requires = "delta")]
    pub p: Option<f64>,
    /// Limits of the model without returns, `r = 1`.
    #[arg(long)]
    pub loss: bool,
    /// CSV with columns beta,gamma[,r[,mu]]; one output row per input row.
    #[arg(long, conflicts_with_all = ["beta", "gamma"])]
    pub batch: Option<PathBuf>,
}

#[derive(Debug, Deserialize)]
struct BatchRow {
    beta: f64,
    gamma: f64,
    r: Option<f64>,
    mu: Option<f64>,
}

fn needy_fraction(a: &LimitsArgs) -> Result<Option<f64>, Failure> {
    match (a.r, a.delta, a.p) {
        (Some(r), _, _) => Ok(Some(r)),
        (None, Some(delta), Some(p)) => Ok(Some(ModelParams::new(1.0, a.mu, delta, p)?.needy_fraction())),
        _ => Ok(None),
    }
}

fn check_r(r: f64) -> Result<(), Failure> {
    if r == 1.0 {
        return Err(Failure::usage("r = 1 has no content phase; use --loss for the loss-model limits"));
    }
    if !(r > 0.0 && r < 1.0) {
        return Err(Failure::usage(format!("r = {r} must lie in (0, 1)")));
    }
    Ok(())
}

fn loss_row(beta: f64, gamma: f64) -> Result<Value, Failure> {
    let l = loss_model_limits(beta, gamma)?;
    Ok(json!({ "beta": beta, "gamma": gamma, "g": l.g, "f": l.f }))
}

/// Blocking limits, the open-model delay and the holding heuristic. The
/// heuristic is null when its fixed point is infeasible.
fn limit_row(beta: f64, gamma: f64, r: f64, mu: f64) -> Result<(Value, Option<erlangr::Error>), Failure> {
    check_r(r)?;
    let b = blocking_limits(beta, gamma, r, mu)?;
    let hw = if beta > 0.0 { Some(halfin_whitt_delay(beta)?) } else { None };
    let (holding, err) = match holding_approx(QedPair::new(beta, gamma), r, mu) {
        Ok(h) => (
            json!({
                "g": h.g,
                "h": h.h,
                "alpha": h.fixed_point.alpha,
                "effective_beta": h.fixed_point.effective_beta,
                "effective_gamma": h.fixed_point.effective_gamma,
            }),
            None,
        ),
        Err(e @ (erlangr::Error::Infeasible { .. } | erlangr::Error::NoConvergence { .. })) => (Value::Null, Some(e)),
        Err(e) => return Err(e.into()),
    };
    let row = json!({
        "beta": beta,
        "gamma": gamma,
        "r": r,
        "mu": mu,
        "blocking": { "g": b.g, "f": b.f, "h": b.h },
        "g_hw": hw.map(num).unwrap_or(Value::Null),
        "holding": holding,
    });
    Ok((row, err))
}

pub fn run(a: &LimitsArgs, cfg: &RunConfig) -> Result<(), Failure> {
    let r = needy_fraction(a)?;
    if let Some(path) = &a.batch {
        let mut reader = csv::Reader::from_path(path)
            .map_err(|e| Failure::usage(format!("cannot read {}: {e}", path.display())))?;
        let mut rows = Vec::new();
        for rec in reader.deserialize::<BatchRow>() {
            let rec = rec.map_err(|e| Failure::usage(format!("{}: {e}", path.display())))?;
            let row = if a.loss {
                loss_row(rec.beta, rec.gamma)?
            } else {
                let r = rec.r.or(r).ok_or_else(|| Failure::usage("batch rows need r, or pass --r"))?;
                limit_row(rec.beta, rec.gamma, r, rec.mu.unwrap_or(a.mu))?.0
            };
            rows.push(row);
        }
        return emit(&Report::table(Value::Array(rows.clone()), rows), cfg, Format::Json);
    }
    let (beta, gamma) = (a.beta.unwrap(), a.gamma.unwrap());
    if a.loss {
        return emit(&Report::single(loss_row(beta, gamma)?), cfg, Format::Json);
    }
    let r = r.ok_or_else(|| Failure::usage("pass --r, or --delta with --p (or --loss for r = 1)"))?;
    let (row, err) = limit_row(beta, gamma, r, a.mu)?;
    emit(&Report::single(row), cfg, Format::Json)?;
    match err {
        Some(e) => Err(e.into()),
        None => Ok(()),
    }
}
