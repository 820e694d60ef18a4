use clap::{Args, ValueEnum};
use erlangr::blocking::{perf_blocking, stationary_blocking};
use erlangr::model::{derive_loads, invert_capacity, CapacityPair};
use erlangr::qbd::{offered_utilization, perf_holding, request_measures, rho_max, solve_holding, RateMethod, RateOptions};
use serde_json::json;

use crate::output::{emit, to_value, Format, Report};
use crate::{Failure, ModelKind, ParamArgs, RunConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum View {
    /// As seen by service requests.
    Request,
    /// Time-stationary.
    State,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    #[arg(long, value_enum)]
    pub model: ModelKind,
    #[command(flatten)]
    pub params: ParamArgs,
    /// Servers.
    #[arg(long)]
    pub s: u32,
    /// Beds.
    #[arg(long)]
    pub n: u32,
    /// Blocking model: delay measures per service request or per unit time.
    #[arg(long, value_enum, default_value = "request")]
    pub view: View,
    /// Holding model: iteration for the rate matrix.
    #[arg(long, value_enum, default_value = "functional")]
    pub method: Method,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Method {
    Functional,
    Log,
}

pub fn run(a: &AnalyzeArgs, cfg: &RunConfig) -> Result<(), Failure> {
    let params = a.params.params()?;
    let cap = CapacityPair::new(a.s, a.n)?;
    if cap.s > cap.n {
        eprintln!("warning: s = {} exceeds n = {}; at most n servers can be busy", cap.s, cap.n);
    }
    let loads = derive_loads(&params)?;
    let hedges = if loads.r < 1.0 { Some(invert_capacity(cap, loads.r1, loads.r)?) } else { None };
    let mut doc = json!({
        "model": match a.model { ModelKind::Blocking => "blocking", ModelKind::Holding => "holding" },
        "params": to_value(&params),
        "capacity": to_value(&cap),
        "loads": { "r1": loads.r1, "r2": loads.r2, "r": loads.r },
        "hedges": hedges.map(|h| to_value(&h)),
    });
    match a.model {
        ModelKind::Blocking => {
            let dist = stationary_blocking(&params, cap)?;
            let rep = perf_blocking(&dist, a.view == View::Request)?;
            doc["view"] = json!(match a.view { View::Request => "request", View::State => "state" });
            doc["report"] = to_value(&rep);
        }
        ModelKind::Holding => {
            let bound = rho_max(&params, cap);
            cfg.note(format!(
                "utilization {:.6}, bound {:.6}",
                offered_utilization(&params, cap.s),
                bound.rho_max
            ));
            let method = match a.method {
                Method::Functional => RateMethod::Functional,
                Method::Log => RateMethod::LogReduction,
            };
            let dist = solve_holding(&params, cap, RateOptions::with_method(method))?;
            let rep = perf_holding(&dist)?;
            doc["report"] = to_value(&rep);
            doc["requests"] = to_value(&request_measures(&dist));
            doc["stability"] = json!({
                "rho": offered_utilization(&params, cap.s),
                "rho_max": bound.rho_max,
                "r_max": bound.r_max,
            });
        }
    }
    emit(&Report::single(doc), cfg, Format::Json)
}
