use clap::Args;
use erlangr::dimension::{dimension_blocking, dimension_holding, Pin};
use erlangr::model::derive_loads;
use serde_json::json;

use crate::output::{emit, to_value, Format, Report};
use crate::{Failure, ModelKind, ParamArgs, RunConfig};

#[derive(Debug, Args)]
#[command(group = clap::ArgGroup::new("pin").required(true).args(["beta", "gamma", "servers", "beds"]))]
pub struct DimensionArgs {
    /// Target delay probability.
    #[arg(long)]
    pub epsilon: f64,
    #[arg(long, value_enum, default_value = "blocking")]
    pub model: ModelKind,
    #[command(flatten)]
    pub params: ParamArgs,
    /// Pin the server hedge.
    #[arg(long, allow_negative_numbers = true)]
    pub beta: Option<f64>,
    /// Pin the bed hedge.
    #[arg(long, allow_negative_numbers = true)]
    pub gamma: Option<f64>,
    /// Pin the number of servers.
    #[arg(long)]
    pub servers: Option<u32>,
    /// Pin the number of beds.
    #[arg(long)]
    pub beds: Option<u32>,
}

fn pin(a: &DimensionArgs) -> Pin {
    match (a.beta, a.gamma, a.servers, a.beds) {
        (Some(b), ..) => Pin::Beta(b),
        (_, Some(g), ..) => Pin::Gamma(g),
        (_, _, Some(s), _) => Pin::Servers(s),
        (.., Some(n)) => Pin::Beds(n),
        _ => unreachable!("clap requires one pin"),
    }
}

pub fn run(a: &DimensionArgs, cfg: &RunConfig) -> Result<(), Failure> {
    let params = a.params.params()?;
    let loads = derive_loads(&params)?;
    let pin = pin(a);
    let res = match a.model {
        ModelKind::Blocking => dimension_blocking(a.epsilon, pin, &loads, params.mu)?,
        ModelKind::Holding => dimension_holding(a.epsilon, pin, &params)?,
    };
    let doc = json!({
        "model": match a.model { ModelKind::Blocking => "blocking", ModelKind::Holding => "holding" },
        "epsilon": a.epsilon,
        "params": to_value(&params),
        "loads": { "r1": loads.r1, "r2": loads.r2, "r": loads.r },
        "pin": to_value(&pin),
        "result": to_value(&res),
    });
    emit(&Report::single(doc), cfg, Format::Json)
}
