use std::path::PathBuf;

use clap::Args;
use erlangr::blocking::{perf_blocking, stationary_blocking};
use erlangr::heuristic::holding_approx;
use erlangr::limits::{blocking_limits, erlang_b_tail, halfin_whitt_delay};
use erlangr::model::{derive_loads, invert_capacity, qed_capacity, qed_capacity_with, BedRounding, CapacityPair, ModelParams, QedPair};
use erlangr::qbd::{is_stable, perf_holding, request_measures, rho_max, solve_holding, RateOptions};
use erlangr::sim::{ordering_experiment, SimConfig, SimModel};
use serde_json::{json, Map, Value};

use crate::output::{create, emit, num, write_csv, Format, Report};
use crate::{Failure, RunConfig};

const CASES: [(f64, f64); 3] = [(0.10, 0.90), (0.25, 0.75), (0.50, 0.50)];
const PAIRS: [(f64, f64); 4] = [(1.0, 1.0), (1.0, 2.0), (2.0, 1.0), (2.0, 2.0)];
const LOADS: [f64; 6] = [5.0, 10.0, 25.0, 50.0, 100.0, 250.0];

#[derive(Debug, Args)]
pub struct TablesArgs {
    /// Directory receiving one CSV per table.
    #[arg(long, default_value = "tables")]
    pub out_dir: PathBuf,
    /// Comma-separated table names; all when absent.
    #[arg(long, value_delimiter = ',')]
    pub only: Vec<String>,
    /// Largest R1 solved exactly for the holding accuracy tables.
    #[arg(long, default_value_t = 25.0)]
    pub holding_max_r1: f64,
    /// Simulated time per replication for the model comparison.
    #[arg(long, default_value_t = 2000.0)]
    pub sim_horizon: f64,
    #[arg(long, default_value_t = 4)]
    pub sim_reps: usize,
}

type Rows = Vec<Value>;

struct Ctx<'a> {
    args: &'a TablesArgs,
    seed: u64,
}

fn row(pairs: Vec<(String, Value)>) -> Value {
    Value::Object(pairs.into_iter().collect::<Map<_, _>>())
}

fn label(x: f64) -> String {
    let s = format!("{x}").replace('.', "");
    if x < 0.0 {
        format!("m{}", s.trim_start_matches('-'))
    } else {
        s
    }
}

fn grid(lo: f64, hi: f64, step: f64) -> Vec<f64> {
    let m = ((hi - lo) / step).round() as usize;
    (0..=m).map(|i| lo + i as f64 * step).collect()
}

fn case_params(case: usize, r1: f64) -> Result<ModelParams, Failure> {
    let (delta, p) = CASES[case];
    Ok(ModelParams::from_load(r1, 1.0, delta, p)?)
}

fn appendix_blocking(case: usize) -> Result<Rows, Failure> {
    let r = CASES[case].0 / (CASES[case].0 + CASES[case].1);
    let mut rows = Vec::new();
    for (b, g) in PAIRS {
        let l = blocking_limits(b, g, r, 1.0)?;
        for r1 in LOADS {
            let params = case_params(case, r1)?;
            let cap = qed_capacity_with(r1, r, QedPair::new(b, g), BedRounding::Nearest)?;
            let rep = perf_blocking(&stationary_blocking(&params, cap)?, true)?;
            rows.push(json!({
                "beta": b, "gamma": g, "r1": r1, "s": cap.s, "n": cap.n,
                "p_delay": rep.p_delay,
                "scaled_p_block": r1.sqrt() * rep.p_boundary,
                "scaled_e_wait": r1.sqrt() * rep.e_wait,
                "g": l.g, "f": l.f, "h": l.h,
            }));
        }
    }
    Ok(rows)
}

fn appendix_holding(case: usize, max_r1: f64) -> Result<Rows, Failure> {
    let r = CASES[case].0 / (CASES[case].0 + CASES[case].1);
    let mut rows = Vec::new();
    for (b, g) in PAIRS {
        let approx = holding_approx(QedPair::new(b, g), r, 1.0).ok();
        for r1 in LOADS.iter().copied().filter(|&x| x <= max_r1) {
            let params = case_params(case, r1)?;
            let cap = qed_capacity_with(r1, r, QedPair::new(b, g), BedRounding::Nearest)?;
            let dist = solve_holding(&params, cap, RateOptions::default())?;
            let rep = perf_holding(&dist)?;
            let req = request_measures(&dist);
            rows.push(json!({
                "beta": b, "gamma": g, "r1": r1, "s": cap.s, "n": cap.n,
                "p_delay": req.p_delay,
                "scaled_e_wait": r1.sqrt() * req.e_wait,
                "p_delay_state": rep.p_delay,
                "p_hold": rep.p_boundary,
                "g_h": approx.map(|a| num(a.g)),
                "h_h": approx.map(|a| num(a.h)),
            }));
        }
    }
    Ok(rows)
}

/// Stationary law of the blocking model, the product form of the closed network view.
fn fig3() -> Result<Rows, Failure> {
    let params = ModelParams::new(2.0, 1.0, 0.25, 0.75)?;
    let cap = CapacityPair::new(9, 40)?;
    let dist = stationary_blocking(&params, cap)?;
    let mut rows = Vec::new();
    for j in 0..=cap.n {
        for k in 0..=cap.n - j {
            rows.push(json!({ "needy": j, "content": k, "prob": dist.prob(j, k) }));
        }
    }
    Ok(rows)
}

fn r_max(s: u32, n: u32) -> Result<f64, Failure> {
    let params = ModelParams::new(1.0, 1.0, 0.25, 0.75)?;
    Ok(rho_max(&params, CapacityPair::new(s, n)?).r_max)
}

fn fig4_by_servers() -> Result<Rows, Failure> {
    (1..=24u32)
        .map(|s| {
            let mut cols = vec![("s".to_string(), json!(s))];
            for n in [20u32, 40, 60, 80] {
                cols.push((format!("n{n}"), num(r_max(s, n)?)));
            }
            Ok(row(cols))
        })
        .collect()
}

fn fig4_by_beds() -> Result<Rows, Failure> {
    (1..=100u32)
        .map(|n| {
            let mut cols = vec![("n".to_string(), json!(n))];
            for s in [5u32, 10, 15, 20] {
                cols.push((format!("s{s}"), num(r_max(s, n)?)));
            }
            Ok(row(cols))
        })
        .collect()
}

fn fig6(ctx: &Ctx) -> Result<Rows, Failure> {
    let mut rows = Vec::new();
    for lambda in [5.0, 10.0, 20.0, 40.0, 60.0, 80.0, 100.0, 120.0, 140.0] {
        let params = ModelParams::new(lambda, 1.0, 0.2, 0.8)?;
        let loads = derive_loads(&params)?;
        let cap = qed_capacity(loads.r1, loads.r, QedPair::new(0.5, 0.5))?;
        let cfg = SimConfig::new(SimModel::Holding, ctx.args.sim_horizon, ctx.args.sim_reps, ctx.seed);
        let rep = ordering_experiment(&params, cap, &cfg)?;
        let mut cols = vec![
            ("lambda".to_string(), json!(lambda)),
            ("s".to_string(), json!(cap.s)),
            ("n".to_string(), json!(cap.n)),
        ];
        for (name, res) in [("holding", &rep.holding), ("blocking", &rep.blocking), ("closed_ward", &rep.closed_ward)] {
            for (m, e) in [("p_delay", res.p_delay), ("e_wait", res.e_wait), ("rho_s", res.rho_s)] {
                cols.push((format!("{name}_{m}"), num(e.mean)));
                cols.push((format!("{name}_{m}_hw"), num(e.half_width)));
            }
        }
        rows.push(row(cols));
    }
    Ok(rows)
}

fn fig7() -> Result<Rows, Failure> {
    grid(-2.0, 2.0, 0.05)
        .into_iter()
        .map(|b| {
            let mut cols = vec![("beta".to_string(), num(b))];
            for g in [-1.0, 0.0, 1.0, 2.0] {
                let l = blocking_limits(b, g, 0.5, 1.0)?;
                cols.push((format!("g_{}", label(g)), num(l.g)));
                cols.push((format!("f_{}", label(g)), num(l.f)));
            }
            Ok(row(cols))
        })
        .collect()
}

fn fig8() -> Result<Rows, Failure> {
    let params = ModelParams::new(2.0, 1.0, 0.25, 0.75)?;
    let loads = derive_loads(&params)?;
    (1..=16u32)
        .map(|s| {
            let mut cols = vec![("s".to_string(), json!(s))];
            for n in [24u32, 28, 32, 36, 40] {
                let cap = CapacityPair::new(s, n)?;
                let rep = perf_blocking(&stationary_blocking(&params, cap)?, true)?;
                let h = invert_capacity(cap, loads.r1, loads.r)?;
                let l = blocking_limits(h.beta, h.gamma, loads.r, 1.0)?;
                cols.push((format!("pdelay_n{n}"), num(rep.p_delay)));
                cols.push((format!("approx_pdelay_n{n}"), num(l.g)));
                cols.push((format!("pblock_n{n}"), num(loads.r1.sqrt() * rep.p_boundary)));
                cols.push((format!("approx_pblock_n{n}"), num(l.f)));
            }
            Ok(row(cols))
        })
        .collect()
}

/// Exact holding measures where stable, blank otherwise.
fn fig9() -> Result<Rows, Failure> {
    let params = ModelParams::new(2.0, 1.0, 0.25, 0.75)?;
    let loads = derive_loads(&params)?;
    (1..=16u32)
        .map(|s| {
            let mut cols = vec![("s".to_string(), json!(s))];
            for n in [32u32, 36, 40] {
                let cap = CapacityPair::new(s, n)?;
                let (pd, ph) = if is_stable(&params, cap) {
                    let dist = solve_holding(&params, cap, RateOptions::default())?;
                    (num(request_measures(&dist).p_delay), num(perf_holding(&dist)?.p_boundary))
                } else {
                    (Value::Null, Value::Null)
                };
                let h = invert_capacity(cap, loads.r1, loads.r)?;
                let approx = holding_approx(h, loads.r, 1.0).ok().map(|a| num(a.g)).unwrap_or(Value::Null);
                cols.push((format!("exact{n}"), pd));
                cols.push((format!("approx{n}"), approx));
                cols.push((format!("hold{n}"), ph));
            }
            Ok(row(cols))
        })
        .collect()
}

fn mu_params() -> Result<ModelParams, Failure> {
    Ok(ModelParams::new(0.32, 4.0, 0.4, 0.975)?)
}

fn fig10() -> Result<Rows, Failure> {
    let loads = derive_loads(&mu_params()?)?;
    grid(-2.0, 2.0, 0.05)
        .into_iter()
        .map(|b| {
            let mut cols = vec![("beta".to_string(), num(b))];
            for g in [-1.0, 0.0, 1.0, 2.0] {
                let l = blocking_limits(b, g, loads.r, 4.0)?;
                cols.push((format!("delay_g{}", label(g)), num(l.g)));
                cols.push((format!("block_g{}", label(g)), num(l.f / loads.r1.sqrt())));
            }
            Ok(row(cols))
        })
        .collect()
}

fn fig11() -> Result<Rows, Failure> {
    let loads = derive_loads(&mu_params()?)?;
    grid(0.0, 2.0, 0.05)
        .into_iter()
        .map(|b| {
            let mut cols = vec![("beta".to_string(), num(b))];
            for n in [35u32, 40, 45] {
                let total = loads.total();
                let g = (n as f64 - total) / total.sqrt();
                let v = holding_approx(QedPair::new(b, g), loads.r, 4.0).ok().map(|a| num(a.g)).unwrap_or(Value::Null);
                cols.push((format!("delay_n{n}"), v));
            }
            Ok(row(cols))
        })
        .collect()
}

fn fig12() -> Result<Rows, Failure> {
    grid(0.01, 0.99, 0.01)
        .into_iter()
        .map(|r| {
            let mut cols = vec![("r".to_string(), num(r))];
            for b in [0.25, 0.5, 1.0, 2.0] {
                let l = blocking_limits(b, 1.0, r, 1.0)?;
                cols.push((format!("delay_b{}", label(b)), num(l.g)));
                cols.push((format!("block_b{}", label(b)), num(l.f)));
            }
            cols.push(("block_inf".to_string(), num(erlang_b_tail(1.0, r)?)));
            Ok(row(cols))
        })
        .collect()
}

fn fig13() -> Result<Rows, Failure> {
    grid(0.0, 3.0, 0.05)
        .into_iter()
        .map(|g| {
            let mut cols = vec![("gamma".to_string(), num(g))];
            for b in [0.1, 0.5, 1.0] {
                cols.push((format!("open_b{}", label(b)), num(halfin_whitt_delay(b)?)));
                for r in [0.1, 0.25, 0.5] {
                    let gb = blocking_limits(b, g, r, 1.0)?.g;
                    let gh = holding_approx(QedPair::new(b, g), r, 1.0).ok().map(|a| num(a.g)).unwrap_or(Value::Null);
                    cols.push((format!("blocking_r{}_b{}", label(r), label(b)), num(gb)));
                    cols.push((format!("holding_r{}_b{}", label(r), label(b)), gh));
                }
            }
            Ok(row(cols))
        })
        .collect()
}

const NAMES: [&str; 17] = [
    "appendix_blocking_case1",
    "appendix_blocking_case2",
    "appendix_blocking_case3",
    "appendix_holding_case1",
    "appendix_holding_case2",
    "appendix_holding_case3",
    "fig3_product_form",
    "fig4_rmax_by_servers",
    "fig4_rmax_by_beds",
    "fig6_model_comparison",
    "fig7_limits",
    "fig8_accuracy_blocking",
    "fig9_accuracy_holding",
    "fig10_dimensioning_blocking",
    "fig11_dimensioning_holding",
    "fig12_limits_by_r",
    "fig13_delay_by_gamma",
];

fn build(name: &str, ctx: &Ctx) -> Result<Rows, Failure> {
    let max_r1 = ctx.args.holding_max_r1;
    match name {
        "appendix_blocking_case1" => appendix_blocking(0),
        "appendix_blocking_case2" => appendix_blocking(1),
        "appendix_blocking_case3" => appendix_blocking(2),
        "appendix_holding_case1" => appendix_holding(0, max_r1),
        "appendix_holding_case2" => appendix_holding(1, max_r1),
        "appendix_holding_case3" => appendix_holding(2, max_r1),
        "fig3_product_form" => fig3(),
        "fig4_rmax_by_servers" => fig4_by_servers(),
        "fig4_rmax_by_beds" => fig4_by_beds(),
        "fig6_model_comparison" => fig6(ctx),
        "fig7_limits" => fig7(),
        "fig8_accuracy_blocking" => fig8(),
        "fig9_accuracy_holding" => fig9(),
        "fig10_dimensioning_blocking" => fig10(),
        "fig11_dimensioning_holding" => fig11(),
        "fig12_limits_by_r" => fig12(),
        "fig13_delay_by_gamma" => fig13(),
        other => Err(Failure::usage(format!("unknown table {other}; known: {}", NAMES.join(", ")))),
    }
}

pub fn run(a: &TablesArgs, cfg: &RunConfig) -> Result<(), Failure> {
    let selected: Vec<&str> = if a.only.is_empty() { NAMES.to_vec() } else { a.only.iter().map(String::as_str).collect() };
    for name in &selected {
        if !NAMES.contains(name) {
            return Err(Failure::usage(format!("unknown table {name}; known: {}", NAMES.join(", "))));
        }
    }
    std::fs::create_dir_all(&a.out_dir).map_err(Failure::io)?;
    let ctx = Ctx { args: a, seed: cfg.seed.unwrap_or(1) };
    let mut written = Vec::new();
    for name in selected {
        cfg.note(format!("building {name}"));
        let rows = build(name, &ctx)?;
        let file = format!("{name}.csv");
        let table = Report::table(Value::Null, rows);
        let rows = table.rows.unwrap_or_default();
        write_csv(&rows, create(&a.out_dir.join(&file))?).map_err(Failure::io)?;
        written.push(json!({ "table": name, "file": file, "rows": rows.len() }));
    }
    emit(&Report::table(Value::Array(written.clone()), written), cfg, Format::Csv)
}
