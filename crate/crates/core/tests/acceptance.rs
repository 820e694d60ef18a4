mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use common::*;
use erlangr::blocking::{perf_blocking, stationary_blocking};
use erlangr::dimension::{dimension_blocking, dimension_holding, Pin};
use erlangr::heuristic::holding_approx;
use erlangr::limits::{blocking_limits, halfin_whitt_delay, limits_blocking, loss_model_limits, LimitInputs};
use erlangr::model::{derive_loads, qed_capacity, qed_capacity_with, BedRounding, CapacityPair, ModelParams, QedPair};
use erlangr::mol::{case_study_profile, integrate_offered_load, mol_schedule, DEFAULT_STEP};
use erlangr::qbd::{is_stable, rho_max, solve_holding, RateOptions};
use erlangr::sim::{ordering_experiment, simulate, time_varying_simulate, Estimate, Metric, SimConfig, SimModel};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn ensure(ok: bool, msg: String) -> Outcome {
    if ok {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn within(budget: Duration, start: Instant, msg: String) -> Outcome {
    let took = start.elapsed();
    ensure(took < budget, format!("{msg}; {:.2}s of {}s", took.as_secs_f64(), budget.as_secs()))
}

fn c1_blocking_vs_ctmc() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst: f64 = 0.0;
    for _ in 0..10 {
        let params = ModelParams::new(
            rng.random_range(0.2..4.0),
            rng.random_range(0.3..3.0),
            rng.random_range(0.1..2.0),
            rng.random_range(0.0..0.95),
        )
        .unwrap();
        let s = rng.random_range(1..=3);
        let n = rng.random_range(s..=6);
        let cap = CapacityPair::new(s, n).unwrap();
        let dist = stationary_blocking(&params, cap).unwrap();
        let (states, pi) = blocking_ctmc(&params, cap);
        for (x, &(j, k)) in states.iter().enumerate() {
            worst = worst.max((dist.prob(j, k) - pi[x]).abs());
        }
    }
    ensure(worst < 1e-10, format!("max entry gap {worst:.1e}"))?;
    within(Duration::from_secs(1), start, format!("max entry gap {worst:.1e}"))
}

fn c2_holding_vs_truncation() -> Outcome {
    let start = Instant::now();
    let instances = [
        (ModelParams::new(0.5, 1.0, 0.5, 0.5).unwrap(), CapacityPair::new(2, 4).unwrap()),
        (ModelParams::new(0.2, 1.0, 0.25, 0.75).unwrap(), CapacityPair::new(3, 6).unwrap()),
        (ModelParams::new(0.3, 2.0, 1.0, 0.3).unwrap(), CapacityPair::new(1, 2).unwrap()),
        (ModelParams::new(1.5, 1.2, 0.8, 0.4).unwrap(), CapacityPair::new(3, 5).unwrap()),
        (ModelParams::new(0.4, 1.0, 0.2, 0.6).unwrap(), CapacityPair::new(2, 6).unwrap()),
    ];
    let mut worst: f64 = 0.0;
    for (params, cap) in instances {
        if !is_stable(&params, cap) {
            return Err(format!("{params:?} {cap:?} is not stable"));
        }
        let dist = solve_holding(&params, cap, RateOptions::default()).unwrap();
        let (states, pi) = holding_ctmc(&params, cap, 200);
        for (x, &(i, j)) in states.iter().enumerate().filter(|(_, s)| s.0 <= cap.n + 100) {
            worst = worst.max((dist.level(i as usize)[j as usize] - pi[x]).abs());
        }
    }
    ensure(worst < 1e-8, format!("max entry gap {worst:.1e}"))?;
    within(Duration::from_secs(10), start, format!("max entry gap {worst:.1e}"))
}

fn c3_blocking_limit_rows() -> Outcome {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    for (case, rows) in BLOCKING_LIMIT_ROWS.iter().enumerate() {
        for (&(b, g), &(eg, ef, eh)) in PAIRS.iter().zip(rows) {
            let l = limits_blocking(LimitInputs::new(b, g, CASE_R[case]).unwrap(), 1.0).unwrap();
            worst = worst.max((l.g - eg).abs()).max((l.f - ef).abs()).max((l.h - eh).abs());
        }
    }
    ensure(worst <= 5e-4, format!("12 rows, max gap {worst:.1e}"))?;
    within(Duration::from_secs(1), start, format!("12 rows, max gap {worst:.1e}"))
}

fn c4_convergence_at_250() -> Outcome {
    let r1 = 250.0;
    let params = case_params(1, r1);
    let loads = derive_loads(&params).unwrap();
    let cap = qed_capacity_with(r1, loads.r, QedPair::new(1.0, 1.0), BedRounding::Nearest).unwrap();
    let rep = perf_blocking(&stationary_blocking(&params, cap).unwrap(), true).unwrap();
    let l = blocking_limits(1.0, 1.0, loads.r, 1.0).unwrap();
    let exact = [rep.p_delay, r1.sqrt() * rep.p_boundary, r1.sqrt() * rep.e_wait];
    let gaps = [(exact[0] - l.g).abs(), (exact[1] - l.f).abs(), (exact[2] - l.h).abs()];
    let row = [0.1459, 0.1524, 0.0957];
    let msg = format!(
        "(s,n)=({},{}) exact ({:.4}, {:.4}, {:.4}), limit gaps ({:.4}, {:.4}, {:.4})",
        cap.s, cap.n, exact[0], exact[1], exact[2], gaps[0], gaps[1], gaps[2]
    );
    let close = gaps[0] < 0.004 && gaps[1] < 0.006 && gaps[2] < 0.005;
    let matches = exact.iter().zip(&row).all(|(a, b)| (a - b).abs() <= 5e-4);
    ensure(close && matches, msg)
}

fn c5_holding_limit_rows() -> Outcome {
    let mut worst: f64 = 0.0;
    for (case, rows) in HOLDING_LIMIT_ROWS.iter().enumerate() {
        for (&(b, g), &(eg, eh)) in PAIRS.iter().zip(rows) {
            let a = holding_approx(QedPair::new(b, g), CASE_R[case], 1.0).unwrap();
            worst = worst.max((a.g - eg).abs()).max((a.h - eh).abs());
        }
    }
    ensure(worst <= 5e-4, format!("12 rows, max gap {worst:.1e}"))
}

fn c6_heuristic_vs_simulation() -> Outcome {
    let r1 = 250.0;
    let params = case_params(1, r1);
    let loads = derive_loads(&params).unwrap();
    let cap = qed_capacity_with(r1, loads.r, QedPair::new(1.0, 1.0), BedRounding::Nearest).unwrap();
    let res = simulate(&params, cap, &SimConfig::new(SimModel::Holding, 40_000.0, 16, 8)).unwrap();
    let sim = res.p_delay_requests;
    let gh = holding_approx(QedPair::new(1.0, 1.0), loads.r, 1.0).unwrap().g;
    let msg = format!("simulated {:.4} +- {:.4}, g_h {gh:.4}", sim.mean, sim.half_width);
    ensure((sim.mean - 0.2033).abs() <= 0.012 && sim.half_width <= 0.012 && (sim.mean - gh).abs() < 0.03, msg)
}

fn c7_stability() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..200 {
        let params = ModelParams::new(
            1.0,
            rng.random_range(0.1..5.0),
            rng.random_range(0.01..5.0),
            rng.random_range(0.0..0.99),
        )
        .unwrap();
        let s = rng.random_range(1..=40);
        let n = rng.random_range(s..=200);
        let cap = CapacityPair::new(s, n).unwrap();
        let b = rho_max(&params, cap);
        let r = params.needy_fraction();
        if !(b.r_max <= s as f64 && b.r_max <= r * n as f64) {
            return Err(format!("R_max {} at {params:?} {cap:?}", b.r_max));
        }
    }
    for n in [1u32, 5, 20, 100] {
        for (delta, p) in CASES {
            let params = ModelParams::new(1.0, 1.0, delta, p).unwrap();
            let b = rho_max(&params, CapacityPair::new(n, n).unwrap());
            if (b.rho_max - params.needy_fraction()).abs() > 1e-10 {
                return Err(format!("rho_max(n,n) = {} at n={n}", b.rho_max));
            }
        }
    }
    let mut slack = Vec::new();
    for r1 in [10.0, 25.0, 50.0, 100.0, 250.0] {
        let params = case_params(1, r1);
        let loads = derive_loads(&params).unwrap();
        let cap = qed_capacity(r1, loads.r, QedPair::new(1.0, 1.0)).unwrap();
        slack.push(1.0 - rho_max(&params, cap).rho_max);
    }
    let msg = format!("200 grid points, 1 - rho_max {slack:.4?}");
    ensure(slack.windows(2).all(|w| w[1] < w[0]), msg)
}

fn c8_dimensioning() -> Outcome {
    let start = Instant::now();
    let params = ModelParams::new(0.32, 4.0, 0.4, 0.975).unwrap();
    let loads = derive_loads(&params).unwrap();
    let b = dimension_blocking(0.5, Pin::Gamma(1.0), &loads, params.mu).unwrap();
    let h = dimension_holding(0.5, Pin::Beds(40), &params).unwrap();
    let msg = format!(
        "blocking (s,n)=({},{}) at beta*={:.4}; holding s={} at n={}",
        b.cap.s, b.cap.n, b.pair.beta, h.cap.s, h.cap.n
    );
    ensure((b.cap.s, b.cap.n) == (4, 40) && (h.cap.s, h.cap.n) == (5, 40), msg.clone())?;
    within(Duration::from_secs(1), start, msg)
}

fn c9_orderings() -> Outcome {
    let start = Instant::now();
    let mut notes = Vec::new();
    for (lambda, seed) in [(25.0, 91), (100.0, 92)] {
        let params = ModelParams::new(lambda, 1.0, 0.2, 0.8).unwrap();
        let loads = derive_loads(&params).unwrap();
        let cap = qed_capacity(loads.r1, loads.r, QedPair::new(0.5, 0.5)).unwrap();
        let rep = ordering_experiment(&params, cap, &SimConfig::new(SimModel::Holding, 10_000.0, 8, seed)).unwrap();
        for name in [
            "p_delay blocking <= holding",
            "p_delay holding <= closed ward",
            "p_boundary blocking <= holding",
        ] {
            let c = rep.checks.iter().find(|c| c.name == name).unwrap();
            if !c.holds {
                return Err(format!("lambda={lambda}: {name}: {:.4} vs {:.4}", c.lower.mean, c.upper.mean));
            }
        }
        notes.push(format!(
            "lambda={lambda} (s,n)=({},{}) P(d) {:.3}/{:.3}/{:.3} P(hold) {:.3}/{:.3}",
            cap.s,
            cap.n,
            rep.blocking.p_delay.mean,
            rep.holding.p_delay.mean,
            rep.closed_ward.p_delay.mean,
            rep.blocking.p_boundary.mean,
            rep.holding.p_boundary.mean
        ));
    }
    within(Duration::from_secs(120), start, notes.join("; "))
}

fn c10_open_model_bound() -> Outcome {
    let mut worst = f64::NEG_INFINITY;
    for b in [0.25, 0.5, 1.0, 2.0] {
        let hw = halfin_whitt_delay(b).unwrap();
        for g in [-1.0, 0.0, 1.0, 2.0] {
            for r in [0.1, 0.25, 0.5] {
                worst = worst.max(blocking_limits(b, g, r, 1.0).unwrap().g - hw);
            }
        }
    }
    let mut conv: f64 = 0.0;
    for b in [0.25, 0.5, 1.0, 2.0] {
        for r in [0.1, 0.25, 0.5] {
            conv = conv.max((blocking_limits(b, 40.0, r, 1.0).unwrap().g - halfin_whitt_delay(b).unwrap()).abs());
        }
    }
    ensure(worst <= 0.0 && conv < 1e-3, format!("max g_b - g_HW {worst:.2e}, gap at gamma=40 {conv:.1e}"))
}

fn c11_loss_consistency() -> Outcome {
    let r: f64 = 0.5;
    let mut f_gap: f64 = 0.0;
    for g in [0.0, 1.0, 2.0] {
        let f = blocking_limits(8.0, g, r, 1.0).unwrap().f;
        f_gap = f_gap.max((f - r.sqrt() * phi(g) / big_phi(g)).abs());
    }
    let a: f64 = 1.0e4;
    let mut loss_gap: f64 = 0.0;
    for (beta, gamma) in [(1.0, 2.0), (0.5, 1.0), (-0.5, 1.0)] {
        let s = (a + beta * a.sqrt()).round() as u32;
        let n = (a + gamma * a.sqrt()).round() as u32;
        let (delay, block) = mmsn_delay_block(a, 1.0, s, n);
        let l = loss_model_limits(beta, gamma).unwrap();
        loss_gap = loss_gap.max((delay - l.g).abs()).max((a.sqrt() * block - l.f).abs());
    }
    ensure(f_gap < 0.02 && loss_gap < 0.01, format!("f_b gap {f_gap:.1e}, loss model gap {loss_gap:.1e}"))
}

/// Mean of a group of bins and the half-width of that mean.
fn group(bins: &[Estimate]) -> (f64, f64) {
    let k = bins.len() as f64;
    let mean = bins.iter().map(|e| e.mean).sum::<f64>() / k;
    let hw = bins.iter().map(|e| e.half_width.powi(2)).sum::<f64>().sqrt() / k;
    (mean, hw)
}

fn c12_mol_stabilization() -> Outcome {
    let start = Instant::now();
    let params = ModelParams::new(1.0, 6.67, 2.18, 0.76).unwrap();
    let profile = case_study_profile();
    let traj = integrate_offered_load(&profile, &params, 24.0, DEFAULT_STEP).unwrap();
    let sched = mol_schedule(&traj, QedPair::new(0.5, 0.5), 0.5).unwrap();
    let load: Vec<f64> = (0..sched.len())
        .map(|k| {
            let (a, b) = traj.at((k as f64 + 0.5) * sched.interval);
            a + b
        })
        .collect();
    let peak = load.iter().cloned().fold(f64::MIN, f64::max);
    let in_peak: Vec<bool> = load.iter().map(|&x| x >= 0.9 * peak).collect();
    let run = |model| {
        let mut cfg = SimConfig::new(model, 24.0 * 200.0, 8, 12);
        cfg.warmup = Some(2.0);
        let res = time_varying_simulate(&profile, &sched, &params, &cfg).unwrap();
        let ts = res.time_series.unwrap();
        let pd = ts.get(Metric::PDelay).unwrap().to_vec();
        let pb = ts.get(Metric::PBoundary).unwrap().to_vec();
        let means: Vec<f64> = pd.iter().map(|e| e.mean).collect();
        let range = means.iter().cloned().fold(f64::MIN, f64::max) - means.iter().cloned().fold(f64::MAX, f64::min);
        let split = |want: bool| -> Vec<Estimate> {
            pb.iter().zip(&in_peak).filter(|(_, &p)| p == want).map(|(e, _)| *e).collect()
        };
        (range, group(&split(true)), group(&split(false)))
    };
    let (h_range, h_peak, h_rest) = run(SimModel::Holding);
    println!(
        "    holding model (information): P(delay) range {h_range:.3}, P(hold) peak {:.3} vs rest {:.3}",
        h_peak.0, h_rest.0
    );
    let (range, peak_pb, rest_pb) = run(SimModel::Blocking);
    let dip = rest_pb.0 - peak_pb.0 > peak_pb.1.max(rest_pb.1);
    let msg = format!(
        "blocking model: P(delay) range {range:.3}, P(block) peak {:.3} +- {:.3} vs rest {:.3} +- {:.3}",
        peak_pb.0, peak_pb.1, rest_pb.0, rest_pb.1
    );
    ensure(range < 0.25 && dip, msg.clone())?;
    within(Duration::from_secs(300), start, msg)
}

/// Some interior value lies below both end values by more than its half-width.
fn interior_minimum(v: &[Estimate]) -> bool {
    let ends = v[0].mean.min(v[v.len() - 1].mean);
    v[1..v.len() - 1].iter().any(|e| e.mean + e.half_width < ends)
}

fn c13_visit_strata() -> Outcome {
    let params = ModelParams::new(2.0, 1.0, 0.25, 0.75).unwrap();
    let beds: Vec<u32> = (34..=60).collect();
    let mut cfg = SimConfig::new(SimModel::Holding, 1e5, 4, 2024);
    cfg.warmup = Some(2000.0);
    cfg.max_visits = 7;
    let runs: Vec<_> = beds
        .iter()
        .map(|&n| simulate(&params, CapacityPair::new(9, n).unwrap(), &cfg).unwrap())
        .collect();
    let pairwise = |f: &dyn Fn(&Estimate, &Estimate) -> bool, pick: fn(&erlangr::sim::SimResult) -> Estimate| {
        runs.windows(2).all(|w| f(&pick(&w[0]), &pick(&w[1])))
    };
    let slack = |a: &Estimate, b: &Estimate| a.half_width.max(b.half_width);
    let hold_down = pairwise(&|a, b| b.mean <= a.mean + slack(a, b), |r| r.e_holding_wait);
    let needy_up = pairwise(&|a, b| b.mean >= a.mean - slack(a, b), |r| r.e_cumulative_wait);
    let stratum = |v: usize| -> Vec<Estimate> {
        runs.iter().map(|r| r.visit_strata.iter().find(|s| s.visits == v).unwrap().total_wait).collect()
    };
    let (many, once) = (stratum(7), stratum(1));
    let argmin = |v: &[Estimate]| {
        let k = (0..v.len()).min_by(|&a, &b| v[a].mean.total_cmp(&v[b].mean)).unwrap();
        format!("n={} ({:.3})", beds[k], v[k].mean)
    };
    let msg = format!(
        "holding wait {:.3} -> {:.3}, needy wait {:.3} -> {:.3}; N>=7 min at {} (ends {:.3}, {:.3}); N=1 min at {}",
        runs[0].e_holding_wait.mean,
        runs[runs.len() - 1].e_holding_wait.mean,
        runs[0].e_cumulative_wait.mean,
        runs[runs.len() - 1].e_cumulative_wait.mean,
        argmin(&many),
        many[0].mean,
        many[many.len() - 1].mean,
        argmin(&once),
    );
    ensure(hold_down && needy_up && interior_minimum(&many) && !interior_minimum(&once), msg)
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 13] = [
        ("exact blocking vs generator solve", c1_blocking_vs_ctmc),
        ("matrix-geometric vs truncated chain", c2_holding_vs_truncation),
        ("blocking limit rows", c3_blocking_limit_rows),
        ("exact-to-limit convergence", c4_convergence_at_250),
        ("holding heuristic rows", c5_holding_limit_rows),
        ("heuristic vs simulation", c6_heuristic_vs_simulation),
        ("stability bound", c7_stability),
        ("dimensioning case study", c8_dimensioning),
        ("ordering properties", c9_orderings),
        ("open-model bound", c10_open_model_bound),
        ("loss model consistency", c11_loss_consistency),
        ("time-varying stabilization", c12_mol_stabilization),
        ("visit stratification", c13_visit_strata),
    ];
    let filter: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let id = i + 1;
        if !filter.is_empty() && !filter.contains(&id) {
            continue;
        }
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|_| Err("panicked".into()));
        let secs = start.elapsed().as_secs_f64();
        let (tag, detail) = match outcome {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        println!("criterion {id:>2} {tag} {name}: {detail} [{secs:.1}s]");
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    }
}
