//! One replication of the patient-level Markov chain.
//!
//! The next event is drawn from the exponential race of arrivals, needy
//! completions and content returns. Which server finishes or which content
//! patient returns is chosen uniformly, which is exact for exponential
//! clocks. Queues in front of the servers and of the facility are FCFS.

use std::collections::VecDeque;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::stats::{Acc, Grid, Snapshot};
use super::{LogEvent, SimModel};
use crate::mol::{ArrivalProfile, StaffingSchedule};
use crate::model::{CapacityPair, ModelParams};

pub(crate) enum Arrivals<'a> {
    Constant(f64),
    Profile { profile: &'a ArrivalProfile, max: f64 },
}

pub(crate) enum Staffing<'a> {
    Fixed(CapacityPair),
    Schedule(&'a StaffingSchedule),
}

impl Staffing<'_> {
    fn at(&self, t: f64) -> CapacityPair {
        match self {
            Staffing::Fixed(c) => *c,
            Staffing::Schedule(s) => s.at(t).expect("schedule coverage checked before the run"),
        }
    }

    fn next_change(&self, t: f64) -> f64 {
        match self {
            Staffing::Fixed(_) => f64::INFINITY,
            Staffing::Schedule(s) => s.next_boundary(t),
        }
    }
}

pub(crate) struct RunSpec<'a> {
    pub params: ModelParams,
    pub model: SimModel,
    pub arrivals: Arrivals<'a>,
    pub staffing: Staffing<'a>,
    pub horizon: f64,
    pub warmup: f64,
    pub seed: u64,
    pub stream: u64,
    pub batches: Grid,
    pub bins: Option<Grid>,
    pub max_visits: usize,
    pub hist_len: usize,
    pub max_log_events: usize,
}

#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct StratumAcc {
    pub count: f64,
    pub hold: f64,
    pub needy: f64,
}

impl StratumAcc {
    fn add(&mut self, hold: f64, needy: f64) {
        self.count += 1.0;
        self.hold += hold;
        self.needy += needy;
    }

    pub fn merge(&mut self, o: &StratumAcc) {
        self.count += o.count;
        self.hold += o.hold;
        self.needy += o.needy;
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub(crate) struct Counts {
    pub arrivals: u64,
    pub admitted: u64,
    pub blocked: u64,
    pub held: u64,
    pub departed: u64,
    pub in_system: u64,
    pub holding: u64,
}

pub(crate) struct RunOutput {
    pub batches: Vec<Acc>,
    pub bins: Vec<Acc>,
    pub census_time: Vec<f64>,
    pub needy_time: Vec<f64>,
    /// Per batch, then per visit count.
    pub strata: Vec<Vec<StratumAcc>>,
    pub visit_counts: Vec<u64>,
    pub counts: Counts,
    pub log: Vec<LogEvent>,
}

#[derive(Debug, Clone, Copy)]
struct Patient {
    id: u64,
    arrived: f64,
    admitted: f64,
    visits: u32,
    needy_wait: f64,
    requested: f64,
}

struct State<'a> {
    spec: &'a RunSpec<'a>,
    rng: ChaCha8Rng,
    t: f64,
    cap: CapacityPair,
    slab: Vec<Patient>,
    free: Vec<usize>,
    next_id: u64,
    in_service: Vec<usize>,
    queue: VecDeque<usize>,
    content: Vec<usize>,
    holding: VecDeque<usize>,
    out: RunOutput,
}

impl<'a> State<'a> {
    fn new(spec: &'a RunSpec<'a>) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        rng.set_stream(spec.stream);
        let bins = spec.bins.map(|g| vec![Acc::default(); g.count]).unwrap_or_default();
        Self {
            spec,
            rng,
            t: 0.0,
            cap: spec.staffing.at(0.0),
            slab: Vec::new(),
            free: Vec::new(),
            next_id: 0,
            in_service: Vec::new(),
            queue: VecDeque::new(),
            content: Vec::new(),
            holding: VecDeque::new(),
            out: RunOutput {
                batches: vec![Acc::default(); spec.batches.count],
                bins,
                census_time: vec![0.0; spec.hist_len],
                needy_time: vec![0.0; spec.hist_len],
                strata: vec![vec![StratumAcc::default(); spec.max_visits + 1]; spec.batches.count],
                visit_counts: vec![0; spec.max_visits + 1],
                counts: Counts::default(),
                log: Vec::new(),
            },
        }
    }

    fn census(&self) -> usize {
        self.in_service.len() + self.queue.len() + self.content.len()
    }

    fn snapshot(&self) -> Snapshot {
        Snapshot {
            needy: self.in_service.len() + self.queue.len(),
            busy: self.in_service.len(),
            servers: self.cap.s as usize,
            inside: self.census(),
            beds: self.cap.n as usize,
            holding: self.holding.len(),
        }
    }

    fn log(&mut self, idx: usize, event: &'static str) {
        if self.out.log.len() < self.spec.max_log_events {
            let id = self.slab[idx].id;
            self.out.log.push(LogEvent { patient_id: id, event, t: self.t });
        }
    }

    fn point<F: Fn(&mut Acc)>(&mut self, f: F) {
        let t = self.t;
        if let Some(a) = self.spec.batches.at(&mut self.out.batches, t) {
            f(a);
        }
        if let Some(g) = self.spec.bins {
            if let Some(a) = g.at(&mut self.out.bins, t) {
                f(a);
            }
        }
    }

    fn advance(&mut self, to: f64) {
        let snap = self.snapshot();
        let from = self.t;
        self.spec.batches.add_time(&mut self.out.batches, from, to, &snap);
        if let Some(g) = self.spec.bins {
            g.add_time(&mut self.out.bins, from, to, &snap);
        }
        let a = from.max(self.spec.warmup);
        if to > a {
            let last = self.spec.hist_len - 1;
            self.out.census_time[snap.inside.min(last)] += to - a;
            self.out.needy_time[snap.needy.min(last)] += to - a;
        }
        self.t = to;
    }

    fn new_patient(&mut self) -> usize {
        let p = Patient {
            id: self.next_id,
            arrived: self.t,
            admitted: f64::NAN,
            visits: 0,
            needy_wait: 0.0,
            requested: 0.0,
        };
        self.next_id += 1;
        match self.free.pop() {
            Some(i) => {
                self.slab[i] = p;
                i
            }
            None => {
                self.slab.push(p);
                self.slab.len() - 1
            }
        }
    }

    fn admit(&mut self, idx: usize) {
        assert!(self.census() < self.cap.n as usize, "census bound violated");
        let t = self.t;
        let wait = t - self.slab[idx].arrived;
        self.slab[idx].admitted = t;
        self.out.counts.admitted += 1;
        self.point(|a| {
            a.admitted += 1.0;
            a.hold_wait_sum += wait;
        });
        self.log(idx, "admit");
        self.request(idx);
    }

    fn request(&mut self, idx: usize) {
        let t = self.t;
        self.slab[idx].visits += 1;
        self.slab[idx].requested = t;
        let must_wait = self.in_service.len() >= self.cap.s as usize;
        self.point(|a| {
            a.requests += 1.0;
            if must_wait {
                a.delayed += 1.0;
            }
        });
        self.log(idx, "request");
        if must_wait {
            self.queue.push_back(idx);
        } else {
            self.start(idx);
        }
    }

    fn start(&mut self, idx: usize) {
        let wait = self.t - self.slab[idx].requested;
        self.slab[idx].needy_wait += wait;
        self.point(|a| {
            a.wait_count += 1.0;
            a.wait_sum += wait;
        });
        self.log(idx, "start");
        self.in_service.push(idx);
    }

    fn fill_servers(&mut self) {
        while self.in_service.len() < self.cap.s as usize {
            match self.queue.pop_front() {
                Some(idx) => self.start(idx),
                None => break,
            }
        }
    }

    fn fill_beds(&mut self) {
        if self.spec.model != SimModel::Holding {
            return;
        }
        while self.census() < self.cap.n as usize {
            match self.holding.pop_front() {
                Some(idx) => self.admit(idx),
                None => break,
            }
        }
    }

    fn arrival(&mut self) {
        self.out.counts.arrivals += 1;
        let idx = self.new_patient();
        self.log(idx, "arrive");
        let full = self.census() >= self.cap.n as usize || !self.holding.is_empty();
        self.point(|a| {
            a.arrivals += 1.0;
            if full {
                a.boundary += 1.0;
            }
        });
        if !full {
            self.admit(idx);
            return;
        }
        match self.spec.model {
            SimModel::Holding => {
                self.out.counts.held += 1;
                self.log(idx, "hold");
                self.holding.push_back(idx);
            }
            _ => {
                self.out.counts.blocked += 1;
                self.log(idx, "block");
                self.free.push(idx);
            }
        }
    }

    fn completion(&mut self) {
        let k = self.rng.random_range(0..self.in_service.len());
        let idx = self.in_service.swap_remove(k);
        self.log(idx, "complete");
        self.fill_servers();
        if self.rng.random::<f64>() < self.spec.params.p {
            self.log(idx, "content");
            self.content.push(idx);
            return;
        }
        self.depart(idx);
        match self.spec.model {
            SimModel::ClosedWard => {
                let fresh = self.new_patient();
                self.slab[fresh].admitted = self.t;
                self.out.counts.admitted += 1;
                self.log(fresh, "admit");
                self.request(fresh);
            }
            SimModel::Holding => self.fill_beds(),
            SimModel::Blocking => {}
        }
    }

    fn depart(&mut self, idx: usize) {
        self.out.counts.departed += 1;
        self.log(idx, "depart");
        let p = self.slab[idx];
        self.point(|a| {
            a.departed += 1.0;
            a.cumulative_wait_sum += p.needy_wait;
        });
        if p.arrived >= self.spec.warmup {
            let v = (p.visits as usize).min(self.spec.max_visits);
            self.out.visit_counts[v] += 1;
            if let Some(k) = self.spec.batches.index(self.t) {
                self.out.strata[k][v].add(p.admitted - p.arrived, p.needy_wait);
            }
        }
        self.free.push(idx);
    }

    fn content_return(&mut self) {
        let k = self.rng.random_range(0..self.content.len());
        let idx = self.content.swap_remove(k);
        self.request(idx);
    }

    fn exp(&mut self, rate: f64) -> f64 {
        let u: f64 = self.rng.random();
        -(1.0 - u).ln() / rate
    }

    fn run(mut self) -> RunOutput {
        let ModelParams { mu, delta, .. } = self.spec.params;
        let open = self.spec.model != SimModel::ClosedWard;
        let lambda_bound = match self.spec.arrivals {
            Arrivals::Constant(l) => l,
            Arrivals::Profile { max, .. } => max,
        };
        if !open {
            for _ in 0..self.cap.n {
                let idx = self.new_patient();
                self.slab[idx].admitted = 0.0;
                self.out.counts.admitted += 1;
                self.request(idx);
            }
        }
        let horizon = self.spec.horizon;
        loop {
            let arrival_rate = if open { lambda_bound } else { 0.0 };
            let service_rate = self.in_service.len() as f64 * mu;
            let return_rate = self.content.len() as f64 * delta;
            let total = arrival_rate + service_rate + return_rate;
            let next = self.t + self.exp(total);
            let change = self.spec.staffing.next_change(self.t);
            if change <= next && change < horizon {
                // Memorylessness lets the race restart at the change.
                self.advance(change);
                self.cap = self.spec.staffing.at(change);
                self.fill_servers();
                self.fill_beds();
                continue;
            }
            if next >= horizon {
                self.advance(horizon);
                break;
            }
            self.advance(next);
            let u = self.rng.random::<f64>() * total;
            if u < arrival_rate {
                let accept = match self.spec.arrivals {
                    Arrivals::Constant(_) => true,
                    Arrivals::Profile { profile, max } => {
                        self.rng.random::<f64>() * max < profile.rate(self.t)
                    }
                };
                if accept {
                    self.arrival();
                }
            } else if u < arrival_rate + service_rate {
                self.completion();
            } else {
                self.content_return();
            }
            if matches!(self.spec.staffing, Staffing::Fixed(_)) {
                assert!(self.census() <= self.cap.n as usize, "census bound violated");
            }
        }
        self.out.counts.in_system = self.census() as u64;
        self.out.counts.holding = self.holding.len() as u64;
        self.out
    }
}

pub(crate) fn run_replication(spec: &RunSpec<'_>) -> RunOutput {
    State::new(spec).run()
}
