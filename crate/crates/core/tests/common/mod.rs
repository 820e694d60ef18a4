//! Independent reference solutions used by the integration tests.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};

use erlangr::model::{CapacityPair, ModelParams};

pub const CASE_R: [f64; 3] = [0.10, 0.25, 0.50];

/// Case parameters with `mu = 1`: (delta, p).
pub const CASES: [(f64, f64); 3] = [(0.10, 0.90), (0.25, 0.75), (0.50, 0.50)];

pub const PAIRS: [(f64, f64); 4] = [(1.0, 1.0), (1.0, 2.0), (2.0, 1.0), (2.0, 2.0)];

/// Limit rows of the blocking accuracy tables: (g, f, h) per case and pair.
pub const BLOCKING_LIMIT_ROWS: [[(f64, f64, f64); 4]; 3] = [
    [(0.1767, 0.0981, 0.1437), (0.2108, 0.0217, 0.1947), (0.0188, 0.0914, 0.0084), (0.0247, 0.0177, 0.0118)],
    [(0.1429, 0.1569, 0.0940), (0.1976, 0.0391, 0.1617), (0.0126, 0.1445, 0.0048), (0.0220, 0.0284, 0.0097)],
    [(0.1011, 0.2185, 0.0478), (0.1792, 0.0605, 0.1199), (0.0052, 0.2039, 0.0014), (0.0173, 0.0404, 0.0063)],
];

/// Limit rows of the holding accuracy tables: (g, scaled wait) per case and pair.
pub const HOLDING_LIMIT_ROWS: [[(f64, f64); 4]; 3] = [
    [(0.2076, 0.1777), (0.2187, 0.2050), (0.0229, 0.0104), (0.0257, 0.0124)],
    [(0.1840, 0.1277), (0.2109, 0.1759), (0.0169, 0.0066), (0.0234, 0.0104)],
    [(0.1442, 0.0711), (0.1981, 0.1354), (0.0078, 0.0022), (0.0188, 0.0069)],
];

pub fn case_params(case: usize, r1: f64) -> ModelParams {
    let (delta, p) = CASES[case];
    ModelParams::from_load(r1, 1.0, delta, p).unwrap()
}

/// Stationary vector of a finite generator by a dense solve with one
/// balance equation replaced by the normalization.
pub fn ctmc_stationary(q: &DMatrix<f64>) -> DVector<f64> {
    let m = q.nrows();
    let mut a = q.transpose();
    for c in 0..m {
        a[(m - 1, c)] = 1.0;
    }
    let mut b = DVector::zeros(m);
    b[m - 1] = 1.0;
    a.lu().solve(&b).expect("irreducible generator")
}

fn add_rate(q: &mut DMatrix<f64>, from: usize, to: usize, rate: f64) {
    if rate > 0.0 {
        q[(from, to)] += rate;
        q[(from, from)] -= rate;
    }
}

/// Blocking model states `(j, k)` with `j + k <= n`, indexed by the returned list.
pub fn blocking_ctmc(params: &ModelParams, cap: CapacityPair) -> (Vec<(u32, u32)>, DVector<f64>) {
    let n = cap.n;
    let states: Vec<(u32, u32)> = (0..=n).flat_map(|j| (0..=n - j).map(move |k| (j, k))).collect();
    let index = |j: u32, k: u32| states.iter().position(|&s| s == (j, k)).unwrap();
    let mut q = DMatrix::zeros(states.len(), states.len());
    for (i, &(j, k)) in states.iter().enumerate() {
        if j + k < n {
            add_rate(&mut q, i, index(j + 1, k), params.lambda);
        }
        if j > 0 {
            let served = j.min(cap.s) as f64 * params.mu;
            add_rate(&mut q, i, index(j - 1, k + 1), served * params.p);
            add_rate(&mut q, i, index(j - 1, k), served * (1.0 - params.p));
        }
        if k > 0 {
            add_rate(&mut q, i, index(j + 1, k - 1), k as f64 * params.delta);
        }
    }
    let pi = ctmc_stationary(&q);
    (states, pi)
}

/// Holding model truncated at `holding_cap` waiting patients; states are
/// `(level, j)` with level = all patients and `j` needy inside.
pub fn holding_ctmc(
    params: &ModelParams,
    cap: CapacityPair,
    holding_cap: u32,
) -> (Vec<(u32, u32)>, DVector<f64>) {
    let n = cap.n;
    let top = n + holding_cap;
    let states: Vec<(u32, u32)> = (0..=top).flat_map(|i| (0..=i.min(n)).map(move |j| (i, j))).collect();
    let mut offsets = Vec::with_capacity(top as usize + 1);
    let mut acc = 0usize;
    for i in 0..=top {
        offsets.push(acc);
        acc += i.min(n) as usize + 1;
    }
    let index = |i: u32, j: u32| offsets[i as usize] + j as usize;
    let mut q = DMatrix::zeros(states.len(), states.len());
    for (x, &(i, j)) in states.iter().enumerate() {
        let inside = i.min(n);
        let content = inside - j;
        if i < top {
            let j_next = if i < n { j + 1 } else { j };
            add_rate(&mut q, x, index(i + 1, j_next), params.lambda);
        }
        if j > 0 {
            let served = j.min(cap.s) as f64 * params.mu;
            add_rate(&mut q, x, index(i, j - 1), served * params.p);
            // A departure lets the head of the holding room in as a needy patient.
            let j_next = if i > n { j } else { j - 1 };
            add_rate(&mut q, x, index(i - 1, j_next), served * (1.0 - params.p));
        }
        if content > 0 {
            add_rate(&mut q, x, index(i, j + 1), content as f64 * params.delta);
        }
    }
    let pi = ctmc_stationary(&q);
    (states, pi)
}

/// Needy-count law of the closed ward: always `n` patients, a departure is
/// replaced at once by a new needy patient.
pub fn closed_ward_needy(params: &ModelParams, cap: CapacityPair) -> Vec<f64> {
    let n = cap.n as usize;
    let mut w = vec![1.0f64; n + 1];
    for j in 1..=n {
        let up = (n - j + 1) as f64 * params.delta;
        let down = params.p * (j.min(cap.s as usize)) as f64 * params.mu;
        w[j] = w[j - 1] * up / down;
    }
    let total: f64 = w.iter().sum();
    w.iter().map(|x| x / total).collect()
}

/// Erlang-C delay probability with `s` servers and offered load `a`.
pub fn erlang_c(s: u32, a: f64) -> f64 {
    let mut b = 1.0;
    for k in 1..=s {
        b = a * b / (k as f64 + a * b);
    }
    let rho = a / s as f64;
    b / (1.0 - rho + rho * b)
}

/// M/M/s/n birth-death law: states `0..=n`, births `lambda`, deaths `min(k,s) mu`.
pub fn mmsn_law(lambda: f64, mu: f64, s: u32, n: u32) -> Vec<f64> {
    let mut logw = vec![0.0f64; n as usize + 1];
    for k in 1..=n as usize {
        logw[k] = logw[k - 1] + (lambda / (k.min(s as usize) as f64 * mu)).ln();
    }
    let m = logw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = logw.iter().map(|l| (l - m).exp()).collect();
    let total: f64 = w.iter().sum();
    w.iter().map(|x| x / total).collect()
}

/// Delay probability of admitted arrivals and blocking probability of M/M/s/n.
pub fn mmsn_delay_block(lambda: f64, mu: f64, s: u32, n: u32) -> (f64, f64) {
    let pi = mmsn_law(lambda, mu, s, n);
    let block = pi[n as usize];
    let waiting: f64 = pi[s as usize..n as usize].iter().sum();
    (waiting / (1.0 - block), block)
}

pub fn trapezoid<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, points: usize) -> f64 {
    let h = (b - a) / (points - 1) as f64;
    let mut s = 0.5 * (f(a) + f(b));
    for i in 1..points - 1 {
        s += f(a + i as f64 * h);
    }
    s * h
}

/// Root of a continuous function with a sign change on `[a, b]`.
pub fn bisect<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64) -> f64 {
    let mut fa = f(a);
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        let fm = f(m);
        if (fm > 0.0) == (fa > 0.0) {
            a = m;
            fa = fm;
        } else {
            b = m;
        }
        if b - a < 1e-15 {
            break;
        }
    }
    0.5 * (a + b)
}

/// Largest eigenvalue modulus from the full spectrum.
pub fn spectral_radius(m: &DMatrix<f64>) -> f64 {
    m.complex_eigenvalues().iter().map(|z| z.norm()).fold(0.0, f64::max)
}

pub fn phi(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Normal cdf by trapezoid on a fine grid, independent of any erfc routine.
pub fn big_phi(x: f64) -> f64 {
    if x < -12.0 {
        return 0.0;
    }
    trapezoid(phi, -12.0, x, 200_001)
}
