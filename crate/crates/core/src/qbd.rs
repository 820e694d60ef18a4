//! Quasi-birth-death analysis of the model with holding.
//!
//! Levels count all customers (inside plus holding), phases count needy
//! customers. Levels `0..=n` form the boundary; above `n` the chain is
//! level independent and the stationary vector is matrix geometric.

use std::io::{self, Write};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{CapacityPair, ModelParams, PerformanceReport};
use crate::special::{ln_binomial, ln_gamma, log_sum_exp, stable_sum};

#[derive(Debug, Clone)]
pub struct QbdBlocks {
    pub params: ModelParams,
    pub cap: CapacityPair,
    /// Local generator of level `i`, for `i = 0..=n`.
    pub boundary_diag: Vec<DMatrix<f64>>,
    /// `boundary_up[i]` holds the rates from level `i` to level `i + 1`.
    pub boundary_up: Vec<DMatrix<f64>>,
    /// `boundary_down[i]` holds the rates from level `i + 1` to level `i`.
    pub boundary_down: Vec<DMatrix<f64>>,
    pub a0: DMatrix<f64>,
    pub a1: DMatrix<f64>,
    pub a2: DMatrix<f64>,
}

fn service_rate(j: usize, s: usize, mu: f64) -> f64 {
    j.min(s) as f64 * mu
}

/// Local generator of a level with `level` customers inside (at most `n`).
fn level_generator(level: usize, params: &ModelParams, s: usize) -> DMatrix<f64> {
    let ModelParams { lambda, mu, delta, p } = *params;
    let mut m = DMatrix::zeros(level + 1, level + 1);
    for j in 0..=level {
        let nu = service_rate(j, s, mu);
        let returns = (level - j) as f64 * delta;
        if j < level {
            m[(j, j + 1)] = returns;
        }
        if j > 0 {
            m[(j, j - 1)] = p * nu;
        }
        m[(j, j)] = -(lambda + nu + returns);
    }
    m
}

pub fn build_qbd_blocks(params: &ModelParams, cap: CapacityPair) -> Result<QbdBlocks> {
    params.validate()?;
    let n = cap.n as usize;
    let s = cap.s as usize;
    let ModelParams { lambda, mu, p, .. } = *params;

    let boundary_diag: Vec<_> = (0..=n).map(|i| level_generator(i, params, s)).collect();
    let boundary_up: Vec<_> = (0..n)
        .map(|i| {
            let mut m = DMatrix::zeros(i + 1, i + 2);
            for j in 0..=i {
                m[(j, j + 1)] = lambda;
            }
            m
        })
        .collect();
    let boundary_down: Vec<_> = (0..n)
        .map(|i| {
            let mut m = DMatrix::zeros(i + 2, i + 1);
            for j in 1..=i + 1 {
                m[(j, j - 1)] = (1.0 - p) * service_rate(j, s, mu);
            }
            m
        })
        .collect();
    let a0 = DMatrix::from_diagonal_element(n + 1, n + 1, lambda);
    let a2 = DMatrix::from_diagonal(&DVector::from_fn(n + 1, |j, _| {
        (1.0 - p) * service_rate(j, s, mu)
    }));
    let a1 = boundary_diag[n].clone();
    Ok(QbdBlocks {
        params: *params,
        cap,
        boundary_diag,
        boundary_up,
        boundary_down,
        a0,
        a1,
        a2,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StabilityBound {
    /// Largest sustainable server utilization.
    pub rho_max: f64,
    /// Largest sustainable needy load, `s * rho_max`.
    pub r_max: f64,
}

/// Utilization bound from the closed ward with `n` patients, which is the
/// phase process of the chain while the holding room is non-empty.
pub fn rho_max(params: &ModelParams, cap: CapacityPair) -> StabilityBound {
    let (s, n) = (cap.s, cap.n);
    let sf = s as f64;
    if n <= s {
        // Every needy patient is in service.
        let r_max = params.needy_fraction() * n as f64;
        return StabilityBound { rho_max: r_max / sf, r_max };
    }
    if params.p == 0.0 {
        let rho = n.min(s) as f64 / sf;
        return StabilityBound { rho_max: rho, r_max: sf * rho };
    }
    let ln_b = (params.delta / (params.p * params.mu)).ln();
    let ln_s = sf.ln();
    let log_w: Vec<f64> = (0..=n)
        .map(|i| {
            let mut w = ln_binomial(n, i) + i as f64 * ln_b;
            if i > s {
                w += ln_gamma(i as f64 + 1.0) - ln_gamma(sf + 1.0) + (sf - i as f64) * ln_s;
            }
            w
        })
        .collect();
    let log_z = log_sum_exp(&log_w);
    let busy: Vec<f64> = log_w
        .iter()
        .enumerate()
        .map(|(i, w)| (w - log_z).exp() * i.min(s as usize) as f64)
        .collect();
    let rho = (stable_sum(&busy) / sf).min(1.0);
    StabilityBound { rho_max: rho, r_max: sf * rho }
}

/// Offered server utilization `lambda / ((1 - p) mu s)`.
pub fn offered_utilization(params: &ModelParams, s: u32) -> f64 {
    params.lambda / ((1.0 - params.p) * params.mu * s as f64)
}

pub fn is_stable(params: &ModelParams, cap: CapacityPair) -> bool {
    offered_utilization(params, cap.s) < rho_max(params, cap).rho_max
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RateMethod {
    /// Plain successive substitution starting from zero.
    #[default]
    Functional,
    /// Quadratically convergent logarithmic reduction.
    LogReduction,
}

#[derive(Debug, Clone, Copy)]
pub struct RateOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub method: RateMethod,
    /// Refuse to iterate when the closed-form stability test fails.
    pub check_stability: bool,
}

impl Default for RateOptions {
    fn default() -> Self {
        Self {
            tol: 1e-12,
            max_iter: 1_000_000,
            method: RateMethod::Functional,
            check_stability: true,
        }
    }
}

impl RateOptions {
    pub fn with_method(method: RateMethod) -> Self {
        Self { method, ..Self::default() }
    }
}

/// Minimal non-negative solution of `A0 + R A1 + R^2 A2 = 0`.
#[derive(Debug, Clone)]
pub struct RateMatrix {
    pub matrix: DMatrix<f64>,
    pub iterations: usize,
    /// Infinity norm of `A0 + R A1 + R^2 A2`.
    pub residual: f64,
    pub method: RateMethod,
}

impl RateMatrix {
    /// Perron root estimated by power iteration.
    pub fn spectral_radius(&self) -> f64 {
        let m = &self.matrix;
        let dim = m.nrows();
        let mut x = DVector::from_element(dim, 1.0 / dim as f64);
        let mut est = 0.0;
        for _ in 0..100_000 {
            let y = m.tr_mul(&x);
            let norm = y.iter().map(|v| v.abs()).sum::<f64>();
            if norm == 0.0 {
                return 0.0;
            }
            let next = y / norm;
            let change = (&next - &x).amax();
            x = next;
            est = norm;
            if change < 1e-14 {
                break;
            }
        }
        est
    }
}

pub fn solve_rate_matrix(blocks: &QbdBlocks, opts: RateOptions) -> Result<RateMatrix> {
    if opts.check_stability {
        let rho = offered_utilization(&blocks.params, blocks.cap.s);
        let bound = rho_max(&blocks.params, blocks.cap).rho_max;
        if rho >= bound {
            return Err(Error::NotStable { rho, rho_max: bound });
        }
    }
    let (matrix, iterations) = match opts.method {
        RateMethod::Functional => functional_iteration(blocks, opts)?,
        RateMethod::LogReduction => logarithmic_reduction(blocks, opts)?,
    };
    let residual = rate_residual(blocks, &matrix);
    Ok(RateMatrix { matrix, iterations, residual, method: opts.method })
}

pub fn rate_residual(blocks: &QbdBlocks, r: &DMatrix<f64>) -> f64 {
    let res = &blocks.a0 + r * &blocks.a1 + r * r * &blocks.a2;
    inf_norm(&res)
}

fn inf_norm(m: &DMatrix<f64>) -> f64 {
    m.row_iter()
        .map(|row| row.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

fn functional_iteration(blocks: &QbdBlocks, opts: RateOptions) -> Result<(DMatrix<f64>, usize)> {
    let dim = blocks.a1.nrows();
    let a1_inv = blocks
        .a1
        .clone()
        .try_inverse()
        .ok_or(Error::SingularSystem("repeating local generator"))?;
    let base = -(&blocks.a0 * &a1_inv);
    let down = blocks.a2.diagonal();
    let mut r = DMatrix::zeros(dim, dim);
    let mut change = f64::INFINITY;
    for it in 1..=opts.max_iter {
        let mut sq = &r * &r;
        for (c, d) in down.iter().enumerate() {
            sq.column_mut(c).scale_mut(*d);
        }
        let next = &base - sq * &a1_inv;
        change = (&next - &r).amax();
        r = next;
        if change < opts.tol {
            return Ok((r, it));
        }
    }
    Err(Error::MaxIterations { iterations: opts.max_iter, change })
}

fn logarithmic_reduction(blocks: &QbdBlocks, opts: RateOptions) -> Result<(DMatrix<f64>, usize)> {
    let dim = blocks.a1.nrows();
    let eye = DMatrix::<f64>::identity(dim, dim);
    let neg_a1_inv = (-&blocks.a1)
        .try_inverse()
        .ok_or(Error::SingularSystem("repeating local generator"))?;
    let mut up = &neg_a1_inv * &blocks.a0;
    let mut down = &neg_a1_inv * &blocks.a2;
    // First-passage matrix to the level below.
    let mut g = down.clone();
    let mut t = up.clone();
    let max_iter = opts.max_iter.min(200);
    let mut change = f64::INFINITY;
    for it in 1..=max_iter {
        let u = &up * &down + &down * &up;
        let inv = (&eye - u)
            .try_inverse()
            .ok_or(Error::SingularSystem("logarithmic reduction step"))?;
        let up_next = &inv * (&up * &up);
        let down_next = &inv * (&down * &down);
        let incr = &t * &down_next;
        change = incr.amax();
        g += incr;
        t = &t * &up_next;
        up = up_next;
        down = down_next;
        if change < opts.tol {
            let m = -(&blocks.a1 + &blocks.a0 * &g);
            let m_inv = m
                .try_inverse()
                .ok_or(Error::SingularSystem("rate matrix from first passage"))?;
            return Ok((&blocks.a0 * m_inv, it));
        }
    }
    Err(Error::MaxIterations { iterations: max_iter, change })
}

#[derive(Debug, Clone)]
pub struct HoldingDistribution {
    pub params: ModelParams,
    pub cap: CapacityPair,
    /// Stationary vectors of levels `0..=n`.
    pub levels: Vec<Vec<f64>>,
    pub rate: RateMatrix,
    /// Phase-wise mass of all levels `>= n`.
    tail_phase: Vec<f64>,
    /// Phase-wise sum over `m >= 1` of `m` times the mass of level `n + m`.
    tail_excess: Vec<f64>,
}

/// Boundary solve by linear level reduction followed by normalization.
pub fn stationary_holding(blocks: &QbdBlocks, rate: &RateMatrix) -> Result<HoldingDistribution> {
    let n = blocks.cap.n as usize;
    let dim = n + 1;

    // ratios[i] maps the level i-1 vector to the level i vector.
    let mut ratios: Vec<DMatrix<f64>> = vec![DMatrix::zeros(0, 0); n + 1];
    let mut local = &blocks.boundary_diag[n] + &rate.matrix.map(|v| v.max(0.0)) * &blocks.a2;
    for i in (1..=n).rev() {
        censored_diagonal(&mut local, &blocks.boundary_down[i - 1]);
        let inv = local
            .clone()
            .try_inverse()
            .ok_or(Error::SingularSystem("boundary level reduction"))?;
        let ri = (-(&blocks.boundary_up[i - 1] * inv)).map(|v| v.max(0.0));
        local = &blocks.boundary_diag[i - 1] + &ri * &blocks.boundary_down[i - 1];
        ratios[i] = ri;
    }

    let mut levels: Vec<DVector<f64>> = Vec::with_capacity(n + 1);
    levels.push(DVector::from_element(1, 1.0));
    for ratio in ratios.iter().skip(1) {
        let prev = levels.last().expect("level zero present");
        let next = ratio.tr_mul(prev);
        if next.iter().any(|v| !v.is_finite()) {
            return Err(Error::SingularSystem("boundary level reduction"));
        }
        levels.push(next);
    }

    let eye = DMatrix::<f64>::identity(dim, dim);
    let lu = (&eye - &rate.matrix).transpose().lu();
    let tail = lu
        .solve(&levels[n])
        .ok_or(Error::SingularSystem("geometric tail"))?;
    let tail_cum = lu
        .solve(&tail)
        .ok_or(Error::SingularSystem("geometric tail moment"))?;
    let tail_excess = &tail_cum - &tail;

    let mut mass: Vec<f64> = levels[..n].iter().map(|v| v.sum()).collect();
    mass.push(tail.sum());
    let total = stable_sum(&mass);
    if !(total.is_finite() && total > 0.0) {
        return Err(Error::SingularSystem("normalization"));
    }
    let levels: Vec<Vec<f64>> = levels
        .into_iter()
        .map(|v| v.iter().map(|x| x / total).collect())
        .collect();
    Ok(HoldingDistribution {
        params: blocks.params,
        cap: blocks.cap,
        levels,
        rate: rate.clone(),
        tail_phase: tail.iter().map(|x| x / total).collect(),
        tail_excess: tail_excess.iter().map(|x| x / total).collect(),
    })
}

/// Resets the diagonal of a censored generator block from its row sums.
///
/// Censoring onto levels `0..=i` keeps every row summing to zero, so the
/// diagonal equals minus the off-diagonal mass and the rate down to level
/// `i - 1`. Computing it this way avoids cancellation near criticality.
fn censored_diagonal(local: &mut DMatrix<f64>, down: &DMatrix<f64>) {
    for r in 0..local.nrows() {
        let mut out = down.row(r).sum();
        for c in 0..local.ncols() {
            if c != r {
                local[(r, c)] = local[(r, c)].max(0.0);
                out += local[(r, c)];
            }
        }
        local[(r, r)] = -out;
    }
}

/// Builds blocks, solves for the rate matrix and the stationary law.
pub fn solve_holding(
    params: &ModelParams,
    cap: CapacityPair,
    opts: RateOptions,
) -> Result<HoldingDistribution> {
    let blocks = build_qbd_blocks(params, cap)?;
    let rate = solve_rate_matrix(&blocks, opts)?;
    stationary_holding(&blocks, &rate)
}

impl HoldingDistribution {
    /// Stationary vector of any level; levels above `n` use the geometric form.
    pub fn level(&self, i: usize) -> Vec<f64> {
        let n = self.cap.n as usize;
        if i <= n {
            return self.levels[i].clone();
        }
        let mut v = DVector::from_vec(self.levels[n].clone());
        for _ in n..i {
            v = self.rate.matrix.tr_mul(&v);
        }
        v.iter().copied().collect()
    }

    pub fn total_mass(&self) -> f64 {
        let n = self.cap.n as usize;
        let mut parts: Vec<f64> = self.levels[..n].iter().map(|v| v.iter().sum()).collect();
        parts.push(self.tail_phase.iter().sum());
        stable_sum(&parts)
    }

    /// Distribution of the number of needy customers.
    pub fn needy_marginal(&self) -> Vec<f64> {
        let n = self.cap.n as usize;
        (0..=n)
            .map(|j| {
                let mut parts: Vec<f64> =
                    self.levels[..n].iter().filter_map(|v| v.get(j).copied()).collect();
                parts.push(self.tail_phase[j]);
                stable_sum(&parts)
            })
            .collect()
    }

    /// Probability that the facility is full.
    pub fn p_full(&self) -> f64 {
        stable_sum(&self.tail_phase)
    }

    /// Mass of each level `0..n` followed by the total mass at or above `n`.
    pub fn census_masses(&self) -> Vec<f64> {
        let n = self.cap.n as usize;
        let mut out: Vec<f64> = self.levels[..n].iter().map(|v| v.iter().sum()).collect();
        out.push(self.p_full());
        out
    }

    /// Writes `level,j,prob` rows for levels `0..=n + extra_levels`.
    pub fn write_csv<W: Write>(&self, mut out: W, extra_levels: usize) -> io::Result<()> {
        writeln!(out, "level,j,prob")?;
        let top = self.cap.n as usize + extra_levels;
        for i in 0..=top {
            for (j, p) in self.level(i).iter().enumerate() {
                writeln!(out, "{},{},{:.16e}", i, j, p)?;
            }
        }
        Ok(())
    }
}

pub fn perf_holding(dist: &HoldingDistribution) -> Result<PerformanceReport> {
    let s = dist.cap.s as usize;
    let n = dist.cap.n as usize;
    let mu = dist.params.mu;
    let marginal = dist.needy_marginal();

    let delay: Vec<f64> = marginal.iter().skip(s).copied().collect();
    let wait: Vec<f64> = marginal
        .iter()
        .enumerate()
        .skip(s)
        .map(|(j, p)| (j - s + 1) as f64 / (s as f64 * mu) * p)
        .collect();
    let busy: Vec<f64> = marginal
        .iter()
        .enumerate()
        .map(|(j, p)| j.min(s) as f64 * p)
        .collect();
    let masses = dist.census_masses();
    let inside: Vec<f64> = masses.iter().enumerate().map(|(i, m)| i as f64 * m).collect();

    Ok(PerformanceReport {
        p_delay: stable_sum(&delay).clamp(0.0, 1.0),
        p_boundary: dist.p_full().clamp(0.0, 1.0),
        e_wait: stable_sum(&wait),
        e_holding_queue: stable_sum(&dist.tail_excess).max(0.0),
        rho_s: (stable_sum(&busy) / s as f64).clamp(0.0, 1.0),
        rho_n: (stable_sum(&inside) / n as f64).clamp(0.0, 1.0),
    })
}

/// Delay measures as seen by service requests rather than by time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RequestMeasures {
    /// Fraction of service requests that find all servers busy.
    pub p_delay: f64,
    /// Mean needy-queue wait per service request.
    pub e_wait: f64,
    /// Long-run rate of service requests.
    pub request_rate: f64,
}

/// Requests come from admissions (external or from the holding room) and
/// from content customers turning needy. Each sees the needy count just
/// before it joins; an admission from the holding room follows a departure,
/// so it sees one needy customer fewer than the state it fires from.
pub fn request_measures(dist: &HoldingDistribution) -> RequestMeasures {
    let s = dist.cap.s as usize;
    let n = dist.cap.n as usize;
    let ModelParams { lambda, mu, delta, p } = dist.params;
    let mut rate = Vec::new();
    let mut delayed = Vec::new();
    let mut wait = Vec::new();
    let mut add = |r: f64, seen: usize| {
        rate.push(r);
        if seen >= s {
            delayed.push(r);
            wait.push(r * (seen - s + 1) as f64 / (s as f64 * mu));
        }
    };
    for (i, level) in dist.levels[..n].iter().enumerate() {
        for (j, &pi) in level.iter().enumerate() {
            add(lambda * pi, j);
            add((i - j) as f64 * delta * pi, j);
        }
    }
    for j in 0..=n {
        let at_or_above = dist.tail_phase[j];
        let above = (at_or_above - dist.levels[n][j]).max(0.0);
        add((n - j) as f64 * delta * at_or_above, j);
        if j > 0 {
            add((1.0 - p) * service_rate(j, s, mu) * above, j - 1);
        }
    }
    let total = stable_sum(&rate);
    RequestMeasures {
        p_delay: (stable_sum(&delayed) / total).clamp(0.0, 1.0),
        e_wait: stable_sum(&wait) / total,
        request_rate: total,
    }
}

/// Writes a dense matrix as `row,col,value` rows.
pub fn write_matrix_csv<W: Write>(m: &DMatrix<f64>, mut out: W) -> io::Result<()> {
    writeln!(out, "row,col,value")?;
    for r in 0..m.nrows() {
        for c in 0..m.ncols() {
            writeln!(out, "{},{},{:.16e}", r, c, m[(r, c)])?;
        }
    }
    Ok(())
}
