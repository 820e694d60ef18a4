//! Exact stationary analysis of the model with blocking.
//!
//! The stationary law is a product form over (needy, content) counts
//! restricted to the triangle `j + k <= n`. Because the weight factorizes,
//! the distribution is stored as two log-weight vectors plus cumulative
//! content weights; every marginal and performance measure is then O(n).

use std::io::{self, Write};

use crate::error::Result;
use crate::model::{derive_loads, CapacityPair, ModelParams, PerformanceReport};
use crate::special::{log_add, log_factorials, log_sum_exp, stable_sum};

#[derive(Debug, Clone)]
pub struct BlockingDistribution {
    pub params: ModelParams,
    pub cap: CapacityPair,
    /// ln(R1^j / kappa(j)) for j = 0..=n.
    log_needy: Vec<f64>,
    /// ln(R2^k / k!) for k = 0..=n.
    log_content: Vec<f64>,
    /// ln of the partial sums of the content weights.
    log_content_cum: Vec<f64>,
    log_norm: f64,
}

/// Stationary distribution of the blocking model.
pub fn stationary_blocking(params: &ModelParams, cap: CapacityPair) -> Result<BlockingDistribution> {
    BlockingDistribution::build(params, cap.s, cap.n)
}

impl BlockingDistribution {
    /// `n` may be zero here, which is the empty population used by the
    /// arrival theorem when `n = 1`.
    fn build(params: &ModelParams, s: u32, n: u32) -> Result<Self> {
        let loads = derive_loads(params)?;
        let n_us = n as usize;
        let s_us = s as usize;
        let lf = log_factorials(n_us);
        let ln_r1 = loads.r1.ln();
        let ln_r2 = loads.r2.ln();
        let ln_s = (s as f64).ln();

        let log_needy: Vec<f64> = (0..=n_us)
            .map(|j| {
                let ln_kappa = if j <= s_us {
                    lf[j]
                } else {
                    lf[s_us] + (j - s_us) as f64 * ln_s
                };
                j as f64 * ln_r1 - ln_kappa
            })
            .collect();
        let log_content: Vec<f64> = (0..=n_us)
            .map(|k| {
                if k == 0 {
                    0.0
                } else if loads.r2 == 0.0 {
                    f64::NEG_INFINITY
                } else {
                    k as f64 * ln_r2 - lf[k]
                }
            })
            .collect();
        let mut log_content_cum = Vec::with_capacity(n_us + 1);
        let mut acc = f64::NEG_INFINITY;
        for &w in &log_content {
            acc = log_add(acc, w);
            log_content_cum.push(acc);
        }
        let terms: Vec<f64> = (0..=n_us)
            .map(|j| log_needy[j] + log_content_cum[n_us - j])
            .collect();
        let log_norm = log_sum_exp(&terms);
        Ok(Self {
            params: *params,
            cap: CapacityPair { s, n },
            log_needy,
            log_content,
            log_content_cum,
            log_norm,
        })
    }

    pub fn n(&self) -> u32 {
        self.cap.n
    }

    /// Probability of `j` needy and `k` content customers.
    pub fn prob(&self, j: u32, k: u32) -> f64 {
        if j + k > self.cap.n {
            return 0.0;
        }
        (self.log_needy[j as usize] + self.log_content[k as usize] - self.log_norm).exp()
    }

    /// Distribution of the number of needy customers.
    pub fn needy_marginal(&self) -> Vec<f64> {
        let n = self.cap.n as usize;
        (0..=n)
            .map(|j| (self.log_needy[j] + self.log_content_cum[n - j] - self.log_norm).exp())
            .collect()
    }

    /// Distribution of the number of customers in the facility.
    pub fn census_marginal(&self) -> Vec<f64> {
        let n = self.cap.n;
        (0..=n)
            .map(|m| stable_sum(&(0..=m).map(|j| self.prob(j, m - j)).collect::<Vec<_>>()))
            .collect()
    }

    /// Probability that the facility is full, which by PASTA is the
    /// blocking probability.
    pub fn p_full(&self) -> f64 {
        let n = self.cap.n;
        stable_sum(&(0..=n).map(|j| self.prob(j, n - j)).collect::<Vec<_>>())
    }

    /// Mean number of content customers.
    fn mean_content(&self) -> f64 {
        // sum_{k<=m} k R2^k/k! = R2 * sum_{k<=m-1} R2^k/k!
        let n = self.cap.n as usize;
        let r2 = derive_loads(&self.params).map(|l| l.r2).unwrap_or(0.0);
        if r2 == 0.0 {
            return 0.0;
        }
        let terms: Vec<f64> = (0..n)
            .map(|j| (self.log_needy[j] + self.log_content_cum[n - 1 - j] - self.log_norm).exp())
            .collect();
        r2 * stable_sum(&terms)
    }

    /// Writes `j,k,prob` rows for every state.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "j,k,prob")?;
        let n = self.cap.n;
        for j in 0..=n {
            for k in 0..=(n - j) {
                writeln!(out, "{},{},{:.16e}", j, k, self.prob(j, k))?;
            }
        }
        Ok(())
    }
}

/// Delay, blocking, wait and utilization measures.
///
/// With `arrival_theorem` set, delay and wait are evaluated from the
/// population `n - 1` distribution, which is what an admitted arrival sees.
pub fn perf_blocking(dist: &BlockingDistribution, arrival_theorem: bool) -> Result<PerformanceReport> {
    let s = dist.cap.s;
    let n = dist.cap.n;
    let mu = dist.params.mu;

    let seen = if arrival_theorem {
        BlockingDistribution::build(&dist.params, s, n - 1)?
    } else {
        dist.clone()
    };
    let seen_marginal = seen.needy_marginal();
    let delay_terms: Vec<f64> = seen_marginal.iter().skip(s as usize).copied().collect();
    let wait_terms: Vec<f64> = seen_marginal
        .iter()
        .enumerate()
        .skip(s as usize)
        .map(|(j, p)| (j as f64 - s as f64 + 1.0) / (s as f64 * mu) * p)
        .collect();

    let marginal = dist.needy_marginal();
    let busy_terms: Vec<f64> = marginal
        .iter()
        .enumerate()
        .map(|(j, p)| (j.min(s as usize)) as f64 * p)
        .collect();
    let needy_mean = stable_sum(
        &marginal
            .iter()
            .enumerate()
            .map(|(j, p)| j as f64 * p)
            .collect::<Vec<_>>(),
    );

    Ok(PerformanceReport {
        p_delay: stable_sum(&delay_terms).clamp(0.0, 1.0),
        p_boundary: dist.p_full().clamp(0.0, 1.0),
        e_wait: stable_sum(&wait_terms),
        e_holding_queue: 0.0,
        rho_s: (stable_sum(&busy_terms) / s as f64).clamp(0.0, 1.0),
        rho_n: ((needy_mean + dist.mean_content()) / n as f64).clamp(0.0, 1.0),
    })
}
