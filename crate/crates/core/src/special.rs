//! Normal distribution helpers, the scaled complementary error function and
//! a few summation utilities shared by the exact solvers.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

pub const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;
const INV_SQRT_PI: f64 = 0.564_189_583_547_756_3;

/// Standard normal density.
pub fn norm_pdf(x: f64) -> f64 {
    INV_SQRT_2PI * (-0.5 * x * x).exp()
}

/// Standard normal distribution function, accurate in both tails.
pub fn norm_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x * FRAC_1_SQRT_2)
}

/// Scaled complementary error function `exp(x^2) erfc(x)`.
pub fn erfcx(x: f64) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    if x < 0.5 {
        // exp(x^2) overflows to infinity for x below about -26.6, which is the
        // correct limit.
        return (x * x).exp() * libm::erfc(x);
    }
    if x < 26.0 {
        // Split x^2 so the large exponent carries no rounding error.
        let hi = x * x;
        let lo = x.mul_add(x, -hi);
        return hi.exp() * (1.0 + lo) * libm::erfc(x);
    }
    // Asymptotic series; the first omitted term is below 1e-17 here.
    let z = 1.0 / (2.0 * x * x);
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..10 {
        term *= -((2 * k - 1) as f64) * z;
        sum += term;
    }
    sum * INV_SQRT_PI / x
}

/// `exp(w^2/2) Phi(w)` for any finite `w` that does not overflow the result.
pub fn scaled_norm_cdf(w: f64) -> f64 {
    0.5 * erfcx(-w * FRAC_1_SQRT_2)
}

/// `phi(a) exp(w^2/2) Phi(w)` evaluated without forming the large factors
/// separately.
pub fn mixed_tail(a: f64, w: f64) -> f64 {
    if w >= 0.0 {
        INV_SQRT_2PI * (0.5 * (w * w - a * a)).exp() * norm_cdf(w)
    } else {
        INV_SQRT_2PI * (-0.5 * a * a).exp() * scaled_norm_cdf(w)
    }
}

/// Inverse Mills ratio `phi(x) / Phi(x)`.
pub fn pdf_over_cdf(x: f64) -> f64 {
    (2.0 / PI).sqrt() / erfcx(-x * FRAC_1_SQRT_2)
}

/// Neumaier compensated sum.
#[derive(Debug, Default, Clone, Copy)]
pub struct KahanSum {
    sum: f64,
    comp: f64,
}

impl KahanSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

/// Compensated sum taken in order of decreasing magnitude.
pub fn stable_sum(values: &[f64]) -> f64 {
    let mut sorted: Vec<f64> = values.to_vec();
    sorted.sort_by(|a, b| b.abs().total_cmp(&a.abs()));
    let mut acc = KahanSum::new();
    for x in sorted {
        acc.add(x);
    }
    acc.value()
}

/// `ln(exp(a) + exp(b))`.
pub fn log_add(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

pub fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    let terms: Vec<f64> = values.iter().map(|v| (v - max).exp()).collect();
    max + stable_sum(&terms).ln()
}

/// `ln k!` for every `k` in `0..=n`.
pub fn log_factorials(n: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(n + 1);
    let mut acc = KahanSum::new();
    out.push(0.0);
    for k in 1..=n {
        acc.add((k as f64).ln());
        out.push(acc.value());
    }
    out
}

pub fn ln_gamma(x: f64) -> f64 {
    libm::lgamma(x)
}

pub fn ln_binomial(n: u32, k: u32) -> f64 {
    ln_gamma(n as f64 + 1.0) - ln_gamma(k as f64 + 1.0) - ln_gamma((n - k) as f64 + 1.0)
}

/// Adaptive Simpson quadrature with Richardson correction.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    let m = 0.5 * (a + b);
    let (fa, fm, fb) = (f(a), f(m), f(b));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson_step(f, a, b, fa, fm, fb, whole, tol, 60)
}

#[allow(clippy::too_many_arguments)]
fn simpson_step<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let (flm, frm) = (f(lm), f(rm));
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    simpson_step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
        + simpson_step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
}

/// Two-sided 95% Student t quantile for `dof` degrees of freedom.
pub fn t_quantile_975(dof: usize) -> f64 {
    use statrs::distribution::{ContinuousCDF, StudentsT};
    if dof == 0 {
        return f64::INFINITY;
    }
    StudentsT::new(0.0, 1.0, dof as f64)
        .map(|t| t.inverse_cdf(0.975))
        .unwrap_or(1.959_963_984_540_054)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cdf_reference_values() {
        assert!((norm_cdf(0.0) - 0.5).abs() < 1e-16);
        assert!((norm_cdf(1.0) - 0.841_344_746_068_542_9).abs() < 1e-15);
        assert!((norm_cdf(-1.959_963_984_540_054) - 0.025).abs() < 1e-15);
        // Lower tail keeps relative accuracy.
        let v = norm_cdf(-20.0);
        assert!((v / 2.753_624_118_606_233_5e-89 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn erfcx_matches_direct_product_where_safe() {
        for &x in &[-3.0f64, -1.0, 0.0, 0.3, 0.7, 2.0, 5.0, 10.0, 20.0] {
            let direct = (x * x).exp() * libm::erfc(x);
            assert!((erfcx(x) / direct - 1.0).abs() < 1e-12, "x = {x}");
        }
    }

    #[test]
    fn erfcx_is_continuous_at_branch_points() {
        for &x in &[0.5f64, 26.0] {
            let lo = erfcx(x - 1e-12);
            let hi = erfcx(x + 1e-12);
            assert!((lo / hi - 1.0).abs() < 1e-11, "x = {x}");
        }
    }

    #[test]
    fn erfcx_large_argument_asymptote() {
        for &x in &[30.0f64, 100.0, 1e4] {
            let v = erfcx(x) * x * std::f64::consts::PI.sqrt();
            assert!((v - 1.0).abs() < 1.0 / (2.0 * x * x) + 1e-15);
            assert!(v < 1.0);
        }
    }

    #[test]
    fn mixed_tail_finite_on_wide_range() {
        for i in -40..=40 {
            let w = i as f64;
            for a in [w.abs(), w.abs() + 0.5] {
                let v = mixed_tail(a, w);
                assert!(v.is_finite() && v >= 0.0, "w = {w}");
                let log_ref = if w < 0.0 {
                    -0.5 * a * a + scaled_norm_cdf(w).ln()
                } else {
                    -0.5 * (a * a - w * w) + norm_cdf(w).ln()
                } + INV_SQRT_2PI.ln();
                if log_ref > -700.0 {
                    assert!((v.ln() - log_ref).abs() < 1e-12, "w = {w}, a = {a}");
                }
            }
        }
    }

    #[test]
    fn mixed_tail_matches_naive_where_safe() {
        for &(a, w) in &[(1.0f64, 0.5f64), (2.0, -1.5), (0.3, -4.0), (3.0, 2.0)] {
            let naive = norm_pdf(a) * (0.5 * w * w).exp() * norm_cdf(w);
            assert!((mixed_tail(a, w) / naive - 1.0).abs() < 1e-13);
        }
    }

    #[test]
    fn inverse_mills_ratio() {
        for &x in &[-30.0, -5.0, 0.0, 1.0, 4.0] {
            let v = pdf_over_cdf(x);
            if x > -8.0 {
                assert!((v / (norm_pdf(x) / norm_cdf(x)) - 1.0).abs() < 1e-12);
            } else {
                // phi(x)/Phi(x) is close to -x in the far lower tail.
                assert!((v / -x - 1.0).abs() < 2.0 / (x * x));
            }
        }
    }

    #[test]
    fn compensated_sum_beats_naive() {
        let mut v = vec![1.0];
        v.extend(std::iter::repeat(1e-16).take(10_000));
        assert!((stable_sum(&v) - (1.0 + 1e-12)).abs() < 1e-15);
    }

    #[test]
    fn log_helpers() {
        assert!((log_add(0.0, 0.0) - 2f64.ln()).abs() < 1e-15);
        assert_eq!(log_add(f64::NEG_INFINITY, 1.5), 1.5);
        let lf = log_factorials(20);
        assert!((lf[20] - 2_432_902_008_176_640_000f64.ln()).abs() < 1e-12);
        assert!((ln_binomial(10, 3) - 120f64.ln()).abs() < 1e-12);
        assert!((log_sum_exp(&[1000.0, 1000.0]) - (1000.0 + 2f64.ln())).abs() < 1e-12);
    }

    #[test]
    fn simpson_integrates_gaussian() {
        let v = adaptive_simpson(&norm_pdf, -10.0, 1.0, 1e-13);
        assert!((v - norm_cdf(1.0)).abs() < 1e-12);
    }

    #[test]
    fn t_quantiles() {
        assert!((t_quantile_975(29) - 2.045_229_642).abs() < 1e-6);
        assert!((t_quantile_975(100_000) - 1.96).abs() < 1e-3);
    }
}
