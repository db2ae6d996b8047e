//! Small statistical toolkit shared by the estimators.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF, Normal, StudentsT};

use crate::clock::splitmix64;

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Unbiased sample variance.
pub fn variance(xs: &[f64]) -> f64 {
    let m = mean(xs);
    xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() as f64 - 1.0)
}

/// Standard error of the mean.
pub fn std_error(xs: &[f64]) -> f64 {
    (variance(xs) / xs.len() as f64).sqrt()
}

/// Standard error of a sample variance, normal-theory free: uses the
/// fourth central moment.
pub fn variance_std_error(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let m = mean(xs);
    let m2 = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n;
    let m4 = xs.iter().map(|x| (x - m).powi(4)).sum::<f64>() / n;
    ((m4 - m2 * m2 * (n - 3.0) / (n - 1.0)) / n).max(0.0).sqrt()
}

pub fn skewness(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let m = mean(xs);
    let m2 = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n;
    let m3 = xs.iter().map(|x| (x - m).powi(3)).sum::<f64>() / n;
    m3 / m2.powf(1.5)
}

pub fn excess_kurtosis(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let m = mean(xs);
    let m2 = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n;
    let m4 = xs.iter().map(|x| (x - m).powi(4)).sum::<f64>() / n;
    m4 / (m2 * m2) - 3.0
}

/// Binomial proportion and its standard error.
pub fn proportion(successes: usize, n: usize) -> (f64, f64) {
    let p = successes as f64 / n as f64;
    (p, (p * (1.0 - p) / n as f64).sqrt())
}

/// Two-sided Student t quantile `t_{1 - alpha/2, df}`.
pub fn t_critical(alpha: f64, df: f64) -> f64 {
    StudentsT::new(0.0, 1.0, df)
        .expect("positive df")
        .inverse_cdf(1.0 - alpha / 2.0)
}

pub fn normal_quantile(p: f64) -> f64 {
    Normal::new(0.0, 1.0).unwrap().inverse_cdf(p)
}

pub fn chi2_survival(x: f64, df: f64) -> f64 {
    1.0 - ChiSquared::new(df).expect("positive df").cdf(x)
}

/// Ordinary least squares `y = intercept + slope x`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub slope_se: f64,
    pub intercept_se: f64,
    pub r_squared: f64,
    pub n: usize,
}

impl LinearFit {
    /// Two-sided `1 - alpha` confidence interval for the slope.
    pub fn slope_ci(&self, alpha: f64) -> (f64, f64) {
        let df = (self.n as f64 - 2.0).max(1.0);
        let h = t_critical(alpha, df) * self.slope_se;
        (self.slope - h, self.slope + h)
    }
}

pub fn linear_fit(x: &[f64], y: &[f64]) -> LinearFit {
    assert_eq!(x.len(), y.len());
    let n = x.len() as f64;
    let mx = mean(x);
    let my = mean(y);
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = x
        .iter()
        .zip(y)
        .map(|(a, b)| (b - intercept - slope * a).powi(2))
        .sum();
    let s2 = if n > 2.0 { sse / (n - 2.0) } else { 0.0 };
    LinearFit {
        slope,
        intercept,
        slope_se: (s2 / sxx).sqrt(),
        intercept_se: (s2 * (1.0 / n + mx * mx / sxx)).sqrt(),
        r_squared: if syy > 0.0 { 1.0 - sse / syy } else { 1.0 },
        n: x.len(),
    }
}

/// Weighted least squares with weights `w` (inverse variances).
pub fn weighted_linear_fit(x: &[f64], y: &[f64], w: &[f64]) -> LinearFit {
    let sw: f64 = w.iter().sum();
    let mx = x.iter().zip(w).map(|(a, w)| a * w).sum::<f64>() / sw;
    let my = y.iter().zip(w).map(|(b, w)| b * w).sum::<f64>() / sw;
    let sxx: f64 = x.iter().zip(w).map(|(a, w)| w * (a - mx).powi(2)).sum();
    let sxy: f64 = x
        .iter()
        .zip(y)
        .zip(w)
        .map(|((a, b), w)| w * (a - mx) * (b - my))
        .sum();
    let syy: f64 = y.iter().zip(w).map(|(b, w)| w * (b - my).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = x
        .iter()
        .zip(y)
        .zip(w)
        .map(|((a, b), w)| w * (b - intercept - slope * a).powi(2))
        .sum();
    let n = x.len() as f64;
    let s2 = if n > 2.0 { sse / (n - 2.0) } else { 0.0 };
    LinearFit {
        slope,
        intercept,
        slope_se: (s2 / sxx).sqrt(),
        intercept_se: (s2 * (1.0 / sw + mx * mx / sxx)).sqrt(),
        r_squared: if syy > 0.0 { 1.0 - sse / syy } else { 1.0 },
        n: x.len(),
    }
}

/// Jarque-Bera normality test; returns `(statistic, p_value)`.
pub fn jarque_bera(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let s = skewness(xs);
    let k = excess_kurtosis(xs);
    let jb = n / 6.0 * (s * s + k * k / 4.0);
    (jb, chi2_survival(jb, 2.0))
}

/// Two-sample Kolmogorov-Smirnov test; returns `(D, p_value)` with the
/// asymptotic Kolmogorov distribution.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> (f64, f64) {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (n, m) = (a.len(), b.len());
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < n && j < m {
        let x = a[i].min(b[j]);
        while i < n && a[i] <= x {
            i += 1;
        }
        while j < m && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / n as f64 - j as f64 / m as f64).abs());
    }
    let ne = (n * m) as f64 / (n + m) as f64;
    let lambda = (ne.sqrt() + 0.12 + 0.11 / ne.sqrt()) * d;
    (d, kolmogorov_survival(lambda))
}

/// `P(K > x)` for the Kolmogorov distribution.
pub fn kolmogorov_survival(x: f64) -> f64 {
    if x < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..200 {
        let k = k as f64;
        let term = 2.0 * (-1f64).powf(k - 1.0) * (-2.0 * k * k * x * x).exp();
        sum += term;
        if term.abs() < 1e-16 {
            break;
        }
    }
    sum.clamp(0.0, 1.0)
}

/// Pearson chi-square goodness of fit; bins with expected count below 5
/// are pooled into their neighbour. Returns `(statistic, df, p_value)`
/// where `df = bins - 1 - fitted_params`.
pub fn chi_square_gof(observed: &[f64], expected: &[f64], fitted_params: usize) -> (f64, f64, f64) {
    let mut o = Vec::new();
    let mut e = Vec::new();
    let (mut ao, mut ae) = (0.0, 0.0);
    for (&x, &y) in observed.iter().zip(expected) {
        ao += x;
        ae += y;
        if ae >= 5.0 {
            o.push(ao);
            e.push(ae);
            ao = 0.0;
            ae = 0.0;
        }
    }
    if ae > 0.0 || ao > 0.0 {
        match e.last_mut() {
            Some(last) => {
                *last += ae;
                *o.last_mut().unwrap() += ao;
            }
            None => {
                o.push(ao);
                e.push(ae);
            }
        }
    }
    let stat: f64 = o.iter().zip(&e).map(|(x, y)| (x - y).powi(2) / y).sum();
    let df = (o.len() as f64 - 1.0 - fitted_params as f64).max(1.0);
    (stat, df, chi2_survival(stat, df))
}

/// Deterministic generator for resampling, driven by SplitMix64.
#[derive(Clone, Debug)]
pub struct SplitMix {
    state: u64,
}

impl SplitMix {
    pub fn new(seed: u64) -> Self {
        SplitMix { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9e37_79b9_7f4a_7c15);
        splitmix64(self.state)
    }

    pub fn below(&mut self, n: usize) -> usize {
        ((self.next_u64() as u128 * n as u128) >> 64) as usize
    }

    /// Uniform in `[0, 1)`.
    pub fn unit(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }
}

/// Percentile bootstrap interval of `stat` at level `1 - alpha`.
pub fn bootstrap_ci<T: Clone>(
    data: &[T],
    resamples: usize,
    alpha: f64,
    seed: u64,
    stat: impl Fn(&[T]) -> Option<f64>,
) -> Option<(f64, f64)> {
    let mut rng = SplitMix::new(seed);
    let mut values = Vec::with_capacity(resamples);
    let mut buf = Vec::with_capacity(data.len());
    for _ in 0..resamples {
        buf.clear();
        for _ in 0..data.len() {
            buf.push(data[rng.below(data.len())].clone());
        }
        if let Some(v) = stat(&buf) {
            values.push(v);
        }
    }
    if values.len() < resamples / 2 {
        return None;
    }
    values.sort_by(f64::total_cmp);
    let q = |p: f64| values[((values.len() - 1) as f64 * p).round() as usize];
    Some((q(alpha / 2.0), q(1.0 - alpha / 2.0)))
}
