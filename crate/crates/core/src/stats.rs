//! Two-sample comparisons and moment confidence intervals.

use serde::Serialize;
use statrs::function::erf::erfc;

use crate::error::{Error, Result};

/// Two-sided 97.5% standard normal quantile.
pub const Z_95: f64 = 1.959_963_984_540_054;

/// Minimum sample size accepted by the asymptotic tests.
pub const MIN_SAMPLES: usize = 30;

/// Point estimate with a 95% normal confidence interval.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct EstimateCI {
    pub value: f64,
    pub std_error: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub n: usize,
}

impl EstimateCI {
    pub fn from_se(value: f64, std_error: f64, n: usize) -> Self {
        let se = std_error.max(0.0);
        EstimateCI {
            value,
            std_error: se,
            ci_low: value - Z_95 * se,
            ci_high: value + Z_95 * se,
            n,
        }
    }

    pub fn contains(&self, x: f64) -> bool {
        self.ci_low <= x && x <= self.ci_high
    }

    /// `|value − x| ≤ k·std_error + slack`.
    pub fn within(&self, x: f64, k: f64, slack: f64) -> bool {
        (self.value - x).abs() <= k * self.std_error + slack
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TwoSampleTest {
    Ks,
    Moment(u32),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TwoSampleResult {
    pub statistic: f64,
    pub p_value: f64,
    pub n1: usize,
    pub n2: usize,
    pub test: TwoSampleTest,
}

/// Mean taken as `x₀ + Σ(xᵢ − x₀)/n`: one sequential pass, exact for
/// constant input, and a pure function of the order of `xs`.
pub fn mean(xs: &[f64]) -> f64 {
    let Some(&x0) = xs.first() else {
        return f64::NAN;
    };
    let shift: f64 = xs.iter().map(|x| x - x0).sum();
    x0 + shift / xs.len() as f64
}

/// Unbiased sample covariance.
pub fn covariance(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len();
    if n < 2 {
        return 0.0;
    }
    let (mx, my) = (mean(xs), mean(ys));
    let s: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    s / (n - 1) as f64
}

pub fn variance(xs: &[f64]) -> f64 {
    covariance(xs, xs)
}

/// Kolmogorov distribution tail `Q(λ) = 2 Σ_{k=1}^{100} (−1)^{k−1} e^{−2k²λ²}`.
pub fn kolmogorov_q(lambda: f64) -> f64 {
    if lambda < 0.2 {
        // The alternating series has not converged yet; Q is 1 to 1e-12 here.
        return 1.0;
    }
    let mut sum = 0.0;
    let mut sign = 1.0;
    for k in 1..=100 {
        let kf = k as f64;
        sum += sign * (-2.0 * kf * kf * lambda * lambda).exp();
        sign = -sign;
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

fn sorted(xs: &[f64]) -> Result<Vec<f64>> {
    if xs.iter().any(|x| x.is_nan()) {
        return Err(Error::InvalidInput("samples contain NaN".into()));
    }
    let mut v = xs.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    Ok(v)
}

fn check_sizes(n1: usize, n2: usize) -> Result<()> {
    if n1 == 0 || n2 == 0 {
        return Err(Error::InvalidInput("two-sample test on an empty sample".into()));
    }
    if n1 < MIN_SAMPLES || n2 < MIN_SAMPLES {
        return Err(Error::Precondition(format!(
            "asymptotic tests need at least {MIN_SAMPLES} samples per side, got {n1} and {n2}"
        )));
    }
    Ok(())
}

/// Two-sample Kolmogorov–Smirnov test with the asymptotic p-value
/// `Q((√nₑ + 0.12 + 0.11/√nₑ)·D)`, `nₑ = n₁n₂/(n₁+n₂)`.
pub fn ks_two_sample(xs: &[f64], ys: &[f64]) -> Result<TwoSampleResult> {
    let (n1, n2) = (xs.len(), ys.len());
    check_sizes(n1, n2)?;
    let a = sorted(xs)?;
    let b = sorted(ys)?;
    let (mut i, mut j) = (0usize, 0usize);
    let mut d = 0.0f64;
    while i < n1 && j < n2 {
        let v = a[i].min(b[j]);
        while i < n1 && a[i] <= v {
            i += 1;
        }
        while j < n2 && b[j] <= v {
            j += 1;
        }
        d = d.max((i as f64 / n1 as f64 - j as f64 / n2 as f64).abs());
    }
    let ne = (n1 as f64 * n2 as f64) / (n1 + n2) as f64;
    let sq = ne.sqrt();
    let p = if d == 0.0 { 1.0 } else { kolmogorov_q((sq + 0.12 + 0.11 / sq) * d) };
    Ok(TwoSampleResult {
        statistic: d,
        p_value: p,
        n1,
        n2,
        test: TwoSampleTest::Ks,
    })
}

fn check_k(k: u32) -> Result<()> {
    if (1..=4).contains(&k) {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!("moment order must be 1..=4, got {k}")))
    }
}

/// `k`-th raw moment with its CLT standard error.
pub fn moment_ci(samples: &[f64], k: u32) -> Result<EstimateCI> {
    check_k(k)?;
    if samples.len() < MIN_SAMPLES {
        return Err(Error::Precondition(format!(
            "moment_ci needs at least {MIN_SAMPLES} samples, got {}",
            samples.len()
        )));
    }
    let powers: Vec<f64> = samples.iter().map(|x| x.powi(k as i32)).collect();
    let n = powers.len();
    let m = mean(&powers);
    let se = (variance(&powers) / n as f64).sqrt();
    Ok(EstimateCI::from_se(m, se, n))
}

/// Two-sided z-test for equality of the `k`-th raw moments.
pub fn moment_two_sample(xs: &[f64], ys: &[f64], k: u32) -> Result<TwoSampleResult> {
    check_sizes(xs.len(), ys.len())?;
    let a = moment_ci(xs, k)?;
    let b = moment_ci(ys, k)?;
    let se = (a.std_error.powi(2) + b.std_error.powi(2)).sqrt();
    let diff = (a.value - b.value).abs();
    let (z, p) = if se == 0.0 {
        if diff == 0.0 {
            (0.0, 1.0)
        } else {
            (f64::INFINITY, 0.0)
        }
    } else {
        let z = diff / se;
        (z, erfc(z / std::f64::consts::SQRT_2).clamp(0.0, 1.0))
    };
    Ok(TwoSampleResult {
        statistic: z,
        p_value: p,
        n1: xs.len(),
        n2: ys.len(),
        test: TwoSampleTest::Moment(k),
    })
}
