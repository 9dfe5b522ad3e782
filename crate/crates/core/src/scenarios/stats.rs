//! Summary statistics and the tests used to compare attack performance.

use serde::{Deserialize, Serialize};
use statrs::distribution::{Binomial, ContinuousCDF, DiscreteCDF, FisherSnedecor, Normal};

use crate::{Error, Result};

pub fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    values.iter().sum::<f64>() / values.len() as f64
}

/// Sample standard deviation (`n − 1` denominator); 0 for fewer than two
/// values.
pub fn sample_std(values: &[f64]) -> f64 {
    let n = values.len();
    if n < 2 {
        return 0.0;
    }
    let m = mean(values);
    (values.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
}

/// Standard error of the mean.
pub fn sem(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    sample_std(values) / (values.len() as f64).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnovaResult {
    pub f: f64,
    pub df_between: usize,
    pub df_within: usize,
    pub p_value: f64,
}

/// One-way ANOVA across groups.
///
/// With zero within-group variance, `F` is infinite when the group means
/// differ and 0 when they do not.
pub fn anova_f(groups: &[&[f64]]) -> Result<AnovaResult> {
    let k = groups.len();
    if k < 2 {
        return Err(Error::InsufficientData("ANOVA needs at least two groups".into()));
    }
    if groups.iter().any(|g| g.len() < 2) {
        return Err(Error::InsufficientData(
            "every ANOVA group needs at least two values".into(),
        ));
    }
    let n: usize = groups.iter().map(|g| g.len()).sum();
    let grand = groups.iter().flat_map(|g| g.iter()).sum::<f64>() / n as f64;
    let mut ss_between = 0.0;
    let mut ss_within = 0.0;
    for g in groups {
        let m = mean(g);
        ss_between += g.len() as f64 * (m - grand).powi(2);
        ss_within += g.iter().map(|v| (v - m).powi(2)).sum::<f64>();
    }
    let df_between = k - 1;
    let df_within = n - k;
    let ms_between = ss_between / df_between as f64;
    let ms_within = ss_within / df_within as f64;
    let (f, p_value) = if ms_within > 0.0 {
        let f = ms_between / ms_within;
        let dist = FisherSnedecor::new(df_between as f64, df_within as f64)
            .map_err(|e| Error::Data(e.to_string()))?;
        (f, dist.sf(f))
    } else if ms_between > 0.0 {
        (f64::INFINITY, 0.0)
    } else {
        (0.0, 1.0)
    };
    Ok(AnovaResult {
        f,
        df_between,
        df_within,
        p_value,
    })
}

fn binomial(n: u64, p: f64) -> Result<Binomial> {
    Binomial::new(p, n).map_err(|e| Error::Config(format!("binomial({n}, {p}): {e}")))
}

/// Central acceptance region of `Binomial(n, p)` at level `1 − alpha`, as
/// proportions: the smallest `lo` with `P(X ≤ lo) ≥ alpha/2` and the
/// smallest `hi` with `P(X ≤ hi) ≥ 1 − alpha/2`.
pub fn binomial_interval(n: u64, p: f64, alpha: f64) -> Result<(f64, f64)> {
    if n == 0 {
        return Err(Error::InsufficientData(
            "binomial interval over zero trials".into(),
        ));
    }
    let dist = binomial(n, p)?;
    let quantile = |q: f64| (0..=n).find(|&k| dist.cdf(k) >= q).unwrap_or(n);
    let lo = quantile(alpha / 2.0);
    let hi = quantile(1.0 - alpha / 2.0);
    Ok((lo as f64 / n as f64, hi as f64 / n as f64))
}

/// `P(X ≥ k)` for `X ~ Binomial(n, p)`.
pub fn binomial_upper_tail(k: u64, n: u64, p: f64) -> Result<f64> {
    if k == 0 {
        return Ok(1.0);
    }
    Ok(binomial(n, p)?.sf(k - 1))
}

/// One-sided p-value for the hypothesis that the second proportion is lower
/// than the first (pooled two-proportion z-test).
pub fn proportion_decrease_p(s1: u64, n1: u64, s2: u64, n2: u64) -> f64 {
    let p1 = s1 as f64 / n1 as f64;
    let p2 = s2 as f64 / n2 as f64;
    let pooled = (s1 + s2) as f64 / (n1 + n2) as f64;
    let se = (pooled * (1.0 - pooled) * (1.0 / n1 as f64 + 1.0 / n2 as f64)).sqrt();
    if se == 0.0 {
        return if p2 < p1 { 0.0 } else { 1.0 };
    }
    let z = (p1 - p2) / se;
    Normal::standard().sf(z)
}
