//! Gaussian kernel density baseline.
//!
//! Two forms are offered:
//!
//! * [`KdeForm::Verbatim`]: `1/(n h^d) Σ K((x − g_i) / h^d)`, with `h^d` both
//!   as normaliser and inside the kernel argument.
//! * [`KdeForm::Textbook`]: `1/(n h^d) Σ K((x − g_i) / h)`.
//!
//! `K` is the standard `d`-variate normal density. Evaluation is done in the
//! log domain; densities in 40 dimensions routinely underflow `f64`.

use std::f64::consts::PI;

use ndarray::{ArrayView1, ArrayView2};

use crate::distances::{
    squared_distance, stream_pairs, ComputeOptions, DistanceKind, DistanceSpec, SampleSource, Transformed,
};
use crate::{Error, RecordSet, Result, ScoreVector};

use super::fmt_f64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum KdeForm {
    #[default]
    Verbatim,
    Textbook,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KdeConfig {
    pub bandwidth: f64,
    pub form: KdeForm,
}

impl KdeConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.bandwidth > 0.0 && self.bandwidth.is_finite()) {
            return Err(Error::Config(format!(
                "bandwidth must be a positive finite number, got {}",
                self.bandwidth
            )));
        }
        Ok(())
    }

    /// `ln` of the kernel width `w` (`h^d` or `h`) for dimension `d`.
    fn ln_width(&self, d: usize) -> f64 {
        match self.form {
            KdeForm::Verbatim => d as f64 * self.bandwidth.ln(),
            KdeForm::Textbook => self.bandwidth.ln(),
        }
    }

    /// Terms are `−‖x − g‖² · coef` with `coef = 1/(2w²)`.
    fn exponent_coef(&self, d: usize) -> f64 {
        0.5 * (-2.0 * self.ln_width(d)).exp()
    }

    /// `−ln n − d ln h − (d/2) ln 2π`.
    fn log_norm(&self, n: usize, d: usize) -> f64 {
        -(n as f64).ln() - d as f64 * self.bandwidth.ln() - 0.5 * d as f64 * (2.0 * PI).ln()
    }
}

/// Standard multivariate normal density at a point with squared norm
/// `sq_norm` in `d` dimensions.
pub fn gaussian_kernel(sq_norm: f64, d: usize) -> f64 {
    (2.0 * PI).powf(-0.5 * d as f64) * (-0.5 * sq_norm).exp()
}

#[inline]
fn kernel_exponent(sq: f64, coef: f64) -> f64 {
    if sq == 0.0 {
        0.0
    } else {
        -sq * coef
    }
}

/// Streaming log-sum-exp accumulator; order-sensitive only in round-off.
#[derive(Debug, Clone, Copy)]
struct LogSumExp {
    max: f64,
    sum: f64,
}

impl Default for LogSumExp {
    fn default() -> Self {
        Self {
            max: f64::NEG_INFINITY,
            sum: 0.0,
        }
    }
}

impl LogSumExp {
    #[inline]
    fn push(&mut self, t: f64) {
        if t == f64::NEG_INFINITY {
            return;
        }
        if t > self.max {
            self.sum = self.sum * (self.max - t).exp() + 1.0;
            self.max = t;
        } else {
            self.sum += (t - self.max).exp();
        }
    }

    fn value(&self) -> f64 {
        if self.sum == 0.0 {
            f64::NEG_INFINITY
        } else {
            self.max + self.sum.ln()
        }
    }
}

/// Natural log of the KDE estimate at `x`.
pub fn kde_log_score(x: ArrayView1<'_, f64>, samples: ArrayView2<'_, f64>, config: &KdeConfig) -> f64 {
    let d = x.len();
    let n = samples.nrows();
    let coef = config.exponent_coef(d);
    let x = x.to_vec();
    let mut acc = LogSumExp::default();
    for g in samples.rows() {
        acc.push(kernel_exponent(squared_distance(&x, &g.to_vec()), coef));
    }
    config.log_norm(n, d) + acc.value()
}

/// KDE estimate at `x`.
pub fn kde_score(x: ArrayView1<'_, f64>, samples: ArrayView2<'_, f64>, config: &KdeConfig) -> f64 {
    kde_log_score(x, samples, config).exp()
}

/// Scott's rule: `σ̄ · n^(−1/(d+4))`, with `σ̄` the mean per-coordinate
/// sample standard deviation.
pub fn scott_bandwidth(samples: &dyn SampleSource, opts: &ComputeOptions) -> Result<f64> {
    let d = samples.dim();
    let n = samples.len();
    if n < 2 || d == 0 {
        return Err(Error::EmptyInput("Scott's rule needs at least two samples"));
    }
    // Welford per coordinate.
    let mut mean = vec![0.0; d];
    let mut m2 = vec![0.0; d];
    let mut count = 0.0;
    samples.for_each_chunk(opts.chunk_rows(d), &mut |chunk| {
        for row in chunk.rows() {
            count += 1.0;
            for (j, &v) in row.iter().enumerate() {
                let delta = v - mean[j];
                mean[j] += delta / count;
                m2[j] += delta * (v - mean[j]);
            }
        }
        Ok(())
    })?;
    let sigma = m2.iter().map(|m| (m / (count - 1.0)).sqrt()).sum::<f64>() / d as f64;
    let h = sigma * (n as f64).powf(-1.0 / (d as f64 + 4.0));
    if !(h > 0.0) {
        return Err(Error::Data(
            "samples have zero spread; bandwidth undefined".into(),
        ));
    }
    Ok(h)
}

#[derive(Debug, Clone)]
pub struct KdeAttackOutput {
    /// Log-density scores (a monotone transform of the estimate).
    pub scores: ScoreVector,
    pub config: KdeConfig,
}

/// Scores every record by its log KDE value. A `None` bandwidth falls back
/// to Scott's rule on the transformed samples.
pub fn run_kde_attack(
    records: &[&RecordSet],
    samples: &dyn SampleSource,
    distance: &DistanceSpec,
    bandwidth: Option<f64>,
    form: KdeForm,
    opts: &ComputeOptions,
) -> Result<KdeAttackOutput> {
    let union = RecordSet::concat(records)?;
    if samples.dim() != union.dim() {
        return Err(Error::Dim {
            expected: union.dim(),
            got: samples.dim(),
        });
    }
    let transformed = Transformed {
        inner: samples,
        spec: distance,
    };
    let source: &dyn SampleSource = match distance.kind {
        DistanceKind::RawEuclid => samples,
        _ => &transformed,
    };
    if source.is_empty() {
        return Err(Error::EmptyInput("no samples"));
    }
    let bandwidth = match bandwidth {
        Some(h) => h,
        None => scott_bandwidth(source, opts)?,
    };
    let config = KdeConfig { bandwidth, form };
    config.validate()?;

    let recs = distance.transform(union.data().view())?;
    let d = recs.ncols();
    let coef = config.exponent_coef(d);
    let mut acc = vec![LogSumExp::default(); recs.nrows()];
    stream_pairs(recs.view(), source, opts, &mut acc, |a, sq| {
        a.push(kernel_exponent(sq, coef))
    })?;
    let norm = config.log_norm(source.len(), d);
    let values: Vec<f64> = acc.iter().map(|a| norm + a.value()).collect();
    if let Some(i) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::Data(format!(
            "KDE underflows for record `{}` at bandwidth {bandwidth}; choose a larger bandwidth",
            union.ids()[i]
        )));
    }
    let name = match form {
        KdeForm::Verbatim => "kde",
        KdeForm::Textbook => "kde-textbook",
    };
    let digest = format!(
        "attack={name};distance={};bandwidth={};scale=log;n_samples={}",
        distance.label(),
        fmt_f64(bandwidth),
        source.len()
    );
    let scores = ScoreVector::new(union.ids().iter().cloned().zip(values).collect(), name, digest)?;
    Ok(KdeAttackOutput { scores, config })
}
