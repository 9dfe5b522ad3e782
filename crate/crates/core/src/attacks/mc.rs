//! Monte Carlo membership scores.
//!
//! With samples `g_1 … g_n` from the generator and a distance `d`:
//!
//! * `MC-ε(x) = (1/n) Σ 1[d(g_i, x) ≤ ε]`
//! * `MC-d(x) = −(1/n) Σ 1[d(g_i, x) ≤ ε] · ln(max(d(g_i, x), δ))`
//!
//! `MC-d` divides by all `n` samples, not by the in-ball count. Its terms
//! are positive only for distances below 1, so a record with in-ball
//! samples can score below a record with none when ε > 1.

use ndarray::{ArrayView1, ArrayView2};

use crate::distances::{
    distance_order_statistic, neighborhood_stats, pairwise_min_distances, squared_distance, BallTest,
    ComputeOptions, DistanceKind, DistanceSpec, NeighborhoodStats, SampleSource, Transformed, Truncated,
};
use crate::{Error, RecordSet, Result, ScoreVector};

use super::fmt_f64;

/// Default log clipping floor, in distance units.
pub const DEFAULT_DELTA: f64 = 1e-12;

/// How ε is chosen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EpsilonHeuristic {
    /// Median over records of the distance to the nearest sample.
    Median,
    /// Nearest-rank quantile `p ∈ (0, 1)` of all record-sample distances.
    Percentile(f64),
    /// A caller-chosen radius.
    Fixed(f64),
}

impl EpsilonHeuristic {
    /// Parses `median`, `percentile:<p>` or `fixed:<eps>`.
    pub fn parse(s: &str) -> Result<Self> {
        let bad = || Error::Config(format!("unknown heuristic `{s}`"));
        let h = match s.split_once(':') {
            None if s == "median" => EpsilonHeuristic::Median,
            Some(("percentile", p)) => EpsilonHeuristic::Percentile(p.parse().map_err(|_| bad())?),
            Some(("fixed", e)) => EpsilonHeuristic::Fixed(e.parse().map_err(|_| bad())?),
            _ => return Err(bad()),
        };
        h.validate()?;
        Ok(h)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            EpsilonHeuristic::Percentile(p) if !(p > 0.0 && p < 1.0) => {
                Err(Error::Config(format!("percentile must lie in (0, 1), got {p}")))
            }
            EpsilonHeuristic::Fixed(e) if !(e >= 0.0) => {
                Err(Error::Config(format!("epsilon must be ≥ 0, got {e}")))
            }
            _ => Ok(()),
        }
    }

    pub fn label(&self) -> String {
        match self {
            EpsilonHeuristic::Median => "median".into(),
            EpsilonHeuristic::Percentile(p) => format!("percentile:{p}"),
            EpsilonHeuristic::Fixed(e) => format!("fixed:{e}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum McVariant {
    McEpsilon,
    McDistance,
}

impl McVariant {
    pub fn name(self) -> &'static str {
        match self {
            McVariant::McEpsilon => "mc-eps",
            McVariant::McDistance => "mc-d",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct McConfig {
    pub distance: DistanceSpec,
    pub heuristic: EpsilonHeuristic,
    /// Use the first `n` samples; `None` uses all of them.
    pub n_samples: Option<usize>,
    pub delta: f64,
    pub variant: McVariant,
}

impl McConfig {
    pub fn new(distance: DistanceSpec, heuristic: EpsilonHeuristic, variant: McVariant) -> Self {
        Self {
            distance,
            heuristic,
            n_samples: None,
            delta: DEFAULT_DELTA,
            variant,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.heuristic.validate()?;
        self.distance.validate()?;
        if !(self.delta > 0.0) {
            return Err(Error::Config(format!("delta must be > 0, got {}", self.delta)));
        }
        if self.n_samples == Some(0) {
            return Err(Error::Config("n_samples must be ≥ 1".into()));
        }
        Ok(())
    }
}

/// Median; for an even count, the mean of the two central values.
pub fn median(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::EmptyInput("median of no values"));
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Ok(if n % 2 == 1 {
        v[n / 2]
    } else {
        let (a, b) = (v[n / 2 - 1], v[n / 2]);
        a + (b - a) / 2.0
    })
}

/// ε = median over records of the distance to the nearest sample.
/// Inputs must already be in the distance space.
pub fn epsilon_median(
    records: ArrayView2<'_, f64>,
    samples: &dyn SampleSource,
    opts: &ComputeOptions,
) -> Result<f64> {
    median(&pairwise_min_distances(records, samples, opts)?)
}

/// 1-based nearest rank `⌈p·total⌉`, clamped to `1..=total`. Products within
/// round-off of an integer count as that integer.
pub fn percentile_rank(p: f64, total: u64) -> u64 {
    let x = p * total as f64;
    let r = x.round();
    let rank = if (x - r).abs() <= 1e-9 * r.max(1.0) {
        r
    } else {
        x.ceil()
    };
    (rank as u64).clamp(1, total.max(1))
}

/// ε = nearest-rank `p`-quantile of all record-sample distances.
pub fn epsilon_percentile(
    records: ArrayView2<'_, f64>,
    samples: &dyn SampleSource,
    p: f64,
    opts: &ComputeOptions,
) -> Result<f64> {
    EpsilonHeuristic::Percentile(p).validate()?;
    if records.nrows() == 0 {
        return Err(Error::EmptyInput("no records"));
    }
    if samples.is_empty() {
        return Err(Error::EmptyInput("no samples"));
    }
    let total = records.nrows() as u64 * samples.len() as u64;
    distance_order_statistic(records, samples, percentile_rank(p, total), opts)
}

/// `MC-ε` for one record against in-memory samples.
pub fn mc_epsilon_score(x: ArrayView1<'_, f64>, samples: ArrayView2<'_, f64>, epsilon: f64) -> f64 {
    let x = x.to_vec();
    let ball = BallTest::new(epsilon);
    let n = samples.nrows();
    let hits = samples
        .rows()
        .into_iter()
        .filter(|g| ball.contains(squared_distance(&x, &g.to_vec())))
        .count();
    hits as f64 / n as f64
}

/// `MC-d` for one record with Euclidean distance.
pub fn mc_distance_score(
    x: ArrayView1<'_, f64>,
    samples: ArrayView2<'_, f64>,
    epsilon: f64,
    delta: f64,
) -> f64 {
    mc_distance_score_with(x, samples, epsilon, delta, |a, b| squared_distance(a, b).sqrt())
}

/// `MC-d` for one record under an arbitrary distance function.
pub fn mc_distance_score_with(
    x: ArrayView1<'_, f64>,
    samples: ArrayView2<'_, f64>,
    epsilon: f64,
    delta: f64,
    distance: impl Fn(&[f64], &[f64]) -> f64,
) -> f64 {
    let x = x.to_vec();
    let n = samples.nrows();
    let mut sum = 0.0;
    for g in samples.rows() {
        let d = distance(&x, &g.to_vec());
        if d <= epsilon {
            sum += d.max(delta).ln();
        }
    }
    -sum / n as f64
}

/// Scores from accumulated neighbourhood statistics.
pub fn scores_from_stats(stats: &[NeighborhoodStats], n: usize, variant: McVariant) -> Vec<f64> {
    let n = n as f64;
    stats
        .iter()
        .map(|s| match variant {
            McVariant::McEpsilon => s.count_within as f64 / n,
            McVariant::McDistance => -s.sum_log_dist / n,
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct McAttackOutput {
    pub scores: ScoreVector,
    pub epsilon: f64,
    pub n_samples: usize,
    pub stats: Vec<NeighborhoodStats>,
}

/// Full Monte Carlo attack: map records and samples into the distance
/// space, resolve ε, and score every record.
///
/// Samples are streamed from `samples` (possibly several times) and
/// transformed chunk by chunk.
pub fn run_mc_attack(
    records: &[&RecordSet],
    samples: &dyn SampleSource,
    config: &McConfig,
    opts: &ComputeOptions,
) -> Result<McAttackOutput> {
    config.validate()?;
    let union = RecordSet::concat(records)?;
    if samples.dim() != union.dim() {
        return Err(Error::Dim {
            expected: union.dim(),
            got: samples.dim(),
        });
    }
    let n = match config.n_samples {
        Some(n) if n > samples.len() => {
            return Err(Error::InsufficientData(format!(
                "{n} samples requested, {} available",
                samples.len()
            )))
        }
        Some(n) => n,
        None => samples.len(),
    };
    if n == 0 {
        return Err(Error::EmptyInput("no samples"));
    }
    let truncated = Truncated { inner: samples, n };
    let transformed = Transformed {
        inner: &truncated,
        spec: &config.distance,
    };
    let source: &dyn SampleSource = match config.distance.kind {
        DistanceKind::RawEuclid => &truncated,
        _ => &transformed,
    };
    let recs = config.distance.transform(union.data().view())?;

    let epsilon = match config.heuristic {
        EpsilonHeuristic::Median => epsilon_median(recs.view(), source, opts)?,
        EpsilonHeuristic::Percentile(p) => epsilon_percentile(recs.view(), source, p, opts)?,
        EpsilonHeuristic::Fixed(e) => e,
    };
    let stats = neighborhood_stats(recs.view(), source, epsilon, config.delta, opts)?;
    let values = scores_from_stats(&stats, n, config.variant);

    let digest = format!(
        "attack={};distance={};heuristic={};epsilon={};delta={};n_samples={}",
        config.variant.name(),
        config.distance.label(),
        config.heuristic.label(),
        fmt_f64(epsilon),
        fmt_f64(config.delta),
        n
    );
    let scores = ScoreVector::new(
        union.ids().iter().cloned().zip(values).collect(),
        config.variant.name(),
        digest,
    )?;
    Ok(McAttackOutput {
        scores,
        epsilon,
        n_samples: n,
        stats,
    })
}
