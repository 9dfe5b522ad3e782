//! Scoring functions `f(x)`: larger values point to training membership.
//!
//! * [`mc`]: Monte Carlo ε-neighbourhood estimators and the ε heuristics.
//! * [`kde`]: Gaussian kernel density baseline.
//! * [`reconstruction`]: negative mean reconstruction error.
//! * [`external_scores`]: scores computed elsewhere (e.g. a GAN
//!   discriminator) passed through unchanged.

pub mod kde;
pub mod mc;
pub mod reconstruction;

pub use kde::{kde_log_score, kde_score, run_kde_attack, scott_bandwidth, KdeConfig, KdeForm};
pub use mc::{
    epsilon_median, epsilon_percentile, mc_distance_score, mc_distance_score_with, mc_epsilon_score, median,
    percentile_rank, run_mc_attack, EpsilonHeuristic, McAttackOutput, McConfig, McVariant, DEFAULT_DELTA,
};
pub use reconstruction::{
    reconstruction_score, run_reconstruction_attack, PrecomputedReconstructions, ReconstructionOracle,
};

use crate::{RecordSet, Result, ScoreVector};

/// Name used for externally supplied scores.
pub const SCORE_FILE_ATTACK: &str = "score-file";

/// Accepts scores produced outside this crate, checking they cover exactly
/// the records under audit. Order follows `records`.
pub fn external_scores(scores: &ScoreVector, records: &[&RecordSet]) -> Result<ScoreVector> {
    let ids: Vec<&str> = records
        .iter()
        .flat_map(|r| r.ids().iter().map(String::as_str))
        .collect();
    scores.check_coverage(ids.iter().copied())?;
    let ordered = scores.restrict(&ids)?;
    ScoreVector::new(
        ordered.entries().to_vec(),
        SCORE_FILE_ATTACK,
        format!("attack={SCORE_FILE_ATTACK};{}", scores.config_digest()),
    )
}

fn fmt_f64(v: f64) -> String {
    format!("{v:?}")
}
