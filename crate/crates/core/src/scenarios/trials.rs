use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::stats::{mean, sample_std, sem};
use super::{set_mi, single_mi, Membership, SetLabel};
use crate::{Error, Result, ScoreVector, TrialReport};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ScenarioConfig {
    /// Records per side: `M` members and `M` non-members.
    pub m: usize,
    pub trials: usize,
    pub seed: u64,
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        if self.m == 0 {
            return Err(Error::Config("M must be ≥ 1".into()));
        }
        if self.trials == 0 {
            return Err(Error::Config("at least one trial".into()));
        }
        Ok(())
    }
}

/// Supplies the audited records of one trial along with their ground truth.
pub trait TrialProvider: Sync {
    type Data: Send;

    fn draw(&self, trial: usize, m: usize, rng: &mut ChaCha8Rng) -> Result<(Self::Data, Membership)>;
}

/// Scores the records of one trial.
pub trait AttackRunner<D>: Sync {
    fn score(&self, data: &D, rng: &mut ChaCha8Rng) -> Result<ScoreVector>;
}

impl<D, F> AttackRunner<D> for F
where
    F: Fn(&D, &mut ChaCha8Rng) -> Result<ScoreVector> + Sync,
{
    fn score(&self, data: &D, rng: &mut ChaCha8Rng) -> Result<ScoreVector> {
        self(data, rng)
    }
}

fn splitmix64(z: u64) -> u64 {
    let mut z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of trial `t` under a run seed; independent of thread scheduling.
pub fn trial_seed(seed: u64, t: usize) -> u64 {
    splitmix64(seed ^ splitmix64(t as u64))
}

/// Draws `m` train and `m` test ids without replacement.
pub fn subsample_balanced(pool: &Membership, m: usize, rng: &mut impl Rng) -> Result<Membership> {
    if pool.train.len() < m || pool.test.len() < m {
        return Err(Error::Imbalance(format!(
            "{} train and {} test records available, M = {m} of each needed",
            pool.train.len(),
            pool.test.len()
        )));
    }
    let pick = |ids: &[String], rng: &mut _| -> Vec<String> {
        sample(rng, ids.len(), m)
            .into_iter()
            .map(|i| ids[i].clone())
            .collect()
    };
    let train = pick(&pool.train, rng);
    let test = pick(&pool.test, rng);
    Ok(Membership { train, test })
}

/// Scores computed once over a pool of labelled records; each trial
/// resamples `M` members and `M` non-members from the pool.
#[derive(Debug, Clone)]
pub struct FixedScores {
    pub scores: ScoreVector,
    pub pool: Membership,
}

impl FixedScores {
    pub fn new(scores: ScoreVector, pool: Membership) -> Result<Self> {
        scores.check_coverage(pool.all_ids())?;
        Ok(Self { scores, pool })
    }

    /// Runner that returns the drawn scores unchanged.
    pub fn passthrough(data: &ScoreVector, _: &mut ChaCha8Rng) -> Result<ScoreVector> {
        Ok(data.clone())
    }
}

impl TrialProvider for FixedScores {
    type Data = ScoreVector;

    fn draw(&self, _: usize, m: usize, rng: &mut ChaCha8Rng) -> Result<(ScoreVector, Membership)> {
        let membership = subsample_balanced(&self.pool, m, rng)?;
        let ids: Vec<&str> = membership.all_ids().collect();
        Ok((self.scores.restrict(&ids)?, membership))
    }
}

/// Descriptive fields copied into the report.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ReportMeta {
    pub attack: String,
    pub distance: Option<String>,
    pub heuristic: Option<String>,
    pub resolved_epsilon: Option<f64>,
    pub n_samples: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateReport {
    pub attack: String,
    pub distance: Option<String>,
    pub heuristic: Option<String>,
    pub resolved_epsilon: Option<f64>,
    pub n_samples: Option<usize>,
    #[serde(rename = "M")]
    pub m: usize,
    pub trials: usize,
    pub seed: u64,
    pub single_mean: f64,
    pub single_std: f64,
    pub single_sem: f64,
    pub set_mean: f64,
    pub set_std: f64,
    pub set_sem: f64,
    pub per_trial: Vec<TrialReport>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub merged_seeds: Vec<u64>,
}

impl AggregateReport {
    pub fn from_trials(meta: ReportMeta, m: usize, seed: u64, per_trial: Vec<TrialReport>) -> Self {
        let single: Vec<f64> = per_trial.iter().map(|t| t.single_accuracy).collect();
        let set: Vec<f64> = per_trial.iter().map(|t| t.set_correct as u8 as f64).collect();
        Self {
            attack: meta.attack,
            distance: meta.distance,
            heuristic: meta.heuristic,
            resolved_epsilon: meta.resolved_epsilon,
            n_samples: meta.n_samples,
            m,
            trials: per_trial.len(),
            seed,
            single_mean: mean(&single),
            single_std: sample_std(&single),
            single_sem: sem(&single),
            set_mean: mean(&set),
            set_std: sample_std(&set),
            set_sem: sem(&set),
            per_trial,
            merged_seeds: Vec::new(),
        }
    }

    pub fn single_accuracies(&self) -> Vec<f64> {
        self.per_trial.iter().map(|t| t.single_accuracy).collect()
    }

    pub fn set_outcomes(&self) -> Vec<f64> {
        self.per_trial
            .iter()
            .map(|t| t.set_correct as u8 as f64)
            .collect()
    }

    fn meta(&self) -> ReportMeta {
        ReportMeta {
            attack: self.attack.clone(),
            distance: self.distance.clone(),
            heuristic: self.heuristic.clone(),
            resolved_epsilon: self.resolved_epsilon,
            n_samples: self.n_samples,
        }
    }

    /// Pools the trials of reports that share attack, distance, heuristic
    /// and `M`, e.g. runs split across machines with different seeds.
    pub fn merge(reports: &[AggregateReport]) -> Result<AggregateReport> {
        let first = reports.first().ok_or(Error::EmptyInput("no reports to merge"))?;
        for r in &reports[1..] {
            if (&r.attack, &r.distance, &r.heuristic, r.m)
                != (&first.attack, &first.distance, &first.heuristic, first.m)
            {
                return Err(Error::Config(format!(
                    "cannot merge `{}` (M = {}) with `{}` (M = {})",
                    r.attack, r.m, first.attack, first.m
                )));
            }
        }
        let mut meta = first.meta();
        if reports
            .iter()
            .any(|r| r.resolved_epsilon != first.resolved_epsilon)
        {
            meta.resolved_epsilon = None;
        }
        if reports.iter().any(|r| r.n_samples != first.n_samples) {
            meta.n_samples = None;
        }
        let per_trial = reports.iter().flat_map(|r| r.per_trial.iter().cloned()).collect();
        let mut merged = AggregateReport::from_trials(meta, first.m, first.seed, per_trial);
        merged.merged_seeds = reports
            .iter()
            .flat_map(|r| {
                if r.merged_seeds.is_empty() {
                    vec![r.seed]
                } else {
                    r.merged_seeds.clone()
                }
            })
            .collect();
        Ok(merged)
    }
}

fn run_one<P, A>(provider: &P, runner: &A, m: usize, seed: u64, t: usize) -> Result<TrialReport>
where
    P: TrialProvider,
    A: AttackRunner<P::Data>,
{
    let trial_seed = trial_seed(seed, t);
    let mut rng = ChaCha8Rng::seed_from_u64(trial_seed);
    let (data, membership) = provider.draw(t, m, &mut rng)?;
    let scores = runner.score(&data, &mut rng)?;
    scores.check_coverage(membership.all_ids())?;
    let single = single_mi(&scores, &membership.train, m, &mut rng)?;
    let (set_a, set_b, truth) = if rng.random_bool(0.5) {
        (&membership.train, &membership.test, SetLabel::A)
    } else {
        (&membership.test, &membership.train, SetLabel::B)
    };
    let set = set_mi(&scores, set_a, set_b, truth, m, &mut rng)?;
    Ok(TrialReport {
        trial_seed,
        single_accuracy: single.accuracy,
        set_correct: set.correct,
        chosen_ids: single.chosen_ids,
    })
}

/// Repeats the single and set scenarios `trials` times. Each trial draws
/// from its own RNG seeded by [`trial_seed`], so results do not depend on
/// the thread count.
pub fn run_trials<P, A>(
    provider: &P,
    runner: &A,
    config: &ScenarioConfig,
    meta: ReportMeta,
) -> Result<AggregateReport>
where
    P: TrialProvider,
    A: AttackRunner<P::Data>,
{
    config.validate()?;
    let per_trial = (0..config.trials)
        .into_par_iter()
        .map(|t| run_one(provider, runner, config.m, config.seed, t))
        .collect::<Result<Vec<_>>>()?;
    Ok(AggregateReport::from_trials(
        meta,
        config.m,
        config.seed,
        per_trial,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pool(n: usize) -> FixedScores {
        let train: Vec<String> = (0..n).map(|i| format!("tr{i}")).collect();
        let test: Vec<String> = (0..n).map(|i| format!("te{i}")).collect();
        let entries = train
            .iter()
            .map(|id| (id.clone(), 1.0))
            .chain(test.iter().map(|id| (id.clone(), 0.0)))
            .collect();
        let scores = ScoreVector::new(entries, "oracle", "").unwrap();
        FixedScores::new(scores, Membership { train, test }).unwrap()
    }

    #[test]
    fn perfect_scores_give_perfect_accuracy() {
        let cfg = ScenarioConfig {
            m: 5,
            trials: 20,
            seed: 9,
        };
        let r = run_trials(&pool(12), &FixedScores::passthrough, &cfg, ReportMeta::default()).unwrap();
        assert_eq!(r.trials, 20);
        assert_eq!((r.single_mean, r.set_mean), (1.0, 1.0));
        assert_eq!((r.single_std, r.set_sem), (0.0, 0.0));
    }

    #[test]
    fn deterministic_across_thread_counts() {
        let cfg = ScenarioConfig {
            m: 4,
            trials: 16,
            seed: 3,
        };
        let p = pool(10);
        let noisy = |s: &ScoreVector, rng: &mut ChaCha8Rng| {
            let entries = s.ids().map(|id| (id.to_string(), rng.random::<f64>())).collect();
            ScoreVector::new(entries, "noise", "")
        };
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| run_trials(&p, &noisy, &cfg, ReportMeta::default()).unwrap())
        };
        assert_eq!(run(1), run(3));
    }

    #[test]
    fn pool_too_small() {
        let cfg = ScenarioConfig {
            m: 5,
            trials: 1,
            seed: 0,
        };
        let err = run_trials(&pool(3), &FixedScores::passthrough, &cfg, ReportMeta::default()).unwrap_err();
        assert!(matches!(err, Error::Imbalance(_)));
    }

    #[test]
    fn merge_pools_trials() {
        let p = pool(8);
        let a = run_trials(
            &p,
            &FixedScores::passthrough,
            &ScenarioConfig {
                m: 3,
                trials: 4,
                seed: 1,
            },
            ReportMeta::default(),
        )
        .unwrap();
        let b = run_trials(
            &p,
            &FixedScores::passthrough,
            &ScenarioConfig {
                m: 3,
                trials: 6,
                seed: 2,
            },
            ReportMeta::default(),
        )
        .unwrap();
        let merged = AggregateReport::merge(&[a, b]).unwrap();
        assert_eq!(merged.trials, 10);
        assert_eq!(merged.merged_seeds, vec![1, 2]);
        let other = run_trials(
            &p,
            &FixedScores::passthrough,
            &ScenarioConfig {
                m: 2,
                trials: 1,
                seed: 2,
            },
            ReportMeta::default(),
        )
        .unwrap();
        assert!(AggregateReport::merge(&[merged, other]).is_err());
    }
}
