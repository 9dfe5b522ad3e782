//! Decision procedures on top of a score vector.
//!
//! In the **single** scenario an adversary sees `2M` records, `M` of them
//! from the training data, and labels the `M` highest-scoring ones as
//! members; accuracy is the fraction of true members among them. In the
//! **set** scenario a regulator sees two disjoint `M`-record sets, takes the
//! top `M` records over both and picks the set contributing the majority,
//! flipping a fair coin on a tie.
//!
//! Score ties are broken by a seeded shuffle before a stable sort, so every
//! decision is reproducible from the RNG state.

pub mod stats;
mod trials;

use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result, ScoreVector};

pub use trials::{
    run_trials, subsample_balanced, trial_seed, AggregateReport, AttackRunner, FixedScores, ReportMeta,
    ScenarioConfig, TrialProvider,
};

/// Ground-truth partition of audited records.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Membership {
    pub train: Vec<String>,
    pub test: Vec<String>,
}

impl Membership {
    pub fn all_ids(&self) -> impl Iterator<Item = &str> {
        self.train.iter().chain(&self.test).map(String::as_str)
    }
}

/// One of the two candidate sets shown to the regulator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SetLabel {
    A,
    B,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SingleMiOutcome {
    pub chosen_ids: Vec<String>,
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SetMiOutcome {
    pub choice: SetLabel,
    pub correct: bool,
    pub votes_a: usize,
    pub votes_b: usize,
    /// The vote was split evenly and the choice came from a coin flip.
    pub tied: bool,
}

/// Indices of the `m` highest scores. Ties are ordered by a shuffle drawn
/// from `rng` followed by a stable sort.
pub fn top_m_indices(scores: &[f64], m: usize, rng: &mut impl Rng) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.shuffle(rng);
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    order.truncate(m);
    order
}

/// Adversary's top-`M` guess and its accuracy.
pub fn single_mi(
    scores: &ScoreVector,
    true_train_ids: &[String],
    m: usize,
    rng: &mut impl Rng,
) -> Result<SingleMiOutcome> {
    if m == 0 {
        return Err(Error::Config("M must be ≥ 1".into()));
    }
    if scores.len() != 2 * m {
        return Err(Error::Imbalance(format!(
            "{} records scored, expected 2M = {}",
            scores.len(),
            2 * m
        )));
    }
    let train: HashSet<&str> = true_train_ids.iter().map(String::as_str).collect();
    let members = scores.ids().filter(|id| train.contains(id)).count();
    if members != m {
        return Err(Error::Imbalance(format!(
            "{members} of the scored records are training members, expected M = {m}"
        )));
    }
    let values: Vec<f64> = scores.entries().iter().map(|(_, s)| *s).collect();
    let top = top_m_indices(&values, m, rng);
    let chosen_ids: Vec<String> = top.iter().map(|&i| scores.entries()[i].0.clone()).collect();
    let hits = chosen_ids.iter().filter(|id| train.contains(id.as_str())).count();
    Ok(SingleMiOutcome {
        chosen_ids,
        accuracy: hits as f64 / m as f64,
    })
}

fn check_sets(scores: &ScoreVector, set_a: &[String], set_b: &[String], m: usize) -> Result<()> {
    if m == 0 {
        return Err(Error::Config("M must be ≥ 1".into()));
    }
    if set_a.len() != m || set_b.len() != m {
        return Err(Error::Imbalance(format!(
            "set sizes {} and {}, expected M = {m} each",
            set_a.len(),
            set_b.len()
        )));
    }
    let a: HashSet<&str> = set_a.iter().map(String::as_str).collect();
    if let Some(shared) = set_b.iter().find(|id| a.contains(id.as_str())) {
        return Err(Error::Data(format!("record `{shared}` appears in both sets")));
    }
    scores.check_coverage(set_a.iter().chain(set_b).map(String::as_str))
}

/// Majority vote among the top `M`; `None` on an even split.
pub fn majority_decision(
    scores: &ScoreVector,
    set_a: &[String],
    set_b: &[String],
    rng: &mut impl Rng,
) -> Result<(Option<SetLabel>, usize, usize)> {
    let m = set_a.len();
    check_sets(scores, set_a, set_b, m)?;
    let a: HashSet<&str> = set_a.iter().map(String::as_str).collect();
    let values: Vec<f64> = scores.entries().iter().map(|(_, s)| *s).collect();
    let top = top_m_indices(&values, m, rng);
    let votes_a = top
        .iter()
        .filter(|&&i| a.contains(scores.entries()[i].0.as_str()))
        .count();
    let votes_b = m - votes_a;
    let decision = match votes_a.cmp(&votes_b) {
        std::cmp::Ordering::Greater => Some(SetLabel::A),
        std::cmp::Ordering::Less => Some(SetLabel::B),
        std::cmp::Ordering::Equal => None,
    };
    Ok((decision, votes_a, votes_b))
}

/// Regulator's choice between `set_a` and `set_b`.
pub fn set_mi(
    scores: &ScoreVector,
    set_a: &[String],
    set_b: &[String],
    true_train_set: SetLabel,
    m: usize,
    rng: &mut impl Rng,
) -> Result<SetMiOutcome> {
    check_sets(scores, set_a, set_b, m)?;
    let (decision, votes_a, votes_b) = majority_decision(scores, set_a, set_b, rng)?;
    let choice = decision.unwrap_or_else(|| coin(rng));
    Ok(SetMiOutcome {
        choice,
        correct: choice == true_train_set,
        votes_a,
        votes_b,
        tied: decision.is_none(),
    })
}

fn coin(rng: &mut impl Rng) -> SetLabel {
    if rng.random_bool(0.5) {
        SetLabel::A
    } else {
        SetLabel::B
    }
}

/// Lower and upper median of a set's scores (equal for odd sizes).
fn median_interval(values: &mut [f64]) -> (f64, f64) {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    (values[(n - 1) / 2], values[n / 2])
}

/// Median comparison; `None` when neither set's median interval lies
/// strictly above the other's.
///
/// For an even set size the median is the interval between the two central
/// order statistics. Comparing intervals makes this agree with the majority
/// vote on every input with distinct scores, including even splits.
pub fn median_decision(scores: &ScoreVector, set_a: &[String], set_b: &[String]) -> Result<Option<SetLabel>> {
    check_sets(scores, set_a, set_b, set_a.len())?;
    let map = scores.to_map();
    let mut a: Vec<f64> = set_a.iter().map(|id| map[id.as_str()]).collect();
    let mut b: Vec<f64> = set_b.iter().map(|id| map[id.as_str()]).collect();
    let (a_lo, a_hi) = median_interval(&mut a);
    let (b_lo, b_hi) = median_interval(&mut b);
    Ok(if a_lo > b_hi {
        Some(SetLabel::A)
    } else if b_lo > a_hi {
        Some(SetLabel::B)
    } else {
        None
    })
}

/// Picks the set with the higher median score; ties go to a coin flip.
pub fn set_mi_median_rule(
    scores: &ScoreVector,
    set_a: &[String],
    set_b: &[String],
    rng: &mut impl Rng,
) -> Result<SetLabel> {
    Ok(median_decision(scores, set_a, set_b)?.unwrap_or_else(|| coin(rng)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn sv(pairs: &[(&str, f64)]) -> ScoreVector {
        ScoreVector::new(pairs.iter().map(|(i, s)| (i.to_string(), *s)).collect(), "t", "").unwrap()
    }

    fn ids(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn separated_scores() {
        let s = sv(&[
            ("a", 0.9),
            ("b", 0.8),
            ("c", 0.7),
            ("d", 0.1),
            ("e", 0.2),
            ("f", 0.3),
        ]);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let out = single_mi(&s, &ids(&["a", "b", "c"]), 3, &mut rng).unwrap();
        let mut chosen = out.chosen_ids.clone();
        chosen.sort();
        assert_eq!(chosen, ids(&["a", "b", "c"]));
        assert_eq!(out.accuracy, 1.0);
        let set = set_mi(
            &s,
            &ids(&["a", "b", "c"]),
            &ids(&["d", "e", "f"]),
            SetLabel::A,
            3,
            &mut rng,
        )
        .unwrap();
        assert_eq!(set.choice, SetLabel::A);
        assert!(set.correct && !set.tied);
    }

    #[test]
    fn mixed_top_three() {
        let s = sv(&[
            ("a", 0.9),
            ("c", 0.8),
            ("b", 0.2),
            ("d", 0.85),
            ("e", 0.1),
            ("f", 0.05),
        ]);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let out = single_mi(&s, &ids(&["a", "b", "c"]), 3, &mut rng).unwrap();
        assert_eq!(out.chosen_ids, ids(&["a", "d", "c"]));
        assert!((out.accuracy - 2.0 / 3.0).abs() < 1e-15);
        let set = set_mi(
            &s,
            &ids(&["a", "b", "c"]),
            &ids(&["d", "e", "f"]),
            SetLabel::A,
            3,
            &mut rng,
        )
        .unwrap();
        assert_eq!((set.choice, set.votes_a, set.votes_b), (SetLabel::A, 2, 1));
        assert!(set.correct);
        let median =
            set_mi_median_rule(&s, &ids(&["a", "b", "c"]), &ids(&["d", "e", "f"]), &mut rng).unwrap();
        assert_eq!(median, SetLabel::A);
    }

    #[test]
    fn imbalance_detected() {
        let s = sv(&[("a", 0.9), ("b", 0.8), ("c", 0.7), ("d", 0.1)]);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        assert!(matches!(
            single_mi(&s, &ids(&["a"]), 2, &mut rng),
            Err(Error::Imbalance(_))
        ));
        assert!(matches!(
            single_mi(&s, &ids(&["a", "b"]), 3, &mut rng),
            Err(Error::Imbalance(_))
        ));
        assert!(matches!(
            set_mi(&s, &ids(&["a", "b", "c"]), &ids(&["d"]), SetLabel::A, 2, &mut rng),
            Err(Error::Imbalance(_))
        ));
    }

    #[test]
    fn dominating_set_chosen_deterministically() {
        let s = sv(&[("a", 5.0), ("b", 4.0), ("c", 1.0), ("d", 0.0)]);
        for seed in 0..50 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let out = set_mi(&s, &ids(&["a", "b"]), &ids(&["c", "d"]), SetLabel::B, 2, &mut rng).unwrap();
            assert_eq!(out.choice, SetLabel::A);
            assert!(!out.correct);
        }
    }

    #[test]
    fn split_vote_is_a_fair_coin() {
        let s = sv(&[("a", 4.0), ("b", 1.0), ("c", 3.0), ("d", 2.0)]);
        let trials = 4000;
        let mut correct = 0;
        for seed in 0..trials {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let out = set_mi(&s, &ids(&["a", "b"]), &ids(&["c", "d"]), SetLabel::A, 2, &mut rng).unwrap();
            assert!(out.tied);
            correct += out.correct as u32;
        }
        let rate = correct as f64 / trials as f64;
        // 4σ for Binomial(4000, 1/2).
        assert!((rate - 0.5).abs() < 4.0 * (0.25f64 / trials as f64).sqrt());
    }

    #[test]
    fn median_rule_edge_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let one = sv(&[("a", 0.2), ("b", 0.7)]);
        assert_eq!(
            set_mi_median_rule(&one, &ids(&["a"]), &ids(&["b"]), &mut rng).unwrap(),
            SetLabel::B
        );
        let equal = sv(&[("a", 1.0), ("b", 3.0), ("c", 1.0), ("d", 3.0)]);
        assert_eq!(
            median_decision(&equal, &ids(&["a", "b"]), &ids(&["c", "d"])).unwrap(),
            None
        );
        // Even split in the majority vote and overlapping median intervals.
        let split = sv(&[("a", 4.0), ("b", 0.0), ("c", 3.0), ("d", 2.0)]);
        assert_eq!(
            median_decision(&split, &ids(&["a", "b"]), &ids(&["c", "d"])).unwrap(),
            None
        );
        let (vote, _, _) = majority_decision(&split, &ids(&["a", "b"]), &ids(&["c", "d"]), &mut rng).unwrap();
        assert_eq!(vote, None);
    }

    #[test]
    fn ties_broken_by_seed() {
        let s = sv(&[("a", 1.0), ("b", 1.0), ("c", 1.0), ("d", 1.0)]);
        let train = ids(&["a", "b"]);
        let first = single_mi(&s, &train, 2, &mut ChaCha8Rng::seed_from_u64(7)).unwrap();
        let again = single_mi(&s, &train, 2, &mut ChaCha8Rng::seed_from_u64(7)).unwrap();
        assert_eq!(first, again);
        let mut seen = HashSet::new();
        for seed in 0..64 {
            let out = single_mi(&s, &train, 2, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
            let mut c = out.chosen_ids;
            c.sort();
            seen.insert(c);
        }
        assert_eq!(seen.len(), 6);
    }
}
