//! Audit data model: candidate records, generator samples, reconstructions
//! and per-record scores.

use std::collections::{HashMap, HashSet};

use ndarray::{Array2, ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Row-major real matrix in working precision.
pub type Matrix = Array2<f64>;

/// Which side of the audit a record set claims to come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Origin {
    ClaimedTrain,
    ClaimedTest,
    Unlabeled,
}

pub(crate) fn ensure_finite(data: ArrayView2<'_, f64>, what: &str) -> Result<()> {
    if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
        let cols = data.ncols().max(1);
        return Err(Error::Data(format!(
            "non-finite value in {what} at row {}, column {}",
            pos / cols,
            pos % cols
        )));
    }
    Ok(())
}

fn ensure_unique<'a>(ids: impl IntoIterator<Item = &'a str>) -> Result<()> {
    let mut seen = HashSet::new();
    for id in ids {
        if !seen.insert(id) {
            return Err(Error::DuplicateId(id.to_string()));
        }
    }
    Ok(())
}

/// Labelled matrix of candidate records. Rows are records.
#[derive(Debug, Clone, PartialEq)]
pub struct RecordSet {
    ids: Vec<String>,
    data: Matrix,
    origin: Origin,
}

impl RecordSet {
    pub fn new(ids: Vec<String>, data: Matrix, origin: Origin) -> Result<Self> {
        if ids.len() != data.nrows() {
            return Err(Error::Dim {
                expected: data.nrows(),
                got: ids.len(),
            });
        }
        ensure_unique(ids.iter().map(String::as_str))?;
        ensure_finite(data.view(), "record set")?;
        Ok(Self { ids, data, origin })
    }

    /// Builds a record set whose ids are `{prefix}{row}`.
    pub fn with_prefix(prefix: &str, data: Matrix, origin: Origin) -> Result<Self> {
        let ids = (0..data.nrows()).map(|i| format!("{prefix}{i}")).collect();
        Self::new(ids, data, origin)
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn data(&self) -> &Matrix {
        &self.data
    }

    pub fn origin(&self) -> Origin {
        self.origin
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.data.ncols()
    }

    pub fn row(&self, i: usize) -> ArrayView1<'_, f64> {
        self.data.row(i)
    }

    /// Subset of rows, in the order given.
    pub fn select(&self, rows: &[usize]) -> RecordSet {
        RecordSet {
            ids: rows.iter().map(|&r| self.ids[r].clone()).collect(),
            data: self.data.select(ndarray::Axis(0), rows),
            origin: self.origin,
        }
    }

    /// Stacks several record sets into one, keeping ids and row order.
    /// Fails if ids collide or column counts differ.
    pub fn concat(sets: &[&RecordSet]) -> Result<RecordSet> {
        let first = sets.first().ok_or(Error::EmptyInput("no record sets"))?;
        let dim = first.dim();
        let mut ids = Vec::new();
        let mut views = Vec::new();
        for set in sets {
            if set.dim() != dim {
                return Err(Error::Dim {
                    expected: dim,
                    got: set.dim(),
                });
            }
            ids.extend(set.ids.iter().cloned());
            views.push(set.data.view());
        }
        let data = ndarray::concatenate(ndarray::Axis(0), &views).map_err(|e| Error::Data(e.to_string()))?;
        let origin = if sets.iter().all(|s| s.origin == first.origin) {
            first.origin
        } else {
            Origin::Unlabeled
        };
        RecordSet::new(ids, data, origin)
    }
}

/// Samples `g_1 … g_n` drawn from a generative model.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleMatrix {
    data: Matrix,
    source_note: String,
}

impl SampleMatrix {
    pub fn new(data: Matrix, source_note: impl Into<String>) -> Result<Self> {
        ensure_finite(data.view(), "sample matrix")?;
        Ok(Self {
            data,
            source_note: source_note.into(),
        })
    }

    pub fn data(&self) -> &Matrix {
        &self.data
    }

    pub fn into_data(self) -> Matrix {
        self.data
    }

    pub fn source_note(&self) -> &str {
        &self.source_note
    }

    pub fn len(&self) -> usize {
        self.data.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.data.nrows() == 0
    }

    pub fn dim(&self) -> usize {
        self.data.ncols()
    }
}

/// `n` stochastic reconstructions of a single record.
#[derive(Debug, Clone, PartialEq)]
pub struct ReconstructionBatch {
    record_id: String,
    reconstructions: Matrix,
}

impl ReconstructionBatch {
    pub fn new(record_id: impl Into<String>, reconstructions: Matrix) -> Result<Self> {
        if reconstructions.nrows() == 0 {
            return Err(Error::EmptyInput("reconstruction batch has no rows"));
        }
        ensure_finite(reconstructions.view(), "reconstruction batch")?;
        Ok(Self {
            record_id: record_id.into(),
            reconstructions,
        })
    }

    pub fn record_id(&self) -> &str {
        &self.record_id
    }

    pub fn reconstructions(&self) -> &Matrix {
        &self.reconstructions
    }

    pub fn len(&self) -> usize {
        self.reconstructions.nrows()
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

/// Per-record scores produced by one attack run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreVector {
    entries: Vec<(String, f64)>,
    attack_name: String,
    config_digest: String,
}

impl ScoreVector {
    pub fn new(
        entries: Vec<(String, f64)>,
        attack_name: impl Into<String>,
        config_digest: impl Into<String>,
    ) -> Result<Self> {
        ensure_unique(entries.iter().map(|(id, _)| id.as_str()))?;
        if let Some((id, s)) = entries.iter().find(|(_, s)| !s.is_finite()) {
            return Err(Error::Data(format!("non-finite score {s} for `{id}`")));
        }
        Ok(Self {
            entries,
            attack_name: attack_name.into(),
            config_digest: config_digest.into(),
        })
    }

    pub fn entries(&self) -> &[(String, f64)] {
        &self.entries
    }

    pub fn attack_name(&self) -> &str {
        &self.attack_name
    }

    pub fn config_digest(&self) -> &str {
        &self.config_digest
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|(id, _)| id.as_str())
    }

    pub fn to_map(&self) -> HashMap<&str, f64> {
        self.entries.iter().map(|(id, s)| (id.as_str(), *s)).collect()
    }

    /// Restricts the vector to `ids`, in that order.
    pub fn restrict<S: AsRef<str>>(&self, ids: &[S]) -> Result<ScoreVector> {
        let map = self.to_map();
        let entries = ids
            .iter()
            .map(|id| {
                let id = id.as_ref();
                map.get(id)
                    .map(|&s| (id.to_string(), s))
                    .ok_or_else(|| Error::Data(format!("no score for record `{id}`")))
            })
            .collect::<Result<Vec<_>>>()?;
        ScoreVector::new(entries, self.attack_name.clone(), self.config_digest.clone())
    }

    /// Checks that the scored ids are exactly `expected` (as a set).
    pub fn check_coverage<'a>(&self, expected: impl IntoIterator<Item = &'a str>) -> Result<()> {
        let expected: HashSet<&str> = expected.into_iter().collect();
        let have: HashSet<&str> = self.ids().collect();
        if let Some(missing) = expected.iter().find(|id| !have.contains(*id)) {
            return Err(Error::Data(format!("no score for record `{missing}`")));
        }
        if let Some(extra) = have.iter().find(|id| !expected.contains(*id)) {
            return Err(Error::Data(format!(
                "score for record `{extra}` which is not under audit"
            )));
        }
        Ok(())
    }

    /// Applies `f` to every score, keeping ids and metadata.
    pub fn map_scores(&self, f: impl Fn(f64) -> f64) -> Result<ScoreVector> {
        ScoreVector::new(
            self.entries.iter().map(|(id, s)| (id.clone(), f(*s))).collect(),
            self.attack_name.clone(),
            self.config_digest.clone(),
        )
    }
}

/// Outcome of one repetition of the single and set scenarios.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialReport {
    pub trial_seed: u64,
    pub single_accuracy: f64,
    pub set_correct: bool,
    pub chosen_ids: Vec<String>,
}
