//! Reconstruction attack: `f_rec(x) = −(1/n) Σ ‖D(z_i) − x‖`.

use std::collections::HashMap;

use ndarray::{s, ArrayView1};
use rayon::prelude::*;

use crate::distances::squared_distance;
use crate::{Error, ReconstructionBatch, RecordSet, Result, ScoreVector};

/// Produces `n` stochastic reconstructions of a record.
pub trait ReconstructionOracle: Sync {
    fn reconstruct(&self, record_id: &str, x: ArrayView1<'_, f64>, n: usize) -> Result<ReconstructionBatch>;

    /// Whether `reconstruct` may be called from several threads at once
    /// with results independent of call order.
    fn reentrant(&self) -> bool {
        false
    }
}

/// Negative mean Euclidean reconstruction error; 0 iff every
/// reconstruction equals `x`.
pub fn reconstruction_score(
    record_id: &str,
    x: ArrayView1<'_, f64>,
    batch: &ReconstructionBatch,
) -> Result<f64> {
    if batch.record_id() != record_id {
        return Err(Error::IdMismatch {
            expected: record_id.to_string(),
            got: batch.record_id().to_string(),
        });
    }
    let recs = batch.reconstructions();
    if recs.ncols() != x.len() {
        return Err(Error::Dim {
            expected: x.len(),
            got: recs.ncols(),
        });
    }
    let x = x.to_vec();
    let n = recs.nrows();
    let total: f64 = recs
        .rows()
        .into_iter()
        .map(|r| squared_distance(&r.to_vec(), &x).sqrt())
        .sum();
    Ok(-total / n as f64)
}

/// Scores every record with `n` reconstructions from `oracle`.
pub fn run_reconstruction_attack(
    records: &[&RecordSet],
    oracle: &dyn ReconstructionOracle,
    n: usize,
) -> Result<ScoreVector> {
    if n == 0 {
        return Err(Error::Config("at least one reconstruction per record".into()));
    }
    let union = RecordSet::concat(records)?;
    let score_one = |i: usize| -> Result<f64> {
        let id = &union.ids()[i];
        let batch = oracle.reconstruct(id, union.row(i), n).map_err(|e| match e {
            e @ (Error::Oracle { .. } | Error::IdMismatch { .. }) => e,
            other => Error::Oracle {
                record_id: id.clone(),
                message: other.to_string(),
            },
        })?;
        if batch.len() != n {
            return Err(Error::Oracle {
                record_id: id.clone(),
                message: format!("returned {} reconstructions, {n} requested", batch.len()),
            });
        }
        reconstruction_score(id, union.row(i), &batch)
    };
    let values: Vec<f64> = if oracle.reentrant() {
        (0..union.len())
            .into_par_iter()
            .map(score_one)
            .collect::<Result<_>>()?
    } else {
        (0..union.len()).map(score_one).collect::<Result<_>>()?
    };
    ScoreVector::new(
        union.ids().iter().cloned().zip(values).collect(),
        "rec",
        format!("attack=rec;n_reconstructions={n}"),
    )
}

/// Reconstructions computed ahead of time, e.g. exported from a trained
/// autoencoder. Serves the first `n` rows of each batch.
#[derive(Debug, Clone, Default)]
pub struct PrecomputedReconstructions {
    batches: HashMap<String, ReconstructionBatch>,
}

impl PrecomputedReconstructions {
    pub fn new(batches: HashMap<String, ReconstructionBatch>) -> Self {
        Self { batches }
    }

    /// Smallest batch size, i.e. the largest `n` every record can serve.
    pub fn min_batch_len(&self) -> Option<usize> {
        self.batches.values().map(ReconstructionBatch::len).min()
    }
}

impl ReconstructionOracle for PrecomputedReconstructions {
    fn reconstruct(&self, record_id: &str, _x: ArrayView1<'_, f64>, n: usize) -> Result<ReconstructionBatch> {
        let batch = self.batches.get(record_id).ok_or_else(|| Error::Oracle {
            record_id: record_id.to_string(),
            message: "no reconstructions on file".into(),
        })?;
        if batch.len() < n {
            return Err(Error::Oracle {
                record_id: record_id.to_string(),
                message: format!("{} reconstructions on file, {n} requested", batch.len()),
            });
        }
        ReconstructionBatch::new(
            batch.record_id(),
            batch.reconstructions().slice(s![..n, ..]).to_owned(),
        )
    }

    fn reentrant(&self) -> bool {
        true
    }
}
