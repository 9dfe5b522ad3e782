//! Membership-inference auditing for generative models.
//!
//! Candidate records are scored against samples (or reconstructions) drawn
//! from a generative model. A score `f(x)` is larger for records the model
//! appears to have seen during training. Scores feed two decision
//! procedures:
//!
//! * **single MI** labels the `M` highest-scoring of `2M` records as members;
//! * **set MI** picks which of two disjoint `M`-record sets is the training
//!   subset by majority vote among the top `M` records.
//!
//! The scoring functions live in [`attacks`]: Monte Carlo neighbourhood
//! counts (`MC-ε`), clipped log-distance sums (`MC-d`), a Gaussian KDE
//! baseline and the reconstruction-error attack. Distances are measured in a
//! feature space chosen in [`features`] (PCA projection, HOG, colour
//! histograms) and computed exactly by [`distances`].
//!
//! [`synth`] provides generative stand-ins with a tunable memorisation rate,
//! so the whole pipeline can be exercised without trained networks.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod attacks;
pub mod data;
pub mod distances;
mod error;
pub mod features;
pub mod io;
pub mod scenarios;
pub mod synth;

pub use data::{Matrix, Origin, ReconstructionBatch, RecordSet, SampleMatrix, ScoreVector, TrialReport};
pub use error::{Error, Result};
