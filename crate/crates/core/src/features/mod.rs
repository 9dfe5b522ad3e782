//! Feature spaces in which record-to-sample distances are measured.
//!
//! Each transform maps a raw record (a flattened image, row-major and
//! channel-last) to a feature vector; distances are Euclidean in that space.

mod chist;
mod hog;
mod pca;

pub use chist::{chist_features, ChistParams};
pub use hog::{hog_features, hog_features_flat, HogParams};
pub use pca::{pca_fit, PcaModel, PcaOptions};
