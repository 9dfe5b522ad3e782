use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, SymmetricEigen};
use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::io::{read_matrix, write_matrix};
use crate::{Error, Matrix, Result};

/// Sign convention stored alongside serialized models.
pub const SIGN_CONVENTION: &str = "first-nonzero-positive";

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PcaOptions {
    /// Divide each projected coordinate by the square root of its eigenvalue.
    pub whiten: bool,
}

/// Principal-component projection fitted on a reference set.
#[derive(Debug, Clone, PartialEq)]
pub struct PcaModel {
    mean: Array1<f64>,
    /// `k × D`, orthonormal rows ordered by descending eigenvalue.
    components: Array2<f64>,
    eigenvalues: Vec<f64>,
    options: PcaOptions,
}

#[derive(Serialize, Deserialize)]
struct Sidecar {
    k: usize,
    dim: usize,
    sign_convention: String,
    whiten: bool,
    eigenvalues: Vec<f64>,
}

/// Fits the top-`k` principal components of `reference` (rows = records).
///
/// Components are eigenvectors of the sample covariance (n − 1 denominator)
/// in descending eigenvalue order. Each component's first non-zero entry is
/// positive. Eigenvalues equal up to round-off are ordered by the column on
/// which their eigenvector has its largest magnitude.
pub fn pca_fit(reference: ArrayView2<'_, f64>, k: usize, options: PcaOptions) -> Result<PcaModel> {
    let (n, dim) = reference.dim();
    if n == 0 || dim == 0 {
        return Err(Error::EmptyInput("PCA reference set"));
    }
    if k == 0 {
        return Err(Error::Config("PCA needs at least one component".into()));
    }
    if k > dim {
        return Err(Error::Rank {
            requested: k,
            available: dim,
        });
    }

    let mean = reference.mean_axis(Axis(0)).expect("non-empty");
    let centered = &reference - &mean;
    let denom = (n.max(2) - 1) as f64;
    let cov = centered.t().dot(&centered) / denom;

    let cov = DMatrix::from_fn(dim, dim, |i, j| 0.5 * (cov[[i, j]] + cov[[j, i]]));
    let eig = SymmetricEigen::new(cov);

    let lambda_max = eig.eigenvalues.iter().cloned().fold(0.0f64, f64::max);
    let tol = lambda_max * dim as f64 * f64::EPSILON * 16.0;
    let nonzero = eig.eigenvalues.iter().filter(|&&l| l > tol).count();
    if nonzero < k {
        return Err(Error::Rank {
            requested: k,
            available: nonzero,
        });
    }

    let vectors: Vec<Vec<f64>> = (0..dim)
        .map(|c| {
            let mut v: Vec<f64> = eig.eigenvectors.column(c).iter().copied().collect();
            fix_sign(&mut v);
            v
        })
        .collect();
    let lead_column = |v: &[f64]| {
        v.iter()
            .enumerate()
            .fold((0usize, -1.0f64), |best, (i, &x)| {
                if x.abs() > best.1 {
                    (i, x.abs())
                } else {
                    best
                }
            })
            .0
    };

    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    // Re-order runs of numerically equal eigenvalues by their lead column.
    let tie_tol = lambda_max.max(f64::MIN_POSITIVE) * 1e-10;
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len()
            && (eig.eigenvalues[order[end - 1]] - eig.eigenvalues[order[end]]).abs() <= tie_tol
        {
            end += 1;
        }
        order[start..end].sort_by_key(|&c| lead_column(&vectors[c]));
        start = end;
    }

    let mut components = Array2::zeros((k, dim));
    let mut eigenvalues = Vec::with_capacity(k);
    for (row, &c) in order.iter().take(k).enumerate() {
        components
            .row_mut(row)
            .assign(&ArrayView1::from(vectors[c].as_slice()));
        eigenvalues.push(eig.eigenvalues[c].max(0.0));
    }

    Ok(PcaModel {
        mean,
        components,
        eigenvalues,
        options,
    })
}

fn fix_sign(v: &mut [f64]) {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let tiny = norm * 1e-12;
    if let Some(first) = v.iter().find(|x| x.abs() > tiny) {
        if *first < 0.0 {
            v.iter_mut().for_each(|x| *x = -*x);
        }
    }
}

impl PcaModel {
    pub fn k(&self) -> usize {
        self.components.nrows()
    }

    /// Raw input dimension.
    pub fn dim(&self) -> usize {
        self.components.ncols()
    }

    pub fn mean(&self) -> &Array1<f64> {
        &self.mean
    }

    pub fn components(&self) -> &Array2<f64> {
        &self.components
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn options(&self) -> PcaOptions {
        self.options
    }

    /// Projects one record: `components · (x − mean)`.
    pub fn transform(&self, x: ArrayView1<'_, f64>) -> Result<Array1<f64>> {
        if x.len() != self.dim() {
            return Err(Error::Dim {
                expected: self.dim(),
                got: x.len(),
            });
        }
        let mut out = Array1::zeros(self.k());
        self.project_into(x, out.as_slice_mut().expect("contiguous"));
        Ok(out)
    }

    fn project_into(&self, x: ArrayView1<'_, f64>, out: &mut [f64]) {
        let centered: Vec<f64> = x.iter().zip(self.mean.iter()).map(|(a, m)| a - m).collect();
        for (j, slot) in out.iter_mut().enumerate() {
            let comp = self.components.row(j);
            let mut acc = 0.0;
            for (c, v) in comp.iter().zip(&centered) {
                acc += c * v;
            }
            if self.options.whiten {
                let l = self.eigenvalues[j];
                acc /= l.sqrt();
            }
            *slot = acc;
        }
    }

    /// Projects every row. Rows are independent, so the result does not
    /// depend on how a caller chunks its input.
    pub fn transform_matrix(&self, x: ArrayView2<'_, f64>) -> Result<Matrix> {
        if x.ncols() != self.dim() {
            return Err(Error::Dim {
                expected: self.dim(),
                got: x.ncols(),
            });
        }
        let k = self.k();
        let mut out = Array2::zeros((x.nrows(), k));
        out.as_slice_mut()
            .expect("fresh array")
            .par_chunks_mut(k.max(1))
            .enumerate()
            .for_each(|(i, o)| self.project_into(x.row(i), o));
        Ok(out)
    }

    fn sidecar_path(path: &Path) -> PathBuf {
        let mut s = path.as_os_str().to_owned();
        s.push(".json");
        PathBuf::from(s)
    }

    /// Writes the model as a `(1 + k) × D` matrix file (mean row, then the
    /// components) and a JSON sidecar at `<path>.json`.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut stacked = Array2::zeros((1 + self.k(), self.dim()));
        stacked.row_mut(0).assign(&self.mean);
        stacked.slice_mut(ndarray::s![1.., ..]).assign(&self.components);
        write_matrix(&stacked, path)?;
        let sidecar = Sidecar {
            k: self.k(),
            dim: self.dim(),
            sign_convention: SIGN_CONVENTION.into(),
            whiten: self.options.whiten,
            eigenvalues: self.eigenvalues.clone(),
        };
        let json = serde_json::to_string_pretty(&sidecar).expect("serializable");
        let sp = Self::sidecar_path(path);
        std::fs::write(&sp, json + "\n").map_err(|e| Error::io(&sp, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let stacked = read_matrix(path)?;
        let sp = Self::sidecar_path(path);
        let text = std::fs::read_to_string(&sp).map_err(|e| Error::io(&sp, e))?;
        let sidecar: Sidecar =
            serde_json::from_str(&text).map_err(|e| Error::Format(format!("PCA sidecar: {e}")))?;
        if sidecar.sign_convention != SIGN_CONVENTION {
            return Err(Error::Format(format!(
                "unsupported sign convention `{}`",
                sidecar.sign_convention
            )));
        }
        if stacked.nrows() != sidecar.k + 1 || stacked.ncols() != sidecar.dim {
            return Err(Error::Format(format!(
                "PCA matrix is {}×{}, sidecar declares k={} dim={}",
                stacked.nrows(),
                stacked.ncols(),
                sidecar.k,
                sidecar.dim
            )));
        }
        if sidecar.eigenvalues.len() != sidecar.k {
            return Err(Error::Format(
                "PCA sidecar eigenvalue count differs from k".into(),
            ));
        }
        Ok(PcaModel {
            mean: stacked.row(0).to_owned(),
            components: stacked.slice(ndarray::s![1.., ..]).to_owned(),
            eigenvalues: sidecar.eigenvalues,
            options: PcaOptions {
                whiten: sidecar.whiten,
            },
        })
    }
}
