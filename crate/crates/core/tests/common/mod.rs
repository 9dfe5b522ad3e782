//! Independent reference implementations used as test oracles.
#![allow(dead_code)]

use ndarray::{Array1, Array2, ArrayView2};

/// Sample covariance with an `n − 1` denominator, by direct double sum.
pub fn covariance(x: ArrayView2<'_, f64>) -> Array2<f64> {
    let (n, d) = x.dim();
    let mut mean = vec![0.0; d];
    for i in 0..n {
        for j in 0..d {
            mean[j] += x[[i, j]];
        }
    }
    for m in &mut mean {
        *m /= n as f64;
    }
    let mut c = Array2::zeros((d, d));
    for a in 0..d {
        for b in a..d {
            let mut s = 0.0;
            for i in 0..n {
                s += (x[[i, a]] - mean[a]) * (x[[i, b]] - mean[b]);
            }
            c[[a, b]] = s / (n - 1) as f64;
            c[[b, a]] = c[[a, b]];
        }
    }
    c
}

/// Cyclic Jacobi eigendecomposition of a symmetric matrix. Returns
/// eigenvalues in descending order with unit eigenvectors as rows.
pub fn jacobi_eigen(sym: &Array2<f64>) -> (Vec<f64>, Array2<f64>) {
    let n = sym.nrows();
    let mut a = sym.clone();
    let mut v = Array2::<f64>::eye(n);
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|p| (0..n).filter(move |&q| q != p).map(move |q| (p, q)))
            .map(|(p, q)| a[[p, q]] * a[[p, q]])
            .sum();
        if off < 1e-30 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[[p, q]].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[[q, q]] - a[[p, p]]) / (2.0 * a[[p, q]]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[[k, p]];
                    let akq = a[[k, q]];
                    a[[k, p]] = c * akp - s * akq;
                    a[[k, q]] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[[p, k]];
                    let aqk = a[[q, k]];
                    a[[p, k]] = c * apk - s * aqk;
                    a[[q, k]] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let vkp = v[[k, p]];
                    let vkq = v[[k, q]];
                    v[[k, p]] = c * vkp - s * vkq;
                    v[[k, q]] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[[j, j]].total_cmp(&a[[i, i]]));
    let values = order.iter().map(|&i| a[[i, i]]).collect();
    let mut vectors = Array2::zeros((n, n));
    for (r, &i) in order.iter().enumerate() {
        for k in 0..n {
            vectors[[r, k]] = v[[k, i]];
        }
    }
    (values, vectors)
}

/// Euclidean distance by the textbook loop.
pub fn euclid(a: &[f64], b: &[f64]) -> f64 {
    let mut s = 0.0;
    for i in 0..a.len() {
        let d = a[i] - b[i];
        s += d * d;
    }
    s.sqrt()
}

/// Minimum distance from each record to any sample, by double loop.
pub fn naive_min_distances(records: ArrayView2<'_, f64>, samples: ArrayView2<'_, f64>) -> Vec<f64> {
    records
        .rows()
        .into_iter()
        .map(|r| {
            let r = r.to_vec();
            samples
                .rows()
                .into_iter()
                .map(|s| euclid(&r, &s.to_vec()))
                .fold(f64::INFINITY, f64::min)
        })
        .collect()
}

pub fn uniform_matrix(rows: usize, cols: usize, scale: f64, rng: &mut impl rand::Rng) -> Array2<f64> {
    Array2::from_shape_simple_fn((rows, cols), || scale * rng.random::<f64>())
}

pub fn column(values: &[f64]) -> Array1<f64> {
    Array1::from(values.to_vec())
}
