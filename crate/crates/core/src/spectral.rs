//! Normalized adjacency matrix, dense symmetric eigendecomposition and the
//! rearrangement distance between spectra.

use std::sync::Once;

use faer::{Mat, Side};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::latent::Graph;

/// How eigenvalues (and their vectors) are ordered.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SortOrder {
    /// Signed value, largest first.
    ByValueDesc,
    /// Absolute value, largest first; positive before negative on ties.
    ByMagnitudeDesc,
}

/// Eigenvalues of a symmetric matrix, optionally with orthonormal eigenvectors
/// stored as the columns of `vectors` in the same order.
#[derive(Debug, Clone)]
pub struct Spectrum {
    pub values: Vec<f64>,
    pub vectors: Option<Mat<f64>>,
    pub order: SortOrder,
}

impl Spectrum {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Same eigenpairs under another ordering.
    pub fn reordered(&self, order: SortOrder) -> Spectrum {
        let perm = ordering(&self.values, order);
        let values = perm.iter().map(|&i| self.values[i]).collect();
        let vectors = self.vectors.as_ref().map(|v| {
            Mat::from_fn(v.nrows(), perm.len(), |r, c| v[(r, perm[c])])
        });
        Spectrum { values, vectors, order }
    }

    /// Eigenvalues divided by `zeta`, as in the relatively sparse regime.
    pub fn rescaled(&self, zeta: f64) -> Spectrum {
        Spectrum {
            values: self.values.iter().map(|v| v / zeta).collect(),
            vectors: self.vectors.clone(),
            order: self.order,
        }
    }
}

fn ordering(values: &[f64], order: SortOrder) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    match order {
        SortOrder::ByValueDesc => idx.sort_by(|&a, &b| values[b].total_cmp(&values[a])),
        SortOrder::ByMagnitudeDesc => idx.sort_by(|&a, &b| {
            values[b]
                .abs()
                .total_cmp(&values[a].abs())
                .then(values[b].total_cmp(&values[a]))
        }),
    }
    idx
}

/// `T^_n = A / n`.
pub fn build_that(g: &Graph) -> Mat<f64> {
    let n = g.n();
    let inv = 1.0 / n as f64;
    Mat::from_fn(n, n, |i, j| if g.get(i, j) { inv } else { 0.0 })
}

fn check_symmetric(m: &Mat<f64>) -> Result<()> {
    let n = m.nrows();
    if m.ncols() != n {
        return Err(Error::InvalidArgument(format!("matrix is {}x{}", n, m.ncols())));
    }
    for j in 0..n {
        for i in j + 1..n {
            let diff = (m[(i, j)] - m[(j, i)]).abs();
            if !(diff <= 1e-12) {
                return Err(Error::NotSymmetric { i, j, diff });
            }
        }
    }
    Ok(())
}

/// Full eigendecomposition of a dense symmetric matrix.
pub fn sym_eigen(m: &Mat<f64>, want_vectors: bool, order: SortOrder) -> Result<Spectrum> {
    // faer splits work by the rayon thread count, which changes rounding.
    // Replicates are parallel already, so keep each decomposition sequential.
    static SEQUENTIAL: Once = Once::new();
    SEQUENTIAL.call_once(|| faer::set_global_parallelism(faer::Par::Seq));
    check_symmetric(m)?;
    if m.nrows() == 0 {
        return Ok(Spectrum { values: vec![], vectors: want_vectors.then(|| Mat::zeros(0, 0)), order });
    }
    let (values, vectors) = if want_vectors {
        let evd = m
            .self_adjoint_eigen(Side::Lower)
            .map_err(|e| Error::Eigen(format!("{e:?}")))?;
        let s = evd.S();
        let values: Vec<f64> = (0..m.nrows()).map(|i| s[i]).collect();
        (values, Some(evd.U().to_owned()))
    } else {
        let values = m
            .self_adjoint_eigenvalues(Side::Lower)
            .map_err(|e| Error::Eigen(format!("{e:?}")))?;
        (values, None)
    };
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Eigen("non-finite eigenvalue".into()));
    }
    let raw = Spectrum { values, vectors, order };
    Ok(raw.reordered(order))
}

/// Exact `l2` rearrangement distance between two zero-padded sequences.
///
/// Sorting both sequences and matching in order is optimal for squared costs.
pub fn delta2(x: &[f64], y: &[f64]) -> f64 {
    let len = x.len().max(y.len());
    let padded = |s: &[f64]| {
        let mut v = s.to_vec();
        v.resize(len, 0.0);
        v.sort_by(f64::total_cmp);
        v
    };
    let (a, b) = (padded(x), padded(y));
    a.iter().zip(&b).map(|(p, q)| (p - q).powi(2)).sum::<f64>().sqrt()
}
