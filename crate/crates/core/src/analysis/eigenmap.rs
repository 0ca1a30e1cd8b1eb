use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use super::linalg::symmetric_eigen;
use super::svcca::SvccaScoreMatrix;
use crate::{Error, Result};

/// Off-diagonal convergence threshold for the Laplacian eigen-solve.
pub const EIGEN_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EigenmapCoords {
    pub langs: Vec<String>,
    pub coords: Vec<[f64; 2]>,
    /// Full spectrum of the normalized Laplacian, ascending.
    pub eigenvalues: Vec<f64>,
}

/// Checks the affinity and returns `(Λ, D)` where `Λ = I − D^{-1/2} W D^{-1/2}`
/// and `W` is the affinity with its diagonal zeroed.
pub fn normalized_laplacian(s: &SvccaScoreMatrix) -> Result<(Array2<f64>, Array1<f64>)> {
    let l = s.langs.len();
    if l < 3 {
        return Err(Error::invalid(format!("eigenmap needs at least 3 languages, got {l}")));
    }
    if s.scores.len() != l || s.scores.iter().any(|r| r.len() != l) {
        return Err(Error::invalid(format!("affinity must be {l}x{l}")));
    }
    let mut w = s.to_array();
    for i in 0..l {
        for j in 0..l {
            let x = w[[i, j]];
            if !x.is_finite() {
                return Err(Error::Numeric {
                    term: format!("affinity {}/{}", s.langs[i], s.langs[j]),
                });
            }
            if x < 0.0 {
                return Err(Error::invalid(format!(
                    "negative affinity {x} between `{}` and `{}`",
                    s.langs[i], s.langs[j]
                )));
            }
            if (x - w[[j, i]]).abs() > 1e-9 {
                return Err(Error::invalid(format!(
                    "affinity not symmetric between `{}` and `{}`",
                    s.langs[i], s.langs[j]
                )));
            }
        }
        w[[i, i]] = 0.0;
    }
    let deg = w.sum_axis(ndarray::Axis(1));
    if let Some(i) = deg.iter().position(|&d| d <= 0.0) {
        return Err(Error::Degenerate(format!("language `{}` has zero affinity to all others", s.langs[i])));
    }
    let inv_sqrt = deg.mapv(|d| 1.0 / d.sqrt());
    let lap = Array2::from_shape_fn((l, l), |(i, j)| {
        let id = if i == j { 1.0 } else { 0.0 };
        id - inv_sqrt[i] * w[[i, j]] * inv_sqrt[j]
    });
    Ok((lap, deg))
}

/// Two-dimensional Laplacian eigenmap of a language-similarity matrix.
pub fn laplacian_eigenmap(s: &SvccaScoreMatrix) -> Result<EigenmapCoords> {
    let (lap, deg) = normalized_laplacian(s)?;
    let l = deg.len();
    let eigenvalues = symmetric_eigen(&lap, EIGEN_TOL)?.values;

    // Push the trivial eigenvector D^{1/2}·1 out of the bottom of the spectrum
    // so that a disconnected graph's second null vector is the one selected.
    let q = deg.mapv(f64::sqrt);
    let q = &q / q.dot(&q).sqrt();
    let mut shifted = lap.clone();
    for i in 0..l {
        for j in 0..l {
            shifted[[i, j]] += 3.0 * q[i] * q[j];
        }
    }
    let eig = symmetric_eigen(&shifted, EIGEN_TOL)?;

    let mut cols = [Array1::<f64>::zeros(l), Array1::<f64>::zeros(l)];
    for (c, col) in cols.iter_mut().enumerate() {
        let u = eig.vectors.column(c);
        let mut x = Array1::from_shape_fn(l, |i| u[i] / deg[i].sqrt());
        let mean = x.mean().expect("non-empty");
        x -= mean;
        let lead = x
            .iter()
            .copied()
            .fold(0.0f64, |best, v| if v.abs() > best.abs() { v } else { best });
        if lead < 0.0 {
            x.mapv_inplace(|v| -v);
        }
        *col = x;
    }
    let coords = (0..l).map(|i| [cols[0][i], cols[1][i]]).collect();
    Ok(EigenmapCoords {
        langs: s.langs.clone(),
        coords,
        eigenvalues,
    })
}
