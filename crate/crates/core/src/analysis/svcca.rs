use ndarray::{Array2, Axis};
use serde::{Deserialize, Serialize};

use super::linalg::symmetric_eigen;
use crate::{Error, Result};

pub const DEFAULT_VARIANCE_THRESHOLD: f64 = 0.99;
pub const DEFAULT_RIDGE: f64 = 1e-6;
const EIGEN_TOL: f64 = 1e-13;

/// Row-aligned sentence representations of one language.
#[derive(Debug, Clone, PartialEq)]
pub struct RepresentationMatrix {
    pub lang: String,
    pub rows: Array2<f64>,
}

impl RepresentationMatrix {
    pub fn new(lang: impl Into<String>, rows: Array2<f64>) -> Result<Self> {
        let lang = lang.into();
        if rows.iter().any(|x| !x.is_finite()) {
            return Err(Error::Numeric {
                term: format!("representations of `{lang}`"),
            });
        }
        if rows.nrows() < rows.ncols() {
            log::warn!(
                "`{lang}`: {} sentences for {} dimensions; SVCCA will be poorly conditioned",
                rows.nrows(),
                rows.ncols()
            );
        }
        Ok(Self { lang, rows })
    }
}

/// Centers the columns and projects onto the fewest leading singular
/// directions explaining `threshold` of the variance.
fn reduce(x: &Array2<f64>, threshold: f64, lang: &str) -> Result<Array2<f64>> {
    let mean = x.mean_axis(Axis(0)).expect("non-empty rows");
    let xc = x - &mean;
    let eig = symmetric_eigen(&xc.t().dot(&xc), EIGEN_TOL)?;
    let d = eig.values.len();
    // Descending order of squared singular values.
    let lams: Vec<f64> = eig.values.iter().rev().map(|l| l.max(0.0)).collect();
    let total: f64 = lams.iter().sum();
    let top = lams.first().copied().unwrap_or(0.0);
    if total <= 0.0 || top <= 1e-24 * xc.len() as f64 {
        return Err(Error::Degenerate(format!("representation matrix of `{lang}` has rank 0")));
    }
    let target = threshold * total - 1e-12 * total;
    let mut acc = 0.0;
    let mut k = d;
    for (i, l) in lams.iter().enumerate() {
        acc += l;
        if acc >= target {
            k = i + 1;
            break;
        }
    }
    let basis = Array2::from_shape_fn((d, k), |(r, c)| eig.vectors[[r, d - 1 - c]]);
    Ok(xc.dot(&basis))
}

/// `C^{-1/2}` with eigenvalues floored at `ridge · λ_max`.
fn inverse_sqrt(c: &Array2<f64>, ridge: f64) -> Result<Array2<f64>> {
    let eig = symmetric_eigen(c, EIGEN_TOL)?;
    let lmax = eig.values.last().copied().unwrap_or(0.0).max(0.0);
    let floor = (ridge * lmax).max(f64::MIN_POSITIVE);
    let k = eig.values.len();
    let scaled = Array2::from_shape_fn((k, k), |(r, j)| eig.vectors[[r, j]] / eig.values[j].max(floor).sqrt());
    Ok(scaled.dot(&eig.vectors.t()))
}

/// Mean SVCCA correlation between two row-aligned representation matrices.
pub fn svcca(a: &RepresentationMatrix, b: &RepresentationMatrix, variance_threshold: f64, ridge: f64) -> Result<f64> {
    let n = a.rows.nrows();
    if n != b.rows.nrows() {
        return Err(Error::invalid(format!(
            "`{}` has {} rows but `{}` has {}",
            a.lang,
            n,
            b.lang,
            b.rows.nrows()
        )));
    }
    if n < 3 {
        return Err(Error::invalid(format!("SVCCA needs at least 3 aligned rows, got {n}")));
    }
    if !(variance_threshold > 0.0 && variance_threshold <= 1.0) {
        return Err(Error::Config(format!("variance threshold {variance_threshold} outside (0, 1]")));
    }
    if !(ridge >= 0.0 && ridge.is_finite()) {
        return Err(Error::Config(format!("ridge {ridge} must be finite and non-negative")));
    }
    let pa = reduce(&a.rows, variance_threshold, &a.lang)?;
    let pb = reduce(&b.rows, variance_threshold, &b.lang)?;
    let denom = (n - 1) as f64;
    let caa = pa.t().dot(&pa) / denom;
    let cbb = pb.t().dot(&pb) / denom;
    let cab = pa.t().dot(&pb) / denom;
    let m = inverse_sqrt(&caa, ridge)?.dot(&cab).dot(&inverse_sqrt(&cbb, ridge)?);
    let gram = if m.nrows() <= m.ncols() { m.dot(&m.t()) } else { m.t().dot(&m) };
    let eig = symmetric_eigen(&gram, EIGEN_TOL)?;
    let corrs: Vec<f64> = eig.values.iter().map(|l| l.max(0.0).sqrt()).collect();
    let mean = corrs.iter().sum::<f64>() / corrs.len() as f64;
    if !mean.is_finite() {
        return Err(Error::Numeric { term: "SVCCA".into() });
    }
    Ok(mean.clamp(0.0, 1.0))
}

/// Symmetric language-by-language SVCCA scores with unit diagonal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvccaScoreMatrix {
    pub langs: Vec<String>,
    pub scores: Vec<Vec<f64>>,
}

impl SvccaScoreMatrix {
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.scores[i][j]
    }

    pub fn to_array(&self) -> Array2<f64> {
        let l = self.langs.len();
        Array2::from_shape_fn((l, l), |(i, j)| self.scores[i][j])
    }
}

fn name_pair(e: Error, a: &str, b: &str) -> Error {
    match e {
        Error::Degenerate(m) => Error::Degenerate(format!("SVCCA {a}/{b}: {m}")),
        Error::InvalidInput(m) => Error::InvalidInput(format!("SVCCA {a}/{b}: {m}")),
        Error::Numeric { term } => Error::Numeric {
            term: format!("SVCCA {a}/{b}: {term}"),
        },
        other => other,
    }
}

/// Pairwise SVCCA, each pair computed in both argument orders and averaged.
pub fn score_matrix(reps: &[RepresentationMatrix], variance_threshold: f64, ridge: f64) -> Result<SvccaScoreMatrix> {
    let l = reps.len();
    let mut scores = vec![vec![0.0; l]; l];
    for i in 0..l {
        scores[i][i] = 1.0;
        for j in i + 1..l {
            let (a, b) = (&reps[i], &reps[j]);
            let ab = svcca(a, b, variance_threshold, ridge).map_err(|e| name_pair(e, &a.lang, &b.lang))?;
            let ba = svcca(b, a, variance_threshold, ridge).map_err(|e| name_pair(e, &b.lang, &a.lang))?;
            let s = 0.5 * (ab + ba);
            scores[i][j] = s;
            scores[j][i] = s;
        }
    }
    Ok(SvccaScoreMatrix {
        langs: reps.iter().map(|r| r.lang.clone()).collect(),
        scores,
    })
}
