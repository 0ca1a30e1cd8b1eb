//! Representation similarity across languages: SVCCA scores and a
//! Laplacian-eigenmap layout of the resulting similarity matrix.

mod eigenmap;
mod linalg;
mod plot;
mod svcca;

pub use eigenmap::{laplacian_eigenmap, normalized_laplacian, EigenmapCoords, EIGEN_TOL};
pub use linalg::{symmetric_eigen, SymmetricEigen};
pub use plot::{emit_scatter, render_svg};
pub use svcca::{
    score_matrix, svcca, RepresentationMatrix, SvccaScoreMatrix, DEFAULT_RIDGE, DEFAULT_VARIANCE_THRESHOLD,
};

use std::collections::{BTreeMap, BTreeSet};
use std::str::FromStr;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::corpus::{ImageTextExample, Vocabulary};
use crate::model::{encode_texts, text_trunk, Head, ModelParams};
use crate::{Error, Result, Scalar};

/// Which text representation to compare across languages.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RepresentationSource {
    /// Normalized embedding from the image-text head.
    #[default]
    I2tHead,
    /// Normalized embedding from the text-text head.
    T2tHead,
    /// Shared trunk output before any head.
    Trunk,
}

impl FromStr for RepresentationSource {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "i2t_head" => Ok(Self::I2tHead),
            "t2t_head" => Ok(Self::T2tHead),
            "trunk" => Ok(Self::Trunk),
            other => Err(Error::Config(format!(
                "unknown representation source `{other}` (expected i2t_head, t2t_head or trunk)"
            ))),
        }
    }
}

/// Encodes the captions of every language over the images captioned in all
/// of them, rows ordered by image id.
pub fn language_representations<T: Scalar>(
    params: &ModelParams<T>,
    vocab: &Vocabulary,
    examples: &[ImageTextExample],
    source: RepresentationSource,
) -> Result<Vec<RepresentationMatrix>> {
    let mut by_lang: BTreeMap<&str, BTreeMap<&str, &str>> = BTreeMap::new();
    for e in examples {
        by_lang
            .entry(e.lang.as_str())
            .or_default()
            .entry(e.image_id.as_str())
            .or_insert(e.caption.as_str());
    }
    let mut shared: Option<BTreeSet<&str>> = None;
    for caps in by_lang.values() {
        let ids: BTreeSet<&str> = caps.keys().copied().collect();
        shared = Some(match shared {
            None => ids,
            Some(s) => s.intersection(&ids).copied().collect(),
        });
    }
    let shared = shared.unwrap_or_default();
    if shared.is_empty() {
        return Err(Error::invalid("no image is captioned in every language"));
    }
    by_lang
        .iter()
        .map(|(lang, caps)| {
            let ids: Vec<Vec<usize>> = shared.iter().map(|id| vocab.encode(caps[id])).collect();
            let rows: Array2<T> = match source {
                RepresentationSource::I2tHead => encode_texts(params, &ids, Head::I2t)?.embeddings,
                RepresentationSource::T2tHead => encode_texts(params, &ids, Head::T2t)?.embeddings,
                RepresentationSource::Trunk => text_trunk(params, &ids)?,
            };
            RepresentationMatrix::new(*lang, rows.mapv(|x| x.as_f64()))
        })
        .collect()
}
