//! Line-oriented JSON corpus files.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::de::{self, DeserializeOwned, Deserializer};
use serde::{Deserialize, Serialize};

use super::{ImageTextExample, RatingRecord, TranslationExample};
use crate::{Error, Result};

/// Accepts either a JSON array of numbers or a comma-separated decimal string.
pub(super) fn deserialize_features<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Vec<f64>, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Raw {
        List(Vec<f64>),
        Text(String),
    }
    match Raw::deserialize(d)? {
        Raw::List(v) => Ok(v),
        Raw::Text(s) if s.trim().is_empty() => Ok(Vec::new()),
        Raw::Text(s) => s
            .split(',')
            .map(|p| p.trim().parse::<f64>().map_err(de::Error::custom))
            .collect(),
    }
}

fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec = serde_json::from_str(&line).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            message: e.to_string(),
        })?;
        out.push(rec);
    }
    Ok(out)
}

pub fn write_jsonl<'a, T: Serialize + 'a>(path: &Path, records: impl IntoIterator<Item = &'a T>) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for r in records {
        serde_json::to_writer(&mut w, r).map_err(|e| Error::io(path, e.into()))?;
        w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Reads image-caption records; when `d_img` is given every feature vector
/// must have that length and all features must be finite.
pub fn read_image_text_file(path: &Path, d_img: Option<usize>) -> Result<Vec<ImageTextExample>> {
    let recs: Vec<ImageTextExample> = read_jsonl(path)?;
    let expected = d_img.or_else(|| recs.first().map(|r| r.features.len()));
    for (i, r) in recs.iter().enumerate() {
        let bad = |message: String| Error::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            message,
        };
        if Some(r.features.len()) != expected {
            return Err(bad(format!(
                "image `{}` has {} features, expected {}",
                r.image_id,
                r.features.len(),
                expected.unwrap_or(0)
            )));
        }
        if r.features.iter().any(|x| !x.is_finite()) {
            return Err(bad(format!("image `{}` has non-finite features", r.image_id)));
        }
        if r.lang.is_empty() {
            return Err(bad(format!("image `{}` has an empty language code", r.image_id)));
        }
    }
    Ok(recs)
}

pub fn read_translation_file(path: &Path) -> Result<Vec<TranslationExample>> {
    let recs: Vec<TranslationExample> = read_jsonl(path)?;
    if let Some(i) = recs.iter().position(|r| r.left_lang == r.right_lang) {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            message: format!("translation pair has identical languages `{}`", recs[i].left_lang),
        });
    }
    Ok(recs)
}

pub fn read_rating_file(path: &Path) -> Result<Vec<RatingRecord>> {
    read_jsonl(path)
}

pub fn write_image_text_file(path: &Path, recs: &[ImageTextExample]) -> Result<()> {
    write_jsonl(path, recs)
}

pub fn write_translation_file(path: &Path, recs: &[TranslationExample]) -> Result<()> {
    write_jsonl(path, recs)
}

pub fn write_rating_file(path: &Path, recs: &[RatingRecord]) -> Result<()> {
    write_jsonl(path, recs)
}
