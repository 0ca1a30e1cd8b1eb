use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use super::{tokenize, ImageTextExample};
use crate::{Error, Result};

/// Token-level translation table from `src_lang` into `tgt_lang`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BilingualDictionary {
    pub src_lang: String,
    pub tgt_lang: String,
    entries: BTreeMap<String, String>,
}

impl BilingualDictionary {
    pub fn new(
        src_lang: impl Into<String>,
        tgt_lang: impl Into<String>,
        entries: impl IntoIterator<Item = (String, String)>,
    ) -> Result<Self> {
        let entries: BTreeMap<String, String> = entries.into_iter().collect();
        if entries.iter().any(|(k, v)| k.is_empty() || v.is_empty()) {
            return Err(Error::invalid("dictionary entries must be non-empty tokens"));
        }
        Ok(Self {
            src_lang: src_lang.into(),
            tgt_lang: tgt_lang.into(),
            entries,
        })
    }

    pub fn identity(lang: &str, tokens: impl IntoIterator<Item = String>) -> Self {
        Self {
            src_lang: lang.to_string(),
            tgt_lang: lang.to_string(),
            entries: tokens.into_iter().map(|t| (t.clone(), t)).collect(),
        }
    }

    pub fn get(&self, token: &str) -> Option<&str> {
        self.entries.get(token).map(String::as_str)
    }

    pub fn entries(&self) -> impl Iterator<Item = (&str, &str)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Swaps source and target. Later duplicates of a target token win.
    pub fn inverted(&self) -> Self {
        Self {
            src_lang: self.tgt_lang.clone(),
            tgt_lang: self.src_lang.clone(),
            entries: self.entries.iter().map(|(k, v)| (v.clone(), k.clone())).collect(),
        }
    }

    /// Conventional file name `dict_<src>_<tgt>.tsv`.
    pub fn file_name(src_lang: &str, tgt_lang: &str) -> String {
        format!("dict_{src_lang}_{tgt_lang}.tsv")
    }

    /// Reads a two-column tab-separated file; blank lines are skipped.
    pub fn read(path: &Path, src_lang: &str, tgt_lang: &str) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut entries = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let mut cols = line.split('\t');
            match (cols.next(), cols.next(), cols.next()) {
                (Some(s), Some(t), None) if !s.is_empty() && !t.is_empty() => {
                    entries.push((s.to_string(), t.to_string()))
                }
                _ => {
                    return Err(Error::Parse {
                        path: path.to_path_buf(),
                        line: i + 1,
                        message: "expected two non-empty tab-separated columns".into(),
                    })
                }
            }
        }
        Self::new(src_lang, tgt_lang, entries)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut out = String::new();
        for (k, v) in &self.entries {
            out.push_str(k);
            out.push('\t');
            out.push_str(v);
            out.push('\n');
        }
        fs::write(path, out).map_err(|e| Error::io(path, e))
    }
}

/// Replaces each token by its dictionary entry; misses pass through.
pub fn translate_tokens<S: AsRef<str>>(tokens: &[S], dict: &BilingualDictionary) -> Vec<String> {
    tokens
        .iter()
        .map(|t| {
            let t = t.as_ref();
            dict.get(t).unwrap_or(t).to_string()
        })
        .collect()
}

/// Creates extra image-caption pairs by translating `pivot`-language captions
/// with each dictionary out of the pivot language.
pub fn translate_train_augment(
    examples: &[ImageTextExample],
    from_pivot: &[BilingualDictionary],
) -> Vec<ImageTextExample> {
    let mut out = Vec::new();
    for dict in from_pivot {
        for ex in examples.iter().filter(|e| e.lang == dict.src_lang) {
            out.push(ImageTextExample {
                image_id: ex.image_id.clone(),
                features: ex.features.clone(),
                caption: translate_tokens(&tokenize(&ex.caption), dict).join(" "),
                lang: dict.tgt_lang.clone(),
            });
        }
    }
    out
}
