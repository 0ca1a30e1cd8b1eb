//! Retrieval and correlation evaluation on held-out corpora.

mod retrieval;
mod spearman;

pub use retrieval::{mean_recall, rank_all, recall_report, Direction, RetrievalReport, RECALL_KS};
pub use spearman::{average_ranks, pearson, spearman};

use std::collections::{BTreeMap, HashMap};

use ndarray::{Array2, Axis};
use serde::{Deserialize, Serialize};

use crate::corpus::{tokenize, translate_tokens, BilingualDictionary, ImageTextExample, Modality, RatingRecord, Vocabulary};
use crate::model::{encode_images, encode_texts, Head, ModelParams};
use crate::{Error, Result, Scalar};

/// A human-style rating between two evaluation items.
pub type RatedPair = RatingRecord;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvalOptions {
    /// Head used for captions in text-text retrieval and text correlations.
    /// Cross-modal retrieval always uses the image-text head.
    pub text_head: Head,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self { text_head: Head::I2t }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LanguageReport {
    pub lang: String,
    pub i2t: RetrievalReport,
    pub t2i: RetrievalReport,
    pub mean_recall: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub t2t: Option<RetrievalReport>,
}

fn encode_caption_ids(vocab: &Vocabulary, caption: &str, dict: Option<&BilingualDictionary>) -> Result<Vec<usize>> {
    let mut toks = tokenize(caption);
    if let Some(d) = dict {
        toks = translate_tokens(&toks, d);
    }
    if toks.is_empty() {
        return Err(Error::invalid(format!("caption `{caption}` has no tokens")));
    }
    Ok(vocab.encode_tokens(&toks))
}

fn feature_matrix<T: Scalar>(rows: &[&[f64]]) -> Array2<T> {
    let d = rows.first().map_or(0, |r| r.len());
    Array2::from_shape_fn((rows.len(), d), |(r, c)| T::lit(rows[r][c]))
}

/// Distinct images of `examples` in first-appearance order, plus the image
/// index of every example.
fn unique_images(examples: &[ImageTextExample]) -> (Vec<&ImageTextExample>, Vec<usize>) {
    let mut index: HashMap<&str, usize> = HashMap::new();
    let mut images = Vec::new();
    let owner = examples
        .iter()
        .map(|e| {
            *index.entry(e.image_id.as_str()).or_insert_with(|| {
                images.push(e);
                images.len() - 1
            })
        })
        .collect();
    (images, owner)
}

/// Image→caption and caption→image retrieval over one language's examples,
/// optionally translating captions first.
pub fn evaluate_language<T: Scalar>(
    params: &ModelParams<T>,
    vocab: &Vocabulary,
    lang: &str,
    examples: &[ImageTextExample],
    dict: Option<&BilingualDictionary>,
) -> Result<LanguageReport> {
    if examples.is_empty() {
        return Err(Error::invalid(format!("no evaluation examples for `{lang}`")));
    }
    let (images, owner) = unique_images(examples);
    let feats: Vec<&[f64]> = images.iter().map(|e| e.features.as_slice()).collect();
    let img = encode_images(params, feature_matrix::<T>(&feats).view())?.embeddings;
    let ids = examples
        .iter()
        .map(|e| encode_caption_ids(vocab, &e.caption, dict))
        .collect::<Result<Vec<_>>>()?;
    let cap = encode_texts(params, &ids, Head::I2t)?.embeddings;

    let mut gold_i2t = vec![Vec::new(); images.len()];
    for (c, &i) in owner.iter().enumerate() {
        gold_i2t[i].push(c);
    }
    let gold_t2i: Vec<Vec<usize>> = owner.iter().map(|&i| vec![i]).collect();
    let i2t = recall_report(&rank_all(img.view(), cap.view(), &gold_i2t)?, Direction::I2t, lang);
    let t2i = recall_report(&rank_all(cap.view(), img.view(), &gold_t2i)?, Direction::T2i, lang);
    Ok(LanguageReport {
        lang: lang.to_string(),
        mean_recall: mean_recall(&i2t, &t2i),
        i2t,
        t2i,
        t2t: None,
    })
}

/// Caption→caption retrieval from `source` captions to `target` captions,
/// gold being the caption of the same image.
pub fn evaluate_text_to_text<T: Scalar>(
    params: &ModelParams<T>,
    vocab: &Vocabulary,
    source: &[ImageTextExample],
    target: &[ImageTextExample],
    opts: &EvalOptions,
) -> Result<RetrievalReport> {
    let lang = source.first().map(|e| e.lang.clone()).unwrap_or_default();
    let by_image: HashMap<&str, Vec<usize>> = target.iter().enumerate().fold(HashMap::new(), |mut m, (i, e)| {
        m.entry(e.image_id.as_str()).or_default().push(i);
        m
    });
    let gold = source
        .iter()
        .map(|e| {
            by_image
                .get(e.image_id.as_str())
                .cloned()
                .ok_or_else(|| Error::invalid(format!("no target caption for image `{}`", e.image_id)))
        })
        .collect::<Result<Vec<_>>>()?;
    let enc = |xs: &[ImageTextExample]| -> Result<Array2<T>> {
        let ids = xs
            .iter()
            .map(|e| encode_caption_ids(vocab, &e.caption, None))
            .collect::<Result<Vec<_>>>()?;
        Ok(encode_texts(params, &ids, opts.text_head)?.embeddings)
    };
    let ranks = rank_all(enc(source)?.view(), enc(target)?.view(), &gold)?;
    Ok(recall_report(&ranks, Direction::T2t, &lang))
}

/// Groups examples by language, preserving order.
pub fn by_language(examples: &[ImageTextExample]) -> BTreeMap<String, Vec<ImageTextExample>> {
    let mut out: BTreeMap<String, Vec<ImageTextExample>> = BTreeMap::new();
    for e in examples {
        out.entry(e.lang.clone()).or_default().push(e.clone());
    }
    out
}

/// Zero-shot retrieval for every language, with text-text retrieval into
/// `pivot` for the other languages when given.
pub fn evaluate_split<T: Scalar>(
    params: &ModelParams<T>,
    vocab: &Vocabulary,
    examples: &[ImageTextExample],
    pivot: Option<&str>,
    opts: &EvalOptions,
) -> Result<Vec<LanguageReport>> {
    let groups = by_language(examples);
    let mut out = Vec::new();
    for (lang, exs) in &groups {
        let mut report = evaluate_language(params, vocab, lang, exs, None)?;
        if let Some(p) = pivot.filter(|p| *p != lang) {
            if let Some(target) = groups.get(p) {
                report.t2t = Some(evaluate_text_to_text(params, vocab, exs, target, opts)?);
            }
        }
        out.push(report);
    }
    Ok(out)
}

/// Spearman correlations of model cosine similarity against ratings, per
/// modality bucket. A bucket with fewer than two pairs is left empty.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Correlations {
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub sts: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub sis: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub sits: Option<f64>,
}

pub fn correlation_eval<T: Scalar>(
    params: &ModelParams<T>,
    vocab: &Vocabulary,
    rated: &[RatedPair],
    corpus: &[ImageTextExample],
    opts: &EvalOptions,
) -> Result<Correlations> {
    let images: HashMap<&str, &ImageTextExample> = corpus.iter().map(|e| (e.image_id.as_str(), e)).collect();
    let texts: HashMap<String, &ImageTextExample> = corpus.iter().map(|e| (e.text_id(), e)).collect();

    // Encode each referenced item once.
    let mut image_rows: Vec<&[f64]> = Vec::new();
    let mut image_slot: HashMap<&str, usize> = HashMap::new();
    let mut text_ids: Vec<Vec<usize>> = Vec::new();
    let mut text_slot: HashMap<&str, usize> = HashMap::new();
    for r in rated {
        for (m, id) in [(r.a_type, r.a_id.as_str()), (r.b_type, r.b_id.as_str())] {
            match m {
                Modality::Image => {
                    let ex = images
                        .get(id)
                        .ok_or_else(|| Error::invalid(format!("unresolvable image reference `{id}`")))?;
                    if !image_slot.contains_key(id) {
                        image_slot.insert(id, image_rows.len());
                        image_rows.push(&ex.features);
                    }
                }
                Modality::Text => {
                    let ex = texts
                        .get(id)
                        .ok_or_else(|| Error::invalid(format!("unresolvable text reference `{id}`")))?;
                    if !text_slot.contains_key(id) {
                        text_slot.insert(id, text_ids.len());
                        text_ids.push(encode_caption_ids(vocab, &ex.caption, None)?);
                    }
                }
            }
        }
    }
    let img = if image_rows.is_empty() {
        None
    } else {
        Some(encode_images(params, feature_matrix::<T>(&image_rows).view())?.embeddings)
    };
    let txt = if text_ids.is_empty() {
        None
    } else {
        Some(encode_texts(params, &text_ids, opts.text_head)?.embeddings)
    };
    let emb = |m: Modality, id: &str| match m {
        Modality::Image => img.as_ref().expect("images encoded").index_axis(Axis(0), image_slot[id]),
        Modality::Text => txt.as_ref().expect("texts encoded").index_axis(Axis(0), text_slot[id]),
    };

    let mut buckets: BTreeMap<&str, (Vec<T>, Vec<T>)> = BTreeMap::new();
    for r in rated {
        let key = match (r.a_type, r.b_type) {
            (Modality::Text, Modality::Text) => "sts",
            (Modality::Image, Modality::Image) => "sis",
            _ => "sits",
        };
        let cos = emb(r.a_type, &r.a_id).dot(&emb(r.b_type, &r.b_id));
        let b = buckets.entry(key).or_default();
        b.0.push(cos);
        b.1.push(T::lit(r.score));
    }
    let corr = |key: &str| -> Result<Option<f64>> {
        match buckets.get(key) {
            Some((model, human)) if model.len() >= 2 => spearman(model, human).map(Some),
            _ => Ok(None),
        }
    };
    Ok(Correlations {
        sts: corr("sts")?,
        sis: corr("sis")?,
        sits: corr("sits")?,
    })
}

/// Result of translate-test evaluation for one language.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum TranslateTestOutcome {
    Ok { report: LanguageReport },
    /// No translation system (dictionary) into the pivot for this language.
    #[serde(rename = "n/a")]
    NotAvailable { lang: String },
}

/// Translates every non-pivot caption into the pivot language with the
/// matching dictionary and evaluates retrieval; languages without a
/// dictionary are reported as not available. Pivot captions are used as is.
pub fn translate_test_eval<T: Scalar>(
    params: &ModelParams<T>,
    vocab: &Vocabulary,
    pivot: &str,
    dicts: &[BilingualDictionary],
    examples: &[ImageTextExample],
) -> Result<Vec<TranslateTestOutcome>> {
    let mut out = Vec::new();
    for (lang, exs) in by_language(examples) {
        let dict = dicts.iter().find(|d| d.src_lang == lang && d.tgt_lang == pivot);
        let outcome = match (lang == pivot, dict) {
            (true, d) => TranslateTestOutcome::Ok {
                report: evaluate_language(params, vocab, &lang, &exs, d)?,
            },
            (false, Some(d)) => TranslateTestOutcome::Ok {
                report: evaluate_language(params, vocab, &lang, &exs, Some(d))?,
            },
            (false, None) => {
                log::warn!("no dictionary from `{lang}` into `{pivot}`; reporting n/a");
                TranslateTestOutcome::NotAvailable { lang }
            }
        };
        out.push(outcome);
    }
    Ok(out)
}
