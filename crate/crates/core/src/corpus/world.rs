//! Seeded synthetic multilingual image-caption world.
//!
//! Every concept is a set of distinct attribute ids. Its latent vector is the
//! sum of per-attribute prototypes and its image is the latent plus Gaussian
//! noise. A caption renders each attribute as a language-specific token;
//! languages in the same family share a seeded subset of tokens (cognates).
//! Ground-truth alignment is therefore known exactly for retrieval and for
//! the generated bilingual dictionaries.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use rand::seq::{index, IndexedRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{
    text_ref_id, write_image_text_file, write_rating_file, write_translation_file, BilingualDictionary,
    ImageTextExample, Modality, RatingRecord, TranslationExample,
};
use crate::{Error, Result};

pub const TRAIN_I2T_FILE: &str = "train_i2t.jsonl";
pub const TRAIN_T2T_FILE: &str = "train_t2t.jsonl";
pub const EVAL_I2T_FILE: &str = "eval_i2t.jsonl";
pub const RATINGS_FILE: &str = "ratings.jsonl";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticWorldConfig {
    /// Training concepts. Held-out concepts are counted separately.
    pub n_concepts: usize,
    pub n_eval_concepts: usize,
    pub n_attributes: usize,
    pub d_img: usize,
    /// The first language is the pivot for dictionaries and translate-test.
    pub languages: Vec<String>,
    pub tokens_per_caption: usize,
    pub noise_sigma: f64,
    /// Fraction of training concepts that get an image-caption pair per language.
    pub i2t_coverage: BTreeMap<String, f64>,
    /// Language family labels; a language without an entry is its own family.
    pub families: BTreeMap<String, String>,
    /// Probability that an attribute token is shared by all languages of a family.
    pub cognate_rate: f64,
    pub ratings_per_bucket: usize,
    pub seed: u64,
}

impl Default for SyntheticWorldConfig {
    fn default() -> Self {
        let languages: Vec<String> = (0..5).map(|i| format!("l{i}")).collect();
        let i2t_coverage = languages
            .iter()
            .map(|l| (l.clone(), if l == "l4" { 0.02 } else { 1.0 }))
            .collect();
        let families = [("l0", "fa"), ("l1", "fa"), ("l2", "fb"), ("l3", "fb"), ("l4", "fc")]
            .into_iter()
            .map(|(l, f)| (l.to_string(), f.to_string()))
            .collect();
        Self {
            n_concepts: 500,
            n_eval_concepts: 100,
            n_attributes: 64,
            d_img: 16,
            languages,
            tokens_per_caption: 4,
            noise_sigma: 0.3,
            i2t_coverage,
            families,
            cognate_rate: 0.5,
            ratings_per_bucket: 200,
            seed: 0,
        }
    }
}

impl SyntheticWorldConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        if self.languages.len() < 2 {
            return fail("world.languages needs at least 2 languages".into());
        }
        let mut seen = self.languages.clone();
        seen.sort();
        seen.dedup();
        if seen.len() != self.languages.len() {
            return fail("world.languages contains duplicates".into());
        }
        for lang in &self.languages {
            if lang.is_empty() || !lang.chars().all(|c| c.is_ascii_alphanumeric()) {
                return fail(format!("language code `{lang}` must be non-empty ASCII alphanumeric"));
            }
            match self.i2t_coverage.get(lang) {
                None => return fail(format!("world.i2t_coverage missing language `{lang}`")),
                Some(c) if !(0.0..=1.0).contains(c) => {
                    return fail(format!("world.i2t_coverage for `{lang}` = {c} outside [0, 1]"))
                }
                _ => {}
            }
        }
        if self.n_concepts == 0 || self.d_img == 0 || self.tokens_per_caption == 0 {
            return fail("world.n_concepts, world.d_img and world.tokens_per_caption must be positive".into());
        }
        if self.tokens_per_caption > self.n_attributes {
            return fail("world.tokens_per_caption exceeds world.n_attributes".into());
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return fail("world.noise_sigma must be a finite nonnegative real".into());
        }
        if !(0.0..=1.0).contains(&self.cognate_rate) {
            return fail("world.cognate_rate must lie in [0, 1]".into());
        }
        Ok(())
    }

    pub fn pivot(&self) -> &str {
        &self.languages[0]
    }

    pub fn family_of<'a>(&'a self, lang: &'a str) -> &'a str {
        self.families.get(lang).map(String::as_str).unwrap_or(lang)
    }
}

/// Generated corpora. Maps are keyed by language (or `left-right` language pair).
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticWorld {
    pub config: SyntheticWorldConfig,
    pub train_i2t: BTreeMap<String, Vec<ImageTextExample>>,
    pub train_t2t: BTreeMap<String, Vec<TranslationExample>>,
    pub eval_i2t: BTreeMap<String, Vec<ImageTextExample>>,
    pub ratings: Vec<RatingRecord>,
    /// One dictionary from every non-pivot language into the pivot.
    pub dictionaries: Vec<BilingualDictionary>,
    pub train_concepts: Vec<usize>,
    pub eval_concepts: Vec<usize>,
    /// Noise-free latent vector of every concept, indexed by concept id.
    pub latents: Vec<Vec<f64>>,
}

pub fn image_id(concept: usize) -> String {
    format!("img{concept:05}")
}

fn render_token(lang: &str, family: &str, attr: usize, cognate: bool) -> String {
    if cognate {
        format!("{family}w{attr}")
    } else {
        format!("{lang}w{attr}")
    }
}

fn round6(x: f64) -> f64 {
    (x * 1e6).round() / 1e6
}

fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}

pub fn generate_world(cfg: &SyntheticWorldConfig) -> Result<SyntheticWorld> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let proto_sd = 1.0 / (cfg.tokens_per_caption as f64).sqrt();
    let proto_dist = Normal::new(0.0, proto_sd).expect("positive sd");
    let noise = Normal::new(0.0, cfg.noise_sigma).expect("nonnegative sd");

    let prototypes: Vec<Vec<f64>> = (0..cfg.n_attributes)
        .map(|_| (0..cfg.d_img).map(|_| proto_dist.sample(&mut rng)).collect())
        .collect();

    // Cognate decisions per (family, attribute), drawn in sorted family order.
    let mut family_members: BTreeMap<&str, usize> = BTreeMap::new();
    for lang in &cfg.languages {
        *family_members.entry(cfg.family_of(lang)).or_default() += 1;
    }
    let mut cognates: BTreeMap<&str, Vec<bool>> = BTreeMap::new();
    for (&family, &members) in &family_members {
        let flags = (0..cfg.n_attributes)
            .map(|_| {
                let draw: f64 = rng.random();
                members > 1 && draw < cfg.cognate_rate
            })
            .collect();
        cognates.insert(family, flags);
    }
    let lexicon: BTreeMap<&str, Vec<String>> = cfg
        .languages
        .iter()
        .map(|lang| {
            let family = cfg.family_of(lang);
            let toks = (0..cfg.n_attributes)
                .map(|a| render_token(lang, family, a, cognates[family][a]))
                .collect();
            (lang.as_str(), toks)
        })
        .collect();

    let total = cfg.n_concepts + cfg.n_eval_concepts;
    let mut attributes = Vec::with_capacity(total);
    let mut latents = Vec::with_capacity(total);
    let mut images = Vec::with_capacity(total);
    for _ in 0..total {
        let attrs = index::sample(&mut rng, cfg.n_attributes, cfg.tokens_per_caption).into_vec();
        let mut latent = vec![0.0; cfg.d_img];
        for &a in &attrs {
            for (l, p) in latent.iter_mut().zip(&prototypes[a]) {
                *l += p;
            }
        }
        let image: Vec<f64> = latent.iter().map(|&l| round6(l + noise.sample(&mut rng))).collect();
        attributes.push(attrs);
        latents.push(latent);
        images.push(image);
    }
    let train_concepts: Vec<usize> = (0..cfg.n_concepts).collect();
    let eval_concepts: Vec<usize> = (cfg.n_concepts..total).collect();

    let caption = |lang: &str, k: usize| -> String {
        attributes[k]
            .iter()
            .map(|&a| lexicon[lang][a].as_str())
            .collect::<Vec<_>>()
            .join(" ")
    };
    let example = |lang: &str, k: usize| ImageTextExample {
        image_id: image_id(k),
        features: images[k].clone(),
        caption: caption(lang, k),
        lang: lang.to_string(),
    };

    let mut train_i2t = BTreeMap::new();
    for lang in &cfg.languages {
        let count = (cfg.i2t_coverage[lang] * cfg.n_concepts as f64).floor() as usize;
        let mut chosen = index::sample(&mut rng, cfg.n_concepts, count).into_vec();
        chosen.sort_unstable();
        let recs = chosen.into_iter().map(|k| example(lang, train_concepts[k])).collect();
        train_i2t.insert(lang.clone(), recs);
    }

    let mut train_t2t = BTreeMap::new();
    for (i, left) in cfg.languages.iter().enumerate() {
        for right in &cfg.languages[i + 1..] {
            let pairs = train_concepts
                .iter()
                .map(|&k| TranslationExample {
                    left: caption(left, k),
                    left_lang: left.clone(),
                    right: caption(right, k),
                    right_lang: right.clone(),
                })
                .collect();
            train_t2t.insert(format!("{left}-{right}"), pairs);
        }
    }

    let eval_i2t = cfg
        .languages
        .iter()
        .map(|lang| (lang.clone(), eval_concepts.iter().map(|&k| example(lang, k)).collect()))
        .collect();

    let mut ratings = Vec::new();
    if eval_concepts.len() >= 2 {
        for (a_type, b_type) in [
            (Modality::Text, Modality::Text),
            (Modality::Image, Modality::Image),
            (Modality::Image, Modality::Text),
        ] {
            for _ in 0..cfg.ratings_per_bucket {
                let picked = index::sample(&mut rng, eval_concepts.len(), 2);
                let (ka, kb) = (eval_concepts[picked.index(0)], eval_concepts[picked.index(1)]);
                let mut item_id = |m: Modality, k: usize| match m {
                    Modality::Image => image_id(k),
                    Modality::Text => {
                        let lang = cfg.languages.choose(&mut rng).expect("languages non-empty");
                        text_ref_id(&image_id(k), lang)
                    }
                };
                let a_id = item_id(a_type, ka);
                let b_id = item_id(b_type, kb);
                ratings.push(RatingRecord {
                    a_type,
                    a_id,
                    b_type,
                    b_id,
                    score: round6(cosine(&latents[ka], &latents[kb])),
                });
            }
        }
    }

    let pivot = cfg.pivot();
    let dictionaries = cfg.languages[1..]
        .iter()
        .map(|lang| {
            let entries = lexicon[lang.as_str()]
                .iter()
                .cloned()
                .zip(lexicon[pivot].iter().cloned());
            BilingualDictionary::new(lang.clone(), pivot, entries)
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(SyntheticWorld {
        config: cfg.clone(),
        train_i2t,
        train_t2t,
        eval_i2t,
        ratings,
        dictionaries,
        train_concepts,
        eval_concepts,
        latents,
    })
}

impl SyntheticWorld {
    pub fn pivot(&self) -> &str {
        self.config.pivot()
    }

    pub fn all_train_i2t(&self) -> Vec<ImageTextExample> {
        self.train_i2t.values().flatten().cloned().collect()
    }

    pub fn all_train_t2t(&self) -> Vec<TranslationExample> {
        self.train_t2t.values().flatten().cloned().collect()
    }

    pub fn all_eval_i2t(&self) -> Vec<ImageTextExample> {
        self.eval_i2t.values().flatten().cloned().collect()
    }

    pub fn dictionary(&self, src_lang: &str) -> Option<&BilingualDictionary> {
        self.dictionaries.iter().find(|d| d.src_lang == src_lang)
    }

    /// Writes every corpus file into `dir` (created if needed).
    pub fn write(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        write_image_text_file(&dir.join(TRAIN_I2T_FILE), &self.all_train_i2t())?;
        write_translation_file(&dir.join(TRAIN_T2T_FILE), &self.all_train_t2t())?;
        write_image_text_file(&dir.join(EVAL_I2T_FILE), &self.all_eval_i2t())?;
        write_rating_file(&dir.join(RATINGS_FILE), &self.ratings)?;
        for d in &self.dictionaries {
            d.write(&dir.join(BilingualDictionary::file_name(&d.src_lang, &d.tgt_lang)))?;
        }
        Ok(())
    }
}
