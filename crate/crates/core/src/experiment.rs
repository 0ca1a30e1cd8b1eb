//! End-to-end helpers shared by the command-line tool and the test suites:
//! vocabulary construction, training from corpora, and zero-shot reports.

use std::collections::BTreeMap;

use crate::corpus::{build_vocab, translate_train_augment, ImageTextExample, SyntheticWorld, TranslationExample, Vocabulary};
use crate::evaluation::{evaluate_split, EvalOptions, LanguageReport};
use crate::loss::LossConfig;
use crate::model::{ModelDims, ModelParams};
use crate::trainer::{train, LogRecord, OptimizerState, TrainConfig, TrainingSet};
use crate::{Error, Result};

/// Vocabulary over every caption and translation side, capped at `cap`
/// entries including the out-of-vocabulary token.
pub fn training_vocab(i2t: &[ImageTextExample], t2t: &[TranslationExample], cap: usize) -> Result<Vocabulary> {
    let texts = i2t
        .iter()
        .map(|e| e.caption.as_str())
        .chain(t2t.iter().flat_map(|p| [p.left.as_str(), p.right.as_str()]));
    build_vocab(texts, cap)
}

#[derive(Debug, Clone)]
pub struct TrainedModel {
    pub params: ModelParams<f32>,
    pub optimizer: OptimizerState<f32>,
    pub vocab: Vocabulary,
    pub log: Vec<LogRecord>,
}

/// Trains a fresh model (or continues from `init`) on the given corpora.
///
/// The embedding table is sized to the built vocabulary, which is at most
/// `dims.vocab_size` entries.
pub fn train_model(
    i2t: &[ImageTextExample],
    t2t: &[TranslationExample],
    dims: &ModelDims,
    train_cfg: &TrainConfig,
    loss_cfg: &LossConfig,
    init: Option<(ModelParams<f32>, OptimizerState<f32>, Vocabulary)>,
) -> Result<TrainedModel> {
    dims.validate()?;
    let (mut params, mut optimizer, vocab) = match init {
        Some((p, s, v)) => {
            if p.dims().d_img != dims.d_img {
                return Err(Error::Config(format!(
                    "initial checkpoint has d_img {}, configuration says {}",
                    p.dims().d_img,
                    dims.d_img
                )));
            }
            (p, s, v)
        }
        None => {
            let vocab = training_vocab(i2t, t2t, dims.vocab_size)?;
            let dims = ModelDims {
                vocab_size: vocab.len(),
                ..*dims
            };
            let p = ModelParams::init(&dims, train_cfg.seed);
            let s = OptimizerState::new(&p);
            (p, s, vocab)
        }
    };
    let data = TrainingSet::new(&vocab, i2t, t2t);
    let log = train(&mut params, &mut optimizer, &data, train_cfg, loss_cfg)?;
    Ok(TrainedModel {
        params,
        optimizer,
        vocab,
        log,
    })
}

/// Which parts of a synthetic world feed a training run.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct WorldTrainingOptions {
    /// Keep image-caption pairs only for these languages (all when `None`).
    pub i2t_languages: Option<Vec<String>>,
    /// Add pivot captions translated into every other language.
    pub translate_train: bool,
}

pub fn world_training_data(
    world: &SyntheticWorld,
    opts: &WorldTrainingOptions,
) -> (Vec<ImageTextExample>, Vec<TranslationExample>) {
    let keep = |lang: &str| opts.i2t_languages.as_ref().is_none_or(|ls| ls.iter().any(|l| l == lang));
    let mut i2t: Vec<ImageTextExample> = world
        .train_i2t
        .iter()
        .filter(|(lang, _)| keep(lang))
        .flat_map(|(_, v)| v.iter().cloned())
        .collect();
    if opts.translate_train {
        let from_pivot: Vec<_> = world.dictionaries.iter().map(|d| d.inverted()).collect();
        let extra = translate_train_augment(&i2t, &from_pivot);
        i2t.extend(extra);
    }
    (i2t, world.all_train_t2t())
}

/// Zero-shot retrieval on the world's held-out concepts, keyed by language.
pub fn zero_shot_reports(
    model: &TrainedModel,
    world: &SyntheticWorld,
    opts: &EvalOptions,
) -> Result<BTreeMap<String, LanguageReport>> {
    let reports = evaluate_split(&model.params, &model.vocab, &world.all_eval_i2t(), Some(world.pivot()), opts)?;
    Ok(reports.into_iter().map(|r| (r.lang.clone(), r)).collect())
}

/// Mean of the per-language mean recalls over `langs`.
pub fn average_mean_recall<'a>(reports: &BTreeMap<String, LanguageReport>, langs: impl IntoIterator<Item = &'a str>) -> f64 {
    let vals: Vec<f64> = langs.into_iter().filter_map(|l| reports.get(l)).map(|r| r.mean_recall).collect();
    if vals.is_empty() {
        return f64::NAN;
    }
    vals.iter().sum::<f64>() / vals.len() as f64
}
