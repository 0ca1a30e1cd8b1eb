//! Flat `section.key = value` run configuration.
//!
//! Files hold one assignment per line; `#` starts a comment. Command-line
//! overrides use the same `key=value` form and are applied after the file.
//! Unknown keys are rejected.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::analysis::{RepresentationSource, DEFAULT_RIDGE, DEFAULT_VARIANCE_THRESHOLD};
use crate::corpus::SyntheticWorldConfig;
use crate::loss::LossConfig;
use crate::model::{Head, ModelDims};
use crate::trainer::{TrainConfig, TrainMode};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct EvalSettings {
    pub text_head: Head,
    pub correlations: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnalysisSettings {
    pub variance_threshold: f64,
    pub ridge: f64,
    pub source: RepresentationSource,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PathSettings {
    pub data_dir: PathBuf,
    pub checkpoint: PathBuf,
    pub log: PathBuf,
    pub report: PathBuf,
    pub translate_report: PathBuf,
    pub svcca: PathBuf,
    pub map: PathBuf,
    pub plot: PathBuf,
    pub sweep_dir: PathBuf,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub world: SyntheticWorldConfig,
    pub model: ModelDims,
    pub loss: LossConfig,
    pub train: TrainConfig,
    /// Checkpoint to continue from instead of a fresh initialization.
    pub init_checkpoint: Option<PathBuf>,
    /// Keep image-caption pairs only for these languages (empty = all).
    pub i2t_languages: Vec<String>,
    pub translate_train: bool,
    pub eval: EvalSettings,
    pub analysis: AnalysisSettings,
    pub paths: PathSettings,
    pub sweep_w_t2t: Vec<f64>,
    /// Values exactly as written by the user, by key.
    provided: BTreeMap<String, String>,
}

impl Default for RunConfig {
    fn default() -> Self {
        let out = PathBuf::from("out");
        Self {
            world: SyntheticWorldConfig::default(),
            model: ModelDims::default(),
            loss: LossConfig::default(),
            train: TrainConfig::default(),
            init_checkpoint: None,
            i2t_languages: Vec::new(),
            translate_train: false,
            eval: EvalSettings {
                text_head: Head::I2t,
                correlations: true,
            },
            analysis: AnalysisSettings {
                variance_threshold: DEFAULT_VARIANCE_THRESHOLD,
                ridge: DEFAULT_RIDGE,
                source: RepresentationSource::I2tHead,
            },
            paths: PathSettings {
                data_dir: PathBuf::from("data"),
                checkpoint: out.join("model.ckpt"),
                log: out.join("train_log.jsonl"),
                report: out.join("metrics.json"),
                translate_report: out.join("translate_test.json"),
                svcca: out.join("svcca.json"),
                map: out.join("eigenmap.json"),
                plot: out.join("eigenmap.svg"),
                sweep_dir: out.join("sweep"),
            },
            sweep_w_t2t: vec![0.0, 0.05, 0.1, 1.0],
            provided: BTreeMap::new(),
        }
    }
}

pub const KEYS: &[&str] = &[
    "world.n_concepts",
    "world.n_eval_concepts",
    "world.n_attributes",
    "world.d_img",
    "world.languages",
    "world.tokens_per_caption",
    "world.noise_sigma",
    "world.i2t_coverage",
    "world.families",
    "world.cognate_rate",
    "world.ratings_per_bucket",
    "world.seed",
    "model.vocab_size",
    "model.d_emb",
    "model.d_hidden",
    "model.d_joint",
    "model.d_img",
    "loss.w_i2t",
    "loss.w_t2t",
    "loss.tau_t2t",
    "loss.margin",
    "train.total_steps",
    "train.warmup_steps",
    "train.lr_i2t",
    "train.lr_t2t",
    "train.weight_decay",
    "train.batch_size",
    "train.seed",
    "train.mode",
    "train.log_every",
    "train.init_checkpoint",
    "train.i2t_languages",
    "train.translate_train",
    "eval.text_head",
    "eval.correlations",
    "analysis.variance_threshold",
    "analysis.ridge",
    "analysis.source",
    "paths.data_dir",
    "paths.checkpoint",
    "paths.log",
    "paths.report",
    "paths.translate_report",
    "paths.svcca",
    "paths.map",
    "paths.plot",
    "paths.sweep_dir",
    "sweep.w_t2t",
];

fn parse<T: FromStr>(key: &str, v: &str) -> Result<T>
where
    T::Err: Display,
{
    v.parse()
        .map_err(|e| Error::Config(format!("{key}: cannot parse `{v}`: {e}")))
}

fn parse_list(v: &str) -> Vec<String> {
    v.split(',').map(str::trim).filter(|s| !s.is_empty()).map(String::from).collect()
}

fn parse_map(key: &str, v: &str) -> Result<BTreeMap<String, String>> {
    parse_list(v)
        .into_iter()
        .map(|item| {
            let (k, val) = item
                .split_once(':')
                .ok_or_else(|| Error::Config(format!("{key}: expected `lang:value` entries, got `{item}`")))?;
            Ok((k.trim().to_string(), val.trim().to_string()))
        })
        .collect()
}

fn join<T: Display>(items: impl IntoIterator<Item = T>) -> String {
    items.into_iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

fn head_name(h: Head) -> &'static str {
    match h {
        Head::I2t => "i2t",
        Head::T2t => "t2t",
    }
}

fn source_name(s: RepresentationSource) -> &'static str {
    match s {
        RepresentationSource::I2tHead => "i2t_head",
        RepresentationSource::T2tHead => "t2t_head",
        RepresentationSource::Trunk => "trunk",
    }
}

fn path_str(p: &Path) -> String {
    p.to_string_lossy().into_owned()
}

impl RunConfig {
    /// Assigns one key from its textual value.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        let w = &mut self.world;
        match key {
            "world.n_concepts" => w.n_concepts = parse(key, v)?,
            "world.n_eval_concepts" => w.n_eval_concepts = parse(key, v)?,
            "world.n_attributes" => w.n_attributes = parse(key, v)?,
            "world.d_img" => w.d_img = parse(key, v)?,
            "world.languages" => w.languages = parse_list(v),
            "world.tokens_per_caption" => w.tokens_per_caption = parse(key, v)?,
            "world.noise_sigma" => w.noise_sigma = parse(key, v)?,
            "world.i2t_coverage" => {
                w.i2t_coverage = parse_map(key, v)?
                    .into_iter()
                    .map(|(l, c)| Ok((l, parse(key, &c)?)))
                    .collect::<Result<_>>()?
            }
            "world.families" => w.families = parse_map(key, v)?,
            "world.cognate_rate" => w.cognate_rate = parse(key, v)?,
            "world.ratings_per_bucket" => w.ratings_per_bucket = parse(key, v)?,
            "world.seed" => w.seed = parse(key, v)?,
            "model.vocab_size" => self.model.vocab_size = parse(key, v)?,
            "model.d_emb" => self.model.d_emb = parse(key, v)?,
            "model.d_hidden" => self.model.d_hidden = parse(key, v)?,
            "model.d_joint" => self.model.d_joint = parse(key, v)?,
            "model.d_img" => self.model.d_img = parse(key, v)?,
            "loss.w_i2t" => self.loss.w_i2t = parse(key, v)?,
            "loss.w_t2t" => self.loss.w_t2t = parse(key, v)?,
            "loss.tau_t2t" => self.loss.tau_t2t = parse(key, v)?,
            "loss.margin" => self.loss.margin = parse(key, v)?,
            "train.total_steps" => self.train.total_steps = parse(key, v)?,
            "train.warmup_steps" => self.train.warmup_steps = parse(key, v)?,
            "train.lr_i2t" => self.train.lr_i2t = parse(key, v)?,
            "train.lr_t2t" => self.train.lr_t2t = parse(key, v)?,
            "train.weight_decay" => self.train.weight_decay = parse(key, v)?,
            "train.batch_size" => self.train.batch_size = parse(key, v)?,
            "train.seed" => self.train.seed = parse(key, v)?,
            "train.mode" => self.train.mode = v.parse::<TrainMode>()?,
            "train.log_every" => self.train.log_every = parse(key, v)?,
            "train.init_checkpoint" => self.init_checkpoint = (!v.is_empty()).then(|| PathBuf::from(v)),
            "train.i2t_languages" => self.i2t_languages = parse_list(v),
            "train.translate_train" => self.translate_train = parse(key, v)?,
            "eval.text_head" => {
                self.eval.text_head = match v {
                    "i2t" => Head::I2t,
                    "t2t" => Head::T2t,
                    _ => return Err(Error::Config(format!("{key} must be `i2t` or `t2t`, got `{v}`"))),
                }
            }
            "eval.correlations" => self.eval.correlations = parse(key, v)?,
            "analysis.variance_threshold" => self.analysis.variance_threshold = parse(key, v)?,
            "analysis.ridge" => self.analysis.ridge = parse(key, v)?,
            "analysis.source" => self.analysis.source = v.parse()?,
            "paths.data_dir" => self.paths.data_dir = v.into(),
            "paths.checkpoint" => self.paths.checkpoint = v.into(),
            "paths.log" => self.paths.log = v.into(),
            "paths.report" => self.paths.report = v.into(),
            "paths.translate_report" => self.paths.translate_report = v.into(),
            "paths.svcca" => self.paths.svcca = v.into(),
            "paths.map" => self.paths.map = v.into(),
            "paths.plot" => self.paths.plot = v.into(),
            "paths.sweep_dir" => self.paths.sweep_dir = v.into(),
            "sweep.w_t2t" => {
                self.sweep_w_t2t = parse_list(v).iter().map(|x| parse(key, x)).collect::<Result<_>>()?
            }
            _ => return Err(Error::Config(format!("unknown configuration key `{key}`"))),
        }
        self.provided.insert(key.to_string(), v.to_string());
        Ok(())
    }

    /// Current value of `key` in configuration syntax.
    pub fn get(&self, key: &str) -> Result<String> {
        if let Some(v) = self.provided.get(key) {
            return Ok(v.clone());
        }
        let w = &self.world;
        let s = match key {
            "world.n_concepts" => w.n_concepts.to_string(),
            "world.n_eval_concepts" => w.n_eval_concepts.to_string(),
            "world.n_attributes" => w.n_attributes.to_string(),
            "world.d_img" => w.d_img.to_string(),
            "world.languages" => w.languages.join(","),
            "world.tokens_per_caption" => w.tokens_per_caption.to_string(),
            "world.noise_sigma" => w.noise_sigma.to_string(),
            "world.i2t_coverage" => join(w.i2t_coverage.iter().map(|(l, c)| format!("{l}:{c}"))),
            "world.families" => join(w.families.iter().map(|(l, f)| format!("{l}:{f}"))),
            "world.cognate_rate" => w.cognate_rate.to_string(),
            "world.ratings_per_bucket" => w.ratings_per_bucket.to_string(),
            "world.seed" => w.seed.to_string(),
            "model.vocab_size" => self.model.vocab_size.to_string(),
            "model.d_emb" => self.model.d_emb.to_string(),
            "model.d_hidden" => self.model.d_hidden.to_string(),
            "model.d_joint" => self.model.d_joint.to_string(),
            "model.d_img" => self.model.d_img.to_string(),
            "loss.w_i2t" => self.loss.w_i2t.to_string(),
            "loss.w_t2t" => self.loss.w_t2t.to_string(),
            "loss.tau_t2t" => self.loss.tau_t2t.to_string(),
            "loss.margin" => self.loss.margin.to_string(),
            "train.total_steps" => self.train.total_steps.to_string(),
            "train.warmup_steps" => self.train.warmup_steps.to_string(),
            "train.lr_i2t" => self.train.lr_i2t.to_string(),
            "train.lr_t2t" => self.train.lr_t2t.to_string(),
            "train.weight_decay" => self.train.weight_decay.to_string(),
            "train.batch_size" => self.train.batch_size.to_string(),
            "train.seed" => self.train.seed.to_string(),
            "train.mode" => match self.train.mode {
                TrainMode::Multitask => "multitask".into(),
                TrainMode::FinetuneI2t => "finetune_i2t".into(),
            },
            "train.log_every" => self.train.log_every.to_string(),
            "train.init_checkpoint" => self.init_checkpoint.as_deref().map(path_str).unwrap_or_default(),
            "train.i2t_languages" => self.i2t_languages.join(","),
            "train.translate_train" => self.translate_train.to_string(),
            "eval.text_head" => head_name(self.eval.text_head).into(),
            "eval.correlations" => self.eval.correlations.to_string(),
            "analysis.variance_threshold" => self.analysis.variance_threshold.to_string(),
            "analysis.ridge" => self.analysis.ridge.to_string(),
            "analysis.source" => source_name(self.analysis.source).into(),
            "paths.data_dir" => path_str(&self.paths.data_dir),
            "paths.checkpoint" => path_str(&self.paths.checkpoint),
            "paths.log" => path_str(&self.paths.log),
            "paths.report" => path_str(&self.paths.report),
            "paths.translate_report" => path_str(&self.paths.translate_report),
            "paths.svcca" => path_str(&self.paths.svcca),
            "paths.map" => path_str(&self.paths.map),
            "paths.plot" => path_str(&self.paths.plot),
            "paths.sweep_dir" => path_str(&self.paths.sweep_dir),
            "sweep.w_t2t" => join(&self.sweep_w_t2t),
            _ => return Err(Error::Config(format!("unknown configuration key `{key}`"))),
        };
        Ok(s)
    }

    /// The full merged configuration, every key present.
    pub fn to_map(&self) -> BTreeMap<String, String> {
        KEYS.iter()
            .map(|k| (k.to_string(), self.get(k).expect("listed keys are known")))
            .collect()
    }

    /// Applies the assignments in `text`; `origin` names the source in errors.
    pub fn apply_text(&mut self, text: &str, origin: &str) -> Result<()> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("{origin}:{}: expected `key = value`", i + 1)))?;
            self.set(k.trim(), v).map_err(|e| match e {
                Error::Config(m) => Error::Config(format!("{origin}:{}: {m}", i + 1)),
                other => other,
            })?;
        }
        Ok(())
    }

    /// Applies one `key=value` override.
    pub fn apply_override(&mut self, assignment: &str) -> Result<()> {
        let (k, v) = assignment
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("override `{assignment}` is not `key=value`")))?;
        self.set(k.trim(), v)
    }

    /// Defaults, then the optional file, then the overrides, then validation.
    pub fn load(file: Option<&Path>, overrides: &[String]) -> Result<Self> {
        let mut cfg = Self::default();
        if let Some(path) = file {
            let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            cfg.apply_text(&text, &path.display().to_string())?;
        }
        for o in overrides {
            cfg.apply_override(o)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.world.validate()?;
        self.model.validate()?;
        self.loss.validate()?;
        self.train.validate()?;
        if self.model.vocab_size < 2 {
            return Err(Error::Config("model.vocab_size must be at least 2".into()));
        }
        if !(self.analysis.variance_threshold > 0.0 && self.analysis.variance_threshold <= 1.0) {
            return Err(Error::Config("analysis.variance_threshold must lie in (0, 1]".into()));
        }
        if !(self.analysis.ridge >= 0.0 && self.analysis.ridge.is_finite()) {
            return Err(Error::Config("analysis.ridge must be finite and nonnegative".into()));
        }
        if self.sweep_w_t2t.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::Config("sweep.w_t2t values must be finite and nonnegative".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_key_round_trips() {
        let base = RunConfig::default();
        for key in KEYS {
            let mut c = RunConfig::default();
            let v = base.get(key).unwrap();
            c.set(key, &v).unwrap_or_else(|e| panic!("{key}: {e}"));
            let mut expect = base.clone();
            expect.provided.insert(key.to_string(), v.clone());
            assert_eq!(c, expect, "{key}");
        }
        assert_eq!(base.to_map().len(), KEYS.len());
    }

    #[test]
    fn file_then_overrides() {
        let mut c = RunConfig::default();
        c.apply_text("# comment\nloss.w_t2t = 0.5  # trailing\n\ntrain.total_steps=10\n", "f").unwrap();
        c.apply_override("loss.w_t2t=0.25").unwrap();
        assert_eq!(c.loss.w_t2t, 0.25);
        assert_eq!(c.train.total_steps, 10);
        assert_eq!(c.to_map()["loss.w_t2t"], "0.25");
    }

    #[test]
    fn unknown_key_named() {
        let mut c = RunConfig::default();
        let err = c.apply_text("loss.w_t2t = 0.1\nloss.bogus = 3\n", "cfg.txt").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("loss.bogus") && msg.contains("cfg.txt:2"), "{msg}");
        assert!(matches!(c.apply_override("nope=1"), Err(Error::Config(m)) if m.contains("nope")));
    }

    #[test]
    fn bad_values_rejected() {
        let mut c = RunConfig::default();
        assert!(c.set("train.total_steps", "many").is_err());
        assert!(c.set("eval.text_head", "x").is_err());
        assert!(c.set("world.i2t_coverage", "l0").is_err());
        assert!(c.apply_override("novalue").is_err());
        c.set("train.warmup_steps", "5000").unwrap();
        assert!(c.validate().is_err());
    }

    #[test]
    fn verbatim_values_echoed() {
        let mut c = RunConfig::default();
        c.set("train.lr_i2t", "1.0e-3").unwrap();
        assert_eq!(c.to_map()["train.lr_i2t"], "1.0e-3");
    }
}
