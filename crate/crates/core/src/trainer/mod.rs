//! Training loop: warmup/decay schedule, adaptive-moment updates with
//! decoupled weight decay, per-task learning rates and fine-tuning mode.

mod checkpoint;
mod data;

pub use checkpoint::{config_hash, load_checkpoint, save_checkpoint, Checkpoint, CHECKPOINT_MAGIC};
pub use data::{encode_image_text, encode_translations, BatchSampler, EncodedImageText, EncodedTranslation, TrainingSet};

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::loss::{task_gradient, ImageTextBatch, LossConfig, LossOutput, TextTextBatch};
use crate::model::{BlockKind, Head, ModelParams, BLOCKS};
use crate::{Error, Result, Scalar};

pub const BETA1: f64 = 0.9;
pub const BETA2: f64 = 0.999;
pub const EPSILON: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrainMode {
    Multitask,
    /// Only image-text terms drive updates; the text-text head is frozen
    /// apart from weight decay.
    FinetuneI2t,
}

impl std::str::FromStr for TrainMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "multitask" => Ok(Self::Multitask),
            "finetune_i2t" => Ok(Self::FinetuneI2t),
            other => Err(Error::Config(format!(
                "train.mode must be `multitask` or `finetune_i2t`, got `{other}`"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub total_steps: usize,
    pub warmup_steps: usize,
    pub lr_i2t: f64,
    pub lr_t2t: f64,
    pub weight_decay: f64,
    pub batch_size: usize,
    pub seed: u64,
    pub mode: TrainMode,
    /// Emit a log record every this many steps (and on the first and last step).
    pub log_every: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            total_steps: 2000,
            warmup_steps: 100,
            lr_i2t: 1e-3,
            lr_t2t: 1e-4,
            weight_decay: 1e-5,
            batch_size: 32,
            seed: 0,
            mode: TrainMode::Multitask,
            log_every: 100,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.warmup_steps >= self.total_steps {
            return Err(Error::Config(format!(
                "train.warmup_steps ({}) must be below train.total_steps ({})",
                self.warmup_steps, self.total_steps
            )));
        }
        if !(self.lr_i2t > 0.0 && self.lr_t2t > 0.0) {
            return Err(Error::Config("learning rates must be positive".into()));
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return Err(Error::Config("train.weight_decay must be nonnegative".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("train.batch_size must be positive".into()));
        }
        Ok(())
    }
}

/// Schedule multiplier in [0, 1]: linear warmup from zero to one at
/// `warmup_steps`, then linear decay to zero at `total_steps`.
pub fn lr_at(step: usize, cfg: &TrainConfig) -> Result<f64> {
    if step > cfg.total_steps {
        return Err(Error::invalid(format!(
            "step {step} outside schedule of {} steps",
            cfg.total_steps
        )));
    }
    if cfg.warmup_steps >= cfg.total_steps {
        return Err(Error::Config("warmup must end before the last step".into()));
    }
    if step < cfg.warmup_steps || (step == cfg.warmup_steps && cfg.warmup_steps > 0) {
        Ok(step as f64 / cfg.warmup_steps as f64)
    } else {
        Ok((cfg.total_steps - step) as f64 / (cfg.total_steps - cfg.warmup_steps) as f64)
    }
}

/// First and second moment accumulators mirroring the parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState<T> {
    pub m: ModelParams<T>,
    pub v: ModelParams<T>,
    pub step: u64,
}

impl<T: Scalar> OptimizerState<T> {
    pub fn new(params: &ModelParams<T>) -> Self {
        let dims = params.dims();
        Self {
            m: ModelParams::zeros(&dims),
            v: ModelParams::zeros(&dims),
            step: 0,
        }
    }
}

/// Applies one optimizer update from a precomputed gradient.
///
/// `frozen_head` blocks skip the moment update and get only weight decay.
pub fn apply_update<T: Scalar>(
    params: &mut ModelParams<T>,
    state: &mut OptimizerState<T>,
    grads: &ModelParams<T>,
    step_size: f64,
    weight_decay: f64,
    frozen_head: Option<Head>,
) {
    state.step += 1;
    let t = state.step as i32;
    let (b1, b2) = (T::lit(BETA1), T::lit(BETA2));
    let bias1 = T::one() - b1.powi(t);
    let bias2 = T::one() - b2.powi(t);
    let eps = T::lit(EPSILON);
    let alpha = T::lit(step_size);
    let shrink = T::lit(step_size * weight_decay);

    let grads = grads.blocks();
    let ms = state.m.blocks_mut();
    let vs = state.v.blocks_mut();
    let ps = params.blocks_mut();
    for ((((info, p), g), m), v) in BLOCKS.iter().zip(ps).zip(grads).zip(ms).zip(vs) {
        let decay = info.kind == BlockKind::Matrix && weight_decay > 0.0;
        let frozen = frozen_head.is_some() && info.head == frozen_head;
        for (((theta, &g), m), v) in p.iter_mut().zip(g).zip(m.iter_mut()).zip(v.iter_mut()) {
            let mut next = *theta;
            if decay {
                next = next - shrink * *theta;
            }
            if !frozen {
                *m = b1 * *m + (T::one() - b1) * g;
                *v = b2 * *v + (T::one() - b2) * g * g;
                let m_hat = *m / bias1;
                let v_hat = *v / bias2;
                next = next - alpha * m_hat / (v_hat.sqrt() + eps);
            }
            *theta = next;
        }
    }
}

/// One optimization step at schedule position `step`.
///
/// The image-text terms are weighted by `w_i2t` and the text-text terms by
/// `w_t2t * lr_t2t / lr_i2t` before the shared moment update; the step size
/// is `lr_i2t * lr_at(step)`. In fine-tuning mode `t2t` is ignored.
pub fn train_step<T: Scalar>(
    params: &mut ModelParams<T>,
    state: &mut OptimizerState<T>,
    i2t: &ImageTextBatch<T>,
    t2t: Option<&TextTextBatch>,
    cfg: &TrainConfig,
    loss_cfg: &LossConfig,
    step: usize,
) -> Result<LossOutput<T>> {
    let multiplier = lr_at(step, cfg)?;
    let (t2t, frozen) = match cfg.mode {
        TrainMode::Multitask => (t2t, None),
        TrainMode::FinetuneI2t => (None, Some(Head::T2t)),
    };
    let coef_i2t = T::lit(loss_cfg.w_i2t);
    let coef_t2t = T::lit(loss_cfg.w_t2t * cfg.lr_t2t / cfg.lr_i2t);
    let (terms, grads) = task_gradient(params, i2t, t2t, loss_cfg, coef_i2t, coef_t2t)?;
    for (info, block) in BLOCKS.iter().zip(grads.blocks()) {
        if block.iter().any(|g| !g.is_finite()) {
            return Err(Error::NonFiniteGradient {
                step,
                block: info.name,
            });
        }
    }
    apply_update(params, state, &grads, cfg.lr_i2t * multiplier, cfg.weight_decay, frozen);
    Ok(LossOutput {
        total: terms.total(loss_cfg),
        terms,
        grads,
    })
}

/// One training-log line.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogRecord {
    pub step: usize,
    pub total: f64,
    pub l_i2t: f64,
    pub l_t2i: f64,
    pub l_r2l: f64,
    pub l_l2r: f64,
    pub lr_multiplier: f64,
    pub tau: f64,
}

pub fn write_log(path: &Path, records: &[LogRecord]) -> Result<()> {
    let mut out = Vec::new();
    for r in records {
        serde_json::to_writer(&mut out, r).expect("log record serializes");
        out.write_all(b"\n").expect("in-memory write");
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Runs steps `1..=total_steps`, returning the log records.
pub fn train<T: Scalar>(
    params: &mut ModelParams<T>,
    state: &mut OptimizerState<T>,
    data: &TrainingSet,
    cfg: &TrainConfig,
    loss_cfg: &LossConfig,
) -> Result<Vec<LogRecord>> {
    cfg.validate()?;
    loss_cfg.validate()?;
    if data.i2t.is_empty() {
        return Err(Error::invalid("no image-text training pairs"));
    }
    // A zero text-text weight contributes nothing to the gradient, so those
    // batches are skipped and their loss terms log as zero.
    let use_t2t = cfg.mode == TrainMode::Multitask && !data.t2t.is_empty() && loss_cfg.w_t2t > 0.0;
    let mut sampler = BatchSampler::new(cfg.seed);
    let mut log = Vec::new();
    for step in 1..=cfg.total_steps {
        let i2t = sampler.next_image_text::<T>(&data.i2t, cfg.batch_size);
        let t2t = use_t2t.then(|| sampler.next_translation(&data.t2t, cfg.batch_size));
        let out = train_step(params, state, &i2t, t2t.as_ref(), cfg, loss_cfg, step)?;
        if step == 1 || step == cfg.total_steps || (cfg.log_every > 0 && step % cfg.log_every == 0) {
            log.push(LogRecord {
                step,
                total: out.total.as_f64(),
                l_i2t: out.terms.l_i2t.as_f64(),
                l_t2i: out.terms.l_t2i.as_f64(),
                l_r2l: out.terms.l_r2l.as_f64(),
                l_l2r: out.terms.l_l2r.as_f64(),
                lr_multiplier: lr_at(step, cfg)?,
                tau: params.tau().as_f64(),
            });
            log::debug!("step {step}: total {:.5}", out.total.as_f64());
        }
    }
    Ok(log)
}
