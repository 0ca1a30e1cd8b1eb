//! Multitask dual-encoder contrastive learning.
//!
//! A text encoder shared between an image-text matching task and a
//! text-text (translation pair) matching task, each with its own projection
//! head, trained with in-batch softmax losses. Around the model sit a
//! synthetic multilingual corpus generator, retrieval and correlation
//! evaluation, and SVCCA / Laplacian-eigenmap representation analysis.
//!
//! All numerical code is generic over [`Scalar`] (`f32` or `f64`). Training
//! and checkpoints use `f32`; gradient checks run in `f64`.

pub mod analysis;
pub mod config;
pub mod corpus;
pub mod error;
pub mod evaluation;
pub mod experiment;
pub mod loss;
pub mod model;
pub mod scalar;
pub mod trainer;

pub use error::{Error, Result};
pub use scalar::Scalar;

/// Parameters in single precision, the type used for training and checkpoints.
pub type ParamsF32 = model::ModelParams<f32>;
/// Parameters in double precision, used for gradient verification.
pub type ParamsF64 = model::ModelParams<f64>;
pub type OptimizerStateF32 = trainer::OptimizerState<f32>;
pub type LossOutputF32 = loss::LossOutput<f32>;
pub type LossOutputF64 = loss::LossOutput<f64>;
pub type ImageTextBatchF32 = loss::ImageTextBatch<f32>;
pub type ImageTextBatchF64 = loss::ImageTextBatch<f64>;
