//! In-batch softmax contrastive losses and their weighted multitask sum.
//!
//! For a square similarity matrix `S` whose diagonal holds the positive
//! pairs, each row contributes
//! `-log( exp((S_ii - m)/tau) / (exp((S_ii - m)/tau) + sum_{j != i} exp(S_ij/tau)) )`
//! and the loss is the row mean. The image-text terms use the learned
//! temperature `exp(log_tau)` with no margin; the text-text terms use a
//! fixed temperature and an additive margin on the positive logit.

use ndarray::{Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::model::{encode_images, encode_texts, Head, ImageForward, ModelParams, TextForward};
use crate::{Error, Result, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossConfig {
    pub w_i2t: f64,
    pub w_t2t: f64,
    pub tau_t2t: f64,
    pub margin: f64,
}

impl Default for LossConfig {
    fn default() -> Self {
        Self {
            w_i2t: 1.0,
            w_t2t: 0.1,
            tau_t2t: 0.01,
            margin: 0.3,
        }
    }
}

impl LossConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = |x: f64| x.is_finite() && x >= 0.0;
        if !(ok(self.w_i2t) && ok(self.w_t2t) && ok(self.margin)) {
            return Err(Error::Config("loss weights and margin must be finite and nonnegative".into()));
        }
        if !(self.tau_t2t > 0.0 && self.tau_t2t.is_finite()) {
            return Err(Error::Config("loss.tau_t2t must be positive".into()));
        }
        Ok(())
    }
}

/// Cosine similarities between two sets of unit-norm embeddings.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityMatrix<T> {
    pub values: Array2<T>,
    pub row_ids: Vec<String>,
    pub col_ids: Vec<String>,
}

impl<T: Scalar> SimilarityMatrix<T> {
    /// `rows` and `cols` must already be l2-normalized.
    pub fn from_embeddings(rows: ArrayView2<T>, cols: ArrayView2<T>) -> Self {
        Self {
            values: rows.dot(&cols.t()),
            row_ids: Vec::new(),
            col_ids: Vec::new(),
        }
    }

    pub fn with_ids(mut self, row_ids: Vec<String>, col_ids: Vec<String>) -> Self {
        self.row_ids = row_ids;
        self.col_ids = col_ids;
        self
    }

    pub fn transposed(&self) -> Self {
        Self {
            values: self.values.t().to_owned(),
            row_ids: self.col_ids.clone(),
            col_ids: self.row_ids.clone(),
        }
    }

    pub fn softmax_nce(&self, tau: T, margin: T) -> Result<T> {
        softmax_nce(self.values.view(), tau, margin)
    }
}

pub(crate) struct NceGrad<T> {
    pub loss: T,
    pub d_sim: Array2<T>,
    pub d_log_tau: T,
}

pub(crate) fn softmax_nce_grad<T: Scalar>(sim: ArrayView2<T>, tau: T, margin: T) -> Result<NceGrad<T>> {
    let n = sim.nrows();
    if n != sim.ncols() {
        return Err(Error::invalid(format!(
            "softmax loss needs a square similarity matrix, got {}x{}",
            n,
            sim.ncols()
        )));
    }
    if n == 0 {
        return Err(Error::invalid("empty similarity matrix"));
    }
    let inv_n = T::one() / T::lit(n as f64);
    let mut loss = T::zero();
    let mut d_log_tau = T::zero();
    let mut d_sim = Array2::zeros((n, n));
    let mut logits = vec![T::zero(); n];
    for i in 0..n {
        for (j, z) in logits.iter_mut().enumerate() {
            let s = if i == j { sim[[i, j]] - margin } else { sim[[i, j]] };
            *z = s / tau;
        }
        let max = logits.iter().copied().fold(T::neg_infinity(), T::max);
        let sum: T = logits.iter().map(|&z| (z - max).exp()).sum();
        let lse = max + sum.ln();
        loss = loss + (lse - logits[i]);
        for (j, &z) in logits.iter().enumerate() {
            let p = (z - lse).exp();
            let coeff = if i == j { p - T::one() } else { p };
            d_sim[[i, j]] = coeff * inv_n / tau;
            d_log_tau = d_log_tau - coeff * z * inv_n;
        }
    }
    Ok(NceGrad {
        loss: loss * inv_n,
        d_sim,
        d_log_tau,
    })
}

/// Mean in-batch softmax loss over the rows of a square similarity matrix.
pub fn softmax_nce<T: Scalar>(sim: ArrayView2<T>, tau: T, margin: T) -> Result<T> {
    softmax_nce_grad(sim, tau, margin).map(|g| g.loss)
}

/// Image features (N × d_img) paired row-wise with caption token ids.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageTextBatch<T> {
    pub images: Array2<T>,
    pub captions: Vec<Vec<usize>>,
}

impl<T: Scalar> ImageTextBatch<T> {
    pub fn len(&self) -> usize {
        self.captions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.captions.is_empty()
    }

    /// Reorders pairs: row `i` of the result is row `perm[i]` of `self`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        Self {
            images: self.images.select(Axis(0), perm),
            captions: perm.iter().map(|&i| self.captions[i].clone()).collect(),
        }
    }
}

/// Translation pairs as token ids.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TextTextBatch {
    pub left: Vec<Vec<usize>>,
    pub right: Vec<Vec<usize>>,
}

impl TextTextBatch {
    pub fn len(&self) -> usize {
        self.left.len()
    }

    pub fn is_empty(&self) -> bool {
        self.left.is_empty()
    }

    pub fn permuted(&self, perm: &[usize]) -> Self {
        Self {
            left: perm.iter().map(|&i| self.left[i].clone()).collect(),
            right: perm.iter().map(|&i| self.right[i].clone()).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LossTerms<T> {
    pub l_i2t: T,
    pub l_t2i: T,
    pub l_r2l: T,
    pub l_l2r: T,
}

impl<T: Scalar> LossTerms<T> {
    pub fn total(&self, cfg: &LossConfig) -> T {
        T::lit(cfg.w_i2t) * (self.l_i2t + self.l_t2i) + T::lit(cfg.w_t2t) * (self.l_r2l + self.l_l2r)
    }
}

#[derive(Debug, Clone)]
pub struct LossOutput<T> {
    pub total: T,
    pub terms: LossTerms<T>,
    /// Gradient with respect to every parameter, same layout as the params.
    pub grads: ModelParams<T>,
}

fn check_finite<T: Scalar>(x: T, term: &str) -> Result<T> {
    if x.is_finite() {
        Ok(x)
    } else {
        Err(Error::Numeric { term: term.into() })
    }
}

struct I2tPass<T> {
    images: ImageForward<T>,
    captions: TextForward<T>,
    l_i2t: NceGrad<T>,
    l_t2i: NceGrad<T>,
}

fn i2t_pass<T: Scalar>(params: &ModelParams<T>, batch: &ImageTextBatch<T>) -> Result<I2tPass<T>> {
    if batch.is_empty() || batch.images.nrows() != batch.len() {
        return Err(Error::invalid("image-text batch is empty or misaligned"));
    }
    let images = encode_images(params, batch.images.view())?;
    let captions = encode_texts(params, &batch.captions, Head::I2t)?;
    let sim = images.embeddings.dot(&captions.embeddings.t());
    let tau = params.tau();
    let l_i2t = softmax_nce_grad(sim.view(), tau, T::zero())?;
    let l_t2i = softmax_nce_grad(sim.t(), tau, T::zero())?;
    check_finite(l_i2t.loss, "l_i2t")?;
    check_finite(l_t2i.loss, "l_t2i")?;
    Ok(I2tPass {
        images,
        captions,
        l_i2t,
        l_t2i,
    })
}

struct T2tPass<T> {
    left: TextForward<T>,
    right: TextForward<T>,
    l_l2r: NceGrad<T>,
    l_r2l: NceGrad<T>,
}

fn t2t_pass<T: Scalar>(params: &ModelParams<T>, batch: &TextTextBatch, cfg: &LossConfig) -> Result<T2tPass<T>> {
    if batch.is_empty() || batch.left.len() != batch.right.len() {
        return Err(Error::invalid("text-text batch is empty or misaligned"));
    }
    let left = encode_texts(params, &batch.left, Head::T2t)?;
    let right = encode_texts(params, &batch.right, Head::T2t)?;
    let sim = left.embeddings.dot(&right.embeddings.t());
    let tau = T::lit(cfg.tau_t2t);
    let margin = T::lit(cfg.margin);
    let l_l2r = softmax_nce_grad(sim.view(), tau, margin)?;
    let l_r2l = softmax_nce_grad(sim.t(), tau, margin)?;
    check_finite(l_l2r.loss, "l_l2r")?;
    check_finite(l_r2l.loss, "l_r2l")?;
    Ok(T2tPass {
        left,
        right,
        l_l2r,
        l_r2l,
    })
}

/// Loss terms plus the gradient of
/// `coef_i2t * (l_i2t + l_t2i) + coef_t2t * (l_r2l + l_l2r)`.
///
/// Passing `None` for the text-text batch drops those terms entirely; a zero
/// coefficient skips the corresponding backward pass.
pub fn task_gradient<T: Scalar>(
    params: &ModelParams<T>,
    i2t: &ImageTextBatch<T>,
    t2t: Option<&TextTextBatch>,
    cfg: &LossConfig,
    coef_i2t: T,
    coef_t2t: T,
) -> Result<(LossTerms<T>, ModelParams<T>)> {
    let mut grads = ModelParams::zeros(&params.dims());
    let mut terms = LossTerms::default();

    let pass = i2t_pass(params, i2t)?;
    terms.l_i2t = pass.l_i2t.loss;
    terms.l_t2i = pass.l_t2i.loss;
    if coef_i2t != T::zero() {
        // Rows of S are images, columns captions.
        let d_sim = (&pass.l_i2t.d_sim + &pass.l_t2i.d_sim.t()) * coef_i2t;
        let d_img = d_sim.dot(&pass.captions.embeddings);
        let d_cap = d_sim.t().dot(&pass.images.embeddings);
        pass.images.backward(params, &d_img, &mut grads);
        pass.captions.backward(params, &d_cap, &mut grads);
        grads.log_tau = coef_i2t * (pass.l_i2t.d_log_tau + pass.l_t2i.d_log_tau);
    }

    if let Some(t2t) = t2t {
        let pass = t2t_pass(params, t2t, cfg)?;
        terms.l_l2r = pass.l_l2r.loss;
        terms.l_r2l = pass.l_r2l.loss;
        if coef_t2t != T::zero() {
            let d_sim = (&pass.l_l2r.d_sim + &pass.l_r2l.d_sim.t()) * coef_t2t;
            let d_left = d_sim.dot(&pass.right.embeddings);
            let d_right = d_sim.t().dot(&pass.left.embeddings);
            pass.left.backward(params, &d_left, &mut grads);
            pass.right.backward(params, &d_right, &mut grads);
        }
    }
    Ok((terms, grads))
}

/// Weighted multitask loss with exact gradients of the total.
pub fn combined_loss<T: Scalar>(
    params: &ModelParams<T>,
    i2t: &ImageTextBatch<T>,
    t2t: &TextTextBatch,
    cfg: &LossConfig,
) -> Result<LossOutput<T>> {
    let (terms, grads) = task_gradient(params, i2t, Some(t2t), cfg, T::lit(cfg.w_i2t), T::lit(cfg.w_t2t))?;
    let total = check_finite(terms.total(cfg), "total")?;
    Ok(LossOutput { total, terms, grads })
}

/// Loss terms only, no backward pass.
pub fn loss_terms<T: Scalar>(
    params: &ModelParams<T>,
    i2t: &ImageTextBatch<T>,
    t2t: Option<&TextTextBatch>,
    cfg: &LossConfig,
) -> Result<LossTerms<T>> {
    let mut terms = LossTerms::default();
    let pass = i2t_pass(params, i2t)?;
    terms.l_i2t = pass.l_i2t.loss;
    terms.l_t2i = pass.l_t2i.loss;
    if let Some(t2t) = t2t {
        let pass = t2t_pass(params, t2t, cfg)?;
        terms.l_l2r = pass.l_l2r.loss;
        terms.l_r2l = pass.l_r2l.loss;
    }
    Ok(terms)
}
