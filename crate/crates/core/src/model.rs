//! Dual encoder parameters and forward/backward passes.
//!
//! Text: mean-pooled token embeddings, a two-layer relu trunk shared by both
//! tasks, then a task-specific linear head applied after a relu. Image: a
//! two-layer relu perceptron. Every output is l2-normalized.

use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelDims {
    pub vocab_size: usize,
    pub d_emb: usize,
    pub d_hidden: usize,
    pub d_joint: usize,
    pub d_img: usize,
}

impl Default for ModelDims {
    fn default() -> Self {
        Self {
            vocab_size: 4096,
            d_emb: 32,
            d_hidden: 64,
            d_joint: 32,
            d_img: 16,
        }
    }
}

impl ModelDims {
    pub fn validate(&self) -> Result<()> {
        let all = [self.vocab_size, self.d_emb, self.d_hidden, self.d_joint, self.d_img];
        if all.contains(&0) {
            return Err(Error::Config("model dimensions must be positive".into()));
        }
        if self.d_joint > self.d_hidden {
            return Err(Error::Config(format!(
                "model.d_joint ({}) must not exceed model.d_hidden ({})",
                self.d_joint, self.d_hidden
            )));
        }
        Ok(())
    }
}

/// Which projection head a text goes through.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Head {
    I2t,
    T2t,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BlockKind {
    Matrix,
    Bias,
    Temperature,
}

/// Static description of one parameter array.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BlockInfo {
    pub name: &'static str,
    pub kind: BlockKind,
    /// `Some` for the projection-head blocks.
    pub head: Option<Head>,
}

pub const BLOCKS: [BlockInfo; 14] = {
    const fn b(name: &'static str, kind: BlockKind, head: Option<Head>) -> BlockInfo {
        BlockInfo { name, kind, head }
    }
    use BlockKind::*;
    [
        b("embeddings", Matrix, None),
        b("text.w1", Matrix, None),
        b("text.b1", Bias, None),
        b("text.w2", Matrix, None),
        b("text.b2", Bias, None),
        b("image.w3", Matrix, None),
        b("image.b3", Bias, None),
        b("image.w4", Matrix, None),
        b("image.b4", Bias, None),
        b("head_i2t.w", Matrix, Some(Head::I2t)),
        b("head_i2t.b", Bias, Some(Head::I2t)),
        b("head_t2t.w", Matrix, Some(Head::T2t)),
        b("head_t2t.b", Bias, Some(Head::T2t)),
        b("log_tau", Temperature, None),
    ]
};

/// All trainable arrays. Gradients and optimizer moments reuse this type.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams<T> {
    /// vocab_size × d_emb
    pub embeddings: Array2<T>,
    /// d_hidden × d_emb
    pub text_w1: Array2<T>,
    pub text_b1: Array1<T>,
    /// d_hidden × d_hidden
    pub text_w2: Array2<T>,
    pub text_b2: Array1<T>,
    /// d_hidden × d_img
    pub image_w3: Array2<T>,
    pub image_b3: Array1<T>,
    /// d_joint × d_hidden
    pub image_w4: Array2<T>,
    pub image_b4: Array1<T>,
    /// d_joint × d_hidden
    pub head_i2t_w: Array2<T>,
    pub head_i2t_b: Array1<T>,
    pub head_t2t_w: Array2<T>,
    pub head_t2t_b: Array1<T>,
    /// Log of the learned image-text temperature.
    pub log_tau: T,
}

fn xavier<T: Scalar>(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Array2<T> {
    let s = (6.0 / (rows + cols) as f64).sqrt();
    Array2::from_shape_simple_fn((rows, cols), || T::lit(rng.random_range(-s..=s)))
}

impl<T: Scalar> ModelParams<T> {
    pub fn zeros(dims: &ModelDims) -> Self {
        let ModelDims {
            vocab_size,
            d_emb,
            d_hidden,
            d_joint,
            d_img,
        } = *dims;
        Self {
            embeddings: Array2::zeros((vocab_size, d_emb)),
            text_w1: Array2::zeros((d_hidden, d_emb)),
            text_b1: Array1::zeros(d_hidden),
            text_w2: Array2::zeros((d_hidden, d_hidden)),
            text_b2: Array1::zeros(d_hidden),
            image_w3: Array2::zeros((d_hidden, d_img)),
            image_b3: Array1::zeros(d_hidden),
            image_w4: Array2::zeros((d_joint, d_hidden)),
            image_b4: Array1::zeros(d_joint),
            head_i2t_w: Array2::zeros((d_joint, d_hidden)),
            head_i2t_b: Array1::zeros(d_joint),
            head_t2t_w: Array2::zeros((d_joint, d_hidden)),
            head_t2t_b: Array1::zeros(d_joint),
            log_tau: T::zero(),
        }
    }

    /// Uniform Glorot weights, zero biases, unit temperature. Deterministic per seed.
    pub fn init(dims: &ModelDims, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut p = Self::zeros(dims);
        p.embeddings = xavier(&mut rng, dims.vocab_size, dims.d_emb);
        p.text_w1 = xavier(&mut rng, dims.d_hidden, dims.d_emb);
        p.text_w2 = xavier(&mut rng, dims.d_hidden, dims.d_hidden);
        p.image_w3 = xavier(&mut rng, dims.d_hidden, dims.d_img);
        p.image_w4 = xavier(&mut rng, dims.d_joint, dims.d_hidden);
        p.head_i2t_w = xavier(&mut rng, dims.d_joint, dims.d_hidden);
        p.head_t2t_w = xavier(&mut rng, dims.d_joint, dims.d_hidden);
        p
    }

    pub fn dims(&self) -> ModelDims {
        ModelDims {
            vocab_size: self.embeddings.nrows(),
            d_emb: self.embeddings.ncols(),
            d_hidden: self.text_w1.nrows(),
            d_joint: self.head_i2t_w.nrows(),
            d_img: self.image_w3.ncols(),
        }
    }

    pub fn tau(&self) -> T {
        self.log_tau.exp()
    }

    /// Shapes in [`BLOCKS`] order.
    pub fn block_shapes(dims: &ModelDims) -> [Vec<usize>; 14] {
        let ModelDims {
            vocab_size: v,
            d_emb: e,
            d_hidden: h,
            d_joint: j,
            d_img: i,
        } = *dims;
        [
            vec![v, e],
            vec![h, e],
            vec![h],
            vec![h, h],
            vec![h],
            vec![h, i],
            vec![h],
            vec![j, h],
            vec![j],
            vec![j, h],
            vec![j],
            vec![j, h],
            vec![j],
            vec![],
        ]
    }

    /// Flat views of every block in [`BLOCKS`] order.
    pub fn blocks(&self) -> [&[T]; 14] {
        fn m<T>(a: &Array2<T>) -> &[T] {
            a.as_slice().expect("standard layout")
        }
        fn v<T>(a: &Array1<T>) -> &[T] {
            a.as_slice().expect("standard layout")
        }
        [
            m(&self.embeddings),
            m(&self.text_w1),
            v(&self.text_b1),
            m(&self.text_w2),
            v(&self.text_b2),
            m(&self.image_w3),
            v(&self.image_b3),
            m(&self.image_w4),
            v(&self.image_b4),
            m(&self.head_i2t_w),
            v(&self.head_i2t_b),
            m(&self.head_t2t_w),
            v(&self.head_t2t_b),
            std::slice::from_ref(&self.log_tau),
        ]
    }

    pub fn blocks_mut(&mut self) -> [&mut [T]; 14] {
        fn m<T>(a: &mut Array2<T>) -> &mut [T] {
            a.as_slice_mut().expect("standard layout")
        }
        fn v<T>(a: &mut Array1<T>) -> &mut [T] {
            a.as_slice_mut().expect("standard layout")
        }
        [
            m(&mut self.embeddings),
            m(&mut self.text_w1),
            v(&mut self.text_b1),
            m(&mut self.text_w2),
            v(&mut self.text_b2),
            m(&mut self.image_w3),
            v(&mut self.image_b3),
            m(&mut self.image_w4),
            v(&mut self.image_b4),
            m(&mut self.head_i2t_w),
            v(&mut self.head_i2t_b),
            m(&mut self.head_t2t_w),
            v(&mut self.head_t2t_b),
            std::slice::from_mut(&mut self.log_tau),
        ]
    }

    pub fn all_finite(&self) -> bool {
        self.blocks().iter().all(|b| b.iter().all(|x| x.is_finite()))
    }

    pub fn cast<U: Scalar>(&self) -> ModelParams<U> {
        let c2 = |a: &Array2<T>| a.mapv(|x| U::lit(x.as_f64()));
        let c1 = |a: &Array1<T>| a.mapv(|x| U::lit(x.as_f64()));
        ModelParams {
            embeddings: c2(&self.embeddings),
            text_w1: c2(&self.text_w1),
            text_b1: c1(&self.text_b1),
            text_w2: c2(&self.text_w2),
            text_b2: c1(&self.text_b2),
            image_w3: c2(&self.image_w3),
            image_b3: c1(&self.image_b3),
            image_w4: c2(&self.image_w4),
            image_b4: c1(&self.image_b4),
            head_i2t_w: c2(&self.head_i2t_w),
            head_i2t_b: c1(&self.head_i2t_b),
            head_t2t_w: c2(&self.head_t2t_w),
            head_t2t_b: c1(&self.head_t2t_b),
            log_tau: U::lit(self.log_tau.as_f64()),
        }
    }

    fn head(&self, head: Head) -> (&Array2<T>, &Array1<T>) {
        match head {
            Head::I2t => (&self.head_i2t_w, &self.head_i2t_b),
            Head::T2t => (&self.head_t2t_w, &self.head_t2t_b),
        }
    }

    fn head_mut(&mut self, head: Head) -> (&mut Array2<T>, &mut Array1<T>) {
        match head {
            Head::I2t => (&mut self.head_i2t_w, &mut self.head_i2t_b),
            Head::T2t => (&mut self.head_t2t_w, &mut self.head_t2t_b),
        }
    }
}

/// A unit-norm vector in the joint space.
#[derive(Debug, Clone, PartialEq)]
pub struct Embedding<T> {
    pub values: Array1<T>,
}

impl<T: Scalar> Embedding<T> {
    pub fn dot(&self, other: &Embedding<T>) -> T {
        self.values.dot(&other.values)
    }
}

fn relu<T: Scalar>(a: &Array2<T>) -> Array2<T> {
    a.mapv(|x| if x > T::zero() { x } else { T::zero() })
}

/// Row-normalizes `z` in place, returning the original norms.
fn normalize_rows<T: Scalar>(z: &mut Array2<T>, what: &str) -> Result<Array1<T>> {
    let mut norms = Array1::zeros(z.nrows());
    for (mut row, n) in z.rows_mut().into_iter().zip(norms.iter_mut()) {
        let norm = row.dot(&row).sqrt();
        if !(norm > T::zero() && norm.is_finite()) {
            return Err(Error::Numeric {
                term: format!("{what} embedding norm"),
            });
        }
        row.mapv_inplace(|x| x / norm);
        *n = norm;
    }
    Ok(norms)
}

/// Backprop through `y = z / |z|` row-wise.
fn normalize_backward<T: Scalar>(y: &Array2<T>, norms: &Array1<T>, d_y: &Array2<T>) -> Array2<T> {
    let mut d_z = d_y.clone();
    for ((mut dz, yr), &n) in d_z.rows_mut().into_iter().zip(y.rows()).zip(norms) {
        let proj = yr.dot(&dz);
        dz.zip_mut_with(&yr, |g, &yv| *g = (*g - yv * proj) / n);
    }
    d_z
}

fn add_bias<T: Scalar>(mut a: Array2<T>, b: &Array1<T>) -> Array2<T> {
    a += &b.view().insert_axis(Axis(0));
    a
}

fn relu_mask<T: Scalar>(d: &mut Array2<T>, pre: &Array2<T>) {
    d.zip_mut_with(pre, |g, &p| {
        if p <= T::zero() {
            *g = T::zero()
        }
    });
}

/// Encoded text batch plus the intermediates needed for backprop.
#[derive(Debug, Clone)]
pub struct TextForward<T> {
    pub head: Head,
    token_ids: Vec<Vec<usize>>,
    pooled: Array2<T>,
    h1: Array2<T>,
    a1: Array2<T>,
    u: Array2<T>,
    r: Array2<T>,
    norms: Array1<T>,
    /// N × d_joint unit rows.
    pub embeddings: Array2<T>,
}

#[derive(Debug, Clone)]
pub struct ImageForward<T> {
    features: Array2<T>,
    h3: Array2<T>,
    a3: Array2<T>,
    norms: Array1<T>,
    pub embeddings: Array2<T>,
}

/// Encodes a batch of token id sequences through the shared trunk and `head`.
pub fn encode_texts<T: Scalar>(params: &ModelParams<T>, token_ids: &[Vec<usize>], head: Head) -> Result<TextForward<T>> {
    let ModelDims { vocab_size, d_emb, .. } = params.dims();
    let mut pooled = Array2::zeros((token_ids.len(), d_emb));
    for (n, ids) in token_ids.iter().enumerate() {
        if ids.is_empty() {
            return Err(Error::invalid(format!("text {n} has no tokens")));
        }
        let mut row = pooled.row_mut(n);
        for &id in ids {
            if id >= vocab_size {
                return Err(Error::invalid(format!("token id {id} outside vocabulary of {vocab_size}")));
            }
            row += &params.embeddings.row(id);
        }
        let inv = T::one() / T::lit(ids.len() as f64);
        row.mapv_inplace(|x| x * inv);
    }
    let h1 = add_bias(pooled.dot(&params.text_w1.t()), &params.text_b1);
    let a1 = relu(&h1);
    let u = add_bias(a1.dot(&params.text_w2.t()), &params.text_b2);
    let r = relu(&u);
    let (hw, hb) = params.head(head);
    let mut z = add_bias(r.dot(&hw.t()), hb);
    let norms = normalize_rows(&mut z, "text")?;
    Ok(TextForward {
        head,
        token_ids: token_ids.to_vec(),
        pooled,
        h1,
        a1,
        u,
        r,
        norms,
        embeddings: z,
    })
}

/// Encodes a batch of image feature rows (N × d_img).
pub fn encode_images<T: Scalar>(params: &ModelParams<T>, features: ArrayView2<T>) -> Result<ImageForward<T>> {
    let d_img = params.dims().d_img;
    if features.ncols() != d_img {
        return Err(Error::invalid(format!(
            "image features have length {}, expected {d_img}",
            features.ncols()
        )));
    }
    if features.iter().any(|x| !x.is_finite()) {
        return Err(Error::invalid("image features contain non-finite values"));
    }
    let features = features.to_owned();
    let h3 = add_bias(features.dot(&params.image_w3.t()), &params.image_b3);
    let a3 = relu(&h3);
    let mut m = add_bias(a3.dot(&params.image_w4.t()), &params.image_b4);
    let norms = normalize_rows(&mut m, "image")?;
    Ok(ImageForward {
        features,
        h3,
        a3,
        norms,
        embeddings: m,
    })
}

pub fn encode_text<T: Scalar>(params: &ModelParams<T>, token_ids: &[usize], head: Head) -> Result<Embedding<T>> {
    let fwd = encode_texts(params, &[token_ids.to_vec()], head)?;
    Ok(Embedding {
        values: fwd.embeddings.row(0).to_owned(),
    })
}

pub fn encode_image<T: Scalar>(params: &ModelParams<T>, features: ArrayView1<T>) -> Result<Embedding<T>> {
    let fwd = encode_images(params, features.insert_axis(Axis(0)))?;
    Ok(Embedding {
        values: fwd.embeddings.row(0).to_owned(),
    })
}

/// Output of the shared trunk (before any head), N × d_hidden.
pub fn text_trunk<T: Scalar>(params: &ModelParams<T>, token_ids: &[Vec<usize>]) -> Result<Array2<T>> {
    Ok(encode_texts(params, token_ids, Head::I2t)?.r)
}

impl<T: Scalar> TextForward<T> {
    /// Accumulates into `grads` the parameter gradient for an upstream
    /// gradient `d_emb` on the normalized embeddings.
    pub fn backward(&self, params: &ModelParams<T>, d_emb: &Array2<T>, grads: &mut ModelParams<T>) {
        let d_z = normalize_backward(&self.embeddings, &self.norms, d_emb);
        let (hw, _) = params.head(self.head);
        {
            let (gw, gb) = grads.head_mut(self.head);
            *gw += &d_z.t().dot(&self.r);
            *gb += &d_z.sum_axis(Axis(0));
        }
        let mut d_u = d_z.dot(hw);
        relu_mask(&mut d_u, &self.u);
        grads.text_w2 += &d_u.t().dot(&self.a1);
        grads.text_b2 += &d_u.sum_axis(Axis(0));
        let mut d_h1 = d_u.dot(&params.text_w2);
        relu_mask(&mut d_h1, &self.h1);
        grads.text_w1 += &d_h1.t().dot(&self.pooled);
        grads.text_b1 += &d_h1.sum_axis(Axis(0));
        let d_pooled = d_h1.dot(&params.text_w1);
        for (ids, d_row) in self.token_ids.iter().zip(d_pooled.rows()) {
            let inv = T::one() / T::lit(ids.len() as f64);
            for &id in ids {
                let mut g = grads.embeddings.slice_mut(s![id, ..]);
                g.zip_mut_with(&d_row, |a, &b| *a = *a + b * inv);
            }
        }
    }
}

impl<T: Scalar> ImageForward<T> {
    pub fn backward(&self, params: &ModelParams<T>, d_emb: &Array2<T>, grads: &mut ModelParams<T>) {
        let d_m = normalize_backward(&self.embeddings, &self.norms, d_emb);
        grads.image_w4 += &d_m.t().dot(&self.a3);
        grads.image_b4 += &d_m.sum_axis(Axis(0));
        let mut d_h3 = d_m.dot(&params.image_w4);
        relu_mask(&mut d_h3, &self.h3);
        grads.image_w3 += &d_h3.t().dot(&self.features);
        grads.image_b3 += &d_h3.sum_axis(Axis(0));
    }
}
