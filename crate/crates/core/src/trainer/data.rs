use std::collections::HashSet;

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::{ImageTextExample, TranslationExample, Vocabulary};
use crate::loss::{ImageTextBatch, TextTextBatch};
use crate::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub struct EncodedImageText {
    pub image_id: String,
    pub features: Vec<f64>,
    pub tokens: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EncodedTranslation {
    pub left: Vec<usize>,
    pub right: Vec<usize>,
}

/// Token-id encoded training pools.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainingSet {
    pub i2t: Vec<EncodedImageText>,
    pub t2t: Vec<EncodedTranslation>,
}

impl TrainingSet {
    pub fn new(vocab: &Vocabulary, i2t: &[ImageTextExample], t2t: &[TranslationExample]) -> Self {
        Self {
            i2t: encode_image_text(vocab, i2t),
            t2t: encode_translations(vocab, t2t),
        }
    }
}

/// Examples whose caption tokenizes to nothing are skipped.
pub fn encode_image_text(vocab: &Vocabulary, examples: &[ImageTextExample]) -> Vec<EncodedImageText> {
    examples
        .iter()
        .filter_map(|e| {
            let tokens = vocab.encode(&e.caption);
            (!tokens.is_empty()).then(|| EncodedImageText {
                image_id: e.image_id.clone(),
                features: e.features.clone(),
                tokens,
            })
        })
        .collect()
}

pub fn encode_translations(vocab: &Vocabulary, examples: &[TranslationExample]) -> Vec<EncodedTranslation> {
    examples
        .iter()
        .filter_map(|e| {
            let left = vocab.encode(&e.left);
            let right = vocab.encode(&e.right);
            (!left.is_empty() && !right.is_empty()).then_some(EncodedTranslation { left, right })
        })
        .collect()
}

/// Seeded batch assembly. Image-text and text-text batches come from
/// independent streams, so one never perturbs the other.
#[derive(Debug, Clone)]
pub struct BatchSampler {
    i2t_rng: ChaCha8Rng,
    t2t_rng: ChaCha8Rng,
}

fn draw_distinct<K: Eq + std::hash::Hash>(
    rng: &mut ChaCha8Rng,
    pool: usize,
    n: usize,
    key: impl Fn(usize) -> K,
) -> Vec<usize> {
    let want = n.min(pool);
    let mut picked = Vec::with_capacity(want);
    let mut used = HashSet::with_capacity(want);
    let mut keys = HashSet::with_capacity(want);
    let mut attempts = 0;
    while picked.len() < want && attempts < 50 * want.max(1) {
        attempts += 1;
        let i = rng.random_range(0..pool);
        if used.contains(&i) {
            continue;
        }
        if !keys.insert(key(i)) {
            continue;
        }
        used.insert(i);
        picked.push(i);
    }
    picked
}

impl BatchSampler {
    pub fn new(seed: u64) -> Self {
        Self {
            i2t_rng: ChaCha8Rng::seed_from_u64(seed),
            t2t_rng: ChaCha8Rng::seed_from_u64(seed ^ 0x7432_7432_7432_7432),
        }
    }

    /// Up to `n` pairs without repeating an image inside the batch.
    pub fn next_image_text<T: Scalar>(&mut self, pool: &[EncodedImageText], n: usize) -> ImageTextBatch<T> {
        let idx = draw_distinct(&mut self.i2t_rng, pool.len(), n, |i| pool[i].image_id.as_str());
        image_text_batch(idx.iter().map(|&i| &pool[i]))
    }

    /// Up to `n` pairs without repeating a left or right sentence.
    pub fn next_translation(&mut self, pool: &[EncodedTranslation], n: usize) -> TextTextBatch {
        let idx = draw_distinct(&mut self.t2t_rng, pool.len(), n, |i| (&pool[i].left, &pool[i].right));
        TextTextBatch {
            left: idx.iter().map(|&i| pool[i].left.clone()).collect(),
            right: idx.iter().map(|&i| pool[i].right.clone()).collect(),
        }
    }
}

pub fn image_text_batch<'a, T: Scalar>(examples: impl IntoIterator<Item = &'a EncodedImageText>) -> ImageTextBatch<T> {
    let examples: Vec<&EncodedImageText> = examples.into_iter().collect();
    let d = examples.first().map_or(0, |e| e.features.len());
    let images = Array2::from_shape_fn((examples.len(), d), |(r, c)| T::lit(examples[r].features[c]));
    ImageTextBatch {
        images,
        captions: examples.iter().map(|e| e.tokens.clone()).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pool() -> Vec<EncodedImageText> {
        (0..20)
            .map(|i| EncodedImageText {
                image_id: format!("img{}", i % 5),
                features: vec![i as f64],
                tokens: vec![i % 3 + 1],
            })
            .collect()
    }

    #[test]
    fn batches_have_distinct_images() {
        let mut s = BatchSampler::new(3);
        let b = s.next_image_text::<f64>(&pool(), 8);
        assert_eq!(b.len(), 5);
        let mut ids: Vec<i64> = b.images.iter().map(|x| *x as i64 % 5).collect();
        ids.sort();
        ids.dedup();
        assert_eq!(ids.len(), 5);
    }

    #[test]
    fn sampler_is_deterministic() {
        let p = pool();
        let mut a = BatchSampler::new(9);
        let mut b = BatchSampler::new(9);
        for _ in 0..5 {
            assert_eq!(a.next_image_text::<f32>(&p, 4), b.next_image_text::<f32>(&p, 4));
        }
    }

    #[test]
    fn translation_stream_independent_of_image_stream() {
        let p = pool();
        let t: Vec<EncodedTranslation> = (0..30)
            .map(|i| EncodedTranslation {
                left: vec![i],
                right: vec![i + 100],
            })
            .collect();
        let mut a = BatchSampler::new(1);
        let mut b = BatchSampler::new(1);
        a.next_translation(&t, 4);
        assert_eq!(a.next_image_text::<f64>(&p, 3), b.next_image_text::<f64>(&p, 3));
    }
}
