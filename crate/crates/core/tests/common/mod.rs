//! Independent reference implementations used as test oracles. Everything
//! here is written as plain loops over `Vec<f64>` and shares no numerical
//! code with the library.

#![allow(dead_code)]

use dualenc::loss::{loss_terms, ImageTextBatch, LossConfig, TextTextBatch};
use dualenc::model::{Head, ModelDims, ModelParams, BLOCKS};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn matvec(w: &Array2<f64>, x: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(w.nrows());
    for r in 0..w.nrows() {
        let mut s = b[r];
        for c in 0..w.ncols() {
            s += w[[r, c]] * x[c];
        }
        out.push(s);
    }
    out
}

fn relu(v: &[f64], pattern: &mut Vec<bool>) -> Vec<f64> {
    v.iter()
        .map(|&x| {
            pattern.push(x > 0.0);
            if x > 0.0 {
                x
            } else {
                0.0
            }
        })
        .collect()
}

fn unit(v: Vec<f64>) -> Vec<f64> {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.into_iter().map(|x| x / n).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Straight-line text forward pass; relu on/off decisions appended to `pattern`.
pub fn naive_text(p: &ModelParams<f64>, ids: &[usize], head: Head, pattern: &mut Vec<bool>) -> Vec<f64> {
    let d = p.embeddings.ncols();
    let mut e = vec![0.0; d];
    for &id in ids {
        for k in 0..d {
            e[k] += p.embeddings[[id, k]];
        }
    }
    for x in e.iter_mut() {
        *x /= ids.len() as f64;
    }
    let a1 = relu(&matvec(&p.text_w1, &e, p.text_b1.as_slice().unwrap()), pattern);
    let r = relu(&matvec(&p.text_w2, &a1, p.text_b2.as_slice().unwrap()), pattern);
    let (w, b) = match head {
        Head::I2t => (&p.head_i2t_w, &p.head_i2t_b),
        Head::T2t => (&p.head_t2t_w, &p.head_t2t_b),
    };
    unit(matvec(w, &r, b.as_slice().unwrap()))
}

pub fn naive_image(p: &ModelParams<f64>, v: &[f64], pattern: &mut Vec<bool>) -> Vec<f64> {
    let a3 = relu(&matvec(&p.image_w3, v, p.image_b3.as_slice().unwrap()), pattern);
    unit(matvec(&p.image_w4, &a3, p.image_b4.as_slice().unwrap()))
}

/// Literal per-element in-batch softmax loss, no stabilization:
/// `-(1/N) Σ_i log(e^{(S_ii-m)/τ} / (e^{(S_ii-m)/τ} + Σ_{j≠i} e^{S_ij/τ}))`.
pub fn naive_nce(s: &[Vec<f64>], tau: f64, margin: f64) -> f64 {
    let n = s.len();
    let mut total = 0.0;
    for i in 0..n {
        let pos = ((s[i][i] - margin) / tau).exp();
        let mut denom = pos;
        for j in 0..n {
            if j != i {
                denom += (s[i][j] / tau).exp();
            }
        }
        total += (pos / denom).ln();
    }
    -total / n as f64
}

fn transpose(s: &[Vec<f64>]) -> Vec<Vec<f64>> {
    (0..s[0].len()).map(|j| s.iter().map(|row| row[j]).collect()).collect()
}

fn sim(rows: &[Vec<f64>], cols: &[Vec<f64>]) -> Vec<Vec<f64>> {
    rows.iter().map(|r| cols.iter().map(|c| dot(r, c)).collect()).collect()
}

/// `[l_i2t, l_t2i, l_r2l, l_l2r]` by enumeration, plus every relu decision.
pub fn naive_terms(
    p: &ModelParams<f64>,
    i2t: &ImageTextBatch<f64>,
    t2t: &TextTextBatch,
    cfg: &LossConfig,
) -> ([f64; 4], Vec<bool>) {
    let mut pattern = Vec::new();
    let imgs: Vec<Vec<f64>> = i2t
        .images
        .rows()
        .into_iter()
        .map(|r| naive_image(p, &r.to_vec(), &mut pattern))
        .collect();
    let caps: Vec<Vec<f64>> = i2t.captions.iter().map(|c| naive_text(p, c, Head::I2t, &mut pattern)).collect();
    let left: Vec<Vec<f64>> = t2t.left.iter().map(|c| naive_text(p, c, Head::T2t, &mut pattern)).collect();
    let right: Vec<Vec<f64>> = t2t.right.iter().map(|c| naive_text(p, c, Head::T2t, &mut pattern)).collect();
    let tau = p.log_tau.exp();
    let s_it = sim(&imgs, &caps);
    let s_lr = sim(&left, &right);
    let terms = [
        naive_nce(&s_it, tau, 0.0),
        naive_nce(&transpose(&s_it), tau, 0.0),
        naive_nce(&transpose(&s_lr), cfg.tau_t2t, cfg.margin),
        naive_nce(&s_lr, cfg.tau_t2t, cfg.margin),
    ];
    (terms, pattern)
}

pub fn naive_total(terms: &[f64; 4], cfg: &LossConfig) -> f64 {
    cfg.w_i2t * (terms[0] + terms[1]) + cfg.w_t2t * (terms[2] + terms[3])
}

/// Random caption of 1..=4 tokens drawn from ids `1..vocab`.
pub fn random_caption(rng: &mut ChaCha8Rng, vocab: usize) -> Vec<usize> {
    let len = rng.random_range(1..=4);
    (0..len).map(|_| rng.random_range(1..vocab)).collect()
}

pub fn random_batches(rng: &mut ChaCha8Rng, dims: &ModelDims, n: usize) -> (ImageTextBatch<f64>, TextTextBatch) {
    let images = Array2::from_shape_simple_fn((n, dims.d_img), || rng.random_range(-1.5..1.5));
    let captions = (0..n).map(|_| random_caption(rng, dims.vocab_size)).collect();
    let left = (0..n).map(|_| random_caption(rng, dims.vocab_size)).collect();
    let right = (0..n).map(|_| random_caption(rng, dims.vocab_size)).collect();
    (ImageTextBatch { images, captions }, TextTextBatch { left, right })
}

/// Seeded parameters with nonzero biases and temperature so every block
/// carries signal.
pub fn random_params(dims: &ModelDims, seed: u64) -> ModelParams<f64> {
    let mut p = ModelParams::<f64>::init(dims, seed);
    let mut r = rng(seed ^ 0x5eed);
    for b in [
        &mut p.text_b1,
        &mut p.text_b2,
        &mut p.image_b3,
        &mut p.image_b4,
        &mut p.head_i2t_b,
        &mut p.head_t2t_b,
    ] {
        b.mapv_inplace(|_| r.random_range(-0.2..0.2));
    }
    p.log_tau = r.random_range(-1.5..0.3);
    p
}

#[derive(Debug, Default)]
pub struct FdReport {
    pub max_rel_err: f64,
    pub worst: Option<(&'static str, usize, f64, f64)>,
    pub checked: usize,
    pub skipped_kinks: usize,
    /// Entries at or above the 1e-4 relative tolerance.
    pub over_tol: usize,
    pub per_block: Vec<BlockFd>,
    /// Richardson estimate (steps h and h/2) at the worst entry.
    pub worst_richardson: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct BlockFd {
    pub name: &'static str,
    pub max_rel_err: f64,
    pub checked: usize,
    /// ||analytic - numeric|| / max(||analytic||, ||numeric||) over the block.
    pub norm_rel_err: f64,
}

/// Central finite differences of the combined loss against `analytic`.
///
/// Every entry of every block is perturbed except embedding rows absent from
/// the batches, of which `unused_rows` are sampled. An entry whose
/// perturbation flips any relu decision straddles a kink and is skipped.
pub fn finite_difference_check(
    p: &ModelParams<f64>,
    analytic: &ModelParams<f64>,
    i2t: &ImageTextBatch<f64>,
    t2t: &TextTextBatch,
    cfg: &LossConfig,
    unused_rows: usize,
    rng: &mut ChaCha8Rng,
) -> FdReport {
    let dims = p.dims();
    let mut used: Vec<usize> = i2t
        .captions
        .iter()
        .chain(&t2t.left)
        .chain(&t2t.right)
        .flatten()
        .copied()
        .collect();
    used.sort_unstable();
    used.dedup();
    let mut rows = used.clone();
    while rows.len() < used.len() + unused_rows.min(dims.vocab_size - used.len()) {
        let r = rng.random_range(0..dims.vocab_size);
        if !rows.contains(&r) {
            rows.push(r);
        }
    }

    let f = |q: &ModelParams<f64>| -> f64 {
        let t = loss_terms(q, i2t, Some(t2t), cfg).expect("forward");
        cfg.w_i2t * (t.l_i2t + t.l_t2i) + cfg.w_t2t * (t.l_r2l + t.l_l2r)
    };
    let base_pattern = naive_terms(p, i2t, t2t, cfg).1;

    let mut report = FdReport::default();
    let grads = analytic.blocks();
    for (b, info) in BLOCKS.iter().enumerate() {
        let len = p.blocks()[b].len();
        let indices: Vec<usize> = if b == 0 {
            rows.iter().flat_map(|&r| r * dims.d_emb..(r + 1) * dims.d_emb).collect()
        } else {
            (0..len).collect()
        };
        let mut block_max = 0.0f64;
        let (mut checked, mut diff2, mut a2, mut n2) = (0usize, 0.0f64, 0.0f64, 0.0f64);
        for idx in indices {
            let theta = p.blocks()[b][idx];
            let h = 1e-4 * (1.0 + theta.abs());
            let mut plus = p.clone();
            plus.blocks_mut()[b][idx] = theta + h;
            let mut minus = p.clone();
            minus.blocks_mut()[b][idx] = theta - h;
            let numeric = (f(&plus) - f(&minus)) / (2.0 * h);
            let a = grads[b][idx];
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-6);
            if rel >= 1e-4 {
                let flips = naive_terms(&plus, i2t, t2t, cfg).1 != base_pattern
                    || naive_terms(&minus, i2t, t2t, cfg).1 != base_pattern;
                if flips {
                    report.skipped_kinks += 1;
                    continue;
                }
            }
            report.checked += 1;
            checked += 1;
            diff2 += (a - numeric).powi(2);
            a2 += a * a;
            n2 += numeric * numeric;
            if rel >= 1e-4 {
                report.over_tol += 1;
            }
            block_max = block_max.max(rel);
            if rel > report.max_rel_err {
                report.max_rel_err = rel;
                report.worst = Some((info.name, idx, a, numeric));
                let half = h / 2.0;
                plus.blocks_mut()[b][idx] = theta + half;
                minus.blocks_mut()[b][idx] = theta - half;
                let fine = (f(&plus) - f(&minus)) / (2.0 * half);
                report.worst_richardson = Some((4.0 * fine - numeric) / 3.0);
            }
        }
        report.per_block.push(BlockFd {
            name: info.name,
            max_rel_err: block_max,
            checked,
            norm_rel_err: diff2.sqrt() / a2.sqrt().max(n2.sqrt()).max(1e-300),
        });
    }
    report
}

/// Reference ranking: full sort of candidates by (similarity desc, index asc).
pub fn brute_force_ranks(queries: &[Vec<f64>], candidates: &[Vec<f64>], gold: &[Vec<usize>]) -> Vec<usize> {
    queries
        .iter()
        .zip(gold)
        .map(|(q, g)| {
            let sims: Vec<f64> = candidates.iter().map(|c| dot(q, c)).collect();
            let mut order: Vec<usize> = (0..candidates.len()).collect();
            order.sort_by(|&a, &b| sims[b].partial_cmp(&sims[a]).unwrap().then(a.cmp(&b)));
            order.iter().position(|c| g.contains(c)).unwrap() + 1
        })
        .collect()
}

pub fn oracle_recall(ranks: &[usize], k: usize) -> f64 {
    ranks.iter().filter(|&&r| r <= k).count() as f64 / ranks.len() as f64
}

/// Ranks by explicit stable sort, ties given the mean of their positions,
/// then the textbook Pearson formula.
pub fn oracle_spearman(a: &[f64], b: &[f64]) -> f64 {
    fn ranks(v: &[f64]) -> Vec<f64> {
        let mut idx: Vec<usize> = (0..v.len()).collect();
        idx.sort_by(|&x, &y| v[x].partial_cmp(&v[y]).unwrap());
        let mut out = vec![0.0; v.len()];
        let mut i = 0;
        while i < idx.len() {
            let mut j = i;
            while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
                j += 1;
            }
            let avg = (i + j) as f64 / 2.0 + 1.0;
            for &k in &idx[i..=j] {
                out[k] = avg;
            }
            i = j + 1;
        }
        out
    }
    let (ra, rb) = (ranks(a), ranks(b));
    let n = ra.len() as f64;
    let (sa, sb): (f64, f64) = (ra.iter().sum(), rb.iter().sum());
    let sab: f64 = ra.iter().zip(&rb).map(|(x, y)| x * y).sum();
    let saa: f64 = ra.iter().map(|x| x * x).sum();
    let sbb: f64 = rb.iter().map(|x| x * x).sum();
    (n * sab - sa * sb) / ((n * saa - sa * sa).sqrt() * (n * sbb - sb * sb).sqrt())
}
