use crate::{Error, Result, Scalar};

/// Ranks starting at 1; tied values share the mean of their positions.
pub fn average_ranks<T: Scalar>(values: &[T]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).expect("finite values"));
    let mut ranks = vec![0.0; values.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && values[order[end]] == values[order[start]] {
            end += 1;
        }
        // Positions start+1 ..= end share their mean.
        let shared = (start + 1 + end) as f64 / 2.0;
        for &i in &order[start..end] {
            ranks[i] = shared;
        }
        start = end;
    }
    ranks
}

pub fn pearson(a: &[f64], b: &[f64]) -> Result<f64> {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa == 0.0 || sbb == 0.0 {
        return Err(Error::UndefinedCorrelation("constant input".into()));
    }
    Ok((sab / (saa.sqrt() * sbb.sqrt())).clamp(-1.0, 1.0))
}

/// Spearman rank correlation with average ranks for ties.
pub fn spearman<T: Scalar>(model_scores: &[T], human_scores: &[T]) -> Result<f64> {
    if model_scores.len() != human_scores.len() {
        return Err(Error::invalid(format!(
            "score lists differ in length: {} vs {}",
            model_scores.len(),
            human_scores.len()
        )));
    }
    if model_scores.len() < 2 {
        return Err(Error::invalid("spearman needs at least two pairs"));
    }
    if model_scores.iter().chain(human_scores).any(|x| !x.is_finite()) {
        return Err(Error::invalid("non-finite score"));
    }
    pearson(&average_ranks(model_scores), &average_ranks(human_scores))
}
