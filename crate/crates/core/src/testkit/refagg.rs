//! Straight-line renderings of the aggregation formulas, kept deliberately
//! naive: each follows its defining equation term by term.

/// Weighted parameter average with dataset-size weights:
/// `w_G = sum_i (|T_i| / n) * w_i`.
pub fn reference_fedavg(vectors: &[Vec<f32>], n_train: &[usize]) -> Vec<f32> {
    let n: f64 = n_train.iter().map(|&v| v as f64).sum();
    let len = vectors[0].len();
    let mut out = vec![0.0f64; len];
    for (w, &t) in vectors.iter().zip(n_train) {
        let frac = t as f64 / n;
        for (o, &v) in out.iter_mut().zip(w) {
            *o += frac * v as f64;
        }
    }
    out.into_iter().map(|v| v as f32).collect()
}

/// Per-model median of the loss matrix: `E_j = median_i { L[i][j] }`, with
/// the even case as the mean of the two middle values.
pub fn reference_median_scores(losses: &[Vec<f64>]) -> Vec<f64> {
    let n_models = losses[0].len();
    (0..n_models)
        .map(|j| {
            let mut column: Vec<f64> = losses.iter().map(|row| row[j]).collect();
            column.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let mid = column.len() / 2;
            if column.len() % 2 == 1 {
                column[mid]
            } else {
                (column[mid - 1] + column[mid]) / 2.0
            }
        })
        .collect()
}

/// Inverse scores, z-score normalization with the (N-1)-denominator standard
/// deviation, then a softmax:
///
/// ```text
/// A_i = 1 / E_i
/// mu = mean(A),  sigma = sqrt(sum (A_i - mu)^2 / (N - 1))
/// Z_i = (A_i - mu) / sigma
/// alpha_i = exp(Z_i) / sum_j exp(Z_j)
/// ```
pub fn reference_softmax_weights(scores: &[f64]) -> Vec<f64> {
    let n = scores.len() as f64;
    let inv: Vec<f64> = scores.iter().map(|&e| 1.0 / e).collect();
    let mu: f64 = inv.iter().sum::<f64>() / n;
    let sigma: f64 = (inv.iter().map(|a| (a - mu) * (a - mu)).sum::<f64>() / (n - 1.0)).sqrt();
    let z: Vec<f64> = inv.iter().map(|a| (a - mu) / sigma).collect();
    let denom: f64 = z.iter().map(|&v| v.exp()).sum();
    z.iter().map(|&v| v.exp() / denom).collect()
}

/// Weighted parameter average with explicit weights: `w_G = sum_i alpha_i * w_i`.
pub fn reference_weighted_sum(vectors: &[Vec<f32>], alphas: &[f64]) -> Vec<f32> {
    let len = vectors[0].len();
    let mut out = vec![0.0f64; len];
    for (w, &a) in vectors.iter().zip(alphas) {
        for (o, &v) in out.iter_mut().zip(w) {
            *o += a * v as f64;
        }
    }
    out.into_iter().map(|v| v as f32).collect()
}

/// Index of the lowest score, first occurrence on ties.
pub fn reference_argmin_select(scores: &[f64]) -> usize {
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate() {
        if s < scores[best] {
            best = i;
        }
    }
    best
}
