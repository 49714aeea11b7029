//! LambdaRank pseudo-gradients for one query.

/// Exponential gain `2^rel - 1`.
pub(crate) fn gain(rel: u32) -> f64 {
    2f64.powi(rel as i32) - 1.0
}

/// Truncated positional discount; zero at or beyond `k` (0-based position).
pub(crate) fn discount(pos: usize, k: usize) -> f64 {
    if pos < k {
        1.0 / ((pos + 2) as f64).log2()
    } else {
        0.0
    }
}

/// Positions (0-based) of each document when sorted by descending score,
/// ties broken by input index.
pub(crate) fn positions(scores: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    let mut pos = vec![0; scores.len()];
    for (p, &i) in order.iter().enumerate() {
        pos[i] = p;
    }
    pos
}

pub(crate) fn ideal_dcg(labels: &[u32], k: usize) -> f64 {
    let mut sorted = labels.to_vec();
    sorted.sort_unstable_by(|a, b| b.cmp(a));
    sorted
        .iter()
        .enumerate()
        .map(|(p, &r)| gain(r) * discount(p, k))
        .sum()
}

/// NDCG@k of the current scores; `None` when the ideal DCG is zero.
pub(crate) fn ndcg(scores: &[f64], labels: &[u32], k: usize) -> Option<f64> {
    let idcg = ideal_dcg(labels, k);
    if idcg == 0.0 {
        return None;
    }
    let pos = positions(scores);
    let dcg: f64 = labels
        .iter()
        .zip(&pos)
        .map(|(&r, &p)| gain(r) * discount(p, k))
        .sum();
    Some(dcg / idcg)
}

/// Ascent direction for each document's score: for every pair with
/// `rel_i > rel_j`, `lambda = sigma * |dNDCG@k(i, j)| / (1 + exp(sigma (s_i - s_j)))`
/// is added to `i` and subtracted from `j`.
pub(crate) fn lambdas(scores: &[f64], labels: &[u32], k: usize, sigma: f64) -> Vec<f64> {
    let n = scores.len();
    let mut out = vec![0.0; n];
    let idcg = ideal_dcg(labels, k);
    if idcg == 0.0 {
        return out;
    }
    let pos = positions(scores);
    for i in 0..n {
        for j in 0..n {
            if labels[i] <= labels[j] {
                continue;
            }
            let delta = ((gain(labels[i]) - gain(labels[j]))
                * (discount(pos[i], k) - discount(pos[j], k)))
            .abs()
                / idcg;
            if delta == 0.0 {
                continue;
            }
            let rho = 1.0 / (1.0 + (sigma * (scores[i] - scores[j])).exp());
            let lam = sigma * rho * delta;
            out[i] += lam;
            out[j] -= lam;
        }
    }
    out
}
