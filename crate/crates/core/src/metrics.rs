//! Ranking-quality metrics (SRC, Common Ratio) and perplexity.

use serde::{Deserialize, Serialize};

use crate::error::{NasError, Result};

/// Values with their 1-based, tie-averaged ranks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedSeries {
    pub values: Vec<f64>,
    pub ranks: Vec<f64>,
}

impl RankedSeries {
    pub fn new(values: Vec<f64>) -> Self {
        let ranks = average_ranks(&values);
        RankedSeries { values, ranks }
    }
}

/// 1-based ranks, ties receiving the mean of the positions they span.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && values[order[j]] == values[order[i]] {
            j += 1;
        }
        // Positions i+1 ..= j share the average rank.
        let avg = (i + 1 + j) as f64 / 2.0;
        for &k in &order[i..j] {
            ranks[k] = avg;
        }
        i = j;
    }
    ranks
}

/// Pearson correlation of tie-averaged ranks. Doubled ranks are integers,
/// so the sums below are exact for any realistic length.
fn rank_pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len() as f64;
    let (mut sx, mut sy, mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (a, b) = (2.0 * a, 2.0 * b);
        sx += a;
        sy += b;
        sxx += a * a;
        syy += b * b;
        sxy += a * b;
    }
    let vx = n * sxx - sx * sx;
    let vy = n * syy - sy * sy;
    if vx == 0.0 || vy == 0.0 {
        return None;
    }
    Some(((n * sxy - sx * sy) / (vx * vy).sqrt()).clamp(-1.0, 1.0))
}

/// Spearman's rank correlation: Pearson correlation of tie-averaged ranks.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(NasError::LengthMismatch(x.len(), y.len()));
    }
    if x.len() < 2 {
        return Err(NasError::DegenerateSeries(format!(
            "need at least 2 values, got {}",
            x.len()
        )));
    }
    if x.iter().chain(y).any(|v| v.is_nan()) {
        return Err(NasError::DegenerateSeries("series contains NaN".into()));
    }
    rank_pearson(&average_ranks(x), &average_ranks(y))
        .ok_or_else(|| NasError::DegenerateSeries("a series is constant".into()))
}

/// Fraction of the top `top_percent`% architectures shared by the
/// ground-truth ranking (`truth` quality, lower is better) and the proxy
/// ranking (`proxy` score, higher is better).
///
/// The cut is `m = ceil(top_percent / 100 * n)`; ties at the cut are broken
/// by ascending id.
pub fn common_ratio<I: Ord + Clone>(
    truth: &[(I, f64)],
    proxy: &[(I, f64)],
    top_percent: f64,
) -> Result<f64> {
    if !(top_percent > 0.0 && top_percent <= 100.0) {
        return Err(NasError::InvalidSettings(format!(
            "top_percent {top_percent} not in (0, 100]"
        )));
    }
    let mut truth_ids: Vec<&I> = truth.iter().map(|(i, _)| i).collect();
    let mut proxy_ids: Vec<&I> = proxy.iter().map(|(i, _)| i).collect();
    truth_ids.sort();
    proxy_ids.sort();
    if truth_ids != proxy_ids {
        return Err(NasError::IdMismatch(format!(
            "{} truth ids vs {} proxy ids with differing members",
            truth.len(),
            proxy.len()
        )));
    }
    if truth_ids.windows(2).any(|w| w[0] == w[1]) {
        return Err(NasError::IdMismatch("duplicate ids".into()));
    }
    let n = truth.len();
    if n == 0 {
        return Err(NasError::IdMismatch("empty id set".into()));
    }
    let m = top_count(top_percent, n);

    let mut by_truth: Vec<&(I, f64)> = truth.iter().collect();
    by_truth.sort_by(|a, b| a.1.total_cmp(&b.1).then_with(|| a.0.cmp(&b.0)));
    let mut by_proxy: Vec<&(I, f64)> = proxy.iter().collect();
    by_proxy.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));

    let mut top_truth: Vec<&I> = by_truth[..m].iter().map(|(i, _)| i).collect();
    top_truth.sort();
    let common = by_proxy[..m]
        .iter()
        .filter(|(i, _)| top_truth.binary_search(&i).is_ok())
        .count();
    Ok(common as f64 / m as f64)
}

/// `ceil(top_percent / 100 * n)`, clamped to `1..=n`, robust to decimal
/// percentages that are not exact in binary.
pub fn top_count(top_percent: f64, n: usize) -> usize {
    let x = top_percent * n as f64 / 100.0;
    let m = (x - 1e-9).ceil();
    (m.max(1.0) as usize).min(n)
}

/// Perplexity from cross-entropy in bits: `2^H`.
pub fn perplexity(cross_entropy_bits: f64) -> f64 {
    cross_entropy_bits.exp2()
}
