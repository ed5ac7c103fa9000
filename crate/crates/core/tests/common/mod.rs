//! Independent reference implementations used by the integration tests.
#![allow(dead_code)]

use pareto_nas::arch::{ArchConfig, BiasConvention};

/// Decoder count from the closed-form per-layer terms, in i128.
pub fn decoder_oracle(c: &ArchConfig) -> i128 {
    let d = c.d_model as i128;
    let mut total = 0i128;
    for &f in &c.d_inner {
        let f = f as i128;
        let attn = match c.backbone.bias_convention {
            BiasConvention::AttnBiased => 4 * d * d + 4 * d,
            BiasConvention::AttnUnbiased => 5 * d * d + 2 * d,
        };
        let ffn = d * f + f + f * d + d;
        let norms = 4 * d;
        total += attn + ffn + norms;
    }
    if c.backbone.include_final_layernorm {
        total += 2 * d;
    }
    if c.backbone.include_positional_embedding {
        total += c.backbone.max_positions as i128 * d;
    }
    total
}

/// Rank of each value: count of smaller values plus the midpoint of its tie group.
pub fn brute_ranks(v: &[f64]) -> Vec<f64> {
    v.iter()
        .map(|&x| {
            let less = v.iter().filter(|&&y| y < x).count() as f64;
            let equal = v.iter().filter(|&&y| y == x).count() as f64;
            less + (equal + 1.0) / 2.0
        })
        .collect()
}

pub fn pearson_two_pass(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let cov: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let vy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    cov / (vx * vy).sqrt()
}

pub fn spearman_oracle(x: &[f64], y: &[f64]) -> f64 {
    pearson_two_pass(&brute_ranks(x), &brute_ranks(y))
}

/// Top-m ids by position counting: an item's position is the number of
/// items that beat it, ties broken by smaller id.
fn top_ids(items: &[(u32, f64)], m: usize, lower_better: bool) -> Vec<u32> {
    let beats = |a: &(u32, f64), b: &(u32, f64)| {
        let better = if lower_better { a.1 < b.1 } else { a.1 > b.1 };
        better || (a.1 == b.1 && a.0 < b.0)
    };
    items
        .iter()
        .filter(|x| items.iter().filter(|y| beats(y, x)).count() < m)
        .map(|x| x.0)
        .collect()
}

pub fn common_ratio_oracle(truth: &[(u32, f64)], proxy: &[(u32, f64)], top_percent: f64) -> f64 {
    let n = truth.len();
    let mut m = 0;
    // Smallest m with m * 100 >= top_percent * n, done in integers of 1e-6 percent.
    let p = (top_percent * 1e6).round() as u128;
    while (m as u128) * 100 * 1_000_000 < p * n as u128 {
        m += 1;
    }
    let m = m.clamp(1, n);
    let a = top_ids(truth, m, true);
    let b = top_ids(proxy, m, false);
    a.iter().filter(|i| b.contains(i)).count() as f64 / m as f64
}

/// (score, latency, memory): higher score, lower latency and memory are better.
pub fn dominates3(a: (f64, f64, f64), b: (f64, f64, f64)) -> bool {
    a.0 >= b.0 && a.1 <= b.1 && a.2 <= b.2 && (a.0 > b.0 || a.1 < b.1 || a.2 < b.2)
}

pub fn nd_oracle(pts: &[(f64, f64, f64)]) -> Vec<usize> {
    (0..pts.len())
        .filter(|&i| !pts.iter().any(|&q| dominates3(q, pts[i])))
        .collect()
}
