//! Small-sample statistics for the experiment reports.

use serde::Serialize;

pub fn median(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Wilcoxon {
    /// Pairs left after dropping zero differences.
    pub n: usize,
    /// Rank sum of the positive differences `x - y`.
    pub w_plus: f64,
    /// Exact one-sided p-value for `x < y`.
    pub p_less: f64,
}

/// Average ranks (1-based) of `values`, ties sharing the mean rank.
pub fn ranks(values: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut out = vec![0.0; values.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && values[idx[j + 1]] == values[idx[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            out[k] = r;
        }
        i = j + 1;
    }
    out
}

/// Paired signed-rank test against the alternative that `x` tends to be smaller than `y`.
///
/// The null distribution is enumerated exactly over sign flips of the
/// (tie-averaged) ranks, so ties and small samples need no approximation.
pub fn wilcoxon_signed_rank(x: &[f64], y: &[f64]) -> Wilcoxon {
    assert_eq!(x.len(), y.len(), "paired samples differ in length");
    let d: Vec<f64> = x.iter().zip(y).map(|(a, b)| a - b).filter(|d| *d != 0.0).collect();
    let n = d.len();
    if n == 0 {
        return Wilcoxon { n, w_plus: 0.0, p_less: 1.0 };
    }
    let abs: Vec<f64> = d.iter().map(|v| v.abs()).collect();
    let r = ranks(&abs);
    // doubled ranks are integers even with ties
    let r2: Vec<usize> = r.iter().map(|v| (2.0 * v).round() as usize).collect();
    let w2: usize = d.iter().zip(&r2).filter(|(v, _)| **v > 0.0).map(|(_, k)| *k).sum();
    let total: usize = r2.iter().sum();
    let mut dist = vec![0.0f64; total + 1];
    dist[0] = 1.0;
    let mut reach = 0;
    for &k in &r2 {
        for s in (0..=reach).rev() {
            let p = dist[s] * 0.5;
            dist[s] = p;
            dist[s + k] += p;
        }
        reach += k;
    }
    let p_less: f64 = dist[..=w2].iter().sum::<f64>().min(1.0);
    Wilcoxon { n, w_plus: w2 as f64 / 2.0, p_less }
}
