//! Wilcoxon signed-rank test and the ground-truth significance table.

use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;
use thiserror::Error;

use crate::metrics::{table_rows, MetricRow, PhraseMetrics};

/// Largest effective sample size for which the null distribution is enumerated.
pub const EXACT_MAX_N: usize = 20;
/// Significance level used for the reported table.
pub const DEFAULT_ALPHA: f64 = 0.008;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StatsError {
    #[error("paired samples differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("paired sample is empty")]
    Empty,
    #[error("paired sample contains a non-finite value")]
    NonFinite,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum ZeroMethod {
    /// Drop zero differences before ranking.
    #[default]
    Wilcox,
    /// Rank zero differences with the rest, then drop them from the sums.
    Pratt,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WilcoxonResult {
    /// min(W+, W-).
    pub statistic: f64,
    pub w_plus: f64,
    pub w_minus: f64,
    /// Two-sided p-value.
    pub p_value: f64,
    pub n_effective: usize,
    pub exact: bool,
    /// Set when every difference was zero; `p_value` is then 1.
    pub all_zero_differences: bool,
}

/// Average ranks (1-based) of `values`, ties sharing the mean of their positions.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = rank;
        }
        i = j + 1;
    }
    ranks
}

pub fn wilcoxon_signed_rank(x: &[f64], y: &[f64]) -> Result<WilcoxonResult, StatsError> {
    wilcoxon_signed_rank_with(x, y, ZeroMethod::Wilcox)
}

pub fn wilcoxon_signed_rank_with(
    x: &[f64],
    y: &[f64],
    zeros: ZeroMethod,
) -> Result<WilcoxonResult, StatsError> {
    if x.len() != y.len() {
        return Err(StatsError::LengthMismatch(x.len(), y.len()));
    }
    if x.is_empty() {
        return Err(StatsError::Empty);
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(StatsError::NonFinite);
    }
    let diffs: Vec<f64> = x.iter().zip(y).map(|(a, b)| a - b).collect();
    let ranked: Vec<f64> = match zeros {
        ZeroMethod::Wilcox => diffs.iter().copied().filter(|d| *d != 0.0).collect(),
        ZeroMethod::Pratt => diffs.clone(),
    };
    let ranks = average_ranks(&ranked.iter().map(|d| d.abs()).collect::<Vec<_>>());
    let (signed_ranks, signs): (Vec<f64>, Vec<f64>) = ranks
        .iter()
        .zip(&ranked)
        .filter(|(_, d)| **d != 0.0)
        .map(|(r, d)| (*r, d.signum()))
        .unzip();

    let n = signed_ranks.len();
    if n == 0 {
        return Ok(WilcoxonResult {
            statistic: 0.0,
            w_plus: 0.0,
            w_minus: 0.0,
            p_value: 1.0,
            n_effective: 0,
            exact: true,
            all_zero_differences: true,
        });
    }
    let w_plus: f64 = signed_ranks.iter().zip(&signs).filter(|(_, s)| **s > 0.0).map(|(r, _)| r).sum();
    let w_minus: f64 = signed_ranks.iter().zip(&signs).filter(|(_, s)| **s < 0.0).map(|(r, _)| r).sum();
    let statistic = w_plus.min(w_minus);

    let (p_value, exact) = if n <= EXACT_MAX_N {
        (exact_p(&signed_ranks, statistic), true)
    } else {
        (normal_p(&signed_ranks, statistic), false)
    };
    Ok(WilcoxonResult {
        statistic,
        w_plus,
        w_minus,
        p_value,
        n_effective: n,
        exact,
        all_zero_differences: false,
    })
}

/// Two-sided exact p: 2·P(T ≤ w) under equiprobable signs, by counting subset
/// sums of the doubled (hence integral) ranks.
fn exact_p(ranks: &[f64], w: f64) -> f64 {
    let doubled: Vec<usize> = ranks.iter().map(|r| (r * 2.0).round() as usize).collect();
    let total: usize = doubled.iter().sum();
    let mut counts = vec![0f64; total + 1];
    counts[0] = 1.0;
    let mut reach = 0;
    for &r in &doubled {
        for s in (0..=reach).rev() {
            if counts[s] != 0.0 {
                counts[s + r] += counts[s];
            }
        }
        reach += r;
    }
    let limit = (w * 2.0).round() as usize;
    let tail: f64 = counts[..=limit.min(total)].iter().sum();
    let all = 2f64.powi(ranks.len() as i32);
    (2.0 * tail / all).min(1.0)
}

/// Normal approximation with tie-aware variance and continuity correction.
fn normal_p(ranks: &[f64], w: f64) -> f64 {
    let mean: f64 = ranks.iter().sum::<f64>() / 2.0;
    let var: f64 = ranks.iter().map(|r| r * r).sum::<f64>() / 4.0;
    let d = ((w - mean).abs() - 0.5).max(0.0);
    let z = d / var.sqrt();
    // 2·(1 - Φ(z)) = erfc(z/√2)
    erfc(z / std::f64::consts::SQRT_2).min(1.0)
}

/// Boundary rule: p equal to alpha counts as not different.
pub fn not_significantly_different(p: f64, alpha: f64) -> bool {
    p >= alpha
}

/// One comparison between ground truth and a variant for one table row.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub mean: Option<f64>,
    pub p_value: Option<f64>,
    /// `None` when the cell is NA.
    pub not_different: Option<bool>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VariantColumn {
    pub name: String,
    pub cells: Vec<Cell>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SignificanceTable {
    pub alpha: f64,
    pub rows: Vec<MetricRow>,
    pub variants: Vec<VariantColumn>,
    pub ground_truth: Vec<Option<f64>>,
}

/// A generated corpus to compare against ground truth.
pub struct VariantInput<'a> {
    pub name: &'a str,
    /// Whether the variant saw chords; CT Ratio is NA otherwise.
    pub chord_conditioned: bool,
    /// Per-phrase metrics aligned index-by-index with the ground truth.
    pub metrics: &'a [PhraseMetrics],
}

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

/// Means per row and Wilcoxon flags against ground truth. Pairs where either
/// side is undefined are dropped from the test.
pub fn significance_table(
    ground_truth: &[PhraseMetrics],
    variants: &[VariantInput<'_>],
    alpha: f64,
) -> SignificanceTable {
    use crate::metrics::Metric;
    let rows = table_rows();
    let gt_means = rows
        .iter()
        .map(|r| mean(ground_truth.iter().filter_map(|m| r.value(m))))
        .collect();
    let variants = variants
        .iter()
        .map(|v| {
            let cells = rows
                .iter()
                .map(|row| {
                    if row.metric == Metric::CtRatio && !v.chord_conditioned {
                        return Cell { mean: None, p_value: None, not_different: None };
                    }
                    let m = mean(v.metrics.iter().filter_map(|m| row.value(m)));
                    let (xs, ys): (Vec<f64>, Vec<f64>) = ground_truth
                        .iter()
                        .zip(v.metrics)
                        .filter_map(|(g, x)| Some((row.value(g)?, row.value(x)?)))
                        .unzip();
                    let p = wilcoxon_signed_rank(&xs, &ys).ok().map(|r| r.p_value);
                    Cell {
                        mean: m,
                        p_value: p,
                        not_different: p.map(|p| not_significantly_different(p, alpha)),
                    }
                })
                .collect();
            VariantColumn { name: v.name.to_string(), cells }
        })
        .collect();
    SignificanceTable { alpha, rows, variants, ground_truth: gt_means }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn identical_samples() {
        let x = [1.0, 2.0, 3.0];
        let r = wilcoxon_signed_rank(&x, &x).unwrap();
        assert_eq!(r.p_value, 1.0);
        assert!(r.all_zero_differences);
        assert_eq!(r.n_effective, 0);
    }

    #[test]
    fn all_positive_six() {
        let x = [2.0, 3.0, 4.0, 5.0, 6.0, 7.0];
        let y = [1.0; 6];
        let r = wilcoxon_signed_rank(&x, &y).unwrap();
        assert!(r.exact);
        assert_eq!(r.statistic, 0.0);
        assert_eq!(r.w_plus, 21.0);
        assert!((r.p_value - 0.03125).abs() < 1e-15);
    }

    #[test]
    fn ranks_average_ties() {
        assert_eq!(average_ranks(&[3.0, 1.0, 3.0, 2.0]), vec![3.5, 1.0, 3.5, 2.0]);
    }

    #[test]
    fn errors() {
        assert_eq!(wilcoxon_signed_rank(&[1.0], &[]), Err(StatsError::LengthMismatch(1, 0)));
        assert_eq!(wilcoxon_signed_rank(&[], &[]), Err(StatsError::Empty));
        assert_eq!(wilcoxon_signed_rank(&[f64::NAN], &[1.0]), Err(StatsError::NonFinite));
    }

    #[test]
    fn zero_methods_differ_only_in_ranking() {
        let x = [0.0, 1.0, -2.0, 3.0, 4.0];
        let y = [0.0; 5];
        let w = wilcoxon_signed_rank_with(&x, &y, ZeroMethod::Wilcox).unwrap();
        let p = wilcoxon_signed_rank_with(&x, &y, ZeroMethod::Pratt).unwrap();
        assert_eq!(w.n_effective, 4);
        assert_eq!(w.w_minus, 2.0);
        assert_eq!(p.w_minus, 3.0);
    }

    #[test]
    fn boundary_is_not_different() {
        assert!(not_significantly_different(0.008, 0.008));
        assert!(!not_significantly_different(0.0079, 0.008));
    }

    #[test]
    fn large_disjoint_is_significant() {
        let x: Vec<f64> = (0..164).map(|i| i as f64).collect();
        let y: Vec<f64> = (0..164).map(|i| i as f64 + 1000.0).collect();
        let r = wilcoxon_signed_rank(&x, &y).unwrap();
        assert!(!r.exact);
        assert!(r.p_value > 0.0 && r.p_value < 1e-20);
    }

    fn sample(n: usize) -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
        let v = proptest::collection::vec((-20i32..20).prop_map(|x| x as f64 / 2.0), n);
        (v.clone(), v)
    }

    proptest! {
        #[test]
        fn symmetric_in_arguments((x, y) in (1usize..40).prop_flat_map(sample)) {
            let a = wilcoxon_signed_rank(&x, &y).unwrap();
            let b = wilcoxon_signed_rank(&y, &x).unwrap();
            prop_assert_eq!(a.p_value, b.p_value);
            prop_assert!(a.p_value > 0.0 && a.p_value <= 1.0);
            prop_assert!(a.statistic >= 0.0);
        }
    }
}
