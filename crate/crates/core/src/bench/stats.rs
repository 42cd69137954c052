//! Rank tests with exact small-sample p-values.
//!
//! Ranks are handled doubled (2 × midrank), which keeps every rank sum an
//! integer so the exact null distributions can be accumulated by counting.

use statrs::distribution::{ContinuousCDF, Normal};

use crate::{Error, Result};

/// Largest pooled size (Mann-Whitney) or nonzero-pair count (Wilcoxon)
/// handled by exact enumeration.
pub const EXACT_LIMIT: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MannWhitney {
    /// min(U_a, U_b).
    pub u: f64,
    pub p: f64,
    pub exact: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Wilcoxon {
    /// min(W+, W-).
    pub w: f64,
    pub p: f64,
    pub exact: bool,
    /// Every difference was zero; `p` is reported as 1.
    pub undefined: bool,
}

/// Doubled midranks of `values` (ascending; ties share the mean rank).
pub fn doubled_ranks(values: &[f64]) -> Vec<u64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        // ranks i+1 ..= j+1 averaged, doubled
        let r = (i + 1 + j + 1) as u64;
        for &k in &order[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}

fn tie_term(values: &[f64]) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut sum = 0.0;
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i;
        while j + 1 < sorted.len() && sorted[j + 1] == sorted[i] {
            j += 1;
        }
        let t = (j - i + 1) as f64;
        sum += t * t * t - t;
        i = j + 1;
    }
    sum
}

/// Two-sided normal tail with continuity correction `cc` on |x - mean|.
fn normal_two_sided(dev: f64, sd: f64, cc: f64) -> f64 {
    if sd <= 0.0 {
        return 1.0;
    }
    let z = ((dev - cc).max(0.0)) / sd;
    let n = Normal::new(0.0, 1.0).expect("standard normal");
    (2.0 * (1.0 - n.cdf(z))).clamp(0.0, 1.0)
}

/// counts[k][s]: number of k-subsets of `items` with sum s.
fn subset_sum_counts(items: &[u64], k_max: usize) -> Vec<Vec<f64>> {
    let total: u64 = items.iter().sum();
    let mut counts = vec![vec![0.0; total as usize + 1]; k_max + 1];
    counts[0][0] = 1.0;
    for &x in items {
        for k in (1..=k_max).rev() {
            for s in (x as usize..=total as usize).rev() {
                counts[k][s] += counts[k - 1][s - x as usize];
            }
        }
    }
    counts
}

pub fn mann_whitney_u(a: &[f64], b: &[f64]) -> Result<MannWhitney> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptySample);
    }
    let (na, nb) = (a.len(), b.len());
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let ranks = doubled_ranks(&pooled);
    let ra2: u64 = ranks[..na].iter().sum();
    // 2·U_a = 2·R_a - na(na+1); dev2 is |2·U_a - na·nb| = 2·|U_a - mean|
    let base = (na * (na + 1)) as i64;
    let dev2 = |r2: u64| (r2 as i64 - base - (na * nb) as i64).abs();
    let ua = (ra2 as i64 - base) as f64 / 2.0;
    let u = ua.min((na * nb) as f64 - ua);
    let observed = dev2(ra2);
    let n = na + nb;
    if n <= EXACT_LIMIT {
        let counts = subset_sum_counts(&ranks, na);
        let total: f64 = counts[na].iter().sum();
        let extreme: f64 = counts[na]
            .iter()
            .enumerate()
            .filter(|&(s, &c)| c > 0.0 && dev2(s as u64) >= observed)
            .map(|(_, &c)| c)
            .sum();
        return Ok(MannWhitney {
            u,
            p: (extreme / total).min(1.0),
            exact: true,
        });
    }
    let nf = n as f64;
    let var = (na * nb) as f64 / 12.0 * ((nf + 1.0) - tie_term(&pooled) / (nf * (nf - 1.0)));
    let dev = observed as f64 / 2.0;
    Ok(MannWhitney {
        u,
        p: normal_two_sided(dev, var.max(0.0).sqrt(), 0.5),
        exact: false,
    })
}

pub fn wilcoxon_signed_rank(a: &[f64], b: &[f64]) -> Result<Wilcoxon> {
    if a.is_empty() {
        return Err(Error::EmptySample);
    }
    if a.len() != b.len() {
        return Err(Error::Dimension {
            expected: a.len(),
            got: b.len(),
        });
    }
    let diffs: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).filter(|d| *d != 0.0).collect();
    if diffs.is_empty() {
        return Ok(Wilcoxon {
            w: 0.0,
            p: 1.0,
            exact: true,
            undefined: true,
        });
    }
    let mags: Vec<f64> = diffs.iter().map(|d| d.abs()).collect();
    let ranks = doubled_ranks(&mags);
    let total2: u64 = ranks.iter().sum();
    let plus2: u64 = ranks.iter().zip(&diffs).filter(|(_, d)| **d > 0.0).map(|(r, _)| r).sum();
    // deviation of 2·W+ from its mean, doubled again to stay integral
    let dev = |w2: u64| (2 * w2 as i64 - total2 as i64).abs();
    let w = plus2.min(total2 - plus2) as f64 / 2.0;
    let observed = dev(plus2);
    let m = diffs.len();
    if m <= EXACT_LIMIT {
        // distribution of the positive-rank sum over all 2^m sign patterns
        let mut counts = vec![0.0; total2 as usize + 1];
        counts[0] = 1.0;
        for &r in &ranks {
            for s in (r as usize..=total2 as usize).rev() {
                counts[s] += counts[s - r as usize];
            }
        }
        let all = 2f64.powi(m as i32);
        let extreme: f64 = counts
            .iter()
            .enumerate()
            .filter(|&(s, &c)| c > 0.0 && dev(s as u64) >= observed)
            .map(|(_, &c)| c)
            .sum();
        return Ok(Wilcoxon {
            w,
            p: (extreme / all).min(1.0),
            exact: true,
            undefined: false,
        });
    }
    let mf = m as f64;
    let var = mf * (mf + 1.0) * (2.0 * mf + 1.0) / 24.0 - tie_term(&mags) / 48.0;
    Ok(Wilcoxon {
        w,
        p: normal_two_sided(observed as f64 / 4.0, var.max(0.0).sqrt(), 0.5),
        exact: false,
        undefined: false,
    })
}

/// Bonferroni-adjusted p for `m` comparisons.
pub fn bonferroni(p: f64, m: usize) -> f64 {
    (p * m as f64).min(1.0)
}
