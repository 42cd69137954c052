//! Spectrum-based fault localization with the Ochiai coefficient.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use petit::{CoverageMatrix, StatementId};

pub const DEFAULT_THRESHOLD: f64 = 0.1;
pub const DEFAULT_CAP: usize = 1000;

/// `ef / sqrt(total_failed * (ef + ep))`, or 0 when the denominator is 0.
pub fn ochiai(ef: usize, ep: usize, total_failed: usize) -> f64 {
    let denom = (total_failed as f64 * (ef + ep) as f64).sqrt();
    if denom == 0.0 {
        0.0
    } else {
        ef as f64 / denom
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Suspicious {
    pub statement: StatementId,
    pub score: f64,
}

/// Statements scoring at least `threshold`, most suspicious first (ties in
/// statement order), at most `cap` of them. Empty if no test fails.
pub fn localize(coverage: &CoverageMatrix, threshold: f64, cap: usize) -> Vec<Suspicious> {
    let total_failed = coverage.failing_count();
    if total_failed == 0 {
        return Vec::new();
    }
    let mut counts: BTreeMap<&StatementId, (usize, usize)> = BTreeMap::new();
    for r in &coverage.results {
        let failed = !r.outcome.passed();
        for sid in &r.covered {
            let c = counts.entry(sid).or_default();
            if failed {
                c.0 += 1;
            } else {
                c.1 += 1;
            }
        }
    }
    let mut out: Vec<Suspicious> = counts
        .into_iter()
        .map(|(sid, (ef, ep))| Suspicious {
            statement: sid.clone(),
            score: ochiai(ef, ep, total_failed),
        })
        .filter(|s| s.score >= threshold)
        .collect();
    // stable sort keeps statement order among equal scores
    out.sort_by(|a, b| b.score.total_cmp(&a.score));
    out.truncate(cap);
    out
}

pub fn to_csv(list: &[Suspicious]) -> String {
    let mut out = String::from("statement_id,suspiciousness\n");
    for s in list {
        let _ = writeln!(out, "{},{}", s.statement, s.score);
    }
    out
}
