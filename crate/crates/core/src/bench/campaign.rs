use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use petit::{Program, TestSuite};
use rayon::prelude::*;

use super::stats::{bonferroni, mann_whitney_u, wilcoxon_signed_rank};
use crate::codesim::sig9;
use crate::repair::{run_trial, Learned, Operator, Scope, Strategy, TrialConfig, TrialReport};
use crate::{Error, Result};

/// One buggy revision together with the artifacts learned on it.
#[derive(Debug, Clone)]
pub struct Bug {
    pub id: String,
    pub program: Program,
    pub learned: Learned,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CampaignConfig {
    pub strategies: Vec<Strategy>,
    pub scopes: Vec<Scope>,
    pub seeds: Vec<u64>,
    pub budget: usize,
    /// Worker threads; 0 lets rayon decide.
    pub jobs: usize,
}

impl Default for CampaignConfig {
    fn default() -> Self {
        CampaignConfig {
            strategies: Strategy::ALL.to_vec(),
            scopes: vec![Scope::Local],
            seeds: vec![1, 2, 3],
            budget: crate::repair::DEFAULT_BUDGET,
            jobs: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Run {
    pub bug: String,
    pub config: TrialConfig,
    pub report: TrialReport,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CampaignResult {
    /// In (bug, strategy, scope, seed) order.
    pub runs: Vec<Run>,
}

/// Full factorial bugs × strategies × scopes × seeds, trials in parallel.
pub fn run_campaign(bugs: &[Bug], suite: &TestSuite, config: &CampaignConfig) -> Result<CampaignResult> {
    let mut jobs = Vec::new();
    for (bi, _) in bugs.iter().enumerate() {
        for &strategy in &config.strategies {
            for &scope in &config.scopes {
                for &seed in &config.seeds {
                    jobs.push((
                        bi,
                        TrialConfig {
                            strategy,
                            scope,
                            seed,
                            budget: config.budget,
                            operators: Operator::ALL.to_vec(),
                        },
                    ));
                }
            }
        }
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.jobs)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    let runs = pool.install(|| {
        jobs.par_iter()
            .map(|(bi, cfg)| {
                let bug = &bugs[*bi];
                Run {
                    bug: bug.id.clone(),
                    config: cfg.clone(),
                    report: run_trial(&bug.program, suite, &bug.learned, cfg),
                }
            })
            .collect()
    });
    Ok(CampaignResult { runs })
}

fn distinct<T: Ord + Clone>(items: impl Iterator<Item = T>) -> Vec<T> {
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for x in items {
        if seen.insert(x.clone()) {
            out.push(x);
        }
    }
    out
}

impl CampaignResult {
    /// Same result with every run of `strategy` dropped.
    pub fn without(&self, strategy: Strategy) -> CampaignResult {
        CampaignResult {
            runs: self.runs.iter().filter(|r| r.config.strategy != strategy).cloned().collect(),
        }
    }

    pub fn bugs(&self) -> Vec<String> {
        distinct(self.runs.iter().map(|r| r.bug.clone()))
    }

    pub fn strategies(&self) -> Vec<Strategy> {
        distinct(self.runs.iter().map(|r| r.config.strategy))
    }

    pub fn scopes(&self) -> Vec<Scope> {
        distinct(self.runs.iter().map(|r| r.config.scope))
    }

    fn select<'a>(&'a self, bug: Option<&'a str>, strategy: Strategy, scope: Scope) -> impl Iterator<Item = &'a Run> {
        self.runs.iter().filter(move |r| {
            r.config.strategy == strategy && r.config.scope == scope && bug.is_none_or(|b| r.bug == b)
        })
    }

    pub fn campaign_csv(&self) -> String {
        let mut out = String::from("bug,strategy,scope,seed,attempts,compilable_attempts,patches,attempts_first_patch\n");
        for r in &self.runs {
            let first = r.report.attempts_first_patch.map_or_else(|| "NA".to_string(), |a| a.to_string());
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                r.bug,
                r.config.strategy,
                r.config.scope,
                r.config.seed,
                r.report.attempts,
                r.report.compilable_attempts,
                r.report.patches.len(),
                first
            );
        }
        out
    }

    /// Each non-baseline strategy against the baseline at every scope:
    /// Wilcoxon on patch counts paired per bug (summed over seeds), and
    /// Mann-Whitney on per-trial attempts. Bonferroni over the comparisons
    /// of one metric.
    pub fn stats_csv(&self) -> String {
        let mut out = String::from("metric,strategy,scope,test,stat,p,p_bonferroni\n");
        let strategies = self.strategies();
        if !strategies.contains(&Strategy::Baseline) {
            return out;
        }
        let treatments: Vec<Strategy> = strategies.into_iter().filter(|s| *s != Strategy::Baseline).collect();
        let scopes = self.scopes();
        let bugs = self.bugs();
        let m = treatments.len() * scopes.len();

        for &s in &treatments {
            for &scope in &scopes {
                let per_bug = |strategy: Strategy| -> Vec<f64> {
                    bugs.iter()
                        .map(|b| {
                            self.select(Some(b), strategy, scope)
                                .map(|r| r.report.patches.len() as f64)
                                .sum()
                        })
                        .collect()
                };
                let row = wilcoxon_signed_rank(&per_bug(s), &per_bug(Strategy::Baseline))
                    .map(|w| (sig9(w.w), w.p));
                push_row(&mut out, "patches", s, scope, "wilcoxon", row, m);
            }
        }
        for &s in &treatments {
            for &scope in &scopes {
                let attempts = |strategy: Strategy| -> Vec<f64> {
                    self.select(None, strategy, scope)
                        .map(|r| r.report.attempts as f64)
                        .collect()
                };
                let row = mann_whitney_u(&attempts(s), &attempts(Strategy::Baseline)).map(|t| (sig9(t.u), t.p));
                push_row(&mut out, "attempts", s, scope, "mann-whitney", row, m);
            }
        }
        out
    }

    /// Per bug, strategy and scope: D = distinct patches of the strategy over
    /// all seeds, B = those of the baseline, ratio = |D\B| / |D|.
    pub fn setdiff_csv(&self) -> String {
        let mut out = String::from("bug,strategy,scope,|D|,|B|,|D\\B|,ratio\n");
        let strategies = self.strategies();
        if !strategies.contains(&Strategy::Baseline) {
            return out;
        }
        let identities = |bug: &str, strategy: Strategy, scope: Scope| -> BTreeSet<String> {
            self.select(Some(bug), strategy, scope)
                .flat_map(|r| r.report.patches.iter().map(|p| p.identity()))
                .collect()
        };
        for bug in self.bugs() {
            for &s in strategies.iter().filter(|s| **s != Strategy::Baseline) {
                for scope in self.scopes() {
                    let d = identities(&bug, s, scope);
                    let b = identities(&bug, Strategy::Baseline, scope);
                    let only = d.difference(&b).count();
                    let ratio = if d.is_empty() {
                        "NA".to_string()
                    } else {
                        sig9(only as f64 / d.len() as f64)
                    };
                    let _ = writeln!(out, "{bug},{s},{scope},{},{},{only},{ratio}", d.len(), b.len());
                }
            }
        }
        out
    }

    /// One JSON patch record per line.
    pub fn patches_jsonl(&self) -> String {
        let mut out = String::new();
        for r in &self.runs {
            for p in &r.report.patches {
                let rec = serde_json::to_string(&p.record(&r.bug, &r.config)).expect("plain record");
                out.push_str(&rec);
                out.push('\n');
            }
        }
        out
    }

    /// Write the three CSVs, the patch records and every patch diff under
    /// `dir`. Any previous `patches/` tree there is replaced.
    pub fn write_outputs(&self, dir: &Path) -> Result<()> {
        let io = |path: &Path| {
            let path = path.to_path_buf();
            move |source| Error::Io { path, source }
        };
        fs::create_dir_all(dir).map_err(io(dir))?;
        for (name, body) in [
            ("campaign.csv", self.campaign_csv()),
            ("stats.csv", self.stats_csv()),
            ("setdiff.csv", self.setdiff_csv()),
            ("patches.jsonl", self.patches_jsonl()),
        ] {
            let path = dir.join(name);
            fs::write(&path, body).map_err(io(&path))?;
        }
        let patches = dir.join("patches");
        if patches.exists() {
            fs::remove_dir_all(&patches).map_err(io(&patches))?;
        }
        for r in &self.runs {
            if r.report.patches.is_empty() {
                continue;
            }
            let bug_dir = patches.join(&r.bug);
            fs::create_dir_all(&bug_dir).map_err(io(&bug_dir))?;
            for (i, p) in r.report.patches.iter().enumerate() {
                let path = bug_dir.join(format!(
                    "{}-{}-seed{}-{:03}.diff",
                    r.config.strategy,
                    r.config.scope,
                    r.config.seed,
                    i + 1
                ));
                fs::write(&path, &p.diff).map_err(io(&path))?;
            }
        }
        Ok(())
    }
}

fn push_row(out: &mut String, metric: &str, s: Strategy, scope: Scope, test: &str, row: Result<(String, f64)>, m: usize) {
    match row {
        Ok((stat, p)) => {
            let _ = writeln!(out, "{metric},{s},{scope},{test},{stat},{},{}", sig9(p), sig9(bonferroni(p, m)));
        }
        Err(_) => {
            let _ = writeln!(out, "{metric},{s},{scope},{test},NA,NA,NA");
        }
    }
}
