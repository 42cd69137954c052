mod common;

use common::{fixture, project};
use ingrepair::bench::{run_campaign, seed_bugs, Bug, CampaignConfig};
use ingrepair::project::ProjectLayout;
use ingrepair::repair::{Learned, Scope, Strategy};
use ingrepair::Error;
use petit::{render, run_tests, Program, TestSuite};

fn planted() -> (Program, TestSuite) {
    project(
        "type M {
            fn max(a: int, b: int) -> int { if (a > b) { return a; } return a; }
            fn second(a: int, b: int) -> int { return b; }
            fn twice(a: int) -> int { let d: int = a + a; return d; }
        }",
        "test bigger { assert(M.max(1, 2) == 2); }
         test first { assert(M.max(3, 2) == 3); }
         test second { assert(M.second(1, 2) == 2); }
         test twice { assert(M.twice(4) == 8); }",
    )
}

fn small_campaign(jobs: usize) -> ingrepair::bench::CampaignResult {
    let (p, s) = planted();
    let bugs = vec![Bug {
        id: "planted".into(),
        program: p,
        learned: Learned::empty(),
    }];
    let config = CampaignConfig {
        strategies: vec![Strategy::Baseline, Strategy::Re],
        scopes: vec![Scope::Local, Scope::Package],
        seeds: vec![1, 2, 3],
        budget: 200,
        jobs,
    };
    run_campaign(&bugs, &s, &config).unwrap()
}

#[test]
fn factorial_rows_and_order() {
    let r = small_campaign(0);
    assert_eq!(r.runs.len(), 2 * 2 * 3);
    let csv = r.campaign_csv();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 13);
    assert_eq!(lines[0], "bug,strategy,scope,seed,attempts,compilable_attempts,patches,attempts_first_patch");
    assert!(lines[1].starts_with("planted,baseline,local,1,"));
    assert!(lines[12].starts_with("planted,re,package,3,"));
    for run in &r.runs {
        assert!(run.report.attempts <= 200);
        assert!(!run.report.patches.is_empty());
    }
}

#[test]
fn stats_rows_are_comparisons_times_metrics() {
    let r = small_campaign(0);
    let stats = r.stats_csv();
    let rows: Vec<Vec<&str>> = stats.lines().skip(1).map(|l| l.split(',').collect()).collect();
    // one treatment × two scopes × two metrics
    assert_eq!(rows.len(), 4);
    for row in &rows {
        assert_eq!(row.len(), 7);
        if row[5] != "NA" {
            let p: f64 = row[5].parse().unwrap();
            let adjusted: f64 = row[6].parse().unwrap();
            assert!((adjusted - (2.0 * p).min(1.0)).abs() < 1e-8, "{row:?}");
        }
    }
    assert_eq!(rows.iter().filter(|r| r[3] == "wilcoxon").count(), 2);
    assert_eq!(rows.iter().filter(|r| r[3] == "mann-whitney").count(), 2);
}

#[test]
fn dropping_a_strategy_keeps_the_rest() {
    let r = small_campaign(0);
    let base = r.without(Strategy::Re);
    assert_eq!(base.runs.len(), 6);
    assert!(base.runs.iter().all(|x| x.config.strategy == Strategy::Baseline));
    let kept: Vec<_> = r.runs.iter().filter(|x| x.config.strategy == Strategy::Baseline).cloned().collect();
    assert_eq!(base.runs, kept);
    assert_eq!(base.stats_csv().lines().count(), 1);
    assert_eq!(base.setdiff_csv().lines().count(), 1);
}

#[test]
fn treatment_identical_to_baseline_has_empty_set_difference() {
    // without clusters, RE resolves exactly like the baseline
    let r = small_campaign(0);
    for line in r.setdiff_csv().lines().skip(1) {
        let cells: Vec<&str> = line.split(',').collect();
        assert_eq!(cells[3], cells[4], "{line}");
        assert_eq!(cells[5], "0");
        assert_eq!(cells[6], "0");
    }
}

#[test]
fn thread_count_does_not_change_results() {
    let a = small_campaign(1);
    let b = small_campaign(4);
    assert_eq!(a, b);
    assert_eq!(a.campaign_csv(), b.campaign_csv());
    assert_eq!(a.patches_jsonl(), b.patches_jsonl());
}

#[test]
fn outputs_on_disk() {
    let r = small_campaign(0);
    let dir = tempfile::tempdir().unwrap();
    r.write_outputs(dir.path()).unwrap();
    let patches: usize = r.runs.iter().map(|x| x.report.patches.len()).sum();
    let diffs = common::tree(&dir.path().join("patches")).len();
    assert_eq!(diffs, patches);
    let jsonl = std::fs::read_to_string(dir.path().join("patches.jsonl")).unwrap();
    assert_eq!(jsonl.lines().count(), patches);
    let first: serde_json::Value = serde_json::from_str(jsonl.lines().next().unwrap()).unwrap();
    assert_eq!(first["bug_id"], "planted");
    assert!(dir.path().join("patches/planted/baseline-local-seed1-001.diff").exists());
}

#[test]
fn seeded_bugs_are_real_and_reversible() {
    let layout = ProjectLayout::new(fixture("calc"));
    let program = layout.program().unwrap();
    let suite = layout.suite(&program).unwrap();
    let bugs = seed_bugs(&program, &suite, 7, 4).unwrap();
    assert_eq!(bugs.len(), 4);
    let again = seed_bugs(&program, &suite, 7, 4).unwrap();
    assert_eq!(bugs, again);
    let base = render(&program);
    for (i, bug) in bugs.iter().enumerate() {
        assert!(bug.id.starts_with(&format!("bug{:02}-", i + 1)));
        let coverage = run_tests(&bug.program, &suite, false);
        let failing: Vec<String> = coverage.failing().map(|r| r.name.clone()).collect();
        assert!(!failing.is_empty());
        assert_eq!(failing, bug.failing);
        assert!(petit::check_program(&bug.program).is_empty());
        let restored = bug.restore();
        assert_eq!(render(&restored), base);
        assert!(run_tests(&restored, &suite, false).all_pass());
    }
    let texts: std::collections::HashSet<_> = bugs.iter().map(|b| render(&b.program)).collect();
    assert_eq!(texts.len(), bugs.len());
}

#[test]
fn seeding_rejects_failing_base_and_impossible_counts() {
    let (p, s) = planted();
    assert!(matches!(seed_bugs(&p, &s, 1, 1), Err(Error::Config(_))));
    let (p, s) = project(
        "type M { fn one() -> int { return 1; } }",
        "test one { assert(M.one() == 1); }",
    );
    match seed_bugs(&p, &s, 1, 5) {
        Err(Error::NotEnoughMutants { found, wanted }) => assert_eq!((found, wanted), (2, 5)),
        other => panic!("{other:?}"),
    }
}
