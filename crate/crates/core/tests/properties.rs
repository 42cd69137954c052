mod common;

use std::collections::HashSet;

use common::project;
use ingrepair::bench::{bonferroni, mann_whitney_u, wilcoxon_signed_rank};
use ingrepair::corpus::normalize;
use ingrepair::embed::Dictionary;
use ingrepair::faultloc::localize;
use ingrepair::lexclust::ClusterMap;
use ingrepair::repair::{
    replay_patch, resolve_default, resolve_embeddings, run_trial_observed, Access, Ingredient, Learned, Operator,
    Strategy as Navigation, TrialConfig, TrialEvent,
};
use petit::interp::TestResult;
use petit::scope::free_variables;
use petit::{parse_stmt, CoverageMatrix, Outcome, StatementId, Type, VariableContext};
use proptest::prelude::*;

fn u_stat(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .flat_map(|x| b.iter().map(move |y| if x > y { 1.0 } else if x == y { 0.5 } else { 0.0 }))
        .sum()
}

/// Two-sided permutation p-value of U by listing every split of the pool.
fn mw_enumerated(a: &[f64], b: &[f64]) -> f64 {
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let n = pooled.len();
    let centre = (a.len() * b.len()) as f64 / 2.0;
    let observed = (u_stat(a, b) - centre).abs();
    let (mut hits, mut total) = (0usize, 0usize);
    for mask in 0u32..1 << n {
        if mask.count_ones() as usize != a.len() {
            continue;
        }
        let xa: Vec<f64> = (0..n).filter(|i| mask >> i & 1 == 1).map(|i| pooled[i]).collect();
        let xb: Vec<f64> = (0..n).filter(|i| mask >> i & 1 == 0).map(|i| pooled[i]).collect();
        total += 1;
        if (u_stat(&xa, &xb) - centre).abs() >= observed - 1e-9 {
            hits += 1;
        }
    }
    hits as f64 / total as f64
}

fn wilcoxon_enumerated(d: &[f64]) -> f64 {
    let mags: Vec<f64> = d.iter().map(|x| x.abs()).collect();
    let rank = |x: f64| {
        let less = mags.iter().filter(|v| **v < x).count() as f64;
        let eq = mags.iter().filter(|v| **v == x).count() as f64;
        less + (eq + 1.0) / 2.0
    };
    let ranks: Vec<f64> = mags.iter().map(|&m| rank(m)).collect();
    let total: f64 = ranks.iter().sum();
    let plus = |s: u32| -> f64 { (0..d.len()).filter(|i| s >> i & 1 == 1).map(|i| ranks[i]).sum() };
    let actual: u32 = (0..d.len()).filter(|&i| d[i] > 0.0).map(|i| 1 << i).sum();
    let observed = (plus(actual) - total / 2.0).abs();
    let all = 1u32 << d.len();
    (0..all).filter(|&s| (plus(s) - total / 2.0).abs() >= observed - 1e-9).count() as f64 / all as f64
}

fn small_sample(max: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec((0i32..5).prop_map(f64::from), 1..=max)
}

fn sid(i: usize) -> StatementId {
    StatementId {
        file: "m.pt".into(),
        type_name: "M".into(),
        fn_sig: "f()->void".into(),
        index: i as u32,
    }
}

fn coverage() -> impl Strategy<Value = CoverageMatrix> {
    (1usize..=12, 1usize..=8).prop_flat_map(|(statements, tests)| {
        prop::collection::vec((any::<bool>(), prop::collection::btree_set(0..statements, 0..=statements)), tests)
            .prop_map(|rows| CoverageMatrix {
                results: rows
                    .into_iter()
                    .enumerate()
                    .map(|(i, (fail, covered))| TestResult {
                        name: format!("t{i}"),
                        outcome: if fail { Outcome::Fail } else { Outcome::Pass },
                        message: None,
                        covered: covered.into_iter().map(sid).collect(),
                    })
                    .collect(),
            })
    })
}

const NAMES: [&str; 6] = ["a", "b", "c", "d", "e", "f"];
const TYPES: [Type; 2] = [Type::Int, Type::Bool];

#[derive(Debug, Clone)]
struct ResolveCase {
    used: Vec<usize>,
    access_types: Vec<usize>,
    ctx: Vec<Option<usize>>,
    clusters: Vec<Option<usize>>,
    coords: Vec<Option<i32>>,
}

fn resolve_case() -> impl Strategy<Value = ResolveCase> {
    (
        prop::sample::subsequence((0..NAMES.len()).collect::<Vec<_>>(), 1..=3),
        prop::collection::vec(0..TYPES.len(), 3),
        prop::collection::vec(prop::option::of(0..TYPES.len()), NAMES.len()),
        prop::collection::vec(prop::option::of(0usize..2), NAMES.len()),
        prop::collection::vec(prop::option::weighted(0.9, -20i32..20), NAMES.len()),
    )
        .prop_map(|(used, access_types, ctx, clusters, coords)| ResolveCase {
            used,
            access_types,
            ctx,
            clusters,
            coords,
        })
}

fn build(case: &ResolveCase) -> (Ingredient, VariableContext, ClusterMap, Dictionary) {
    let args: Vec<&str> = case.used.iter().map(|&i| NAMES[i]).collect();
    let stmt = parse_stmt(&format!("g({});", args.join(", "))).unwrap();
    let accesses = free_variables(&stmt)
        .into_iter()
        .enumerate()
        .map(|(i, name)| Access {
            name,
            ty: TYPES[case.access_types[i]],
        })
        .collect();
    let ctx: VariableContext = NAMES
        .iter()
        .zip(&case.ctx)
        .filter_map(|(n, t)| t.map(|t| (n.to_string(), TYPES[t])))
        .collect();
    let text: String = NAMES
        .iter()
        .zip(&case.clusters)
        .filter_map(|(n, c)| c.map(|c| format!("{n}\t{c}\n")))
        .collect();
    let (vocab, vectors): (Vec<String>, Vec<Vec<f64>>) = NAMES
        .iter()
        .zip(&case.coords)
        .filter_map(|(n, x)| x.map(|x| (n.to_string(), vec![f64::from(x), 0.0])))
        .unzip();
    (
        Ingredient {
            source: sid(0),
            stmt,
            accesses,
            substitutions: Vec::new(),
        },
        ctx,
        ClusterMap::from_text(&text).unwrap(),
        Dictionary::new(vocab, vectors).unwrap(),
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn mann_whitney_matches_enumeration(a in small_sample(6), b in small_sample(6)) {
        let r = mann_whitney_u(&a, &b).unwrap();
        prop_assert!(r.exact);
        prop_assert!((r.p - mw_enumerated(&a, &b)).abs() < 1e-12);
        let swapped = mann_whitney_u(&b, &a).unwrap();
        prop_assert!((r.p - swapped.p).abs() < 1e-12);
        prop_assert_eq!(r.u, swapped.u);
        prop_assert!(r.p > 0.0 && r.p <= 1.0);
    }

    #[test]
    fn wilcoxon_matches_enumeration(pairs in prop::collection::vec((0i32..6, 0i32..6), 1..=8)) {
        let x: Vec<f64> = pairs.iter().map(|p| f64::from(p.0)).collect();
        let y: Vec<f64> = pairs.iter().map(|p| f64::from(p.1)).collect();
        let r = wilcoxon_signed_rank(&x, &y).unwrap();
        let d: Vec<f64> = x.iter().zip(&y).map(|(a, b)| a - b).filter(|v| *v != 0.0).collect();
        if d.is_empty() {
            prop_assert!(r.undefined);
            prop_assert_eq!(r.p, 1.0);
        } else {
            prop_assert!((r.p - wilcoxon_enumerated(&d)).abs() < 1e-12);
            let back = wilcoxon_signed_rank(&y, &x).unwrap();
            prop_assert!((r.p - back.p).abs() < 1e-12);
        }
    }

    #[test]
    fn bonferroni_is_capped_and_monotone(p in 0.0f64..=1.0, m in 1usize..50) {
        let adj = bonferroni(p, m);
        prop_assert!(adj >= p && adj <= 1.0);
        prop_assert!(bonferroni(p, m + 1) >= adj);
        prop_assert!(adj == 1.0 || (adj - p * m as f64).abs() < 1e-12);
    }

    #[test]
    fn normalization_is_idempotent(tokens in prop::collection::vec(
        prop::sample::select(vec!["x", "42", "3.5", "\"hi\"", "'c'", "+", "return", "true", "SAFE_MIN", "0"]), 0..20)
    ) {
        let tokens: Vec<String> = tokens.into_iter().map(String::from).collect();
        let once = normalize(&tokens);
        prop_assert_eq!(once.len(), tokens.len());
        prop_assert_eq!(normalize(&once), once);
    }

    #[test]
    fn localization_is_sorted_thresholded_and_capped(cov in coverage(), cap in 0usize..15) {
        let list = localize(&cov, 0.1, cap);
        prop_assert!(list.len() <= cap);
        prop_assert!(list.windows(2).all(|w| w[0].score >= w[1].score));
        prop_assert!(list.iter().all(|s| s.score >= 0.1 && s.score <= 1.0 + 1e-12));
        if cov.failing_count() == 0 {
            prop_assert!(list.is_empty());
        }
        let unique: HashSet<_> = list.iter().map(|s| &s.statement).collect();
        prop_assert_eq!(unique.len(), list.len());
    }

    #[test]
    fn resolution_is_closed(case in resolve_case()) {
        let (ing, ctx, clusters, dict) = build(&case);
        let embedded = resolve_embeddings(&ing, &ctx, &clusters, &dict);
        if resolve_default(&ing, &ctx) {
            prop_assert_eq!(embedded.as_ref(), Some(&ing));
        }
        if let Some(r) = embedded {
            prop_assert!(resolve_default(&r, &ctx));
            for (from, to) in &r.substitutions {
                prop_assert_eq!(clusters.cluster_of(from), clusters.cluster_of(to));
            }
        }
    }
}

fn faulty() -> (petit::Program, petit::TestSuite) {
    project(
        "type M {
            fn f(x: int) -> int { let y: int = x + 1; y = y * 2; if (y > 4) { y = y - 1; } return y; }
            fn g(x: int) -> int { let z: int = x - 1; return z; }
        }",
        "test a { assert(M.f(1) == 3); }
         test b { assert(M.f(3) == 8); }
         test c { assert(M.g(2) == 1); }",
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn trials_respect_budget_and_cache(
        seed in 0u64..1000,
        budget in 0usize..300,
        strategy in prop::sample::select(Navigation::ALL.to_vec()),
        ops in prop::sample::subsequence(Operator::ALL.to_vec(), 1..=3),
    ) {
        let (p, s) = faulty();
        let config = TrialConfig { strategy, seed, budget, operators: ops, ..TrialConfig::default() };
        let mut validated = HashSet::new();
        let mut duplicate = false;
        let mut attempts = 0;
        let report = run_trial_observed(&p, &s, &Learned::empty(), &config, &mut |e| match e {
            TrialEvent::Attempt { .. } => attempts += 1,
            TrialEvent::Validated { instance, .. } => duplicate |= !validated.insert(instance.clone()),
        });
        prop_assert!(!duplicate);
        prop_assert_eq!(attempts, report.attempts);
        prop_assert!(report.attempts <= budget);
        prop_assert!(report.validations <= report.compilable_attempts);
        prop_assert!(report.compilable_attempts <= report.attempts);
        prop_assert_eq!(report.per_point.iter().map(|x| x.1).sum::<usize>(), report.attempts);
        prop_assert!(report.exhausted || report.attempts == budget);
        for patch in &report.patches {
            prop_assert!(config.operators.contains(&patch.operator));
            prop_assert!(replay_patch(&p, &s, patch));
        }
        let mut first = report.patches.iter().map(|p| p.attempt);
        prop_assert_eq!(first.next(), report.attempts_first_patch);
        let again = run_trial_observed(&p, &s, &Learned::empty(), &config, &mut |_| {});
        prop_assert_eq!(again, report);
    }
}

#[test]
fn enumeration_oracles_agree_on_hand_cases() {
    // the oracles themselves, on textbook values
    assert!((mw_enumerated(&[1.0, 2.0], &[3.0, 4.0]) - 1.0 / 3.0).abs() < 1e-12);
    assert!((wilcoxon_enumerated(&[1.0, 2.0, 3.0]) - 0.25).abs() < 1e-12);
}
