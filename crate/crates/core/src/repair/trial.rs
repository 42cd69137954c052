use std::collections::HashSet;
use std::time::{Duration, Instant};

use petit::scope::context_at_loc;
use petit::{parse_stmt, render, render_stmt_inline, run_tests, Program, StatementId, Stmt, StmtKind, StmtLoc, TestSuite, VariableContext};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use similar::TextDiff;

use super::edit::{apply_operator, validate};
use super::pool::{build_pool, Ingredient, IngredientPool, IngredientStream};
use super::resolve::{resolve_default, resolve_embeddings};
use super::{Operator, Ordering, Scope, Strategy};
use crate::codesim::SimilarityTable;
use crate::corpus::Granularity;
use crate::embed::Dictionary;
use crate::faultloc::{localize, DEFAULT_CAP, DEFAULT_THRESHOLD};
use crate::lexclust::ClusterMap;

pub const DEFAULT_BUDGET: usize = 10_000;

/// Artifacts of the learning phase consulted during repair.
#[derive(Debug, Clone, PartialEq)]
pub struct Learned {
    pub exec_table: SimilarityTable,
    pub type_table: SimilarityTable,
    pub clusters: ClusterMap,
    pub dict: Dictionary,
}

impl Learned {
    /// No similarity information and no clusters; only random ordering and
    /// default resolution behave meaningfully with it.
    pub fn empty() -> Learned {
        Learned {
            exec_table: SimilarityTable::from_encodings(Granularity::Executable, Vec::new(), &[]),
            type_table: SimilarityTable::from_encodings(Granularity::Type, Vec::new(), &[]),
            clusters: ClusterMap::from_text("").expect("empty map"),
            dict: Dictionary::new(Vec::new(), Vec::new()).expect("empty dictionary"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialConfig {
    pub strategy: Strategy,
    pub scope: Scope,
    pub seed: u64,
    pub budget: usize,
    pub operators: Vec<Operator>,
}

impl Default for TrialConfig {
    fn default() -> Self {
        TrialConfig {
            strategy: Strategy::Baseline,
            scope: Scope::Local,
            seed: 1,
            budget: DEFAULT_BUDGET,
            operators: Operator::ALL.to_vec(),
        }
    }
}

/// What the cache remembers: the edit site, the operator and the final
/// (post-transformation) ingredient text.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ModificationInstance {
    pub point: StatementId,
    pub operator: Operator,
    pub ingredient: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Patch {
    #[serde(serialize_with = "display")]
    pub point: StatementId,
    pub operator: Operator,
    #[serde(serialize_with = "display")]
    pub source: StatementId,
    /// Final ingredient, single-line form.
    pub ingredient: String,
    pub transformed: bool,
    pub substitutions: Vec<(String, String)>,
    /// 1-based number of the attempt that produced the patch.
    pub attempt: usize,
    pub diff: String,
}

fn display<S: serde::Serializer>(sid: &StatementId, s: S) -> Result<S::Ok, S::Error> {
    s.collect_str(sid)
}

impl Patch {
    pub fn instance(&self) -> ModificationInstance {
        ModificationInstance {
            point: self.point.clone(),
            operator: self.operator,
            ingredient: self.ingredient.clone(),
        }
    }

    /// Structural identity used to compare patch sets across strategies.
    pub fn identity(&self) -> String {
        format!("{}|{}|{}", self.point, self.operator, self.ingredient)
    }

    pub fn record(&self, bug_id: &str, config: &TrialConfig) -> PatchRecord {
        PatchRecord {
            bug_id: bug_id.to_string(),
            strategy: config.strategy,
            scope: config.scope,
            seed: config.seed,
            operator: self.operator,
            point: self.point.to_string(),
            ingredient_key: self.source.to_string(),
            transformed: self.transformed,
            attempts_before: self.attempt - 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PatchRecord {
    pub bug_id: String,
    pub strategy: Strategy,
    pub scope: Scope,
    pub seed: u64,
    pub operator: Operator,
    pub point: String,
    pub ingredient_key: String,
    pub transformed: bool,
    pub attempts_before: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct TrialReport {
    pub strategy: Strategy,
    pub scope: Scope,
    pub seed: u64,
    pub budget: usize,
    /// Requests made to the fix space.
    pub attempts: usize,
    /// Requests whose ingredient resolved in scope at the point.
    pub compilable_attempts: usize,
    pub validations: usize,
    pub attempts_first_compilable: Option<usize>,
    pub attempts_first_patch: Option<usize>,
    pub patches: Vec<Patch>,
    pub per_point: Vec<(String, usize)>,
    /// Every (point, operator) stream ran dry before the budget did.
    pub exhausted: bool,
    #[serde(skip)]
    pub wall_time: Duration,
}

impl PartialEq for TrialReport {
    fn eq(&self, other: &Self) -> bool {
        // wall time is the only nondeterministic field
        self.strategy == other.strategy
            && self.scope == other.scope
            && self.seed == other.seed
            && self.budget == other.budget
            && self.attempts == other.attempts
            && self.compilable_attempts == other.compilable_attempts
            && self.validations == other.validations
            && self.attempts_first_compilable == other.attempts_first_compilable
            && self.attempts_first_patch == other.attempts_first_patch
            && self.patches == other.patches
            && self.per_point == other.per_point
            && self.exhausted == other.exhausted
    }
}

impl TrialReport {
    fn new(config: &TrialConfig) -> TrialReport {
        TrialReport {
            strategy: config.strategy,
            scope: config.scope,
            seed: config.seed,
            budget: config.budget,
            attempts: 0,
            compilable_attempts: 0,
            validations: 0,
            attempts_first_compilable: None,
            attempts_first_patch: None,
            patches: Vec::new(),
            per_point: Vec::new(),
            exhausted: false,
            wall_time: Duration::ZERO,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TrialEvent {
    Attempt {
        point: StatementId,
        operator: Operator,
        source: StatementId,
    },
    Validated {
        instance: ModificationInstance,
        passed: bool,
    },
}

struct Point {
    sid: StatementId,
    loc: StmtLoc,
    stmt: Stmt,
    before: VariableContext,
    after: VariableContext,
    streams: Option<Vec<IngredientStream>>,
}

impl Point {
    fn live(&self) -> Vec<usize> {
        self.streams
            .as_ref()
            .map(|s| (0..s.len()).filter(|&i| !s[i].is_exhausted()).collect())
            .unwrap_or_default()
    }
}

fn streams_for(
    pool: &IngredientPool,
    learned: &Learned,
    strategy: Strategy,
    point: &StatementId,
    operators: usize,
) -> Vec<IngredientStream> {
    let ordering = strategy.ordering();
    let make = || match ordering {
        Ordering::Random => IngredientStream::random(pool.len()),
        Ordering::Executable => IngredientStream::fifo(pool.similarity_order(&learned.exec_table, point, ordering)),
        Ordering::Type => IngredientStream::fifo(pool.similarity_order(&learned.type_table, point, ordering)),
    };
    let first = make();
    let mut out = vec![first; operators];
    if ordering == Ordering::Random {
        out.iter_mut().for_each(|s| *s = IngredientStream::random(pool.len()));
    }
    out
}

pub fn run_trial(program: &Program, suite: &TestSuite, learned: &Learned, config: &TrialConfig) -> TrialReport {
    run_trial_observed(program, suite, learned, config, &mut |_| {})
}

/// The repair loop, reporting every attempt and validation to `observer`.
pub fn run_trial_observed(
    program: &Program,
    suite: &TestSuite,
    learned: &Learned,
    config: &TrialConfig,
    observer: &mut dyn FnMut(&TrialEvent),
) -> TrialReport {
    let start = Instant::now();
    let mut report = TrialReport::new(config);
    let coverage = run_tests(program, suite, true);
    let suspicious = localize(&coverage, DEFAULT_THRESHOLD, DEFAULT_CAP);
    if suspicious.is_empty() || config.budget == 0 || config.operators.is_empty() {
        report.wall_time = start.elapsed();
        return report;
    }
    let pool = build_pool(program, &suspicious, config.scope);
    let mut points: Vec<Point> = suspicious
        .iter()
        .filter_map(|s| {
            let loc = program.locate(&s.statement)?;
            let stmt = program.stmt(&loc).clone();
            let before = context_at_loc(program, &loc);
            let mut after = before.clone();
            if let StmtKind::Let { name, ty, .. } = &stmt.kind {
                after.insert(name.clone(), *ty);
            }
            Some(Point {
                sid: s.statement.clone(),
                loc,
                stmt,
                before,
                after,
                streams: None,
            })
        })
        .collect();
    report.per_point = points.iter().map(|p| (p.sid.to_string(), 0)).collect();
    let originals = render(program);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut cache: HashSet<ModificationInstance> = HashSet::new();
    let mut cursor = 0;

    while report.attempts < config.budget {
        let mut chosen = None;
        for step in 0..points.len() {
            let pi = (cursor + step) % points.len();
            let p = &mut points[pi];
            if p.streams.is_none() {
                p.streams = Some(streams_for(&pool, learned, config.strategy, &p.sid, config.operators.len()));
            }
            if !p.live().is_empty() {
                chosen = Some(pi);
                break;
            }
        }
        let Some(pi) = chosen else {
            report.exhausted = true;
            break;
        };
        cursor = pi + 1;
        let point = &mut points[pi];
        let live = point.live();
        let oi = live[rng.gen_range(0..live.len())];
        let op = config.operators[oi];
        let streams = point.streams.as_mut().expect("initialized above");
        let idx = streams[oi].next(&mut rng).expect("live stream");
        report.attempts += 1;
        report.per_point[pi].1 += 1;
        let raw = &pool.ingredients[idx];
        observer(&TrialEvent::Attempt {
            point: point.sid.clone(),
            operator: op,
            source: raw.source.clone(),
        });

        let ctx = if op == Operator::InsertAfter { &point.after } else { &point.before };
        let resolved: Option<Ingredient> = if config.strategy.transforms() {
            resolve_embeddings(raw, ctx, &learned.clusters, &learned.dict)
        } else {
            resolve_default(raw, ctx).then(|| raw.clone())
        };
        let Some(ingredient) = resolved else {
            continue;
        };
        report.compilable_attempts += 1;
        report.attempts_first_compilable.get_or_insert(report.attempts);

        if op == Operator::Replace && (ingredient.stmt.tag() != point.stmt.tag() || ingredient.stmt == point.stmt) {
            continue;
        }
        let instance = ModificationInstance {
            point: point.sid.clone(),
            operator: op,
            ingredient: render_stmt_inline(&ingredient.stmt),
        };
        if !cache.insert(instance.clone()) {
            continue;
        }
        let Ok(variant) = apply_operator(program, &point.loc, op, &ingredient.stmt) else {
            continue;
        };
        let passed = validate(&variant, suite);
        report.validations += 1;
        observer(&TrialEvent::Validated {
            instance: instance.clone(),
            passed,
        });
        if passed {
            let file = &point.sid.file;
            let before = originals.get(file).map(String::as_str).unwrap_or_default();
            let after_text = render(&variant).remove(file).unwrap_or_default();
            let diff = TextDiff::from_lines(before, after_text.as_str())
                .unified_diff()
                .context_radius(3)
                .header(&format!("a/{file}"), &format!("b/{file}"))
                .to_string();
            report.attempts_first_patch.get_or_insert(report.attempts);
            report.patches.push(Patch {
                point: point.sid.clone(),
                operator: op,
                source: ingredient.source.clone(),
                ingredient: instance.ingredient,
                transformed: ingredient.transformed(),
                substitutions: ingredient.substitutions.clone(),
                attempt: report.attempts,
                diff,
            });
        }
    }
    if !report.exhausted && points.iter().all(|p| p.streams.is_some() && p.live().is_empty()) {
        report.exhausted = true;
    }
    report.wall_time = start.elapsed();
    report
}

/// Re-apply a reported patch and re-run the compile gate and suite.
pub fn replay_patch(program: &Program, suite: &TestSuite, patch: &Patch) -> bool {
    let Some(loc) = program.locate(&patch.point) else {
        return false;
    };
    let Ok(stmt) = parse_stmt(&patch.ingredient) else {
        return false;
    };
    match apply_operator(program, &loc, patch.operator, &stmt) {
        Ok(variant) => validate(&variant, suite),
        Err(_) => false,
    }
}
