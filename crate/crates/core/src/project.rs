//! On-disk projects and the four pipeline commands.
//!
//! A project root holds `src/` (Petit sources, `*.pt`), `tests/` (test
//! files, `*.test.pt`), `artifacts/` (corpora and learned models) and
//! `out/` (reports).

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use petit::{check_program, check_suite, parse_program, parse_tests, run_tests, Program, TestSuite};
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Deserialize;
use walkdir::WalkDir;

use crate::bench::{run_campaign, seed_bugs, Bug, CampaignConfig, CampaignResult};
use crate::codesim::SimilarityTable;
use crate::corpus::{extract_corpora, Corpora, Corpus, Granularity};
use crate::embed::Dictionary;
use crate::faultloc::{localize, to_csv, DEFAULT_CAP, DEFAULT_THRESHOLD};
use crate::learn::{learn_from_corpora, Artifacts, LearnConfig};
use crate::lexclust::ClusterMap;
use crate::rae::{gradient_check, EncoderParams, GradCheck};
use crate::repair::{run_trial, Learned, Ordering, Scope, Strategy, TrialConfig, TrialReport, DEFAULT_BUDGET};
use crate::{Error, Result};

pub const DICTIONARY: &str = "dictionary.txt";
pub const ENCODER: &str = "encoder.mat";
pub const CLASSES: &str = "classes.txt";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProjectLayout {
    pub root: PathBuf,
}

impl ProjectLayout {
    pub fn new(root: impl Into<PathBuf>) -> ProjectLayout {
        ProjectLayout { root: root.into() }
    }

    pub fn src(&self) -> PathBuf {
        self.root.join("src")
    }

    pub fn tests(&self) -> PathBuf {
        self.root.join("tests")
    }

    pub fn artifacts(&self) -> PathBuf {
        self.root.join("artifacts")
    }

    pub fn out(&self) -> PathBuf {
        self.root.join("out")
    }

    /// Source texts keyed by path relative to `src/`, `/`-separated.
    pub fn sources(&self) -> Result<BTreeMap<String, String>> {
        collect(&self.src(), |name| name.ends_with(".pt") && !name.ends_with(".test.pt"))
    }

    pub fn test_sources(&self) -> Result<BTreeMap<String, String>> {
        collect(&self.tests(), |name| name.ends_with(".test.pt"))
    }

    /// Parse and name-check the sources.
    pub fn program(&self) -> Result<Program> {
        let sources = self.sources()?;
        if sources.is_empty() {
            return Err(Error::NoSources(self.src()));
        }
        let program = parse_program(&sources)?;
        let errors = check_program(&program);
        if !errors.is_empty() {
            return Err(Error::Check(join_lines(errors)));
        }
        Ok(program)
    }

    pub fn suite(&self, program: &Program) -> Result<TestSuite> {
        let suite = parse_tests(&self.test_sources()?)?;
        let errors = check_suite(program, &suite);
        if !errors.is_empty() {
            return Err(Error::Check(join_lines(errors)));
        }
        Ok(suite)
    }
}

fn join_lines<T: ToString>(items: Vec<T>) -> String {
    items.iter().map(T::to_string).collect::<Vec<_>>().join("\n")
}

fn collect(dir: &Path, keep: impl Fn(&str) -> bool) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    if !dir.exists() {
        return Ok(out);
    }
    for entry in WalkDir::new(dir).sort_by_file_name() {
        let entry = entry.map_err(|e| Error::Io {
            path: dir.to_path_buf(),
            source: e.into(),
        })?;
        let name = entry.file_name().to_string_lossy();
        if !entry.file_type().is_file() || !keep(&name) {
            continue;
        }
        let rel = entry.path().strip_prefix(dir).expect("walk stays under dir");
        let key = rel.components().map(|c| c.as_os_str().to_string_lossy()).collect::<Vec<_>>().join("/");
        out.insert(key, read(entry.path())?);
    }
    Ok(out)
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn write(path: &Path, body: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|source| Error::Io {
            path: parent.to_path_buf(),
            source,
        })?;
    }
    fs::write(path, body).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Read an artifact, pointing at the command that produces it when absent.
fn artifact(path: &Path, hint: &'static str) -> Result<String> {
    if !path.exists() {
        return Err(Error::MissingArtifact {
            path: path.to_path_buf(),
            hint,
        });
    }
    read(path)
}

fn key_path(dir: &Path, g: Granularity) -> PathBuf {
    dir.join(format!("{}.key", g.stem()))
}

fn src_path(dir: &Path, g: Granularity) -> PathBuf {
    dir.join(format!("{}.src", g.stem()))
}

fn similarities_path(dir: &Path, g: Granularity) -> PathBuf {
    dir.join(format!("{}.similarities.txt", g.stem()))
}

fn sorted_path(dir: &Path, g: Granularity) -> PathBuf {
    dir.join(format!("{}.sorted", g.stem()))
}

pub fn write_corpora(dir: &Path, corpora: &Corpora) -> Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    for corpus in corpora.all() {
        let (k, s) = (key_path(dir, corpus.granularity), src_path(dir, corpus.granularity));
        write(&k, &corpus.to_key_text())?;
        write(&s, &corpus.to_src_text())?;
        written.extend([k, s]);
    }
    Ok(written)
}

pub fn read_corpora(dir: &Path) -> Result<Corpora> {
    let load = |g| -> Result<Corpus> {
        Corpus::from_text(
            g,
            &artifact(&key_path(dir, g), "analyze")?,
            &artifact(&src_path(dir, g), "analyze")?,
        )
    };
    Ok(Corpora {
        files: load(Granularity::File)?,
        types: load(Granularity::Type)?,
        execs: load(Granularity::Executable)?,
    })
}

/// Write the learned models (everything but the corpora).
pub fn write_models(dir: &Path, a: &Artifacts) -> Result<Vec<PathBuf>> {
    let mut files = vec![
        (dir.join(DICTIONARY), a.dictionary.to_text()),
        (dir.join(ENCODER), a.encoder.to_text()),
        (dir.join(CLASSES), a.clusters.to_text()),
    ];
    for table in [&a.types, &a.execs] {
        files.push((similarities_path(dir, table.granularity), table.to_similarities_text()));
        files.push((sorted_path(dir, table.granularity), table.to_sorted_text()));
    }
    for (path, body) in &files {
        write(path, body)?;
    }
    Ok(files.into_iter().map(|(p, _)| p).collect())
}

pub fn read_encoder(dir: &Path) -> Result<EncoderParams> {
    EncoderParams::from_text(&artifact(&dir.join(ENCODER), "train")?)
}

pub fn read_dictionary(dir: &Path) -> Result<Dictionary> {
    Dictionary::from_text(&artifact(&dir.join(DICTIONARY), "train")?)
}

pub fn read_learned(dir: &Path) -> Result<Learned> {
    let table = |g| -> Result<SimilarityTable> {
        SimilarityTable::from_text(
            g,
            &artifact(&similarities_path(dir, g), "train")?,
            &artifact(&sorted_path(dir, g), "train")?,
        )
    };
    Ok(Learned {
        exec_table: table(Granularity::Executable)?,
        type_table: table(Granularity::Type)?,
        clusters: ClusterMap::from_text(&artifact(&dir.join(CLASSES), "train")?)?,
        dict: read_encoder(dir)?.to_dictionary(),
    })
}

/// Extract and normalize the corpora of the project into `artifacts/`.
pub fn cmd_analyze(layout: &ProjectLayout) -> Result<Vec<PathBuf>> {
    let program = layout.program()?;
    write_corpora(&layout.artifacts(), &extract_corpora(&program).normalized())
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOptions {
    pub learn: LearnConfig,
}

impl Default for TrainOptions {
    fn default() -> Self {
        TrainOptions {
            learn: LearnConfig::with(32, 1),
        }
    }
}

/// Train embeddings, the autoencoder, similarity tables and clusters from
/// the corpora written by `analyze`.
pub fn cmd_train(layout: &ProjectLayout, options: &TrainOptions) -> Result<Vec<PathBuf>> {
    let corpora = read_corpora(&layout.artifacts())?;
    let artifacts = learn_from_corpora(corpora, &options.learn)?;
    write_models(&layout.artifacts(), &artifacts)
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckOptions {
    /// Parameters probed, sampled without replacement; 0 checks all of θ.
    pub samples: usize,
    /// Leading file-corpus lines used.
    pub lines: usize,
    pub step: f64,
    pub seed: u64,
}

impl Default for GradCheckOptions {
    fn default() -> Self {
        GradCheckOptions {
            samples: 200,
            lines: 2,
            step: 1e-5,
            seed: 1,
        }
    }
}

/// Finite-difference check of the trained encoder on the project corpus.
pub fn cmd_gradcheck(layout: &ProjectLayout, options: &GradCheckOptions) -> Result<GradCheck> {
    let dir = layout.artifacts();
    let corpora = read_corpora(&dir)?;
    let params = read_encoder(&dir)?;
    let lines: Vec<Vec<String>> = corpora
        .files
        .entries
        .iter()
        .filter(|e| !e.tokens.is_empty())
        .take(options.lines.max(1))
        .map(|e| e.tokens.clone())
        .collect();
    if lines.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let structure = params.structure(&lines);
    let total = params.w.len();
    let indices: Vec<usize> = if options.samples == 0 || options.samples >= total {
        (0..total).collect()
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
        let mut picked = sample(&mut rng, total, options.samples).into_vec();
        picked.sort_unstable();
        picked
    };
    Ok(gradient_check(&params, &structure, indices, options.step))
}

#[derive(Debug, Clone, PartialEq)]
pub struct RepairOptions {
    pub strategy: Strategy,
    pub scope: Scope,
    pub seed: u64,
    pub budget: usize,
}

impl Default for RepairOptions {
    fn default() -> Self {
        RepairOptions {
            strategy: Strategy::Baseline,
            scope: Scope::Local,
            seed: 1,
            budget: DEFAULT_BUDGET,
        }
    }
}

/// Repair the project, writing `out/repair/{report.json, patches.jsonl,
/// suspicious.csv, patches/*.diff}`.
///
/// The baseline needs no learned artifacts; every other strategy reads
/// them from `artifacts/`.
pub fn cmd_repair(layout: &ProjectLayout, options: &RepairOptions) -> Result<TrialReport> {
    let program = layout.program()?;
    let suite = layout.suite(&program)?;
    let coverage = run_tests(&program, &suite, true);
    if coverage.failing_count() == 0 {
        return Err(Error::NothingToRepair);
    }
    let needs_models = options.strategy.ordering() != Ordering::Random || options.strategy.transforms();
    let learned = if needs_models {
        read_learned(&layout.artifacts())?
    } else {
        Learned::empty()
    };
    let config = TrialConfig {
        strategy: options.strategy,
        scope: options.scope,
        seed: options.seed,
        budget: options.budget,
        ..TrialConfig::default()
    };
    let report = run_trial(&program, &suite, &learned, &config);

    let dir = layout.out().join("repair");
    write(
        &dir.join("suspicious.csv"),
        &to_csv(&localize(&coverage, DEFAULT_THRESHOLD, DEFAULT_CAP)),
    )?;
    let json = serde_json::to_string_pretty(&report).expect("plain report");
    write(&dir.join("report.json"), &(json + "\n"))?;
    let bug_id = layout
        .root
        .file_name()
        .map_or_else(|| "project".to_string(), |n| n.to_string_lossy().into_owned());
    let records: String = report
        .patches
        .iter()
        .map(|p| serde_json::to_string(&p.record(&bug_id, &config)).expect("plain record") + "\n")
        .collect();
    write(&dir.join("patches.jsonl"), &records)?;
    let patches = dir.join("patches");
    if patches.exists() {
        fs::remove_dir_all(&patches).map_err(|source| Error::Io {
            path: patches.clone(),
            source,
        })?;
    }
    for (i, p) in report.patches.iter().enumerate() {
        write(&patches.join(format!("{:03}.diff", i + 1)), &p.diff)?;
    }
    Ok(report)
}

/// Campaign settings, read from a TOML file. Unset keys take defaults.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchConfig {
    pub strategies: Vec<Strategy>,
    pub scopes: Vec<Scope>,
    pub seeds: Vec<u64>,
    /// Mutants to seed when the project's own tests all pass.
    pub bugs: usize,
    pub bug_seed: u64,
    pub budget: usize,
    pub dim: usize,
    pub skipgram_epochs: usize,
    pub rae_epochs: usize,
    pub learn_seed: u64,
    pub jobs: usize,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            strategies: Strategy::ALL.to_vec(),
            scopes: vec![Scope::Local],
            seeds: vec![1, 2, 3],
            bugs: 3,
            bug_seed: 1,
            budget: DEFAULT_BUDGET,
            dim: 32,
            skipgram_epochs: 20,
            rae_epochs: 50,
            learn_seed: 1,
            jobs: 0,
        }
    }
}

impl BenchConfig {
    pub fn from_toml(text: &str) -> Result<BenchConfig> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn learn_config(&self) -> LearnConfig {
        let mut c = LearnConfig::with(self.dim, self.learn_seed);
        c.skipgram.epochs = self.skipgram_epochs;
        c.rae.epochs = self.rae_epochs;
        c
    }

    pub fn campaign_config(&self) -> CampaignConfig {
        CampaignConfig {
            strategies: self.strategies.clone(),
            scopes: self.scopes.clone(),
            seeds: self.seeds.clone(),
            budget: self.budget,
            jobs: self.jobs,
        }
    }
}

/// The buggy revisions of a campaign: the project itself when some test
/// fails, otherwise `config.bugs` seeded mutants of it. Artifacts are
/// learned on each revision separately.
pub fn campaign_bugs(program: &Program, suite: &TestSuite, config: &BenchConfig) -> Result<(Vec<Bug>, String)> {
    let (revisions, notes): (Vec<(String, Program)>, String) = if run_tests(program, suite, false).all_pass() {
        let seeded = seed_bugs(program, suite, config.bug_seed, config.bugs)?;
        let notes = seeded
            .iter()
            .map(|b| format!("{}\t{}\tfails: {}\n", b.id, b.describe(), b.failing.join(" ")))
            .collect();
        (seeded.into_iter().map(|b| (b.id, b.program)).collect(), notes)
    } else {
        (vec![("project".to_string(), program.clone())], "project\tas found\n".to_string())
    };
    let learn = config.learn_config();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.jobs)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    let bugs = pool.install(|| {
        revisions
            .into_par_iter()
            .map(|(id, program)| {
                let artifacts = learn_from_corpora(extract_corpora(&program).normalized(), &learn)?;
                Ok(Bug {
                    id,
                    program,
                    learned: artifacts.learned(),
                })
            })
            .collect::<Result<Vec<Bug>>>()
    })?;
    Ok((bugs, notes))
}

/// Run a campaign over the project and write `out/bench/`.
pub fn cmd_bench(layout: &ProjectLayout, config: &BenchConfig) -> Result<CampaignResult> {
    let program = layout.program()?;
    let suite = layout.suite(&program)?;
    let (bugs, notes) = campaign_bugs(&program, &suite, config)?;
    let result = run_campaign(&bugs, &suite, &config.campaign_config())?;
    let dir = layout.out().join("bench");
    result.write_outputs(&dir)?;
    write(&dir.join("bugs.tsv"), &notes)?;
    Ok(result)
}
