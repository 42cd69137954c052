use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use ingrepair::project::{
    cmd_analyze, cmd_bench, cmd_gradcheck, cmd_repair, cmd_train, BenchConfig, GradCheckOptions, ProjectLayout,
    RepairOptions, TrainOptions,
};
use ingrepair::learn::LearnConfig;
use ingrepair::repair::{Scope, Strategy, DEFAULT_BUDGET};
use ingrepair::Error;

/// Redundancy-based program repair for Petit projects.
///
/// A project directory holds `src/` and `tests/`; commands write to
/// `artifacts/` and `out/` beside them.
#[derive(Debug, Parser)]
#[command(name = "ingrepair", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Extract the file, type and executable corpora into artifacts/.
    Analyze(Root),
    /// Learn embeddings, the autoencoder, similarity tables and identifier clusters.
    Train(TrainArgs),
    /// Compare trained autoencoder gradients against finite differences.
    Gradcheck(GradCheckArgs),
    /// Search for test-adequate patches of the failing project.
    Repair(RepairArgs),
    /// Run a strategy × scope × seed campaign and write CSV summaries.
    Bench(BenchArgs),
}

#[derive(Debug, Args)]
struct Root {
    /// Project directory.
    #[arg(default_value = ".")]
    root: PathBuf,
}

#[derive(Debug, Args)]
struct TrainArgs {
    #[command(flatten)]
    root: Root,
    /// Embedding dimension n.
    #[arg(long, default_value_t = 32)]
    dim: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Skip-gram epochs.
    #[arg(long)]
    skipgram_epochs: Option<usize>,
    /// Autoencoder optimizer iterations.
    #[arg(long)]
    rae_epochs: Option<usize>,
}

#[derive(Debug, Args)]
struct GradCheckArgs {
    #[command(flatten)]
    root: Root,
    /// Parameters sampled; 0 checks all of them.
    #[arg(long, default_value_t = 200)]
    samples: usize,
    /// Corpus lines used.
    #[arg(long, default_value_t = 2)]
    lines: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

#[derive(Debug, Args)]
struct RepairArgs {
    #[command(flatten)]
    root: Root,
    #[arg(long, default_value = "baseline", value_parser = parse_strategy)]
    strategy: Strategy,
    #[arg(long, default_value = "local", value_parser = parse_scope)]
    scope: Scope,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Maximum repair attempts.
    #[arg(long, default_value_t = DEFAULT_BUDGET)]
    budget: usize,
}

#[derive(Debug, Args)]
struct BenchArgs {
    #[command(flatten)]
    root: Root,
    /// TOML campaign settings; flags given here override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Run only this strategy (plus the baseline).
    #[arg(long, value_parser = parse_strategy)]
    strategy: Option<Strategy>,
    #[arg(long, value_parser = parse_scope)]
    scope: Option<Scope>,
    /// Run the single trial seed given.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    budget: Option<usize>,
    /// Worker threads for trials; 0 uses all cores.
    #[arg(long)]
    jobs: Option<usize>,
    /// Embedding dimension n used when learning on each bug.
    #[arg(long)]
    dim: Option<usize>,
}

fn parse_strategy(s: &str) -> Result<Strategy, String> {
    s.parse()
}

fn parse_scope(s: &str) -> Result<Scope, String> {
    s.parse()
}

fn bench_config(args: &BenchArgs) -> ingrepair::Result<BenchConfig> {
    let mut config = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
                path: path.clone(),
                source,
            })?;
            BenchConfig::from_toml(&text)?
        }
        None => BenchConfig::default(),
    };
    if let Some(s) = args.strategy {
        config.strategies = if s == Strategy::Baseline {
            vec![s]
        } else {
            vec![Strategy::Baseline, s]
        };
    }
    if let Some(s) = args.scope {
        config.scopes = vec![s];
    }
    if let Some(s) = args.seed {
        config.seeds = vec![s];
    }
    if let Some(b) = args.budget {
        config.budget = b;
    }
    if let Some(j) = args.jobs {
        config.jobs = j;
    }
    if let Some(d) = args.dim {
        config.dim = d;
    }
    Ok(config)
}

fn run(command: Command) -> ingrepair::Result<()> {
    match command {
        Command::Analyze(a) => {
            for path in cmd_analyze(&ProjectLayout::new(a.root))? {
                println!("wrote {}", path.display());
            }
        }
        Command::Train(a) => {
            let mut learn = LearnConfig::with(a.dim, a.seed);
            if let Some(e) = a.skipgram_epochs {
                learn.skipgram.epochs = e;
            }
            if let Some(e) = a.rae_epochs {
                learn.rae.epochs = e;
            }
            for path in cmd_train(&ProjectLayout::new(a.root.root), &TrainOptions { learn })? {
                println!("wrote {}", path.display());
            }
        }
        Command::Gradcheck(a) => {
            let options = GradCheckOptions {
                samples: a.samples,
                lines: a.lines,
                seed: a.seed,
                ..GradCheckOptions::default()
            };
            let check = cmd_gradcheck(&ProjectLayout::new(a.root.root), &options)?;
            println!(
                "checked {} parameters, max relative error {:.3e}",
                check.checked, check.max_rel_error
            );
            if !check.passed(1e-4) {
                return Err(Error::Config(format!(
                    "gradient check failed at parameter {}",
                    check.worst_index
                )));
            }
        }
        Command::Repair(a) => {
            let options = RepairOptions {
                strategy: a.strategy,
                scope: a.scope,
                seed: a.seed,
                budget: a.budget,
            };
            let report = cmd_repair(&ProjectLayout::new(a.root.root), &options)?;
            println!(
                "{} attempts, {} compilable, {} patches{}",
                report.attempts,
                report.compilable_attempts,
                report.patches.len(),
                if report.exhausted { ", search space exhausted" } else { "" }
            );
            for p in &report.patches {
                let renames: Vec<String> = p.substitutions.iter().map(|(a, b)| format!("{a}->{b}")).collect();
                let note = if renames.is_empty() { String::new() } else { format!("  [{}]", renames.join(", ")) };
                println!("  {} at {}: {}{note}", p.operator, p.point, p.ingredient);
            }
        }
        Command::Bench(a) => {
            let config = bench_config(&a)?;
            let result = cmd_bench(&ProjectLayout::new(&a.root.root), &config)?;
            let patches: usize = result.runs.iter().map(|r| r.report.patches.len()).sum();
            println!(
                "{} trials over {} bugs, {} patches; results in {}",
                result.runs.len(),
                result.bugs().len(),
                patches,
                a.root.root.join("out/bench").display()
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("ingrepair: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
