//! Command-line harness: experiment runs, single-match playback, metric
//! recomputation, snapshot plumbing, and input linting.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};

use mnemos::experiment::{run_experiment, ExperimentConfig};
use mnemos::metrics::aggregate;
use mnemos::session::Transcript;
use mnemos::store::MemoryStore;
use mnemos::twentyq::{run_match, Corpus, ScriptedGuesser, TableAnswerer};
use mnemos::Embedder;

#[derive(Parser)]
#[command(name = "mnemos", version, about = "Vector-memory context engine harness")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the configured arm matrix and write transcripts, reports, and a
    /// comparison table.
    Run(RunArgs),
    /// Play one seeded 20 Questions match with a verbose, replayable turn
    /// log.
    Play(PlayArgs),
    /// Recompute metrics from transcript files.
    Metrics(MetricsArgs),
    /// Create a fresh store snapshot, or load and re-serialize one.
    Snapshot(SnapshotArgs),
    /// Lint a corpus file and/or an experiment config.
    Validate(ValidateArgs),
}

/// Config file plus field-level overrides shared by run and play.
#[derive(Args)]
struct ConfigArgs {
    /// Experiment config file (TOML); defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// First seed of the range.
    #[arg(long)]
    seed: Option<u64>,
    /// Policy for the plain `memory` arm: none, lru or relevance.
    #[arg(long)]
    policy: Option<String>,
    /// Store capacity N.
    #[arg(long)]
    capacity: Option<usize>,
    /// Recent-query window T.
    #[arg(long)]
    window: Option<usize>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Comma-separated arm list.
    #[arg(long)]
    arms: Option<String>,
}

impl ConfigArgs {
    fn load(&self) -> anyhow::Result<ExperimentConfig> {
        let mut config = match &self.config {
            Some(path) => ExperimentConfig::from_toml_path(path)
                .with_context(|| format!("loading {}", path.display()))?,
            None => ExperimentConfig::default(),
        };
        if let Some(seed) = self.seed {
            config.seeds.start = seed;
        }
        if let Some(policy) = &self.policy {
            config.policy.name = policy.clone();
        }
        if let Some(capacity) = self.capacity {
            config.store.capacity = capacity;
        }
        if let Some(window) = self.window {
            config.store.window = window;
        }
        if let Some(out) = &self.out {
            config.out = out.clone();
        }
        if let Some(arms) = &self.arms {
            config.arms = arms
                .split(',')
                .map(|s| s.trim().to_string())
                .filter(|s| !s.is_empty())
                .collect();
        }
        config.validate()?;
        Ok(config)
    }
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    config: ConfigArgs,
}

#[derive(Args)]
struct PlayArgs {
    #[command(flatten)]
    config: ConfigArgs,
    /// Arm to play (any name from the arm grammar).
    #[arg(long, default_value = "memory")]
    arm: String,
}

#[derive(Args)]
struct MetricsArgs {
    /// Transcript JSONL files of the arm under evaluation.
    #[arg(required = true)]
    transcripts: Vec<PathBuf>,
    /// Baseline transcript JSONL files, paired with the main set by
    /// position.
    #[arg(long, num_args = 1..)]
    baseline: Vec<PathBuf>,
    /// Config supplying embedder parameters for the recomputation.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct SnapshotArgs {
    /// Create an empty snapshot instead of loading one.
    #[arg(long, conflicts_with = "load")]
    new: bool,
    /// Snapshot JSON file to load, validate, and re-serialize.
    #[arg(long)]
    load: Option<PathBuf>,
    #[arg(long, default_value_t = 64)]
    capacity: usize,
    #[arg(long, default_value_t = 8)]
    window: usize,
    #[arg(long, default_value_t = 256)]
    dimension: usize,
    /// Output path; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ValidateArgs {
    /// Corpus JSON file; the bundled corpus is checked when omitted.
    #[arg(long)]
    corpus: Option<PathBuf>,
    /// Experiment config file to lint.
    #[arg(long)]
    config: Option<PathBuf>,
}

fn main() -> anyhow::Result<()> {
    match Cli::parse().command {
        Command::Run(args) => run(args),
        Command::Play(args) => play(args),
        Command::Metrics(args) => metrics(args),
        Command::Snapshot(args) => snapshot(args),
        Command::Validate(args) => validate(args),
    }
}

fn run(args: RunArgs) -> anyhow::Result<()> {
    let config = args.config.load()?;
    let manifest = run_experiment(&config)?;
    let comparison = std::fs::read_to_string(config.out.join("comparison.txt"))?;
    print!("{comparison}");
    println!();
    println!("fingerprint: {}", manifest.config_fingerprint);
    println!("outputs: {}", config.out.display());
    Ok(())
}

fn play(args: PlayArgs) -> anyhow::Result<()> {
    let config = args.config.load()?;
    let corpus = config.load_corpus()?;
    let seed = config.seeds.start;
    let arm = config.parse_arm(&args.arm)?;
    let mut provider = arm.provider(&config, seed)?;
    let mut guesser = ScriptedGuesser::new(&corpus);
    let mut answerer = TableAnswerer;
    let outcome = run_match(&corpus, seed, &mut guesser, &mut answerer, provider.as_mut())?;

    println!("seed {seed} arm {} category {}", arm.name, outcome.category);
    for record in &outcome.records {
        let guess = match &record.guess {
            Some(g) => format!(" [guess: {g}]"),
            None => String::new(),
        };
        println!("{:2}. {} -> {}{}", record.turn, record.question, record.answer, guess);
    }
    match &outcome.diagnostic {
        Some(d) => println!("result: failure ({d})"),
        None if outcome.success => println!(
            "result: success in {} turns (keyword: {})",
            outcome.turns_used, outcome.keyword
        ),
        None => println!("result: failure (keyword was: {})", outcome.keyword),
    }
    Ok(())
}

fn load_transcripts(paths: &[PathBuf]) -> anyhow::Result<Vec<Transcript>> {
    paths
        .iter()
        .map(|path| {
            let stem = path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "transcript".to_string());
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading {}", path.display()))?;
            Ok(Transcript::from_jsonl(&stem, "recomputed", &text)?)
        })
        .collect()
}

fn metrics(args: MetricsArgs) -> anyhow::Result<()> {
    let embedder_config = match &args.config {
        Some(path) => ExperimentConfig::from_toml_path(path)?.embedder,
        None => Default::default(),
    };
    let embedder = Embedder::new(embedder_config)?;
    let transcripts = load_transcripts(&args.transcripts)?;
    let baseline = if args.baseline.is_empty() {
        None
    } else {
        Some(load_transcripts(&args.baseline)?)
    };
    let report = aggregate(&transcripts, baseline.as_deref(), None, &embedder)?;
    println!("{}", serde_json::to_string_pretty(&report)?);
    Ok(())
}

fn write_or_print(out: &Option<PathBuf>, contents: &str) -> anyhow::Result<()> {
    match out {
        Some(path) => {
            std::fs::write(path, contents)
                .with_context(|| format!("writing {}", path.display()))?;
        }
        None => print!("{contents}"),
    }
    Ok(())
}

fn snapshot(args: SnapshotArgs) -> anyhow::Result<()> {
    if args.new {
        let store = MemoryStore::new(args.dimension, args.capacity, args.window)?;
        let json = store.to_json()?;
        write_or_print(&args.out, &format!("{json}\n"))?;
        eprintln!("created empty snapshot: dimension {}, capacity {}", args.dimension, args.capacity);
        return Ok(());
    }
    let Some(path) = &args.load else {
        bail!("pass --new to create a snapshot or --load FILE to re-serialize one");
    };
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading {}", path.display()))?;
    let store = MemoryStore::from_json(text.trim_end())?;
    let json = store.to_json()?;
    write_or_print(&args.out, &format!("{json}\n"))?;
    eprintln!("snapshot ok: {} slots, clock {}", store.len(), store.clock());
    Ok(())
}

fn validate_corpus(path: Option<&Path>) -> anyhow::Result<()> {
    let corpus = match path {
        Some(p) => {
            let text =
                std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            Corpus::from_json(&text)?
        }
        None => Corpus::builtin().clone(),
    };
    println!(
        "corpus ok: {} keywords, {} attributes, {} categories",
        corpus.len(),
        corpus.attributes().len(),
        corpus.categories().len()
    );
    Ok(())
}

fn validate(args: ValidateArgs) -> anyhow::Result<()> {
    validate_corpus(args.corpus.as_deref())?;
    if let Some(path) = &args.config {
        let config = ExperimentConfig::from_toml_path(path)?;
        println!("config ok: fingerprint {}", config.fingerprint()?);
    }
    Ok(())
}
