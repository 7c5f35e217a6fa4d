use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use papertag::citegraph::MetaPath;
use papertag::candidates::MatchScope;
use papertag::pipeline::{self, generate_synthetic, PipelineConfig, Stage, StageOutcome, SyntheticSpec};

#[derive(Parser)]
#[command(name = "papertag", version, about = "Label full-text papers from label names alone")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// Worker threads (defaults to the number of cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Args, Clone, Default)]
struct Overrides {
    /// TOML configuration file.
    #[arg(long, short)]
    config: Option<PathBuf>,
    #[arg(long)]
    corpus: Option<PathBuf>,
    #[arg(long)]
    labels: Option<PathBuf>,
    /// Artifact directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// External embeddings replacing the built-in encoder per id.
    #[arg(long)]
    embeddings: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Meta-path for contrastive tuples, e.g. `P->P` or `P->P<-P`.
    #[arg(long)]
    meta_path: Option<MetaPath>,
    /// Number of contrastive tuples.
    #[arg(long)]
    tuples: Option<usize>,
    #[arg(long)]
    epochs: Option<usize>,
    /// Match label names against the full text instead of title+abstract.
    #[arg(long)]
    full_text_match: bool,
    /// Embed papers by title+abstract only.
    #[arg(long)]
    no_hierarchy: bool,
    #[arg(long)]
    no_self_train: bool,
    /// Ranking entries written per paper.
    #[arg(long)]
    top_k: Option<usize>,
}

impl Overrides {
    fn resolve(&self) -> Result<PipelineConfig> {
        let mut config = match &self.config {
            Some(path) => PipelineConfig::load(path).with_context(|| format!("loading {}", path.display()))?,
            None => PipelineConfig::default(),
        };
        if let Some(v) = &self.corpus {
            config.paths.corpus = v.clone();
        }
        if let Some(v) = &self.labels {
            config.paths.labels = v.clone();
        }
        if let Some(v) = &self.out {
            config.paths.output_dir = v.clone();
        }
        if let Some(v) = &self.embeddings {
            config.paths.embeddings = Some(v.clone());
        }
        if let Some(v) = self.seed {
            config.seed = v;
        }
        if let Some(v) = &self.meta_path {
            config.tuples.meta_path = v.clone();
        }
        if let Some(v) = self.tuples {
            config.tuples.count = v;
        }
        if let Some(v) = self.epochs {
            config.encoder.training.epochs = v;
        }
        if self.full_text_match {
            config.candidates = MatchScope::FullText;
        }
        if self.no_hierarchy {
            config.ranker.hierarchy = false;
        }
        if self.no_self_train {
            config.self_train.enabled = false;
        }
        if let Some(v) = self.top_k {
            config.predict.top_k = v;
        }
        config.validate()?;
        Ok(config)
    }
}

#[derive(Args)]
struct SynthArgs {
    /// Directory receiving corpus.jsonl, labels.jsonl and truth.jsonl.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 500)]
    papers: usize,
    #[arg(long, default_value_t = 50)]
    labels: usize,
    #[arg(long, default_value_t = 3)]
    labels_per_paper: usize,
    #[arg(long, default_value_t = 1.0 / 3.0)]
    full_text_fraction: f64,
    #[arg(long, default_value_t = 0.0)]
    distractor_rate: f64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

#[derive(Subcommand)]
enum Command {
    /// Load inputs and report corpus and citation statistics.
    Ingest(Overrides),
    /// Retrieve candidate labels by exact name matching.
    Candidates(Overrides),
    /// Sample contrastive tuples from the citation graph.
    SampleTuples(Overrides),
    /// Train the scorer on the sampled tuples.
    TrainEncoder(Overrides),
    /// Score candidates and fuse the two rankings.
    Score(Overrides),
    /// Fit the label-tree classifier on pseudo labels.
    SelfTrain(Overrides),
    /// Write the final rankings.
    Predict(Overrides),
    /// Compute metrics against gold labels.
    Evaluate(Overrides),
    /// Run every stage in order.
    RunAll(Overrides),
    /// Generate a synthetic planted-label corpus.
    Synth(SynthArgs),
    /// Print the effective configuration as TOML.
    Config(Overrides),
}

fn print_outcome(outcome: StageOutcome) -> Result<()> {
    if let StageOutcome::Metrics(Some(metrics)) = outcome {
        println!("{}", serde_json::to_string_pretty(&metrics)?);
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    if let Some(n) = cli.global.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring the worker pool")?;
    }
    let stage = |stage: Stage, o: &Overrides| -> Result<()> {
        let config = o.resolve()?;
        print_outcome(pipeline::run_stage(stage, &config)?)
    };
    match &cli.command {
        Command::Ingest(o) => stage(Stage::Ingest, o),
        Command::Candidates(o) => stage(Stage::Candidates, o),
        Command::SampleTuples(o) => stage(Stage::SampleTuples, o),
        Command::TrainEncoder(o) => stage(Stage::TrainEncoder, o),
        Command::Score(o) => stage(Stage::Score, o),
        Command::SelfTrain(o) => stage(Stage::SelfTrain, o),
        Command::Predict(o) => stage(Stage::Predict, o),
        Command::Evaluate(o) => stage(Stage::Evaluate, o),
        Command::RunAll(o) => print_outcome(pipeline::run_all(&o.resolve()?)?),
        Command::Config(o) => {
            print!("{}", o.resolve()?.to_toml_string()?);
            Ok(())
        }
        Command::Synth(a) => {
            let spec = SyntheticSpec {
                papers: a.papers,
                labels: a.labels,
                min_labels_per_paper: a.labels_per_paper,
                max_labels_per_paper: a.labels_per_paper,
                full_text_fraction: a.full_text_fraction,
                distractor_rate: a.distractor_rate,
                seed: a.seed,
                ..SyntheticSpec::default()
            };
            generate_synthetic(&spec)?.write(&a.out)?;
            log::info!("wrote synthetic corpus to {}", a.out.display());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
