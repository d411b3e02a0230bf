//! `cilforge`: batch commands for scoring, partitioning and evaluating
//! forecasting benchmarks.

mod backend;
mod commands;
mod config;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use cilforge_core::eval::{ReasoningKind, RetrievalKind};

use backend::Settings;
use config::{ConfigError, Overrides, RunConfig};

#[derive(Parser)]
#[command(name = "cilforge", version, about = "Causal influence scoring for forecasting benchmarks")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// TOML run configuration.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Worker threads and concurrent provider calls.
    #[arg(long, global = true, default_value_t = 4, value_parser = clap::value_parser!(u16).range(1..))]
    parallelism: u16,
    #[arg(long, global = true, value_name = "DIR")]
    cache_dir: Option<PathBuf>,
    /// Bypass the response cache entirely.
    #[arg(long, global = true)]
    no_cache: bool,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    tau: Option<f64>,
    #[arg(long, global = true)]
    min_count: Option<usize>,
    #[arg(long, global = true)]
    window: Option<u32>,
    #[arg(long, global = true, value_name = "DAYS")]
    group_span: Option<u32>,
    #[arg(long, global = true, value_parser = parse_retrieval)]
    retrieval: Option<RetrievalKind>,
    /// Articles retrieved per question.
    #[arg(long, global = true)]
    n: Option<usize>,
    #[arg(long, global = true, value_parser = parse_reasoning)]
    reasoning: Option<ReasoningKind>,
    #[arg(long, global = true)]
    runs: Option<usize>,
    /// Comma-separated forecast-progress cutoffs in (0, 1].
    #[arg(long, global = true, value_delimiter = ',')]
    cutoffs: Option<Vec<f64>>,
}

#[derive(Subcommand)]
enum Command {
    /// Validate and normalize the question and article files.
    Ingest,
    /// Generate queries, search, rate, select and summarize articles.
    Build,
    /// Score every article's causal influence on its question.
    Cil,
    /// Split scored questions into L1 and L2.
    Partition,
    /// Run one retrieval and reasoning configuration.
    Evaluate,
    /// Evaluate at each forecast-progress cutoff.
    Temporal,
    /// Summarize whatever artifacts exist in the output directory.
    Report,
}

fn parse_retrieval(s: &str) -> Result<RetrievalKind, String> {
    s.parse().map_err(|e: cilforge_core::Error| e.to_string())
}

fn parse_reasoning(s: &str) -> Result<ReasoningKind, String> {
    s.parse().map_err(|e: cilforge_core::Error| e.to_string())
}

impl Global {
    fn overrides(&self) -> Overrides {
        Overrides {
            cache_dir: self.cache_dir.clone(),
            seed: self.seed,
            tau: self.tau,
            min_count: self.min_count,
            window: self.window,
            group_span: self.group_span,
            retrieval: self.retrieval,
            n: self.n,
            reasoning: self.reasoning,
            runs: self.runs,
            cutoffs: self.cutoffs.clone(),
        }
    }
}

/// Short label printed in front of a failure.
fn category(err: &anyhow::Error) -> &'static str {
    for cause in err.chain() {
        if cause.downcast_ref::<ConfigError>().is_some() {
            return "config";
        }
        if let Some(e) = cause.downcast_ref::<cilforge_core::Error>() {
            use cilforge_core::Error::*;
            return match e {
                Oracle(_) => "oracle",
                Io(_) => "io",
                Pipeline(_) => "pipeline",
                _ => "validation",
            };
        }
        if cause.downcast_ref::<std::io::Error>().is_some() {
            return "io";
        }
        if cause.downcast_ref::<serde_json::Error>().is_some() {
            return "validation";
        }
    }
    "error"
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let path = cli
        .global
        .config
        .as_deref()
        .ok_or_else(|| config::config_error("--config is required"))?;
    let mut cfg = RunConfig::load(path)?;
    cfg.apply(&cli.global.overrides());
    let settings = Settings {
        parallelism: cli.global.parallelism as usize,
        no_cache: cli.global.no_cache,
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(settings.parallelism)
        .build()?;
    pool.install(|| match cli.command {
        Command::Ingest => commands::ingest(&cfg),
        Command::Build => commands::build(&cfg, &settings),
        Command::Cil => commands::cil(&cfg, &settings),
        Command::Partition => commands::run_partition(&cfg),
        Command::Evaluate => commands::run_evaluate(&cfg, &settings),
        Command::Temporal => commands::run_temporal(&cfg, &settings),
        Command::Report => report::run_report(&cfg),
    })
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let missing_config = cli.global.config.is_none();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error[{}]: {e:#}", category(&e));
            if missing_config {
                ExitCode::from(2)
            } else {
                ExitCode::FAILURE
            }
        }
    }
}
