//! `peace-index`: run the word-frequency peace pipeline stage by stage or
//! end to end.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error, 3 numeric failure.

mod config;
mod stages;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::{Overrides, RunConfig};

#[derive(Debug, Parser)]
#[command(
    name = "peace-index",
    version,
    about = "Country peace classification from news word frequencies"
)]
struct Cli {
    #[command(flatten)]
    overrides: Overrides,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Clean the corpus into per-country lemma files and frequency tables.
    Preprocess,
    /// Build the union vocabulary and the country feature matrix.
    Featurize,
    /// Scale the peace indices and assign country classes.
    ClassifyCountries,
    /// Fit the two-class logistic regression and random forest.
    Train,
    /// Repeated LOOCV and 80/20 evaluation against a random baseline.
    Evaluate,
    /// Forest feature importance, per-class word reports and word-cloud data.
    Importance,
    /// Machine-learning peace index and country ranking.
    Score {
        /// Feature matrix to score instead of the featurize output.
        #[arg(long)]
        matrix: Option<PathBuf>,
    },
    /// Every stage in order.
    Report,
    /// Write a synthetic two-class corpus with a ready-to-run config.
    Synth {
        /// Directory to create.
        dir: PathBuf,
        #[arg(long, default_value_t = 6)]
        higher: usize,
        #[arg(long, default_value_t = 4)]
        lower: usize,
        #[arg(long, default_value_t = 30)]
        articles: usize,
    },
}

/// Marks errors caused by the invocation rather than the data.
#[derive(Debug)]
pub struct UsageError(pub anyhow::Error);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{:#}", self.0)
    }
}

impl std::error::Error for UsageError {}

impl From<anyhow::Error> for UsageError {
    fn from(e: anyhow::Error) -> Self {
        UsageError(e)
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.is::<UsageError>() {
            return 1;
        }
        if let Some(e) = cause.downcast_ref::<peace_core::Error>() {
            if e.is_numeric() {
                return 3;
            }
        }
    }
    2
}

fn run(cli: Cli) -> anyhow::Result<()> {
    if let Command::Synth {
        dir,
        higher,
        lower,
        articles,
    } = &cli.command
    {
        return stages::synth(
            dir,
            *higher,
            *lower,
            *articles,
            cli.overrides.seed.unwrap_or(0),
        );
    }
    let cfg = RunConfig::load(&cli.overrides)?;
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.overrides.workers {
        if n == 0 {
            return Err(UsageError(anyhow::anyhow!("--workers must be at least 1")).into());
        }
        pool = pool.num_threads(n);
    }
    let pool = pool.build()?;
    let ctx = stages::Context::new(cfg)?;
    pool.install(|| match cli.command {
        Command::Preprocess => ctx.preprocess(),
        Command::Featurize => ctx.featurize(),
        Command::ClassifyCountries => ctx.classify_countries(),
        Command::Train => ctx.train(),
        Command::Evaluate => ctx.evaluate(),
        Command::Importance => ctx.importance(),
        Command::Score { matrix } => ctx.score(matrix.as_deref()),
        Command::Report => ctx.report(),
        Command::Synth { .. } => unreachable!("handled above"),
    })
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
