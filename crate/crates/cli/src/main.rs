mod commands;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use fadkit_core::estimators::{BootstrapUnit, DEFAULT_REPEATS, DEFAULT_SEED};

use report::Format;

pub const DEFAULT_FRACTION: f64 = 0.05;
const ERROR_PREFIX: &str = "fadkit-error:";

/// Frechet Audio Distance over embedding frame sets.
#[derive(Parser)]
#[command(name = "fadkit", version)]
struct Cli {
    /// Report format.
    #[arg(long, value_enum, default_value = "text", global = true)]
    format: Format,
    /// Write the report here instead of standard output.
    #[arg(short, long, global = true)]
    output: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit a reference set and write its statistics cache.
    Stats {
        /// Reference set directory.
        ref_dir: PathBuf,
        /// Cache file to write.
        #[arg(long)]
        cache: PathBuf,
    },
    /// FAD between a reference and a test set, optionally extrapolated to infinite size.
    Score {
        #[command(flatten)]
        reference: RefArgs,
        /// Test set directory.
        test_dir: PathBuf,
        /// Also estimate FAD-infinity by bootstrap extrapolation.
        #[arg(long)]
        inf: bool,
        /// Comma-separated bootstrap sizes. Defaults to a geometric grid over the pool.
        #[arg(long, value_delimiter = ',', requires = "inf")]
        sizes: Option<Vec<usize>>,
        #[arg(long, default_value_t = DEFAULT_REPEATS, requires = "inf")]
        repeats: usize,
        #[arg(long, default_value_t = DEFAULT_SEED, requires = "inf")]
        seed: u64,
        /// Resample single frames or whole songs.
        #[arg(long, value_enum, default_value = "frame", requires = "inf")]
        unit: UnitArg,
    },
    /// Per-song FAD against the reference, ranked, with the highest and lowest songs.
    Songs {
        #[command(flatten)]
        reference: RefArgs,
        /// Test set directory.
        test_dir: PathBuf,
        /// Share of songs reported at each end.
        #[arg(long, default_value_t = DEFAULT_FRACTION)]
        fraction: f64,
        /// Report exactly this many songs at each end instead.
        #[arg(long)]
        top_k: Option<usize>,
        /// Also write the full score table as CSV.
        #[arg(long)]
        scores_out: Option<PathBuf>,
    },
    /// Compare per-song scores with labels or listening-test ratings.
    #[command(subcommand)]
    Eval(EvalCommand),
    /// Generate a synthetic set directory from a JSON spec.
    Synth {
        /// JSON spec file.
        spec: PathBuf,
        /// Set directory to create.
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Subcommand)]
enum EvalCommand {
    /// Precision, recall and F1 of FAD-based quality predictions.
    Labels {
        /// Score table written by `songs`.
        scores: PathBuf,
        /// Labels CSV with header song_id,aq,mq.
        #[arg(long)]
        labels: PathBuf,
        #[arg(long, default_value_t = DEFAULT_FRACTION)]
        fraction: f64,
    },
    /// Per-testset Pearson correlation of per-song FAD with mean opinion scores.
    Mos {
        /// Score table written by `songs`.
        scores: PathBuf,
        /// MOS CSV with header song_id,testset,aq_mos,mq_mos.
        #[arg(long)]
        mos: PathBuf,
    },
    /// FAD of effected sets relative to the unprocessed set.
    Sensitivity {
        #[command(flatten)]
        reference: RefArgs,
        /// Unprocessed test set directory.
        #[arg(long)]
        clean: PathBuf,
        /// Effected set as NAME=DIR, repeatable.
        #[arg(long = "effect", value_parser = parse_effect, required = true)]
        effects: Vec<(String, PathBuf)>,
    },
}

#[derive(Args)]
pub struct RefArgs {
    /// Reference statistics cache, or a reference set directory to fit on the fly.
    #[arg(long = "ref")]
    pub reference: PathBuf,
    /// Set directory the cache was built from, used to verify it.
    #[arg(long)]
    pub ref_dir: Option<PathBuf>,
    /// Load the cache without checking it against its set directory.
    #[arg(long, conflicts_with = "ref_dir")]
    pub no_verify: bool,
}

#[derive(Debug, Clone, Copy, clap::ValueEnum)]
enum UnitArg {
    Frame,
    Song,
}

impl From<UnitArg> for BootstrapUnit {
    fn from(u: UnitArg) -> Self {
        match u {
            UnitArg::Frame => BootstrapUnit::Frame,
            UnitArg::Song => BootstrapUnit::Song,
        }
    }
}

fn parse_effect(s: &str) -> std::result::Result<(String, PathBuf), String> {
    let (name, dir) = s
        .split_once('=')
        .ok_or_else(|| format!("expected NAME=DIR, got {s:?}"))?;
    Ok((name.to_string(), PathBuf::from(dir)))
}

fn configure_threads() -> Result<()> {
    let Ok(raw) = std::env::var("FADKIT_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n >= 1)
        .with_context(|| format!("FADKIT_THREADS must be a positive integer, got {raw:?}"))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .context("configuring worker threads")
}

fn run(cli: Cli) -> Result<()> {
    configure_threads()?;
    let report = match cli.command {
        Command::Stats { ref_dir, cache } => commands::stats(&ref_dir, &cache)?,
        Command::Score {
            reference,
            test_dir,
            inf,
            sizes,
            repeats,
            seed,
            unit,
        } => {
            let inf = inf.then(|| commands::InfOptions {
                sizes,
                repeats,
                seed,
                unit: unit.into(),
            });
            commands::score(&reference, &test_dir, inf)?
        }
        Command::Songs {
            reference,
            test_dir,
            fraction,
            top_k,
            scores_out,
        } => commands::songs(
            &reference,
            &test_dir,
            fraction,
            top_k,
            scores_out.as_deref(),
        )?,
        Command::Eval(EvalCommand::Labels {
            scores,
            labels,
            fraction,
        }) => commands::eval_labels(&scores, &labels, fraction)?,
        Command::Eval(EvalCommand::Mos { scores, mos }) => commands::eval_mos(&scores, &mos)?,
        Command::Eval(EvalCommand::Sensitivity {
            reference,
            clean,
            effects,
        }) => commands::eval_sensitivity(&reference, &clean, &effects)?,
        Command::Synth { spec, out } => commands::synth(&spec, &out)?,
    };
    if let Some(path) = &cli.output {
        if path.is_dir() {
            bail!("{}: output path is a directory", path.display());
        }
    }
    report::emit(&report, cli.format, cli.output.as_deref())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            // --help and --version
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let text = e.to_string();
            eprint!("{ERROR_PREFIX} {}", text.trim_start_matches("error: "));
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{ERROR_PREFIX} {e:#}");
            ExitCode::FAILURE
        }
    }
}
