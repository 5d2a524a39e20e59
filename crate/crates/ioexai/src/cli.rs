//! Argument parsing, config resolution and dispatch.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::commands;
use crate::config::KeyValues;
use crate::error::{CliError, CliResult, ExitCode};

/// Directory searched for `<command>.conf` when `--config` is not given, and
/// for relative `--config` paths that do not exist as given.
pub const CONFIG_DIR_ENV: &str = "IOEXAI_CONFIG_DIR";

#[derive(Debug, Parser)]
#[command(name = "ioexai", version, about = "Quality-aware service delivery with explainable regression")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct GlobalArgs {
    /// Seed overriding the config's `seed` key.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Config file (`key = value`); a manifest replays its recorded settings.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Print nothing on success.
    #[arg(long, short, global = true)]
    pub quiet: bool,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Generate a synthetic session dataset from a scenario.
    Generate,
    /// Convert a delimited trace into a canonical dataset.
    Ingest {
        /// Trace file to read.
        #[arg(long)]
        input: PathBuf,
        /// Column mapping; identity on the canonical header if omitted.
        #[arg(long)]
        mapping: Option<PathBuf>,
        /// Train/test sizes as `n_train,n_test`.
        #[arg(long)]
        split: Option<String>,
    },
    /// Fit one model on the training partition.
    Train {
        #[arg(long)]
        dataset: PathBuf,
        /// Model kind, overriding the config's `model` key.
        #[arg(long)]
        model: Option<String>,
        /// Target field, overriding the config's `target` key.
        #[arg(long)]
        target: Option<String>,
    },
    /// Explain a trained model's predictions with exact Shapley values.
    Explain {
        /// Model file written by `train` or `run`.
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        dataset: PathBuf,
    },
    /// Run association, prediction and explanation end to end.
    Run {
        /// Dataset; taken from the manifest when `--config` is one.
        #[arg(long)]
        dataset: Option<PathBuf>,
        /// Model kind, overriding the config's `model` key.
        #[arg(long)]
        model: Option<String>,
    },
    /// Compare run directories.
    Report {
        /// Run directories written by `run`.
        #[arg(long, num_args = 1.., required = true)]
        runs: Vec<PathBuf>,
        /// Run name to compare against, or `truth`.
        #[arg(long, default_value = ioexai_core::eval::TRUTH_REFERENCE)]
        reference: String,
    },
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Generate => "generate",
            Command::Ingest { .. } => "ingest",
            Command::Train { .. } => "train",
            Command::Explain { .. } => "explain",
            Command::Run { .. } => "run",
            Command::Report { .. } => "report",
        }
    }
}

/// Settings shared by every command.
#[derive(Debug, Clone)]
pub struct Context {
    pub seed: Option<u64>,
    /// Parsed config file, if any.
    pub config: Option<KeyValues>,
    pub config_path: Option<PathBuf>,
    pub out: PathBuf,
    pub quiet: bool,
}

impl Context {
    /// The config, or an empty one.
    pub fn config(&self) -> KeyValues {
        self.config.clone().unwrap_or_else(|| KeyValues { source: "<defaults>".into(), entries: Vec::new() })
    }

    pub fn say(&self, msg: impl AsRef<str>) {
        if !self.quiet {
            println!("{}", msg.as_ref());
        }
    }
}

fn config_dir() -> Option<PathBuf> {
    std::env::var_os(CONFIG_DIR_ENV).filter(|v| !v.is_empty()).map(PathBuf::from)
}

/// Explicit path (falling back to the config dir for relative paths that do
/// not exist), else `<config dir>/<command>.conf` when present.
pub fn resolve_config(explicit: Option<&Path>, command: &str) -> CliResult<Option<PathBuf>> {
    match explicit {
        Some(p) => {
            if p.exists() || p.is_absolute() {
                return Ok(Some(p.to_path_buf()));
            }
            if let Some(alt) = config_dir().map(|d| d.join(p)).filter(|a| a.exists()) {
                return Ok(Some(alt));
            }
            Err(CliError::usage(format!("config file {} not found", p.display())))
        }
        None => Ok(config_dir().map(|d| d.join(format!("{command}.conf"))).filter(|p| p.is_file())),
    }
}

fn execute(cli: Cli) -> CliResult<()> {
    let name = cli.command.name();
    let config_path = resolve_config(cli.global.config.as_deref(), name)?;
    let config = config_path.as_deref().map(KeyValues::load).transpose()?;
    let out = cli.global.out.ok_or_else(|| CliError::usage(format!("`{name}` needs --out <DIR>")))?;
    std::fs::create_dir_all(&out).map_err(|e| CliError::io(&out, e))?;
    let ctx = Context { seed: cli.global.seed, config, config_path, out, quiet: cli.global.quiet };
    match cli.command {
        Command::Generate => commands::generate(&ctx),
        Command::Ingest { input, mapping, split } => commands::ingest(&ctx, &input, mapping.as_deref(), split.as_deref()),
        Command::Train { dataset, model, target } => commands::train(&ctx, &dataset, model.as_deref(), target.as_deref()),
        Command::Explain { model, dataset } => commands::explain(&ctx, &model, &dataset),
        Command::Run { dataset, model } => commands::run(&ctx, dataset.as_deref(), model.as_deref()),
        Command::Report { runs, reference } => commands::report(&ctx, &runs, &reference),
    }
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit status. Diagnostics go to stderr.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { ExitCode::Usage } else { ExitCode::Ok };
            let _ = e.print();
            return code as i32;
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::Ok as i32,
        Err(e) => {
            eprintln!("error: {e}");
            e.code as i32
        }
    }
}
