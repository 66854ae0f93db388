//! The `oefd` command-line front end.
//!
//! Every command reads a flat `key = value` config (`--config`), applies
//! `--set key=value` and `--seed` overrides, validates everything, and only
//! then writes its artifacts under `--out`. Exit codes: 0 success, 2 config
//! error, 3 I/O or malformed input file, 4 numerical error.

mod commands;
mod config;
mod grad_check;
mod settings;
mod toy;

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

pub use commands::{cmd_embed, cmd_eval, cmd_gen_data, cmd_train};
pub use config::RunConfig;
pub use grad_check::{cmd_grad_check, run_grad_check_matrix, GradCheckRecord, GRAD_CHECK_TOLERANCE};
pub use settings::{synthetic_spec, train_settings, TrainDefaults, GEN_KEYS, TRAIN_KEYS};
pub use toy::{cmd_toy_fig3, pearson, ToyModeSummary};

use crate::error::{Error, Result};

#[derive(Debug, Parser)]
#[command(name = "oefd", version, about = "Orthogonal embedding decomposition experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic cross-age dataset, split manifest and pair list.
    GenData(CommonArgs),
    /// Train an encoder with the softmax, a_softmax or oe objective.
    Train(CommonArgs),
    /// Embed a dataset with a trained checkpoint.
    Embed(CommonArgs),
    /// Run rank1, distractor_rank1, roc or kfold on embedding files.
    Eval(CommonArgs),
    /// Two-dimensional toy comparison of the three objectives.
    ToyFig3(CommonArgs),
    /// Check every analytic gradient against finite differences.
    GradCheck(CommonArgs),
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// Flat key=value config file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Random seed; overrides `seed` from the config.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    /// Override a config key, e.g. `--set epochs=5`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
}

impl CommonArgs {
    pub fn load(&self) -> Result<RunConfig> {
        RunConfig::load(self.config.as_deref(), &self.overrides, self.seed)
    }
}

/// Parses `args` (including the program name), runs the command and
/// returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let result = match &cli.command {
        Command::GenData(a) => cmd_gen_data(a),
        Command::Train(a) => cmd_train(a),
        Command::Embed(a) => cmd_embed(a),
        Command::Eval(a) => cmd_eval(a),
        Command::ToyFig3(a) => cmd_toy_fig3(a),
        Command::GradCheck(a) => cmd_grad_check(a),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

/// Writes every `(name, contents)` pair under `dir`, creating it first.
pub(crate) fn write_outputs(dir: &Path, files: &[(&str, String)]) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for (name, contents) in files {
        let path = dir.join(name);
        fs::write(&path, contents).map_err(|e| Error::io(&path, e))?;
    }
    Ok(())
}
