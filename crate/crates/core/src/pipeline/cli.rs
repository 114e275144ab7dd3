//! Command-line front end.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::config::PipelineConfig;

use super::{
    cmd_compare, cmd_evaluate, cmd_report, cmd_select, cmd_validate, read_text, CommandOutcome,
    PipelineError, EXIT_DOMAIN, EXIT_OK,
};

#[derive(Debug, Parser)]
#[command(name = "fairrank", version, about = "Subgroup fairness evaluation and model selection")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check run directories or prediction logs without computing metrics.
    Validate {
        /// Run directories, directories of runs, or prediction log files.
        paths: Vec<PathBuf>,
        #[arg(long)]
        runs_dir: Option<PathBuf>,
    },
    /// Compute per-run and seed-aggregated metrics.
    Evaluate(CommonArgs),
    /// Pick one model per (algorithm, dataset, attribute).
    Select {
        #[command(flatten)]
        common: CommonArgs,
        /// Metrics CSV (default: <out>/metrics.csv).
        #[arg(long)]
        metrics: Option<PathBuf>,
    },
    /// Friedman test and Nemenyi post-hoc across algorithms.
    Compare {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long)]
        metrics: Option<PathBuf>,
    },
    /// evaluate, select and compare in one pass.
    Report(CommonArgs),
}

#[derive(Debug, Default, Args)]
pub struct CommonArgs {
    #[arg(long)]
    pub runs_dir: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// `key = value` config file; flags override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// overall, pareto or dto.
    #[arg(long)]
    pub strategy: Option<String>,
    /// overall_auc, worst_auc or auc_gap.
    #[arg(long)]
    pub metric: Option<String>,
    #[arg(long)]
    pub alpha: Option<String>,
    #[arg(long)]
    pub force_posthoc: bool,
    /// rank_seed_mean or rank_per_seed.
    #[arg(long)]
    pub seed_policy: Option<String>,
    /// run or seed_mean.
    #[arg(long)]
    pub selection_unit: Option<String>,
}

impl CommonArgs {
    pub fn resolve(&self) -> Result<PipelineConfig, PipelineError> {
        let mut cfg = PipelineConfig::default();
        if let Some(path) = &self.config {
            cfg.apply_text(&read_text(path)?)?;
        }
        let flags: [(&str, Option<String>); 7] = [
            ("runs_dir", self.runs_dir.as_ref().map(|p| p.display().to_string())),
            ("output_dir", self.out.as_ref().map(|p| p.display().to_string())),
            ("strategy", self.strategy.clone()),
            ("metric", self.metric.clone()),
            ("alpha", self.alpha.clone()),
            ("seed_policy", self.seed_policy.clone()),
            ("selection_unit", self.selection_unit.clone()),
        ];
        for (key, value) in flags {
            if let Some(v) = value {
                cfg.set(key, &v)?;
            }
        }
        if self.force_posthoc {
            cfg.force_posthoc = true;
        }
        Ok(cfg)
    }
}

fn dispatch(command: &Command) -> Result<CommandOutcome, PipelineError> {
    match command {
        Command::Validate { paths, runs_dir } => {
            let mut all = paths.clone();
            all.extend(runs_dir.iter().cloned());
            cmd_validate(&all)
        }
        Command::Evaluate(common) => cmd_evaluate(&common.resolve()?),
        Command::Select { common, metrics } => cmd_select(&common.resolve()?, metrics.as_deref()),
        Command::Compare { common, metrics } => {
            cmd_compare(&common.resolve()?, metrics.as_deref())
        }
        Command::Report(common) => cmd_report(&common.resolve()?),
    }
}

/// Parses `args` (including the program name), runs the command, prints its
/// output and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_DOMAIN } else { EXIT_OK };
        }
    };
    match dispatch(&cli.command) {
        Ok(outcome) => {
            print!("{}", outcome.stdout);
            outcome.exit_code
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn init_logging() {
    let env = env_logger::Env::new().filter_or("FAIRRANK_LOG", "warn");
    let _ = env_logger::Builder::from_env(env).try_init();
}
