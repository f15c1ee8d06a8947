//! Command-line experiments: sampling recall, benchmarks, training, detection and evaluation.

pub mod commands;
pub mod config;
pub mod error;
pub mod report;
pub mod scenes;
pub mod timing;

use std::path::PathBuf;

use clap::{Parser, Subcommand};

pub use config::ExperimentConfig;
pub use error::CliError;
pub use report::{Format, ReportTable};

#[derive(Debug, Parser)]
#[command(name = "pcdet", version, about = "Point-based 3D detection experiments")]
pub struct Cli {
    /// Experiment file (TOML). Defaults apply when omitted.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Master seed; overrides the config.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory; overrides the config.
    #[arg(long, global = true, env = "PCDET_OUT_DIR")]
    pub out: Option<PathBuf>,
    /// Scene directory of `<frame>.bin` and `<frame>.txt` files; overrides the config.
    #[arg(long, global = true, env = "PCDET_DATA_DIR")]
    pub data_dir: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value = "csv")]
    pub format: Format,
    /// Worker threads for scene-level work.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Downsample clouds with each configured strategy and time them.
    Sample,
    /// Per-class instance recall of each sampling strategy after every layer.
    Recall,
    /// Train the detector and write a checkpoint.
    Train {
        /// Continue from a checkpoint written by `train`.
        #[arg(long)]
        resume: Option<PathBuf>,
        /// Override the configured number of steps.
        #[arg(long)]
        steps: Option<usize>,
        /// Stop and checkpoint once this step is reached, keeping the schedule of the full run.
        #[arg(long)]
        stop_after: Option<usize>,
    },
    /// Run a trained detector over scenes.
    Detect {
        #[arg(long)]
        checkpoint: PathBuf,
    },
    /// Average precision of a detection file against labeled scenes.
    Eval {
        #[arg(long)]
        detections: PathBuf,
    },
    /// Micro-benchmarks of sampling, grouping, IoU and NMS.
    Bench,
    /// Convert KITTI camera-frame labels into LiDAR-frame scene labels.
    Convert {
        #[arg(long)]
        labels: PathBuf,
        #[arg(long)]
        calib: PathBuf,
    },
    /// Print the effective configuration as TOML.
    ShowConfig,
}

/// Resolved settings shared by every command.
#[derive(Debug, Clone)]
pub struct Context {
    pub config: ExperimentConfig,
    pub out: PathBuf,
    pub format: Format,
}

impl Context {
    pub fn from_cli(cli: &Cli) -> Result<Self, CliError> {
        let mut config = match &cli.config {
            Some(p) => ExperimentConfig::load(p)?,
            None => ExperimentConfig::default(),
        };
        if let Some(s) = cli.seed {
            config.seed = s;
        }
        if let Some(d) = &cli.data_dir {
            config.data.dir = Some(d.clone());
        }
        if let Some(o) = &cli.out {
            config.out = o.clone();
        }
        config.validate()?;
        Ok(Self { out: config.out.clone(), format: cli.format, config })
    }

    /// Writes a table under the output directory and echoes it to stdout.
    pub fn emit(&self, table: &ReportTable, name: &str) -> Result<(), CliError> {
        let text = table.write(&self.out, name, self.format)?;
        print!("{text}");
        Ok(())
    }
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
    }
    let ctx = Context::from_cli(&cli)?;
    match &cli.command {
        Command::Sample => commands::sample::run(&ctx).map(drop),
        Command::Recall => commands::recall::run(&ctx).map(drop),
        Command::Train { resume, steps, stop_after } => commands::train::run(&ctx, resume.as_deref(), *steps, *stop_after).map(drop),
        Command::Detect { checkpoint } => commands::detect::run(&ctx, checkpoint).map(drop),
        Command::Eval { detections } => commands::eval::run(&ctx, detections).map(drop),
        Command::Bench => commands::bench::run(&ctx).map(drop),
        Command::Convert { labels, calib } => commands::convert::run(&ctx, labels, calib).map(drop),
        Command::ShowConfig => {
            print!("{}", ctx.config.to_toml());
            Ok(())
        }
    }
}
