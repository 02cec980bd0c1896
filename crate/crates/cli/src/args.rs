use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

/// Synthetic object-motion augmentation for masked video pretraining.
///
/// Exit codes: 0 success, 2 configuration error, 3 I/O error, 4 data
/// integrity error (corrupt shard, failed audit).
#[derive(Debug, Parser)]
#[command(name = "motion-prep", version)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate training shards for the configured schedule.
    Gen {
        #[command(flatten)]
        common: Common,
        /// Output directory for shards and manifest.json.
        #[arg(long)]
        out: PathBuf,
        /// Records per shard file.
        #[arg(long, default_value_t = 256)]
        shard_size: usize,
        /// Worker threads (defaults to MOTION_PREP_WORKERS, then all cores).
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Emit mask sets for the first samples of the schedule as JSON lines.
    Mask {
        #[command(flatten)]
        common: Common,
        /// Number of samples.
        #[arg(long, default_value_t = 1)]
        count: usize,
        /// Output file; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Audit a shard directory and print statistics as JSON.
    Stats {
        /// Directory containing manifest.json.
        dir: PathBuf,
        #[arg(short, long, action = clap::ArgAction::Count)]
        verbose: u8,
    },
    /// Write composited frames and mask overlays of one sample as PNG.
    Preview {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        out: PathBuf,
        /// Index of the clip in the source.
        #[arg(long, default_value_t = 0)]
        video: usize,
        #[arg(long, default_value_t = 0)]
        epoch: u32,
        #[arg(long, default_value_t = 0)]
        sample_index: u32,
        #[arg(long, value_enum, default_value_t = VariantArg::Augmented)]
        variant: VariantArg,
    },
}

#[derive(Debug, Args)]
pub struct Common {
    /// Pipeline config JSON; defaults apply to missing fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Global seed, overriding the config.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Dotted-key override such as `mask.ratio=0.9` (repeatable).
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    #[arg(short, long, action = clap::ArgAction::Count)]
    pub verbose: u8,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum VariantArg {
    Augmented,
    Original,
}
