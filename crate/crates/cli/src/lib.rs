//! Command-line front end for `sbi-forge`: batch generation, replay,
//! verification, preview grids, parameter audits and video scoring.
//!
//! Exit codes: 0 success, 1 fatal input error, 2 verification failure.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};
use sbi_forge::ingest::CropMode;
use sbi_forge::PipelineConfig;

pub mod audit;
pub mod generate;
pub mod preview;
pub mod replay;
pub mod score;
pub mod verify;

pub use audit::{run_audit, AuditReport};
pub use generate::{run_generate, GenerateSummary};
pub use preview::run_preview;
pub use replay::run_replay;
pub use score::run_score;
pub use verify::{run_verify, VerifyReport};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FATAL: i32 = 1;
pub const EXIT_VERIFY: i32 = 2;

/// Name of the run record written next to the batch index.
pub const RUN_FILE: &str = "run.json";

#[derive(Debug, Parser)]
#[command(name = "sbi-forge", version, about = "Self-blended image generation")]
pub struct Cli {
    /// Log verbosity (error, warn, info, debug, trace).
    #[arg(long, global = true, default_value = "info")]
    pub log_level: String,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate samples for every manifest entry.
    Generate(GenerateArgs),
    /// Re-render one sample from its recipe.
    Replay(ReplayArgs),
    /// Check digests and replay every recipe of a generated directory.
    Verify(VerifyArgs),
    /// Render pristine faces above their self-blended counterparts.
    Preview(PreviewArgs),
    /// Sample the parameter space and report its empirical distribution.
    Audit(AuditArgs),
    /// Aggregate per-face confidences into per-video scores.
    Score(ScoreArgs),
    /// Write a procedural face dataset and its manifest for smoke runs.
    Synth(SynthArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    Train,
    Inference,
}

impl From<Mode> for CropMode {
    fn from(m: Mode) -> Self {
        match m {
            Mode::Train => CropMode::Train,
            Mode::Inference => CropMode::Inference,
        }
    }
}

fn default_workers() -> usize {
    std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
}

#[derive(Debug, Clone, Args)]
pub struct GenerateArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// TOML configuration; built-in defaults when omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, env = "SBI_FORGE_SEED", default_value_t = 42)]
    pub seed: u64,
    #[arg(long, default_value_t = 1)]
    pub samples_per_image: u32,
    #[arg(long, default_value_t = default_workers())]
    pub workers: usize,
    /// Abort on the first skipped entry or sample.
    #[arg(long)]
    pub strict: bool,
    /// Write the machine-readable run summary here.
    #[arg(long)]
    pub summary: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Mode::Train)]
    pub mode: Mode,
}

#[derive(Debug, Clone, Args)]
pub struct ReplayArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long)]
    pub recipe: PathBuf,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct VerifyArgs {
    /// Directory written by `generate`.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = default_workers())]
    pub workers: usize,
    #[arg(long)]
    pub summary: Option<PathBuf>,
}

/// Preview grid size, `ROWSxCOLS` with an even row count.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Grid {
    pub rows: usize,
    pub cols: usize,
}

impl Grid {
    pub fn entries_needed(&self) -> usize {
        self.rows / 2 * self.cols
    }
}

impl FromStr for Grid {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (r, c) = s
            .split_once(['x', 'X'])
            .ok_or_else(|| format!("grid '{s}' is not of the form RxC"))?;
        let rows: usize = r.trim().parse().map_err(|_| format!("bad row count '{r}'"))?;
        let cols: usize = c.trim().parse().map_err(|_| format!("bad column count '{c}'"))?;
        if rows == 0 || cols == 0 || !rows.is_multiple_of(2) {
            return Err(format!("grid {rows}x{cols}: rows must be even and both sides positive"));
        }
        Ok(Grid { rows, cols })
    }
}

#[derive(Debug, Clone, Args)]
pub struct PreviewArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, env = "SBI_FORGE_SEED", default_value_t = 42)]
    pub seed: u64,
    #[arg(long, default_value = "2x4")]
    pub grid: Grid,
    /// Side of one square tile in pixels.
    #[arg(long, default_value_t = 128)]
    pub tile: usize,
    #[arg(long, value_enum, default_value_t = Mode::Train)]
    pub mode: Mode,
    /// Output PNG path.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct AuditArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, env = "SBI_FORGE_SEED", default_value_t = 42)]
    pub seed: u64,
    #[arg(long, default_value_t = 60_000)]
    pub draws: u64,
    #[arg(long)]
    pub summary: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct ScoreArgs {
    /// CSV with columns video_id, frame_index, confidence; an empty
    /// confidence marks a frame without a detected face.
    #[arg(long)]
    pub input: PathBuf,
    /// Optional CSV with columns video_id, label (1 = fake).
    #[arg(long)]
    pub labels: Option<PathBuf>,
    /// Per-video CSV output; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub summary: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 20)]
    pub count: usize,
    /// Side of each square image in pixels.
    #[arg(long, default_value_t = 128)]
    pub size: usize,
}

fn synth_command(args: &SynthArgs) -> anyhow::Result<i32> {
    if args.size < 16 {
        anyhow::bail!("--size must be at least 16");
    }
    let manifest = sbi_forge::synthetic::write_dataset(&args.out, args.count, args.size, &[])?;
    eprintln!("wrote {}", manifest.display());
    Ok(EXIT_OK)
}

pub fn load_config(path: Option<&Path>) -> anyhow::Result<PipelineConfig> {
    match path {
        Some(p) => PipelineConfig::load(p).with_context(|| format!("loading config {}", p.display())),
        None => Ok(PipelineConfig::default()),
    }
}

pub(crate) fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> anyhow::Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    std::fs::write(path, text + "\n").with_context(|| format!("writing {}", path.display()))
}

/// Runs one parsed invocation and returns its exit code.
pub fn run(cli: Cli) -> i32 {
    let result = match cli.command {
        Command::Generate(a) => generate::command(&a),
        Command::Replay(a) => replay::command(&a),
        Command::Verify(a) => verify::command(&a),
        Command::Preview(a) => preview::command(&a),
        Command::Audit(a) => audit::command(&a),
        Command::Score(a) => score::command(&a),
        Command::Synth(a) => synth_command(&a),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            log::error!("{e:#}");
            EXIT_FATAL
        }
    }
}
