use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context};
use sbi_forge::ingest::{self, entry_key, sha256_hex, BatchIndexWriter, CropMode, INDEX_FILE};
use sbi_forge::pipeline::{self, BatchItem, BatchOptions};
use sbi_forge::{PipelineConfig, SbiError};
use serde::{Deserialize, Serialize};

use crate::{load_config, write_json, GenerateArgs, EXIT_FATAL, EXIT_OK, RUN_FILE};

/// Everything needed to reproduce or verify a generated directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    /// Absolute path of the manifest the run read.
    pub manifest: PathBuf,
    pub seed: u64,
    pub samples_per_image: u32,
    pub mode: CropMode,
    pub config: PipelineConfig,
}

impl RunRecord {
    pub fn load(out_dir: &Path) -> anyhow::Result<Self> {
        let path = out_dir.join(RUN_FILE);
        let text = std::fs::read_to_string(&path)
            .with_context(|| format!("{} is not a generate output directory", out_dir.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkipRecord {
    pub entry_index: usize,
    /// Absent when the whole entry was skipped.
    pub sample_index: Option<u32>,
    pub image: String,
    pub reason: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerateSummary {
    pub entries: usize,
    pub samples_ok: usize,
    pub skipped: usize,
    pub skips: Vec<SkipRecord>,
    pub seed: u64,
    pub workers: usize,
    pub samples_per_image: u32,
    /// SHA-256 of the batch index file.
    pub index_digest: String,
    pub wall_time_s: f64,
    pub samples_per_sec: f64,
}

/// Generates every sample of a manifest into `args.out`, writing the batch
/// index, the run record and (optionally) the summary file.
pub fn run_generate(args: &GenerateArgs) -> anyhow::Result<GenerateSummary> {
    let start = Instant::now();
    let config = load_config(args.config.as_deref())?;
    config.validate().context("invalid config")?;
    if args.workers == 0 {
        bail!("--workers must be at least 1");
    }
    let manifest = pipeline::load_manifest(&args.manifest, &config)
        .with_context(|| format!("reading manifest {}", args.manifest.display()))?;
    std::fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;

    let manifest_path = std::fs::canonicalize(&args.manifest)
        .with_context(|| format!("resolving {}", args.manifest.display()))?;
    let run = RunRecord {
        manifest: manifest_path,
        seed: args.seed,
        samples_per_image: args.samples_per_image,
        mode: args.mode.into(),
        config: config.clone(),
    };
    write_json(&args.out.join(RUN_FILE), &run)?;

    let opts = BatchOptions {
        base_seed: args.seed,
        samples_per_image: args.samples_per_image,
        workers: args.workers,
        mode: args.mode.into(),
    };
    let total = manifest.entries.len() * args.samples_per_image as usize;
    let step = (total / 20).max(1);
    let mut index = BatchIndexWriter::create(&args.out)?;
    let mut done = 0usize;
    let compression = config.output.png_compression;
    let strict = args.strict;
    log::info!(
        "generating {total} samples from {} entries with {} workers",
        manifest.entries.len(),
        args.workers
    );

    let report = pipeline::generate_batch(&manifest, &config, &opts, |item| {
        match item {
            BatchItem::Sample(s) => {
                ingest::write_sample(&s.sample, &args.out, &entry_key(s.entry_index as u64), compression, &mut index)?;
            }
            BatchItem::Skipped(f) if strict => {
                return Err(SbiError::Validation(format!(
                    "strict mode: entry {} ({}) skipped: {}",
                    f.entry_index, f.image, f.message
                )));
            }
            BatchItem::Skipped(_) => {}
        }
        done += 1;
        if done.is_multiple_of(step) {
            log::info!("progress {done}/{total}");
        }
        Ok(())
    })?;
    let index_path = index.finish()?;
    let index_bytes = std::fs::read(&index_path).with_context(|| format!("reading {}", index_path.display()))?;

    let wall = start.elapsed().as_secs_f64();
    let summary = GenerateSummary {
        entries: manifest.entries.len(),
        samples_ok: report.emitted,
        skipped: report.skipped.len(),
        skips: report
            .skipped
            .iter()
            .map(|f| SkipRecord {
                entry_index: f.entry_index,
                sample_index: f.sample_index,
                image: f.image.clone(),
                reason: f.reason.to_string(),
                message: f.message.clone(),
            })
            .collect(),
        seed: args.seed,
        workers: args.workers,
        samples_per_image: args.samples_per_image,
        index_digest: sha256_hex(&index_bytes),
        wall_time_s: wall,
        samples_per_sec: if wall > 0.0 { report.emitted as f64 / wall } else { 0.0 },
    };
    if let Some(path) = &args.summary {
        write_json(path, &summary)?;
    }
    Ok(summary)
}

pub(crate) fn command(args: &GenerateArgs) -> anyhow::Result<i32> {
    let s = run_generate(args)?;
    eprintln!(
        "generated {} samples, skipped {} ({} entries) in {:.2}s, {:.1} samples/s",
        s.samples_ok, s.skipped, s.entries, s.wall_time_s, s.samples_per_sec
    );
    for k in &s.skips {
        eprintln!("  skipped entry {} ({}): {}: {}", k.entry_index, k.image, k.reason, k.message);
    }
    eprintln!("index {} sha256 {}", args.out.join(INDEX_FILE).display(), s.index_digest);
    if s.samples_ok == 0 {
        log::error!("no sample was generated");
        return Ok(EXIT_FATAL);
    }
    Ok(EXIT_OK)
}
