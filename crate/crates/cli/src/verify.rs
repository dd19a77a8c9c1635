use std::fmt;
use std::path::Path;

use anyhow::Context;
use rayon::prelude::*;
use sbi_forge::ingest::{self, entry_key, read_index, read_png_bytes, sha256_hex, IndexLine, Manifest, SamplePaths, INDEX_FILE};
use sbi_forge::pipeline;
use sbi_forge::RecipeRecord;
use serde::Serialize;

use crate::generate::RunRecord;
use crate::{write_json, VerifyArgs, EXIT_OK, EXIT_VERIFY};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureKind {
    MissingFile,
    SizeMismatch,
    DigestMismatch,
    CorruptedRecipe,
    ReplayError,
    ProvenanceMismatch,
    ReplayMismatch,
    InvariantViolation,
}

impl fmt::Display for FailureKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            FailureKind::MissingFile => "missing file",
            FailureKind::SizeMismatch => "size mismatch",
            FailureKind::DigestMismatch => "digest mismatch",
            FailureKind::CorruptedRecipe => "corrupted recipe",
            FailureKind::ReplayError => "replay error",
            FailureKind::ProvenanceMismatch => "provenance mismatch",
            FailureKind::ReplayMismatch => "replay mismatch",
            FailureKind::InvariantViolation => "invariant violation",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct VerifyFailure {
    /// Path relative to the output directory.
    pub path: String,
    pub kind: FailureKind,
    pub detail: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct VerifyReport {
    pub files_checked: usize,
    pub recipes_replayed: usize,
    pub failures: Vec<VerifyFailure>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

fn failure(path: &str, kind: FailureKind, detail: impl Into<String>) -> VerifyFailure {
    VerifyFailure {
        path: path.to_string(),
        kind,
        detail: detail.into(),
    }
}

fn check_index_line(out: &Path, line: &IndexLine) -> Option<VerifyFailure> {
    let bytes = match std::fs::read(out.join(&line.path)) {
        Ok(b) => b,
        Err(e) => return Some(failure(&line.path, FailureKind::MissingFile, e.to_string())),
    };
    if bytes.len() as u64 != line.size {
        return Some(failure(
            &line.path,
            FailureKind::SizeMismatch,
            format!("indexed {} bytes, found {}", line.size, bytes.len()),
        ));
    }
    let digest = sha256_hex(&bytes);
    if digest != line.digest {
        return Some(failure(
            &line.path,
            FailureKind::DigestMismatch,
            format!("indexed {}, found {digest}", line.digest),
        ));
    }
    None
}

fn compare_png(out: &Path, rel: &str, expected: &[u8], h: usize, w: usize) -> Option<VerifyFailure> {
    let (fh, fw, bytes, _) = match read_png_bytes(out.join(rel)) {
        Ok(v) => v,
        Err(e) => return Some(failure(rel, FailureKind::MissingFile, e.to_string())),
    };
    if (fh, fw) != (h, w) {
        return Some(failure(
            rel,
            FailureKind::ReplayMismatch,
            format!("file is {fh}x{fw}, replay is {h}x{w}"),
        ));
    }
    if bytes.len() != expected.len() {
        return Some(failure(rel, FailureKind::ReplayMismatch, "channel layout differs from replay"));
    }
    let differing = bytes.iter().zip(expected).filter(|(a, b)| a != b).count();
    if differing > 0 {
        return Some(failure(
            rel,
            FailureKind::ReplayMismatch,
            format!("{differing} of {} bytes differ from the replay", bytes.len()),
        ));
    }
    None
}

fn check_recipe(out: &Path, manifest: &Manifest, rel: &str) -> Vec<VerifyFailure> {
    let recipe = match RecipeRecord::load(out.join(rel)) {
        Ok(r) => r,
        Err(e) => return vec![failure(rel, FailureKind::CorruptedRecipe, e.to_string())],
    };
    let paths = SamplePaths::new(&entry_key(recipe.key.entry_index), recipe.key.sample_index);
    if paths.recipe != rel {
        return vec![failure(
            rel,
            FailureKind::CorruptedRecipe,
            format!("recipe key names {}", paths.recipe),
        )];
    }
    let Some(entry) = manifest.entries.get(recipe.key.entry_index as usize) else {
        return vec![failure(
            rel,
            FailureKind::CorruptedRecipe,
            format!("entry {} not in manifest", recipe.key.entry_index),
        )];
    };
    let rendered = ingest::load_image(manifest.image_path(entry)).and_then(|img| {
        let (base, landmarks) = pipeline::recorded_base(&img, entry, recipe.crop.as_ref())?;
        let replayed = pipeline::replay(&recipe, &base, &landmarks)?;
        Ok((base, landmarks, replayed))
    });
    let (base, landmarks, replayed) = match rendered {
        Ok(v) => v,
        Err(e) => return vec![failure(rel, FailureKind::ReplayError, e.to_string())],
    };

    let mut failures = Vec::new();
    if !replayed.provenance_matches {
        failures.push(failure(
            rel,
            FailureKind::ProvenanceMismatch,
            format!("base image {} does not match the recorded digest", entry.image),
        ));
    }
    if let Err(e) = pipeline::verify_sample(&base, &landmarks, &replayed.sample) {
        failures.push(failure(rel, FailureKind::InvariantViolation, e.to_string()));
    }
    let s = &replayed.sample;
    let (h, w) = s.real_image.dims();
    let checks = [
        (&paths.real, s.real_image.to_rgb8()),
        (&paths.fake, s.fake_image.to_rgb8()),
        (&paths.mask, s.mask.to_gray8()),
    ];
    failures.extend(
        checks
            .iter()
            .filter_map(|(p, expected)| compare_png(out, p, expected, h, w)),
    );
    failures
}

/// Re-checks every indexed file and replays every recipe. Read-only.
///
/// Errors are reserved for directories that cannot be verified at all
/// (no run record, unreadable index or manifest); everything else is
/// itemized in the report.
pub fn run_verify(out: &Path, workers: usize) -> anyhow::Result<VerifyReport> {
    let run = RunRecord::load(out)?;
    let manifest = pipeline::load_manifest(&run.manifest, &run.config)
        .with_context(|| format!("reading manifest {}", run.manifest.display()))?;
    let index = read_index(out.join(INDEX_FILE)).context("reading batch index")?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .context("starting worker pool")?;

    let mut report = VerifyReport {
        files_checked: index.len(),
        ..VerifyReport::default()
    };
    let recipes: Vec<&str> = index
        .iter()
        .map(|l| l.path.as_str())
        .filter(|p| p.ends_with("_recipe.json"))
        .collect();
    let (file_failures, recipe_failures): (Vec<Option<VerifyFailure>>, Vec<Vec<VerifyFailure>>) = pool.install(|| {
        (
            index.par_iter().map(|l| check_index_line(out, l)).collect(),
            recipes.par_iter().map(|r| check_recipe(out, &manifest, r)).collect(),
        )
    });
    report.recipes_replayed = recipes.len();
    report.failures.extend(file_failures.into_iter().flatten());
    report.failures.extend(recipe_failures.into_iter().flatten());
    Ok(report)
}

pub(crate) fn command(args: &VerifyArgs) -> anyhow::Result<i32> {
    let report = run_verify(&args.out, args.workers)?;
    if let Some(path) = &args.summary {
        write_json(path, &report)?;
    }
    for f in &report.failures {
        eprintln!("FAIL {}: {}: {}", f.path, f.kind, f.detail);
    }
    if report.passed() {
        eprintln!(
            "PASS: {} files, {} recipes replayed bit-identically",
            report.files_checked, report.recipes_replayed
        );
        Ok(EXIT_OK)
    } else {
        eprintln!("FAIL: {} problems", report.failures.len());
        Ok(EXIT_VERIFY)
    }
}
