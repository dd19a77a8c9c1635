use anyhow::Context;
use sbi_forge::ingest::{self, entry_key, BatchIndexWriter, SamplePaths};
use sbi_forge::pipeline::{self, Replayed};
use sbi_forge::RecipeRecord;

use crate::{load_config, ReplayArgs, EXIT_OK, EXIT_VERIFY};

/// Re-renders the sample described by a recipe file and writes its artifacts
/// (plus a one-sample index) into `args.out`.
pub fn run_replay(args: &ReplayArgs) -> anyhow::Result<(Replayed, SamplePaths)> {
    let config = load_config(args.config.as_deref())?;
    let manifest = pipeline::load_manifest(&args.manifest, &config)
        .with_context(|| format!("reading manifest {}", args.manifest.display()))?;
    let recipe = RecipeRecord::load(&args.recipe).with_context(|| format!("loading {}", args.recipe.display()))?;
    let replayed = pipeline::replay_from_manifest(&manifest, &recipe)?;
    std::fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    let mut index = BatchIndexWriter::create(&args.out)?;
    let paths = ingest::write_sample(
        &replayed.sample,
        &args.out,
        &entry_key(recipe.key.entry_index),
        config.output.png_compression,
        &mut index,
    )?;
    index.finish()?;
    Ok((replayed, paths))
}

pub(crate) fn command(args: &ReplayArgs) -> anyhow::Result<i32> {
    let (replayed, paths) = run_replay(args)?;
    eprintln!("wrote {}, {}, {}", paths.real, paths.fake, paths.mask);
    if !replayed.provenance_matches {
        eprintln!("base image does not match the digest recorded in the recipe");
        return Ok(EXIT_VERIFY);
    }
    Ok(EXIT_OK)
}
