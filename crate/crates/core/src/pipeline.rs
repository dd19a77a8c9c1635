//! End-to-end self-blended image synthesis.
//!
//! One base image plus landmarks goes in; a labelled pair (target as real,
//! blend as fake), the mask and a replayable recipe come out. Sampling and
//! rendering are split: [`generate_sbi`] samples a [`RecipeRecord`] and then
//! runs the same deterministic renderer that [`replay`] uses.

use std::path::Path;

use rayon::prelude::*;

use crate::blend::blend;
use crate::config::PipelineConfig;
use crate::error::{Result, SbiError};
use crate::ingest::{self, CropMode, CropRect, Manifest, ManifestEntry};
use crate::mg::{self, MaskParams};
use crate::recipe::{CropRecord, RecipeRecord, SampleKey, RECIPE_VERSION};
use crate::rng::{tags, RngStream};
use crate::stg::{self, ResizeTranslateParams, StgRecord};
use crate::tensor::{BlendMask, ImageTensor, Landmarks};

/// One generated training pair. The real member is the target image.
#[derive(Debug, Clone, PartialEq)]
pub struct SbiSample {
    pub real_image: ImageTensor,
    pub fake_image: ImageTensor,
    pub mask: BlendMask,
    pub recipe: RecipeRecord,
}

/// Every intermediate of one rendering.
#[derive(Debug, Clone, PartialEq)]
pub struct Synthesis {
    pub source: ImageTensor,
    pub target: ImageTensor,
    pub mask: BlendMask,
    pub fake: ImageTensor,
}

fn check_inputs(img: &ImageTensor, landmarks: &Landmarks) -> Result<()> {
    if landmarks.len() < 3 {
        return Err(SbiError::DegenerateHull(format!(
            "need at least 3 landmarks, got {}",
            landmarks.len()
        )));
    }
    debug_assert!(img.height() >= 1 && img.width() >= 1);
    Ok(())
}

/// Renders a recipe: split, resize/translate the source, build the mask
/// under the same geometry, blend.
pub fn synthesize(img: &ImageTensor, landmarks: &Landmarks, recipe: &RecipeRecord) -> Result<Synthesis> {
    check_inputs(img, landmarks)?;
    let (h, w) = img.dims();
    let (source, target) = recipe.stg.apply(img)?;
    let source = stg::resize_translate(&source, &recipe.resize_translate)?;
    let mask = mg::render_mask(landmarks, h, w, &recipe.resize_translate, &recipe.mask, recipe.seed)?;
    let fake = blend(&source, &target, &mask)?;
    Ok(Synthesis {
        source,
        target,
        mask,
        fake,
    })
}

fn into_sample(s: Synthesis, recipe: RecipeRecord) -> SbiSample {
    SbiSample {
        real_image: s.target,
        fake_image: s.fake,
        mask: s.mask,
        recipe,
    }
}

/// Samples every parameter of one generation from `stream`.
pub fn sample_recipe(
    img: &ImageTensor,
    landmarks: &Landmarks,
    config: &PipelineConfig,
    stream: &RngStream,
) -> Result<RecipeRecord> {
    check_inputs(img, landmarks)?;
    mg::convex_hull(landmarks.points())?;
    let (h, w) = img.dims();
    let stg = StgRecord::sample(stream, &config.stg)?;
    let resize_translate =
        ResizeTranslateParams::sample(&mut stream.child(tags::RESIZE_TRANSLATE), &config.stg, h, w)?;
    let mask = MaskParams::sample(landmarks, stream, &config.mask)?;
    Ok(RecipeRecord {
        version: RECIPE_VERSION,
        key: SampleKey::default(),
        seed: stream.seed(),
        stream_id: stream.stream_id(),
        base_digest: img.content_digest(),
        crop: None,
        stg,
        resize_translate,
        mask,
    })
}

pub fn generate_sbi(
    img: &ImageTensor,
    landmarks: &Landmarks,
    config: &PipelineConfig,
    stream: &RngStream,
) -> Result<SbiSample> {
    let recipe = sample_recipe(img, landmarks, config, stream)?;
    let synthesis = synthesize(img, landmarks, &recipe)?;
    Ok(into_sample(synthesis, recipe))
}

/// Result of a replay. `provenance_matches` is false when the supplied image
/// is not the one the recipe was recorded against.
#[derive(Debug, Clone, PartialEq)]
pub struct Replayed {
    pub sample: SbiSample,
    pub provenance_matches: bool,
}

pub fn replay(recipe: &RecipeRecord, img: &ImageTensor, landmarks: &Landmarks) -> Result<Replayed> {
    recipe.validate(img.height(), img.width(), landmarks.len())?;
    let synthesis = synthesize(img, landmarks, recipe)?;
    let provenance_matches = img.content_digest() == recipe.base_digest;
    Ok(Replayed {
        sample: into_sample(synthesis, recipe.clone()),
        provenance_matches,
    })
}

/// Checks the per-sample invariants against a fresh rendering of its recipe:
/// mask range, exact blend, target labelled real.
pub fn verify_sample(img: &ImageTensor, landmarks: &Landmarks, sample: &SbiSample) -> Result<()> {
    let s = synthesize(img, landmarks, &sample.recipe)?;
    let r = sample.recipe.mask.ratio;
    let fail = |m: String| Err(SbiError::Validation(m));
    if sample.mask.data().iter().any(|&v| !(0.0..=r).contains(&v)) {
        return fail(format!("mask values outside [0, {r}]"));
    }
    if sample.real_image != s.target {
        return fail("real image is not the target image".into());
    }
    if sample.mask != s.mask {
        return fail("mask differs from its recipe".into());
    }
    if sample.fake_image != blend(&s.source, &s.target, &sample.mask)? {
        return fail("fake image is not the blend of source and target".into());
    }
    for ((f, t), &m) in sample
        .fake_image
        .data()
        .chunks_exact(3)
        .zip(sample.real_image.data().chunks_exact(3))
        .zip(sample.mask.data())
    {
        if m == 0.0 && f != t {
            return fail("fake differs from target where the mask is zero".into());
        }
    }
    Ok(())
}

/// Sample produced by [`generate_batch`].
#[derive(Debug, Clone)]
pub struct GeneratedSample {
    pub entry_index: usize,
    pub sample_index: u32,
    pub sample: SbiSample,
}

/// A logged, non-fatal failure. `sample_index` is `None` when the whole entry was skipped.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SampleFailure {
    pub entry_index: usize,
    pub sample_index: Option<u32>,
    pub image: String,
    pub reason: &'static str,
    pub message: String,
}

#[derive(Debug, Clone)]
#[allow(clippy::large_enum_variant)]
pub enum BatchItem {
    Sample(GeneratedSample),
    Skipped(SampleFailure),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BatchOptions {
    pub base_seed: u64,
    pub samples_per_image: u32,
    pub workers: usize,
    pub mode: CropMode,
}

impl Default for BatchOptions {
    fn default() -> Self {
        BatchOptions {
            base_seed: 42,
            samples_per_image: 1,
            workers: 1,
            mode: CropMode::Train,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct BatchReport {
    pub emitted: usize,
    pub skipped: Vec<SampleFailure>,
}

/// Crops the face for one sample and re-expresses the landmarks in crop coordinates.
pub fn prepare_base(
    image: &ImageTensor,
    entry: &ManifestEntry,
    config: &PipelineConfig,
    mode: CropMode,
    stream: &RngStream,
) -> Result<(ImageTensor, Landmarks, CropRecord)> {
    let margin = ingest::sample_margin(&mut stream.child(tags::MARGIN), mode, &config.crop)?;
    let (crop, rect) = ingest::crop_face(image, entry.bbox, margin, config.crop.margin_mode)?;
    let landmarks = rect.to_crop_frame(&entry.landmarks()?);
    let record = CropRecord {
        margin,
        mode: config.crop.margin_mode,
        rect: rect.as_array(),
    };
    Ok((crop, landmarks, record))
}

/// Re-creates the base crop recorded in a recipe.
pub fn recorded_base(image: &ImageTensor, entry: &ManifestEntry, crop: Option<&CropRecord>) -> Result<(ImageTensor, Landmarks)> {
    let landmarks = entry.landmarks()?;
    match crop {
        Some(c) => {
            let rect = CropRect::from_array(c.rect);
            Ok((ingest::crop_rect(image, rect)?, rect.to_crop_frame(&landmarks)))
        }
        None => Ok((image.clone(), landmarks)),
    }
}

/// Generates sample `sample_index` of one manifest entry from its loaded
/// image, exactly as [`generate_batch`] does.
pub fn generate_for_entry(
    entry_index: usize,
    entry: &ManifestEntry,
    image: &ImageTensor,
    config: &PipelineConfig,
    opts: &BatchOptions,
    sample_index: u32,
) -> Result<SbiSample> {
    let stream = RngStream::for_sample(opts.base_seed, entry_index as u64, u64::from(sample_index));
    let (base, landmarks, crop) = prepare_base(image, entry, config, opts.mode, &stream)?;
    let mut recipe = sample_recipe(&base, &landmarks, config, &stream)?;
    recipe.key = SampleKey {
        entry_index: entry_index as u64,
        sample_index: u64::from(sample_index),
        image: entry.image.clone(),
    };
    recipe.crop = Some(crop);
    let synthesis = synthesize(&base, &landmarks, &recipe)?;
    Ok(into_sample(synthesis, recipe))
}

fn process_entry(
    manifest: &Manifest,
    entry_index: usize,
    config: &PipelineConfig,
    opts: &BatchOptions,
) -> Vec<BatchItem> {
    let entry = &manifest.entries[entry_index];
    let skip = |sample_index: Option<u32>, e: SbiError| {
        BatchItem::Skipped(SampleFailure {
            entry_index,
            sample_index,
            image: entry.image.clone(),
            reason: e.reason(),
            message: e.to_string(),
        })
    };
    // Entry-level failures are logged once, not once per sample.
    let prepared = ingest::load_image(manifest.image_path(entry)).and_then(|img| {
        let landmarks = entry.landmarks()?;
        mg::convex_hull(landmarks.points())?;
        Ok(img)
    });
    let image = match prepared {
        Ok(img) => img,
        Err(e) => return vec![skip(None, e)],
    };
    (0..opts.samples_per_image)
        .map(|k| match generate_for_entry(entry_index, entry, &image, config, opts, k) {
            Ok(sample) => BatchItem::Sample(GeneratedSample {
                entry_index,
                sample_index: k,
                sample,
            }),
            Err(e) => skip(Some(k), e),
        })
        .collect()
}

/// Generates `samples_per_image` samples for every manifest entry.
///
/// Entries are processed in parallel chunks on a pool of `workers` threads;
/// items reach `sink` in `(entry, sample)` order regardless of the worker
/// count. Per-sample failures are passed to the sink as skips; only a sink
/// error aborts the batch.
pub fn generate_batch<F>(
    manifest: &Manifest,
    config: &PipelineConfig,
    opts: &BatchOptions,
    mut sink: F,
) -> Result<BatchReport>
where
    F: FnMut(BatchItem) -> Result<()>,
{
    if opts.workers == 0 {
        return Err(SbiError::Parameter("worker count must be >= 1".into()));
    }
    config.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.workers)
        .build()
        .map_err(|e| SbiError::Parameter(format!("cannot start worker pool: {e}")))?;

    let mut report = BatchReport::default();
    let chunk = (opts.workers * 4).max(1);
    let indices: Vec<usize> = (0..manifest.entries.len()).collect();
    for block in indices.chunks(chunk) {
        let results: Vec<Vec<BatchItem>> = pool.install(|| {
            block
                .par_iter()
                .map(|&i| process_entry(manifest, i, config, opts))
                .collect()
        });
        for item in results.into_iter().flatten() {
            match &item {
                BatchItem::Sample(_) => report.emitted += 1,
                BatchItem::Skipped(f) => {
                    log::warn!(
                        "skipping entry {} ({}) sample {:?}: {}",
                        f.entry_index,
                        f.image,
                        f.sample_index,
                        f.message
                    );
                    report.skipped.push(f.clone());
                }
            }
            sink(item)?;
        }
    }
    Ok(report)
}

/// Loads a manifest image and reproduces the sample described by `recipe`.
pub fn replay_from_manifest(manifest: &Manifest, recipe: &RecipeRecord) -> Result<Replayed> {
    let entry = manifest
        .entries
        .get(recipe.key.entry_index as usize)
        .ok_or_else(|| {
            SbiError::CorruptedRecipe(format!(
                "entry index {} not in manifest ({} entries)",
                recipe.key.entry_index,
                manifest.entries.len()
            ))
        })?;
    let image = ingest::load_image(manifest.image_path(entry))?;
    let (base, landmarks) = recorded_base(&image, entry, recipe.crop.as_ref())?;
    replay(recipe, &base, &landmarks)
}

/// Convenience for callers holding only a manifest path.
pub fn load_manifest(path: &Path, config: &PipelineConfig) -> Result<Manifest> {
    ingest::parse_manifest(path, config.landmark_count)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthetic;

    #[test]
    fn identity_config_reproduces_base_image() {
        let (img, lms) = synthetic::face(48, 48, 3);
        let cfg = PipelineConfig::identity();
        let s = generate_sbi(&img, &lms, &cfg, &RngStream::new(1, 2)).unwrap();
        assert_eq!(s.fake_image, img);
        assert_eq!(s.real_image, img);
        assert_eq!(s.mask.ratio(), 1.0);
    }

    #[test]
    fn replay_is_bit_exact() {
        let (img, lms) = synthetic::face(64, 56, 9);
        let cfg = PipelineConfig::default();
        for k in 0..5 {
            let stream = RngStream::for_sample(42, k, 0);
            let s = generate_sbi(&img, &lms, &cfg, &stream).unwrap();
            assert_eq!(generate_sbi(&img, &lms, &cfg, &stream).unwrap(), s);
            let text = s.recipe.to_json().unwrap();
            let r = replay(&RecipeRecord::from_json(&text).unwrap(), &img, &lms).unwrap();
            assert!(r.provenance_matches);
            assert_eq!(r.sample, s);
            verify_sample(&img, &lms, &s).unwrap();
        }
    }

    #[test]
    fn tampered_ratio_is_corrupted_recipe() {
        let (img, lms) = synthetic::face(40, 40, 1);
        let s = generate_sbi(&img, &lms, &PipelineConfig::default(), &RngStream::new(0, 0)).unwrap();
        let mut bad = s.recipe.clone();
        bad.mask.ratio = 1.5;
        assert!(matches!(replay(&bad, &img, &lms), Err(SbiError::CorruptedRecipe(_))));
        let mut old = s.recipe.clone();
        old.version = 0;
        assert!(matches!(replay(&old, &img, &lms), Err(SbiError::VersionMismatch { .. })));
    }

    #[test]
    fn foreign_image_flags_provenance() {
        let (img, lms) = synthetic::face(40, 40, 1);
        let (other, _) = synthetic::face(40, 40, 2);
        let s = generate_sbi(&img, &lms, &PipelineConfig::default(), &RngStream::new(0, 0)).unwrap();
        let r = replay(&s.recipe, &other, &lms).unwrap();
        assert!(!r.provenance_matches);
    }

    #[test]
    fn blend_formula_holds_per_pixel() {
        let (img, lms) = synthetic::face(48, 48, 5);
        let cfg = PipelineConfig::default();
        for k in 0..8 {
            let s = generate_sbi(&img, &lms, &cfg, &RngStream::for_sample(3, k, 0)).unwrap();
            let syn = synthesize(&img, &lms, &s.recipe).unwrap();
            let r = s.recipe.mask.ratio;
            for (i, &m) in s.mask.data().iter().enumerate() {
                for c in 0..3 {
                    let (f, t, src) = (
                        s.fake_image.data()[i * 3 + c],
                        s.real_image.data()[i * 3 + c],
                        syn.source.data()[i * 3 + c],
                    );
                    if m == 0.0 {
                        assert_eq!(f, t);
                    }
                    if m == r {
                        assert!((f - (r * src + (1.0 - r) * t)).abs() <= 1e-7);
                    }
                }
            }
        }
    }

    #[test]
    fn degenerate_landmarks_rejected() {
        let img = ImageTensor::filled(16, 16, 0.5).unwrap();
        let lms = Landmarks::from_pairs(&[[1.0, 1.0], [2.0, 2.0], [3.0, 3.0]]).unwrap();
        let err = generate_sbi(&img, &lms, &PipelineConfig::default(), &RngStream::new(0, 0)).unwrap_err();
        assert_eq!(err.reason(), "degenerate hull");
    }
}
