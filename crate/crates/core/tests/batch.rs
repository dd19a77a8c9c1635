use std::path::Path;

use sbi_forge::ingest::{
    entry_key, parse_manifest, read_index, read_png_bytes, sha256_hex, write_manifest, write_sample, BatchIndexWriter,
    INDEX_FILE,
};
use sbi_forge::pipeline::{generate_batch, load_manifest, replay_from_manifest, BatchItem, BatchOptions, BatchReport};
use sbi_forge::tensor::quantize;
use sbi_forge::{synthetic, PipelineConfig, RecipeRecord, SbiSample};

fn run(manifest: &Path, out: &Path, opts: &BatchOptions) -> (BatchReport, Vec<SbiSample>) {
    let cfg = PipelineConfig::default();
    let manifest = load_manifest(manifest, &cfg).unwrap();
    std::fs::create_dir_all(out).unwrap();
    let mut index = BatchIndexWriter::create(out).unwrap();
    let mut samples = Vec::new();
    let report = generate_batch(&manifest, &cfg, opts, |item| {
        if let BatchItem::Sample(s) = item {
            write_sample(&s.sample, out, &entry_key(s.entry_index as u64), cfg.output.png_compression, &mut index)?;
            samples.push(s.sample);
        }
        Ok(())
    })
    .unwrap();
    index.finish().unwrap();
    (report, samples)
}

fn index_digest(out: &Path) -> String {
    sha256_hex(&std::fs::read(out.join(INDEX_FILE)).unwrap())
}

#[test]
fn worker_count_does_not_change_output() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = synthetic::write_dataset(dir.path().join("data"), 50, 48, &[]).unwrap();
    let one = dir.path().join("w1");
    let eight = dir.path().join("w8");
    let (r1, _) = run(&manifest, &one, &BatchOptions { workers: 1, ..BatchOptions::default() });
    let (r8, _) = run(&manifest, &eight, &BatchOptions { workers: 8, ..BatchOptions::default() });
    assert_eq!(r1, r8);
    assert_eq!(r1.emitted, 50);
    assert_eq!(index_digest(&one), index_digest(&eight));
    for line in read_index(one.join(INDEX_FILE)).unwrap() {
        assert_eq!(std::fs::read(one.join(&line.path)).unwrap(), std::fs::read(eight.join(&line.path)).unwrap());
    }
}

#[test]
fn degenerate_entry_is_skipped_once() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = synthetic::write_dataset(dir.path().join("data"), 20, 40, &[7]).unwrap();
    let k = 3;
    let (report, samples) = run(
        &manifest,
        &dir.path().join("out"),
        &BatchOptions {
            samples_per_image: k,
            workers: 2,
            ..BatchOptions::default()
        },
    );
    assert_eq!(report.emitted, 19 * k as usize);
    assert_eq!(samples.len(), 19 * k as usize);
    assert_eq!(report.skipped.len(), 1);
    let skip = &report.skipped[0];
    assert_eq!((skip.entry_index, skip.sample_index, skip.reason), (7, None, "degenerate hull"));
    assert!(samples.iter().all(|s| s.recipe.key.entry_index != 7));
}

#[test]
fn missing_image_is_skipped_not_fatal() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    let manifest = synthetic::write_dataset(&data, 5, 40, &[]).unwrap();
    std::fs::remove_file(data.join("face_00002.png")).unwrap();
    let (report, _) = run(&manifest, &dir.path().join("out"), &BatchOptions::default());
    assert_eq!(report.emitted, 4);
    assert_eq!(report.skipped.len(), 1);
    assert_eq!(report.skipped[0].entry_index, 2);
}

#[test]
fn written_files_round_trip_and_replay_from_disk() {
    let dir = tempfile::tempdir().unwrap();
    let manifest_path = synthetic::write_dataset(dir.path().join("data"), 6, 56, &[]).unwrap();
    let out = dir.path().join("out");
    let (_, samples) = run(&manifest_path, &out, &BatchOptions { samples_per_image: 2, ..BatchOptions::default() });
    let manifest = load_manifest(&manifest_path, &PipelineConfig::default()).unwrap();
    for s in &samples {
        let key = s.recipe.key.clone();
        let stem = format!("{}_{}", entry_key(key.entry_index), key.sample_index);
        let (h, w, fake, _) = read_png_bytes(out.join(format!("{stem}_fake.png"))).unwrap();
        assert_eq!((h, w), s.fake_image.dims());
        let expected: Vec<u8> = s.fake_image.data().iter().map(|&v| quantize(v)).collect();
        assert_eq!(fake, expected);
        let (_, _, mask, gray) = read_png_bytes(out.join(format!("{stem}_mask.png"))).unwrap();
        assert!(gray);
        assert_eq!(mask, s.mask.to_gray8());

        let recipe = RecipeRecord::load(out.join(format!("{stem}_recipe.json"))).unwrap();
        assert_eq!(&recipe, &s.recipe);
        let replayed = replay_from_manifest(&manifest, &recipe).unwrap();
        assert!(replayed.provenance_matches);
        assert_eq!(&replayed.sample, s);
    }
}

#[test]
fn recipe_lists_parameters_in_execution_order() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = synthetic::write_dataset(dir.path().join("data"), 1, 48, &[]).unwrap();
    let (_, samples) = run(&manifest, &dir.path().join("out"), &BatchOptions::default());
    let json = samples[0].recipe.to_json().unwrap();
    let pos = |key: &str| json.find(&format!("\"{key}\"")).unwrap_or_else(|| panic!("{key} missing"));
    let order = [
        "crop",
        "stg",
        "source_is_augmented",
        "color",
        "frequency",
        "resize_translate",
        "mask",
        "landmark_offsets",
        "elastic_alpha",
        "k1",
        "k2",
        "ratio",
    ];
    for pair in order.windows(2) {
        assert!(pos(pair[0]) < pos(pair[1]), "{} should precede {}", pair[0], pair[1]);
    }
}

#[test]
fn manifest_round_trip_is_identity() {
    let dir = tempfile::tempdir().unwrap();
    let path = synthetic::write_dataset(dir.path(), 4, 32, &[]).unwrap();
    let first = parse_manifest(&path, 81).unwrap();
    let copy = dir.path().join("copy.jsonl");
    write_manifest(&copy, &first.entries).unwrap();
    let second = parse_manifest(&copy, 81).unwrap();
    assert_eq!(first.entries, second.entries);
    assert_eq!(std::fs::read(&path).unwrap(), std::fs::read(&copy).unwrap());
}

#[test]
fn rerun_rewrites_identical_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = synthetic::write_dataset(dir.path().join("data"), 8, 40, &[]).unwrap();
    let out = dir.path().join("out");
    run(&manifest, &out, &BatchOptions::default());
    let first = index_digest(&out);
    run(&manifest, &out, &BatchOptions::default());
    assert_eq!(first, index_digest(&out));
}
