use std::path::PathBuf;

use anyhow::{bail, Context};
use image::ExtendedColorType;
use sbi_forge::ingest::{self, encode_png};
use sbi_forge::pipeline::{self, BatchOptions};
use sbi_forge::raster::resize_bilinear;
use sbi_forge::ImageTensor;

use crate::{load_config, PreviewArgs, EXIT_OK};

/// Rendered preview: RGB8 pixels of a `height x width` canvas.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Preview {
    pub height: usize,
    pub width: usize,
    pub pixels: Vec<u8>,
}

fn tile_bytes(img: &ImageTensor, tile: usize) -> Vec<u8> {
    let (h, w) = img.dims();
    let resized = resize_bilinear(img.data(), h, w, 3, tile, tile);
    ImageTensor::new(tile, tile, resized)
        .expect("bilinear resize stays in range")
        .to_rgb8()
}

/// Renders a grid where each pair of rows shows pristine base crops above
/// their self-blended images. Needs `rows / 2 * cols` manifest entries,
/// taken in manifest order.
pub fn render_preview(args: &PreviewArgs) -> anyhow::Result<Preview> {
    if args.tile == 0 {
        bail!("--tile must be positive");
    }
    let config = load_config(args.config.as_deref())?;
    let manifest = pipeline::load_manifest(&args.manifest, &config)
        .with_context(|| format!("reading manifest {}", args.manifest.display()))?;
    let grid = args.grid;
    let needed = grid.entries_needed();
    if manifest.entries.len() < needed {
        bail!(
            "a {}x{} grid needs {needed} manifest entries, the manifest has {}",
            grid.rows,
            grid.cols,
            manifest.entries.len()
        );
    }
    let opts = BatchOptions {
        base_seed: args.seed,
        mode: args.mode.into(),
        ..BatchOptions::default()
    };
    let t = args.tile;
    let (height, width) = (grid.rows * t, grid.cols * t);
    let mut pixels = vec![0u8; height * width * 3];
    for i in 0..needed {
        let entry = &manifest.entries[i];
        let rendered = ingest::load_image(manifest.image_path(entry)).and_then(|img| {
            let sample = pipeline::generate_for_entry(i, entry, &img, &config, &opts, 0)?;
            let (base, _) = pipeline::recorded_base(&img, entry, sample.recipe.crop.as_ref())?;
            Ok((base, sample.fake_image))
        });
        let (pristine, fake) = rendered.with_context(|| format!("entry {i} ({})", entry.image))?;
        let (block, col) = (i / grid.cols, i % grid.cols);
        for (row, img) in [(2 * block, &pristine), (2 * block + 1, &fake)] {
            let bytes = tile_bytes(img, t);
            for y in 0..t {
                let dst = ((row * t + y) * width + col * t) * 3;
                pixels[dst..dst + t * 3].copy_from_slice(&bytes[y * t * 3..(y + 1) * t * 3]);
            }
        }
    }
    Ok(Preview { height, width, pixels })
}

pub fn run_preview(args: &PreviewArgs) -> anyhow::Result<PathBuf> {
    let preview = render_preview(args)?;
    let config = load_config(args.config.as_deref())?;
    let bytes = encode_png(
        &preview.pixels,
        preview.width,
        preview.height,
        ExtendedColorType::Rgb8,
        config.output.png_compression,
    )?;
    if let Some(parent) = args.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
    }
    std::fs::write(&args.out, bytes).with_context(|| format!("writing {}", args.out.display()))?;
    Ok(args.out.clone())
}

pub(crate) fn command(args: &PreviewArgs) -> anyhow::Result<i32> {
    let path = run_preview(args)?;
    eprintln!("wrote {}", path.display());
    Ok(EXIT_OK)
}
