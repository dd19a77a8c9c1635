use std::collections::BTreeMap;

use anyhow::{bail, Context};
use sbi_forge::config::Interval;
use sbi_forge::ingest::{sample_margin, CropMode};
use sbi_forge::mg::MaskParams;
use sbi_forge::rng::tags;
use sbi_forge::stg::{self, FrequencyMode, ResizeTranslateParams, StgRecord, GATE_COUNT};
use sbi_forge::synthetic::face_landmarks;
use sbi_forge::{Landmarks, PipelineConfig, RngStream};
use serde::Serialize;

use crate::{load_config, write_json, AuditArgs, EXIT_OK};

pub const MIN_DRAWS: u64 = 1000;

/// Nominal raster the geometric parameters are drawn for.
const NOMINAL_SIZE: usize = 256;

const GATE_NAMES: [&str; GATE_COUNT] = ["rgb_shift", "hue", "saturation", "value", "brightness_contrast", "frequency"];

/// Empirical frequency of one discrete outcome against its expected probability.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FrequencyCheck {
    pub label: String,
    pub count: u64,
    pub frequency: f64,
    pub expected: f64,
    /// Binomial standard error of the frequency under `expected`.
    pub sigma: f64,
    pub z: f64,
    pub flagged: bool,
}

impl FrequencyCheck {
    fn new(label: impl Into<String>, count: u64, n: u64, expected: f64) -> Self {
        let frequency = count as f64 / n as f64;
        let sigma = (expected * (1.0 - expected) / n as f64).sqrt();
        let z = if sigma > 0.0 {
            (frequency - expected) / sigma
        } else if frequency == expected {
            0.0
        } else {
            f64::INFINITY
        };
        FrequencyCheck {
            label: label.into(),
            count,
            frequency,
            expected,
            sigma,
            z,
            flagged: z.abs() > 3.0,
        }
    }
}

/// Summary of one continuous parameter over all draws in which it was active.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ContinuousStat {
    pub name: String,
    pub samples: u64,
    pub min: f64,
    pub max: f64,
    pub mean: f64,
    pub std: f64,
    /// Configured sampling range, when the parameter is drawn uniformly.
    pub range: Option<[f64; 2]>,
    /// `(max - min) / (hi - lo)`.
    pub coverage: Option<f64>,
    /// Deviation of the mean from the range midpoint in standard errors.
    pub mean_z: Option<f64>,
    pub zero_variance: bool,
    pub flagged: bool,
}

#[derive(Debug, Clone)]
struct Accumulator {
    name: &'static str,
    range: Option<Interval>,
    n: u64,
    mean: f64,
    m2: f64,
    min: f64,
    max: f64,
}

impl Accumulator {
    fn new(name: &'static str, range: Option<Interval>) -> Self {
        Accumulator {
            name,
            range,
            n: 0,
            mean: 0.0,
            m2: 0.0,
            min: f64::INFINITY,
            max: f64::NEG_INFINITY,
        }
    }

    fn push(&mut self, v: f64) {
        self.n += 1;
        let d = v - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (v - self.mean);
        self.min = self.min.min(v);
        self.max = self.max.max(v);
    }

    fn finish(&self) -> ContinuousStat {
        let std = if self.n > 1 { (self.m2 / (self.n - 1) as f64).sqrt() } else { 0.0 };
        let zero_variance = self.n > 0 && self.min == self.max;
        let (mut coverage, mut mean_z, mut flagged) = (None, None, false);
        if let (Some(r), true) = (self.range, self.n > 0) {
            if r.width() > 0.0 {
                coverage = Some((self.max - self.min) / r.width());
                let se = r.width() / (12.0 * self.n as f64).sqrt();
                let z = (self.mean - 0.5 * (r.lo() + r.hi())) / se;
                mean_z = Some(z);
                flagged |= z.abs() > 3.0;
            }
            flagged |= self.min < r.lo() || self.max > r.hi();
        }
        ContinuousStat {
            name: self.name.to_string(),
            samples: self.n,
            min: if self.n > 0 { self.min } else { f64::NAN },
            max: if self.n > 0 { self.max } else { f64::NAN },
            mean: self.mean,
            std,
            range: self.range.map(|r| [r.lo(), r.hi()]),
            coverage,
            mean_z,
            zero_variance,
            flagged,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AuditReport {
    pub draws: u64,
    pub seed: u64,
    pub ratio: Vec<FrequencyCheck>,
    pub source_augmented: FrequencyCheck,
    pub gates: Vec<FrequencyCheck>,
    /// Share of draws whose frequency stage picked downscaling over sharpening.
    pub downscale_mode: FrequencyCheck,
    pub continuous: Vec<ContinuousStat>,
    /// Names of checks deviating by more than three standard errors or
    /// leaving their configured range.
    pub flagged: Vec<String>,
    pub notes: Vec<String>,
}

impl AuditReport {
    pub fn ratio_frequency(&self, r: f64) -> Option<f64> {
        self.ratio.iter().find(|c| c.label == ratio_label(r)).map(|c| c.frequency)
    }

    pub fn continuous(&self, name: &str) -> Option<&ContinuousStat> {
        self.continuous.iter().find(|c| c.name == name)
    }
}

fn ratio_label(r: f64) -> String {
    format!("r={r}")
}

fn nominal_landmarks() -> Landmarks {
    let c = NOMINAL_SIZE as f64 / 2.0;
    let pts = face_landmarks(c, c, 0.3 * NOMINAL_SIZE as f64, 0.36 * NOMINAL_SIZE as f64, &mut RngStream::new(0, 0));
    Landmarks::new(pts).expect("nominal landmarks are finite")
}

/// Draws the full parameter set `draws` times, exactly as generation would
/// for a 256x256 face, without rendering any image.
pub fn run_audit(config: &PipelineConfig, seed: u64, draws: u64) -> anyhow::Result<AuditReport> {
    if draws < MIN_DRAWS {
        bail!("audit needs at least {MIN_DRAWS} draws, got {draws}");
    }
    config.validate().context("invalid config")?;
    let stg_cfg = &config.stg;
    let mask_cfg = &config.mask;
    let landmarks = nominal_landmarks();
    let diag = landmarks
        .bounds()
        .map(|(x0, y0, x1, y1)| (x1 - x0).hypot(y1 - y0))
        .expect("nominal landmarks are non-empty");
    let jitter = Interval(-mask_cfg.landmark_jitter, mask_cfg.landmark_jitter);

    let mut acc = vec![
        Accumulator::new("train_margin", Some(config.crop.train_margin)),
        Accumulator::new("rgb_shift", Some(stg_cfg.rgb_shift)),
        Accumulator::new("hue_shift_deg", Some(stg_cfg.hue_shift_deg)),
        Accumulator::new("saturation_scale", Some(stg_cfg.saturation_scale)),
        Accumulator::new("value_scale", Some(stg_cfg.value_scale)),
        Accumulator::new("brightness_shift", Some(stg_cfg.brightness_shift)),
        Accumulator::new("contrast_scale", Some(stg_cfg.contrast_scale)),
        Accumulator::new("downscale_factor", Some(stg_cfg.downscale_factor)),
        Accumulator::new("sharpen_alpha", Some(stg_cfg.sharpen_alpha)),
        Accumulator::new("scale", Some(stg_cfg.scale)),
        Accumulator::new("translate", Some(stg_cfg.translate)),
        Accumulator::new("landmark_offset_fraction", Some(jitter)),
        Accumulator::new("elastic_alpha", Some(mask_cfg.elastic_alpha)),
        Accumulator::new("elastic_sigma", Some(mask_cfg.elastic_sigma)),
        Accumulator::new("k1", None),
        Accumulator::new("k2", None),
    ];
    let mut ratio_counts: BTreeMap<u64, u64> = BTreeMap::new();
    let mut source_augmented = 0u64;
    let mut gate_counts = [0u64; GATE_COUNT];
    let mut downscale = 0u64;

    for i in 0..draws {
        let stream = RngStream::for_sample(seed, i, 0);
        acc[0].push(sample_margin(&mut stream.child(tags::MARGIN), CropMode::Train, &config.crop)?);

        source_augmented += u64::from(StgRecord::sample(&stream, stg_cfg)?.source_is_augmented);
        let draw = stg::sample_transform(&stream, stg_cfg)?;
        for (c, g) in gate_counts.iter_mut().zip(draw.gates) {
            *c += u64::from(g);
        }
        for v in draw.color.rgb_shift {
            acc[1].push(v);
        }
        acc[2].push(draw.color.hue_shift_deg);
        acc[3].push(draw.color.saturation_scale);
        acc[4].push(draw.color.value_scale);
        acc[5].push(draw.color.brightness_shift);
        acc[6].push(draw.color.contrast_scale);
        match draw.frequency.mode {
            FrequencyMode::Downscale => {
                downscale += 1;
                acc[7].push(draw.frequency.downscale_factor);
            }
            FrequencyMode::Sharpen => acc[8].push(draw.frequency.sharpen_alpha),
            FrequencyMode::None => {}
        }

        let rt = ResizeTranslateParams::sample(&mut stream.child(tags::RESIZE_TRANSLATE), stg_cfg, NOMINAL_SIZE, NOMINAL_SIZE)?;
        acc[9].push(rt.u_h);
        acc[9].push(rt.u_w);
        acc[10].push(rt.v_h);
        acc[10].push(rt.v_w);

        let mask = MaskParams::sample(&landmarks, &stream, mask_cfg)?;
        for v in mask.landmark_offsets.iter().flatten() {
            acc[11].push(v / diag);
        }
        acc[12].push(mask.elastic_alpha);
        acc[13].push(mask.elastic_sigma);
        acc[14].push(mask.k1 as f64);
        acc[15].push(mask.k2 as f64);
        *ratio_counts.entry(mask.ratio.to_bits()).or_default() += 1;
    }

    let choices = &mask_cfg.ratio_choices;
    let mut distinct: Vec<f64> = choices.clone();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    let ratio: Vec<FrequencyCheck> = distinct
        .iter()
        .map(|&r| {
            let mult = choices.iter().filter(|&&c| c == r).count();
            let count = ratio_counts.get(&r.to_bits()).copied().unwrap_or(0);
            FrequencyCheck::new(ratio_label(r), count, draws, mult as f64 / choices.len() as f64)
        })
        .collect();

    let a = stg_cfg.apply_probability;
    // A gate fires on its own draw or is the one forced when none fired.
    let gate_p = a + (1.0 - a).powi(GATE_COUNT as i32) / GATE_COUNT as f64;
    let gates: Vec<FrequencyCheck> = GATE_NAMES
        .iter()
        .zip(gate_counts)
        .map(|(name, c)| FrequencyCheck::new(format!("gate:{name}"), c, draws, gate_p))
        .collect();

    let continuous: Vec<ContinuousStat> = acc.iter().map(Accumulator::finish).collect();
    let source_augmented = FrequencyCheck::new("source_augmented", source_augmented, draws, 0.5);
    let downscale_mode = FrequencyCheck::new("downscale_mode", downscale, draws, 0.5);

    let mut flagged: Vec<String> = ratio
        .iter()
        .chain(&gates)
        .chain([&source_augmented, &downscale_mode])
        .filter(|c| c.flagged)
        .map(|c| c.label.clone())
        .collect();
    flagged.extend(continuous.iter().filter(|c| c.flagged).map(|c| c.name.clone()));
    let notes = continuous
        .iter()
        .filter(|c| c.zero_variance)
        .map(|c| format!("{} is constant at {} (zero variance)", c.name, c.min))
        .collect();

    Ok(AuditReport {
        draws,
        seed,
        ratio,
        source_augmented,
        gates,
        downscale_mode,
        continuous,
        flagged,
        notes,
    })
}

pub(crate) fn command(args: &AuditArgs) -> anyhow::Result<i32> {
    let config = load_config(args.config.as_deref())?;
    let report = run_audit(&config, args.seed, args.draws)?;
    if let Some(path) = &args.summary {
        write_json(path, &report)?;
    }
    eprintln!("{} draws, seed {}", report.draws, report.seed);
    for c in report.ratio.iter().chain(&report.gates).chain([&report.source_augmented, &report.downscale_mode]) {
        eprintln!(
            "  {:<28} {:.4} (expected {:.4}, z {:+.2}){}",
            c.label,
            c.frequency,
            c.expected,
            c.z,
            if c.flagged { "  FLAG" } else { "" }
        );
    }
    for c in &report.continuous {
        eprintln!(
            "  {:<28} min {:.4} max {:.4} mean {:.4} std {:.4} coverage {}{}",
            c.name,
            c.min,
            c.max,
            c.mean,
            c.std,
            c.coverage.map_or("n/a".to_string(), |v| format!("{v:.3}")),
            if c.flagged { "  FLAG" } else { "" }
        );
    }
    for n in &report.notes {
        eprintln!("  note: {n}");
    }
    if !report.flagged.is_empty() {
        eprintln!("deviations beyond 3 sigma: {}", report.flagged.join(", "));
    }
    Ok(EXIT_OK)
}
