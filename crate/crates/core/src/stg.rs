//! Source-target generator: colour and frequency perturbations that create
//! statistical mismatch between the two blend inputs, and the
//! parameter-captured resize/translate that misaligns the source.

use serde::{Deserialize, Serialize};

use crate::config::StgConfig;
use crate::error::{Result, SbiError};
use crate::raster::{self, round_half_away};
use crate::rng::{tags, RngStream};
use crate::tensor::ImageTensor;

/// Colour perturbation. The identity is all shifts 0 and all scales 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ColorParams {
    pub rgb_shift: [f64; 3],
    pub hue_shift_deg: f64,
    pub saturation_scale: f64,
    pub value_scale: f64,
    pub brightness_shift: f64,
    pub contrast_scale: f64,
}

impl ColorParams {
    pub const IDENTITY: ColorParams = ColorParams {
        rgb_shift: [0.0; 3],
        hue_shift_deg: 0.0,
        saturation_scale: 1.0,
        value_scale: 1.0,
        brightness_shift: 0.0,
        contrast_scale: 1.0,
    };

    pub fn is_identity(&self) -> bool {
        *self == Self::IDENTITY
    }

    pub fn validate(&self) -> Result<()> {
        let finite = self.rgb_shift.iter().all(|v| v.is_finite())
            && self.hue_shift_deg.is_finite()
            && self.saturation_scale.is_finite()
            && self.value_scale.is_finite()
            && self.brightness_shift.is_finite()
            && self.contrast_scale.is_finite();
        if !finite {
            return Err(SbiError::Parameter("colour parameters must be finite".into()));
        }
        if self.rgb_shift.iter().any(|v| v.abs() > 1.0) || self.brightness_shift.abs() > 1.0 {
            return Err(SbiError::Parameter("colour shifts must lie in [-1, 1]".into()));
        }
        if self.saturation_scale < 0.0 || self.value_scale < 0.0 || self.contrast_scale < 0.0 {
            return Err(SbiError::Parameter("colour scales must be >= 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FrequencyMode {
    None,
    Downscale,
    Sharpen,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrequencyParams {
    pub mode: FrequencyMode,
    pub downscale_factor: f64,
    pub sharpen_alpha: f64,
    pub sharpen_sigma: f64,
}

impl FrequencyParams {
    pub const NONE: FrequencyParams = FrequencyParams {
        mode: FrequencyMode::None,
        downscale_factor: 1.0,
        sharpen_alpha: 0.0,
        sharpen_sigma: 1.0,
    };

    pub fn validate(&self) -> Result<()> {
        if !(self.downscale_factor > 0.0 && self.downscale_factor <= 1.0) {
            return Err(SbiError::Parameter(format!(
                "downscale factor {} outside (0, 1]",
                self.downscale_factor
            )));
        }
        if !(0.0..=1.0).contains(&self.sharpen_alpha) {
            return Err(SbiError::Parameter(format!(
                "sharpen alpha {} outside [0, 1]",
                self.sharpen_alpha
            )));
        }
        if !(self.sharpen_sigma.is_finite() && self.sharpen_sigma > 0.0) {
            return Err(SbiError::Parameter(format!(
                "sharpen sigma {} must be > 0",
                self.sharpen_sigma
            )));
        }
        Ok(())
    }
}

/// Resize factors and translation fractions plus the integer geometry they
/// induce on an `H x W` raster.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResizeTranslateParams {
    pub u_h: f64,
    pub u_w: f64,
    pub v_h: f64,
    pub v_w: f64,
    /// `round(u_h * H)`
    pub resized_height: usize,
    /// `round(u_w * W)`
    pub resized_width: usize,
    /// `round(v_h * H)`, positive moves content down.
    pub shift_y: i64,
    /// `round(v_w * W)`, positive moves content right.
    pub shift_x: i64,
}

impl ResizeTranslateParams {
    /// Derives the integer geometry for an `height x width` raster.
    /// Rounding is half away from zero.
    pub fn derive(u_h: f64, u_w: f64, v_h: f64, v_w: f64, height: usize, width: usize) -> Result<Self> {
        if ![u_h, u_w, v_h, v_w].iter().all(|v| v.is_finite()) {
            return Err(SbiError::Parameter("resize/translate parameters must be finite".into()));
        }
        let rh = round_half_away(u_h * height as f64);
        let rw = round_half_away(u_w * width as f64);
        if rh < 1 || rw < 1 {
            return Err(SbiError::Parameter(format!(
                "resized dimensions {rh}x{rw} must be at least 1x1"
            )));
        }
        Ok(ResizeTranslateParams {
            u_h,
            u_w,
            v_h,
            v_w,
            resized_height: rh as usize,
            resized_width: rw as usize,
            shift_y: round_half_away(v_h * height as f64),
            shift_x: round_half_away(v_w * width as f64),
        })
    }

    pub fn identity(height: usize, width: usize) -> Self {
        Self::derive(1.0, 1.0, 0.0, 0.0, height, width).expect("identity geometry is valid")
    }

    /// Checks that the derived fields follow from the factors for this raster size.
    pub fn check_consistent(&self, height: usize, width: usize) -> Result<()> {
        let expect = Self::derive(self.u_h, self.u_w, self.v_h, self.v_w, height, width)?;
        if expect != *self {
            return Err(SbiError::Parameter(format!(
                "resize/translate geometry inconsistent with {height}x{width}: {self:?}"
            )));
        }
        Ok(())
    }

    pub fn sample(stream: &mut RngStream, cfg: &StgConfig, height: usize, width: usize) -> Result<Self> {
        let u_h = cfg.scale.sample(stream)?;
        let u_w = cfg.scale.sample(stream)?;
        let v_h = cfg.translate.sample(stream)?;
        let v_w = cfg.translate.sample(stream)?;
        Self::derive(u_h, u_w, v_h, v_w, height, width)
    }
}

/// Applies RGB shift, then HSV hue/saturation/value, then brightness/contrast.
/// Every stage clamps to `[0, 1]`; stages at their identity are skipped.
pub fn color_transform(img: &ImageTensor, params: &ColorParams) -> Result<ImageTensor> {
    params.validate()?;
    if params.is_identity() {
        return Ok(img.clone());
    }
    let (h, w) = img.dims();
    let mut data = img.data().to_vec();

    if params.rgb_shift != [0.0; 3] {
        for px in data.chunks_exact_mut(3) {
            for (v, s) in px.iter_mut().zip(params.rgb_shift) {
                *v = (*v + s).clamp(0.0, 1.0);
            }
        }
    }

    if params.hue_shift_deg != 0.0 || params.saturation_scale != 1.0 || params.value_scale != 1.0 {
        for px in data.chunks_exact_mut(3) {
            let (hue, s, v) = rgb_to_hsv(px[0], px[1], px[2]);
            let hue = (hue + params.hue_shift_deg).rem_euclid(360.0);
            let s = (s * params.saturation_scale).clamp(0.0, 1.0);
            let v = (v * params.value_scale).clamp(0.0, 1.0);
            let (r, g, b) = hsv_to_rgb(hue, s, v);
            px[0] = r.clamp(0.0, 1.0);
            px[1] = g.clamp(0.0, 1.0);
            px[2] = b.clamp(0.0, 1.0);
        }
    }

    if params.brightness_shift != 0.0 || params.contrast_scale != 1.0 {
        for v in &mut data {
            *v = ((*v - 0.5) * params.contrast_scale + 0.5 + params.brightness_shift).clamp(0.0, 1.0);
        }
    }

    Ok(ImageTensor::from_clamped(h, w, data))
}

/// Hue in degrees `[0, 360)`, saturation and value in `[0, 1]`.
pub fn rgb_to_hsv(r: f64, g: f64, b: f64) -> (f64, f64, f64) {
    let max = r.max(g).max(b);
    let min = r.min(g).min(b);
    let delta = max - min;
    let hue = if delta == 0.0 {
        0.0
    } else if max == r {
        60.0 * ((g - b) / delta).rem_euclid(6.0)
    } else if max == g {
        60.0 * ((b - r) / delta + 2.0)
    } else {
        60.0 * ((r - g) / delta + 4.0)
    };
    let sat = if max == 0.0 { 0.0 } else { delta / max };
    (hue, sat, max)
}

pub fn hsv_to_rgb(hue: f64, s: f64, v: f64) -> (f64, f64, f64) {
    if s == 0.0 {
        return (v, v, v);
    }
    let c = v * s;
    let hp = hue.rem_euclid(360.0) / 60.0;
    let x = c * (1.0 - (hp.rem_euclid(2.0) - 1.0).abs());
    let (r, g, b) = match hp as u32 {
        0 => (c, x, 0.0),
        1 => (x, c, 0.0),
        2 => (0.0, c, x),
        3 => (0.0, x, c),
        4 => (x, 0.0, c),
        _ => (c, 0.0, x),
    };
    let m = v - c;
    (r + m, g + m, b + m)
}

/// Downscale-and-restore (bilinear both ways) or unsharp-mask sharpening.
pub fn frequency_transform(img: &ImageTensor, params: &FrequencyParams) -> Result<ImageTensor> {
    params.validate()?;
    let (h, w) = img.dims();
    match params.mode {
        FrequencyMode::None => Ok(img.clone()),
        FrequencyMode::Downscale => {
            let nh = round_half_away(params.downscale_factor * h as f64);
            let nw = round_half_away(params.downscale_factor * w as f64);
            if nh < 1 || nw < 1 {
                return Err(SbiError::Parameter(format!(
                    "downscale factor {} shrinks {h}x{w} below one pixel",
                    params.downscale_factor
                )));
            }
            let (nh, nw) = (nh as usize, nw as usize);
            if (nh, nw) == (h, w) {
                return Ok(img.clone());
            }
            let small = raster::resize_bilinear(img.data(), h, w, 3, nh, nw);
            let mut back = raster::resize_bilinear(&small, nh, nw, 3, h, w);
            back.iter_mut().for_each(|v| *v = v.clamp(0.0, 1.0));
            Ok(ImageTensor::from_clamped(h, w, back))
        }
        FrequencyMode::Sharpen => {
            if params.sharpen_alpha == 0.0 {
                return Ok(img.clone());
            }
            let kernel = raster::kernel_for_sigma(params.sharpen_sigma);
            let blurred = raster::separable_blur(img.data(), h, w, 3, &kernel);
            let data = img
                .data()
                .iter()
                .zip(&blurred)
                .map(|(&v, &b)| (v + params.sharpen_alpha * (v - b)).clamp(0.0, 1.0))
                .collect();
            Ok(ImageTensor::from_clamped(h, w, data))
        }
    }
}

/// Resize, centre (zero-pad or centre-crop), then shift with zero fill, on an
/// `h x w x c` plane. Shared by the source image and the blend mask.
pub(crate) fn resize_translate_plane(
    data: &[f64],
    h: usize,
    w: usize,
    c: usize,
    p: &ResizeTranslateParams,
) -> Vec<f64> {
    let (rh, rw) = (p.resized_height, p.resized_width);
    let resized = raster::resize_bilinear(data, h, w, c, rh, rw);

    // Offset of the resized content inside the h x w frame. Padding puts the
    // odd pixel on the bottom/right; cropping trims it from the bottom/right.
    let offset = |n: usize, rn: usize| -> i64 {
        if n >= rn {
            ((n - rn) / 2) as i64
        } else {
            -(((rn - n) / 2) as i64)
        }
    };
    let (oy, ox) = (offset(h, rh), offset(w, rw));

    let centred_at = |y: i64, x: i64, ch: usize| -> f64 {
        let (sy, sx) = (y - oy, x - ox);
        if sy < 0 || sx < 0 || sy >= rh as i64 || sx >= rw as i64 {
            0.0
        } else {
            resized[(sy as usize * rw + sx as usize) * c + ch]
        }
    };

    let mut out = vec![0.0; h * w * c];
    for y in 0..h as i64 {
        let cy = y - p.shift_y;
        if cy < 0 || cy >= h as i64 {
            continue;
        }
        for x in 0..w as i64 {
            let cx = x - p.shift_x;
            if cx < 0 || cx >= w as i64 {
                continue;
            }
            for ch in 0..c {
                out[(y as usize * w + x as usize) * c + ch] = centred_at(cy, cx, ch);
            }
        }
    }
    out
}

/// Applies recorded resize/translate geometry to an image.
pub fn resize_translate(img: &ImageTensor, params: &ResizeTranslateParams) -> Result<ImageTensor> {
    let (h, w) = img.dims();
    params.check_consistent(h, w)?;
    let mut out = resize_translate_plane(img.data(), h, w, 3, params);
    out.iter_mut().for_each(|v| *v = v.clamp(0.0, 1.0));
    Ok(ImageTensor::from_clamped(h, w, out))
}

/// Samples geometry from `stream` and applies it, returning the parameters
/// so the mask can follow the same map.
pub fn random_resize_translate(
    img: &ImageTensor,
    stream: &mut RngStream,
    cfg: &StgConfig,
) -> Result<(ImageTensor, ResizeTranslateParams)> {
    let (h, w) = img.dims();
    let params = ResizeTranslateParams::sample(stream, cfg, h, w)?;
    Ok((resize_translate(img, &params)?, params))
}

/// Number of independently gated sub-transforms: RGB shift, hue, saturation,
/// value, brightness/contrast, frequency.
pub const GATE_COUNT: usize = 6;

/// Raw draws of one augmentation: gate outcomes plus every sampled magnitude,
/// before gating is applied.
#[derive(Debug, Clone, PartialEq)]
pub struct TransformDraw {
    pub gates: [bool; GATE_COUNT],
    pub color: ColorParams,
    pub frequency: FrequencyParams,
}

impl TransformDraw {
    /// Parameters with un-gated sub-transforms replaced by their identity.
    pub fn effective(&self) -> (ColorParams, FrequencyParams) {
        let g = self.gates;
        let raw = &self.color;
        let color = ColorParams {
            rgb_shift: if g[0] { raw.rgb_shift } else { [0.0; 3] },
            hue_shift_deg: if g[1] { raw.hue_shift_deg } else { 0.0 },
            saturation_scale: if g[2] { raw.saturation_scale } else { 1.0 },
            value_scale: if g[3] { raw.value_scale } else { 1.0 },
            brightness_shift: if g[4] { raw.brightness_shift } else { 0.0 },
            contrast_scale: if g[4] { raw.contrast_scale } else { 1.0 },
        };
        let frequency = if g[5] { self.frequency } else { FrequencyParams::NONE };
        (color, frequency)
    }
}

/// Draws gates and magnitudes for one application of the augmentation `T`.
/// Each gate fires with `cfg.apply_probability`; if none fires, one is forced.
pub fn sample_transform(stream: &RngStream, cfg: &StgConfig) -> Result<TransformDraw> {
    let mut cs = stream.child(tags::COLOR);
    let mut gates = [false; GATE_COUNT];
    for g in &mut gates {
        *g = cs.next_unit() < cfg.apply_probability;
    }
    if !gates.iter().any(|&g| g) {
        gates[cs.draw_index(GATE_COUNT)] = true;
    }
    let color = ColorParams {
        rgb_shift: [
            cfg.rgb_shift.sample(&mut cs)?,
            cfg.rgb_shift.sample(&mut cs)?,
            cfg.rgb_shift.sample(&mut cs)?,
        ],
        hue_shift_deg: cfg.hue_shift_deg.sample(&mut cs)?,
        saturation_scale: cfg.saturation_scale.sample(&mut cs)?,
        value_scale: cfg.value_scale.sample(&mut cs)?,
        brightness_shift: cfg.brightness_shift.sample(&mut cs)?,
        contrast_scale: cfg.contrast_scale.sample(&mut cs)?,
    };

    let mut fs = stream.child(tags::FREQUENCY);
    let mode = if fs.next_unit() < 0.5 {
        FrequencyMode::Downscale
    } else {
        FrequencyMode::Sharpen
    };
    let downscale_factor = cfg.downscale_factor.sample(&mut fs)?;
    let sharpen_alpha = cfg.sharpen_alpha.sample(&mut fs)?;
    let frequency = match mode {
        FrequencyMode::Downscale => FrequencyParams {
            mode,
            downscale_factor,
            ..FrequencyParams::NONE
        },
        _ => FrequencyParams {
            mode,
            sharpen_alpha,
            sharpen_sigma: cfg.sharpen_sigma,
            ..FrequencyParams::NONE
        },
    };
    Ok(TransformDraw {
        gates,
        color,
        frequency,
    })
}

/// Everything the source-target split sampled, in execution order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StgRecord {
    /// Outcome of the coin: `true` means the source carries the augmentation.
    pub source_is_augmented: bool,
    pub color: ColorParams,
    pub frequency: FrequencyParams,
}

impl StgRecord {
    pub fn sample(stream: &RngStream, cfg: &StgConfig) -> Result<Self> {
        let source_is_augmented = stream.child(tags::COIN).next_unit() < 0.5;
        let (color, frequency) = sample_transform(stream, cfg)?.effective();
        Ok(StgRecord {
            source_is_augmented,
            color,
            frequency,
        })
    }

    pub fn validate(&self) -> Result<()> {
        self.color.validate()?;
        self.frequency.validate()
    }

    /// `T(img)`: colour then frequency.
    pub fn augment(&self, img: &ImageTensor) -> Result<ImageTensor> {
        let colored = color_transform(img, &self.color)?;
        frequency_transform(&colored, &self.frequency)
    }

    /// Returns `(source, target)`; exactly one of them is `T(img)`.
    pub fn apply(&self, img: &ImageTensor) -> Result<(ImageTensor, ImageTensor)> {
        let augmented = self.augment(img)?;
        Ok(if self.source_is_augmented {
            (augmented, img.clone())
        } else {
            (img.clone(), augmented)
        })
    }
}

/// Coin flip plus `T`, returning `(source, target, record)`.
pub fn augment_source_target(
    img: &ImageTensor,
    stream: &RngStream,
    cfg: &StgConfig,
) -> Result<(ImageTensor, ImageTensor, StgRecord)> {
    let record = StgRecord::sample(stream, cfg)?;
    let (source, target) = record.apply(img)?;
    Ok((source, target, record))
}
