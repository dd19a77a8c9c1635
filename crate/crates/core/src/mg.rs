//! Mask generator: landmark hull, landmark jitter, elastic warp, two-stage
//! Gaussian smoothing with re-binarisation, and blend-ratio scaling.

use serde::{Deserialize, Serialize};

use crate::config::MaskConfig;
use crate::error::{Result, SbiError};
use crate::raster::{self, round_half_away};
use crate::rng::{tags, RngStream};
use crate::stg::{resize_translate_plane, ResizeTranslateParams};
use crate::tensor::{BlendMask, Landmarks, Point};

/// Threshold slack after the first blur: values below `1 - 1/255` become 0.
pub const THRESHOLD_EPS: f64 = 1.0 / 255.0;

#[inline]
fn cross(o: Point, a: Point, b: Point) -> f64 {
    (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x)
}

/// Convex hull in counter-clockwise order (monotone chain), collinear points dropped.
pub fn convex_hull(points: &[Point]) -> Result<Vec<Point>> {
    if points.len() < 3 {
        return Err(SbiError::DegenerateHull(format!(
            "need at least 3 landmarks, got {}",
            points.len()
        )));
    }
    let mut pts = points.to_vec();
    pts.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)));
    pts.dedup();

    let mut hull: Vec<Point> = Vec::with_capacity(pts.len() + 1);
    for &p in &pts {
        while hull.len() >= 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0 {
            hull.pop();
        }
        hull.push(p);
    }
    let lower_len = hull.len() + 1;
    for &p in pts.iter().rev().skip(1) {
        while hull.len() >= lower_len && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0 {
            hull.pop();
        }
        hull.push(p);
    }
    hull.pop();

    if hull.len() < 3 {
        return Err(SbiError::DegenerateHull(format!(
            "{} landmarks are collinear or coincident",
            points.len()
        )));
    }
    Ok(hull)
}

/// Binary mask of pixel centres `(col, row)` inside or on the landmark hull.
/// The hull may extend past the raster; only in-raster pixels are filled.
pub fn convex_hull_mask(landmarks: &Landmarks, height: usize, width: usize) -> Result<BlendMask> {
    let hull = convex_hull(landmarks.points())?;
    let mut data = vec![0.0; height * width];

    let (min_x, min_y, max_x, max_y) = hull.iter().fold(
        (f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY),
        |(a, b, c, d), p| (a.min(p.x), b.min(p.y), c.max(p.x), d.max(p.y)),
    );
    let clip = |v: f64, n: usize| v.clamp(0.0, n as f64 - 1.0) as usize;
    if max_x < 0.0 || max_y < 0.0 || min_x > (width - 1) as f64 || min_y > (height - 1) as f64 {
        return Ok(BlendMask::from_clamped(height, width, data, 1.0));
    }
    let (x0, x1) = (clip(min_x.ceil(), width), clip(max_x.floor(), width));
    let (y0, y1) = (clip(min_y.ceil(), height), clip(max_y.floor(), height));

    let edges: Vec<(Point, Point)> = (0..hull.len())
        .map(|i| (hull[i], hull[(i + 1) % hull.len()]))
        .collect();
    for y in y0..=y1 {
        for x in x0..=x1 {
            let p = Point::new(x as f64, y as f64);
            if edges.iter().all(|&(a, b)| cross(a, b, p) >= 0.0) {
                data[y * width + x] = 1.0;
            }
        }
    }
    Ok(BlendMask::from_clamped(height, width, data, 1.0))
}

/// Per-point offsets drawn uniformly from `[-jitter * D, jitter * D]` on each
/// axis, `D` being the diagonal of the landmark bounding box.
pub fn sample_landmark_offsets(
    landmarks: &Landmarks,
    stream: &mut RngStream,
    jitter: f64,
) -> Result<Vec<[f64; 2]>> {
    if !(jitter.is_finite() && jitter >= 0.0) {
        return Err(SbiError::Parameter(format!("landmark jitter {jitter} must be >= 0")));
    }
    let bound = match landmarks.bounds() {
        Some((x0, y0, x1, y1)) => jitter * (x1 - x0).hypot(y1 - y0),
        None => 0.0,
    };
    landmarks
        .points()
        .iter()
        .map(|_| Ok([stream.draw_uniform(-bound, bound)?, stream.draw_uniform(-bound, bound)?]))
        .collect()
}

pub fn apply_landmark_offsets(landmarks: &Landmarks, offsets: &[[f64; 2]]) -> Result<Landmarks> {
    if offsets.len() != landmarks.len() {
        return Err(SbiError::Parameter(format!(
            "expected {} landmark offsets, got {}",
            landmarks.len(),
            offsets.len()
        )));
    }
    Landmarks::new(
        landmarks
            .points()
            .iter()
            .zip(offsets)
            .map(|(p, [dx, dy])| Point::new(p.x + dx, p.y + dy))
            .collect(),
    )
}

/// Stand-in for the landmark transformation: independent uniform jitter per point.
pub fn landmark_deform(landmarks: &Landmarks, stream: &mut RngStream, jitter: f64) -> Result<Landmarks> {
    let offsets = sample_landmark_offsets(landmarks, stream, jitter)?;
    apply_landmark_offsets(landmarks, &offsets)
}

/// Smooth random displacement field `(dx, dy)`.
///
/// Per-pixel draws from `U(-1, 1)` are Gaussian-smoothed with `sigma`, then
/// each component is rescaled so its largest magnitude equals `alpha` pixels.
pub fn displacement_field(
    height: usize,
    width: usize,
    stream: &mut RngStream,
    alpha: f64,
    sigma: f64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    if !(alpha.is_finite() && alpha >= 0.0) {
        return Err(SbiError::Parameter(format!("elastic alpha {alpha} must be >= 0")));
    }
    if !(sigma.is_finite() && sigma > 0.0) {
        return Err(SbiError::Parameter(format!("elastic sigma {sigma} must be > 0")));
    }
    let n = height * width;
    let mut raw = |_: usize| -> Result<f64> { stream.draw_uniform(-1.0, 1.0) };
    let dx: Vec<f64> = (0..n).map(&mut raw).collect::<Result<_>>()?;
    let dy: Vec<f64> = (0..n).map(&mut raw).collect::<Result<_>>()?;
    let kernel = raster::kernel_for_sigma(sigma);
    let scale = |field: Vec<f64>| -> Vec<f64> {
        let smooth = raster::separable_blur(&field, height, width, 1, &kernel);
        let peak = smooth.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if peak == 0.0 {
            return vec![0.0; n];
        }
        smooth.into_iter().map(|v| alpha * v / peak).collect()
    };
    Ok((scale(dx), scale(dy)))
}

/// Resamples `mask` at `(x + dx, y + dy)` with bilinear interpolation and a zero border.
pub fn warp_mask(mask: &BlendMask, dx: &[f64], dy: &[f64]) -> Result<BlendMask> {
    let (h, w) = mask.dims();
    if dx.len() != h * w || dy.len() != h * w {
        return Err(SbiError::Parameter(format!(
            "displacement field length {}/{} does not match {h}x{w}",
            dx.len(),
            dy.len()
        )));
    }
    let mut out = Vec::with_capacity(h * w);
    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            let v = raster::sample_zero_border(mask.data(), h, w, x as f64 + dx[i], y as f64 + dy[i]);
            out.push(v.clamp(0.0, 1.0));
        }
    }
    Ok(BlendMask::from_clamped(h, w, out, mask.ratio()))
}

pub fn elastic_deform(mask: &BlendMask, stream: &mut RngStream, alpha: f64, sigma: f64) -> Result<BlendMask> {
    if alpha == 0.0 {
        return Ok(mask.clone());
    }
    let (dx, dy) = displacement_field(mask.height(), mask.width(), stream, alpha, sigma)?;
    warp_mask(mask, &dx, &dy)
}

fn check_kernel(k: usize, name: &str) -> Result<()> {
    if k == 0 || k.is_multiple_of(2) {
        return Err(SbiError::Parameter(format!("{name} = {k} must be odd and >= 1")));
    }
    Ok(())
}

/// Blur with kernel size `k1`, re-binarise (values below `1 - 1/255` drop to
/// 0, the rest become 1), blur with `k2`, then rescale so the peak is 1.
///
/// The threshold erodes the support by roughly the `k1` radius and the second
/// blur grows it back by the `k2` radius: net erosion for `k1 > k2`, net
/// dilation for `k2 > k1`. If nothing survives the threshold the result is all zero.
pub fn dual_gaussian_smooth(mask: &BlendMask, k1: usize, k2: usize) -> Result<BlendMask> {
    check_kernel(k1, "k1")?;
    check_kernel(k2, "k2")?;
    if !mask.is_binary() {
        return Err(SbiError::Precondition(
            "dual Gaussian smoothing expects a binary mask".into(),
        ));
    }
    let (h, w) = mask.dims();
    let first = raster::separable_blur(mask.data(), h, w, 1, &raster::kernel_for_size(k1));
    let binary: Vec<f64> = first
        .into_iter()
        .map(|v| if v < 1.0 - THRESHOLD_EPS { 0.0 } else { 1.0 })
        .collect();
    let second = raster::separable_blur(&binary, h, w, 1, &raster::kernel_for_size(k2));
    let peak = second.iter().copied().fold(0.0, f64::max);
    let out = if peak > 0.0 {
        second.into_iter().map(|v| (v / peak).clamp(0.0, 1.0)).collect()
    } else {
        vec![0.0; h * w]
    };
    Ok(BlendMask::from_clamped(h, w, out, mask.ratio()))
}

/// Multiplies every value by `ratio` and records it.
pub fn scale_mask(mask: &BlendMask, ratio: f64) -> Result<BlendMask> {
    if !(ratio > 0.0 && ratio <= 1.0) {
        return Err(SbiError::Parameter(format!("blend ratio {ratio} outside (0, 1]")));
    }
    let data = mask.data().iter().map(|v| v * ratio).collect();
    Ok(BlendMask::from_clamped(mask.height(), mask.width(), data, ratio))
}

pub fn apply_blend_ratio(mask: &BlendMask, stream: &mut RngStream, choices: &[f64]) -> Result<BlendMask> {
    let r = stream.draw_choice(choices)?;
    scale_mask(mask, r)
}

/// Nearest odd integer to `x`, at least 1.
pub fn nearest_odd(x: f64) -> usize {
    let m = round_half_away((x - 1.0) / 2.0);
    (2 * m + 1).max(1) as usize
}

/// Every value the mask generator sampled, in execution order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaskParams {
    pub landmark_offsets: Vec<[f64; 2]>,
    pub elastic_alpha: f64,
    pub elastic_sigma: f64,
    /// Stream id of the displacement-field stream (same seed as the sample).
    pub elastic_field_stream: u64,
    pub k1: usize,
    pub k2: usize,
    pub ratio: f64,
}

impl MaskParams {
    /// Identity stages with `r = 1`; reproduces the raw hull mask.
    pub fn identity(landmark_count: usize) -> Self {
        MaskParams {
            landmark_offsets: vec![[0.0, 0.0]; landmark_count],
            elastic_alpha: 0.0,
            elastic_sigma: 1.0,
            elastic_field_stream: 0,
            k1: 1,
            k2: 1,
            ratio: 1.0,
        }
    }

    pub fn sample(landmarks: &Landmarks, stream: &RngStream, cfg: &MaskConfig) -> Result<Self> {
        let landmark_offsets =
            sample_landmark_offsets(landmarks, &mut stream.child(tags::LANDMARKS), cfg.landmark_jitter)?;
        let deformed = apply_landmark_offsets(landmarks, &landmark_offsets)?;

        let mut es = stream.child(tags::ELASTIC);
        let elastic_alpha = cfg.elastic_alpha.sample(&mut es)?;
        let elastic_sigma = cfg.elastic_sigma.sample(&mut es)?;
        let elastic_field_stream = stream.child(tags::ELASTIC_FIELD).stream_id();

        let side = deformed
            .bounds()
            .map(|(x0, y0, x1, y1)| (x1 - x0).max(y1 - y0))
            .unwrap_or(0.0);
        let mut ks = stream.child(tags::KERNELS);
        let k1 = nearest_odd(cfg.kernel_fraction.sample(&mut ks)? * side);
        let k2 = nearest_odd(cfg.kernel_fraction.sample(&mut ks)? * side);

        let ratio = stream.child(tags::RATIO).draw_choice(&cfg.ratio_choices)?;
        Ok(MaskParams {
            landmark_offsets,
            elastic_alpha,
            elastic_sigma,
            elastic_field_stream,
            k1,
            k2,
            ratio,
        })
    }

    pub fn validate(&self, landmark_count: usize) -> Result<()> {
        if self.landmark_offsets.len() != landmark_count {
            return Err(SbiError::Parameter(format!(
                "expected {landmark_count} landmark offsets, got {}",
                self.landmark_offsets.len()
            )));
        }
        if self.landmark_offsets.iter().flatten().any(|v| !v.is_finite()) {
            return Err(SbiError::Parameter("landmark offsets must be finite".into()));
        }
        if !(self.elastic_alpha.is_finite() && self.elastic_alpha >= 0.0) {
            return Err(SbiError::Parameter(format!("elastic alpha {} must be >= 0", self.elastic_alpha)));
        }
        if !(self.elastic_sigma.is_finite() && self.elastic_sigma > 0.0) {
            return Err(SbiError::Parameter(format!("elastic sigma {} must be > 0", self.elastic_sigma)));
        }
        check_kernel(self.k1, "k1")?;
        check_kernel(self.k2, "k2")?;
        if !(self.ratio > 0.0 && self.ratio <= 1.0) {
            return Err(SbiError::Parameter(format!("blend ratio {} outside (0, 1]", self.ratio)));
        }
        Ok(())
    }
}

/// Deterministically renders the mask from recorded parameters.
///
/// Order: jitter landmarks, rasterise hull, apply the source's resize/translate,
/// elastic warp, re-binarise at 0.5, dual Gaussian smoothing, ratio.
pub fn render_mask(
    landmarks: &Landmarks,
    height: usize,
    width: usize,
    rt: &ResizeTranslateParams,
    params: &MaskParams,
    seed: u64,
) -> Result<BlendMask> {
    params.validate(landmarks.len())?;
    let deformed = apply_landmark_offsets(landmarks, &params.landmark_offsets)?;
    let hull = convex_hull_mask(&deformed, height, width)?;

    rt.check_consistent(height, width)?;
    let moved: Vec<f64> = resize_translate_plane(hull.data(), height, width, 1, rt)
        .into_iter()
        .map(|v| v.clamp(0.0, 1.0))
        .collect();
    let moved = BlendMask::from_clamped(height, width, moved, 1.0);

    let mut field = RngStream::new(seed, params.elastic_field_stream);
    let warped = elastic_deform(&moved, &mut field, params.elastic_alpha, params.elastic_sigma)?;

    let binary: Vec<f64> = warped
        .data()
        .iter()
        .map(|&v| if v >= 0.5 { 1.0 } else { 0.0 })
        .collect();
    let binary = BlendMask::from_clamped(height, width, binary, 1.0);

    let smooth = dual_gaussian_smooth(&binary, params.k1, params.k2)?;
    if smooth.max_value() == 0.0 {
        return Err(SbiError::EmptyMask(format!(
            "mask vanished after deformation and smoothing (k1 = {}, k2 = {})",
            params.k1, params.k2
        )));
    }
    scale_mask(&smooth, params.ratio)
}

/// Samples mask parameters from `stream` and renders the mask.
pub fn generate_mask(
    landmarks: &Landmarks,
    height: usize,
    width: usize,
    cfg: &MaskConfig,
    rt: &ResizeTranslateParams,
    stream: &RngStream,
) -> Result<(BlendMask, MaskParams)> {
    // Fail on a degenerate hull before sampling anything else.
    convex_hull(landmarks.points())?;
    let params = MaskParams::sample(landmarks, stream, cfg)?;
    let mask = render_mask(landmarks, height, width, rt, &params, stream.seed())?;
    Ok((mask, params))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn disk(h: usize, w: usize, cy: f64, cx: f64, r: f64) -> BlendMask {
        BlendMask::from_fn(h, w, |y, x| {
            let d = ((y as f64 - cy).powi(2) + (x as f64 - cx).powi(2)).sqrt();
            if d <= r {
                1.0
            } else {
                0.0
            }
        })
        .unwrap()
    }

    fn is_subset(a: &BlendMask, b: &BlendMask) -> bool {
        a.data().iter().zip(b.data()).all(|(&x, &y)| x == 0.0 || y > 0.0)
    }

    #[test]
    fn rectangle_hull_fills_rectangle() {
        let l = Landmarks::from_pairs(&[[1.0, 2.0], [5.0, 2.0], [5.0, 4.0], [1.0, 4.0]]).unwrap();
        let m = convex_hull_mask(&l, 7, 8).unwrap();
        for y in 0..7 {
            for x in 0..8 {
                let inside = (1..=5).contains(&x) && (2..=4).contains(&y);
                assert_eq!(m.get(y, x), if inside { 1.0 } else { 0.0 });
            }
        }
    }

    #[test]
    fn triangle_hull_matches_half_plane() {
        let l = Landmarks::from_pairs(&[[0.0, 0.0], [4.0, 0.0], [0.0, 4.0]]).unwrap();
        let m = convex_hull_mask(&l, 6, 6).unwrap();
        for y in 0..6 {
            for x in 0..6 {
                assert_eq!(m.get(y, x), if x + y <= 4 { 1.0 } else { 0.0 }, "({x},{y})");
            }
        }
    }

    #[test]
    fn degenerate_hulls() {
        let two = Landmarks::from_pairs(&[[0.0, 0.0], [1.0, 1.0]]).unwrap();
        assert!(matches!(convex_hull_mask(&two, 4, 4), Err(SbiError::DegenerateHull(_))));
        let line = Landmarks::from_pairs(&[[0.0, 0.0], [1.0, 1.0], [2.0, 2.0], [3.0, 3.0]]).unwrap();
        assert!(matches!(convex_hull_mask(&line, 4, 4), Err(SbiError::DegenerateHull(_))));
        let same = Landmarks::from_pairs(&[[1.0, 1.0]; 5]).unwrap();
        assert!(matches!(convex_hull_mask(&same, 4, 4), Err(SbiError::DegenerateHull(_))));
    }

    #[test]
    fn hull_outside_raster_is_clipped() {
        let l = Landmarks::from_pairs(&[[-10.0, -10.0], [20.0, -10.0], [-10.0, 20.0]]).unwrap();
        let m = convex_hull_mask(&l, 4, 4).unwrap();
        assert_eq!(m.dims(), (4, 4));
        assert!(m.data().iter().all(|&v| v == 1.0));
        let far = Landmarks::from_pairs(&[[100.0, 100.0], [110.0, 100.0], [100.0, 110.0]]).unwrap();
        assert_eq!(convex_hull_mask(&far, 4, 4).unwrap().support_area(), 0);
    }

    #[test]
    fn zero_jitter_is_identity() {
        let l = Landmarks::from_pairs(&[[1.5, 2.0], [5.0, 2.25], [3.0, 7.0]]).unwrap();
        let mut s = RngStream::new(1, 1);
        assert_eq!(landmark_deform(&l, &mut s, 0.0).unwrap(), l);
    }

    #[test]
    fn jitter_bounded_and_replayable() {
        let l = Landmarks::from_pairs(&[[0.0, 0.0], [30.0, 0.0], [0.0, 40.0], [12.0, 9.0]]).unwrap();
        let d = 50.0;
        let a = landmark_deform(&l, &mut RngStream::new(3, 4), 0.05).unwrap();
        let b = landmark_deform(&l, &mut RngStream::new(3, 4), 0.05).unwrap();
        assert_eq!(a, b);
        for (p, q) in l.points().iter().zip(a.points()) {
            assert!((p.x - q.x).abs() <= 0.05 * d && (p.y - q.y).abs() <= 0.05 * d);
        }
        assert_eq!(a.len(), l.len());
    }

    #[test]
    fn zero_alpha_elastic_is_identity() {
        let m = disk(16, 16, 8.0, 8.0, 5.0);
        assert_eq!(elastic_deform(&m, &mut RngStream::new(0, 0), 0.0, 4.0).unwrap(), m);
    }

    #[test]
    fn unit_shift_field_moves_one_column() {
        let m = BlendMask::from_fn(5, 6, |y, x| ((y * 6 + x) % 7) as f64 / 6.0).unwrap();
        let dx = vec![1.0; 30];
        let dy = vec![0.0; 30];
        let out = warp_mask(&m, &dx, &dy).unwrap();
        for y in 0..5 {
            for x in 0..6 {
                let expect = if x == 5 { 0.0 } else { m.get(y, x + 1) };
                assert_eq!(out.get(y, x), expect);
            }
        }
    }

    #[test]
    fn displacement_peak_equals_alpha() {
        let (dx, dy) = displacement_field(24, 20, &mut RngStream::new(9, 9), 3.0, 4.0).unwrap();
        let peak = |f: &[f64]| f.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!((peak(&dx) - 3.0).abs() < 1e-12);
        assert!((peak(&dy) - 3.0).abs() < 1e-12);
    }

    #[test]
    fn unit_kernels_are_identity() {
        let m = disk(20, 20, 10.0, 10.0, 6.0);
        assert_eq!(dual_gaussian_smooth(&m, 1, 1).unwrap(), m);
    }

    #[test]
    fn dual_smooth_rejects_bad_input() {
        let m = BlendMask::filled(4, 4, 0.5).unwrap();
        assert!(matches!(dual_gaussian_smooth(&m, 3, 3), Err(SbiError::Precondition(_))));
        let m = BlendMask::filled(4, 4, 1.0).unwrap();
        assert!(matches!(dual_gaussian_smooth(&m, 4, 3), Err(SbiError::Parameter(_))));
        assert!(matches!(dual_gaussian_smooth(&m, 3, 0), Err(SbiError::Parameter(_))));
    }

    #[test]
    fn large_first_kernel_erodes() {
        let m = disk(64, 64, 32.0, 32.0, 20.0);
        let out = dual_gaussian_smooth(&m, 15, 1).unwrap();
        assert!(is_subset(&out, &m));
        assert!(out.support_area() < m.support_area());
    }

    #[test]
    fn large_second_kernel_dilates() {
        let m = disk(64, 64, 32.0, 32.0, 20.0);
        let out = dual_gaussian_smooth(&m, 1, 15).unwrap();
        assert!(is_subset(&m, &out));
        assert!(out.support_area() > m.support_area());
    }

    #[test]
    fn support_monotone_in_kernel_sizes() {
        let m = disk(64, 64, 32.0, 32.0, 20.0);
        let sizes = [1, 3, 5, 7, 9, 11, 13, 15];
        let area = |k1, k2| dual_gaussian_smooth(&m, k1, k2).unwrap().support_area();
        for k2 in [1, 5, 9] {
            let areas: Vec<usize> = sizes.iter().map(|&k1| area(k1, k2)).collect();
            assert!(areas.windows(2).all(|w| w[1] <= w[0]), "k2={k2}: {areas:?}");
        }
        for k1 in [1, 5, 9] {
            let areas: Vec<usize> = sizes.iter().map(|&k2| area(k1, k2)).collect();
            assert!(areas.windows(2).all(|w| w[1] >= w[0]), "k1={k1}: {areas:?}");
        }
    }

    #[test]
    fn ratio_scaling() {
        let m = disk(10, 10, 5.0, 5.0, 3.0);
        assert_eq!(scale_mask(&m, 1.0).unwrap().data(), m.data());
        let half = scale_mask(&m, 0.5).unwrap();
        assert_eq!(half.max_value(), 0.5);
        assert_eq!(half.ratio(), 0.5);
        assert!(scale_mask(&m, 1.5).is_err());
        let mut s = RngStream::new(0, 0);
        assert_eq!(apply_blend_ratio(&m, &mut s, &[1.0]).unwrap().data(), m.data());
        assert!(apply_blend_ratio(&m, &mut s, &[]).is_err());
    }

    #[test]
    fn ratio_one_frequency() {
        let choices = MaskConfig::default().ratio_choices;
        let m = BlendMask::filled(1, 1, 1.0).unwrap();
        let n = 60_000u64;
        let ones = (0..n)
            .filter(|&k| {
                let mut s = RngStream::for_sample(11, k, 0).child(tags::RATIO);
                apply_blend_ratio(&m, &mut s, &choices).unwrap().ratio() == 1.0
            })
            .count();
        let p = ones as f64 / n as f64;
        assert!((p - 0.5).abs() <= 0.02, "{p}");
    }

    #[test]
    fn nearest_odd_rounding() {
        assert_eq!(nearest_odd(0.0), 1);
        assert_eq!(nearest_odd(2.9), 3);
        assert_eq!(nearest_odd(4.0), 5);
        assert_eq!(nearest_odd(5.9), 5);
        assert_eq!(nearest_odd(6.1), 7);
    }

    fn face_landmarks() -> Landmarks {
        let pts: Vec<[f64; 2]> = (0..24)
            .map(|i| {
                let t = i as f64 / 24.0 * std::f64::consts::TAU;
                [24.0 + 12.0 * t.cos(), 24.0 + 15.0 * t.sin()]
            })
            .collect();
        Landmarks::from_pairs(&pts).unwrap()
    }

    #[test]
    fn identity_stages_reproduce_raw_hull() {
        let l = face_landmarks();
        let rt = ResizeTranslateParams::identity(48, 48);
        let params = MaskParams::identity(l.len());
        let m = render_mask(&l, 48, 48, &rt, &params, 0).unwrap();
        assert_eq!(m.data(), convex_hull_mask(&l, 48, 48).unwrap().data());
        let cfg = MaskConfig::identity();
        let (g, p) = generate_mask(&l, 48, 48, &cfg, &rt, &RngStream::new(4, 4)).unwrap();
        assert_eq!(g.data(), m.data());
        assert_eq!((p.k1, p.k2, p.ratio), (1, 1, 1.0));
    }

    #[test]
    fn generated_mask_range_and_replay() {
        let l = face_landmarks();
        let cfg = MaskConfig::default();
        for k in 0..10 {
            let s = RngStream::for_sample(42, k, 0);
            let rt = ResizeTranslateParams::derive(1.03, 0.97, 0.02, -0.01, 48, 48).unwrap();
            let (m, p) = generate_mask(&l, 48, 48, &cfg, &rt, &s).unwrap();
            assert!(m.data().iter().all(|&v| (0.0..=p.ratio).contains(&v)));
            assert_eq!(m.max_value(), p.ratio);
            let (again, _) = generate_mask(&l, 48, 48, &cfg, &rt, &s).unwrap();
            assert_eq!(again, m);
            assert_eq!(render_mask(&l, 48, 48, &rt, &p, 42).unwrap(), m);
        }
    }

    #[test]
    fn oversized_first_kernel_is_empty_mask_error() {
        let l = Landmarks::from_pairs(&[[10.0, 10.0], [13.0, 10.0], [10.0, 13.0]]).unwrap();
        let rt = ResizeTranslateParams::identity(24, 24);
        let params = MaskParams {
            k1: 21,
            ..MaskParams::identity(3)
        };
        assert!(matches!(render_mask(&l, 24, 24, &rt, &params, 0), Err(SbiError::EmptyMask(_))));
    }
}
