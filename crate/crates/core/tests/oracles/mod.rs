//! Brute-force reference implementations, written independently of the
//! library code they check. Shared by the integration tests and the
//! acceptance runner.
#![allow(dead_code)]

/// `(b - a) x (p - a)`.
fn cross(a: (f64, f64), b: (f64, f64), p: (f64, f64)) -> f64 {
    (b.0 - a.0) * (p.1 - a.1) - (b.1 - a.1) * (p.0 - a.0)
}

/// Every directed pair `(a, b)` with no point strictly to its right. For
/// points in general position these are exactly the hull edges (plus
/// sub-edges along collinear boundary runs).
pub fn supporting_edges(points: &[(f64, f64)]) -> Vec<((f64, f64), (f64, f64))> {
    let mut edges = Vec::new();
    for (i, &a) in points.iter().enumerate() {
        for (j, &b) in points.iter().enumerate() {
            if i == j || a == b {
                continue;
            }
            if points.iter().all(|&p| cross(a, b, p) >= 0.0) {
                edges.push((a, b));
            }
        }
    }
    edges
}

/// Hull membership of every pixel centre `(x, y)` by half-plane tests
/// against every supporting edge. Boundary points count as inside.
pub fn half_plane_mask(points: &[(f64, f64)], h: usize, w: usize) -> Vec<f64> {
    let edges = supporting_edges(points);
    let mut out = vec![0.0; h * w];
    for y in 0..h {
        for x in 0..w {
            let p = (x as f64, y as f64);
            if !edges.is_empty() && edges.iter().all(|&(a, b)| cross(a, b, p) >= 0.0) {
                out[y * w + x] = 1.0;
            }
        }
    }
    out
}

/// OpenCV sigma rule for an odd kernel size.
pub fn sigma_for(k: usize) -> f64 {
    0.3 * ((k as f64 - 1.0) * 0.5 - 1.0) + 0.8
}

fn mirror(i: i64, n: usize) -> usize {
    let n = n as i64;
    if n == 1 {
        return 0;
    }
    let mut i = i;
    // Bounce back and forth until inside; excludes the edge sample itself.
    while i < 0 || i >= n {
        if i < 0 {
            i = -i;
        }
        if i >= n {
            i = 2 * (n - 1) - i;
        }
    }
    i as usize
}

/// Direct 2-D convolution with the full `k x k` Gaussian, reflect-101 border.
pub fn naive_gaussian_blur(data: &[f64], h: usize, w: usize, k: usize) -> Vec<f64> {
    let sigma = sigma_for(k);
    let r = (k / 2) as i64;
    let mut weights = vec![0.0; k * k];
    let mut total = 0.0;
    for dy in -r..=r {
        for dx in -r..=r {
            let v = (-((dx * dx + dy * dy) as f64) / (2.0 * sigma * sigma)).exp();
            weights[((dy + r) as usize) * k + (dx + r) as usize] = v;
            total += v;
        }
    }
    let mut out = vec![0.0; h * w];
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for dy in -r..=r {
                for dx in -r..=r {
                    let sy = mirror(y as i64 + dy, h);
                    let sx = mirror(x as i64 + dx, w);
                    acc += weights[((dy + r) as usize) * k + (dx + r) as usize] * data[sy * w + sx];
                }
            }
            out[y * w + x] = acc / total;
        }
    }
    out
}

/// Gather-loop warp: each output pixel reads `(x + dx, y + dy)` by bilinear
/// interpolation over the four surrounding pixels, zero outside the raster.
pub fn gather_warp(mask: &[f64], h: usize, w: usize, dx: &[f64], dy: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; h * w];
    for y in 0..h {
        for x in 0..w {
            let sx = x as f64 + dx[y * w + x];
            let sy = y as f64 + dy[y * w + x];
            let (fx, fy) = (sx.floor(), sy.floor());
            let mut acc = 0.0;
            for (oy, wy) in [(0.0, 1.0 - (sy - fy)), (1.0, sy - fy)] {
                for (ox, wx) in [(0.0, 1.0 - (sx - fx)), (1.0, sx - fx)] {
                    let (px, py) = (fx + ox, fy + oy);
                    if px >= 0.0 && py >= 0.0 && px < w as f64 && py < h as f64 {
                        acc += wx * wy * mask[py as usize * w + px as usize];
                    }
                }
            }
            out[y * w + x] = acc;
        }
    }
    out
}

/// `source * mask + target * (1 - mask)`, one scalar at a time.
pub fn scalar_blend(source: &[f64], target: &[f64], mask: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(source.len());
    for i in 0..source.len() {
        let m = mask[i / 3];
        out.push(source[i] * m + target[i] * (1.0 - m));
    }
    out
}

/// Bilinear resampling with half-pixel centres and edge clamping, evaluated
/// point by point.
pub fn bilinear_resample(data: &[f64], h: usize, w: usize, c: usize, nh: usize, nw: usize) -> Vec<f64> {
    let mut out = vec![0.0; nh * nw * c];
    for i in 0..nh {
        for j in 0..nw {
            let sy = ((i as f64 + 0.5) * h as f64 / nh as f64 - 0.5).max(0.0).min((h - 1) as f64);
            let sx = ((j as f64 + 0.5) * w as f64 / nw as f64 - 0.5).max(0.0).min((w - 1) as f64);
            let (y0, x0) = (sy.floor() as usize, sx.floor() as usize);
            let (y1, x1) = ((y0 + 1).min(h - 1), (x0 + 1).min(w - 1));
            let (ty, tx) = (sy - y0 as f64, sx - x0 as f64);
            for ch in 0..c {
                let at = |y: usize, x: usize| data[(y * w + x) * c + ch];
                out[(i * nw + j) * c + ch] = (1.0 - ty) * (1.0 - tx) * at(y0, x0)
                    + (1.0 - ty) * tx * at(y0, x1)
                    + ty * (1.0 - tx) * at(y1, x0)
                    + ty * tx * at(y1, x1);
            }
        }
    }
    out
}

/// AUC by counting every (positive, negative) pair; ties count one half.
pub fn pair_counting_auc(labels: &[bool], scores: &[f64]) -> f64 {
    let (mut wins, mut pairs) = (0.0, 0.0);
    for (i, &li) in labels.iter().enumerate() {
        if !li {
            continue;
        }
        for (j, &lj) in labels.iter().enumerate() {
            if lj {
                continue;
            }
            pairs += 1.0;
            if scores[i] > scores[j] {
                wins += 1.0;
            } else if scores[i] == scores[j] {
                wins += 0.5;
            }
        }
    }
    wins / pairs
}

/// Number of pixels with a non-zero value.
pub fn support(data: &[f64]) -> usize {
    data.iter().filter(|&&v| v > 0.0).count()
}

/// Binary disk of `radius` centred in an `n x n` raster.
pub fn disk(n: usize, radius: f64) -> Vec<f64> {
    let c = (n as f64 - 1.0) / 2.0;
    (0..n * n)
        .map(|i| {
            let (y, x) = ((i / n) as f64, (i % n) as f64);
            if (x - c).powi(2) + (y - c).powi(2) <= radius * radius {
                1.0
            } else {
                0.0
            }
        })
        .collect()
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}
