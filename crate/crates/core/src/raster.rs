//! Shared raster primitives over interleaved `f64` planes: Gaussian kernels,
//! separable convolution, bilinear resampling.

/// OpenCV-style sigma for a kernel of odd size `k`.
pub fn sigma_for_kernel_size(k: usize) -> f64 {
    0.3 * ((k as f64 - 1.0) / 2.0 - 1.0) + 0.8
}

/// Normalised Gaussian weights of odd length `size` and width `sigma`.
pub fn gaussian_kernel(size: usize, sigma: f64) -> Vec<f64> {
    debug_assert!(size % 2 == 1 && sigma > 0.0);
    let r = (size / 2) as f64;
    let denom = 2.0 * sigma * sigma;
    let raw: Vec<f64> = (0..size)
        .map(|i| {
            let d = i as f64 - r;
            (-(d * d) / denom).exp()
        })
        .collect();
    let sum: f64 = raw.iter().sum();
    raw.into_iter().map(|w| w / sum).collect()
}

/// Kernel for an odd size, with the sigma rule of [`sigma_for_kernel_size`].
pub fn kernel_for_size(k: usize) -> Vec<f64> {
    gaussian_kernel(k, sigma_for_kernel_size(k))
}

/// Kernel for a given sigma, truncated at three sigma.
pub fn kernel_for_sigma(sigma: f64) -> Vec<f64> {
    let radius = (3.0 * sigma).ceil().max(1.0) as usize;
    gaussian_kernel(2 * radius + 1, sigma)
}

/// Reflect-101 border index (`dcb|abcd|cba`), valid for any offset.
#[inline]
pub fn reflect101(i: isize, n: usize) -> usize {
    if n == 1 {
        return 0;
    }
    let period = 2 * (n as isize - 1);
    let m = i.rem_euclid(period);
    if m >= n as isize {
        (period - m) as usize
    } else {
        m as usize
    }
}

/// Separable convolution of an `h x w x c` plane with reflect-101 borders.
///
/// Each 1-D pass accumulates `v_center + sum_j w_j (v_j - v_center)`, so a
/// constant signal passes through unchanged to the last bit.
pub fn separable_blur(data: &[f64], h: usize, w: usize, c: usize, kernel: &[f64]) -> Vec<f64> {
    debug_assert_eq!(data.len(), h * w * c);
    if kernel.len() == 1 {
        return data.to_vec();
    }
    let r = (kernel.len() / 2) as isize;

    // Precompute border-resolved neighbour indices for each axis.
    let cols: Vec<Vec<usize>> = (0..w as isize)
        .map(|x| (-r..=r).map(|d| reflect101(x + d, w)).collect())
        .collect();
    let rows: Vec<Vec<usize>> = (0..h as isize)
        .map(|y| (-r..=r).map(|d| reflect101(y + d, h)).collect())
        .collect();

    let mut tmp = vec![0.0; data.len()];
    for y in 0..h {
        let row = &data[y * w * c..(y + 1) * w * c];
        let out = &mut tmp[y * w * c..(y + 1) * w * c];
        for (x, taps) in cols.iter().enumerate() {
            for ch in 0..c {
                let center = row[x * c + ch];
                let mut acc = 0.0;
                for (k, &xx) in kernel.iter().zip(taps) {
                    acc += k * (row[xx * c + ch] - center);
                }
                out[x * c + ch] = center + acc;
            }
        }
    }

    let stride = w * c;
    let mut out = vec![0.0; data.len()];
    for (y, taps) in rows.iter().enumerate() {
        for i in 0..stride {
            let center = tmp[y * stride + i];
            let mut acc = 0.0;
            for (k, &yy) in kernel.iter().zip(taps) {
                acc += k * (tmp[yy * stride + i] - center);
            }
            out[y * stride + i] = center + acc;
        }
    }
    out
}

/// Source coordinate and weights along one axis for half-pixel-centre
/// bilinear resampling from `n_in` to `n_out` samples.
fn axis_taps(n_in: usize, n_out: usize) -> Vec<(usize, usize, f64)> {
    let scale = n_in as f64 / n_out as f64;
    (0..n_out)
        .map(|i| {
            let s = ((i as f64 + 0.5) * scale - 0.5).clamp(0.0, (n_in - 1) as f64);
            let i0 = s.floor() as usize;
            let i1 = (i0 + 1).min(n_in - 1);
            (i0, i1, s - i0 as f64)
        })
        .collect()
}

/// Bilinear resize of an `h x w x c` plane to `nh x nw` (half-pixel centres, edge clamp).
pub fn resize_bilinear(data: &[f64], h: usize, w: usize, c: usize, nh: usize, nw: usize) -> Vec<f64> {
    debug_assert_eq!(data.len(), h * w * c);
    if nh == h && nw == w {
        return data.to_vec();
    }
    let ys = axis_taps(h, nh);
    let xs = axis_taps(w, nw);
    let mut out = Vec::with_capacity(nh * nw * c);
    for &(y0, y1, fy) in &ys {
        for &(x0, x1, fx) in &xs {
            for ch in 0..c {
                let a = data[(y0 * w + x0) * c + ch];
                let b = data[(y0 * w + x1) * c + ch];
                let d = data[(y1 * w + x0) * c + ch];
                let e = data[(y1 * w + x1) * c + ch];
                let top = a * (1.0 - fx) + b * fx;
                let bottom = d * (1.0 - fx) + e * fx;
                out.push(top * (1.0 - fy) + bottom * fy);
            }
        }
    }
    out
}

/// Bilinear sample of a single-channel plane at `(sx, sy)`; taps outside are zero.
#[inline]
pub fn sample_zero_border(data: &[f64], h: usize, w: usize, sx: f64, sy: f64) -> f64 {
    let x0 = sx.floor();
    let y0 = sy.floor();
    let fx = sx - x0;
    let fy = sy - y0;
    let x0 = x0 as isize;
    let y0 = y0 as isize;
    let at = |x: isize, y: isize| -> f64 {
        if x < 0 || y < 0 || x >= w as isize || y >= h as isize {
            0.0
        } else {
            data[y as usize * w + x as usize]
        }
    };
    let top = at(x0, y0) * (1.0 - fx) + at(x0 + 1, y0) * fx;
    let bottom = at(x0, y0 + 1) * (1.0 - fx) + at(x0 + 1, y0 + 1) * fx;
    top * (1.0 - fy) + bottom * fy
}

/// Round half away from zero to an integer.
pub fn round_half_away(v: f64) -> i64 {
    v.round() as i64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reflect101_matches_opencv_convention() {
        let got: Vec<usize> = (-3..8).map(|i| reflect101(i, 5)).collect();
        assert_eq!(got, vec![3, 2, 1, 0, 1, 2, 3, 4, 3, 2, 1]);
        assert_eq!(reflect101(-7, 2), 1);
        assert_eq!(reflect101(5, 1), 0);
    }

    #[test]
    fn kernel_sigma_rule() {
        assert!((sigma_for_kernel_size(3) - 0.8).abs() < 1e-12);
        assert!((sigma_for_kernel_size(15) - 2.6).abs() < 1e-12);
        let k = kernel_for_size(5);
        assert!((k.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert_eq!(k[0], k[4]);
        assert_eq!(kernel_for_size(1), vec![1.0]);
    }

    #[test]
    fn constant_plane_is_fixed_point_of_blur() {
        let data = vec![0.37; 7 * 5 * 3];
        let out = separable_blur(&data, 7, 5, 3, &kernel_for_size(9));
        assert!(out.iter().all(|&v| v == 0.37));
    }

    #[test]
    fn same_size_resize_is_identity() {
        let data: Vec<f64> = (0..12).map(|i| i as f64 / 12.0).collect();
        assert_eq!(resize_bilinear(&data, 2, 2, 3, 2, 2), data);
    }

    #[test]
    fn zero_border_sampling() {
        let data = vec![1.0; 4];
        assert_eq!(sample_zero_border(&data, 2, 2, 0.0, 0.0), 1.0);
        assert_eq!(sample_zero_border(&data, 2, 2, 1.5, 0.0), 0.5);
        assert_eq!(sample_zero_border(&data, 2, 2, -1.0, 0.0), 0.0);
    }

    #[test]
    fn rounding_is_half_away_from_zero() {
        assert_eq!(round_half_away(2.5), 3);
        assert_eq!(round_half_away(-2.5), -3);
        assert_eq!(round_half_away(0.24 * 8.0), 2);
    }
}
