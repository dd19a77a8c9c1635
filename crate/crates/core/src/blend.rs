use crate::error::{Result, SbiError};
use crate::tensor::{BlendMask, ImageTensor};

/// Alpha-composites `source` over `target` with per-pixel weights from `mask`:
/// `out = source * m + target * (1 - m)`.
///
/// The result is clamped to the closed interval spanned by the two inputs, so
/// `m = 0` yields `target` exactly, `m = 1` yields `source` exactly and
/// identical inputs are returned unchanged.
pub fn blend(source: &ImageTensor, target: &ImageTensor, mask: &BlendMask) -> Result<ImageTensor> {
    if source.dims() != target.dims() {
        return Err(shape_error("source", source.dims(), "target", target.dims()));
    }
    if source.dims() != mask.dims() {
        return Err(shape_error("source", source.dims(), "mask", mask.dims()));
    }
    let (h, w) = source.dims();
    let mut out = Vec::with_capacity(h * w * 3);
    for ((s, t), &m) in source
        .data()
        .chunks_exact(3)
        .zip(target.data().chunks_exact(3))
        .zip(mask.data())
    {
        for c in 0..3 {
            let (s, t) = (s[c], t[c]);
            let v = s * m + t * (1.0 - m);
            out.push(v.clamp(s.min(t), s.max(t)));
        }
    }
    Ok(ImageTensor::from_clamped(h, w, out))
}

fn shape_error(
    left: &'static str,
    l: (usize, usize),
    right: &'static str,
    r: (usize, usize),
) -> SbiError {
    SbiError::Shape {
        left,
        left_dims: format!("{}x{}", l.0, l.1),
        right,
        right_dims: format!("{}x{}", r.0, r.1),
    }
}
