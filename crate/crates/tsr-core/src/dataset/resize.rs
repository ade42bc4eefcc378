//! Bilinear resize with half-pixel centers.

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Resamples `[h, w, c]` to `[out_h, out_w, c]`.
///
/// Source coordinate convention: `src = (dst + 0.5) * scale - 0.5`, clamped
/// to the valid range; interpolation weights come from the fractional part.
/// Arithmetic runs in f64 so results do not depend on accumulation order.
pub fn resize_bilinear(image: &Tensor<f32>, out_h: usize, out_w: usize) -> Result<Tensor<f32>> {
    if image.shape().rank() != 3 {
        return Err(Error::RankMismatch {
            op: "resize_bilinear",
            expected: 3,
            dims: image.dims().to_vec(),
        });
    }
    let (h, w, c) = (image.dims()[0], image.dims()[1], image.dims()[2]);
    let scale_y = h as f64 / out_h as f64;
    let scale_x = w as f64 / out_w as f64;
    let src = image.data();
    let mut out = Vec::with_capacity(out_h * out_w * c);
    for oy in 0..out_h {
        let sy = ((oy as f64 + 0.5) * scale_y - 0.5).clamp(0.0, (h - 1) as f64);
        let y0 = sy.floor() as usize;
        let y1 = (y0 + 1).min(h - 1);
        let fy = sy - y0 as f64;
        for ox in 0..out_w {
            let sx = ((ox as f64 + 0.5) * scale_x - 0.5).clamp(0.0, (w - 1) as f64);
            let x0 = sx.floor() as usize;
            let x1 = (x0 + 1).min(w - 1);
            let fx = sx - x0 as f64;
            for ch in 0..c {
                let p = |y: usize, x: usize| src[(y * w + x) * c + ch] as f64;
                let top = (1.0 - fx) * p(y0, x0) + fx * p(y0, x1);
                let bottom = (1.0 - fx) * p(y1, x0) + fx * p(y1, x1);
                out.push(((1.0 - fy) * top + fy * bottom) as f32);
            }
        }
    }
    Tensor::from_dims(vec![out_h, out_w, c], out)
}
