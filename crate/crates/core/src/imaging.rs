//! Inverse-map image resampling shared by the warping and undistortion paths.

use image::RgbImage;

use crate::distortion::PixelPoint;

/// Bilinear sample at continuous pixel coordinates (pixel centers at `i + 0.5`).
///
/// Returns `None` outside `[0, width] × [0, height]`. Near the border the nearest
/// row/column is repeated.
pub fn sample_bilinear(img: &RgbImage, p: &PixelPoint<f64>) -> Option<[f64; 3]> {
    let (w, h) = img.dimensions();
    if !(p.u >= 0.0 && p.v >= 0.0 && p.u <= w as f64 && p.v <= h as f64) {
        return None;
    }
    let x = p.u - 0.5;
    let y = p.v - 0.5;
    let x0 = x.floor();
    let y0 = y.floor();
    let (ax, ay) = (x - x0, y - y0);
    let clamp = |v: f64, n: u32| v.clamp(0.0, (n - 1) as f64) as u32;
    let (xa, xb) = (clamp(x0, w), clamp(x0 + 1.0, w));
    let (ya, yb) = (clamp(y0, h), clamp(y0 + 1.0, h));
    let px = |x, y| img.get_pixel(x, y).0;
    let (p00, p10, p01, p11) = (px(xa, ya), px(xb, ya), px(xa, yb), px(xb, yb));
    let mut out = [0.0; 3];
    for c in 0..3 {
        let top = p00[c] as f64 * (1.0 - ax) + p10[c] as f64 * ax;
        let bottom = p01[c] as f64 * (1.0 - ax) + p11[c] as f64 * ax;
        out[c] = top * (1.0 - ay) + bottom * ay;
    }
    Some(out)
}

/// Fills each destination pixel from the source position returned by `map`; unmapped
/// pixels stay black. Also returns how many destination pixels were mapped.
pub fn remap<F>(src: &RgbImage, width: u32, height: u32, map: F) -> (RgbImage, usize)
where
    F: Fn(PixelPoint<f64>) -> Option<PixelPoint<f64>> + Sync,
{
    use rayon::prelude::*;
    let mut out = RgbImage::new(width, height);
    let mapped: usize = out
        .par_chunks_mut(3 * width as usize)
        .enumerate()
        .map(|(row, line)| {
            let mut n = 0;
            for (col, px) in line.chunks_exact_mut(3).enumerate() {
                let s = map(PixelPoint::center_of(col, row)).and_then(|q| sample_bilinear(src, &q));
                if let Some(v) = s {
                    for c in 0..3 {
                        px[c] = v[c].round().clamp(0.0, 255.0) as u8;
                    }
                    n += 1;
                }
            }
            n
        })
        .sum();
    (out, mapped)
}

/// Mean absolute per-channel difference over the pixels where `mask` is set.
pub fn mean_abs_diff(a: &RgbImage, b: &RgbImage, mask: &[bool]) -> Option<f64> {
    if a.dimensions() != b.dimensions() || mask.len() != (a.width() * a.height()) as usize {
        return None;
    }
    let mut sum = 0.0;
    let mut n = 0usize;
    for ((pa, pb), &m) in a.pixels().zip(b.pixels()).zip(mask) {
        if m {
            for c in 0..3 {
                sum += (pa[c] as f64 - pb[c] as f64).abs();
            }
            n += 3;
        }
    }
    (n > 0).then(|| sum / n as f64)
}
