//! Bicubic single-frame upsampling, the super-resolution baseline.

use multiview::geometry::keys_kernel;
use ndarray::Array1;

/// Upsample a `low_side x low_side` image by `factor` with cubic
/// interpolation, zero padding outside the low-resolution grid.
///
/// High-resolution pixel `(r, c)` corresponds to the low-resolution
/// continuous coordinate `((r - (factor-1)/2) / factor, ...)`: the block
/// mean that produced the low-resolution image centers each sample on its
/// window.
pub fn upsample(low: &Array1<f64>, low_side: usize, factor: usize) -> Array1<f64> {
    assert_eq!(low.len(), low_side * low_side);
    let high_side = low_side * factor;
    let f = factor as f64;
    let offset = (f - 1.0) / 2.0;
    let mut out = Array1::zeros(high_side * high_side);
    for r in 0..high_side {
        let yc = (r as f64 - offset) / f;
        let y0 = yc.floor() as isize;
        for c in 0..high_side {
            let xc = (c as f64 - offset) / f;
            let x0 = xc.floor() as isize;
            let mut acc = 0.0;
            for dy in -1..=2 {
                let yy = y0 + dy;
                if yy < 0 || yy >= low_side as isize {
                    continue;
                }
                let wy = keys_kernel(yc - yy as f64);
                if wy == 0.0 {
                    continue;
                }
                for dx in -1..=2 {
                    let xx = x0 + dx;
                    if xx < 0 || xx >= low_side as isize {
                        continue;
                    }
                    let wx = keys_kernel(xc - xx as f64);
                    acc += wy * wx * low[yy as usize * low_side + xx as usize];
                }
            }
            out[r * high_side + c] = acc;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_image_upscales_to_constant_in_the_interior() {
        let low = Array1::from_elem(64, 3.0);
        let up = upsample(&low, 8, 2);
        assert_eq!(up.len(), 256);
        // Interior pixels see a full kernel stencil.
        for r in 4..12 {
            for c in 4..12 {
                assert!((up[r * 16 + c] - 3.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn factor_one_is_identity() {
        let low = Array1::from_iter((0..64).map(|i| i as f64));
        let up = upsample(&low, 8, 1);
        assert_eq!(up, low);
    }
}
