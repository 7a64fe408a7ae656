//! Block-mean blur and downsample operator for super-resolution.

use ndarray::{Array1, ArrayView1};

use super::LinearOperator;
use crate::error::{Error, Result};

/// Averages non-overlapping `factor x factor` windows and keeps one sample
/// per window. The adjoint spreads each low-resolution value back over its
/// window with weight `1/factor^2`.
#[derive(Debug, Clone, Copy)]
pub struct BlurDownsampleOp {
    side: usize,
    factor: usize,
}

impl BlurDownsampleOp {
    pub fn new(side: usize, factor: usize) -> Result<Self> {
        if side == 0 || factor == 0 || side % factor != 0 {
            return Err(Error::InvalidArgument(format!(
                "side {side} not divisible by factor {factor}"
            )));
        }
        Ok(Self { side, factor })
    }

    pub fn low_res_side(&self) -> usize {
        self.side / self.factor
    }
}

impl LinearOperator for BlurDownsampleOp {
    fn rows(&self) -> usize {
        let m = self.low_res_side();
        m * m
    }

    fn cols(&self) -> usize {
        self.side * self.side
    }

    fn apply(&self, x: ArrayView1<'_, f64>) -> Array1<f64> {
        assert_eq!(x.len(), self.cols());
        let f = self.factor;
        let ms = self.low_res_side();
        let w = 1.0 / (f * f) as f64;
        let mut out = Array1::zeros(ms * ms);
        for r in 0..ms {
            for c in 0..ms {
                let mut acc = 0.0;
                for dr in 0..f {
                    for dc in 0..f {
                        acc += x[(r * f + dr) * self.side + c * f + dc];
                    }
                }
                out[r * ms + c] = acc * w;
            }
        }
        out
    }

    fn adjoint(&self, v: ArrayView1<'_, f64>) -> Array1<f64> {
        assert_eq!(v.len(), self.rows());
        let f = self.factor;
        let ms = self.low_res_side();
        let w = 1.0 / (f * f) as f64;
        let mut out = Array1::zeros(self.cols());
        for r in 0..ms {
            for c in 0..ms {
                let val = v[r * ms + c] * w;
                for dr in 0..f {
                    for dc in 0..f {
                        out[(r * f + dr) * self.side + c * f + dc] += val;
                    }
                }
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn constant_image_stays_constant() {
        let op = BlurDownsampleOp::new(8, 2).unwrap();
        let y = op.apply(Array1::from_elem(64, 3.25).view());
        assert_eq!(y.len(), 16);
        assert!(y.iter().all(|v| (v - 3.25).abs() < 1e-15));
    }

    #[test]
    fn two_by_two_block_mean() {
        let op = BlurDownsampleOp::new(2, 2).unwrap();
        let y = op.apply(array![1.0, 3.0, 5.0, 7.0].view());
        assert_eq!(y.len(), 1);
        assert!((y[0] - 4.0).abs() < 1e-15);
    }

    #[test]
    fn adjoint_spreads_uniformly() {
        let op = BlurDownsampleOp::new(2, 2).unwrap();
        let x = op.adjoint(array![4.0].view());
        assert_eq!(x, array![1.0, 1.0, 1.0, 1.0]);
    }

    #[test]
    fn rejects_non_divisible() {
        assert!(BlurDownsampleOp::new(9, 2).is_err());
        assert!(BlurDownsampleOp::new(8, 3).is_err());
    }
}
