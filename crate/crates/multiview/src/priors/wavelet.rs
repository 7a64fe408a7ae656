//! Orthonormal separable 2D wavelet transforms with periodic boundaries.

use ndarray::{Array1, ArrayView1};

use crate::error::{Error, Result};

/// Supported orthonormal filter families.
///
/// `Daubechies8` is the 8-tap orthonormal Daubechies filter (four vanishing
/// moments).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WaveletFamily {
    Haar,
    Daubechies8,
}

impl WaveletFamily {
    /// Scaling (low-pass) filter, normalized so the transform is
    /// orthonormal.
    fn scaling_filter(&self) -> Vec<f64> {
        match self {
            WaveletFamily::Haar => vec![std::f64::consts::FRAC_1_SQRT_2; 2],
            WaveletFamily::Daubechies8 => vec![
                0.230_377_813_308_896_5,
                0.714_846_570_552_915_6,
                0.630_880_767_929_858_9,
                -0.027_983_769_416_859_854,
                -0.187_034_811_719_093_08,
                0.030_841_381_835_560_764,
                0.032_883_011_666_885_2,
                -0.010_597_401_785_069_032,
            ],
        }
    }
}

/// Orthonormal 2D discrete wavelet transform on a `side x side` image,
/// decomposed over `levels` scales with periodic boundary handling.
///
/// `forward` is the analysis map `W^T x` (image to coefficients) and
/// `inverse` the synthesis map; they are exact inverses and isometries.
#[derive(Debug, Clone)]
pub struct Wavelet2d {
    family: WaveletFamily,
    side: usize,
    levels: usize,
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl Wavelet2d {
    /// Maximum decomposition depth: the analyzed length must stay at least
    /// the filter length, otherwise the periodized filter folds onto itself
    /// and orthonormality is lost.
    pub fn max_levels(family: WaveletFamily, side: usize) -> usize {
        let filter_len = family.scaling_filter().len();
        let log_side = side.trailing_zeros() as usize;
        let log_filter = filter_len.trailing_zeros() as usize;
        (log_side + 1).saturating_sub(log_filter)
    }

    pub fn new(family: WaveletFamily, side: usize, levels: usize) -> Result<Self> {
        if side < 2 || !side.is_power_of_two() {
            return Err(Error::InvalidArgument(format!(
                "wavelet transform needs a power-of-two side, got {side}"
            )));
        }
        let max_levels = Self::max_levels(family, side);
        if levels == 0 || levels > max_levels {
            return Err(Error::InvalidArgument(format!(
                "levels {levels} outside 1..={max_levels} for side {side} ({family:?})"
            )));
        }
        let lo = family.scaling_filter();
        // Quadrature mirror: g[k] = (-1)^k h[L-1-k].
        let l = lo.len();
        let hi: Vec<f64> = (0..l)
            .map(|k| {
                let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
                sign * lo[l - 1 - k]
            })
            .collect();
        Ok(Self {
            family,
            side,
            levels,
            lo,
            hi,
        })
    }

    /// Full decomposition (as many levels as the side and filter allow).
    pub fn full(family: WaveletFamily, side: usize) -> Result<Self> {
        Self::new(family, side, Self::max_levels(family, side).max(1))
    }

    pub fn family(&self) -> WaveletFamily {
        self.family
    }

    pub fn side(&self) -> usize {
        self.side
    }

    pub fn levels(&self) -> usize {
        self.levels
    }

    pub fn len(&self) -> usize {
        self.side * self.side
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    fn analyze_1d(&self, x: &[f64], approx: &mut [f64], detail: &mut [f64]) {
        let len = x.len();
        let half = len / 2;
        for i in 0..half {
            let mut a = 0.0;
            let mut d = 0.0;
            for (k, (&h, &g)) in self.lo.iter().zip(&self.hi).enumerate() {
                let v = x[(2 * i + k) % len];
                a += h * v;
                d += g * v;
            }
            approx[i] = a;
            detail[i] = d;
        }
    }

    fn synthesize_1d(&self, approx: &[f64], detail: &[f64], x: &mut [f64]) {
        let half = approx.len();
        let len = 2 * half;
        x[..len].fill(0.0);
        for i in 0..half {
            let (a, d) = (approx[i], detail[i]);
            for (k, (&h, &g)) in self.lo.iter().zip(&self.hi).enumerate() {
                x[(2 * i + k) % len] += h * a + g * d;
            }
        }
    }

    /// Analysis `W^T x`: coefficients packed in-place Mallat style, the
    /// approximation block in the top-left corner at each level.
    pub fn forward(&self, x: ArrayView1<'_, f64>) -> Array1<f64> {
        assert_eq!(x.len(), self.len(), "wavelet forward: dimension mismatch");
        let mut data = x.to_owned();
        let buf = data.as_slice_mut().expect("contiguous");
        let mut row = vec![0.0; self.side];
        let mut a = vec![0.0; self.side / 2];
        let mut d = vec![0.0; self.side / 2];
        let mut s = self.side;
        for _ in 0..self.levels {
            let half = s / 2;
            // Rows.
            for r in 0..s {
                row[..s].copy_from_slice(&buf[r * self.side..r * self.side + s]);
                self.analyze_1d(&row[..s], &mut a[..half], &mut d[..half]);
                buf[r * self.side..r * self.side + half].copy_from_slice(&a[..half]);
                buf[r * self.side + half..r * self.side + s].copy_from_slice(&d[..half]);
            }
            // Columns.
            for c in 0..s {
                for r in 0..s {
                    row[r] = buf[r * self.side + c];
                }
                self.analyze_1d(&row[..s], &mut a[..half], &mut d[..half]);
                for r in 0..half {
                    buf[r * self.side + c] = a[r];
                    buf[(r + half) * self.side + c] = d[r];
                }
            }
            s = half;
        }
        data
    }

    /// Synthesis `W alpha`, the exact inverse of [`Wavelet2d::forward`].
    pub fn inverse(&self, coeffs: ArrayView1<'_, f64>) -> Array1<f64> {
        assert_eq!(
            coeffs.len(),
            self.len(),
            "wavelet inverse: dimension mismatch"
        );
        let mut data = coeffs.to_owned();
        let buf = data.as_slice_mut().expect("contiguous");
        let mut col = vec![0.0; self.side];
        let mut a = vec![0.0; self.side / 2];
        let mut d = vec![0.0; self.side / 2];
        let mut sizes = Vec::with_capacity(self.levels);
        let mut s = self.side;
        for _ in 0..self.levels {
            sizes.push(s);
            s /= 2;
        }
        for &s in sizes.iter().rev() {
            let half = s / 2;
            // Columns.
            for c in 0..s {
                for r in 0..half {
                    a[r] = buf[r * self.side + c];
                    d[r] = buf[(r + half) * self.side + c];
                }
                self.synthesize_1d(&a[..half], &d[..half], &mut col[..s]);
                for r in 0..s {
                    buf[r * self.side + c] = col[r];
                }
            }
            // Rows.
            for r in 0..s {
                a[..half].copy_from_slice(&buf[r * self.side..r * self.side + half]);
                d[..half].copy_from_slice(&buf[r * self.side + half..r * self.side + s]);
                self.synthesize_1d(&a[..half], &d[..half], &mut col[..s]);
                buf[r * self.side..r * self.side + s].copy_from_slice(&col[..s]);
            }
        }
        data
    }
}

/// Block-diagonal extension of one per-image transform over the stacked
/// image vector: `D = diag(W, ..., W)` with `D D^T = I`.
#[derive(Debug, Clone)]
pub struct FrameOperator {
    wavelet: Wavelet2d,
    blocks: usize,
}

impl FrameOperator {
    pub fn new(wavelet: Wavelet2d, blocks: usize) -> Self {
        assert!(blocks >= 1);
        Self { wavelet, blocks }
    }

    pub fn wavelet(&self) -> &Wavelet2d {
        &self.wavelet
    }

    pub fn blocks(&self) -> usize {
        self.blocks
    }

    /// True when `other` applies the identical transform (same family,
    /// side, depth and block count), so coefficient vectors are
    /// interchangeable between the two.
    pub fn same_transform(&self, other: &FrameOperator) -> bool {
        self.blocks == other.blocks
            && self.wavelet.family() == other.wavelet.family()
            && self.wavelet.side() == other.wavelet.side()
            && self.wavelet.levels() == other.wavelet.levels()
    }

    pub fn block_len(&self) -> usize {
        self.wavelet.len()
    }

    /// Total stacked length `blocks * side^2`.
    pub fn len(&self) -> usize {
        self.blocks * self.wavelet.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// `D^T x`, blockwise analysis.
    pub fn analysis(&self, x: ArrayView1<'_, f64>) -> Array1<f64> {
        assert_eq!(x.len(), self.len(), "frame analysis: dimension mismatch");
        let n = self.block_len();
        let mut out = Array1::zeros(x.len());
        for b in 0..self.blocks {
            let c = self.wavelet.forward(x.slice(ndarray::s![b * n..(b + 1) * n]));
            out.slice_mut(ndarray::s![b * n..(b + 1) * n]).assign(&c);
        }
        out
    }

    /// `D alpha`, blockwise synthesis.
    pub fn synthesis(&self, coeffs: ArrayView1<'_, f64>) -> Array1<f64> {
        assert_eq!(
            coeffs.len(),
            self.len(),
            "frame synthesis: dimension mismatch"
        );
        let n = self.block_len();
        let mut out = Array1::zeros(coeffs.len());
        for b in 0..self.blocks {
            let x = self
                .wavelet
                .inverse(coeffs.slice(ndarray::s![b * n..(b + 1) * n]));
            out.slice_mut(ndarray::s![b * n..(b + 1) * n]).assign(&x);
        }
        out
    }
}
