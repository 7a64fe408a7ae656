//! Spread-spectrum compressed sensing operator.

use std::sync::Arc;

use ndarray::{Array1, ArrayView1};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rustfft::{num_complex::Complex, Fft, FftPlanner};

use super::LinearOperator;
use crate::error::{Error, Result};
use crate::geometry::Grid;

/// Random +-1 pre-modulation followed by a random selection of rows of the
/// real/imaginary stacking of the half-plane 2D DFT.
///
/// The DFT uses the unitary `1/sqrt(n)` convention and the stacked rows are
/// scaled by `sqrt(2)`, so each measurement row has unit norm and the full
/// (unsubsampled) stacking is an isometry on the span it measures.
///
/// Half-plane enumeration: DFT bins `(k1, k2)` are paired with their
/// conjugate `(-k1 mod s, -k2 mod s)`. The canonical list keeps, in
/// row-major scan order, every bin that precedes its conjugate partner
/// lexicographically; the four self-conjugate bins (DC and Nyquist
/// combinations), whose imaginary part is identically zero, are excluded.
/// Each listed bin contributes two candidate rows (real part, imaginary
/// part), giving `n - 4` candidate rows in total. The `m` measured rows are
/// drawn uniformly without replacement from these candidates, deterministic
/// in the seed.
#[derive(Clone)]
pub struct SpreadSpectrumOp {
    side: usize,
    n: usize,
    m: usize,
    signs: Vec<f64>,
    /// Selected rows as (bin linear index, take imaginary part).
    selection: Vec<(u32, bool)>,
    fft_fwd: Arc<dyn Fft<f64>>,
    fft_inv: Arc<dyn Fft<f64>>,
}

impl SpreadSpectrumOp {
    /// Number of selectable stacked rows for a grid: `n - 4`.
    pub fn available_rows(grid: Grid) -> usize {
        grid.len() - 4
    }

    pub fn new(grid: Grid, m: usize, seed: u64) -> Result<Self> {
        let side = grid.side();
        let n = grid.len();
        let avail = Self::available_rows(grid);
        if m == 0 || m > avail {
            return Err(Error::InvalidArgument(format!(
                "spread-spectrum rows m={m} outside 1..={avail}"
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let signs: Vec<f64> = (0..n)
            .map(|_| if rng.gen::<bool>() { 1.0 } else { -1.0 })
            .collect();

        let half = half_plane_bins(side);
        debug_assert_eq!(half.len() * 2, avail);
        let mut chosen = rand::seq::index::sample(&mut rng, avail, m).into_vec();
        chosen.sort_unstable();
        let selection = chosen
            .into_iter()
            .map(|r| (half[r / 2], r % 2 == 1))
            .collect();

        let mut planner = FftPlanner::new();
        Ok(Self {
            side,
            n,
            m,
            signs,
            selection,
            fft_fwd: planner.plan_fft_forward(side),
            fft_inv: planner.plan_fft_inverse(side),
        })
    }

    fn fft2(&self, buf: &mut [Complex<f64>], inverse: bool) {
        let s = self.side;
        let plan = if inverse { &self.fft_inv } else { &self.fft_fwd };
        for row in buf.chunks_exact_mut(s) {
            plan.process(row);
        }
        let mut col = vec![Complex::default(); s];
        for c in 0..s {
            for r in 0..s {
                col[r] = buf[r * s + c];
            }
            plan.process(&mut col);
            for r in 0..s {
                buf[r * s + c] = col[r];
            }
        }
        // Unitary scaling: 1/sqrt(n) overall for either direction.
        let scale = 1.0 / (self.n as f64).sqrt();
        for v in buf.iter_mut() {
            *v *= scale;
        }
    }
}

/// Canonical half-plane bin list (linear indices `k2 * side + k1`).
fn half_plane_bins(side: usize) -> Vec<u32> {
    let s = side;
    let mut out = Vec::with_capacity(s * s / 2);
    for k2 in 0..s {
        for k1 in 0..s {
            let c1 = (s - k1) % s;
            let c2 = (s - k2) % s;
            // Keep bins strictly preceding their conjugate partner in
            // row-major order; self-conjugate bins are skipped.
            if (k2, k1) < (c2, c1) {
                out.push((k2 * s + k1) as u32);
            }
        }
    }
    out
}

impl LinearOperator for SpreadSpectrumOp {
    fn rows(&self) -> usize {
        self.m
    }

    fn cols(&self) -> usize {
        self.n
    }

    fn apply(&self, x: ArrayView1<'_, f64>) -> Array1<f64> {
        assert_eq!(x.len(), self.n);
        let mut buf: Vec<Complex<f64>> = x
            .iter()
            .zip(&self.signs)
            .map(|(v, s)| Complex::new(v * s, 0.0))
            .collect();
        self.fft2(&mut buf, false);
        let scale = std::f64::consts::SQRT_2;
        Array1::from_iter(self.selection.iter().map(|&(bin, imag)| {
            let c = buf[bin as usize];
            scale * if imag { c.im } else { c.re }
        }))
    }

    fn adjoint(&self, v: ArrayView1<'_, f64>) -> Array1<f64> {
        assert_eq!(v.len(), self.m);
        let mut buf = vec![Complex::new(0.0, 0.0); self.n];
        let scale = std::f64::consts::SQRT_2;
        for (&(bin, imag), &val) in self.selection.iter().zip(v.iter()) {
            let b = &mut buf[bin as usize];
            if imag {
                b.im += scale * val;
            } else {
                b.re += scale * val;
            }
        }
        self.fft2(&mut buf, true);
        Array1::from_iter(buf.iter().zip(&self.signs).map(|(c, s)| c.re * s))
    }
}
