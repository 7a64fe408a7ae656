//! Sparse warp operators induced by a transform and a generating kernel.

use ndarray::{Array1, Array2, ArrayView1};

use super::{Grid, Kernel, TransformParams};

/// Matrix-free warp `T(theta)`: row `k` resamples the image at the mapped
/// coordinate of pixel `k` through the separable kernel.
///
/// The taps are precomputed at construction (at most a 4x4 stencil per row,
/// so at most 16 nonzeros), stored CSR-style. Immutable after construction;
/// `apply`, `adjoint` and `jacobian` are read-only and safe to call
/// concurrently.
#[derive(Debug, Clone)]
pub struct WarpOperator {
    grid: Grid,
    params: TransformParams,
    kernel: Kernel,
    row_ptr: Vec<u32>,
    cols: Vec<u32>,
    weights: Vec<f64>,
}

impl WarpOperator {
    pub fn new(grid: Grid, params: TransformParams, kernel: Kernel) -> Self {
        let n = grid.len();
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut cols = Vec::new();
        let mut weights = Vec::new();
        row_ptr.push(0u32);
        let theta = params.theta_slice();
        let model = params.model();
        for k in 0..n {
            let (v1, v2) = model.map_point(theta, grid.coord(k));
            if v1.is_finite() && v2.is_finite() {
                let b1 = v1.floor() as isize;
                let b2 = v2.floor() as isize;
                for i2 in (b2 - 1)..=(b2 + 2) {
                    let w2 = kernel.value(v2 - i2 as f64);
                    if w2 == 0.0 {
                        continue;
                    }
                    for i1 in (b1 - 1)..=(b1 + 2) {
                        let w1 = kernel.value(v1 - i1 as f64);
                        if w1 == 0.0 {
                            continue;
                        }
                        if let Some(col) = grid.index_of(i1, i2) {
                            cols.push(col as u32);
                            weights.push(w1 * w2);
                        }
                    }
                }
            }
            row_ptr.push(cols.len() as u32);
        }
        Self {
            grid,
            params,
            kernel,
            row_ptr,
            cols,
            weights,
        }
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn params(&self) -> &TransformParams {
        &self.params
    }

    pub fn kernel(&self) -> Kernel {
        self.kernel
    }

    pub fn dim(&self) -> usize {
        self.grid.len()
    }

    /// Number of stored taps in row `k`.
    pub fn row_nnz(&self, k: usize) -> usize {
        (self.row_ptr[k + 1] - self.row_ptr[k]) as usize
    }

    /// `T(theta) x`.
    pub fn apply(&self, x: ArrayView1<'_, f64>) -> Array1<f64> {
        let n = self.dim();
        assert_eq!(x.len(), n, "warp apply: dimension mismatch");
        let xs = x.as_slice().expect("contiguous");
        let mut out = Array1::zeros(n);
        let os = out.as_slice_mut().expect("contiguous");
        for k in 0..n {
            let lo = self.row_ptr[k] as usize;
            let hi = self.row_ptr[k + 1] as usize;
            let mut acc = 0.0;
            for t in lo..hi {
                acc += self.weights[t] * xs[self.cols[t] as usize];
            }
            os[k] = acc;
        }
        out
    }

    /// `T(theta)^T v`.
    pub fn adjoint(&self, v: ArrayView1<'_, f64>) -> Array1<f64> {
        let n = self.dim();
        assert_eq!(v.len(), n, "warp adjoint: dimension mismatch");
        let vs = v.as_slice().expect("contiguous");
        let mut out = Array1::zeros(n);
        let os = out.as_slice_mut().expect("contiguous");
        for k in 0..n {
            let vk = vs[k];
            if vk == 0.0 {
                continue;
            }
            let lo = self.row_ptr[k] as usize;
            let hi = self.row_ptr[k + 1] as usize;
            for t in lo..hi {
                os[self.cols[t] as usize] += self.weights[t] * vk;
            }
        }
        out
    }

    /// Columns of `d/d(theta_i) [T(theta) x0]`, an `n x p` matrix.
    ///
    /// Row `k` is the chain rule through the kernel derivative:
    /// `g1 * d(tau)_1/d(theta) + g2 * d(tau)_2/d(theta)` where `g1, g2` are
    /// the partial derivatives of the resampled value with respect to the
    /// mapped coordinate. The full stencil is re-enumerated here because
    /// taps whose kernel value vanishes can still carry a nonzero kernel
    /// derivative.
    pub fn jacobian(&self, x0: ArrayView1<'_, f64>) -> Array2<f64> {
        let n = self.dim();
        assert_eq!(x0.len(), n, "warp jacobian: dimension mismatch");
        let xs = x0.as_slice().expect("contiguous");
        let model = self.params.model();
        let theta = self.params.theta_slice();
        let p = model.param_count();
        let mut jac = Array2::zeros((n, p));
        let mut d1 = [0.0; super::transform::MAX_PARAMS];
        let mut d2 = [0.0; super::transform::MAX_PARAMS];
        for k in 0..n {
            let u = self.grid.coord(k);
            let (v1, v2) = model.map_point(theta, u);
            if !(v1.is_finite() && v2.is_finite()) {
                continue;
            }
            let b1 = v1.floor() as isize;
            let b2 = v2.floor() as isize;
            let mut g1 = 0.0;
            let mut g2 = 0.0;
            for i2 in (b2 - 1)..=(b2 + 2) {
                let w2 = self.kernel.value(v2 - i2 as f64);
                let dw2 = self.kernel.deriv(v2 - i2 as f64);
                for i1 in (b1 - 1)..=(b1 + 2) {
                    if let Some(col) = self.grid.index_of(i1, i2) {
                        let xv = xs[col];
                        if xv == 0.0 {
                            continue;
                        }
                        let w1 = self.kernel.value(v1 - i1 as f64);
                        let dw1 = self.kernel.deriv(v1 - i1 as f64);
                        g1 += xv * dw1 * w2;
                        g2 += xv * w1 * dw2;
                    }
                }
            }
            model.point_param_jacobian(theta, u, &mut d1, &mut d2);
            for i in 0..p {
                jac[(k, i)] = g1 * d1[i] + g2 * d2[i];
            }
        }
        jac
    }
}
