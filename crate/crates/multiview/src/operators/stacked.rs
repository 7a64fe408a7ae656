//! Stacked multi-view measurement system.

use std::sync::Arc;

use ndarray::{s, Array1, ArrayView1};

use super::LinearOperator;
use crate::error::{Error, Result};
use crate::geometry::{Grid, Kernel, TransformParams, WarpOperator};

/// Per-view measurements `y_1..y_l`, all of the same length.
#[derive(Debug, Clone)]
pub struct MeasurementSet {
    views: Vec<Array1<f64>>,
}

impl MeasurementSet {
    pub fn new(views: Vec<Array1<f64>>) -> Result<Self> {
        if views.is_empty() {
            return Err(Error::InvalidArgument("no measurement views".into()));
        }
        let m = views[0].len();
        for (j, v) in views.iter().enumerate() {
            if v.len() != m {
                return Err(Error::DimensionMismatch {
                    expected: m,
                    got: v.len(),
                });
            }
            let _ = j;
        }
        Ok(Self { views })
    }

    pub fn view_count(&self) -> usize {
        self.views.len()
    }

    pub fn view_len(&self) -> usize {
        self.views[0].len()
    }

    pub fn view(&self, j: usize) -> ArrayView1<'_, f64> {
        self.views[j].view()
    }

    /// All views concatenated into one vector of length `l * m`.
    pub fn concatenated(&self) -> Array1<f64> {
        let m = self.view_len();
        let mut out = Array1::zeros(self.views.len() * m);
        for (j, v) in self.views.iter().enumerate() {
            out.slice_mut(s![j * m..(j + 1) * m]).assign(v);
        }
        out
    }
}

/// The joint operator `A(theta)` acting on the stacked image vector
/// `x = (x0, x1, ..., xl)`: block `j` of the output is
/// `A_j (T(theta_j) x0 + x_j)`.
///
/// The warps are rebuilt through [`StackedOperator::set_params`] whenever a
/// view's parameters change; everything else is immutable.
pub struct StackedOperator {
    grid: Grid,
    kernel: Kernel,
    ops: Vec<Arc<dyn LinearOperator>>,
    warps: Vec<WarpOperator>,
    m: usize,
}

impl StackedOperator {
    pub fn new(
        grid: Grid,
        kernel: Kernel,
        ops: Vec<Arc<dyn LinearOperator>>,
        params: Vec<TransformParams>,
    ) -> Result<Self> {
        if ops.is_empty() || ops.len() != params.len() {
            return Err(Error::InvalidArgument(format!(
                "need one operator per view: {} ops, {} params",
                ops.len(),
                params.len()
            )));
        }
        let m = ops[0].rows();
        for op in &ops {
            if op.cols() != grid.len() {
                return Err(Error::DimensionMismatch {
                    expected: grid.len(),
                    got: op.cols(),
                });
            }
            if op.rows() != m {
                return Err(Error::DimensionMismatch {
                    expected: m,
                    got: op.rows(),
                });
            }
        }
        let warps = params
            .into_iter()
            .map(|p| WarpOperator::new(grid, p, kernel))
            .collect();
        Ok(Self {
            grid,
            kernel,
            ops,
            warps,
            m,
        })
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn kernel(&self) -> Kernel {
        self.kernel
    }

    pub fn view_count(&self) -> usize {
        self.ops.len()
    }

    /// Per-view measurement length `m`.
    pub fn view_rows(&self) -> usize {
        self.m
    }

    pub fn pixels(&self) -> usize {
        self.grid.len()
    }

    pub fn op(&self, j: usize) -> &dyn LinearOperator {
        self.ops[j].as_ref()
    }

    pub fn warp(&self, j: usize) -> &WarpOperator {
        &self.warps[j]
    }

    pub fn params(&self, j: usize) -> &TransformParams {
        self.warps[j].params()
    }

    /// All view parameters concatenated (length `l * p`).
    pub fn params_concatenated(&self) -> Array1<f64> {
        let p = self.warps[0].params().theta().len();
        let mut out = Array1::zeros(self.view_count() * p);
        for (j, w) in self.warps.iter().enumerate() {
            out.slice_mut(s![j * p..(j + 1) * p])
                .assign(&w.params().theta());
        }
        out
    }

    /// Replace view `j`'s transformation parameters, rebuilding its warp.
    pub fn set_params(&mut self, j: usize, params: TransformParams) {
        self.warps[j] = WarpOperator::new(self.grid, params, self.kernel);
    }

    /// Split a stacked image vector into the background slice and the `l`
    /// foreground slices.
    pub fn split<'a>(&self, x: ArrayView1<'a, f64>) -> Vec<ArrayView1<'a, f64>> {
        let n = self.pixels();
        assert_eq!(x.len(), (self.view_count() + 1) * n);
        (0..=self.view_count())
            .map(|i| x.slice_move(s![i * n..(i + 1) * n]))
            .collect()
    }
}

impl LinearOperator for StackedOperator {
    fn rows(&self) -> usize {
        self.view_count() * self.m
    }

    fn cols(&self) -> usize {
        (self.view_count() + 1) * self.pixels()
    }

    fn apply(&self, x: ArrayView1<'_, f64>) -> Array1<f64> {
        let n = self.pixels();
        assert_eq!(x.len(), self.cols(), "stacked apply: dimension mismatch");
        let x0 = x.slice(s![0..n]);
        let mut out = Array1::zeros(self.rows());
        for j in 0..self.view_count() {
            let mut composite = self.warps[j].apply(x0);
            composite += &x.slice(s![(j + 1) * n..(j + 2) * n]);
            out.slice_mut(s![j * self.m..(j + 1) * self.m])
                .assign(&self.ops[j].apply(composite.view()));
        }
        out
    }

    fn adjoint(&self, v: ArrayView1<'_, f64>) -> Array1<f64> {
        let n = self.pixels();
        assert_eq!(v.len(), self.rows(), "stacked adjoint: dimension mismatch");
        let mut out = Array1::zeros(self.cols());
        for j in 0..self.view_count() {
            let a_t = self.ops[j].adjoint(v.slice(s![j * self.m..(j + 1) * self.m]));
            let back = self.warps[j].adjoint(a_t.view());
            {
                let mut x0_slot = out.slice_mut(s![0..n]);
                x0_slot += &back;
            }
            out.slice_mut(s![(j + 1) * n..(j + 2) * n]).assign(&a_t);
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::TransformModel;
    use crate::operators::IdentityOp;

    fn identity_stack(grid: Grid, l: usize) -> StackedOperator {
        let ops: Vec<Arc<dyn LinearOperator>> =
            (0..l).map(|_| Arc::new(IdentityOp::new(grid.len())) as _).collect();
        let params = (0..l)
            .map(|_| TransformParams::identity(TransformModel::Translation))
            .collect();
        StackedOperator::new(grid, Kernel::KeysCubic, ops, params).unwrap()
    }

    #[test]
    fn zero_maps_to_zero() {
        let grid = Grid::new(8).unwrap();
        let stacked = identity_stack(grid, 2);
        let y = stacked.apply(Array1::zeros(stacked.cols()).view());
        assert!(y.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn single_view_identity_sums_background_and_foreground() {
        let grid = Grid::new(8).unwrap();
        let stacked = identity_stack(grid, 1);
        let n = grid.len();
        let mut x = Array1::zeros(2 * n);
        for i in 0..n {
            x[i] = i as f64;
            x[n + i] = 1000.0 + i as f64;
        }
        let y = stacked.apply(x.view());
        for i in 0..n {
            assert_eq!(y[i], x[i] + x[n + i]);
        }
    }

    #[test]
    fn measurement_set_validates_lengths() {
        assert!(MeasurementSet::new(vec![]).is_err());
        assert!(
            MeasurementSet::new(vec![Array1::zeros(4), Array1::zeros(5)]).is_err()
        );
        let ok = MeasurementSet::new(vec![Array1::ones(3), Array1::zeros(3)]).unwrap();
        assert_eq!(ok.view_count(), 2);
        assert_eq!(ok.concatenated().len(), 6);
    }
}
