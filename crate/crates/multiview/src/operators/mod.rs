//! Matrix-free linear measurement operators.

mod blur;
mod spread;
mod stacked;

pub use blur::BlurDownsampleOp;
pub use spread::SpreadSpectrumOp;
pub use stacked::{MeasurementSet, StackedOperator};

use ndarray::{Array1, Array2, ArrayView1};

/// A linear map with explicit dimensions, applied matrix-free.
///
/// Implementations must satisfy the adjoint identity
/// `<A x, v> = <x, A^T v>` for all `x` in `R^cols`, `v` in `R^rows`.
/// Operators are immutable after construction and re-entrant.
pub trait LinearOperator: Send + Sync {
    fn rows(&self) -> usize;
    fn cols(&self) -> usize;

    /// `A x`. Panics on dimension mismatch.
    fn apply(&self, x: ArrayView1<'_, f64>) -> Array1<f64>;

    /// `A^T v`. Panics on dimension mismatch.
    fn adjoint(&self, v: ArrayView1<'_, f64>) -> Array1<f64>;

    /// Assemble the dense matrix column by column. Intended for small
    /// problems and diagnostics.
    fn to_dense(&self) -> Array2<f64> {
        let mut out = Array2::zeros((self.rows(), self.cols()));
        let mut e = Array1::zeros(self.cols());
        for j in 0..self.cols() {
            e[j] = 1.0;
            out.column_mut(j).assign(&self.apply(e.view()));
            e[j] = 0.0;
        }
        out
    }
}

/// The identity map on `R^n`.
#[derive(Debug, Clone, Copy)]
pub struct IdentityOp {
    n: usize,
}

impl IdentityOp {
    pub fn new(n: usize) -> Self {
        assert!(n >= 1);
        Self { n }
    }
}

impl LinearOperator for IdentityOp {
    fn rows(&self) -> usize {
        self.n
    }

    fn cols(&self) -> usize {
        self.n
    }

    fn apply(&self, x: ArrayView1<'_, f64>) -> Array1<f64> {
        assert_eq!(x.len(), self.n);
        x.to_owned()
    }

    fn adjoint(&self, v: ArrayView1<'_, f64>) -> Array1<f64> {
        assert_eq!(v.len(), self.n);
        v.to_owned()
    }
}

/// Largest singular value of `A`, estimated by power iteration on `A^T A`.
pub fn operator_norm_est(op: &dyn LinearOperator, iters: usize, seed: u64) -> f64 {
    use rand::prelude::*;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut x = Array1::from_iter((0..op.cols()).map(|_| rng.gen_range(-1.0..1.0f64)));
    let mut norm = 0.0;
    for _ in 0..iters {
        let y = op.adjoint(op.apply(x.view()).view());
        let ny = y.dot(&y).sqrt();
        if ny == 0.0 {
            return 0.0;
        }
        norm = ny;
        x = y / ny;
    }
    norm.sqrt()
}
