//! Coordinate grids, parametric transforms and warp operators.
//!
//! Images live on a square uniform grid of `n = side * side` points. Pixel
//! index `k` enumerates the grid row-major; the Cartesian coordinates of
//! pixel `k` are `u = (u1, u2)` with `u1` the horizontal axis (column) and
//! `u2` the vertical axis (row), both ranging over
//! `{-side/2 + 1, ..., side/2}`. This convention is fixed so that dense
//! reference matrices assembled in tests are bit-stable.
//!
//! A warp operator resamples the background image under a parametric
//! coordinate map through a separable generating kernel: row `k` of the
//! operator holds the kernel taps around the mapped coordinate of pixel `k`.
//! The continuous image is extended by zero outside the grid, so taps that
//! fall off-grid contribute nothing and rows whose whole stencil is off-grid
//! are identically zero.

mod kernel;
mod transform;
mod warp;

pub use kernel::{keys_kernel, keys_kernel_deriv, Kernel};
pub use transform::{ParamBounds, TransformModel, TransformParams, MAX_PARAMS};
pub use warp::WarpOperator;

use crate::error::{Error, Result};

/// Square pixel grid with centered integer coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Grid {
    side: usize,
}

impl Grid {
    /// `side` must be even and at least 8.
    pub fn new(side: usize) -> Result<Self> {
        if side < 8 || side % 2 != 0 {
            return Err(Error::InvalidArgument(format!(
                "grid side must be even and >= 8, got {side}"
            )));
        }
        Ok(Self { side })
    }

    pub fn side(&self) -> usize {
        self.side
    }

    /// Number of pixels `n = side * side`.
    pub fn len(&self) -> usize {
        self.side * self.side
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Coordinates `(u1, u2)` of pixel `k` (row-major).
    #[inline]
    pub fn coord(&self, k: usize) -> (f64, f64) {
        debug_assert!(k < self.len());
        let half = (self.side / 2) as isize;
        let row = (k / self.side) as isize;
        let col = (k % self.side) as isize;
        ((col - half + 1) as f64, (row - half + 1) as f64)
    }

    /// Pixel index of integer coordinates, if they lie on the grid.
    #[inline]
    pub fn index_of(&self, u1: isize, u2: isize) -> Option<usize> {
        let half = (self.side / 2) as isize;
        let col = u1 + half - 1;
        let row = u2 + half - 1;
        if col < 0 || row < 0 || col >= self.side as isize || row >= self.side as isize {
            None
        } else {
            Some(row as usize * self.side + col as usize)
        }
    }

    /// Smallest and largest coordinate value on either axis.
    pub fn coord_range(&self) -> (isize, isize) {
        let half = (self.side / 2) as isize;
        (-half + 1, half)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_rejects_odd_and_small_sides() {
        assert!(Grid::new(7).is_err());
        assert!(Grid::new(6).is_err());
        assert!(Grid::new(9).is_err());
        assert!(Grid::new(8).is_ok());
    }

    #[test]
    fn coord_enumeration_is_bijective() {
        let grid = Grid::new(8).unwrap();
        for k in 0..grid.len() {
            let (u1, u2) = grid.coord(k);
            assert_eq!(grid.index_of(u1 as isize, u2 as isize), Some(k));
        }
        let (lo, hi) = grid.coord_range();
        assert_eq!((lo, hi), (-3, 4));
    }

    #[test]
    fn coord_range_matches_convention() {
        // 128-pixel sides span {-63, ..., 64}.
        let grid = Grid::new(128).unwrap();
        assert_eq!(grid.coord_range(), (-63, 64));
        let (u1, u2) = grid.coord(0);
        assert_eq!((u1, u2), (-63.0, -63.0));
        let (u1, u2) = grid.coord(grid.len() - 1);
        assert_eq!((u1, u2), (64.0, 64.0));
    }

    #[test]
    fn off_grid_coords_have_no_index() {
        let grid = Grid::new(8).unwrap();
        assert_eq!(grid.index_of(-4, 0), None);
        assert_eq!(grid.index_of(5, 0), None);
        assert_eq!(grid.index_of(0, 5), None);
    }
}
