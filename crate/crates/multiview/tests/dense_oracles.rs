//! Dense-matrix reference checks for the matrix-free operators.
//!
//! The warp reference matrix is assembled directly from its entrywise
//! definition (kernel evaluated at mapped-minus-lattice coordinates),
//! independent of the sparse tap machinery it validates.

use std::sync::Arc;

use multiview::geometry::{keys_kernel, Grid, Kernel, TransformModel, TransformParams};
use multiview::operators::{
    BlurDownsampleOp, IdentityOp, LinearOperator, SpreadSpectrumOp, StackedOperator,
};
use ndarray::{Array1, Array2, ArrayView1};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

fn random_vec(n: usize, rng: &mut impl Rng) -> Array1<f64> {
    Array1::from_iter((0..n).map(|_| rng.gen_range(-1.0..1.0)))
}

/// Entrywise reference warp matrix.
fn dense_warp_matrix(grid: Grid, model: TransformModel, theta: &[f64]) -> Array2<f64> {
    let n = grid.len();
    let mut t = Array2::zeros((n, n));
    for k in 0..n {
        let v = model.map_point(theta, grid.coord(k));
        for i in 0..n {
            let u = grid.coord(i);
            t[(k, i)] = keys_kernel(v.0 - u.0) * keys_kernel(v.1 - u.1);
        }
    }
    t
}

fn rel_err(a: ArrayView1<'_, f64>, b: ArrayView1<'_, f64>) -> f64 {
    let d = &a - &b;
    let denom = b.dot(&b).sqrt().max(1e-300);
    d.dot(&d).sqrt() / denom
}

fn random_params(model: TransformModel, rng: &mut impl Rng) -> TransformParams {
    let theta = match model {
        TransformModel::Translation => {
            vec![rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)]
        }
        TransformModel::ScaleTranslation => vec![
            rng.gen_range(0.9..1.1),
            rng.gen_range(-2.0..2.0),
            rng.gen_range(-2.0..2.0),
        ],
        TransformModel::Affine => vec![
            rng.gen_range(0.9..1.1),
            rng.gen_range(-0.1..0.1),
            rng.gen_range(-2.0..2.0),
            rng.gen_range(-0.1..0.1),
            rng.gen_range(0.9..1.1),
            rng.gen_range(-2.0..2.0),
        ],
        TransformModel::HomographyApprox => vec![
            rng.gen_range(0.9..1.1),
            rng.gen_range(-0.1..0.1),
            rng.gen_range(-2.0..2.0),
            rng.gen_range(-0.1..0.1),
            rng.gen_range(0.9..1.1),
            rng.gen_range(-2.0..2.0),
            rng.gen_range(-0.005..0.005),
            rng.gen_range(-0.005..0.005),
        ],
    };
    TransformParams::new(model, Array1::from(theta)).unwrap()
}

#[test]
fn warp_matches_dense_matrix_on_small_grids() {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    for side in [8usize, 16] {
        let grid = Grid::new(side).unwrap();
        for model in [
            TransformModel::Translation,
            TransformModel::ScaleTranslation,
            TransformModel::Affine,
            TransformModel::HomographyApprox,
        ] {
            let params = random_params(model, &mut rng);
            let warp =
                multiview::geometry::WarpOperator::new(grid, params.clone(), Kernel::KeysCubic);
            let dense = dense_warp_matrix(grid, model, params.theta_slice());
            for _ in 0..5 {
                let x = random_vec(grid.len(), &mut rng);
                let fast = warp.apply(x.view());
                let slow = dense.dot(&x);
                assert!(
                    rel_err(fast.view(), slow.view()) <= 1e-12,
                    "{model:?} side {side}"
                );
            }
            for k in 0..grid.len() {
                let nnz = dense.row(k).iter().filter(|v| **v != 0.0).count();
                assert!(nnz <= 16, "row {k} has {nnz} nonzeros");
            }
        }
    }
}

#[test]
fn cardinal_kernel_sums_to_one_on_lattice() {
    // At integer offsets the Keys kernel is a delta, so the row built at an
    // integer-mapped coordinate sums to exactly one.
    for k in -3i32..=3 {
        let s: f64 = (-3i32..=3).map(|i| keys_kernel((k - i) as f64)).sum();
        assert_eq!(s, 1.0);
    }
}

#[test]
fn stacked_operator_matches_dense_block_matrix() {
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let grid = Grid::new(8).unwrap();
    let n = grid.len();
    let l = 2;
    let m = 20;
    let ops: Vec<Arc<dyn LinearOperator>> = vec![
        Arc::new(SpreadSpectrumOp::new(grid, m, 7).unwrap()),
        Arc::new(SpreadSpectrumOp::new(grid, m, 8).unwrap()),
    ];
    let params: Vec<TransformParams> = (0..l)
        .map(|_| random_params(TransformModel::Translation, &mut rng))
        .collect();
    let stacked =
        StackedOperator::new(grid, Kernel::KeysCubic, ops.clone(), params.clone()).unwrap();

    // Dense block matrix [A_j T(theta_j) | diag(A_j)].
    let mut dense = Array2::zeros((l * m, (l + 1) * n));
    for j in 0..l {
        let aj = ops[j].to_dense();
        let tj = dense_warp_matrix(grid, TransformModel::Translation, params[j].theta_slice());
        let ajtj = aj.dot(&tj);
        for r in 0..m {
            for c in 0..n {
                dense[(j * m + r, c)] = ajtj[(r, c)];
                dense[(j * m + r, (j + 1) * n + c)] = aj[(r, c)];
            }
        }
    }

    for _ in 0..5 {
        let x = random_vec((l + 1) * n, &mut rng);
        let fast = stacked.apply(x.view());
        let slow = dense.dot(&x);
        assert!(rel_err(fast.view(), slow.view()) <= 1e-12);
    }

    // Linearity in x for fixed theta.
    let x = random_vec((l + 1) * n, &mut rng);
    let y = random_vec((l + 1) * n, &mut rng);
    let lhs = stacked.apply((2.5 * &x - 0.7 * &y).view());
    let rhs = 2.5 * stacked.apply(x.view()) - 0.7 * stacked.apply(y.view());
    assert!(rel_err(lhs.view(), rhs.view()) <= 1e-12);
}

fn adjoint_battery(op: &dyn LinearOperator, trials: usize, tol: f64, seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for t in 0..trials {
        let x = random_vec(op.cols(), &mut rng);
        let v = random_vec(op.rows(), &mut rng);
        let lhs = op.apply(x.view()).dot(&v);
        let rhs = x.dot(&op.adjoint(v.view()));
        let scale = lhs.abs().max(rhs.abs()).max(1e-300);
        assert!(
            (lhs - rhs).abs() / scale <= tol,
            "trial {t}: {lhs} vs {rhs}"
        );
    }
}

#[test]
fn adjoint_identities_hold_for_all_operators() {
    let grid = Grid::new(16).unwrap();
    let n = grid.len();
    adjoint_battery(&IdentityOp::new(n), 100, 1e-12, 1);
    adjoint_battery(&SpreadSpectrumOp::new(grid, 100, 3).unwrap(), 100, 1e-10, 2);
    adjoint_battery(&BlurDownsampleOp::new(16, 2).unwrap(), 100, 1e-12, 3);

    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for model in [
        TransformModel::Translation,
        TransformModel::ScaleTranslation,
        TransformModel::Affine,
        TransformModel::HomographyApprox,
    ] {
        let params = random_params(model, &mut rng);
        let warp = multiview::geometry::WarpOperator::new(grid, params, Kernel::KeysCubic);
        let mut inner = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..100 {
            let x = random_vec(n, &mut inner);
            let v = random_vec(n, &mut inner);
            let lhs = warp.apply(x.view()).dot(&v);
            let rhs = x.dot(&warp.adjoint(v.view()));
            let scale = lhs.abs().max(rhs.abs()).max(1e-300);
            assert!((lhs - rhs).abs() / scale <= 1e-12, "{model:?}");
        }
    }

    // Stacked system over two spread-spectrum views.
    let ops: Vec<Arc<dyn LinearOperator>> = vec![
        Arc::new(SpreadSpectrumOp::new(grid, 60, 11).unwrap()),
        Arc::new(SpreadSpectrumOp::new(grid, 60, 12).unwrap()),
    ];
    let params = vec![
        random_params(TransformModel::Affine, &mut rng),
        random_params(TransformModel::Affine, &mut rng),
    ];
    let stacked = StackedOperator::new(grid, Kernel::KeysCubic, ops, params).unwrap();
    adjoint_battery(&stacked, 100, 1e-10, 6);
}

#[test]
fn spread_spectrum_full_stack_is_an_isometry() {
    // On an 8x8 grid take every available row: the dense matrix must have
    // all singular values equal to one (unitary DFT, sqrt(2) row scaling).
    let grid = Grid::new(8).unwrap();
    let avail = SpreadSpectrumOp::available_rows(grid);
    assert_eq!(avail, 60);
    let op = SpreadSpectrumOp::new(grid, avail, 123).unwrap();
    let dense = op.to_dense();
    let mat = nalgebra::DMatrix::from_fn(avail, grid.len(), |r, c| dense[(r, c)]);
    let svd = mat.svd(false, false);
    for s in svd.singular_values.iter() {
        assert!(
            (s - 1.0).abs() < 1e-10,
            "singular value {s} deviates from 1"
        );
    }

    // Row norms are exactly one as well.
    for r in 0..avail {
        let norm = dense.row(r).dot(&dense.row(r)).sqrt();
        assert!((norm - 1.0).abs() < 1e-12);
    }

    // Subsampling can only shrink norms: |A x| <= |x|.
    let sub = SpreadSpectrumOp::new(grid, 20, 5).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..20 {
        let x = random_vec(grid.len(), &mut rng);
        let y = sub.apply(x.view());
        assert!(y.dot(&y).sqrt() <= x.dot(&x).sqrt() * (1.0 + 1e-12));
    }
}

#[test]
fn blur_downsample_matches_dense_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let op = BlurDownsampleOp::new(8, 2).unwrap();
    // Direct dense assembly: each output row has weight 1/4 over its
    // window.
    let mut dense = Array2::zeros((16, 64));
    for r in 0..4 {
        for c in 0..4 {
            for dr in 0..2 {
                for dc in 0..2 {
                    dense[(r * 4 + c, (r * 2 + dr) * 8 + c * 2 + dc)] = 0.25;
                }
            }
        }
    }
    for _ in 0..5 {
        let x = random_vec(64, &mut rng);
        assert!(rel_err(op.apply(x.view()).view(), dense.dot(&x).view()) <= 1e-12);
    }
}
