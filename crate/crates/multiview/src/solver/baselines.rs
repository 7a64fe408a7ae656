//! Convex per-view reconstruction baselines.
//!
//! Both baselines solve a constrained analysis-sparsity problem over the
//! view images `X = (x_1, ..., x_l)`:
//!
//! ```text
//! min_X  |W^T X|          subject to  |Y - A X|_F <= eps
//! ```
//!
//! with the entrywise l1-norm (basis pursuit extension) or the rowwise
//! l2,1-norm across views (joint sparsity pattern). Solved by a primal-dual
//! iteration: the ball constraint by projection of the dual, the norm by
//! its exact prox through the orthonormal wavelet.

use std::sync::Arc;

use ndarray::Array1;

use crate::error::{Error, Result};
use crate::operators::{operator_norm_est, LinearOperator};
use crate::priors::{soft_threshold, Wavelet2d};

#[derive(Debug, Clone)]
pub struct ConvexBaseline {
    pub images: Vec<Array1<f64>>,
    pub objective: f64,
    pub residual: f64,
    pub iters: usize,
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum SparsityPattern {
    Entrywise,
    GroupAcrossViews,
}

/// Basis-pursuit-denoise extension over several views.
pub fn solve_bpdn(
    wavelet: &Wavelet2d,
    ops: &[Arc<dyn LinearOperator>],
    ys: &[Array1<f64>],
    epsilon: f64,
    max_iters: usize,
    obj_tol: f64,
) -> Result<ConvexBaseline> {
    primal_dual(
        wavelet,
        ops,
        ys,
        epsilon,
        SparsityPattern::Entrywise,
        max_iters,
        obj_tol,
    )
}

/// Same constraint with the rowwise l2,1-norm coupling the views.
pub fn solve_group_sparse(
    wavelet: &Wavelet2d,
    ops: &[Arc<dyn LinearOperator>],
    ys: &[Array1<f64>],
    epsilon: f64,
    max_iters: usize,
    obj_tol: f64,
) -> Result<ConvexBaseline> {
    primal_dual(
        wavelet,
        ops,
        ys,
        epsilon,
        SparsityPattern::GroupAcrossViews,
        max_iters,
        obj_tol,
    )
}

fn group_shrink(coeffs: &mut [Array1<f64>], lambda: f64) {
    let n = coeffs[0].len();
    let l = coeffs.len();
    for i in 0..n {
        let norm: f64 = (0..l).map(|j| coeffs[j][i] * coeffs[j][i]).sum::<f64>().sqrt();
        let factor = if norm > lambda {
            1.0 - lambda / norm
        } else {
            0.0
        };
        for c in coeffs.iter_mut().take(l) {
            c[i] *= factor;
        }
    }
}

fn objective_value(coeffs: &[Array1<f64>], pattern: SparsityPattern) -> f64 {
    match pattern {
        SparsityPattern::Entrywise => coeffs
            .iter()
            .map(|c| c.iter().map(|v| v.abs()).sum::<f64>())
            .sum(),
        SparsityPattern::GroupAcrossViews => {
            let n = coeffs[0].len();
            (0..n)
                .map(|i| {
                    coeffs
                        .iter()
                        .map(|c| c[i] * c[i])
                        .sum::<f64>()
                        .sqrt()
                })
                .sum()
        }
    }
}

fn primal_dual(
    wavelet: &Wavelet2d,
    ops: &[Arc<dyn LinearOperator>],
    ys: &[Array1<f64>],
    epsilon: f64,
    pattern: SparsityPattern,
    max_iters: usize,
    obj_tol: f64,
) -> Result<ConvexBaseline> {
    if epsilon < 0.0 {
        return Err(Error::InvalidArgument("negative epsilon".into()));
    }
    if ops.is_empty() || ops.len() != ys.len() {
        return Err(Error::InvalidArgument(format!(
            "need one operator per view: {} vs {}",
            ops.len(),
            ys.len()
        )));
    }
    let l = ops.len();
    let n = wavelet.len();
    for (op, y) in ops.iter().zip(ys) {
        if op.cols() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: op.cols(),
            });
        }
        if op.rows() != y.len() {
            return Err(Error::DimensionMismatch {
                expected: op.rows(),
                got: y.len(),
            });
        }
    }

    let norm_k = ops
        .iter()
        .enumerate()
        .map(|(j, op)| operator_norm_est(op.as_ref(), 30, 17 + j as u64))
        .fold(0.0f64, f64::max)
        .max(1e-12);
    let tau = 0.95 / norm_k;
    let sigma = 0.95 / norm_k;

    let y_norm: f64 = ys.iter().map(|y| y.dot(y)).sum::<f64>().sqrt();
    let feas_target = if epsilon > 0.0 {
        1.005 * epsilon
    } else {
        1e-6 * y_norm.max(1e-300)
    };

    let mut x: Vec<Array1<f64>> = (0..l).map(|_| Array1::zeros(n)).collect();
    let mut x_bar = x.clone();
    let mut xi: Vec<Array1<f64>> = ops.iter().map(|op| Array1::zeros(op.rows())).collect();

    let mut obj_prev = f64::INFINITY;
    let mut iters = 0;
    let mut residual = y_norm;
    let mut objective = 0.0;

    for t in 0..max_iters {
        iters = t + 1;

        // Dual ascent + projection of v = (xi + sigma K x_bar) / sigma onto
        // the joint ball B(Y, eps).
        let w: Vec<Array1<f64>> = (0..l)
            .map(|j| &xi[j] + &(sigma * ops[j].apply(x_bar[j].view())))
            .collect();
        let mut dist_sq = 0.0;
        for j in 0..l {
            let d = &w[j] / sigma - &ys[j];
            dist_sq += d.dot(&d);
        }
        let dist = dist_sq.sqrt();
        let shrinkage = if dist > epsilon && dist > 0.0 {
            epsilon / dist
        } else {
            1.0
        };
        for j in 0..l {
            let proj = &ys[j] + &((&w[j] / sigma - &ys[j]) * shrinkage);
            xi[j] = &w[j] - &(sigma * proj);
        }

        // Primal prox through the wavelet.
        let mut coeffs: Vec<Array1<f64>> = (0..l)
            .map(|j| {
                let u = &x[j] - &(tau * ops[j].adjoint(xi[j].view()));
                wavelet.forward(u.view())
            })
            .collect();
        match pattern {
            SparsityPattern::Entrywise => {
                for c in coeffs.iter_mut() {
                    *c = soft_threshold(c.view(), tau);
                }
            }
            SparsityPattern::GroupAcrossViews => group_shrink(&mut coeffs, tau),
        }
        let x_new: Vec<Array1<f64>> = coeffs
            .iter()
            .map(|c| wavelet.inverse(c.view()))
            .collect();
        for j in 0..l {
            x_bar[j] = 2.0 * &x_new[j] - &x[j];
        }
        x = x_new;

        if t % 20 == 19 || t + 1 == max_iters {
            let mut res_sq = 0.0;
            for j in 0..l {
                let r = ops[j].apply(x[j].view()) - &ys[j];
                res_sq += r.dot(&r);
            }
            residual = res_sq.sqrt();
            objective = objective_value(&coeffs, pattern);
            let stable = (obj_prev - objective).abs() <= obj_tol * (1.0 + objective.abs());
            obj_prev = objective;
            if residual <= feas_target && stable {
                break;
            }
        }
    }

    if epsilon > 0.0 && residual > 1.01 * epsilon {
        return Err(Error::InfeasibleEpsilon {
            epsilon,
            residual,
            iters,
        });
    }

    Ok(ConvexBaseline {
        images: x,
        objective,
        residual,
        iters,
    })
}
