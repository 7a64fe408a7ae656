//! Isotropic total variation with forward differences and zero extension.
//!
//! The discrete gradient uses forward differences with the image extended by
//! zero one sample past each edge, so the last column's horizontal
//! difference is `0 - x` and likewise for the last row. Nonzero boundary
//! values therefore contribute to the TV value, which makes the prior
//! coercive per image.

use ndarray::{Array1, ArrayView1};

/// Forward-difference gradient; `g1`/`g2` hold the horizontal and vertical
/// differences per pixel.
fn gradient(x: &[f64], side: usize, g1: &mut [f64], g2: &mut [f64]) {
    for r in 0..side {
        for c in 0..side {
            let k = r * side + c;
            let right = if c + 1 < side { x[k + 1] } else { 0.0 };
            let down = if r + 1 < side { x[k + side] } else { 0.0 };
            g1[k] = right - x[k];
            g2[k] = down - x[k];
        }
    }
}

/// Negative adjoint of [`gradient`] applied to a dual field, i.e.
/// `out = L^T p` where `L` is the gradient operator.
fn gradient_adjoint(p1: &[f64], p2: &[f64], side: usize, out: &mut [f64]) {
    for r in 0..side {
        for c in 0..side {
            let k = r * side + c;
            let mut v = -p1[k] - p2[k];
            if c > 0 {
                v += p1[k - 1];
            }
            if r > 0 {
                v += p2[k - side];
            }
            out[k] = v;
        }
    }
}

/// Isotropic TV value `sum_k sqrt(g1_k^2 + g2_k^2)`.
pub fn tv_value(x: ArrayView1<'_, f64>, side: usize) -> f64 {
    assert_eq!(x.len(), side * side, "tv value: dimension mismatch");
    let xs = x.as_slice().expect("contiguous");
    let mut total = 0.0;
    for r in 0..side {
        for c in 0..side {
            let k = r * side + c;
            let right = if c + 1 < side { xs[k + 1] } else { 0.0 };
            let down = if r + 1 < side { xs[k + side] } else { 0.0 };
            let d1 = right - xs[k];
            let d2 = down - xs[k];
            total += (d1 * d1 + d2 * d2).sqrt();
        }
    }
    total
}

/// Dual field of the TV prox, kept for warm starts across calls.
#[derive(Debug, Clone)]
pub struct TvDual {
    p1: Vec<f64>,
    p2: Vec<f64>,
}

impl TvDual {
    pub fn new(side: usize) -> Self {
        Self {
            p1: vec![0.0; side * side],
            p2: vec![0.0; side * side],
        }
    }
}

/// `argmin_x 1/2 |x - z|^2 + lambda * TV(x)` by accelerated projected
/// gradient on the dual, stopped when the duality gap falls below
/// `gap_tol * (1 + primal)` or after `max_iters` dual iterations.
pub fn tv_prox(
    z: ArrayView1<'_, f64>,
    side: usize,
    lambda: f64,
    max_iters: usize,
    gap_tol: f64,
) -> Array1<f64> {
    let mut dual = TvDual::new(side);
    tv_prox_warm(z, side, lambda, max_iters, gap_tol, &mut dual)
}

/// [`tv_prox`] reusing a previous dual field as the starting point.
pub fn tv_prox_warm(
    z: ArrayView1<'_, f64>,
    side: usize,
    lambda: f64,
    max_iters: usize,
    gap_tol: f64,
    dual: &mut TvDual,
) -> Array1<f64> {
    let n = side * side;
    assert_eq!(z.len(), n, "tv prox: dimension mismatch");
    assert!(lambda >= 0.0, "negative tv prox weight");
    if lambda == 0.0 {
        return z.to_owned();
    }
    let zs = z.as_slice().expect("contiguous");

    let mut p1 = std::mem::take(&mut dual.p1);
    let mut p2 = std::mem::take(&mut dual.p2);
    if p1.len() != n {
        p1 = vec![0.0; n];
        p2 = vec![0.0; n];
    }
    // Momentum fields (FISTA on the dual); the dual gradient is
    // lambda * L x(q) with Lipschitz constant 8 * lambda^2, so the step on
    // the plain gradient field L x is 1/(8 * lambda).
    let mut q1 = p1.clone();
    let mut q2 = p2.clone();
    let mut p1_new = vec![0.0; n];
    let mut p2_new = vec![0.0; n];
    let mut t = 1.0f64;
    let step = 0.125 / lambda;

    let mut x = vec![0.0; n];
    let mut div = vec![0.0; n];
    let mut g1 = vec![0.0; n];
    let mut g2 = vec![0.0; n];

    for iter in 0..max_iters {
        // x(q) = z - lambda * L^T q.
        gradient_adjoint(&q1, &q2, side, &mut div);
        for k in 0..n {
            x[k] = zs[k] - lambda * div[k];
        }
        gradient(&x, side, &mut g1, &mut g2);

        for k in 0..n {
            let a = q1[k] + step * g1[k];
            let b = q2[k] + step * g2[k];
            let norm = (a * a + b * b).sqrt().max(1.0);
            p1_new[k] = a / norm;
            p2_new[k] = b / norm;
        }

        let t_new = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        let beta = (t - 1.0) / t_new;
        for k in 0..n {
            q1[k] = p1_new[k] + beta * (p1_new[k] - p1[k]);
            q2[k] = p2_new[k] + beta * (p2_new[k] - p2[k]);
        }
        t = t_new;
        std::mem::swap(&mut p1, &mut p1_new);
        std::mem::swap(&mut p2, &mut p2_new);

        // Gap check every few iterations; the final iterate is recomputed
        // from the feasible dual p, not the extrapolated q.
        if iter % 5 == 4 || iter + 1 == max_iters {
            gradient_adjoint(&p1, &p2, side, &mut div);
            for k in 0..n {
                x[k] = zs[k] - lambda * div[k];
            }
            let mut primal = 0.0;
            let mut dual_val = 0.0;
            for k in 0..n {
                let d = x[k] - zs[k];
                primal += 0.5 * d * d;
                dual_val += lambda * div[k] * zs[k] - 0.5 * lambda * lambda * div[k] * div[k];
            }
            primal += lambda * tv_value(ndarray::ArrayView1::from(&x[..]), side);
            let gap = primal - dual_val;
            if gap <= gap_tol * (1.0 + primal.abs()) {
                break;
            }
        }
    }

    gradient_adjoint(&p1, &p2, side, &mut div);
    for k in 0..n {
        x[k] = zs[k] - lambda * div[k];
    }
    dual.p1 = p1;
    dual.p2 = p2;
    Array1::from(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array1;

    #[test]
    fn zero_image_has_zero_tv() {
        assert_eq!(tv_value(Array1::zeros(64).view(), 8), 0.0);
    }

    #[test]
    fn constant_image_tv_comes_from_boundary_terms() {
        let side = 8;
        let c = 1.7;
        let v = tv_value(Array1::from_elem(side * side, c).view(), side);
        // Interior differences vanish; the last column and last row each
        // contribute |c| per pixel, the corner contributes sqrt(2)|c|.
        let expect = 2.0 * (side as f64 - 1.0) * c + std::f64::consts::SQRT_2 * c;
        assert!((v - expect).abs() < 1e-12, "{v} vs {expect}");
    }

    #[test]
    fn column_step_tv() {
        // x = 1 on the left half, 0 on the right half of an 8x8 image.
        let side = 8;
        let x = Array1::from_iter(
            (0..side * side).map(|k| if k % side < side / 2 { 1.0 } else { 0.0 }),
        );
        let v = tv_value(x.view(), side);
        // Direct evaluation: each of the 8 rows crosses the step once giving
        // |0-1| = 1 per row; the bottom row additionally contributes 1 per
        // nonzero pixel (4 of them) via the zero extension, of which the
        // corner pairs with the step crossing... sum computed directly:
        let mut expect = 0.0;
        for r in 0..side {
            for c in 0..side {
                let k = r * side + c;
                let right = if c + 1 < side { x[k + 1] } else { 0.0 };
                let down = if r + 1 < side { x[k + side] } else { 0.0 };
                expect += ((right - x[k]).powi(2) + (down - x[k]).powi(2)).sqrt();
            }
        }
        assert!((v - expect).abs() < 1e-12);
        assert!(v > side as f64); // interior step alone contributes side.
    }

    #[test]
    fn prox_with_zero_lambda_is_identity() {
        let z = Array1::from_iter((0..64).map(|i| (i as f64 * 0.3).sin()));
        let p = tv_prox(z.view(), 8, 0.0, 100, 1e-10);
        assert_eq!(p, z);
    }

    #[test]
    fn prox_decreases_objective_vs_input() {
        let side = 16;
        let z = Array1::from_iter((0..side * side).map(|k| {
            let (r, c) = (k / side, k % side);
            if (4..12).contains(&r) && (4..12).contains(&c) {
                1.0
            } else {
                0.0
            }
        }));
        let lambda = 0.3;
        let p = tv_prox(z.view(), side, lambda, 200, 1e-8);
        let obj = |x: &Array1<f64>| {
            let d = x - &z;
            0.5 * d.dot(&d) + lambda * tv_value(x.view(), side)
        };
        assert!(obj(&p) < obj(&z));
    }

    #[test]
    fn warm_start_matches_cold_solution() {
        let side = 8;
        let z = Array1::from_iter((0..64).map(|i| ((i * 7) % 5) as f64 * 0.25));
        let lambda = 0.2;
        let cold = tv_prox(z.view(), side, lambda, 400, 1e-10);
        let mut dual = TvDual::new(side);
        let _ = tv_prox_warm(z.view(), side, lambda, 400, 1e-10, &mut dual);
        let warm = tv_prox_warm(z.view(), side, lambda, 400, 1e-10, &mut dual);
        // A duality gap of g brackets the primal iterate within
        // sqrt(2 g) of the minimizer, so the two solves agree to ~1e-4.
        for i in 0..64 {
            assert!((cold[i] - warm[i]).abs() < 1e-4);
        }
    }
}
