//! Huber smoothing of the l1-norm.
//!
//! Per coordinate, with smoothing parameter `mu > 0`:
//!
//! ```text
//! h(a) = a^2 / (2 mu)   if |a| <  mu,
//!        |a| - mu / 2   otherwise.
//! ```
//!
//! The linear branch uses `-mu/2` so that the function is continuous at
//! `|a| = mu` (the two branches both give `mu/2` there) and C1 everywhere,
//! with a `1/mu`-Lipschitz gradient. As `mu -> 0` the function converges to
//! the l1-norm from below.

use ndarray::{Array1, ArrayView1};

#[inline]
fn huber_scalar(a: f64, mu: f64) -> f64 {
    let abs = a.abs();
    if abs < mu {
        a * a / (2.0 * mu)
    } else {
        abs - 0.5 * mu
    }
}

/// Sum of per-coordinate Huber values.
pub fn huber_value(alpha: ArrayView1<'_, f64>, mu: f64) -> f64 {
    assert!(mu > 0.0, "huber smoothing mu must be positive");
    alpha.iter().map(|a| huber_scalar(*a, mu)).sum()
}

/// Gradient of [`huber_value`]: `a/mu` inside the quadratic region,
/// `sign(a)` outside.
pub fn huber_grad(alpha: ArrayView1<'_, f64>, mu: f64) -> Array1<f64> {
    assert!(mu > 0.0, "huber smoothing mu must be positive");
    alpha.mapv(|a| {
        if a.abs() < mu {
            a / mu
        } else {
            a.signum()
        }
    })
}

/// Proximal map of `lambda * h`: coordinatewise minimizer of
/// `lambda * h(p) + 1/2 (p - z)^2`.
///
/// Closed form: `z * mu / (mu + lambda)` while `|z| <= mu + lambda`, else
/// `z - lambda * sign(z)` (the soft threshold). The two branches agree at
/// the crossover.
pub fn huber_prox(z: ArrayView1<'_, f64>, lambda: f64, mu: f64) -> Array1<f64> {
    assert!(mu > 0.0, "huber smoothing mu must be positive");
    assert!(lambda >= 0.0, "huber prox weight must be nonnegative");
    let shrink = mu / (mu + lambda);
    z.mapv(|v| {
        if v.abs() <= mu + lambda {
            v * shrink
        } else {
            v - lambda * v.signum()
        }
    })
}
