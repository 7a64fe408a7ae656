//! Separable generating kernels.

/// Keys cubic convolution kernel (a = -1/2).
///
/// Piecewise cubic with support (-2, 2), even, and cardinal on the integer
/// lattice: `phi(0) = 1`, `phi(k) = 0` for nonzero integers `k`. The kernel
/// is C1; its second derivative jumps at |u| in {1, 2}.
#[inline]
pub fn keys_kernel(u: f64) -> f64 {
    let a = u.abs();
    if a < 1.0 {
        (1.5 * a - 2.5) * a * a + 1.0
    } else if a < 2.0 {
        ((-0.5 * a + 2.5) * a - 4.0) * a + 2.0
    } else {
        0.0
    }
}

/// Derivative of [`keys_kernel`]; continuous everywhere (odd function).
#[inline]
pub fn keys_kernel_deriv(u: f64) -> f64 {
    let a = u.abs();
    let d = if a < 1.0 {
        (4.5 * a - 5.0) * a
    } else if a < 2.0 {
        (-1.5 * a + 5.0) * a - 4.0
    } else {
        0.0
    };
    if u < 0.0 {
        -d
    } else {
        d
    }
}

/// Cubic B-spline, support (-2, 2), C2 but not cardinal.
#[inline]
fn bspline3(u: f64) -> f64 {
    let a = u.abs();
    if a < 1.0 {
        2.0 / 3.0 - a * a + 0.5 * a * a * a
    } else if a < 2.0 {
        let t = 2.0 - a;
        t * t * t / 6.0
    } else {
        0.0
    }
}

#[inline]
fn bspline3_deriv(u: f64) -> f64 {
    let a = u.abs();
    let d = if a < 1.0 {
        -2.0 * a + 1.5 * a * a
    } else if a < 2.0 {
        let t = 2.0 - a;
        -0.5 * t * t
    } else {
        0.0
    };
    if u < 0.0 {
        -d
    } else {
        d
    }
}

/// Generating kernel for warp operators.
///
/// `KeysCubic` is the default: it interpolates the samples exactly, so the
/// identity transform reproduces the image bit for bit, but it is only C1.
/// `CubicBSpline` is C2 (matching the smoothness the convergence theory
/// asks of the warp-matrix entries) at the price of cardinality: applied
/// with identity parameters it smooths instead of reproducing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Kernel {
    #[default]
    KeysCubic,
    CubicBSpline,
}

impl Kernel {
    #[inline]
    pub fn value(&self, u: f64) -> f64 {
        match self {
            Kernel::KeysCubic => keys_kernel(u),
            Kernel::CubicBSpline => bspline3(u),
        }
    }

    #[inline]
    pub fn deriv(&self, u: f64) -> f64 {
        match self {
            Kernel::KeysCubic => keys_kernel_deriv(u),
            Kernel::CubicBSpline => bspline3_deriv(u),
        }
    }

    /// True when the kernel is cardinal on the integer lattice.
    pub fn is_interpolating(&self) -> bool {
        matches!(self, Kernel::KeysCubic)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn keys_cardinal_at_integers() {
        assert_eq!(keys_kernel(0.0), 1.0);
        assert_eq!(keys_kernel(1.0), 0.0);
        assert_eq!(keys_kernel(-1.0), 0.0);
        assert_eq!(keys_kernel(2.0), 0.0);
        assert_eq!(keys_kernel(-2.0), 0.0);
        assert_eq!(keys_kernel(3.7), 0.0);
    }

    #[test]
    fn keys_half_integer_values() {
        // Direct evaluation of 3/2|u|^3 - 5/2|u|^2 + 1 at u = 1/2.
        assert!((keys_kernel(0.5) - 0.5625).abs() < 1e-15);
        // Second branch at u = 3/2.
        assert!((keys_kernel(1.5) - (-0.0625)).abs() < 1e-15);
    }

    #[test]
    fn keys_is_even_and_deriv_odd() {
        for i in 0..400 {
            let u = -2.5 + i as f64 * 0.0125;
            assert!((keys_kernel(u) - keys_kernel(-u)).abs() < 1e-15);
            assert!((keys_kernel_deriv(u) + keys_kernel_deriv(-u)).abs() < 1e-15);
        }
    }

    #[test]
    fn keys_deriv_is_continuous_at_breakpoints() {
        let eps = 1e-9;
        for b in [-2.0, -1.0, 0.0, 1.0, 2.0] {
            let left = keys_kernel_deriv(b - eps);
            let right = keys_kernel_deriv(b + eps);
            assert!(
                (left - right).abs() < 1e-7,
                "jump at {b}: {left} vs {right}"
            );
        }
    }

    #[test]
    fn keys_deriv_matches_finite_differences() {
        let h = 1e-6;
        for i in 0..100 {
            let u = -2.3 + i as f64 * 0.047; // avoids landing on breakpoints
            let fd = (keys_kernel(u + h) - keys_kernel(u - h)) / (2.0 * h);
            assert!(
                (fd - keys_kernel_deriv(u)).abs() < 1e-6,
                "at u={u}: fd={fd} analytic={}",
                keys_kernel_deriv(u)
            );
        }
    }

    #[test]
    fn bspline_partition_of_unity_and_smoothness() {
        // B-spline sums to one over integer shifts at any offset.
        for i in 0..50 {
            let t = -0.5 + i as f64 / 50.0;
            let s: f64 = (-3..=3).map(|k| Kernel::CubicBSpline.value(t - k as f64)).sum();
            assert!((s - 1.0).abs() < 1e-12);
        }
        // Not cardinal.
        assert!(!Kernel::CubicBSpline.is_interpolating());
        assert!((Kernel::CubicBSpline.value(0.0) - 2.0 / 3.0).abs() < 1e-15);
        // Derivative continuous at breakpoints, like the value.
        let eps = 1e-9;
        for b in [-2.0, -1.0, 1.0, 2.0] {
            let l = Kernel::CubicBSpline.deriv(b - eps);
            let r = Kernel::CubicBSpline.deriv(b + eps);
            assert!((l - r).abs() < 1e-7);
        }
    }
}
