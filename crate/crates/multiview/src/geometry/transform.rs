//! Parametric coordinate transforms and their parameter Jacobians.

use ndarray::{Array1, ArrayView1};

use crate::error::{Error, Result};

/// Maximum parameter count over all models (homography approximation).
pub const MAX_PARAMS: usize = 8;

/// Families of global coordinate transforms `tau_theta: R^2 -> R^2`.
///
/// Parameter layouts:
/// - `Translation` (p=2): `tau(u) = (u1 + t1, u2 + t2)`, `theta = (t1, t2)`.
/// - `ScaleTranslation` (p=3): `tau(u) = (s*u1 + tx, s*u2 + ty)`,
///   `theta = (s, tx, ty)`.
/// - `Affine` (p=6):
///   `tau(u) = (a1*u1 + a2*u2 + a3, a4*u1 + a5*u2 + a6)`.
/// - `HomographyApprox` (p=8): the affine part multiplied by
///   `(1 - t7*u1 - t8*u2)`, the first-order expansion of the projective
///   division, valid while `|t7*u1 + t8*u2|` stays small.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TransformModel {
    Translation,
    ScaleTranslation,
    Affine,
    HomographyApprox,
}

impl TransformModel {
    pub fn param_count(&self) -> usize {
        match self {
            TransformModel::Translation => 2,
            TransformModel::ScaleTranslation => 3,
            TransformModel::Affine => 6,
            TransformModel::HomographyApprox => 8,
        }
    }

    /// Parameter vector for which the transform is the identity map.
    pub fn identity_params(&self) -> Array1<f64> {
        match self {
            TransformModel::Translation => Array1::zeros(2),
            TransformModel::ScaleTranslation => Array1::from(vec![1.0, 0.0, 0.0]),
            TransformModel::Affine => Array1::from(vec![1.0, 0.0, 0.0, 0.0, 1.0, 0.0]),
            TransformModel::HomographyApprox => {
                Array1::from(vec![1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0])
            }
        }
    }

    /// Apply `tau_theta` to the point `u`.
    #[inline]
    pub fn map_point(&self, theta: &[f64], u: (f64, f64)) -> (f64, f64) {
        debug_assert_eq!(theta.len(), self.param_count());
        let (u1, u2) = u;
        match self {
            TransformModel::Translation => (u1 + theta[0], u2 + theta[1]),
            TransformModel::ScaleTranslation => {
                (theta[0] * u1 + theta[1], theta[0] * u2 + theta[2])
            }
            TransformModel::Affine => (
                theta[0] * u1 + theta[1] * u2 + theta[2],
                theta[3] * u1 + theta[4] * u2 + theta[5],
            ),
            TransformModel::HomographyApprox => {
                let ax = theta[0] * u1 + theta[1] * u2 + theta[2];
                let ay = theta[3] * u1 + theta[4] * u2 + theta[5];
                let c = 1.0 - theta[6] * u1 - theta[7] * u2;
                (ax * c, ay * c)
            }
        }
    }

    /// Partial derivatives of `tau_theta(u)` with respect to each parameter.
    ///
    /// Writes `d(tau)_1/d(theta_i)` into `d1[i]` and `d(tau)_2/d(theta_i)`
    /// into `d2[i]` for `i < param_count`; trailing entries are untouched.
    #[inline]
    pub fn point_param_jacobian(
        &self,
        theta: &[f64],
        u: (f64, f64),
        d1: &mut [f64; MAX_PARAMS],
        d2: &mut [f64; MAX_PARAMS],
    ) {
        let (u1, u2) = u;
        match self {
            TransformModel::Translation => {
                d1[0] = 1.0;
                d1[1] = 0.0;
                d2[0] = 0.0;
                d2[1] = 1.0;
            }
            TransformModel::ScaleTranslation => {
                d1[0] = u1;
                d1[1] = 1.0;
                d1[2] = 0.0;
                d2[0] = u2;
                d2[1] = 0.0;
                d2[2] = 1.0;
            }
            TransformModel::Affine => {
                d1[..6].copy_from_slice(&[u1, u2, 1.0, 0.0, 0.0, 0.0]);
                d2[..6].copy_from_slice(&[0.0, 0.0, 0.0, u1, u2, 1.0]);
            }
            TransformModel::HomographyApprox => {
                let ax = theta[0] * u1 + theta[1] * u2 + theta[2];
                let ay = theta[3] * u1 + theta[4] * u2 + theta[5];
                let c = 1.0 - theta[6] * u1 - theta[7] * u2;
                d1[..8].copy_from_slice(&[
                    u1 * c,
                    u2 * c,
                    c,
                    0.0,
                    0.0,
                    0.0,
                    -u1 * ax,
                    -u2 * ax,
                ]);
                d2[..8].copy_from_slice(&[
                    0.0,
                    0.0,
                    0.0,
                    u1 * c,
                    u2 * c,
                    c,
                    -u1 * ay,
                    -u2 * ay,
                ]);
            }
        }
    }

    /// Jacobian of `tau_theta` with respect to the point `u` (2x2,
    /// row-major `[d t1/d u1, d t1/d u2; d t2/d u1, d t2/d u2]`).
    #[inline]
    pub fn point_jacobian(&self, theta: &[f64], u: (f64, f64)) -> [[f64; 2]; 2] {
        let (u1, u2) = u;
        match self {
            TransformModel::Translation => [[1.0, 0.0], [0.0, 1.0]],
            TransformModel::ScaleTranslation => [[theta[0], 0.0], [0.0, theta[0]]],
            TransformModel::Affine => [[theta[0], theta[1]], [theta[3], theta[4]]],
            TransformModel::HomographyApprox => {
                let ax = theta[0] * u1 + theta[1] * u2 + theta[2];
                let ay = theta[3] * u1 + theta[4] * u2 + theta[5];
                let c = 1.0 - theta[6] * u1 - theta[7] * u2;
                [
                    [theta[0] * c - theta[6] * ax, theta[1] * c - theta[7] * ax],
                    [theta[3] * c - theta[6] * ay, theta[4] * c - theta[7] * ay],
                ]
            }
        }
    }
}

/// Parameter vector bound to its transform model.
#[derive(Debug, Clone, PartialEq)]
pub struct TransformParams {
    model: TransformModel,
    theta: Array1<f64>,
}

impl TransformParams {
    pub fn new(model: TransformModel, theta: Array1<f64>) -> Result<Self> {
        if theta.len() != model.param_count() {
            return Err(Error::DimensionMismatch {
                expected: model.param_count(),
                got: theta.len(),
            });
        }
        Ok(Self { model, theta })
    }

    pub fn identity(model: TransformModel) -> Self {
        Self {
            model,
            theta: model.identity_params(),
        }
    }

    pub fn model(&self) -> TransformModel {
        self.model
    }

    pub fn theta(&self) -> ArrayView1<'_, f64> {
        self.theta.view()
    }

    pub fn theta_slice(&self) -> &[f64] {
        self.theta.as_slice().expect("contiguous")
    }

    pub fn map_point(&self, u: (f64, f64)) -> (f64, f64) {
        self.model.map_point(self.theta_slice(), u)
    }
}

/// Componentwise box constraints on a parameter vector.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamBounds {
    lower: Array1<f64>,
    upper: Array1<f64>,
}

impl ParamBounds {
    /// Requires `lower <= upper` componentwise and the model's identity
    /// parameters inside the box.
    pub fn new(model: TransformModel, lower: Array1<f64>, upper: Array1<f64>) -> Result<Self> {
        let p = model.param_count();
        if lower.len() != p {
            return Err(Error::DimensionMismatch {
                expected: p,
                got: lower.len(),
            });
        }
        if upper.len() != p {
            return Err(Error::DimensionMismatch {
                expected: p,
                got: upper.len(),
            });
        }
        let id = model.identity_params();
        for i in 0..p {
            if lower[i] > upper[i] {
                return Err(Error::InvalidArgument(format!(
                    "bounds component {i}: lower {} > upper {}",
                    lower[i], upper[i]
                )));
            }
            if id[i] < lower[i] || id[i] > upper[i] {
                return Err(Error::InvalidArgument(format!(
                    "identity parameter {} outside bounds [{}, {}] at component {i}",
                    id[i], lower[i], upper[i]
                )));
            }
        }
        Ok(Self { lower, upper })
    }

    /// Box `identity +/- radius` per component.
    pub fn around_identity(model: TransformModel, radius: &[f64]) -> Result<Self> {
        let id = model.identity_params();
        if radius.len() != id.len() {
            return Err(Error::DimensionMismatch {
                expected: id.len(),
                got: radius.len(),
            });
        }
        let lower = Array1::from_iter(id.iter().zip(radius).map(|(c, r)| c - r));
        let upper = Array1::from_iter(id.iter().zip(radius).map(|(c, r)| c + r));
        Self::new(model, lower, upper)
    }

    pub fn lower(&self) -> ArrayView1<'_, f64> {
        self.lower.view()
    }

    pub fn upper(&self) -> ArrayView1<'_, f64> {
        self.upper.view()
    }

    pub fn contains(&self, theta: ArrayView1<'_, f64>) -> bool {
        theta.len() == self.lower.len()
            && theta
                .iter()
                .zip(self.lower.iter().zip(self.upper.iter()))
                .all(|(t, (lo, hi))| *t >= *lo && *t <= *hi)
    }

    pub fn project(&self, theta: &mut Array1<f64>) {
        for i in 0..theta.len() {
            theta[i] = theta[i].clamp(self.lower[i], self.upper[i]);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn identity_params_map_points_to_themselves() {
        for model in [
            TransformModel::Translation,
            TransformModel::ScaleTranslation,
            TransformModel::Affine,
            TransformModel::HomographyApprox,
        ] {
            let id = model.identity_params();
            for u in [(3.0, -2.0), (0.0, 0.0), (-5.5, 7.25)] {
                let v = model.map_point(id.as_slice().unwrap(), u);
                assert_eq!(v, u, "{model:?}");
            }
        }
    }

    #[test]
    fn translation_shifts() {
        let v = TransformModel::Translation.map_point(&[2.0, 3.0], (1.0, 1.0));
        assert_eq!(v, (3.0, 4.0));
    }

    #[test]
    fn affine_identity_example() {
        let v = TransformModel::Affine.map_point(&[1.0, 0.0, 0.0, 0.0, 1.0, 0.0], (3.0, -2.0));
        assert_eq!(v, (3.0, -2.0));
    }

    #[test]
    fn homography_with_zero_perspective_equals_affine() {
        let aff = [1.05, -0.1, 2.0, 0.2, 0.9, -1.0];
        let hom = [1.05, -0.1, 2.0, 0.2, 0.9, -1.0, 0.0, 0.0];
        for u in [(-3.0, 4.0), (2.5, -1.5), (0.0, 0.0), (4.0, 4.0)] {
            let va = TransformModel::Affine.map_point(&aff, u);
            let vh = TransformModel::HomographyApprox.map_point(&hom, u);
            assert_eq!(va, vh);
        }
    }

    #[test]
    fn point_param_jacobian_matches_finite_differences() {
        let cases = [
            (TransformModel::Translation, vec![0.3, -0.7]),
            (TransformModel::ScaleTranslation, vec![1.1, 0.4, -0.2]),
            (
                TransformModel::Affine,
                vec![1.05, -0.08, 1.3, 0.06, 0.93, -0.4],
            ),
            (
                TransformModel::HomographyApprox,
                vec![1.05, -0.08, 1.3, 0.06, 0.93, -0.4, 0.004, -0.006],
            ),
        ];
        let u = (2.0, -3.0);
        let h = 1e-6;
        for (model, theta) in cases {
            let p = model.param_count();
            let mut d1 = [0.0; MAX_PARAMS];
            let mut d2 = [0.0; MAX_PARAMS];
            model.point_param_jacobian(&theta, u, &mut d1, &mut d2);
            for i in 0..p {
                let mut tp = theta.clone();
                let mut tm = theta.clone();
                tp[i] += h;
                tm[i] -= h;
                let vp = model.map_point(&tp, u);
                let vm = model.map_point(&tm, u);
                let fd1 = (vp.0 - vm.0) / (2.0 * h);
                let fd2 = (vp.1 - vm.1) / (2.0 * h);
                assert!((fd1 - d1[i]).abs() < 1e-6, "{model:?} d1[{i}]");
                assert!((fd2 - d2[i]).abs() < 1e-6, "{model:?} d2[{i}]");
            }
        }
    }

    #[test]
    fn bounds_must_contain_identity() {
        let bad = ParamBounds::new(
            TransformModel::Translation,
            array![1.0, 1.0],
            array![2.0, 2.0],
        );
        assert!(bad.is_err());
        let ok = ParamBounds::around_identity(TransformModel::ScaleTranslation, &[0.5, 4.0, 4.0])
            .unwrap();
        assert!(ok.contains(array![1.2, -3.0, 0.0].view()));
        assert!(!ok.contains(array![1.6, 0.0, 0.0].view()));
    }

    #[test]
    fn project_clamps_into_box() {
        let b = ParamBounds::around_identity(TransformModel::Translation, &[2.0, 2.0]).unwrap();
        let mut t = array![5.0, -3.0];
        b.project(&mut t);
        assert_eq!(t, array![2.0, -2.0]);
    }
}
