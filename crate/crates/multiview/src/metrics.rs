//! Quantitative evaluation: noise bounds, reconstruction SNR, registration
//! error.

use ndarray::{Array1, ArrayView1};

use crate::error::{Error, Result};
use crate::geometry::{TransformModel, TransformParams, WarpOperator};

/// SNR values are capped here; an exact match reports the cap.
pub const SNR_CAP_DB: f64 = 300.0;

/// Gaussian measurement noise with its l2-energy bound.
#[derive(Debug, Clone, Copy)]
pub struct NoiseModel {
    pub sigma: f64,
    pub epsilon: f64,
}

impl NoiseModel {
    /// Bound from the 99th percentile of the chi-square distribution of
    /// `|noise/sigma|^2` with `dof` degrees of freedom.
    pub fn from_sigma(sigma: f64, dof: usize) -> Self {
        Self {
            sigma,
            epsilon: noise_bound(sigma, dof),
        }
    }
}

/// 99th-percentile chi-square quantile by the Wilson-Hilferty cube
/// approximation `k (1 - 2/(9k) + z sqrt(2/(9k)))^3` with `z = 2.326`.
pub fn chi_square_q99(dof: usize) -> f64 {
    assert!(dof >= 1, "degrees of freedom must be positive");
    let k = dof as f64;
    let t = 1.0 - 2.0 / (9.0 * k) + 2.326 * (2.0 / (9.0 * k)).sqrt();
    k * t * t * t
}

/// `eps` with `eps^2 = sigma^2 * Q(dof, 0.99)`.
pub fn noise_bound(sigma: f64, dof: usize) -> f64 {
    assert!(sigma >= 0.0, "sigma must be nonnegative");
    sigma * chi_square_q99(dof).sqrt()
}

/// `-20 log10(|recon - reference| / |reference|)`, capped at
/// [`SNR_CAP_DB`]. Errors on a zero reference image.
pub fn snr_db(recon: ArrayView1<'_, f64>, reference: ArrayView1<'_, f64>) -> Result<f64> {
    if recon.len() != reference.len() {
        return Err(Error::DimensionMismatch {
            expected: reference.len(),
            got: recon.len(),
        });
    }
    let ref_norm = reference.dot(&reference).sqrt();
    if ref_norm == 0.0 {
        return Err(Error::InvalidArgument("zero reference image".into()));
    }
    let d = &recon - &reference;
    let err = d.dot(&d).sqrt();
    if err == 0.0 {
        return Ok(SNR_CAP_DB);
    }
    Ok((-20.0 * (err / ref_norm).log10()).min(SNR_CAP_DB))
}

/// Reconstruction SNR of view `j`: compares `T(theta_j) x0 + x_j` against
/// the true view image.
pub fn reconstruction_snr(
    warp: &WarpOperator,
    x0: ArrayView1<'_, f64>,
    xj: ArrayView1<'_, f64>,
    xj_true: ArrayView1<'_, f64>,
) -> Result<f64> {
    let recon = warp.apply(x0) + &xj;
    snr_db(recon.view(), xj_true)
}

/// Parameters of `tau_j^{-1} (tau_i (u))`, the transform registering view
/// `i`'s coordinates onto view `j`'s through the shared background frame.
///
/// Closed form for the group-invertible models. The approximate homography
/// family is not closed under composition or inversion; there the composed
/// map is evaluated on a fixed coordinate lattice (`{-10, -8, ..., 10}^2`)
/// and the parameters are re-fitted by Gauss-Newton least squares.
pub fn relative_transform(
    model: TransformModel,
    theta_i: ArrayView1<'_, f64>,
    theta_j: ArrayView1<'_, f64>,
) -> Result<TransformParams> {
    let p = model.param_count();
    if theta_i.len() != p || theta_j.len() != p {
        return Err(Error::DimensionMismatch {
            expected: p,
            got: theta_i.len().max(theta_j.len()),
        });
    }
    match model {
        TransformModel::Translation => {
            let rel = Array1::from(vec![theta_i[0] - theta_j[0], theta_i[1] - theta_j[1]]);
            TransformParams::new(model, rel)
        }
        TransformModel::ScaleTranslation => {
            let sj = theta_j[0];
            if sj.abs() < 1e-12 {
                return Err(Error::SingularTransform("zero scale".into()));
            }
            let rel = Array1::from(vec![
                theta_i[0] / sj,
                (theta_i[1] - theta_j[1]) / sj,
                (theta_i[2] - theta_j[2]) / sj,
            ]);
            TransformParams::new(model, rel)
        }
        TransformModel::Affine => {
            let (mi, ti) = affine_parts(theta_i);
            let (mj, tj) = affine_parts(theta_j);
            let inv = invert_2x2(mj)?;
            let m = mat_mul(inv, mi);
            let dt = [ti[0] - tj[0], ti[1] - tj[1]];
            let t = [
                inv[0][0] * dt[0] + inv[0][1] * dt[1],
                inv[1][0] * dt[0] + inv[1][1] * dt[1],
            ];
            TransformParams::new(
                model,
                Array1::from(vec![m[0][0], m[0][1], t[0], m[1][0], m[1][1], t[1]]),
            )
        }
        TransformModel::HomographyApprox => {
            fit_homography_composition(theta_i, theta_j)
        }
    }
}

fn affine_parts(theta: ArrayView1<'_, f64>) -> ([[f64; 2]; 2], [f64; 2]) {
    (
        [[theta[0], theta[1]], [theta[3], theta[4]]],
        [theta[2], theta[5]],
    )
}

fn invert_2x2(m: [[f64; 2]; 2]) -> Result<[[f64; 2]; 2]> {
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    if det.abs() < 1e-12 {
        return Err(Error::SingularTransform(format!(
            "2x2 determinant {det:.3e}"
        )));
    }
    Ok([
        [m[1][1] / det, -m[0][1] / det],
        [-m[1][0] / det, m[0][0] / det],
    ])
}

fn mat_mul(a: [[f64; 2]; 2], b: [[f64; 2]; 2]) -> [[f64; 2]; 2] {
    [
        [
            a[0][0] * b[0][0] + a[0][1] * b[1][0],
            a[0][0] * b[0][1] + a[0][1] * b[1][1],
        ],
        [
            a[1][0] * b[0][0] + a[1][1] * b[1][0],
            a[1][0] * b[0][1] + a[1][1] * b[1][1],
        ],
    ]
}

/// Invert the approximate homography at a point by Newton iteration.
fn invert_point(model: TransformModel, theta: &[f64], target: (f64, f64)) -> Result<(f64, f64)> {
    let mut u = target;
    for _ in 0..50 {
        let v = model.map_point(theta, u);
        let r = (v.0 - target.0, v.1 - target.1);
        if r.0.abs() + r.1.abs() < 1e-13 {
            return Ok(u);
        }
        let jac = model.point_jacobian(theta, u);
        let det = jac[0][0] * jac[1][1] - jac[0][1] * jac[1][0];
        if det.abs() < 1e-12 {
            return Err(Error::SingularTransform(
                "point Jacobian singular during inversion".into(),
            ));
        }
        u = (
            u.0 - (jac[1][1] * r.0 - jac[0][1] * r.1) / det,
            u.1 - (-jac[1][0] * r.0 + jac[0][0] * r.1) / det,
        );
    }
    Ok(u)
}

/// Sample lattice used for the homography re-fit.
fn fit_lattice() -> Vec<(f64, f64)> {
    let mut pts = Vec::new();
    let mut a = -10.0;
    while a <= 10.0 {
        let mut b = -10.0;
        while b <= 10.0 {
            pts.push((a, b));
            b += 2.0;
        }
        a += 2.0;
    }
    pts
}

fn fit_homography_composition(
    theta_i: ArrayView1<'_, f64>,
    theta_j: ArrayView1<'_, f64>,
) -> Result<TransformParams> {
    use nalgebra::{DMatrix, DVector};
    let model = TransformModel::HomographyApprox;
    let ti = theta_i.as_slice().expect("contiguous");
    let tj = theta_j.as_slice().expect("contiguous");
    let pts = fit_lattice();
    let targets: Vec<(f64, f64)> = pts
        .iter()
        .map(|&u| invert_point(model, tj, model.map_point(ti, u)))
        .collect::<Result<_>>()?;

    // Gauss-Newton on the 8 parameters, initialized at identity.
    let mut theta = model.identity_params();
    let mut d1 = [0.0; crate::geometry::MAX_PARAMS];
    let mut d2 = [0.0; crate::geometry::MAX_PARAMS];
    for _ in 0..100 {
        let ts = theta.as_slice().expect("contiguous");
        let mut jt_j = DMatrix::<f64>::zeros(8, 8);
        let mut jt_r = DVector::<f64>::zeros(8);
        let mut err = 0.0;
        for (&u, &w) in pts.iter().zip(&targets) {
            let v = model.map_point(ts, u);
            let r = [v.0 - w.0, v.1 - w.1];
            err += r[0] * r[0] + r[1] * r[1];
            model.point_param_jacobian(ts, u, &mut d1, &mut d2);
            for a in 0..8 {
                jt_r[a] += d1[a] * r[0] + d2[a] * r[1];
                for b in 0..8 {
                    jt_j[(a, b)] += d1[a] * d1[b] + d2[a] * d2[b];
                }
            }
        }
        // Small Levenberg damping keeps the normal equations solvable.
        for a in 0..8 {
            jt_j[(a, a)] += 1e-9;
        }
        let delta = jt_j
            .lu()
            .solve(&jt_r)
            .ok_or_else(|| Error::SingularTransform("homography fit normal equations".into()))?;
        for a in 0..8 {
            theta[a] -= delta[a];
        }
        if delta.norm() < 1e-14 || err < 1e-26 {
            break;
        }
    }
    TransformParams::new(model, theta)
}

/// Mean normalized parameter-space RMSE over all ordered view pairs.
#[derive(Debug, Clone, Copy)]
pub struct RegistrationError {
    pub sigma: f64,
    pub pairs_used: usize,
    pub pairs_skipped: usize,
}

/// Compares estimated and true relative transforms over every ordered pair
/// `(i, j)`, `i != j`. Pairs whose true relative parameters have zero norm
/// are skipped and reported.
pub fn registration_error(
    estimated: &[TransformParams],
    truth: &[TransformParams],
) -> Result<RegistrationError> {
    if estimated.len() != truth.len() || estimated.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "need matching parameter lists with >= 2 views: {} vs {}",
            estimated.len(),
            truth.len()
        )));
    }
    let model = truth[0].model();
    let l = truth.len();
    let mut sum = 0.0;
    let mut used = 0;
    let mut skipped = 0;
    for i in 0..l {
        for j in 0..l {
            if i == j {
                continue;
            }
            let rel_true = relative_transform(model, truth[i].theta(), truth[j].theta())?;
            let denom = {
                let t = rel_true.theta();
                t.dot(&t).sqrt()
            };
            if denom <= 1e-12 {
                skipped += 1;
                continue;
            }
            let rel_est =
                relative_transform(model, estimated[i].theta(), estimated[j].theta())?;
            let d = &rel_est.theta() - &rel_true.theta();
            sum += d.dot(&d).sqrt() / denom;
            used += 1;
        }
    }
    if used == 0 {
        return Err(Error::InvalidArgument(
            "all view pairs had zero-norm true relative parameters".into(),
        ));
    }
    Ok(RegistrationError {
        sigma: sum / used as f64,
        pairs_used: used,
        pairs_skipped: skipped,
    })
}

/// Dense mean-squared error between two images of equal length.
pub fn mse(a: ArrayView1<'_, f64>, b: ArrayView1<'_, f64>) -> f64 {
    assert_eq!(a.len(), b.len());
    let d = &a - &b;
    d.dot(&d) / a.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn noise_bound_basics() {
        assert_eq!(noise_bound(0.0, 7), 0.0);
        // Homogeneity in sigma.
        let b1 = noise_bound(1.0, 64);
        let b2 = noise_bound(2.0, 64);
        assert!((b2 - 2.0 * b1).abs() < 1e-12);
        // Wilson-Hilferty at dof 1 is close to the exact 6.635.
        let q = chi_square_q99(1);
        assert!((q - 6.635).abs() / 6.635 < 0.02, "q99(1) = {q}");
    }

    #[test]
    fn snr_scales_as_expected() {
        let reference = array![1.0, 0.0, 0.0];
        // Error norm = 0.01 * |ref|: 40 dB.
        let recon = array![1.01, 0.0, 0.0];
        let s = snr_db(recon.view(), reference.view()).unwrap();
        assert!((s - 40.0).abs() < 1e-9);
        // Error energy equals reference energy: 0 dB.
        let recon = array![2.0, 0.0, 0.0];
        let s = snr_db(recon.view(), reference.view()).unwrap();
        assert!(s.abs() < 1e-9);
        // Exact match: cap.
        let s = snr_db(reference.view(), reference.view()).unwrap();
        assert_eq!(s, SNR_CAP_DB);
        // Zero reference errors.
        assert!(snr_db(recon.view(), array![0.0, 0.0, 0.0].view()).is_err());
    }

    #[test]
    fn relative_translation_example() {
        let rel = relative_transform(
            TransformModel::Translation,
            array![1.0, 0.0].view(),
            array![3.0, 0.0].view(),
        )
        .unwrap();
        assert_eq!(rel.theta().to_vec(), vec![-2.0, 0.0]);
    }

    #[test]
    fn relative_transform_of_equal_params_is_identity() {
        let cases = [
            (TransformModel::Translation, array![0.7, -1.2]),
            (TransformModel::ScaleTranslation, array![1.13, 2.0, -0.5]),
            (
                TransformModel::Affine,
                array![1.05, -0.08, 1.3, 0.06, 0.93, -0.4],
            ),
        ];
        for (model, theta) in cases {
            let rel = relative_transform(model, theta.view(), theta.view()).unwrap();
            let id = model.identity_params();
            for k in 0..model.param_count() {
                assert!(
                    (rel.theta()[k] - id[k]).abs() < 1e-12,
                    "{model:?} component {k}"
                );
            }
        }
    }

    #[test]
    fn composition_consistency_for_invertible_models() {
        let cases = [
            (
                TransformModel::ScaleTranslation,
                array![1.2, 3.0, -1.0],
                array![0.9, -2.0, 0.5],
            ),
            (
                TransformModel::Affine,
                array![1.1, 0.2, 3.0, -0.1, 0.95, 1.0],
                array![0.9, -0.05, -2.0, 0.08, 1.05, 0.3],
            ),
        ];
        for (model, ti, tj) in cases {
            let rel = relative_transform(model, ti.view(), tj.view()).unwrap();
            for u in [(-7.3, 2.0), (0.0, 0.0), (5.5, -4.25), (11.0, 9.0)] {
                let via_rel = model.map_point(rel.theta_slice(), u);
                let composed = {
                    let vi = model.map_point(ti.as_slice().unwrap(), u);
                    invert_point(model, tj.as_slice().unwrap(), vi).unwrap()
                };
                assert!(
                    (via_rel.0 - composed.0).abs() < 1e-10
                        && (via_rel.1 - composed.1).abs() < 1e-10,
                    "{model:?} at {u:?}: {via_rel:?} vs {composed:?}"
                );
            }
        }
    }

    #[test]
    fn registration_error_zero_for_exact_estimates() {
        let truth: Vec<TransformParams> = [(0.5, 1.0), (-1.0, 2.0), (2.0, -0.7)]
            .iter()
            .map(|&(a, b)| {
                TransformParams::new(TransformModel::Translation, array![a, b]).unwrap()
            })
            .collect();
        let err = registration_error(&truth, &truth).unwrap();
        assert_eq!(err.sigma, 0.0);
        assert_eq!(err.pairs_used, 6);
        assert_eq!(err.pairs_skipped, 0);
    }

    #[test]
    fn registration_error_skips_zero_norm_pairs() {
        // Two identical translations: their relative transform is zero.
        let truth: Vec<TransformParams> = [(1.0, 0.0), (1.0, 0.0), (3.0, 0.0)]
            .iter()
            .map(|&(a, b)| {
                TransformParams::new(TransformModel::Translation, array![a, b]).unwrap()
            })
            .collect();
        let err = registration_error(&truth, &truth).unwrap();
        assert_eq!(err.pairs_skipped, 2);
        assert_eq!(err.pairs_used, 4);
    }

    #[test]
    fn registration_error_is_permutation_invariant() {
        let truth: Vec<TransformParams> = [(0.5, 1.0), (-1.0, 2.0), (2.0, -0.7)]
            .iter()
            .map(|&(a, b)| {
                TransformParams::new(TransformModel::Translation, array![a, b]).unwrap()
            })
            .collect();
        let est: Vec<TransformParams> = [(0.6, 1.1), (-0.8, 2.2), (2.1, -0.5)]
            .iter()
            .map(|&(a, b)| {
                TransformParams::new(TransformModel::Translation, array![a, b]).unwrap()
            })
            .collect();
        let base = registration_error(&est, &truth).unwrap().sigma;
        let perm = [2usize, 0, 1];
        let est_p: Vec<_> = perm.iter().map(|&i| est[i].clone()).collect();
        let truth_p: Vec<_> = perm.iter().map(|&i| truth[i].clone()).collect();
        let permuted = registration_error(&est_p, &truth_p).unwrap().sigma;
        assert!((base - permuted).abs() < 1e-12);
    }

    #[test]
    fn homography_relative_fit_recovers_composition() {
        let model = TransformModel::HomographyApprox;
        let ti = array![1.02, -0.01, 1.5, 0.02, 0.98, -0.8, 0.002, -0.001];
        let tj = array![0.99, 0.02, -0.7, -0.01, 1.01, 0.4, -0.001, 0.002];
        let rel = relative_transform(model, ti.view(), tj.view()).unwrap();
        // The family is not closed under composition, so the fit carries a
        // model error quadratic in the perspective terms; with these
        // magnitudes that is a few 1e-3 over the lattice.
        for u in [(-8.0, 6.0), (0.0, 0.0), (4.0, -10.0)] {
            let composed = invert_point(
                model,
                tj.as_slice().unwrap(),
                model.map_point(ti.as_slice().unwrap(), u),
            )
            .unwrap();
            let fitted = model.map_point(rel.theta_slice(), u);
            assert!(
                (fitted.0 - composed.0).abs() < 2e-2 && (fitted.1 - composed.1).abs() < 2e-2,
                "at {u:?}: {fitted:?} vs {composed:?}"
            );
        }
        // With zero perspective terms the composition is exactly affine and
        // the fit must be near-exact.
        let ai = array![1.02, -0.01, 1.5, 0.02, 0.98, -0.8, 0.0, 0.0];
        let aj = array![0.99, 0.02, -0.7, -0.01, 1.01, 0.4, 0.0, 0.0];
        let rel = relative_transform(model, ai.view(), aj.view()).unwrap();
        for u in [(-8.0, 6.0), (4.0, -10.0)] {
            let composed = invert_point(
                model,
                aj.as_slice().unwrap(),
                model.map_point(ai.as_slice().unwrap(), u),
            )
            .unwrap();
            let fitted = model.map_point(rel.theta_slice(), u);
            assert!(
                (fitted.0 - composed.0).abs() < 1e-8 && (fitted.1 - composed.1).abs() < 1e-8,
                "affine case at {u:?}: {fitted:?} vs {composed:?}"
            );
        }
    }
}
