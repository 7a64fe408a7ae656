//! Calibration of the fidelity weight and of the initial cost-to-move
//! weight.

use crate::error::{Error, Result};
use crate::operators::{LinearOperator, MeasurementSet, StackedOperator};
use crate::priors::{FrameOperator, Prior};

use super::{step1_image_update, SolverConfig};
use ndarray::Array1;

/// One probe of the residual as a function of `kappa`.
#[derive(Debug, Clone, Copy)]
pub struct KappaProbe {
    pub kappa: f64,
    pub residual: f64,
}

/// Pick `kappa` so that the converged residual `|A(theta*) x* - y|_2`
/// lands in `[0.99 eps, 1.01 eps]`, by bisection on `ln kappa`.
///
/// `run` evaluates a full probe run and returns its converged residual; the
/// residual is non-increasing in `kappa`. When even `kappa_max` leaves the
/// residual above the band (the target is unattainable, e.g. noiseless data
/// with a tiny `eps`), `kappa_max` is returned; symmetrically `kappa_min`
/// is returned when the weakest weight already over-fits. Exhausting
/// `max_probes` during bisection is an error.
pub fn auto_kappa<F>(
    epsilon: f64,
    kappa_min: f64,
    kappa_max: f64,
    max_probes: usize,
    mut run: F,
) -> Result<(f64, Vec<KappaProbe>)>
where
    F: FnMut(f64) -> Result<f64>,
{
    if epsilon <= 0.0 || kappa_min <= 0.0 || kappa_min >= kappa_max {
        return Err(Error::InvalidArgument(format!(
            "auto_kappa: need epsilon > 0 and 0 < kappa_min < kappa_max, got \
             eps={epsilon}, range [{kappa_min}, {kappa_max}]"
        )));
    }
    let band = (0.99 * epsilon, 1.01 * epsilon);
    let mut probes = Vec::new();

    let r_hi = run(kappa_max)?;
    probes.push(KappaProbe {
        kappa: kappa_max,
        residual: r_hi,
    });
    if r_hi >= band.0 {
        // In band, or unattainable even at the strongest weight.
        return Ok((kappa_max, probes));
    }

    let r_lo = run(kappa_min)?;
    probes.push(KappaProbe {
        kappa: kappa_min,
        residual: r_lo,
    });
    if r_lo <= band.1 {
        return Ok((kappa_min, probes));
    }

    // r(kappa_min) > 1.01 eps > 0.99 eps > r(kappa_max): bisect.
    let (mut lo, mut hi) = (kappa_min, kappa_max);
    while probes.len() < max_probes {
        let mid = (0.5 * (lo.ln() + hi.ln())).exp();
        let r = run(mid)?;
        probes.push(KappaProbe {
            kappa: mid,
            residual: r,
        });
        if r >= band.0 && r <= band.1 {
            return Ok((mid, probes));
        }
        if r > band.1 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Err(Error::BracketNotFound {
        probes: probes.len(),
    })
}

/// Search for an initial cost-to-move weight such that the relative
/// residual after the first image update lands in `target`
/// (`[0.1, 0.2]` by default usage). Returns the best candidate found
/// within `max_probes` first-step probes.
pub fn calibrate_gamma_x0(
    stacked: &StackedOperator,
    y: &MeasurementSet,
    prior: &Prior,
    move_frame: &FrameOperator,
    config: &SolverConfig,
    target: (f64, f64),
    max_probes: usize,
) -> f64 {
    let y_cat = y.concatenated();
    let y_norm_sq = y_cat.dot(&y_cat);
    if y_norm_sq == 0.0 {
        return config.gamma_x0;
    }
    let x0: Array1<f64> = Array1::zeros(stacked.cols());
    let objective_zero = {
        let r = stacked.apply(x0.view()) - &y_cat;
        prior.value(x0.view()) + config.kappa * r.dot(&r)
    };

    let probe = |gamma: f64| -> f64 {
        let mut state = super::Step1State::new(prior);
        let out = step1_image_update(
            x0.view(),
            stacked,
            y_cat.view(),
            prior,
            move_frame,
            gamma,
            objective_zero,
            config,
            &mut state,
        );
        (out.fidelity / config.kappa) / y_norm_sq
    };

    let mut gamma = config.gamma_x0;
    let mut below: Option<f64> = None; // rho < target.0 (gamma too small)
    let mut above: Option<f64> = None; // rho > target.1 (gamma too large)
    let mut best = (gamma, f64::INFINITY);
    for _ in 0..max_probes {
        let rho = probe(gamma);
        let dist = if rho < target.0 {
            target.0 - rho
        } else if rho > target.1 {
            rho - target.1
        } else {
            0.0
        };
        if dist < best.1 {
            best = (gamma, dist);
        }
        if dist == 0.0 {
            return gamma;
        }
        if rho < target.0 {
            below = Some(gamma);
            gamma = match above {
                Some(a) => (0.5 * (gamma.ln() + a.ln())).exp(),
                None => gamma * 4.0,
            };
        } else {
            above = Some(gamma);
            gamma = match below {
                Some(b) => (0.5 * (gamma.ln() + b.ln())).exp(),
                None => gamma / 4.0,
            };
        }
    }
    best.0
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn auto_kappa_bisects_into_band() {
        // Synthetic monotone residual: r(kappa) = 10 / sqrt(kappa).
        let eps = 0.05;
        let (kappa, probes) =
            auto_kappa(eps, 1.0, 1e8, 20, |k| Ok(10.0 / k.sqrt())).unwrap();
        let r = 10.0 / kappa.sqrt();
        assert!(r >= 0.99 * eps && r <= 1.01 * eps, "missed band: {r}");
        assert!(probes.len() <= 20);
    }

    #[test]
    fn auto_kappa_clamps_to_max_when_unattainable() {
        // Residual floored above the band no matter the weight.
        let (kappa, _) = auto_kappa(1e-9, 1.0, 1e6, 20, |_| Ok(0.5)).unwrap();
        assert_eq!(kappa, 1e6);
    }

    #[test]
    fn auto_kappa_clamps_to_min_when_overfitting() {
        let (kappa, _) = auto_kappa(1.0, 1.0, 1e6, 20, |_| Ok(1e-6)).unwrap();
        assert_eq!(kappa, 1.0);
    }

    #[test]
    fn auto_kappa_rejects_bad_arguments() {
        assert!(auto_kappa(0.0, 1.0, 10.0, 5, |_| Ok(1.0)).is_err());
        assert!(auto_kappa(1.0, 10.0, 1.0, 5, |_| Ok(1.0)).is_err());
    }
}
