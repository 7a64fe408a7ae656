//! Experiment driver: builds the measurement setup for the selected mode,
//! runs the solver, computes metrics and writes every artifact.

use std::sync::Arc;

use anyhow::{bail, Context, Result};
use ndarray::Array1;

use multiview::geometry::{Grid, Kernel, ParamBounds, TransformModel, TransformParams};
use multiview::metrics::{noise_bound, registration_error, snr_db};
use multiview::operators::{
    BlurDownsampleOp, IdentityOp, LinearOperator, MeasurementSet, SpreadSpectrumOp,
    StackedOperator,
};
use multiview::priors::{FrameOperator, Prior, Wavelet2d, WaveletFamily};
use multiview::solver::{
    auto_kappa, calibrate_gamma_x0, run_algorithm1, solve_bpdn, solve_group_sparse,
    IterationTrace, SceneEstimate, SolverConfig,
};

use crate::config::{ExperimentConfig, Mode, PriorKind};
use crate::pgm;
use crate::synth::{self, SyntheticScene};
use crate::{bicubic, subseed};

/// Everything a finished run produces, before metric lines are written.
pub struct ExperimentOutcome {
    pub estimate: SceneEstimate,
    pub trace: IterationTrace,
    pub scene: SyntheticScene,
    pub kappa: f64,
    pub gamma_x0: f64,
    /// `name=value` lines, in output order.
    pub metrics: Vec<(String, String)>,
}

fn metric(metrics: &mut Vec<(String, String)>, name: &str, value: f64) {
    metrics.push((name.to_string(), format!("{value:.9e}")));
}

fn build_operators(
    cfg: &ExperimentConfig,
    grid: Grid,
) -> Result<(Vec<Arc<dyn LinearOperator>>, usize)> {
    let n = grid.len();
    match cfg.mode {
        Mode::Align | Mode::Synth => {
            let ops: Vec<Arc<dyn LinearOperator>> = (0..cfg.views)
                .map(|_| Arc::new(IdentityOp::new(n)) as _)
                .collect();
            Ok((ops, n))
        }
        Mode::Cs => {
            let avail = SpreadSpectrumOp::available_rows(grid);
            let m = ((cfg.sampling_ratio * n as f64).round() as usize).clamp(1, avail);
            let ops: Result<Vec<Arc<dyn LinearOperator>>> = (0..cfg.views)
                .map(|j| {
                    let seed = subseed(cfg.seed, synth::STREAM_SENSING + 64 * (j as u64 + 1));
                    Ok(Arc::new(SpreadSpectrumOp::new(grid, m, seed)?) as _)
                })
                .collect();
            Ok((ops?, m))
        }
        Mode::Sr => {
            let op = BlurDownsampleOp::new(grid.side(), cfg.factor)?;
            let m = op.rows();
            let ops: Vec<Arc<dyn LinearOperator>> =
                (0..cfg.views).map(|_| Arc::new(op) as _).collect();
            Ok((ops, m))
        }
    }
}

fn model_bounds(cfg: &ExperimentConfig) -> Result<ParamBounds> {
    let radii: Vec<f64> = match cfg.model {
        TransformModel::Translation => vec![cfg.bound_translate; 2],
        TransformModel::ScaleTranslation => {
            vec![cfg.bound_scale, cfg.bound_translate, cfg.bound_translate]
        }
        TransformModel::Affine => vec![
            cfg.bound_scale,
            cfg.bound_linear,
            cfg.bound_translate,
            cfg.bound_linear,
            cfg.bound_scale,
            cfg.bound_translate,
        ],
        TransformModel::HomographyApprox => vec![
            cfg.bound_scale,
            cfg.bound_linear,
            cfg.bound_translate,
            cfg.bound_linear,
            cfg.bound_scale,
            cfg.bound_translate,
            cfg.bound_perspective,
            cfg.bound_perspective,
        ],
    };
    Ok(ParamBounds::around_identity(cfg.model, &radii)?)
}

fn build_prior(cfg: &ExperimentConfig, side: usize, blocks: usize) -> Result<(Prior, FrameOperator)> {
    let move_frame = FrameOperator::new(Wavelet2d::full(cfg.move_wavelet, side)?, blocks);
    let prior = match cfg.prior {
        PriorKind::L1Haar => Prior::l1_analysis(FrameOperator::new(
            Wavelet2d::full(WaveletFamily::Haar, side)?,
            blocks,
        )),
        PriorKind::L1Db8 => Prior::l1_analysis(FrameOperator::new(
            Wavelet2d::full(WaveletFamily::Daubechies8, side)?,
            blocks,
        )),
        PriorKind::Tv => Prior::isotropic_tv(side, blocks),
    };
    Ok((prior, move_frame))
}

fn solver_config(cfg: &ExperimentConfig) -> SolverConfig {
    SolverConfig {
        kappa: cfg.kappa,
        gamma_theta: cfg.gamma_theta,
        gamma_decay: cfg.gamma_decay,
        gamma_floor: cfg.gamma_floor,
        gamma_x0: cfg.gamma_x0.unwrap_or(20.0 * cfg.kappa),
        mu: cfg.mu,
        k_max: cfg.k_max,
        tol_x: cfg.tol_x,
        tol_theta: cfg.tol_theta,
        inner_max_iters: cfg.inner_max_iters,
        inner_tol: cfg.inner_tol,
        backtrack_cap: cfg.backtrack_cap,
        ..SolverConfig::default()
    }
}

/// Observed measurements: `y_j = A_j view_j + noise_j`.
pub fn measure(
    cfg: &ExperimentConfig,
    ops: &[Arc<dyn LinearOperator>],
    scene: &SyntheticScene,
) -> Result<MeasurementSet> {
    let ys: Vec<Array1<f64>> = ops
        .iter()
        .enumerate()
        .map(|(j, op)| {
            let clean = op.apply(scene.views[j].view());
            if cfg.sigma > 0.0 {
                &clean + &synth::measurement_noise(cfg, j, clean.len())
            } else {
                clean
            }
        })
        .collect();
    Ok(MeasurementSet::new(ys)?)
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutcome> {
    cfg.validate()?;
    if cfg.mode == Mode::Synth {
        bail!("synth mode only generates a scene; use `multiview synth`");
    }
    let grid = Grid::new(cfg.side)?;
    let scene = synth::synth_scene(cfg, grid)?;
    let (ops, m) = build_operators(cfg, grid)?;
    let y = measure(cfg, &ops, &scene)?;
    let mut bounds = vec![model_bounds(cfg)?; cfg.views];
    if cfg.reference_frame_first {
        let id = cfg.model.identity_params();
        bounds[0] = ParamBounds::new(cfg.model, id.clone(), id)?;
    }
    let (prior, move_frame) = build_prior(cfg, cfg.side, cfg.views + 1)?;

    let identity = TransformParams::identity(cfg.model);
    let make_stack = || -> multiview::Result<StackedOperator> {
        StackedOperator::new(
            grid,
            Kernel::KeysCubic,
            ops.clone(),
            vec![identity.clone(); cfg.views],
        )
    };

    let mut solver_cfg = solver_config(cfg);
    if cfg.gamma_x0.is_none() {
        if let Some(mult) = cfg.gamma_multiplier {
            solver_cfg.gamma_x0 = mult * cfg.kappa;
        } else {
            let stack = make_stack()?;
            solver_cfg.gamma_x0 =
                calibrate_gamma_x0(&stack, &y, &prior, &move_frame, &solver_cfg, (0.1, 0.2), 8);
        }
    }

    let mut metrics = Vec::new();
    let epsilon = if cfg.sigma > 0.0 {
        let eps = noise_bound(cfg.sigma, cfg.views * m);
        metric(&mut metrics, "epsilon", eps);
        Some(eps)
    } else {
        None
    };

    // Fidelity weight: fixed, or calibrated so the converged residual
    // matches the noise bound.
    if let (true, Some(eps)) = (cfg.auto_kappa, epsilon) {
        let probe_cfg = solver_cfg.clone();
        let (kappa, probes) = auto_kappa(eps, 1.0, 1e8, 20, |kappa| {
            let mut stack = make_stack()?;
            let mut c = probe_cfg.clone();
            c.kappa = kappa;
            let (_, trace) = run_algorithm1(&mut stack, &y, &prior, &move_frame, &bounds, &c)?;
            let last = trace.rows.last().map(|r| r.fidelity).unwrap_or(f64::NAN);
            Ok((last / kappa).sqrt())
        })?;
        metric(&mut metrics, "auto_kappa_probes", probes.len() as f64);
        solver_cfg.kappa = kappa;
    }

    let mut stacked = make_stack()?;
    let (estimate, trace) =
        run_algorithm1(&mut stacked, &y, &prior, &move_frame, &bounds, &solver_cfg)?;

    metric(&mut metrics, "kappa", solver_cfg.kappa);
    metric(&mut metrics, "gamma_x0", solver_cfg.gamma_x0);
    metric(&mut metrics, "iterations", trace.rows.len() as f64);
    metric(
        &mut metrics,
        "converged",
        if estimate.converged { 1.0 } else { 0.0 },
    );
    metric(&mut metrics, "objective", trace.last_objective());
    if let Some(last) = trace.rows.last() {
        metric(&mut metrics, "final_residual", (last.fidelity / solver_cfg.kappa).sqrt());
    }

    // Per-view reconstruction SNR against the clean synthetic views.
    let mut snr_sum = 0.0;
    for j in 0..cfg.views {
        let recon =
            stacked.warp(j).apply(estimate.images.background.view()) + &estimate.images.foregrounds[j];
        let snr = snr_db(recon.view(), scene.views[j].view())?;
        metric(&mut metrics, &format!("snr_view_{j}"), snr);
        snr_sum += snr;
    }
    metric(&mut metrics, "snr_mean", snr_sum / cfg.views as f64);

    if cfg.views >= 2 {
        let err = registration_error(&estimate.params, &scene.true_params)?;
        metric(&mut metrics, "registration_sigma", err.sigma);
        metric(&mut metrics, "registration_pairs_skipped", err.pairs_skipped as f64);
    }

    if cfg.mode == Mode::Sr {
        let recon_mse = multiview::metrics::mse(
            estimate.images.background.view(),
            scene.reference.view(),
        );
        metric(&mut metrics, "mse_recon", recon_mse);
        let low_side = cfg.side / cfg.factor;
        let mut best = f64::INFINITY;
        for j in 0..cfg.views {
            let up = bicubic::upsample(&y.view(j).to_owned(), low_side, cfg.factor);
            let m = multiview::metrics::mse(up.view(), scene.reference.view());
            best = best.min(m);
        }
        metric(&mut metrics, "mse_bicubic_best", best);
    }

    if cfg.mode == Mode::Cs && cfg.baselines {
        let wavelet = Wavelet2d::full(WaveletFamily::Haar, cfg.side)?;
        let ys: Vec<Array1<f64>> = (0..cfg.views).map(|j| y.view(j).to_owned()).collect();
        let eps = epsilon.unwrap_or(0.0);
        for (name, result) in [
            ("bpdn", solve_bpdn(&wavelet, &ops, &ys, eps, 20_000, 1e-8)?),
            (
                "group",
                solve_group_sparse(&wavelet, &ops, &ys, eps, 20_000, 1e-8)?,
            ),
        ] {
            let mut sum = 0.0;
            for j in 0..cfg.views {
                let snr = snr_db(result.images[j].view(), scene.views[j].view())?;
                metric(&mut metrics, &format!("snr_{name}_view_{j}"), snr);
                sum += snr;
            }
            metric(&mut metrics, &format!("snr_{name}_mean"), sum / cfg.views as f64);
        }
    }

    Ok(ExperimentOutcome {
        estimate,
        trace,
        scene,
        kappa: solver_cfg.kappa,
        gamma_x0: solver_cfg.gamma_x0,
        metrics,
    })
}

/// Writes every artifact of a finished run into the output directory.
pub fn write_artifacts(cfg: &ExperimentConfig, outcome: &ExperimentOutcome) -> Result<()> {
    std::fs::create_dir_all(&cfg.out)
        .with_context(|| format!("creating {}", cfg.out.display()))?;
    let grid_side = cfg.side;
    let to_unit = |img: &Array1<f64>| -> Vec<f64> { img.iter().map(|v| v / 255.0).collect() };

    pgm::write_pgm16(
        &cfg.out.join("background.pgm"),
        grid_side,
        grid_side,
        &to_unit(&outcome.estimate.images.background),
    )?;
    for (j, fg) in outcome.estimate.images.foregrounds.iter().enumerate() {
        pgm::write_pgm16(
            &cfg.out.join(format!("foreground_{j}.pgm")),
            grid_side,
            grid_side,
            &to_unit(fg),
        )?;
        // Registered overlay: the model's prediction of view j.
        let grid = Grid::new(grid_side)?;
        let warp = multiview::geometry::WarpOperator::new(
            grid,
            outcome.estimate.params[j].clone(),
            Kernel::KeysCubic,
        );
        let recon = warp.apply(outcome.estimate.images.background.view()) + fg;
        pgm::write_pgm16(
            &cfg.out.join(format!("recon_{j}.pgm")),
            grid_side,
            grid_side,
            &to_unit(&recon),
        )?;
    }

    let trace_path = cfg
        .trace
        .clone()
        .unwrap_or_else(|| cfg.out.join("trace.csv"));
    outcome.trace.write_csv(&trace_path)?;

    let mut lines = String::new();
    for (name, value) in &outcome.metrics {
        lines.push_str(name);
        lines.push('=');
        lines.push_str(value);
        lines.push('\n');
    }
    std::fs::write(cfg.out.join("metrics.txt"), lines)?;

    let mut params = String::new();
    for (j, p) in outcome.estimate.params.iter().enumerate() {
        params.push_str(&format!(
            "view_{j} = {}\n",
            p.theta()
                .iter()
                .map(|v| format!("{v:.12e}"))
                .collect::<Vec<_>>()
                .join(" ")
        ));
    }
    std::fs::write(cfg.out.join("params.txt"), params)?;
    Ok(())
}

/// `synth` mode output: the scene itself with its ground truth.
pub fn write_scene(cfg: &ExperimentConfig) -> Result<()> {
    let grid = Grid::new(cfg.side)?;
    let scene = synth::synth_scene(cfg, grid)?;
    std::fs::create_dir_all(&cfg.out)?;
    let to_unit = |img: &Array1<f64>| -> Vec<f64> { img.iter().map(|v| v / 255.0).collect() };
    pgm::write_pgm16(
        &cfg.out.join("reference.pgm"),
        cfg.side,
        cfg.side,
        &to_unit(&scene.reference),
    )?;
    let mut truth = String::new();
    for j in 0..cfg.views {
        pgm::write_pgm16(
            &cfg.out.join(format!("view_{j}.pgm")),
            cfg.side,
            cfg.side,
            &to_unit(&scene.views[j]),
        )?;
        truth.push_str(&format!(
            "view_{j} = {}\n",
            scene.true_params[j]
                .theta()
                .iter()
                .map(|v| format!("{v:.12e}"))
                .collect::<Vec<_>>()
                .join(" ")
        ));
    }
    std::fs::write(cfg.out.join("truth.txt"), truth)?;
    Ok(())
}
