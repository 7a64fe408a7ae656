//! Experiment configuration: flat `key = value` files with CLI overrides.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use multiview::geometry::TransformModel;
use multiview::priors::WaveletFamily;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Synth,
    Align,
    Cs,
    Sr,
}

impl Mode {
    pub fn name(&self) -> &'static str {
        match self {
            Mode::Synth => "synth",
            Mode::Align => "align",
            Mode::Cs => "cs",
            Mode::Sr => "sr",
        }
    }
}

impl std::str::FromStr for Mode {
    type Err = anyhow::Error;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "synth" => Mode::Synth,
            "align" => Mode::Align,
            "cs" => Mode::Cs,
            "sr" => Mode::Sr,
            other => bail!("unknown mode {other:?}"),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PriorKind {
    L1Haar,
    L1Db8,
    Tv,
}

/// All experiment knobs. Transform parameters are drawn uniformly from
/// intervals of the configured widths (`delta_*`), and constrained during
/// recovery to boxes of the configured radii (`bound_*`) around identity.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub mode: Mode,
    pub side: usize,
    pub views: usize,
    pub model: TransformModel,

    pub delta_tx: f64,
    pub delta_ty: f64,
    pub delta_scale: f64,
    pub delta_linear: f64,
    pub delta_perspective: f64,

    pub bound_translate: f64,
    pub bound_scale: f64,
    pub bound_linear: f64,
    pub bound_perspective: f64,

    pub occlusion_count: usize,
    pub occlusion_size: f64,

    pub sigma: f64,
    pub sampling_ratio: f64,
    pub factor: usize,

    pub prior: PriorKind,
    pub move_wavelet: WaveletFamily,

    pub kappa: f64,
    pub auto_kappa: bool,
    pub gamma_theta: f64,
    pub gamma_decay: f64,
    /// Schedule floor; larger values freeze the background/foreground
    /// split earlier once the data terms are satisfied.
    pub gamma_floor: f64,
    /// Explicit initial cost-to-move weight; `None` selects it so the
    /// first-step relative residual lands in [0.1, 0.2].
    pub gamma_x0: Option<f64>,
    /// Alternative to `gamma_x0`: a fixed multiple of kappa.
    pub gamma_multiplier: Option<f64>,
    pub mu: f64,
    pub k_max: usize,
    pub tol_x: f64,
    pub tol_theta: f64,
    pub inner_max_iters: usize,
    pub inner_tol: f64,
    pub backtrack_cap: u32,

    pub baselines: bool,
    /// Treat the first view as the reference frame: its true transform is
    /// the identity and its parameters stay pinned there during recovery,
    /// which fixes the background's coordinate gauge.
    pub reference_frame_first: bool,
    pub seed: u64,
    pub reference: Option<PathBuf>,
    pub out: PathBuf,
    pub trace: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn default_for(mode: Mode) -> Self {
        let mut cfg = Self {
            mode,
            side: 64,
            views: 5,
            model: TransformModel::ScaleTranslation,
            delta_tx: 8.0,
            delta_ty: 8.0,
            delta_scale: 0.0,
            delta_linear: 0.0,
            delta_perspective: 0.0,
            bound_translate: 20.0,
            bound_scale: 0.2,
            bound_linear: 0.2,
            bound_perspective: 0.01,
            occlusion_count: 0,
            occlusion_size: 0.15,
            sigma: 0.0,
            sampling_ratio: 0.3,
            factor: 2,
            prior: PriorKind::L1Db8,
            move_wavelet: WaveletFamily::Daubechies8,
            kappa: 100.0,
            auto_kappa: false,
            gamma_theta: 0.1,
            gamma_decay: 0.9,
            gamma_floor: 0.1,
            gamma_x0: None,
            gamma_multiplier: None,
            mu: 1e-10,
            k_max: 200,
            tol_x: 1e-5,
            tol_theta: 1e-6,
            inner_max_iters: 500,
            inner_tol: 1e-8,
            backtrack_cap: 60,
            baselines: false,
            reference_frame_first: false,
            seed: 1,
            reference: None,
            out: PathBuf::from("out"),
            trace: None,
        };
        match mode {
            Mode::Align | Mode::Synth => {}
            Mode::Cs => {
                cfg.views = 3;
                cfg.model = TransformModel::Translation;
                cfg.delta_tx = 12.0;
                cfg.delta_ty = 12.0;
                cfg.prior = PriorKind::L1Haar;
                cfg.move_wavelet = WaveletFamily::Haar;
            }
            Mode::Sr => {
                cfg.views = 16;
                cfg.model = TransformModel::Translation;
                cfg.delta_tx = 2.0;
                cfg.delta_ty = 2.0;
                cfg.bound_translate = 4.0;
                cfg.prior = PriorKind::Tv;
                cfg.move_wavelet = WaveletFamily::Haar;
                cfg.reference_frame_first = true;
            }
        }
        cfg
    }

    /// Parse a flat `key = value` file over the mode's defaults. Unknown
    /// keys are errors.
    pub fn load(mode: Mode, path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let mut cfg = Self::default_for(mode);
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .with_context(|| format!("line {}: expected key = value", lineno + 1))?;
            cfg.set(key.trim(), value.trim())
                .with_context(|| format!("line {}", lineno + 1))?;
        }
        Ok(cfg)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T>
        where
            T::Err: std::fmt::Display,
        {
            value
                .parse()
                .map_err(|e| anyhow::anyhow!("{key}: bad value {value:?}: {e}"))
        }
        match key {
            "mode" => self.mode = parse(key, value)?,
            "side" => self.side = parse(key, value)?,
            "views" => self.views = parse(key, value)?,
            "model" => {
                self.model = match value {
                    "translation" => TransformModel::Translation,
                    "scale_translation" => TransformModel::ScaleTranslation,
                    "affine" => TransformModel::Affine,
                    "homography" => TransformModel::HomographyApprox,
                    other => bail!("model: unknown value {other:?}"),
                }
            }
            "delta_tx" => self.delta_tx = parse(key, value)?,
            "delta_ty" => self.delta_ty = parse(key, value)?,
            "delta_scale" => self.delta_scale = parse(key, value)?,
            "delta_linear" => self.delta_linear = parse(key, value)?,
            "delta_perspective" => self.delta_perspective = parse(key, value)?,
            "bound_translate" => self.bound_translate = parse(key, value)?,
            "bound_scale" => self.bound_scale = parse(key, value)?,
            "bound_linear" => self.bound_linear = parse(key, value)?,
            "bound_perspective" => self.bound_perspective = parse(key, value)?,
            "occlusion_count" => self.occlusion_count = parse(key, value)?,
            "occlusion_size" => self.occlusion_size = parse(key, value)?,
            "sigma" => self.sigma = parse(key, value)?,
            "sampling_ratio" => self.sampling_ratio = parse(key, value)?,
            "factor" => self.factor = parse(key, value)?,
            "prior" => {
                self.prior = match value {
                    "l1_haar" => PriorKind::L1Haar,
                    "l1_db8" => PriorKind::L1Db8,
                    "tv" => PriorKind::Tv,
                    other => bail!("prior: unknown value {other:?}"),
                }
            }
            "move_wavelet" => {
                self.move_wavelet = match value {
                    "haar" => WaveletFamily::Haar,
                    "db8" => WaveletFamily::Daubechies8,
                    other => bail!("move_wavelet: unknown value {other:?}"),
                }
            }
            "kappa" => self.kappa = parse(key, value)?,
            "auto_kappa" => self.auto_kappa = parse(key, value)?,
            "gamma_theta" => self.gamma_theta = parse(key, value)?,
            "gamma_decay" => self.gamma_decay = parse(key, value)?,
            "gamma_floor" => self.gamma_floor = parse(key, value)?,
            "gamma_x0" => self.gamma_x0 = Some(parse(key, value)?),
            "gamma_multiplier" => self.gamma_multiplier = Some(parse(key, value)?),
            "mu" => self.mu = parse(key, value)?,
            "k_max" => self.k_max = parse(key, value)?,
            "tol_x" => self.tol_x = parse(key, value)?,
            "tol_theta" => self.tol_theta = parse(key, value)?,
            "inner_max_iters" => self.inner_max_iters = parse(key, value)?,
            "inner_tol" => self.inner_tol = parse(key, value)?,
            "backtrack_cap" => self.backtrack_cap = parse(key, value)?,
            "baselines" => self.baselines = parse(key, value)?,
            "reference_frame_first" => self.reference_frame_first = parse(key, value)?,
            "seed" => self.seed = parse(key, value)?,
            "reference" => self.reference = Some(PathBuf::from(value)),
            "out" => self.out = PathBuf::from(value),
            "trace" => self.trace = Some(PathBuf::from(value)),
            other => bail!("unknown config key {other:?}"),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if self.side < 8 || self.side % 2 != 0 {
            bail!("side must be even and >= 8, got {}", self.side);
        }
        if !self.side.is_power_of_two() {
            bail!("side must be a power of two for the wavelet frames");
        }
        if self.views == 0 {
            bail!("need at least one view");
        }
        if self.delta_tx / 2.0 > self.bound_translate || self.delta_ty / 2.0 > self.bound_translate
        {
            bail!("translation draw interval exceeds bounds");
        }
        if self.delta_scale / 2.0 > self.bound_scale {
            bail!("scale draw interval exceeds bounds");
        }
        if self.delta_linear / 2.0 > self.bound_linear
            || self.delta_perspective / 2.0 > self.bound_perspective
        {
            bail!("linear/perspective draw interval exceeds bounds");
        }
        if self.mode == Mode::Cs && !(0.0 < self.sampling_ratio && self.sampling_ratio <= 1.0) {
            bail!("sampling_ratio must lie in (0, 1]");
        }
        if self.mode == Mode::Sr && (self.factor == 0 || self.side % self.factor != 0) {
            bail!("factor must divide side");
        }
        Ok(())
    }
}
