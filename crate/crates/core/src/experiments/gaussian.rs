//! Exact Gaussian sweep: spectra × dimensions × initial rotations, each
//! evolved layer by layer with the covariance-space block update.

use serde::{Deserialize, Serialize};

use super::{curve_records, estimate_rate, required_layers, run_parallel, ConvergenceRecord, RateMethod};
use crate::error::{Error, Result};
use crate::rng::RngSeed;
use crate::rotations::{alpha_grid, make_spectrum, HaarReflectors, Spectrum, SpectrumCase, DEFAULT_LAMBDA_MIN};
use crate::theory::ExactChain;

const STREAM_TAG: u64 = 0x6761_7573_73;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianExperimentConfig {
    pub dims: Vec<usize>,
    pub cases: Vec<SpectrumCase>,
    /// Geometric α values on each side of one for the deterministic cases.
    pub alphas_per_side: usize,
    /// Spectra drawn per (random case, dimension).
    pub random_draws: usize,
    /// Initial rotations per spectrum.
    pub rotations: usize,
    /// Layers simulated per run, as a multiple of `D`.
    pub layers_factor: f64,
    /// Depth at which the rate is measured, as a multiple of `D`; defaults to
    /// the full chain.
    pub measure_at: Option<f64>,
    pub rate_method: RateMethod,
    pub loss_ratio: f64,
    pub lambda_min: f64,
    pub seed: RngSeed,
    pub jobs: usize,
    /// Emit one row per layer in addition to the summary rows.
    pub per_layer_records: bool,
}

impl Default for GaussianExperimentConfig {
    fn default() -> Self {
        Self {
            dims: super::geometric_dims(10, 128, 10),
            cases: SpectrumCase::ALL.to_vec(),
            alphas_per_side: 8,
            random_draws: 8,
            rotations: 8,
            layers_factor: 10.0,
            measure_at: None,
            rate_method: RateMethod::LastTwo,
            loss_ratio: super::DEFAULT_LOSS_RATIO,
            lambda_min: DEFAULT_LAMBDA_MIN,
            seed: RngSeed(0),
            jobs: super::default_jobs(),
            per_layer_records: true,
        }
    }
}

/// Result of one (spectrum, rotation) run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianRun {
    pub case: SpectrumCase,
    pub dim: usize,
    /// α for the deterministic cases, `None` for random spectra.
    pub alpha: Option<f64>,
    /// Index of the spectrum within its (case, dimension) group.
    pub variant: usize,
    pub rotation: usize,
    /// Losses before the first block and after every block.
    pub losses: Vec<f64>,
    /// `log det S` of every block.
    pub log_det_s: Vec<f64>,
    /// Loss at the measurement depth.
    pub measured_loss: f64,
    pub gamma: f64,
    pub required_layers: f64,
}

impl GaussianRun {
    pub fn label(&self) -> String {
        match self.alpha {
            Some(a) => format!("{}:{}/alpha={a:?}", self.case.index(), self.case),
            None => format!("{}:{}/draw={}", self.case.index(), self.case, self.variant),
        }
    }

    pub fn records(&self, per_layer: bool) -> Vec<ConvergenceRecord> {
        curve_records(
            "gaussian",
            &self.label(),
            self.dim,
            self.rotation as u64,
            &self.losses,
            self.measured_loss,
            self.gamma,
            self.required_layers,
            per_layer,
        )
    }
}

struct Task {
    spectrum: Spectrum,
    variant: usize,
    rotation: usize,
}

/// Spectra of one (case, dimension) cell; rejected case-3 shifts are skipped.
fn spectra_for(config: &GaussianExperimentConfig, case: SpectrumCase, dim: usize) -> Result<Vec<Spectrum>> {
    if case.is_random() {
        return (0..config.random_draws)
            .map(|k| {
                let mut rng = config
                    .seed
                    .keyed(&[STREAM_TAG, 1, case.index() as u64, dim as u64, k as u64]);
                make_spectrum(case, dim, f64::NAN, config.lambda_min, &mut rng)
            })
            .collect();
    }
    let (below, above) = alpha_grid(config.alphas_per_side, config.lambda_min);
    let alphas: Vec<f64> = match case {
        SpectrumCase::HalfSmallHalfBig => below,
        _ => below.into_iter().chain(above).collect(),
    };
    let mut out = Vec::new();
    let mut unused = config.seed.rng();
    for a in alphas {
        match make_spectrum(case, dim, a, config.lambda_min, &mut unused) {
            Ok(s) => out.push(s),
            Err(Error::SpectrumRejected(_)) => {}
            Err(e) => return Err(e),
        }
    }
    Ok(out)
}

fn validate(config: &GaussianExperimentConfig) -> Result<()> {
    if config.dims.is_empty() || config.dims.iter().any(|&d| d < 2) {
        return Err(Error::InvalidDimension(config.dims.iter().copied().min().unwrap_or(0), 2));
    }
    if config.rotations == 0 {
        return Err(Error::OutOfRange("at least one rotation per spectrum is needed".into()));
    }
    if !(config.layers_factor > 0.0) {
        return Err(Error::OutOfRange(format!("layers factor {} must be positive", config.layers_factor)));
    }
    let measure = config.measure_at.unwrap_or(config.layers_factor);
    if !(measure > 0.0 && measure <= config.layers_factor) {
        return Err(Error::OutOfRange(format!(
            "measurement depth {measure} must lie in (0, layers factor]"
        )));
    }
    Ok(())
}

fn depth(factor: f64, dim: usize) -> usize {
    ((factor * dim as f64).round() as usize).max(2)
}

/// Runs the sweep and returns runs ordered by (dimension, case, spectrum,
/// rotation).
pub fn run_gaussian_experiment(config: &GaussianExperimentConfig) -> Result<Vec<GaussianRun>> {
    validate(config)?;
    let mut tasks = Vec::new();
    for &dim in &config.dims {
        for &case in &config.cases {
            for (variant, spectrum) in spectra_for(config, case, dim)?.into_iter().enumerate() {
                for rotation in 0..config.rotations {
                    tasks.push(Task {
                        spectrum: spectrum.clone(),
                        variant,
                        rotation,
                    });
                }
            }
        }
    }
    let results = run_parallel(&tasks, config.jobs, |t| run_one(config, t))?;
    results.into_iter().collect()
}

fn run_one(config: &GaussianExperimentConfig, task: &Task) -> Result<GaussianRun> {
    let spectrum = &task.spectrum;
    let dim = spectrum.dim();
    let case = spectrum.case();
    let mut rng = config.seed.keyed(&[
        STREAM_TAG,
        2,
        case.index() as u64,
        dim as u64,
        task.variant as u64,
        task.rotation as u64,
    ]);
    let layers = depth(config.layers_factor, dim);
    let measure = depth(config.measure_at.unwrap_or(config.layers_factor), dim).min(layers);

    let q0 = HaarReflectors::sample(dim, &mut rng)?;
    let mut chain = ExactChain::from_spectrum(spectrum, &q0)?;
    let mut losses = Vec::with_capacity(layers + 1);
    let mut log_det_s = Vec::with_capacity(layers);
    losses.push(chain.loss());
    for _ in 0..layers {
        let q = HaarReflectors::sample(dim, &mut rng)?;
        log_det_s.push(chain.step(&q)?);
        losses.push(chain.loss());
    }
    let measured = &losses[..=measure];
    let gamma = estimate_rate(measured, config.rate_method)?;
    let required = required_layers(gamma, config.loss_ratio)?;
    Ok(GaussianRun {
        case,
        dim,
        alpha: spectrum.alpha(),
        variant: task.variant,
        rotation: task.rotation,
        measured_loss: losses[measure],
        losses,
        log_det_s,
        gamma,
        required_layers: required,
    })
}
