//! Measurement protocol and the scaling experiments.
//!
//! A run produces a loss curve; the geometric rate `γ` fitted to it predicts
//! how many layers shrink the loss by a fixed ratio. Runs are independent
//! tuples executed on a work pool, each with its own keyed RNG stream, and
//! results are returned in tuple order so output never depends on scheduling.

mod gaussian;
mod spurious;
mod toy;

pub use gaussian::{run_gaussian_experiment, GaussianExperimentConfig, GaussianRun};
pub use spurious::{
    find_spurious_projection, random_baseline, standard_normal_f32, w2_mean_square, ProjectionData,
    SpuriousConfig, SpuriousResult,
};
pub use toy::{run_toy_experiment, EntropyMethod, ToyExperimentConfig, ToyRun};

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats;

/// `e⁻¹`: the default loss ratio at which required layers are reported.
pub const DEFAULT_LOSS_RATIO: f64 = 0.367_879_441_171_442_33;

/// How the geometric rate is fitted to a loss curve.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RateMethod {
    /// `(L_end / L_0)^{1/(len−1)}`.
    Full,
    /// `√(L_end / L_{end−2})`.
    LastTwo,
}

pub fn estimate_rate(curve: &[f64], method: RateMethod) -> Result<f64> {
    let n = curve.len();
    let (first, steps) = match method {
        RateMethod::Full => {
            if n < 2 {
                return Err(Error::TooFewSamples { needed: 2, got: n });
            }
            (curve[0], (n - 1) as f64)
        }
        RateMethod::LastTwo => {
            if n < 3 {
                return Err(Error::TooFewSamples { needed: 3, got: n });
            }
            (curve[n - 3], 2.0)
        }
    };
    let last = curve[n - 1];
    if !(first > 0.0 && last > 0.0) {
        return Err(Error::UndefinedRate);
    }
    Ok((last / first).powf(1.0 / steps))
}

/// `log(ratio) / log γ`; infinite when `γ ≥ 1`.
pub fn required_layers(gamma: f64, loss_ratio: f64) -> Result<f64> {
    if !(loss_ratio > 0.0 && loss_ratio < 1.0) {
        return Err(Error::OutOfRange(format!("loss ratio {loss_ratio} not in (0, 1)")));
    }
    if !(gamma > 0.0) {
        return Err(Error::UndefinedRate);
    }
    if gamma >= 1.0 {
        return Ok(f64::INFINITY);
    }
    Ok(loss_ratio.ln() / gamma.ln())
}

/// One CSV row: a loss at one layer of one run, or (with `layer = −1`) the
/// run's fitted rate and required layers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRecord {
    pub experiment: String,
    pub case: String,
    pub dim: usize,
    pub seed: u64,
    pub layer: i64,
    pub loss: f64,
    pub gamma: Option<f64>,
    pub required_layers: Option<f64>,
}

pub const CSV_HEADER: &str = "experiment,case,dim,seed,layer,loss,gamma,required_layers";

/// Shortest decimal that parses back to the same `f64`.
pub fn format_f64(x: f64) -> String {
    format!("{x:?}")
}

impl ConvergenceRecord {
    pub fn is_summary(&self) -> bool {
        self.layer < 0
    }

    pub fn to_csv_line(&self) -> String {
        let opt = |v: Option<f64>| v.map(format_f64).unwrap_or_default();
        format!(
            "{},{},{},{},{},{},{},{}",
            self.experiment,
            self.case,
            self.dim,
            self.seed,
            self.layer,
            format_f64(self.loss),
            opt(self.gamma),
            opt(self.required_layers)
        )
    }
}

/// Per-layer rows `0..curve.len()` followed by a summary row.
pub fn curve_records(
    experiment: &str,
    case: &str,
    dim: usize,
    seed: u64,
    curve: &[f64],
    summary_loss: f64,
    gamma: f64,
    required: f64,
    per_layer: bool,
) -> Vec<ConvergenceRecord> {
    let base = |layer: i64, loss: f64, gamma: Option<f64>, required_layers: Option<f64>| ConvergenceRecord {
        experiment: experiment.to_string(),
        case: case.to_string(),
        dim,
        seed,
        layer,
        loss,
        gamma,
        required_layers,
    };
    let mut out = Vec::with_capacity(if per_layer { curve.len() + 1 } else { 1 });
    if per_layer {
        out.extend(curve.iter().enumerate().map(|(l, &loss)| base(l as i64, loss, None, None)));
    }
    out.push(base(-1, summary_loss, Some(gamma), Some(required)));
    out
}

pub fn write_csv<W: Write>(records: &[ConvergenceRecord], mut w: W) -> Result<()> {
    writeln!(w, "{CSV_HEADER}")?;
    for r in records {
        writeln!(w, "{}", r.to_csv_line())?;
    }
    Ok(())
}

/// Power law `required ≈ e^a D^b` fitted by least squares on per-dimension
/// medians in log-log space.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingFit {
    pub exponent: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

impl ScalingFit {
    pub fn predict(&self, dim: f64) -> f64 {
        (self.intercept + self.exponent * dim.ln()).exp()
    }
}

/// Groups `(dim, required_layers)` pairs by dimension and fits the median of
/// each group. Non-finite values are dropped.
pub fn fit_scaling_exponent(points: &[(usize, f64)]) -> Result<ScalingFit> {
    let groups = medians_by_dim(points);
    if groups.len() < 2 {
        return Err(Error::TooFewSamples {
            needed: 2,
            got: groups.len(),
        });
    }
    if groups.iter().any(|&(_, m)| !(m > 0.0)) {
        return Err(Error::OutOfRange("required layers must be positive for a log-log fit".into()));
    }
    let xs: Vec<f64> = groups.iter().map(|&(d, _)| (d as f64).ln()).collect();
    let ys: Vec<f64> = groups.iter().map(|&(_, m)| m.ln()).collect();
    let (exponent, intercept, r_squared) = stats::linear_fit(&xs, &ys);
    Ok(ScalingFit {
        exponent,
        intercept,
        r_squared,
    })
}

/// Median of the finite values per dimension, ascending in dimension.
pub fn medians_by_dim(points: &[(usize, f64)]) -> Vec<(usize, f64)> {
    let mut dims: Vec<usize> = points.iter().map(|p| p.0).collect();
    dims.sort_unstable();
    dims.dedup();
    dims.into_iter()
        .filter_map(|d| {
            let vals: Vec<f64> = points
                .iter()
                .filter(|p| p.0 == d && p.1.is_finite())
                .map(|p| p.1)
                .collect();
            (!vals.is_empty()).then(|| (d, stats::median(&vals)))
        })
        .collect()
}

/// Fits from summary records.
pub fn fit_records(records: &[ConvergenceRecord]) -> Result<ScalingFit> {
    let points: Vec<(usize, f64)> = records
        .iter()
        .filter(|r| r.is_summary())
        .filter_map(|r| r.required_layers.map(|v| (r.dim, v)))
        .collect();
    fit_scaling_exponent(&points)
}

/// Runs `f` over `items` on a pool of `jobs` threads, returning results in
/// input order.
pub fn run_parallel<T, U, F>(items: &[T], jobs: usize, f: F) -> Result<Vec<U>>
where
    T: Sync,
    U: Send,
    F: Fn(&T) -> U + Sync + Send,
{
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::ThreadPool(e.to_string()))?;
    Ok(pool.install(|| items.par_iter().map(&f).collect()))
}

/// Default worker count: the available cores.
pub fn default_jobs() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

/// `count` geometrically spaced integers from `lo` to `hi` inclusive.
pub fn geometric_dims(lo: usize, hi: usize, count: usize) -> Vec<usize> {
    if count <= 1 {
        return vec![lo];
    }
    let (a, b) = ((lo as f64).ln(), (hi as f64).ln());
    let mut v: Vec<usize> = (0..count)
        .map(|k| (a + (b - a) * k as f64 / (count - 1) as f64).exp().round() as usize)
        .collect();
    v.dedup();
    v
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rate_examples() {
        assert!((estimate_rate(&[1.0, 0.5, 0.25], RateMethod::Full).unwrap() - 0.5).abs() < 1e-15);
        let g = estimate_rate(&[1.0, 0.9, 0.5, 0.25], RateMethod::LastTwo).unwrap();
        assert!((g - (0.25f64 / 0.9).sqrt()).abs() < 1e-15);
        assert_eq!(estimate_rate(&[2.0, 2.0, 2.0], RateMethod::Full).unwrap(), 1.0);
        assert!(matches!(
            estimate_rate(&[1.0, 0.5, 0.0], RateMethod::LastTwo),
            Err(Error::UndefinedRate)
        ));
    }

    #[test]
    fn required_layer_examples() {
        let e = (-1.0f64).exp();
        assert!((required_layers(e, e).unwrap() - 1.0).abs() < 1e-14);
        assert!((required_layers(5.0 / 6.0, e).unwrap() - 5.484_814).abs() < 1e-5);
        assert_eq!(required_layers(1.0, e).unwrap(), f64::INFINITY);
    }

    #[test]
    fn dims_grid() {
        let d = geometric_dims(10, 128, 10);
        assert_eq!(d.len(), 10);
        assert_eq!(d[0], 10);
        assert_eq!(d[9], 128);
        assert!(d.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn csv_line_format() {
        let r = ConvergenceRecord {
            experiment: "x".into(),
            case: "c".into(),
            dim: 4,
            seed: 1,
            layer: -1,
            loss: 1e-7,
            gamma: Some(0.5),
            required_layers: None,
        };
        assert_eq!(r.to_csv_line(), "x,c,4,1,-1,1e-7,0.5,");
    }
}
