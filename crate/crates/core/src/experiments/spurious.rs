//! Search for a direction along which a finite standard-normal sample looks
//! like a given bimodal distribution.
//!
//! The objective is the one-dimensional squared Wasserstein distance between
//! the projected sample and sorted target samples, `(1/N) Σ (p_(i) − y_i)²`.
//! Sorting is piecewise constant in `w`, so each gradient is taken with the
//! current sorting permutation held fixed.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::distributions::{random_unit_vector, BimodalTarget};
use crate::error::{Error, Result};
use crate::stats;

const CHUNK_ROWS: usize = 1024;

/// Row-major single-precision sample matrix. At the full experiment size
/// (60000 × 3072) this is about 0.7 GB.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionData {
    n: usize,
    dim: usize,
    values: Vec<f32>,
}

impl ProjectionData {
    pub fn new(n: usize, dim: usize, values: Vec<f32>) -> Result<Self> {
        if values.len() != n * dim {
            return Err(Error::DimensionMismatch {
                expected: n * dim,
                actual: values.len(),
            });
        }
        if n == 0 || dim == 0 {
            return Err(Error::InvalidDimension(0, 1));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("projection data"));
        }
        Ok(Self { n, dim, values })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    /// `X w` with double-precision accumulation.
    pub fn project(&self, w: &[f64]) -> Vec<f64> {
        let dim = self.dim;
        self.values
            .par_chunks(CHUNK_ROWS * dim)
            .flat_map_iter(|chunk| chunk.chunks_exact(dim).map(|row| dot(row, w)))
            .collect()
    }

    /// `Xᵀ r`; chunk sums are combined in a fixed order.
    fn transpose_mul(&self, r: &[f64]) -> Vec<f64> {
        let dim = self.dim;
        let partials: Vec<Vec<f64>> = self
            .values
            .par_chunks(CHUNK_ROWS * dim)
            .zip(r.par_chunks(CHUNK_ROWS))
            .map(|(chunk, rs)| {
                let mut acc = vec![0.0; dim];
                for (row, &ri) in chunk.chunks_exact(dim).zip(rs) {
                    for (a, &x) in acc.iter_mut().zip(row) {
                        *a += ri * x as f64;
                    }
                }
                acc
            })
            .collect();
        let mut out = vec![0.0; dim];
        for p in partials {
            for (o, v) in out.iter_mut().zip(p) {
                *o += v;
            }
        }
        out
    }
}

fn dot(row: &[f32], w: &[f64]) -> f64 {
    row.iter().zip(w).map(|(&x, &wi)| x as f64 * wi).sum()
}

/// `n × dim` i.i.d. standard normals.
pub fn standard_normal_f32<R: Rng + ?Sized>(n: usize, dim: usize, rng: &mut R) -> Result<ProjectionData> {
    let values = (0..n * dim)
        .map(|_| rng.sample::<f64, _>(StandardNormal) as f32)
        .collect();
    ProjectionData::new(n, dim, values)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpuriousConfig {
    pub steps: usize,
    pub lr: f64,
    pub momentum: f64,
}

impl Default for SpuriousConfig {
    fn default() -> Self {
        Self {
            steps: 64,
            lr: 10.0,
            momentum: 0.8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpuriousResult {
    pub w: Vec<f64>,
    /// Mean squared sorted mismatch at the initial direction.
    pub w2_initial: f64,
    pub w2_final: f64,
    /// Mean squared mismatch before every step and after the last one.
    pub trajectory: Vec<f64>,
    /// Unnormalized `Σ (p_(i) − y_i)²` at the final direction.
    pub w2_final_sum: f64,
}

impl SpuriousResult {
    /// Root of the per-sample mean, the alternative scale for reporting.
    pub fn w2_final_rms(&self) -> f64 {
        self.w2_final.sqrt()
    }
}

/// Mean squared mismatch between sorted projections and sorted `y`.
pub fn w2_mean_square(data: &ProjectionData, w: &[f64], y_sorted: &[f64]) -> Result<f64> {
    check_target(data, y_sorted)?;
    let mut p = data.project(w);
    p.sort_unstable_by(f64::total_cmp);
    Ok(p.iter().zip(y_sorted).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / data.n() as f64)
}

fn check_target(data: &ProjectionData, y: &[f64]) -> Result<()> {
    if y.len() != data.n() {
        return Err(Error::DimensionMismatch {
            expected: data.n(),
            actual: y.len(),
        });
    }
    Ok(())
}

/// Median of [`w2_mean_square`] over `count` random unit directions.
pub fn random_baseline<R: Rng + ?Sized>(
    data: &ProjectionData,
    y_sorted: &[f64],
    count: usize,
    rng: &mut R,
) -> Result<f64> {
    let values = (0..count)
        .map(|_| {
            let w = random_unit_vector(data.dim(), rng);
            w2_mean_square(data, w.as_slice(), y_sorted)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(stats::median(&values))
}

/// Samples sorted targets and a random start from `rng`, then optimizes.
pub fn find_spurious_projection<R: Rng + ?Sized>(
    data: &ProjectionData,
    target: &BimodalTarget,
    config: &SpuriousConfig,
    rng: &mut R,
) -> Result<(SpuriousResult, Vec<f64>)> {
    let y = target.sample_sorted(data.n(), rng);
    let w0 = random_unit_vector(data.dim(), rng);
    let result = optimize_projection(data, &y, w0.as_slice(), config)?;
    Ok((result, y))
}

/// Momentum gradient descent on the unit sphere: `v ← μv + ∇`, `w ← w − ηv`,
/// then `w ← w/‖w‖`.
pub fn optimize_projection(
    data: &ProjectionData,
    y_sorted: &[f64],
    w0: &[f64],
    config: &SpuriousConfig,
) -> Result<SpuriousResult> {
    check_target(data, y_sorted)?;
    if w0.len() != data.dim() {
        return Err(Error::DimensionMismatch {
            expected: data.dim(),
            actual: w0.len(),
        });
    }
    let n = data.n();
    let mut w = normalized(w0)?;
    let mut v = vec![0.0; data.dim()];
    let mut trajectory = Vec::with_capacity(config.steps + 1);
    let mut order: Vec<usize> = (0..n).collect();
    let mut residual = vec![0.0; n];
    let mut last_sum = 0.0;
    for step in 0..=config.steps {
        let p = data.project(&w);
        order.sort_unstable_by(|&a, &b| p[a].total_cmp(&p[b]));
        let mut sum = 0.0;
        for (rank, &i) in order.iter().enumerate() {
            let r = p[i] - y_sorted[rank];
            residual[i] = r;
            sum += r * r;
        }
        trajectory.push(sum / n as f64);
        last_sum = sum;
        if step == config.steps {
            break;
        }
        let grad = data.transpose_mul(&residual);
        for (vi, gi) in v.iter_mut().zip(grad) {
            *vi = config.momentum * *vi + 2.0 * gi / n as f64;
        }
        for (wi, vi) in w.iter_mut().zip(&v) {
            *wi -= config.lr * vi;
        }
        w = normalized(&w)?;
    }
    Ok(SpuriousResult {
        w,
        w2_initial: trajectory[0],
        w2_final: *trajectory.last().expect("at least one evaluation"),
        trajectory,
        w2_final_sum: last_sum,
    })
}

fn normalized(w: &[f64]) -> Result<Vec<f64>> {
    let norm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
    if !(norm > 0.0) || !norm.is_finite() {
        return Err(Error::NonFinite("projection direction"));
    }
    Ok(w.iter().map(|x| x / norm).collect())
}
