//! Synthetic data with known densities: rotated Gaussians, the autoregressive
//! toy family and the bimodal target of the spurious-projection experiment.

use std::fmt;
use std::ops::Range;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::Dataset;
use crate::rng::RngSeed;
use crate::rotations::{OrthogonalMatrix, Spectrum};
use crate::stats;

const LN_2PI_E: f64 = 2.837_877_066_409_345_5;

/// Entropy of `N(μ, σ²)`.
pub fn normal_entropy(variance: f64) -> f64 {
    0.5 * (LN_2PI_E + variance.ln())
}

fn normal_log_pdf(x: f64, mean: f64, variance: f64) -> f64 {
    -0.5 * ((x - mean).powi(2) / variance + variance.ln() + (LN_2PI_E - 1.0))
}

/// Which earlier coordinates each coordinate of the toy distribution reads.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ToyCase {
    /// Every coordinate depends on all previous ones.
    Full,
    /// Coordinates past the core depend on the core only.
    CoreConditioned,
    /// Coordinates past the core are independent noise.
    CoreIndependent,
}

impl ToyCase {
    pub const ALL: [ToyCase; 3] = [ToyCase::Full, ToyCase::CoreConditioned, ToyCase::CoreIndependent];

    pub fn from_index(index: u8) -> Result<Self> {
        match index {
            1..=3 => Ok(Self::ALL[index as usize - 1]),
            _ => Err(Error::OutOfRange(format!("toy case {index} not in 1..=3"))),
        }
    }

    pub fn index(self) -> u8 {
        match self {
            Self::Full => 1,
            Self::CoreConditioned => 2,
            Self::CoreIndependent => 3,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Full => "toy-full",
            Self::CoreConditioned => "toy-core",
            Self::CoreIndependent => "toy-core-iid",
        }
    }
}

impl fmt::Display for ToyCase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// `x₁ ~ N(m₁, σ₁²)`, `xᵢ | Aᵢ ~ N(m₀ + 5 tanh(Σ_{j∈Aᵢ} sᵢⱼ xⱼ² / 10), σ₂²)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToyDistribution {
    case: ToyCase,
    dim: usize,
    core: usize,
    pub m1: f64,
    pub m0: f64,
    pub sigma1_sq: f64,
    pub sigma2_sq: f64,
    /// Row-major `D × D`; entry `(i, j)` is `sᵢⱼ ∈ {−1, +1}`.
    signs: Vec<f64>,
    seed: RngSeed,
}

impl ToyDistribution {
    /// Draws the sign matrix from `seed`.
    pub fn new(case: ToyCase, dim: usize, core: usize, seed: RngSeed) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidDimension(0, 1));
        }
        if core == 0 || core > dim {
            return Err(Error::OutOfRange(format!("core size {core} not in 1..={dim}")));
        }
        let mut rng = seed.keyed(&[0x7369_676e, dim as u64]);
        let signs = (0..dim * dim)
            .map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 })
            .collect();
        Ok(Self {
            case,
            dim,
            core,
            m1: 0.5,
            m0: 0.0,
            sigma1_sq: 0.8,
            sigma2_sq: 0.2,
            signs,
            seed,
        })
    }

    pub fn case(&self) -> ToyCase {
        self.case
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn core(&self) -> usize {
        self.core
    }

    pub fn seed(&self) -> RngSeed {
        self.seed
    }

    pub fn sign(&self, i: usize, j: usize) -> f64 {
        self.signs[i * self.dim + j]
    }

    /// Indices (0-based) of the coordinates that coordinate `i` depends on.
    pub fn parents(&self, i: usize) -> Range<usize> {
        match self.case {
            ToyCase::Full => 0..i,
            ToyCase::CoreConditioned => 0..i.min(self.core),
            ToyCase::CoreIndependent if i < self.core => 0..i,
            ToyCase::CoreIndependent => 0..0,
        }
    }

    /// Conditional mean of coordinate `i` given the earlier coordinates.
    pub fn conditional_mean(&self, i: usize, x: &[f64]) -> f64 {
        if i == 0 {
            return self.m1;
        }
        let row = &self.signs[i * self.dim..];
        let acc: f64 = self.parents(i).map(|j| row[j] * x[j] * x[j]).sum();
        self.m0 + 5.0 * (acc / 10.0).tanh()
    }

    fn variance(&self, i: usize) -> f64 {
        if i == 0 {
            self.sigma1_sq
        } else {
            self.sigma2_sq
        }
    }

    /// Ancestral sampling of `n` points.
    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<Dataset> {
        if n == 0 {
            return Err(Error::TooFewSamples { needed: 1, got: 0 });
        }
        let d = self.dim;
        let sd: Vec<f64> = (0..d).map(|i| self.variance(i).sqrt()).collect();
        let mut rows = DMatrix::zeros(n, d);
        let mut x = vec![0.0; d];
        for r in 0..n {
            for i in 0..d {
                let eps: f64 = rng.sample(StandardNormal);
                x[i] = self.conditional_mean(i, &x) + sd[i] * eps;
            }
            for (i, &v) in x.iter().enumerate() {
                rows[(r, i)] = v;
            }
        }
        Dataset::new(rows, format!("{}:D={}:d={}:seed={}", self.case, d, self.core, self.seed.0))
    }

    pub fn log_density(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                actual: x.len(),
            });
        }
        Ok((0..self.dim)
            .map(|i| normal_log_pdf(x[i], self.conditional_mean(i, x), self.variance(i)))
            .sum())
    }

    /// Exact entropy: every conditional is Gaussian with a fixed variance, so
    /// the chain rule gives a sum of 1-D Gaussian entropies.
    pub fn entropy(&self) -> f64 {
        normal_entropy(self.sigma1_sq) + (self.dim - 1) as f64 * normal_entropy(self.sigma2_sq)
    }

    /// Monte-Carlo entropy `−E[log p(x)]` on fresh samples, with its standard
    /// error.
    pub fn entropy_mc<R: Rng + ?Sized>(&self, n_mc: usize, rng: &mut R) -> Result<(f64, f64)> {
        let data = self.sample(n_mc, rng)?;
        self.entropy_on(&data)
    }

    /// `−mean log p(x)` over `data`, with its standard error.
    pub fn entropy_on(&self, data: &Dataset) -> Result<(f64, f64)> {
        let mut x = vec![0.0; self.dim];
        let mut values = Vec::with_capacity(data.n());
        for r in 0..data.n() {
            for (i, v) in x.iter_mut().enumerate() {
                *v = data.matrix()[(r, i)];
            }
            values.push(-self.log_density(&x)?);
        }
        Ok(stats::mean_and_se(&values))
    }
}

/// Samples of `N(0, Qᵀ Diag(λ) Q)` together with the exact entropy.
pub fn gaussian_dataset<R: Rng + ?Sized>(
    spectrum: &Spectrum,
    q: &OrthogonalMatrix,
    n: usize,
    rng: &mut R,
) -> Result<(Dataset, f64)> {
    let d = spectrum.dim();
    if q.dim() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            actual: q.dim(),
        });
    }
    if n == 0 {
        return Err(Error::TooFewSamples { needed: 1, got: 0 });
    }
    let sqrt: Vec<f64> = spectrum.eigenvalues().iter().map(|l| l.sqrt()).collect();
    // Row r is ε_r Diag(√λ) Q, i.e. x = Qᵀ Diag(√λ) ε.
    let mut eps = DMatrix::from_fn(n, d, |_, _| rng.sample::<f64, _>(StandardNormal));
    for (j, mut col) in eps.column_iter_mut().enumerate() {
        col *= sqrt[j];
    }
    let mut rows = DMatrix::zeros(n, d);
    rows.gemm(1.0, &eps, q.matrix(), 0.0);
    let entropy = spectrum.eigenvalues().iter().map(|&l| normal_entropy(l)).sum();
    Ok((Dataset::new(rows, format!("gaussian:{}", spectrum.case()))?, entropy))
}

/// Equal-weight mixture `½ N(−d/2, σ²) + ½ N(d/2, σ²)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BimodalTarget {
    pub spread: f64,
    pub sigma: f64,
}

impl Default for BimodalTarget {
    fn default() -> Self {
        Self {
            spread: 2.0,
            sigma: 0.4,
        }
    }
}

impl BimodalTarget {
    pub fn new(spread: f64, sigma: f64) -> Result<Self> {
        if !(sigma > 0.0) || !spread.is_finite() {
            return Err(Error::OutOfRange(format!("bimodal target needs σ > 0, got {sigma}")));
        }
        Ok(Self { spread, sigma })
    }

    pub fn variance(&self) -> f64 {
        self.sigma * self.sigma + self.spread * self.spread / 4.0
    }

    /// `n` samples, sorted ascending.
    pub fn sample_sorted<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Vec<f64> {
        let half = self.spread / 2.0;
        let mut out: Vec<f64> = (0..n)
            .map(|_| {
                let side = if rng.random::<bool>() { half } else { -half };
                let eps: f64 = rng.sample(StandardNormal);
                side + self.sigma * eps
            })
            .collect();
        out.sort_unstable_by(f64::total_cmp);
        out
    }
}

/// Equal-width histogram.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub counts: Vec<u64>,
}

impl Histogram {
    /// `bins` equal-width bins spanning `[min, max]` of `values`.
    pub fn from_values(values: &[f64], bins: usize) -> Result<Self> {
        if bins == 0 {
            return Err(Error::OutOfRange("histogram needs at least one bin".into()));
        }
        if values.is_empty() {
            return Err(Error::TooFewSamples { needed: 1, got: 0 });
        }
        let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
        let mut hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if hi == lo {
            hi = lo + 1.0;
        }
        let width = (hi - lo) / bins as f64;
        let edges: Vec<f64> = (0..=bins).map(|k| lo + width * k as f64).collect();
        let mut counts = vec![0u64; bins];
        for &v in values {
            let k = (((v - lo) / width) as usize).min(bins - 1);
            counts[k] += 1;
        }
        Ok(Self { edges, counts })
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Normalized density per bin.
    pub fn densities(&self) -> Vec<f64> {
        let total = self.total() as f64;
        self.counts
            .iter()
            .zip(self.edges.windows(2))
            .map(|(&c, e)| c as f64 / (total * (e[1] - e[0])))
            .collect()
    }
}

/// Projections `wᵀx` of every row; `w` must have unit norm.
pub fn project(data: &Dataset, w: &DVector<f64>) -> Result<Vec<f64>> {
    if w.len() != data.dim() {
        return Err(Error::DimensionMismatch {
            expected: data.dim(),
            actual: w.len(),
        });
    }
    let norm = w.norm();
    if (norm - 1.0).abs() > 1e-10 {
        return Err(Error::OutOfRange(format!("projection vector has norm {norm}, expected 1")));
    }
    Ok((data.matrix() * w).iter().copied().collect())
}

pub fn projection_histogram(data: &Dataset, w: &DVector<f64>, bins: usize) -> Result<Histogram> {
    Histogram::from_values(&project(data, w)?, bins)
}

/// A uniformly random unit vector.
pub fn random_unit_vector<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> DVector<f64> {
    loop {
        let v = DVector::from_fn(dim, |_, _| rng.sample::<f64, _>(StandardNormal));
        let n = v.norm();
        if n > 0.0 {
            return v / n;
        }
    }
}
