//! Closed-form Gaussian loss, exact block dynamics for Gaussian inputs and
//! evaluators for the layer-count bounds.
//!
//! A Gaussianization block with perfectly fitted marginals maps `N(0, Σ)` to
//! `N(0, Σ')` with `Σ' = S^{-1/2} Q Σ Qᵀ S^{-1/2}` and `S = diag(Q Σ Qᵀ)`, so
//! Gaussian inputs can be evolved without samples. Since `log det Σ' =
//! log det Σ − log det S`, the loss of a trace-normalized state changes by
//! `L' = L + ½ log det S`. By AM-GM `log det S ≤ 0`, so the loss never grows.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::rotations::{HaarReflectors, OrthogonalMatrix, Spectrum};

/// Relative asymmetry accepted (and then removed) by [`CovarianceState::new`].
const SYMMETRY_TOL: f64 = 1e-9;

/// Number of coupling blocks that suffice to represent any Gaussian exactly
/// when block permutations are used.
pub const COUPLING_UPPER_BOUND: f64 = 48.0;

/// Minimum number of coupling blocks with random rotations needed for an
/// exact fit.
pub const COUPLING_LOWER_BOUND: f64 = 2.0;

/// A symmetric positive-definite covariance matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceState {
    m: DMatrix<f64>,
    log_det: f64,
}

impl CovarianceState {
    pub fn new(mut m: DMatrix<f64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::DimensionMismatch {
                expected: m.nrows(),
                actual: m.ncols(),
            });
        }
        if m.nrows() == 0 {
            return Err(Error::InvalidDimension(0, 1));
        }
        if m.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("covariance entry"));
        }
        let scale = m.amax().max(1.0);
        if linalg::max_asymmetry(&m) > SYMMETRY_TOL * scale {
            return Err(Error::NotPositiveDefinite);
        }
        linalg::symmetrize(&mut m);
        let log_det = linalg::spd_log_det(&m)?;
        Ok(Self { m, log_det })
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            m: DMatrix::identity(dim, dim),
            log_det: 0.0,
        }
    }

    pub fn diagonal(values: &[f64]) -> Result<Self> {
        Self::new(DMatrix::from_diagonal(&DVector::from_column_slice(values)))
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.m
    }

    pub fn trace(&self) -> f64 {
        self.m.trace()
    }

    pub fn log_det(&self) -> f64 {
        self.log_det
    }

    /// `tr Σ = D` within `1e-9`.
    pub fn is_normalized(&self) -> bool {
        (self.trace() - self.dim() as f64).abs() <= 1e-9
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        linalg::symmetric_eigenvalues(&self.m)
    }
}

/// `KL(N(0, Σ) ‖ N(0, I)) = ½ (tr Σ − D − log det Σ)`.
pub fn gaussian_kl(sigma: &CovarianceState) -> f64 {
    0.5 * (sigma.trace() - sigma.dim() as f64 - sigma.log_det())
}

/// Result of one exact block: the new state and `log det S`.
#[derive(Debug, Clone)]
pub struct BlockUpdate {
    pub sigma: CovarianceState,
    pub log_det_s: f64,
}

/// One perfectly fitted Gaussianization block applied to `N(0, Σ)`.
pub fn apply_block_exact(sigma: &CovarianceState, q: &OrthogonalMatrix) -> Result<BlockUpdate> {
    if sigma.dim() != q.dim() {
        return Err(Error::DimensionMismatch {
            expected: sigma.dim(),
            actual: q.dim(),
        });
    }
    let rotated = q.matrix() * sigma.matrix() * q.matrix().transpose();
    let s: Vec<f64> = rotated.diagonal().iter().copied().collect();
    let inv_sqrt: Vec<f64> = s.iter().map(|v| 1.0 / v.sqrt()).collect();
    let d = sigma.dim();
    let mut next = DMatrix::from_fn(d, d, |i, j| rotated[(i, j)] * inv_sqrt[i] * inv_sqrt[j]);
    for i in 0..d {
        next[(i, i)] = 1.0;
    }
    let log_det_s = s.iter().map(|v| v.ln()).sum();
    Ok(BlockUpdate {
        sigma: CovarianceState::new(next)?,
        log_det_s,
    })
}

/// Exact Gaussian simulator tracking a factor `B` with `Σ = B Bᵀ`.
///
/// A block maps `B` to `S^{-1/2} Q B`, one matrix product per layer. The loss
/// is carried by the bookkeeping identity rather than refactorized.
#[derive(Debug, Clone)]
pub struct ExactChain {
    b: DMatrix<f64>,
    loss: f64,
    layers: usize,
}

impl ExactChain {
    /// Starts from `Σ = Qᵀ Diag(λ) Q` for a trace-normalized spectrum.
    pub fn from_spectrum(spectrum: &Spectrum, q: &HaarReflectors) -> Result<Self> {
        if spectrum.dim() != q.dim() {
            return Err(Error::DimensionMismatch {
                expected: spectrum.dim(),
                actual: q.dim(),
            });
        }
        let sqrt: Vec<f64> = spectrum.eigenvalues().iter().map(|l| l.sqrt()).collect();
        let mut b = DMatrix::from_diagonal(&DVector::from_vec(sqrt));
        q.apply_left_transpose(&mut b);
        let loss = -0.5 * spectrum.eigenvalues().iter().map(|l| l.ln()).sum::<f64>();
        Ok(Self { b, loss, layers: 0 })
    }

    pub fn from_covariance(sigma: &CovarianceState) -> Result<Self> {
        let chol = sigma
            .matrix()
            .clone()
            .cholesky()
            .ok_or(Error::NotPositiveDefinite)?;
        Ok(Self {
            b: chol.unpack(),
            loss: gaussian_kl(sigma),
            layers: 0,
        })
    }

    pub fn dim(&self) -> usize {
        self.b.nrows()
    }

    pub fn loss(&self) -> f64 {
        self.loss
    }

    pub fn layers(&self) -> usize {
        self.layers
    }

    pub fn covariance(&self) -> Result<CovarianceState> {
        let mut m = &self.b * self.b.transpose();
        linalg::symmetrize(&mut m);
        CovarianceState::new(m)
    }

    /// Loss recomputed from the current factor, `½(tr Σ − D) − log|det B|`.
    pub fn direct_loss(&self) -> Result<f64> {
        let d = self.dim();
        let trace: f64 = self.b.iter().map(|v| v * v).sum();
        let qr = self.b.clone().qr();
        let r = qr.r();
        let mut log_abs_det = 0.0;
        for i in 0..d {
            let v = r[(i, i)].abs();
            if !(v > 0.0) {
                return Err(Error::NotPositiveDefinite);
            }
            log_abs_det += v.ln();
        }
        Ok(0.5 * (trace - d as f64) - log_abs_det)
    }

    /// Applies one block with rotation `q`; returns `log det S`.
    pub fn step(&mut self, q: &HaarReflectors) -> Result<f64> {
        if q.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                actual: q.dim(),
            });
        }
        q.apply_left(&mut self.b);
        Ok(self.standardize_rows())
    }

    pub fn step_dense(&mut self, q: &OrthogonalMatrix) -> Result<f64> {
        if q.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                actual: q.dim(),
            });
        }
        self.b = q.matrix() * &self.b;
        Ok(self.standardize_rows())
    }

    fn standardize_rows(&mut self) -> f64 {
        let d = self.dim() as f64;
        let s = linalg::row_norms_squared(&self.b);
        // The trace drops to D; it already is D after the first block.
        let trace_excess = 0.5 * (s.sum() - d);
        let mut log_det_s = 0.0;
        for (i, &si) in s.iter().enumerate() {
            log_det_s += (si - 1.0).ln_1p();
            self.b.row_mut(i).scale_mut(1.0 / si.sqrt());
        }
        self.loss += 0.5 * log_det_s - trace_excess;
        self.layers += 1;
        log_det_s
    }
}

/// Per-layer remaining-loss factor `1 − 2/(D+2)` of random-rotation
/// Gaussianization in the low-loss regime.
pub fn iterative_rate_factor(dim: usize) -> Result<f64> {
    check_dim(dim, 1)?;
    Ok(1.0 - 2.0 / (dim as f64 + 2.0))
}

/// Layers needed to shrink the loss by `loss_ratio`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RequiredLayers {
    /// `log(ratio) / log(1 − 2/(D+2))`.
    pub exact: f64,
    /// `log(1/ratio) (D+1)/2`.
    pub linearized: f64,
}

pub fn gaussianization_required_layers(dim: usize, loss_ratio: f64) -> Result<RequiredLayers> {
    check_ratio(loss_ratio)?;
    let rate = iterative_rate_factor(dim)?;
    Ok(RequiredLayers {
        exact: loss_ratio.ln() / rate.ln(),
        linearized: -loss_ratio.ln() * (dim as f64 + 1.0) / 2.0,
    })
}

/// Gaussianization blocks needed to represent a generic Gaussian exactly:
/// `(D+1)/2`.
pub fn param_count_lower_bound(dim: usize) -> Result<f64> {
    check_dim(dim, 1)?;
    Ok((dim as f64 + 1.0) / 2.0)
}

/// Blocks needed when every rotation is learned with `k·D` parameters:
/// `D / (2(k+1))`.
pub fn learned_rotation_lower_bound(dim: usize, k: f64) -> Result<f64> {
    check_dim(dim, 1)?;
    if !(k >= 0.0) || !k.is_finite() {
        return Err(Error::OutOfRange(format!("k = {k} must be a finite nonnegative number")));
    }
    Ok(dim as f64 / (2.0 * (k + 1.0)))
}

/// Per-layer loss factor of coupling blocks with random rotations, evaluated
/// at loss `loss` in dimension `dim`.
pub fn coupling_rate(loss: f64, dim: usize) -> Result<f64> {
    check_dim(dim, 2)?;
    if !(loss > 0.0) || !loss.is_finite() {
        return Err(Error::OutOfRange(format!(
            "coupling rate needs a positive finite loss, got {loss}; use coupling_rate_low_loss_limit"
        )));
    }
    let d = dim as f64;
    // g^D = exp(-2L); every difference from one goes through expm1.
    let one_minus_gd = -(-2.0 * loss).exp_m1();
    let one_minus_g = -(-2.0 * loss / d).exp_m1();
    let root = one_minus_gd.sqrt();
    let inner = d * d / ((d - 1.0) * (d + 2.0)) * (1.0 - root) / (1.0 + root) * one_minus_g;
    Ok(1.0 + d / (4.0 * loss) * (-inner).ln_1p())
}

/// `lim_{L→0} γ = (D(D+2) − 4) / (2(D−1)(D+2))`.
pub fn coupling_rate_low_loss_limit(dim: usize) -> Result<f64> {
    check_dim(dim, 2)?;
    let d = dim as f64;
    Ok((d * (d + 2.0) - 4.0) / (2.0 * (d - 1.0) * (d + 2.0)))
}

/// Limit of the coupling rate for vanishing loss and then infinite dimension.
pub fn coupling_rate_asymptotic_limit() -> f64 {
    0.5
}

/// `log(1/ratio) / log 2`.
pub fn coupling_required_layers(loss_ratio: f64) -> Result<f64> {
    check_ratio(loss_ratio)?;
    Ok(-loss_ratio.ln() / std::f64::consts::LN_2)
}

/// Largest condition number compatible with trace `D` and geometric mean `g`:
/// `(1 + √(1−g^D)) / (1 − √(1−g^D))`.
pub fn kappa_upper_bound(g: f64, dim: usize) -> Result<f64> {
    check_dim(dim, 1)?;
    if !(g > 0.0 && g <= 1.0) {
        return Err(Error::OutOfRange(format!("geometric mean {g} not in (0, 1]")));
    }
    let gd = g.powi(dim as i32);
    let s = (1.0 - gd).max(0.0).sqrt();
    // (1+s)/(1−s) = (1+s)² / g^D avoids the cancellation in 1 − s.
    Ok((1.0 + s).powi(2) / gd)
}

/// `g = exp(−2L/D)`.
pub fn loss_to_geometric_mean(loss: f64, dim: usize) -> Result<f64> {
    check_dim(dim, 1)?;
    Ok((-2.0 * loss / dim as f64).exp())
}

/// `L = −(D/2) log g`.
pub fn geometric_mean_to_loss(g: f64, dim: usize) -> Result<f64> {
    check_dim(dim, 1)?;
    if !(g > 0.0) {
        return Err(Error::OutOfRange(format!("geometric mean {g} must be positive")));
    }
    Ok(-(dim as f64) / 2.0 * g.ln())
}

/// `Var[λ]/(2λ_max) ≤ λ̄ − g ≤ Var[λ]/(2λ_min)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AmGmBracket {
    pub lower: f64,
    pub value: f64,
    pub upper: f64,
}

impl AmGmBracket {
    /// Bracket holds up to `tol` of rounding.
    pub fn holds(&self, tol: f64) -> bool {
        self.lower <= self.value + tol && self.value <= self.upper + tol
    }
}

pub fn amgm_bracket(spectrum: &Spectrum) -> AmGmBracket {
    let var = spectrum.variance();
    AmGmBracket {
        lower: var / (2.0 * spectrum.max()),
        value: spectrum.mean() - spectrum.geometric_mean(),
        upper: var / (2.0 * spectrum.min()),
    }
}

/// Loss split into the dependence between dimensions and per-dimension
/// marginal losses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PythagoreanSplit {
    pub total: f64,
    pub dependence: f64,
    pub marginals: Vec<f64>,
}

pub fn pythagorean_decomposition_gaussian(sigma: &CovarianceState) -> PythagoreanSplit {
    let marginals: Vec<f64> = sigma
        .matrix()
        .diagonal()
        .iter()
        .map(|&s| 0.5 * (s - 1.0 - s.ln()))
        .collect();
    let total = gaussian_kl(sigma);
    let dependence = total - marginals.iter().sum::<f64>();
    PythagoreanSplit {
        total,
        dependence,
        marginals,
    }
}

/// A named bound evaluated for one dimension.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum TheoryBound {
    GaussianizationLower { dim: usize, value: f64 },
    LearnedRotationLower { dim: usize, k: f64, value: f64 },
    IterativeRate { dim: usize, loss_ratio: f64, rate: f64, exact: f64, linearized: f64 },
    CouplingLower { value: f64 },
    CouplingUpper48 { value: f64 },
    CouplingRate { dim: usize, loss: Option<f64>, rate: f64, required_layers: f64 },
}

impl TheoryBound {
    pub fn name(&self) -> &'static str {
        match self {
            Self::GaussianizationLower { .. } => "gaussianization-lower",
            Self::LearnedRotationLower { .. } => "learned-rotation-lower",
            Self::IterativeRate { .. } => "iterative-rate",
            Self::CouplingLower { .. } => "coupling-lower",
            Self::CouplingUpper48 { .. } => "coupling-upper-48",
            Self::CouplingRate { .. } => "coupling-rate",
        }
    }

    /// The headline number: a layer count, or the rate for `CouplingRate`.
    pub fn value(&self) -> f64 {
        match *self {
            Self::GaussianizationLower { value, .. }
            | Self::LearnedRotationLower { value, .. }
            | Self::CouplingLower { value }
            | Self::CouplingUpper48 { value } => value,
            Self::IterativeRate { exact, .. } => exact,
            Self::CouplingRate { rate, .. } => rate,
        }
    }

    /// Every bound for `dim`, learned-rotation parameter `k`, loss ratio and
    /// (optionally) a current loss for the coupling rate.
    pub fn all(dim: usize, k: f64, loss_ratio: f64, loss: Option<f64>) -> Result<Vec<TheoryBound>> {
        let layers = gaussianization_required_layers(dim, loss_ratio)?;
        let coupling_layers = coupling_required_layers(loss_ratio)?;
        let mut out = vec![
            Self::GaussianizationLower {
                dim,
                value: param_count_lower_bound(dim)?,
            },
            Self::LearnedRotationLower {
                dim,
                k,
                value: learned_rotation_lower_bound(dim, k)?,
            },
            Self::IterativeRate {
                dim,
                loss_ratio,
                rate: iterative_rate_factor(dim)?,
                exact: layers.exact,
                linearized: layers.linearized,
            },
            Self::CouplingLower {
                value: COUPLING_LOWER_BOUND,
            },
            Self::CouplingUpper48 {
                value: COUPLING_UPPER_BOUND,
            },
        ];
        if dim >= 2 {
            let rate = match loss {
                Some(l) => coupling_rate(l, dim)?,
                None => coupling_rate_low_loss_limit(dim)?,
            };
            out.push(Self::CouplingRate {
                dim,
                loss,
                rate,
                required_layers: coupling_layers,
            });
        }
        Ok(out)
    }
}

fn check_dim(dim: usize, min: usize) -> Result<()> {
    if dim < min {
        Err(Error::InvalidDimension(dim, min))
    } else {
        Ok(())
    }
}

fn check_ratio(ratio: f64) -> Result<()> {
    if ratio > 0.0 && ratio < 1.0 {
        Ok(())
    } else {
        Err(Error::OutOfRange(format!("loss ratio {ratio} not in (0, 1)")))
    }
}
