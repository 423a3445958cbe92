//! Random orthogonal matrices and the covariance spectra the Gaussian
//! experiments start from.
//!
//! Haar samples are produced by Householder QR of a matrix of i.i.d. standard
//! normals with the sign of every diagonal entry of the triangular factor made
//! positive. Column `k` of the Gaussian matrix is only drawn when the QR sweep
//! reaches it: after the first `k` reflections the trailing columns are again
//! i.i.d. standard normal and independent of the reflectors built so far, so
//! drawing them fresh gives the same law and skips the `R` update entirely.
//!
//! [`HaarReflectors`] keeps the rotation in factored (blocked WY) form, which
//! is how the exact simulator applies it; [`sample_haar`] forms the dense matrix.

use std::fmt;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::theory::CovarianceState;

/// Tolerance for accepting a matrix as orthogonal.
pub const ORTHOGONALITY_TOL: f64 = 1e-10;

/// Default lower eigenvalue bound of the spectrum dataset.
pub const DEFAULT_LAMBDA_MIN: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq)]
pub struct OrthogonalMatrix {
    m: DMatrix<f64>,
}

impl OrthogonalMatrix {
    pub fn identity(dim: usize) -> Self {
        Self {
            m: DMatrix::identity(dim, dim),
        }
    }

    pub fn from_matrix(m: DMatrix<f64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::DimensionMismatch {
                expected: m.nrows(),
                actual: m.ncols(),
            });
        }
        if m.nrows() == 0 {
            return Err(Error::InvalidDimension(0, 1));
        }
        let defect = linalg::orthogonality_defect(&m);
        if !(defect < ORTHOGONALITY_TOL) {
            return Err(Error::NotOrthogonal(defect));
        }
        Ok(Self { m })
    }

    /// Planar rotation by `angle` radians.
    pub fn rotation_2d(angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        Self {
            m: DMatrix::from_row_slice(2, 2, &[c, -s, s, c]),
        }
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.m
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.m
    }

    pub fn transpose(&self) -> Self {
        Self {
            m: self.m.transpose(),
        }
    }

    pub fn determinant(&self) -> f64 {
        self.m.determinant()
    }

    pub fn apply(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.m * x
    }

    pub fn orthogonality_defect(&self) -> f64 {
        linalg::orthogonality_defect(&self.m)
    }
}

/// Block of consecutive Householder reflectors in compact WY form:
/// `H_s H_{s+1} ⋯ H_{s+b-1} = I − V T Vᵀ`, acting on coordinates `start..dim`.
#[derive(Debug, Clone)]
struct WyBlock {
    start: usize,
    v: DMatrix<f64>,
    vt: DMatrix<f64>,
    t: DMatrix<f64>,
    tt: DMatrix<f64>,
}

const WY_BLOCK: usize = 40;

/// A Haar-distributed rotation `Q = H_0 H_1 ⋯ H_{D-2} · diag(signs)` in
/// factored form.
#[derive(Debug, Clone)]
pub struct HaarReflectors {
    dim: usize,
    signs: Vec<f64>,
    blocks: Vec<WyBlock>,
}

impl HaarReflectors {
    pub fn sample<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidDimension(0, 1));
        }
        let mut signs = Vec::with_capacity(dim);
        // (start, v, tau) for every non-trivial reflector
        let mut reflectors: Vec<(usize, Vec<f64>, f64)> = Vec::with_capacity(dim);
        for k in 0..dim {
            let m = dim - k;
            let mut x: Vec<f64> = (0..m).map(|_| rng.sample(StandardNormal)).collect();
            let lead_sign = if x[0] < 0.0 { -1.0 } else { 1.0 };
            if m == 1 {
                signs.push(lead_sign);
                break;
            }
            let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
            // H x = alpha e_1 with alpha = -sign(x_0) |x|; R_kk = alpha.
            let alpha = -lead_sign * norm;
            x[0] -= alpha;
            let vtv: f64 = x.iter().map(|v| v * v).sum();
            let tau = if vtv > 0.0 { 2.0 / vtv } else { 0.0 };
            signs.push(-lead_sign);
            reflectors.push((k, x, tau));
        }

        let blocks = reflectors
            .chunks(WY_BLOCK)
            .map(|chunk| build_wy_block(dim, chunk))
            .collect();
        Ok(Self { dim, signs, blocks })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// `b ← Q b` for a `D × n` matrix.
    pub fn apply_left(&self, b: &mut DMatrix<f64>) {
        assert_eq!(b.nrows(), self.dim, "row count must equal the rotation dimension");
        for (mut row, &s) in b.row_iter_mut().zip(&self.signs) {
            if s < 0.0 {
                row.neg_mut();
            }
        }
        for blk in self.blocks.iter().rev() {
            apply_block(blk, b, false);
        }
    }

    /// `b ← Qᵀ b` for a `D × n` matrix.
    pub fn apply_left_transpose(&self, b: &mut DMatrix<f64>) {
        assert_eq!(b.nrows(), self.dim, "row count must equal the rotation dimension");
        for blk in &self.blocks {
            apply_block(blk, b, true);
        }
        for (mut row, &s) in b.row_iter_mut().zip(&self.signs) {
            if s < 0.0 {
                row.neg_mut();
            }
        }
    }

    pub fn to_matrix(&self) -> OrthogonalMatrix {
        let mut m = DMatrix::identity(self.dim, self.dim);
        self.apply_left(&mut m);
        OrthogonalMatrix { m }
    }
}

fn build_wy_block(dim: usize, chunk: &[(usize, Vec<f64>, f64)]) -> WyBlock {
    let start = chunk[0].0;
    let m = dim - start;
    let nb = chunk.len();
    let mut v = DMatrix::zeros(m, nb);
    for (i, (k, x, _)) in chunk.iter().enumerate() {
        let offset = k - start;
        for (r, &val) in x.iter().enumerate() {
            v[(offset + r, i)] = val;
        }
    }
    let vt = v.transpose();
    let gram = &vt * &v;
    // T[..i, i] = -tau_i T[..i, ..i] V[:, ..i]ᵀ v_i, built column by column.
    let mut t = DMatrix::zeros(nb, nb);
    for i in 0..nb {
        let tau = chunk[i].2;
        t[(i, i)] = tau;
        for r in 0..i {
            let mut acc = 0.0;
            for c in r..i {
                acc += t[(r, c)] * gram[(c, i)];
            }
            t[(r, i)] = -tau * acc;
        }
    }
    WyBlock {
        start,
        vt,
        tt: t.transpose(),
        v,
        t,
    }
}

fn apply_block(blk: &WyBlock, b: &mut DMatrix<f64>, transpose: bool) {
    let ncols = b.ncols();
    let m = blk.v.nrows();
    let nb = blk.v.ncols();
    let mut sub = b.rows_mut(blk.start, m);
    let mut w = DMatrix::zeros(nb, ncols);
    w.gemm(1.0, &blk.vt, &sub, 0.0);
    let t = if transpose { &blk.tt } else { &blk.t };
    let tw = t * &w;
    sub.gemm(-1.0, &blk.v, &tw, 1.0);
}

/// Dense Haar-distributed orthogonal matrix.
pub fn sample_haar<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Result<OrthogonalMatrix> {
    Ok(HaarReflectors::sample(dim, rng)?.to_matrix())
}

/// `Q Σ Qᵀ`.
pub fn rotate_covariance(sigma: &CovarianceState, q: &OrthogonalMatrix) -> Result<CovarianceState> {
    if sigma.dim() != q.dim() {
        return Err(Error::DimensionMismatch {
            expected: sigma.dim(),
            actual: q.dim(),
        });
    }
    let mut m = q.matrix() * sigma.matrix() * q.matrix().transpose();
    linalg::symmetrize(&mut m);
    CovarianceState::new(m)
}

/// The six eigenvalue constructions of the Gaussian dataset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SpectrumCase {
    /// `λ_1 = α`, all others 1.
    SingleVarying,
    /// `λ_1 = 1`, all others `α`.
    AllButOneVarying,
    /// Like `AllButOneVarying`, shifted additively to mean 1.
    AllButOneShifted,
    /// First half `α`, second half `1/α`.
    HalfSmallHalfBig,
    /// `λ_i ~ U(0, 2)`.
    UniformRandom,
    /// `λ_i` log-uniform on `[λ_min, 1/λ_min]`.
    LogUniformRandom,
}

impl SpectrumCase {
    pub const ALL: [SpectrumCase; 6] = [
        SpectrumCase::SingleVarying,
        SpectrumCase::AllButOneVarying,
        SpectrumCase::AllButOneShifted,
        SpectrumCase::HalfSmallHalfBig,
        SpectrumCase::UniformRandom,
        SpectrumCase::LogUniformRandom,
    ];

    pub fn from_index(index: u8) -> Result<Self> {
        match index {
            1..=6 => Ok(Self::ALL[index as usize - 1]),
            _ => Err(Error::OutOfRange(format!("spectrum case {index} not in 1..=6"))),
        }
    }

    pub fn index(self) -> u8 {
        Self::ALL.iter().position(|&c| c == self).unwrap() as u8 + 1
    }

    pub fn is_random(self) -> bool {
        matches!(self, Self::UniformRandom | Self::LogUniformRandom)
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::SingleVarying => "single-varying",
            Self::AllButOneVarying => "all-but-one",
            Self::AllButOneShifted => "all-but-one-shifted",
            Self::HalfSmallHalfBig => "half-small-half-big",
            Self::UniformRandom => "uniform",
            Self::LogUniformRandom => "log-uniform",
        }
    }
}

impl fmt::Display for SpectrumCase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Covariance eigenvalues normalized to trace `D`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    eigenvalues: Vec<f64>,
    case: SpectrumCase,
    alpha: Option<f64>,
}

impl Spectrum {
    /// Normalizes arbitrary positive eigenvalues to trace `D`.
    pub fn from_eigenvalues(raw: Vec<f64>, case: SpectrumCase, alpha: Option<f64>) -> Result<Self> {
        if raw.is_empty() {
            return Err(Error::InvalidDimension(0, 1));
        }
        if raw.iter().any(|&l| !(l > 0.0) || !l.is_finite()) {
            return Err(Error::SpectrumRejected("eigenvalues must be positive and finite".into()));
        }
        let d = raw.len() as f64;
        let total: f64 = raw.iter().sum();
        let eigenvalues = raw.iter().map(|l| l * d / total).collect();
        Ok(Self {
            eigenvalues,
            case,
            alpha,
        })
    }

    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn case(&self) -> SpectrumCase {
        self.case
    }

    pub fn alpha(&self) -> Option<f64> {
        self.alpha
    }

    pub fn trace(&self) -> f64 {
        self.eigenvalues.iter().sum()
    }

    pub fn mean(&self) -> f64 {
        self.trace() / self.dim() as f64
    }

    /// Population variance of the eigenvalues.
    pub fn variance(&self) -> f64 {
        let mean = self.mean();
        self.eigenvalues.iter().map(|l| (l - mean).powi(2)).sum::<f64>() / self.dim() as f64
    }

    pub fn geometric_mean(&self) -> f64 {
        (self.eigenvalues.iter().map(|l| l.ln()).sum::<f64>() / self.dim() as f64).exp()
    }

    pub fn min(&self) -> f64 {
        self.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.eigenvalues.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn condition_number(&self) -> f64 {
        self.max() / self.min()
    }

    /// `Diag(λ)`.
    pub fn covariance(&self) -> CovarianceState {
        let m = DMatrix::from_diagonal(&DVector::from_column_slice(&self.eigenvalues));
        CovarianceState::new(m).expect("positive diagonal is SPD")
    }

    /// `Qᵀ Diag(λ) Q`.
    pub fn rotated_covariance(&self, q: &OrthogonalMatrix) -> Result<CovarianceState> {
        rotate_covariance(&self.covariance(), &q.transpose())
    }
}

/// Builds one spectrum of the Gaussian dataset. `alpha` is ignored for the
/// random cases, which draw from `rng` instead.
pub fn make_spectrum<R: Rng + ?Sized>(
    case: SpectrumCase,
    dim: usize,
    alpha: f64,
    lambda_min: f64,
    rng: &mut R,
) -> Result<Spectrum> {
    if dim < 2 {
        return Err(Error::InvalidDimension(dim, 2));
    }
    if !(lambda_min > 0.0 && lambda_min < 1.0) {
        return Err(Error::OutOfRange(format!("lambda_min {lambda_min} not in (0, 1)")));
    }
    let check_alpha = |upper: f64| -> Result<()> {
        if alpha == 1.0 {
            return Err(Error::DegenerateSpectrum(
                "alpha = 1 gives the identity spectrum".into(),
            ));
        }
        if !(alpha > lambda_min && alpha < upper) {
            return Err(Error::OutOfRange(format!(
                "alpha {alpha} not in ({lambda_min}, {upper})"
            )));
        }
        Ok(())
    };
    let raw: Vec<f64> = match case {
        SpectrumCase::SingleVarying => {
            check_alpha(1.0 / lambda_min)?;
            (0..dim).map(|i| if i == 0 { alpha } else { 1.0 }).collect()
        }
        SpectrumCase::AllButOneVarying => {
            check_alpha(1.0 / lambda_min)?;
            (0..dim).map(|i| if i == 0 { 1.0 } else { alpha }).collect()
        }
        SpectrumCase::AllButOneShifted => {
            check_alpha(1.0 / lambda_min)?;
            let base: Vec<f64> = (0..dim).map(|i| if i == 0 { 1.0 } else { alpha }).collect();
            let mean = base.iter().sum::<f64>() / dim as f64;
            let shifted: Vec<f64> = base.iter().map(|l| l - mean + 1.0).collect();
            if shifted.iter().any(|&l| l <= 0.0) {
                return Err(Error::SpectrumRejected(format!(
                    "shift of alpha = {alpha} produces a non-positive eigenvalue"
                )));
            }
            shifted
        }
        SpectrumCase::HalfSmallHalfBig => {
            check_alpha(1.0)?;
            (0..dim)
                .map(|i| if i < dim / 2 { alpha } else { 1.0 / alpha })
                .collect()
        }
        SpectrumCase::UniformRandom => (0..dim)
            .map(|_| loop {
                let l: f64 = rng.random_range(0.0..2.0);
                if l > 0.0 {
                    break l;
                }
            })
            .collect(),
        SpectrumCase::LogUniformRandom => {
            let lo = lambda_min.ln();
            (0..dim).map(|_| rng.random_range(lo..-lo).exp()).collect()
        }
    };
    let alpha = (!case.is_random()).then_some(alpha);
    Spectrum::from_eigenvalues(raw, case, alpha)
}

/// `per_side` geometrically spaced values strictly inside `(λ_min, 1)` and
/// their reciprocals, ascending.
pub fn alpha_grid(per_side: usize, lambda_min: f64) -> (Vec<f64>, Vec<f64>) {
    let below: Vec<f64> = (1..=per_side)
        .rev()
        .map(|j| lambda_min.powf(j as f64 / (per_side + 1) as f64))
        .collect();
    let above = below.iter().rev().map(|a| 1.0 / a).collect();
    (below, above)
}
