//! Gaussianization blocks, the iterative trainer and sample-based losses.

use std::io::{Read, Write};
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rotations::{sample_haar, OrthogonalMatrix};
use crate::spline::{MonotoneTransform1D, SplineConfig};
use crate::stats;

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// `n` samples in `D` dimensions, stored `n × D` (one sample per row).
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    rows: DMatrix<f64>,
    provenance: String,
}

impl Dataset {
    pub fn new(rows: DMatrix<f64>, provenance: impl Into<String>) -> Result<Self> {
        if rows.nrows() == 0 {
            return Err(Error::TooFewSamples { needed: 1, got: 0 });
        }
        if rows.ncols() == 0 {
            return Err(Error::InvalidDimension(0, 1));
        }
        if rows.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("dataset"));
        }
        Ok(Self {
            rows,
            provenance: provenance.into(),
        })
    }

    pub fn from_rows(rows: &[Vec<f64>], provenance: impl Into<String>) -> Result<Self> {
        let n = rows.len();
        let d = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().find(|r| r.len() != d) {
            return Err(Error::DimensionMismatch {
                expected: d,
                actual: bad.len(),
            });
        }
        Self::new(DMatrix::from_fn(n, d, |i, j| rows[i][j]), provenance)
    }

    pub fn n(&self) -> usize {
        self.rows.nrows()
    }

    pub fn dim(&self) -> usize {
        self.rows.ncols()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.rows
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.rows
    }

    pub fn provenance(&self) -> &str {
        &self.provenance
    }

    pub fn row(&self, i: usize) -> DVector<f64> {
        self.rows.row(i).transpose()
    }

    pub fn column(&self, j: usize) -> &[f64] {
        let n = self.n();
        &self.rows.as_slice()[j * n..(j + 1) * n]
    }

    /// Rows `range` as a new dataset.
    pub fn slice_rows(&self, start: usize, len: usize) -> Result<Self> {
        Self::new(self.rows.rows(start, len).into_owned(), self.provenance.clone())
    }

    /// Sample covariance (divides by `n`, mean removed).
    pub fn covariance(&self) -> DMatrix<f64> {
        let n = self.n() as f64;
        let means: Vec<f64> = (0..self.dim()).map(|j| self.column(j).iter().sum::<f64>() / n).collect();
        let mut centered = self.rows.clone();
        for (j, mut col) in centered.column_iter_mut().enumerate() {
            col.add_scalar_mut(-means[j]);
        }
        let mut cov = centered.transpose() * &centered;
        cov /= n;
        cov
    }

    /// Binary export: `n`, `D` as little-endian `u64`, then row-major `f64`.
    pub fn write_binary<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(&(self.n() as u64).to_le_bytes())?;
        w.write_all(&(self.dim() as u64).to_le_bytes())?;
        for i in 0..self.n() {
            for j in 0..self.dim() {
                w.write_all(&self.rows[(i, j)].to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn read_binary<R: Read>(mut r: R, provenance: impl Into<String>) -> Result<Self> {
        let n = read_u64(&mut r)? as usize;
        let d = read_u64(&mut r)? as usize;
        let mut rows = DMatrix::zeros(n, d);
        for i in 0..n {
            for j in 0..d {
                rows[(i, j)] = read_f64(&mut r)?;
            }
        }
        Self::new(rows, provenance)
    }

    /// CSV export, one sample per line, no header.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        for i in 0..self.n() {
            let line: Vec<String> = (0..self.dim()).map(|j| format!("{}", self.rows[(i, j)])).collect();
            writeln!(w, "{}", line.join(","))?;
        }
        Ok(())
    }
}

/// One rotation followed by independent monotone maps per coordinate.
#[derive(Debug, Clone, PartialEq)]
pub struct Block {
    rotation: OrthogonalMatrix,
    transforms: Vec<MonotoneTransform1D>,
}

impl Block {
    pub fn new(rotation: OrthogonalMatrix, transforms: Vec<MonotoneTransform1D>) -> Result<Self> {
        if transforms.len() != rotation.dim() {
            return Err(Error::DimensionMismatch {
                expected: rotation.dim(),
                actual: transforms.len(),
            });
        }
        Ok(Self { rotation, transforms })
    }

    pub fn dim(&self) -> usize {
        self.rotation.dim()
    }

    pub fn rotation(&self) -> &OrthogonalMatrix {
        &self.rotation
    }

    pub fn transforms(&self) -> &[MonotoneTransform1D] {
        &self.transforms
    }

    /// `f(Qx)` and `log |det J|` at one point.
    pub fn forward(&self, x: &DVector<f64>) -> (DVector<f64>, f64) {
        let mut z = self.rotation.apply(x);
        let mut log_det = 0.0;
        for (zi, t) in z.iter_mut().zip(&self.transforms) {
            let (y, ld) = t.forward(*zi);
            *zi = y;
            log_det += ld;
        }
        (z, log_det)
    }

    pub fn inverse(&self, z: &DVector<f64>) -> DVector<f64> {
        let u = DVector::from_iterator(
            z.len(),
            z.iter().zip(&self.transforms).map(|(&zi, t)| t.inverse(zi)),
        );
        self.rotation.matrix().tr_mul(&u)
    }

    /// Applies the block to every row; returns the output and the per-sample
    /// log-determinants.
    pub fn forward_dataset(&self, data: &Dataset) -> Result<(Dataset, Vec<f64>)> {
        check_dim(self.dim(), data.dim())?;
        let rotated = rotate_rows(data.matrix(), &self.rotation);
        let n = data.n();
        let columns: Vec<(Vec<f64>, Vec<f64>)> = (0..self.dim())
            .into_par_iter()
            .map(|j| {
                let col = &rotated.as_slice()[j * n..(j + 1) * n];
                apply_transform(&self.transforms[j], col)
            })
            .collect();
        assemble(columns, n, data.provenance())
    }
}

fn check_dim(expected: usize, actual: usize) -> Result<()> {
    if expected == actual {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, actual })
    }
}

/// `X Qᵀ`: rotates every row.
fn rotate_rows(x: &DMatrix<f64>, q: &OrthogonalMatrix) -> DMatrix<f64> {
    let qt = q.matrix().transpose();
    let mut out = DMatrix::zeros(x.nrows(), x.ncols());
    out.gemm(1.0, x, &qt, 0.0);
    out
}

fn apply_transform(t: &MonotoneTransform1D, col: &[f64]) -> (Vec<f64>, Vec<f64>) {
    col.iter().map(|&x| t.forward(x)).unzip()
}

fn assemble(columns: Vec<(Vec<f64>, Vec<f64>)>, n: usize, provenance: &str) -> Result<(Dataset, Vec<f64>)> {
    let d = columns.len();
    let mut out = DMatrix::zeros(n, d);
    let mut log_det = vec![0.0; n];
    for (j, (ys, lds)) in columns.into_iter().enumerate() {
        out.column_mut(j).copy_from_slice(&ys);
        for (acc, ld) in log_det.iter_mut().zip(lds) {
            *acc += ld;
        }
    }
    Ok((Dataset::new(out, provenance)?, log_det))
}

/// Per-coordinate affine map `(x − shift) / scale` applied before the blocks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardization {
    pub shift: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Standardization {
    pub fn fit(data: &Dataset) -> Result<Self> {
        let mut shift = Vec::with_capacity(data.dim());
        let mut scale = Vec::with_capacity(data.dim());
        for j in 0..data.dim() {
            let col = data.column(j);
            let n = col.len() as f64;
            let mean = col.iter().sum::<f64>() / n;
            let sd = (col.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n).sqrt();
            if !(sd > 0.0) {
                return Err(Error::OutOfRange(format!("dimension {j} is constant")));
            }
            shift.push(mean);
            scale.push(sd);
        }
        Ok(Self { shift, scale })
    }

    pub fn log_det(&self) -> f64 {
        -self.scale.iter().map(|s| s.ln()).sum::<f64>()
    }

    fn apply(&self, data: &Dataset) -> Result<Dataset> {
        let mut m = data.matrix().clone();
        for (j, mut col) in m.column_iter_mut().enumerate() {
            col.add_scalar_mut(-self.shift[j]);
            col /= self.scale[j];
        }
        Dataset::new(m, data.provenance())
    }
}

/// Settings of the iterative trainer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub spline: SplineConfig,
    /// Standardize each coordinate before the first block.
    pub standardize: bool,
    /// Fraction of rows held out (taken from the end) for the loss curve.
    pub holdout: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            spline: SplineConfig::default(),
            standardize: true,
            holdout: 0.0,
        }
    }
}

/// Composition of blocks, optionally preceded by a standardization.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianizationModel {
    dim: usize,
    standardization: Option<Standardization>,
    blocks: Vec<Block>,
}

impl GaussianizationModel {
    /// Empty model: the identity.
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            standardization: None,
            blocks: Vec::new(),
        }
    }

    pub fn with_standardization(mut self, s: Standardization) -> Result<Self> {
        check_dim(self.dim, s.shift.len())?;
        check_dim(self.dim, s.scale.len())?;
        self.standardization = Some(s);
        Ok(self)
    }

    pub fn push(&mut self, block: Block) -> Result<()> {
        check_dim(self.dim, block.dim())?;
        self.blocks.push(block);
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    pub fn standardization(&self) -> Option<&Standardization> {
        self.standardization.as_ref()
    }

    pub fn transform(&self, x: &DVector<f64>) -> Result<(DVector<f64>, f64)> {
        check_dim(self.dim, x.len())?;
        let mut z = x.clone();
        let mut log_det = 0.0;
        if let Some(s) = &self.standardization {
            for j in 0..self.dim {
                z[j] = (z[j] - s.shift[j]) / s.scale[j];
            }
            log_det += s.log_det();
        }
        for b in &self.blocks {
            let (next, ld) = b.forward(&z);
            z = next;
            log_det += ld;
        }
        Ok((z, log_det))
    }

    pub fn inverse_transform(&self, z: &DVector<f64>) -> Result<DVector<f64>> {
        check_dim(self.dim, z.len())?;
        let mut x = z.clone();
        for b in self.blocks.iter().rev() {
            x = b.inverse(&x);
        }
        if let Some(s) = &self.standardization {
            for j in 0..self.dim {
                x[j] = x[j] * s.scale[j] + s.shift[j];
            }
        }
        Ok(x)
    }

    /// Pushes every row through the model.
    pub fn transform_dataset(&self, data: &Dataset) -> Result<(Dataset, Vec<f64>)> {
        check_dim(self.dim, data.dim())?;
        let mut z = data.clone();
        let mut log_det = vec![0.0; data.n()];
        if let Some(s) = &self.standardization {
            z = s.apply(&z)?;
            log_det.iter_mut().for_each(|v| *v += s.log_det());
        }
        for b in &self.blocks {
            let (next, ld) = b.forward_dataset(&z)?;
            z = next;
            for (acc, v) in log_det.iter_mut().zip(ld) {
                *acc += v;
            }
        }
        Ok((z, log_det))
    }
}

/// Fits one block with a fresh Haar rotation to `data`; returns the block and
/// the transformed data.
pub fn train_block<R: Rng + ?Sized>(data: &Dataset, spline: &SplineConfig, rng: &mut R) -> Result<(Block, Dataset)> {
    let (block, out, _) = fit_block(data, spline, rng)?;
    Ok((block, out))
}

fn fit_block<R: Rng + ?Sized>(
    data: &Dataset,
    spline: &SplineConfig,
    rng: &mut R,
) -> Result<(Block, Dataset, Vec<f64>)> {
    spline.validate()?;
    let needed = spline.bins + 2;
    if data.n() < needed {
        return Err(Error::TooFewSamples { needed, got: data.n() });
    }
    let q = sample_haar(data.dim(), rng)?;
    let rotated = rotate_rows(data.matrix(), &q);
    let n = data.n();
    let fitted: Vec<(MonotoneTransform1D, (Vec<f64>, Vec<f64>))> = (0..data.dim())
        .into_par_iter()
        .map(|j| {
            let col = &rotated.as_slice()[j * n..(j + 1) * n];
            let t = MonotoneTransform1D::fit(col, spline)?;
            let mapped = apply_transform(&t, col);
            Ok((t, mapped))
        })
        .collect::<Result<_>>()?;
    let (transforms, columns): (Vec<_>, Vec<_>) = fitted.into_iter().unzip();
    let (out, log_det) = assemble(columns, n, data.provenance())?;
    Ok((Block::new(q, transforms)?, out, log_det))
}

/// Mean of `½‖z‖² − log|det J|` plus `(D/2) log 2π − H[p]`, with its
/// standard error.
pub fn loss_from_latents(z: &Dataset, log_det: &[f64], entropy_of_p: f64) -> (f64, f64) {
    let d = z.dim();
    let m = z.matrix();
    let mut per_sample = vec![0.0; z.n()];
    for j in 0..d {
        for (acc, v) in per_sample.iter_mut().zip(m.column(j).iter()) {
            *acc += 0.5 * v * v;
        }
    }
    for (acc, ld) in per_sample.iter_mut().zip(log_det) {
        *acc -= ld;
    }
    let (mean, se) = stats::mean_and_se(&per_sample);
    (mean + 0.5 * d as f64 * LN_2PI - entropy_of_p, se)
}

/// Sample estimate of `KL(q(z) ‖ N(0, I))` for data drawn from `p`.
pub fn kl_loss(model: &GaussianizationModel, data: &Dataset, entropy_of_p: f64) -> Result<f64> {
    let (z, ld) = model.transform_dataset(data)?;
    Ok(loss_from_latents(&z, &ld, entropy_of_p).0)
}

/// Trains `layers` blocks one after the other. The curve has `layers + 1`
/// entries: the loss before the first block and after each block.
pub fn train_iterative<R: Rng + ?Sized>(
    data: &Dataset,
    layers: usize,
    config: &TrainConfig,
    entropy_of_p: f64,
    rng: &mut R,
) -> Result<(GaussianizationModel, Vec<f64>)> {
    if !(0.0..1.0).contains(&config.holdout) {
        return Err(Error::OutOfRange(format!("holdout {} not in [0, 1)", config.holdout)));
    }
    let n_hold = (data.n() as f64 * config.holdout).round() as usize;
    if n_hold == 0 {
        return train_iterative_eval(data, None, layers, config, entropy_of_p, rng);
    }
    let train = data.slice_rows(0, data.n() - n_hold)?;
    let held = data.slice_rows(data.n() - n_hold, n_hold)?;
    train_iterative_eval(&train, Some(&held), layers, config, entropy_of_p, rng)
}

/// Like [`train_iterative`], but the curve is measured on `eval` when given.
/// `config.holdout` is ignored; `entropy_of_p` should belong to the samples
/// the curve is measured on.
pub fn train_iterative_eval<R: Rng + ?Sized>(
    train: &Dataset,
    eval: Option<&Dataset>,
    layers: usize,
    config: &TrainConfig,
    entropy_of_p: f64,
    rng: &mut R,
) -> Result<(GaussianizationModel, Vec<f64>)> {
    if let Some(e) = eval {
        if e.dim() != train.dim() {
            return Err(Error::DimensionMismatch {
                expected: train.dim(),
                actual: e.dim(),
            });
        }
    }
    let mut train = train.clone();
    let mut held = eval.cloned();
    let n_hold = held.as_ref().map_or(0, Dataset::n);

    let mut model = GaussianizationModel::new(train.dim());
    let mut log_det = vec![0.0; train.n()];
    let mut held_log_det = vec![0.0; n_hold];
    if config.standardize {
        let s = Standardization::fit(&train)?;
        train = s.apply(&train)?;
        log_det.iter_mut().for_each(|v| *v = s.log_det());
        if let Some(h) = held.as_mut() {
            *h = s.apply(h)?;
            held_log_det.iter_mut().for_each(|v| *v = s.log_det());
        }
        model = model.with_standardization(s)?;
    }

    let current_loss = |train: &Dataset, ld: &[f64], held: &Option<Dataset>, hld: &[f64]| match held {
        Some(h) => loss_from_latents(h, hld, entropy_of_p).0,
        None => loss_from_latents(train, ld, entropy_of_p).0,
    };
    let mut curve = Vec::with_capacity(layers + 1);
    curve.push(current_loss(&train, &log_det, &held, &held_log_det));
    for _ in 0..layers {
        let (block, next, ld) = fit_block(&train, &config.spline, rng)?;
        for (acc, v) in log_det.iter_mut().zip(ld) {
            *acc += v;
        }
        if let Some(h) = held.as_mut() {
            let (hn, hld) = block.forward_dataset(h)?;
            *h = hn;
            for (acc, v) in held_log_det.iter_mut().zip(hld) {
                *acc += v;
            }
        }
        train = next;
        model.push(block)?;
        curve.push(current_loss(&train, &log_det, &held, &held_log_det));
    }
    Ok((model, curve))
}

/// Number of equal-count bins of the marginal estimator.
pub const MARGINAL_BINS: usize = 64;
const SMOOTHING: f64 = 1e-12;

/// `KL(q(z_i) ‖ N(0, 1))` for every coordinate, from a histogram whose bins
/// hold equal shares of the data. Inner bins treat the density as uniform
/// within the bin; the two unbounded outer bins compare probability masses.
/// A constant coordinate gives `+∞`.
pub fn marginal_dependence_estimate(data: &Dataset) -> Vec<f64> {
    (0..data.dim())
        .map(|j| marginal_kl_estimate(data.column(j), MARGINAL_BINS))
        .collect()
}

pub fn marginal_kl_estimate(samples: &[f64], bins: usize) -> f64 {
    let mut sorted = samples.to_vec();
    sorted.sort_unstable_by(f64::total_cmp);
    let n = sorted.len();
    if n < 2 || bins < 3 || sorted[0] == sorted[n - 1] {
        return f64::INFINITY;
    }
    let edges: Vec<f64> = (1..bins)
        .map(|k| stats::quantile_sorted(&sorted, k as f64 / bins as f64))
        .collect();
    let p = 1.0 / bins as f64;
    let tail = |mass: f64| p * (p / (mass + SMOOTHING)).ln();
    let mut kl = tail(stats::normal_cdf(edges[0])) + tail(stats::normal_sf(edges[bins - 2]));
    for w in edges.windows(2) {
        let (a, b) = (w[0], w[1]);
        let width = b - a;
        if !(width > 0.0) {
            return f64::INFINITY;
        }
        let density = p / width;
        // ∫_a^b log φ = −(w/2) log 2π − (b³ − a³)/6
        let int_log_phi = -0.5 * width * LN_2PI - (b.powi(3) - a.powi(3)) / 6.0;
        kl += p * (density + SMOOTHING).ln() - density * int_log_phi;
    }
    kl
}

const MAGIC: &[u8; 4] = b"GZNF";
const FORMAT_VERSION: u32 = 1;

impl GaussianizationModel {
    /// Versioned little-endian binary container.
    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(MAGIC)?;
        w.write_all(&FORMAT_VERSION.to_le_bytes())?;
        w.write_all(&(self.dim as u64).to_le_bytes())?;
        match &self.standardization {
            Some(s) => {
                w.write_all(&[1])?;
                write_f64s(&mut w, &s.shift)?;
                write_f64s(&mut w, &s.scale)?;
            }
            None => w.write_all(&[0])?,
        }
        w.write_all(&(self.blocks.len() as u64).to_le_bytes())?;
        for b in &self.blocks {
            let m = b.rotation.matrix();
            for i in 0..self.dim {
                for j in 0..self.dim {
                    w.write_all(&m[(i, j)].to_le_bytes())?;
                }
            }
            for t in &b.transforms {
                w.write_all(&(t.knots_x().len() as u64).to_le_bytes())?;
                write_f64s(&mut w, t.knots_x())?;
                write_f64s(&mut w, t.knots_y())?;
                write_f64s(&mut w, t.derivs())?;
                write_f64s(&mut w, &[t.alpha_inner(), t.alpha_tail()])?;
            }
        }
        Ok(())
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(Error::Format("bad magic bytes".into()));
        }
        let mut v = [0u8; 4];
        r.read_exact(&mut v)?;
        let version = u32::from_le_bytes(v);
        if version != FORMAT_VERSION {
            return Err(Error::Format(format!("version {version} is not supported")));
        }
        let dim = read_len(&mut r)?;
        let mut flag = [0u8; 1];
        r.read_exact(&mut flag)?;
        let mut model = Self::new(dim);
        match flag[0] {
            0 => {}
            1 => {
                let shift = read_f64s(&mut r, dim)?;
                let scale = read_f64s(&mut r, dim)?;
                model = model.with_standardization(Standardization { shift, scale })?;
            }
            f => return Err(Error::Format(format!("bad standardization flag {f}"))),
        }
        let nblocks = read_len(&mut r)?;
        for _ in 0..nblocks {
            let entries = read_f64s(&mut r, dim * dim)?;
            let q = OrthogonalMatrix::from_matrix(DMatrix::from_row_slice(dim, dim, &entries))?;
            let mut transforms = Vec::with_capacity(dim);
            for _ in 0..dim {
                let k = read_len(&mut r)?;
                let xs = read_f64s(&mut r, k)?;
                let ys = read_f64s(&mut r, k)?;
                let ds = read_f64s(&mut r, k)?;
                let a = read_f64s(&mut r, 2)?;
                transforms.push(MonotoneTransform1D::new(xs, ys, ds, a[0], a[1])?);
            }
            model.push(Block::new(q, transforms)?)?;
        }
        Ok(model)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let f = std::fs::File::create(path)?;
        let mut w = std::io::BufWriter::new(f);
        self.write_to(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let f = std::fs::File::open(path)?;
        Self::read_from(std::io::BufReader::new(f))
    }

    /// Human-readable JSON rendering of the whole model.
    pub fn to_json(&self) -> Result<String> {
        let view = ModelJson {
            format: "GZNF",
            version: FORMAT_VERSION,
            dim: self.dim,
            standardization: self.standardization.as_ref(),
            blocks: self
                .blocks
                .iter()
                .map(|b| BlockJson {
                    rotation: b
                        .rotation
                        .matrix()
                        .row_iter()
                        .map(|r| r.iter().copied().collect())
                        .collect(),
                    transforms: &b.transforms,
                })
                .collect(),
        };
        Ok(serde_json::to_string_pretty(&view)?)
    }
}

#[derive(Serialize)]
struct ModelJson<'a> {
    format: &'static str,
    version: u32,
    dim: usize,
    standardization: Option<&'a Standardization>,
    blocks: Vec<BlockJson<'a>>,
}

#[derive(Serialize)]
struct BlockJson<'a> {
    rotation: Vec<Vec<f64>>,
    transforms: &'a [MonotoneTransform1D],
}

fn write_f64s<W: Write>(w: &mut W, xs: &[f64]) -> Result<()> {
    for x in xs {
        w.write_all(&x.to_le_bytes())?;
    }
    Ok(())
}

fn read_u64<R: Read>(r: &mut R) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn read_len<R: Read>(r: &mut R) -> Result<usize> {
    let v = read_u64(r)?;
    if v > (1 << 32) {
        return Err(Error::Format(format!("implausible length {v}")));
    }
    Ok(v as usize)
}

fn read_f64<R: Read>(r: &mut R) -> Result<f64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(f64::from_le_bytes(b))
}

fn read_f64s<R: Read>(r: &mut R, n: usize) -> Result<Vec<f64>> {
    (0..n).map(|_| read_f64(r)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngSeed;
    use rand_distr::StandardNormal;

    fn normal_data(n: usize, d: usize, seed: u64) -> Dataset {
        let mut rng = RngSeed(seed).rng();
        Dataset::new(DMatrix::from_fn(n, d, |_, _| rng.sample(StandardNormal)), "normal").unwrap()
    }

    #[test]
    fn empty_model_is_identity() {
        let m = GaussianizationModel::new(3);
        let x = DVector::from_vec(vec![0.5, -1.0, 2.0]);
        let (z, ld) = m.transform(&x).unwrap();
        assert_eq!(z, x);
        assert_eq!(ld, 0.0);
    }

    #[test]
    fn train_block_needs_enough_samples() {
        let data = normal_data(10, 2, 1);
        let mut rng = RngSeed(2).rng();
        assert!(matches!(
            train_block(&data, &SplineConfig::exact(16), &mut rng),
            Err(Error::TooFewSamples { needed: 18, got: 10 })
        ));
    }

    #[test]
    fn zero_layers_gives_single_point_curve() {
        let data = normal_data(500, 2, 1);
        let mut rng = RngSeed(2).rng();
        let (model, curve) = train_iterative(&data, 0, &TrainConfig::default(), 0.0, &mut rng).unwrap();
        assert_eq!(curve.len(), 1);
        assert!(model.blocks().is_empty());
    }

    #[test]
    fn save_load_round_trip() {
        let data = normal_data(400, 3, 5);
        let mut rng = RngSeed(3).rng();
        let (model, _) = train_iterative(&data, 2, &TrainConfig::default(), 0.0, &mut rng).unwrap();
        let mut buf = Vec::new();
        model.write_to(&mut buf).unwrap();
        let back = GaussianizationModel::read_from(buf.as_slice()).unwrap();
        assert_eq!(back, model);
        assert!(model.to_json().unwrap().contains("\"GZNF\""));
        assert!(matches!(
            GaussianizationModel::read_from(&b"XXXX"[..]),
            Err(Error::Format(_))
        ));
    }

    #[test]
    fn dataset_binary_round_trip() {
        let data = normal_data(7, 3, 9);
        let mut buf = Vec::new();
        data.write_binary(&mut buf).unwrap();
        assert_eq!(buf.len(), 16 + 7 * 3 * 8);
        let back = Dataset::read_binary(buf.as_slice(), "normal").unwrap();
        assert_eq!(back, data);
    }

    #[test]
    fn constant_marginal_is_infinite() {
        assert_eq!(marginal_kl_estimate(&[2.0; 100], 64), f64::INFINITY);
    }
}
