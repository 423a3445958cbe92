//! Quantile-fitted monotone rational-quadratic splines.
//!
//! Knots sit at empirical quantiles of the data (x) and at the matching
//! standard-normal quantiles (y), so the spline approximates `Φ⁻¹ ∘ F̂`. The
//! map is blended with the identity, `ψ = (1−α₁) RQ(x) + α₁ x`, and continued
//! outside the knot range by lines of slope one.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats;

/// Minimum number of distinct knots a fitted spline must keep.
pub const MIN_KNOTS: usize = 3;

/// Knots closer than this (relative to their magnitude) are treated as ties.
pub const TIE_EPS: f64 = 1e-12;

const INVERSE_MAX_ITER: usize = 200;
const INVERSE_TOL: f64 = 1e-12;

/// What to do when several quantile knots coincide (discrete data).
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum TieHandling {
    /// Collapse coinciding knots into one; fail if fewer than three remain.
    #[default]
    Merge,
    /// Fail on the first tie.
    Error,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplineConfig {
    pub bins: usize,
    pub alpha_inner: f64,
    pub alpha_tail: f64,
    pub ties: TieHandling,
}

impl Default for SplineConfig {
    fn default() -> Self {
        Self {
            bins: 128,
            alpha_inner: 0.9,
            alpha_tail: 0.99,
            ties: TieHandling::Merge,
        }
    }
}

impl SplineConfig {
    pub fn exact(bins: usize) -> Self {
        Self {
            bins,
            alpha_inner: 0.0,
            alpha_tail: 0.0,
            ties: TieHandling::Merge,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.bins < 2 {
            return Err(Error::OutOfRange(format!("bins = {} must be at least 2", self.bins)));
        }
        for (name, a) in [("alpha_inner", self.alpha_inner), ("alpha_tail", self.alpha_tail)] {
            if !(0.0..=1.0).contains(&a) {
                return Err(Error::OutOfRange(format!("{name} = {a} not in [0, 1]")));
            }
        }
        Ok(())
    }
}

/// A strictly increasing map `ℝ → ℝ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonotoneTransform1D {
    knots_x: Vec<f64>,
    knots_y: Vec<f64>,
    derivs: Vec<f64>,
    alpha_inner: f64,
    alpha_tail: f64,
}

impl MonotoneTransform1D {
    /// Builds a transform from explicit knots, validating every invariant.
    pub fn new(
        knots_x: Vec<f64>,
        knots_y: Vec<f64>,
        derivs: Vec<f64>,
        alpha_inner: f64,
        alpha_tail: f64,
    ) -> Result<Self> {
        let k = knots_x.len();
        if knots_y.len() != k || derivs.len() != k {
            return Err(Error::DimensionMismatch {
                expected: k,
                actual: knots_y.len().min(derivs.len()),
            });
        }
        if k < 2 {
            return Err(Error::TooFewSamples { needed: 2, got: k });
        }
        let increasing = |v: &[f64]| v.windows(2).all(|w| w[0] < w[1]) && v.iter().all(|x| x.is_finite());
        if !increasing(&knots_x) || !increasing(&knots_y) {
            return Err(Error::DuplicateKnots);
        }
        if derivs.iter().any(|&d| !(d > 0.0) || !d.is_finite()) {
            return Err(Error::OutOfRange("knot derivatives must be positive".into()));
        }
        for a in [alpha_inner, alpha_tail] {
            if !(0.0..=1.0).contains(&a) {
                return Err(Error::OutOfRange(format!("alpha {a} not in [0, 1]")));
            }
        }
        Ok(Self {
            knots_x,
            knots_y,
            derivs,
            alpha_inner,
            alpha_tail,
        })
    }

    pub fn identity() -> Self {
        Self {
            knots_x: vec![-1.0, 1.0],
            knots_y: vec![-1.0, 1.0],
            derivs: vec![1.0, 1.0],
            alpha_inner: 0.0,
            alpha_tail: 0.0,
        }
    }

    /// Fits knots to the empirical quantiles of `samples`.
    pub fn fit(samples: &[f64], config: &SplineConfig) -> Result<Self> {
        let mut sorted = samples.to_vec();
        if sorted.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("spline sample"));
        }
        sorted.sort_unstable_by(f64::total_cmp);
        Self::fit_sorted(&sorted, config)
    }

    /// As [`fit`](Self::fit) for data that is already sorted ascending.
    pub fn fit_sorted(sorted: &[f64], config: &SplineConfig) -> Result<Self> {
        config.validate()?;
        if sorted.len() < MIN_KNOTS {
            return Err(Error::TooFewSamples {
                needed: MIN_KNOTS,
                got: sorted.len(),
            });
        }
        let b = config.bins;
        let denom = (b + 2) as f64;
        let mut xs = Vec::with_capacity(b + 1);
        let mut ys = Vec::with_capacity(b + 1);
        let mut run_y = Vec::new();
        for k in 1..=b + 1 {
            let p = k as f64 / denom;
            let x = stats::quantile_sorted(sorted, p);
            let y = stats::normal_quantile(p);
            match xs.last() {
                Some(&last) if x - last <= TIE_EPS * x.abs().max(1.0) => {
                    if config.ties == TieHandling::Error {
                        return Err(Error::DuplicateKnots);
                    }
                    run_y.push(y);
                }
                _ => {
                    flush_run(&mut ys, &mut run_y);
                    xs.push(x);
                    run_y.push(y);
                }
            }
        }
        flush_run(&mut ys, &mut run_y);
        if xs.len() < MIN_KNOTS {
            return Err(Error::DuplicateKnots);
        }
        let derivs = finite_difference_derivs(&xs, &ys);
        Self::new(xs, ys, derivs, config.alpha_inner, config.alpha_tail)
    }

    pub fn knots_x(&self) -> &[f64] {
        &self.knots_x
    }

    pub fn knots_y(&self) -> &[f64] {
        &self.knots_y
    }

    pub fn derivs(&self) -> &[f64] {
        &self.derivs
    }

    pub fn alpha_inner(&self) -> f64 {
        self.alpha_inner
    }

    pub fn alpha_tail(&self) -> f64 {
        self.alpha_tail
    }

    pub fn num_bins(&self) -> usize {
        self.knots_x.len() - 1
    }

    /// `ψ(x)` and `log ψ'(x)`.
    pub fn forward(&self, x: f64) -> (f64, f64) {
        let n = self.knots_x.len();
        let (x0, xb) = (self.knots_x[0], self.knots_x[n - 1]);
        if x <= x0 {
            return (self.blend(x0, self.knots_y[0]) + (x - x0) * self.tail_slope(), self.tail_slope().ln());
        }
        if x >= xb {
            return (self.blend(xb, self.knots_y[n - 1]) + (x - xb) * self.tail_slope(), self.tail_slope().ln());
        }
        let k = self.bin_of(x);
        let (g, dg) = self.rq(k, x);
        let a = self.alpha_inner;
        ((1.0 - a) * g + a * x, ((1.0 - a) * dg + a).ln())
    }

    /// `ψ(x)` only.
    pub fn value(&self, x: f64) -> f64 {
        self.forward(x).0
    }

    /// `ψ⁻¹(y)`: exact in the tails, bisection inside the knot range.
    pub fn inverse(&self, y: f64) -> f64 {
        let n = self.knots_x.len();
        let (x0, xb) = (self.knots_x[0], self.knots_x[n - 1]);
        let y0 = self.blend(x0, self.knots_y[0]);
        let yb = self.blend(xb, self.knots_y[n - 1]);
        if y <= y0 {
            return x0 + (y - y0) / self.tail_slope();
        }
        if y >= yb {
            return xb + (y - yb) / self.tail_slope();
        }
        // ψ at the knots is the blend of the knot values, so the bin is found
        // without evaluating the spline.
        let (mut k, mut upper) = (0, n - 1);
        while upper - k > 1 {
            let mid = (k + upper) / 2;
            if self.blend(self.knots_x[mid], self.knots_y[mid]) <= y {
                k = mid;
            } else {
                upper = mid;
            }
        }
        let (mut lo, mut hi) = (self.knots_x[k], self.knots_x[k + 1]);
        for _ in 0..INVERSE_MAX_ITER {
            let mid = 0.5 * (lo + hi);
            if self.value(mid) < y {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= INVERSE_TOL * mid.abs().max(1.0) {
                break;
            }
        }
        0.5 * (lo + hi)
    }

    fn blend(&self, x: f64, g: f64) -> f64 {
        (1.0 - self.alpha_inner) * g + self.alpha_inner * x
    }

    /// Slope outside the knots: the spline tail has slope one, and so does the
    /// identity it is blended with.
    fn tail_slope(&self) -> f64 {
        (1.0 - self.alpha_tail) * 1.0 + self.alpha_tail
    }

    fn bin_of(&self, x: f64) -> usize {
        let n = self.knots_x.len();
        self.knots_x.partition_point(|&k| k <= x).saturating_sub(1).min(n - 2)
    }

    /// Rational-quadratic segment `k` and its derivative.
    fn rq(&self, k: usize, x: f64) -> (f64, f64) {
        let (xk, xk1) = (self.knots_x[k], self.knots_x[k + 1]);
        let (yk, yk1) = (self.knots_y[k], self.knots_y[k + 1]);
        let (dk, dk1) = (self.derivs[k], self.derivs[k + 1]);
        let w = xk1 - xk;
        let dy = yk1 - yk;
        let s = dy / w;
        let xi = (x - xk) / w;
        let om = 1.0 - xi;
        let xo = xi * om;
        let den = s + (dk1 + dk - 2.0 * s) * xo;
        let g = yk + dy * (s * xi * xi + dk * xo) / den;
        let dg = s * s * (dk1 * xi * xi + 2.0 * s * xo + dk * om * om) / (den * den);
        (g, dg)
    }
}

fn flush_run(ys: &mut Vec<f64>, run: &mut Vec<f64>) {
    if !run.is_empty() {
        ys.push(run.iter().sum::<f64>() / run.len() as f64);
        run.clear();
    }
}

/// Identity slope at both ends, three-point weighted slopes inside.
fn finite_difference_derivs(xs: &[f64], ys: &[f64]) -> Vec<f64> {
    let n = xs.len();
    let h: Vec<f64> = xs.windows(2).map(|w| w[1] - w[0]).collect();
    let s: Vec<f64> = (0..n - 1).map(|k| (ys[k + 1] - ys[k]) / h[k]).collect();
    let mut d = vec![1.0; n];
    for k in 1..n - 1 {
        d[k] = (s[k - 1] * h[k] + s[k] * h[k - 1]) / (h[k - 1] + h[k]);
    }
    d
}

#[cfg(test)]
mod tests {
    use super::*;

    fn identity_knots(alpha: f64) -> MonotoneTransform1D {
        MonotoneTransform1D::new(
            vec![-2.0, -0.5, 1.0, 3.0],
            vec![-2.0, -0.5, 1.0, 3.0],
            vec![1.0; 4],
            alpha,
            alpha,
        )
        .unwrap()
    }

    #[test]
    fn identity_knots_give_identity() {
        for alpha in [0.0, 0.4, 1.0] {
            let t = identity_knots(alpha);
            for x in [-5.0, -2.0, -1.3, 0.0, 0.7, 2.9, 3.0, 10.0] {
                let (y, ld) = t.forward(x);
                assert!((y - x).abs() < 1e-14, "{alpha} {x} {y}");
                assert!(ld.abs() < 1e-14);
                assert!((t.inverse(x) - x).abs() < 1e-11);
            }
        }
    }

    #[test]
    fn minimal_fit_three_points() {
        let cfg = SplineConfig::exact(2);
        let t = MonotoneTransform1D::fit(&[0.3, -1.0, 2.0], &cfg).unwrap();
        assert_eq!(t.knots_x().len(), 3);
        let ys: Vec<f64> = (-40..=40).map(|i| t.value(i as f64 * 0.1)).collect();
        assert!(ys.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn too_few_and_ties() {
        let cfg = SplineConfig::exact(4);
        assert!(matches!(
            MonotoneTransform1D::fit(&[1.0, 2.0], &cfg),
            Err(Error::TooFewSamples { .. })
        ));
        assert!(matches!(
            MonotoneTransform1D::fit(&[1.0; 50], &cfg),
            Err(Error::DuplicateKnots)
        ));
        let discrete: Vec<f64> = (0..300).map(|i| (i % 5) as f64).collect();
        let merged = MonotoneTransform1D::fit(&discrete, &SplineConfig::exact(16)).unwrap();
        assert!(merged.knots_x().windows(2).all(|w| w[0] < w[1]));
        let strict = SplineConfig {
            ties: TieHandling::Error,
            ..SplineConfig::exact(16)
        };
        assert!(matches!(
            MonotoneTransform1D::fit(&discrete, &strict),
            Err(Error::DuplicateKnots)
        ));
    }

    #[test]
    fn invalid_config() {
        assert!(SplineConfig::exact(1).validate().is_err());
        let cfg = SplineConfig {
            alpha_inner: 1.5,
            ..SplineConfig::default()
        };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn tails_are_continuous() {
        let samples: Vec<f64> = (0..200).map(|i| ((i as f64) * 0.731).sin() * 3.0 + 1.0).collect();
        let t = MonotoneTransform1D::fit(&samples, &SplineConfig::default()).unwrap();
        for &edge in [t.knots_x()[0], *t.knots_x().last().unwrap()].iter() {
            let left = t.value(edge - 1e-12);
            let right = t.value(edge + 1e-12);
            assert!((left - right).abs() < 1e-9);
        }
    }
}
