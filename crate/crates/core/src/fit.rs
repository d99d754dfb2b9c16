//! Envelope power-law fits of oscillating magnitudes.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{precondition, Error, Result};

/// Smallest number of envelope points accepted by a fit.
pub const MIN_POINTS: usize = 8;

/// How the abscissa is cut into windows before taking per-window maxima.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "scheme", rename_all = "snake_case")]
pub enum BinScheme {
    /// Geometric windows, `per_octave` of them per doubling of lambda.
    Dyadic { per_octave: u32 },
    /// Windows of fixed width in `sqrt(lambda)`.
    SqrtUniform { width: f64 },
}

impl Default for BinScheme {
    fn default() -> Self {
        BinScheme::Dyadic { per_octave: 2 }
    }
}

impl BinScheme {
    /// Position of `lam` in bin units counted from `lo`.
    fn position(&self, lo: f64, lam: f64) -> f64 {
        match *self {
            BinScheme::Dyadic { per_octave } => (lam / lo).log2() * per_octave as f64,
            BinScheme::SqrtUniform { width } => (lam.sqrt() - lo.sqrt()) / width,
        }
    }

    /// Bin index of `lam`, or `None` past the last bin that fits inside `[lo, hi]`.
    /// A sample at `hi` itself belongs to the last complete bin.
    fn key(&self, lo: f64, hi: f64, lam: f64) -> Option<i64> {
        let top = self.position(lo, hi);
        let complete = (top + 1e-9).floor() as i64;
        let x = self.position(lo, lam);
        let k = x.floor() as i64;
        if complete == 0 || k < complete {
            Some(if complete == 0 { 0 } else { k })
        } else if x <= complete as f64 + 1e-9 {
            Some(complete - 1)
        } else {
            None
        }
    }

    fn describe(&self) -> String {
        match *self {
            BinScheme::Dyadic { per_octave } => format!("envelope log-log least squares, dyadic bins ({per_octave}/octave)"),
            BinScheme::SqrtUniform { width } => {
                format!("envelope log-log least squares, sqrt-uniform bins (width {width})")
            }
        }
    }
}

/// Measured power-law exponent of an envelope.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub exponent: f64,
    /// Half-width of the 95% confidence interval of the exponent.
    pub confidence_halfwidth: f64,
    /// Log of the prefactor.
    pub intercept: f64,
    pub lambda_range: (f64, f64),
    pub n_points: usize,
    pub method: String,
}

impl FitReport {
    pub fn contains(&self, lo: f64, hi: f64) -> bool {
        self.exponent >= lo && self.exponent <= hi
    }
}

/// Per-window maxima of `|values|`, returned as `(lambda, max)` pairs in increasing order.
/// Samples with `lambda` outside `[lo, hi]` are ignored, as are windows whose maximum is zero.
/// A trailing window that would reach past `hi` is dropped.
pub fn envelope(lambdas: &[f64], values: &[f64], scheme: BinScheme, lo: f64, hi: f64) -> Result<Vec<(f64, f64)>> {
    if lambdas.len() != values.len() {
        return Err(precondition("lambda and value lists differ in length"));
    }
    if !(lo > 0.0 && hi > lo) {
        return Err(precondition(format!("invalid fit range [{lo}, {hi}]")));
    }
    scheme.validate()?;
    let mut out: Vec<(i64, f64, f64)> = Vec::new();
    for (&lam, &v) in lambdas.iter().zip(values) {
        if !(lo..=hi).contains(&lam) {
            continue;
        }
        if !v.is_finite() {
            return Err(Error::Numerical(format!("non-finite value at lambda = {lam}")));
        }
        let Some(k) = scheme.key(lo, hi, lam) else { continue };
        match out.iter_mut().find(|(key, _, _)| *key == k) {
            Some(slot) => {
                if v.abs() > slot.2 {
                    slot.1 = lam;
                    slot.2 = v.abs();
                }
            }
            None => out.push((k, lam, v.abs())),
        }
    }
    out.sort_by_key(|e| e.0);
    Ok(out.into_iter().filter(|e| e.2 > 0.0).map(|e| (e.1, e.2)).collect())
}

impl BinScheme {
    fn validate(&self) -> Result<()> {
        match *self {
            BinScheme::Dyadic { per_octave: 0 } => Err(precondition("per_octave must be positive")),
            BinScheme::SqrtUniform { width } if !(width > 0.0) => Err(precondition("bin width must be positive")),
            _ => Ok(()),
        }
    }
}

/// Least-squares line through `(ln x, ln y)`.
pub fn fit_power_law(points: &[(f64, f64)], method: &str) -> Result<FitReport> {
    if points.len() < MIN_POINTS {
        return Err(precondition(format!(
            "fit needs at least {MIN_POINTS} envelope points, got {}",
            points.len()
        )));
    }
    if points.iter().any(|&(x, y)| !(x > 0.0 && y > 0.0)) {
        return Err(Error::Numerical("power-law fit needs positive data".into()));
    }
    let n = points.len() as f64;
    let xs: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::Numerical("all envelope points share one abscissa".into()));
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = xs.iter().zip(&ys).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();
    let dof = n - 2.0;
    let se = (rss / dof / sxx).sqrt();
    let t = StudentsT::new(0.0, 1.0, dof)
        .map_err(|e| Error::Numerical(e.to_string()))?
        .inverse_cdf(0.975);
    Ok(FitReport {
        exponent: slope,
        confidence_halfwidth: t * se,
        intercept,
        lambda_range: (points[0].0, points[points.len() - 1].0),
        n_points: points.len(),
        method: method.to_string(),
    })
}

/// Envelope maxima over `[lo, hi]` followed by a log-log fit.
pub fn envelope_fit(lambdas: &[f64], values: &[f64], scheme: BinScheme, lo: f64, hi: f64) -> Result<FitReport> {
    if values.iter().all(|v| *v == 0.0) {
        return Err(Error::Numerical("degenerate fit: all values vanish".into()));
    }
    let pts = envelope(lambdas, values, scheme, lo, hi)?;
    fit_power_law(&pts, &scheme.describe())
}

/// Ordinary least squares `y ~ X beta` by SVD. Returns the coefficients.
pub fn least_squares(design: &DMatrix<f64>, y: &[f64]) -> Result<Vec<f64>> {
    if design.nrows() != y.len() || design.nrows() < design.ncols() {
        return Err(precondition("least squares needs at least as many rows as unknowns"));
    }
    let svd = design.clone().svd(true, true);
    let beta = svd
        .solve(&DVector::from_column_slice(y), 1e-14)
        .map_err(|e| Error::Numerical(e.to_string()))?;
    Ok(beta.iter().copied().collect())
}

/// Spacing of a sample grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Spacing {
    Linear,
    Geometric,
    Sqrt,
}

/// `points` values from `lo` to `hi` inclusive.
pub fn grid(lo: f64, hi: f64, points: usize, spacing: Spacing) -> Vec<f64> {
    if points < 2 {
        return vec![lo];
    }
    let last = points - 1;
    (0..points)
        .map(|i| {
            if i == last {
                return hi;
            }
            let s = i as f64 / last as f64;
            match spacing {
                Spacing::Linear => lo + (hi - lo) * s,
                Spacing::Geometric => lo * (hi / lo).powf(s),
                Spacing::Sqrt => (lo.sqrt() + (hi.sqrt() - lo.sqrt()) * s).powi(2),
            }
        })
        .collect()
}
