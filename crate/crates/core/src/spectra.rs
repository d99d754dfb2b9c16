//! Counting functions, mollified counting and remainder diagnostics.

use std::f64::consts::{FRAC_PI_2, PI};

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use libm::erfc;

use crate::error::{precondition, Error, Result};
use crate::fit::{envelope_fit, least_squares, BinScheme, FitReport};
use crate::quantize::SpectrumTable;
use crate::symbols::{surface_integral_p0, surface_integral_p1, Symbol, SublevelVolume};

/// Shape of a time-side window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case", deny_unknown_fields)]
pub enum WindowShape {
    /// `exp(-t^2 / (2 sigma_t^2))`.
    Gaussian { sigma_t: f64 },
    /// `cos^2(pi t / (2 h))` on `|t| < h`.
    HannBump { half_width: f64 },
}

/// A window `chi(t - center_t)` with closed-form Fourier transform.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WindowSpec {
    #[serde(flatten)]
    pub shape: WindowShape,
    #[serde(default)]
    pub center_t: f64,
}

/// Standard deviation of the default mollifier and trace window.
pub const DEFAULT_SIGMA_T: f64 = PI / 8.0;

/// Number of sigmas counted as the effective support of a Gaussian.
pub const GAUSSIAN_SUPPORT_SIGMAS: f64 = 4.0;

impl WindowSpec {
    pub fn gaussian(sigma_t: f64, center_t: f64) -> Self {
        WindowSpec { shape: WindowShape::Gaussian { sigma_t }, center_t }
    }

    pub fn hann(half_width: f64, center_t: f64) -> Self {
        WindowSpec { shape: WindowShape::HannBump { half_width }, center_t }
    }

    /// Gaussian mollifier with `sigma_t = pi/8` centred at 0.
    pub fn mollifier() -> Self {
        Self::gaussian(DEFAULT_SIGMA_T, 0.0)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match self.shape {
            WindowShape::Gaussian { sigma_t } => sigma_t > 0.0 && sigma_t.is_finite(),
            WindowShape::HannBump { half_width } => half_width > 0.0 && half_width.is_finite(),
        };
        if !ok || !self.center_t.is_finite() {
            return Err(precondition(format!("invalid window {self:?}")));
        }
        Ok(())
    }

    /// Half-length of the time interval holding the window's effective mass.
    pub fn effective_half_support(&self) -> f64 {
        match self.shape {
            WindowShape::Gaussian { sigma_t } => GAUSSIAN_SUPPORT_SIGMAS * sigma_t,
            WindowShape::HannBump { half_width } => half_width,
        }
    }

    /// Fraction of `int |chi|` lying outside `|t - center_t| < half`.
    pub fn tail_mass(&self, half: f64) -> f64 {
        match self.shape {
            WindowShape::Gaussian { sigma_t } => erfc(half / (sigma_t * std::f64::consts::SQRT_2)),
            WindowShape::HannBump { half_width } => {
                if half >= half_width {
                    0.0
                } else {
                    let h = half_width;
                    let inside = half / h + (PI * half / h).sin() / PI;
                    1.0 - inside
                }
            }
        }
    }

    /// `chi(t)` before centring.
    pub fn time_value(&self, t: f64) -> f64 {
        match self.shape {
            WindowShape::Gaussian { sigma_t } => (-t * t / (2.0 * sigma_t * sigma_t)).exp(),
            WindowShape::HannBump { half_width } => {
                if t.abs() >= half_width {
                    0.0
                } else {
                    (PI * t / (2.0 * half_width)).cos().powi(2)
                }
            }
        }
    }

    /// `int chi(t) e^{-i t omega} dt` of the centred window (real and even).
    pub fn transform(&self, omega: f64) -> f64 {
        match self.shape {
            WindowShape::Gaussian { sigma_t } => {
                sigma_t * (2.0 * PI).sqrt() * (-0.5 * sigma_t * sigma_t * omega * omega).exp()
            }
            WindowShape::HannBump { half_width: h } => {
                let a = PI / h;
                let w = omega.abs();
                if w < 0.5 * a {
                    h * sinc(w * h) * a * a / (a * a - w * w)
                } else {
                    // sin(w h) = sin((a - w) h) since a h = pi
                    a * a * h / (w * (a + w)) * sinc((a - w) * h)
                }
            }
        }
    }

    /// Closed form of [`WindowSpec::transform`].
    pub fn analytic_transform(&self) -> String {
        match self.shape {
            WindowShape::Gaussian { sigma_t } => {
                format!("{sigma_t} * sqrt(2 pi) * exp(-{sigma_t}^2 omega^2 / 2)")
            }
            WindowShape::HannBump { half_width } => {
                format!("sin(omega h) (pi/h)^2 / (omega ((pi/h)^2 - omega^2)), h = {half_width}")
            }
        }
    }

    /// Natural width of the transform on the lambda side.
    pub fn lambda_width(&self) -> f64 {
        match self.shape {
            WindowShape::Gaussian { sigma_t } => 1.0 / sigma_t,
            WindowShape::HannBump { half_width } => PI / half_width,
        }
    }

    /// Distance in lambda beyond which transform terms are dropped.
    pub fn lambda_cutoff(&self) -> f64 {
        match self.shape {
            // exp(-50) relative
            WindowShape::Gaussian { sigma_t } => 10.0 / sigma_t,
            // the transform only decays like omega^-3
            WindowShape::HannBump { half_width } => 400.0 / half_width,
        }
    }

    /// The mollifier `rho = (2 pi)^{-1} transform`, whose time-side transform is `chi`.
    pub fn rho(&self, lam: f64) -> f64 {
        self.transform(lam) / (2.0 * PI)
    }

    fn require_mollifier(&self) -> Result<f64> {
        self.validate()?;
        match self.shape {
            WindowShape::Gaussian { sigma_t } if self.center_t == 0.0 => Ok(sigma_t),
            WindowShape::Gaussian { .. } => Err(precondition("mollifier must be centred at t = 0")),
            WindowShape::HannBump { .. } => {
                Err(precondition("hann window has a sign-changing transform and cannot serve as a mollifier"))
            }
        }
    }

    /// Whether the effective support sits inside `(t0 - half, t0 + half)`.
    pub fn supported_within(&self, t0: f64, half: f64) -> bool {
        (self.center_t - t0).abs() + self.effective_half_support() <= half * (1.0 + 4.0 * f64::EPSILON)
    }
}

fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-4 {
        1.0 - x * x / 6.0
    } else {
        x.sin() / x
    }
}

/// `N(lam)`, eigenvalues in `(-inf, lam]` counted with multiplicity.
pub fn counting(table: &SpectrumTable, lam: f64) -> Result<u64> {
    table.count(lam)
}

fn check_margin(table: &SpectrumTable, lam: f64, margin: f64) -> Result<()> {
    table.check_trust(lam + margin).map_err(|_| Error::Trust {
        requested: lam + margin,
        trust: table.lambda_trust(),
    })
}

/// Smoothed count at one point, `sum_j m_j Phi(sigma (lam - lam_j))`.
fn mollified_at(table: &SpectrumTable, sigma: f64, cutoff: f64, lam: f64) -> f64 {
    let lo = table.lower_index(lam - cutoff);
    let hi = table.upper_index(lam + cutoff);
    let ev = table.eigenvalues();
    let m = table.multiplicities();
    let mut acc = 0.0;
    for i in lo..hi {
        acc += m[i] as f64 * 0.5 * erfc(-sigma * (lam - ev[i]) / std::f64::consts::SQRT_2);
    }
    table.cumulative_before(lo) as f64 + acc
}

/// `(N * rho)(lam)` on a grid for a Gaussian mollifier `rho`.
pub fn mollified_counting(table: &SpectrumTable, rho: &WindowSpec, grid: &[f64]) -> Result<Vec<f64>> {
    let sigma = rho.require_mollifier()?;
    let cutoff = rho.lambda_cutoff();
    for &lam in grid {
        if !lam.is_finite() {
            return Err(precondition("grid contains a non-finite point"));
        }
        check_margin(table, lam, cutoff)?;
    }
    Ok(grid.par_iter().map(|&lam| mollified_at(table, sigma, cutoff, lam)).collect())
}

/// One row of the Weyl comparison table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeylRow {
    pub lambda: f64,
    pub n: u64,
    pub weyl_main: f64,
    pub weyl_second: f64,
    pub remainder: f64,
    pub smoothed: f64,
}

/// Result of comparing a spectrum with the two-term Weyl law.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeylCheck {
    pub remainder_fit: FitReport,
    /// Fitted coefficient of `lam^{d-1/2}` in `N(lam) - c_d lam^d`.
    pub fitted_coefficient: f64,
    /// `-surface_integral_p1`.
    pub expected_coefficient: f64,
    /// `|fitted - expected| / |expected|`, absent when the expected value is zero.
    pub coefficient_relative_error: Option<f64>,
    #[serde(skip)]
    pub rows: Vec<WeylRow>,
}

impl WeylCheck {
    pub fn coefficient_within(&self, rel: f64) -> bool {
        self.coefficient_relative_error.is_some_and(|e| e <= rel)
    }

    /// CSV with header `lambda,N,weyl_main,weyl_second,remainder,smoothed`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("lambda,N,weyl_main,weyl_second,remainder,smoothed\n");
        for r in &self.rows {
            s.push_str(&format!(
                "{:.16e},{},{:.16e},{:.16e},{:.16e},{:.16e}\n",
                r.lambda, r.n, r.weyl_main, r.weyl_second, r.remainder, r.smoothed
            ));
        }
        s
    }
}

/// Compares `N(lam)` with `(2 pi)^{-d} vol{p2 + p1 <= lam}` over `grid`.
///
/// The remainder envelope is fitted on dyadic half-octave bins, and the `lam^{d-1/2}`
/// coefficient of `N(lam) - c_d lam^d` is fitted against powers `lam^{d-1/2}, lam^{d-1}, ..., lam^0`.
pub fn weyl_two_term_check(
    table: &SpectrumTable,
    symbol: &Symbol,
    grid: &[f64],
    rho: &WindowSpec,
) -> Result<WeylCheck> {
    if symbol.has_degree(0) {
        return Err(precondition("two-term check expects a symbol without a degree-0 part"));
    }
    if grid.len() < 2 {
        return Err(precondition("grid needs at least two points"));
    }
    let d = symbol.d;
    let order = if d <= 2 { 24 } else { 12 };
    let vol = SublevelVolume::new(symbol, order, order)?;
    let principal = Symbol::new(d, symbol.terms.iter().filter(|t| t.degree() == 2).cloned().collect())?;
    let lead = SublevelVolume::new(&principal, order, order)?.at(1.0)?.value;
    let smoothed = mollified_counting(table, rho, grid)?;
    let mut rows = Vec::with_capacity(grid.len());
    for (&lam, &sm) in grid.iter().zip(&smoothed) {
        let n = table.count(lam)?;
        let main = vol.at(lam)?.value;
        let second = surface_integral_p0(symbol, lam)?;
        rows.push(WeylRow {
            lambda: lam,
            n,
            weyl_main: main,
            weyl_second: second,
            remainder: n as f64 - main - second,
            smoothed: sm,
        });
    }
    let lams: Vec<f64> = rows.iter().map(|r| r.lambda).collect();
    let rem: Vec<f64> = rows.iter().map(|r| r.remainder).collect();
    let (lo, hi) = (lams.iter().cloned().fold(f64::INFINITY, f64::min), lams.iter().cloned().fold(0.0, f64::max));
    let remainder_fit = envelope_fit(&lams, &rem, BinScheme::Dyadic { per_octave: 2 }, lo, hi)?;

    let powers: Vec<f64> = (1..=2 * d).map(|k| d as f64 - 0.5 * k as f64).collect();
    let design = DMatrix::from_fn(lams.len(), powers.len(), |i, j| lams[i].powf(powers[j] - d as f64 + 0.5));
    let y: Vec<f64> = rows
        .iter()
        .map(|r| (r.n as f64 - lead * r.lambda.powi(d as i32)) / r.lambda.powf(d as f64 - 0.5))
        .collect();
    let beta = least_squares(&design, &y)?;
    let fitted = beta[0];
    let expected = -surface_integral_p1(symbol)?;
    let rel = if expected != 0.0 { Some((fitted - expected).abs() / expected.abs()) } else { None };
    Ok(WeylCheck {
        remainder_fit,
        fitted_coefficient: fitted,
        expected_coefficient: expected,
        coefficient_relative_error: rel,
        rows,
    })
}

/// `(N(lam) - (N * rho)(lam)) / lam^{d-1}` over a grid.
pub fn tauberian_gap(table: &SpectrumTable, d: usize, rho: &WindowSpec, grid: &[f64]) -> Result<Vec<f64>> {
    if d == 0 {
        return Err(precondition("dimension must be at least 1"));
    }
    let smooth = mollified_counting(table, rho, grid)?;
    grid.iter()
        .zip(smooth)
        .map(|(&lam, s)| Ok((table.count(lam)? as f64 - s) / lam.powi(d as i32 - 1)))
        .collect()
}

/// Summary statistics of a Tauberian gap series.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GapTrend {
    pub max_abs: f64,
    /// Mean of `|gap|` over the first quarter of the grid.
    pub first_quartile_mean: f64,
    pub last_quartile_mean: f64,
    /// Largest `|gap|` in the upper half of the grid is at most twice the largest in the lower half.
    pub bounded: bool,
    pub decaying: bool,
}

pub fn gap_trend(gap: &[f64]) -> Result<GapTrend> {
    if gap.len() < 8 {
        return Err(precondition("gap series needs at least 8 points"));
    }
    if gap.iter().any(|g| !g.is_finite()) {
        return Err(Error::Numerical("non-finite gap".into()));
    }
    let n = gap.len();
    let q = n / 4;
    let mean_abs = |s: &[f64]| s.iter().map(|g| g.abs()).sum::<f64>() / s.len() as f64;
    let max_abs = |s: &[f64]| s.iter().fold(0.0f64, |a, g| a.max(g.abs()));
    let first = mean_abs(&gap[..q]);
    let last = mean_abs(&gap[n - q..]);
    Ok(GapTrend {
        max_abs: max_abs(gap),
        first_quartile_mean: first,
        last_quartile_mean: last,
        bounded: max_abs(&gap[n / 2..]) <= 2.0 * max_abs(&gap[..n / 2]),
        decaying: last < first,
    })
}

/// Largest time half-support allowed around a trace singularity.
pub const SINGULARITY_ISOLATION: f64 = FRAC_PI_2;
