//! Windowed transforms of the Schrödinger trace `Tr U(t) = sum_j m_j e^{-i t lam_j}`.

mod mehler;
mod shift;
mod statphase;

pub use mehler::{mehler_eigensum, mehler_kernel};
pub use shift::{wavepacket_shift, ShiftMeasurement, ShiftReport};
pub use statphase::{
    critical_point, stationary_phase_oracle, CriticalPointCheck, ModelPhase, StatPhaseOptions, StatPhaseReport,
};

use std::f64::consts::{FRAC_PI_4, PI};

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{precondition, Error, Result};
use crate::fit::{envelope_fit, BinScheme, FitReport};
pub use crate::fit::{grid, Spacing};
use crate::quantize::SpectrumTable;
use crate::spectra::{WindowSpec, SINGULARITY_ISOLATION};

/// `I_n(lam)` sampled on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceTransform {
    pub n: i64,
    pub window: WindowSpec,
    pub lambda_grid: Vec<f64>,
    pub values: Vec<Complex64>,
}

impl TraceTransform {
    pub fn magnitudes(&self) -> Vec<f64> {
        self.values.iter().map(|z| z.norm()).collect()
    }

    /// CSV with header `lambda,re,im,abs`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("lambda,re,im,abs\n");
        for (l, z) in self.lambda_grid.iter().zip(&self.values) {
            s.push_str(&format!("{l:.16e},{:.16e},{:.16e},{:.16e}\n", z.re, z.im, z.norm()));
        }
        s
    }
}

/// `(2 pi)^{-1} sum_j m_j e^{i t_c (lam - lam_j)} C(lam - lam_j)` where `C` is the transform of
/// the centred window and `t_c` its centre. No support condition is imposed.
pub fn windowed_trace(table: &SpectrumTable, window: &WindowSpec, grid: &[f64]) -> Result<Vec<Complex64>> {
    window.validate()?;
    let cutoff = window.lambda_cutoff();
    for &lam in grid {
        if !lam.is_finite() {
            return Err(precondition("grid contains a non-finite point"));
        }
        table.check_trust(lam + cutoff)?;
    }
    let tc = window.center_t;
    let ev = table.eigenvalues();
    let m = table.multiplicities();
    Ok(grid
        .par_iter()
        .map(|&lam| {
            let lo = table.lower_index(lam - cutoff);
            let hi = table.upper_index(lam + cutoff);
            let mut acc = Complex64::new(0.0, 0.0);
            for i in lo..hi {
                let w = lam - ev[i];
                acc += Complex64::from_polar(m[i] as f64 * window.transform(w), tc * w);
            }
            acc / (2.0 * PI)
        })
        .collect())
}

/// `F^{-1}[chi(t - 2 pi n) Tr U(t)](lam)` for a window localized near `2 pi n`.
pub fn trace_transform(table: &SpectrumTable, n: i64, window: &WindowSpec, grid: &[f64]) -> Result<TraceTransform> {
    window.validate()?;
    let t0 = 2.0 * PI * n as f64;
    if !window.supported_within(t0, SINGULARITY_ISOLATION) {
        return Err(Error::WindowSupport(format!(
            "window centred at {} with effective half-support {} leaves ({} - pi/2, {} + pi/2)",
            window.center_t,
            window.effective_half_support(),
            t0,
            t0
        )));
    }
    let values = windowed_trace(table, window, grid)?;
    Ok(TraceTransform { n, window: *window, lambda_grid: grid.to_vec(), values })
}

/// Envelope exponent of `|I_n(lam)|` on half-octave bins over the grid range.
pub fn singularity_exponent(tt: &TraceTransform) -> Result<FitReport> {
    let mags = tt.magnitudes();
    let lo = tt.lambda_grid.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = tt.lambda_grid.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    envelope_fit(&tt.lambda_grid, &mags, BinScheme::Dyadic { per_octave: 2 }, lo, hi)
}

/// Largest ratio `|I_probe(lam)| / |I_ref(lam)|` over the grid, where the probe window sits away
/// from `2 pi Z` and the reference is centred at 0.
pub fn poisson_ratio(table: &SpectrumTable, probe: &WindowSpec, reference: &WindowSpec, grid: &[f64]) -> Result<f64> {
    let tc = probe.center_t;
    let dist = (tc - 2.0 * PI * (tc / (2.0 * PI)).round()).abs();
    if !(dist > FRAC_PI_4) || !probe.supported_within(tc, FRAC_PI_4) {
        return Err(Error::WindowSupport(format!(
            "probe window at t = {tc} must sit more than pi/4 from 2 pi Z with half-support at most pi/4"
        )));
    }
    if reference.center_t != 0.0 {
        return Err(precondition("reference window must be centred at 0"));
    }
    let p = windowed_trace(table, probe, grid)?;
    let r = windowed_trace(table, reference, grid)?;
    let mut worst: f64 = 0.0;
    for (a, b) in p.iter().zip(&r) {
        if b.norm() == 0.0 {
            return Err(Error::Numerical("reference transform vanishes".into()));
        }
        worst = worst.max(a.norm() / b.norm());
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quantize::{diagonal_model_spectrum, oscillator_spectrum, sqrt_oscillator_spectrum_scaled};
    use crate::spectra::DEFAULT_SIGMA_T;
    use serde_json::json;

    fn window(n: i64) -> WindowSpec {
        WindowSpec::gaussian(DEFAULT_SIGMA_T, 2.0 * PI * n as f64)
    }

    #[test]
    fn integer_clusters_grow_linearly() {
        let levels: Vec<(f64, u64)> = (1..2100).map(|j| (j as f64, j as u64)).collect();
        let t = SpectrumTable::from_levels(levels, 2100.0, "synthetic", json!({})).unwrap();
        let g = grid(50.0, 2000.0, 800, Spacing::Linear);
        let tt = trace_transform(&t, 1, &window(1), &g).unwrap();
        let f = singularity_exponent(&tt).unwrap();
        assert!((f.exponent - 1.0).abs() < 0.02, "{f:?}");
    }

    #[test]
    fn unit_multiplicities_stay_bounded() {
        let levels: Vec<(f64, u64)> = (1..2100).map(|j| (j as f64, 1)).collect();
        let t = SpectrumTable::from_levels(levels, 2100.0, "synthetic", json!({})).unwrap();
        let g = grid(50.0, 2000.0, 800, Spacing::Linear);
        let f = singularity_exponent(&trace_transform(&t, 1, &window(1), &g).unwrap()).unwrap();
        assert!(f.exponent.abs() < 0.02, "{f:?}");
    }

    #[test]
    fn shift_identity_against_direct_sum() {
        let t = diagonal_model_spectrum(&[0.3, 0.7], 140.0).unwrap();
        let w = window(1);
        let lam = 80.3;
        let v = windowed_trace(&t, &w, &[lam]).unwrap()[0];
        // direct time integral of chi(t - 2 pi) sum m e^{-i t lam_j} e^{i t lam}, trapezoid in t
        let (tc, s) = (2.0 * PI, DEFAULT_SIGMA_T);
        let n = 4000;
        let (a, b) = (tc - 12.0 * s, tc + 12.0 * s);
        let h = (b - a) / n as f64;
        let mut acc = Complex64::new(0.0, 0.0);
        for k in 0..=n {
            let tt = a + h * k as f64;
            let wt = if k == 0 || k == n { 0.5 } else { 1.0 };
            let mut tr = Complex64::new(0.0, 0.0);
            for (e, m) in t.eigenvalues().iter().zip(t.multiplicities()) {
                tr += *m as f64 * Complex64::from_polar(1.0, -tt * e);
            }
            acc += wt * h * w.time_value(tt - tc) * tr * Complex64::from_polar(1.0, tt * lam);
        }
        acc /= 2.0 * PI;
        assert!((acc - v).norm() < 1e-9 * v.norm().max(1.0), "{acc} {v}");
    }

    #[test]
    fn conjugate_symmetry_and_linearity() {
        let a = oscillator_spectrum(2, 200.0).unwrap();
        let b = sqrt_oscillator_spectrum_scaled(2, 0.5, 200.0).unwrap();
        let g = [60.0, 70.5, 90.25];
        let p = windowed_trace(&a, &window(1), &g).unwrap();
        let m = windowed_trace(&a, &window(-1), &g).unwrap();
        for (x, y) in p.iter().zip(&m) {
            assert!((x - y.conj()).norm() < 1e-9 * x.norm());
        }
        let u = a.union(&b).unwrap();
        let (pa, pb, pu) = (
            windowed_trace(&a, &window(1), &g).unwrap(),
            windowed_trace(&b, &window(1), &g).unwrap(),
            windowed_trace(&u, &window(1), &g).unwrap(),
        );
        for i in 0..g.len() {
            assert!((pa[i] + pb[i] - pu[i]).norm() < 1e-9 * pu[i].norm());
        }
    }

    #[test]
    fn main_singularity_of_oscillator() {
        let t = oscillator_spectrum(2, 1100.0).unwrap();
        let g = grid(50.0, 1000.0, 2000, Spacing::Linear);
        let f = singularity_exponent(&trace_transform(&t, 0, &window(0), &g).unwrap()).unwrap();
        assert!((f.exponent - 1.0).abs() < 0.05, "{f:?}");
    }

    #[test]
    fn wide_window_is_rejected() {
        let t = oscillator_spectrum(2, 200.0).unwrap();
        let err = trace_transform(&t, 1, &WindowSpec::gaussian(0.5, 2.0 * PI), &[50.0]).unwrap_err();
        assert!(matches!(err, Error::WindowSupport(_)));
        let err = trace_transform(&t, 1, &window(1), &[190.0]).unwrap_err();
        assert!(matches!(err, Error::Trust { .. }));
    }

    #[test]
    fn poisson_windows_are_small() {
        let t = diagonal_model_spectrum(&[0.3, 0.7], 460.0).unwrap();
        let g = grid(100.0, 400.0, 301, Spacing::Linear);
        let reference = window(0);
        for tc in [3.0, 5.0] {
            let probe = WindowSpec::gaussian(PI / 16.0, tc);
            let r = poisson_ratio(&t, &probe, &reference, &g).unwrap();
            assert!(r < 1e-3, "{tc} {r}");
        }
        assert!(poisson_ratio(&t, &WindowSpec::gaussian(PI / 16.0, 6.0), &reference, &g).is_err());
    }

    #[test]
    fn grids() {
        let g = grid(25.0, 400.0, 4, Spacing::Sqrt);
        assert_eq!(g, vec![25.0, 100.0, 225.0, 400.0]);
        let g = grid(1.0, 8.0, 4, Spacing::Geometric);
        assert!((g[1] - 2.0).abs() < 1e-15 && (g[2] - 4.0).abs() < 1e-14 && g[3] == 8.0);
    }
}
