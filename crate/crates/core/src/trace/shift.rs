//! Position shift of a coherent wavepacket after `n` full periods of the diagonal model.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{precondition, Error, Result};
use crate::geometry::{hopf_pullback, xray_average, PhasePoint, FD_STEP, XRAY_NODES};
use crate::quadrature::hermite_functions_into;
use crate::quantize::diagonal_eigenvalue;

const MAX_LEAK: f64 = 1e-6;
const MAX_LEVELS: usize = 4096;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShiftMeasurement {
    pub n: i64,
    /// Change of `<x>` per coordinate.
    pub measured: Vec<f64>,
    /// `n grad_xi X p1 (0, xi0)`.
    pub predicted: Vec<f64>,
    /// `|measured - predicted| / |predicted|`.
    pub relative_deviation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShiftReport {
    pub c: Vec<f64>,
    pub carrier: Vec<f64>,
    pub width: f64,
    pub measurements: Vec<ShiftMeasurement>,
    /// Largest relative spread of `measured / n` across the requested `n`.
    pub linearity_deviation: f64,
    /// Packet mass outside the truncated basis.
    pub leaked_mass: f64,
    pub levels_per_coordinate: Vec<usize>,
}

impl ShiftReport {
    /// CSV with header `n,coordinate,measured,predicted`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("n,coordinate,measured,predicted\n");
        for m in &self.measurements {
            for (j, (a, b)) in m.measured.iter().zip(&m.predicted).enumerate() {
                s.push_str(&format!("{},{j},{a:.16e},{b:.16e}\n", m.n));
            }
        }
        s
    }
}

/// Hermite coefficients of `(pi w^2)^{-1/4} exp(-x^2/(2 w^2) + i xi0 x)` up to level `nmax`,
/// by the trapezoid rule on a grid that resolves the fastest oscillation.
fn coefficients_upto(xi0: f64, width: f64, nmax: usize) -> Vec<Complex64> {
    let half = 9.5 * width;
    let top = xi0.abs() + (2.0 * nmax as f64 + 1.0).sqrt() + 8.0 / width;
    let steps = ((2.0 * half * top / PI).ceil() as usize).max(64);
    let h = 2.0 * half / steps as f64;
    let norm = (PI * width * width).powf(-0.25);
    let mut out = vec![Complex64::new(0.0, 0.0); nmax + 1];
    let mut psi = Vec::with_capacity(nmax + 1);
    for k in 0..=steps {
        let x = -half + h * k as f64;
        let u = Complex64::from_polar(norm * (-0.5 * x * x / (width * width)).exp(), xi0 * x) * h;
        hermite_functions_into(nmax, x, &mut psi);
        for (o, p) in out.iter_mut().zip(&psi) {
            *o += u * *p;
        }
    }
    out
}

fn packet_coefficients(xi0: f64, width: f64) -> Result<(Vec<Complex64>, f64)> {
    let mut nmax = 64;
    loop {
        let c = coefficients_upto(xi0, width, nmax);
        let tail: f64 = c[nmax - 16..].iter().map(|z| z.norm_sqr()).sum();
        let mass: f64 = c.iter().map(|z| z.norm_sqr()).sum();
        let leak = (1.0 - mass).max(0.0);
        if tail < 1e-16 || nmax >= MAX_LEVELS {
            if leak > MAX_LEAK || tail > MAX_LEAK {
                return Err(Error::Numerical(format!(
                    "wavepacket leaks {:e} of its mass past level {nmax}",
                    leak.max(tail)
                )));
            }
            // drop negligible top levels
            let keep = c.iter().rposition(|z| z.norm_sqr() > 1e-32).map_or(1, |k| k + 1);
            return Ok((c[..keep].to_vec(), leak));
        }
        nmax *= 2;
    }
}

fn mean_position(state: &[Complex64], dims: &[usize]) -> Vec<f64> {
    let d = dims.len();
    let mut strides = vec![1usize; d];
    for j in (0..d.saturating_sub(1)).rev() {
        strides[j] = strides[j + 1] * dims[j + 1];
    }
    let mut out = vec![0.0; d];
    let mut alpha = vec![0usize; d];
    for (idx, a) in state.iter().enumerate() {
        let mut rest = idx;
        for j in 0..d {
            alpha[j] = rest / strides[j];
            rest %= strides[j];
        }
        for j in 0..d {
            if alpha[j] + 1 < dims[j] {
                let b = state[idx + strides[j]];
                out[j] += (a.conj() * b).re * ((alpha[j] + 1) as f64).sqrt();
            }
        }
    }
    out.iter().map(|v| v * 2f64.sqrt()).collect()
}

/// Evolves a coherent packet centred at `x = 0` with momentum `carrier` under the diagonal model
/// with coefficients `c` for `n` periods and compares the change of `<x>` with
/// `n grad_xi X p1 (0, carrier)`.
pub fn wavepacket_shift(c: &[f64], ns: &[i64], carrier: &[f64], width: f64) -> Result<ShiftReport> {
    let d = c.len();
    if d == 0 || carrier.len() != d {
        return Err(precondition("carrier and c need the same nonzero length"));
    }
    if !(0.2..=3.0).contains(&width) {
        return Err(precondition(format!("packet width {width} outside [0.2, 3]")));
    }
    if ns.is_empty() || ns.contains(&0) {
        return Err(precondition("need at least one nonzero period count"));
    }
    if c.iter().chain(carrier).any(|v| !v.is_finite()) || carrier.iter().all(|v| *v == 0.0) {
        return Err(precondition("carrier must be finite and nonzero"));
    }

    let mut per_coord = Vec::with_capacity(d);
    let mut leak = 0.0;
    for &xi in carrier {
        let (coef, l) = packet_coefficients(xi, width)?;
        leak += l;
        per_coord.push(coef);
    }
    if leak > MAX_LEAK {
        return Err(Error::Numerical(format!("wavepacket leaks {leak:e} of its mass")));
    }
    let dims: Vec<usize> = per_coord.iter().map(|v| v.len()).collect();
    let total: usize = dims.iter().product();
    let mut state = vec![Complex64::new(1.0, 0.0); total];
    let mut levels = vec![vec![0u32; d]; total];
    for (idx, (s, lv)) in state.iter_mut().zip(levels.iter_mut()).enumerate() {
        let mut rest = idx;
        for j in (0..d).rev() {
            let a = rest % dims[j];
            rest /= dims[j];
            *s *= per_coord[j][a];
            lv[j] = a as u32;
        }
    }
    let eig: Vec<f64> = levels.iter().map(|a| diagonal_eigenvalue(c, a)).collect();
    let before = mean_position(&state, &dims);

    let term = hopf_pullback(c);
    let scale = carrier.iter().map(|v| v * v).sum::<f64>().sqrt();
    let h = FD_STEP * scale;
    let mut gradient = vec![0.0; d];
    for j in 0..d {
        let mut plus = carrier.to_vec();
        let mut minus = carrier.to_vec();
        plus[j] += h;
        minus[j] -= h;
        let fp = xray_average(&term, &PhasePoint::new(vec![0.0; d], plus)?, XRAY_NODES)?;
        let fm = xray_average(&term, &PhasePoint::new(vec![0.0; d], minus)?, XRAY_NODES)?;
        gradient[j] = (fp - fm) / (2.0 * h);
    }

    let mut measurements = Vec::with_capacity(ns.len());
    for &n in ns {
        let t = 2.0 * PI * n as f64;
        let evolved: Vec<Complex64> =
            state.iter().zip(&eig).map(|(a, &e)| a * Complex64::from_polar(1.0, -t * e)).collect();
        let after = mean_position(&evolved, &dims);
        let measured: Vec<f64> = after.iter().zip(&before).map(|(a, b)| a - b).collect();
        let predicted: Vec<f64> = gradient.iter().map(|g| n as f64 * g).collect();
        let diff = measured.iter().zip(&predicted).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        let size = predicted.iter().map(|v| v * v).sum::<f64>().sqrt();
        if size == 0.0 {
            return Err(Error::Numerical("predicted shift vanishes".into()));
        }
        measurements.push(ShiftMeasurement { n, measured, predicted, relative_deviation: diff / size });
    }

    let reference = measurements.iter().min_by_key(|m| m.n.unsigned_abs()).expect("nonempty");
    let per_period: Vec<f64> = reference.measured.iter().map(|v| v / reference.n as f64).collect();
    let ref_size = per_period.iter().map(|v| v * v).sum::<f64>().sqrt();
    let mut linearity_deviation: f64 = 0.0;
    for m in &measurements {
        let dev = m
            .measured
            .iter()
            .zip(&per_period)
            .map(|(a, b)| (a / m.n as f64 - b).powi(2))
            .sum::<f64>()
            .sqrt();
        linearity_deviation = linearity_deviation.max(dev / ref_size);
    }

    Ok(ShiftReport {
        c: c.to_vec(),
        carrier: carrier.to_vec(),
        width,
        measurements,
        linearity_deviation,
        leaked_mass: leak,
        levels_per_coordinate: dims,
    })
}
