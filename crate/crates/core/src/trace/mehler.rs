use std::f64::consts::{FRAC_PI_2, PI};

use num_complex::Complex64;

use crate::error::{domain, Result};
use crate::quadrature::hermite_functions_into;

const SINGULAR_GAP: f64 = 1e-6;

fn dist_to_lattice(t: f64, offset: f64, period: f64) -> f64 {
    let s = (t - offset) / period;
    ((s - s.round()) * period).abs()
}

/// Kernel of `e^{-i t H0}` with `H0 = (|D|^2 + |x|^2)/2`:
/// `(2 pi i sin t)^{-d/2} exp(i((|x|^2 + |y|^2) cos t - 2 x.y) / (2 sin t))`.
///
/// The square root follows `t - i0`, which gives the factor `e^{-i pi d (2m + 1)/4}` on
/// `(m pi, (m + 1) pi)`.
pub fn mehler_kernel(t: f64, x: &[f64], y: &[f64]) -> Result<Complex64> {
    if x.len() != y.len() || x.is_empty() {
        return Err(domain("x and y need equal nonzero length"));
    }
    if !t.is_finite() || x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(domain("non-finite argument"));
    }
    if dist_to_lattice(t, 0.0, PI) <= SINGULAR_GAP {
        return Err(domain(format!("t = {t} is within {SINGULAR_GAP} of pi Z, where the kernel is singular")));
    }
    if dist_to_lattice(t, FRAC_PI_2, 2.0 * PI) <= SINGULAR_GAP || dist_to_lattice(t, -FRAC_PI_2, 2.0 * PI) <= SINGULAR_GAP
    {
        return Err(domain(format!("t = {t} is within {SINGULAR_GAP} of 2 pi Z +- pi/2")));
    }
    let xc: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    let yc: Vec<Complex64> = y.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    Ok(kernel_complex(Complex64::new(t, 0.0), &xc, &yc))
}

/// The same formula for complex time (`Im t <= 0`) and complex positions, continued from the
/// real branch on the strip over `Re t`.
pub(crate) fn kernel_complex(t: Complex64, x: &[Complex64], y: &[Complex64]) -> Complex64 {
    let d = x.len() as f64;
    let m = (t.re / PI).floor();
    let sin = t.sin();
    let cos = t.cos();
    // sin(t) e^{-i m pi} has positive real part on the strip
    let s = if (m as i64).rem_euclid(2) == 0 { sin } else { -sin };
    let phase = Complex64::from_polar(1.0, -PI * d * (2.0 * m + 1.0) / 4.0);
    let pref = phase * (2.0 * PI * s).sqrt().powf(-d);
    let mut quad = Complex64::new(0.0, 0.0);
    let mut cross = Complex64::new(0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        quad += a * a + b * b;
        cross += a * b;
    }
    pref * (Complex64::i() * (quad * cos - 2.0 * cross) / (2.0 * sin)).exp()
}

/// `sum_n e^{-i t (n + 1/2)} psi_n(x) psi_n(y)` in one dimension, summed in the Abel sense:
/// the damped sums at `t - i eps` for eight values of `eps` are extrapolated to `eps = 0`.
pub fn mehler_eigensum(t: f64, x: f64, y: f64) -> Complex64 {
    const LEVELS: usize = 8;
    const EPS0: f64 = 0.02;
    let eps: Vec<f64> = (0..LEVELS).map(|k| EPS0 / 2f64.powi(k as i32)).collect();
    // terms below e^{-40} are dropped
    let nmax = (40.0 / eps[LEVELS - 1]).ceil() as usize;
    let mut px = Vec::new();
    let mut py = Vec::new();
    hermite_functions_into(nmax, x, &mut px);
    hermite_functions_into(nmax, y, &mut py);
    let sums: Vec<Complex64> = eps
        .iter()
        .map(|&e| {
            let top = ((40.0 / e).ceil() as usize).min(nmax);
            let step = Complex64::new(-e, -t).exp();
            let mut z = Complex64::new(-e * 0.5, -t * 0.5).exp();
            let mut acc = Complex64::new(0.0, 0.0);
            for n in 0..=top {
                acc += z * (px[n] * py[n]);
                z *= step;
                // keep the running phase accurate
                if n % 256 == 255 {
                    z = Complex64::new(-e * (n as f64 + 1.5), -t * (n as f64 + 1.5)).exp();
                }
            }
            acc
        })
        .collect();
    neville_at_zero(&eps, &sums)
}

fn neville_at_zero(xs: &[f64], ys: &[Complex64]) -> Complex64 {
    let mut p = ys.to_vec();
    let n = xs.len();
    for k in 1..n {
        for i in 0..n - k {
            p[i] = (p[i + 1] * xs[i] - p[i] * xs[i + k]) / (xs[i] - xs[i + k]);
        }
    }
    p[0]
}
