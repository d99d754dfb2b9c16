//! Direct quadrature of the model oscillatory integral
//! `I(lam) = int e^{i(t lam + psi2 + psi1)} chi(t) a dt dx deta` near `t0 = 2 pi n`.
//!
//! With `(x, eta) = lam^{1/2} r theta`, `mu = lam^{-1/2}` and `tau = t - t0`,
//! `psi2 = lam r^2 g(tau, u)` where `u = <x^, eta^>` and `g = (sec tau - 1) u - tan(tau)/2`,
//! while `psi1 = lam^{1/2} r f(theta)` with `f = -n X p1`. Then
//! `I = lam^d e^{i lam t0} int dtheta K(u(theta), f(theta))` with
//! `K(u, F) = int dtau chi(tau) e^{i lam tau} int dr A(r) r^{2d-1} e^{i lam (r^2 g + mu F r)}`.

use std::f64::consts::{PI, SQRT_2};

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{precondition, Error, Result};
use crate::fit::{envelope_fit, BinScheme, FitReport};
use crate::geometry::{classify_morse_bott, xray_stacked, XRAY_NODES};
use crate::quadrature::{gauss_legendre, SphereRule};
use crate::symbols::HomogeneousTerm;

/// Phase data of the model integral near `t0 = 2 pi n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelPhase {
    pub n: i64,
    pub d: usize,
    /// Degree-one term `p1` whose period average enters `psi1 = -n X p1`; `None` means `psi1 = 0`.
    pub p1: Option<HomogeneousTerm>,
    pub t0: f64,
    pub r0: f64,
}

impl ModelPhase {
    pub fn new(n: i64, d: usize, p1: Option<HomogeneousTerm>) -> Result<Self> {
        if !(1..=2).contains(&d) {
            return Err(precondition(format!("model integral is implemented for d = 1, 2, got {d}")));
        }
        if let Some(t) = &p1 {
            t.validate(d)?;
            if t.degree() != 1 {
                return Err(precondition("psi1 must come from a degree-1 term"));
            }
        }
        Ok(ModelPhase { n, d, p1, t0: 2.0 * PI * n as f64, r0: SQRT_2 })
    }

    /// `g(tau, u)` and its first two `tau` derivatives.
    pub fn g(tau: f64, u: f64) -> (f64, f64, f64) {
        let (s, c) = tau.sin_cos();
        let sec = 1.0 / c;
        let tan = s / c;
        let g = (sec - 1.0) * u - 0.5 * tan;
        let gt = sec * tan * u - 0.5 * sec * sec;
        let gtt = u * (sec * tan * tan + sec * sec * sec) - sec * sec * tan;
        (g, gt, gtt)
    }

    /// `psi2(t, r theta) = r^2 g(t - t0, u)`.
    pub fn psi2(&self, t: f64, r: f64, u: f64) -> f64 {
        r * r * Self::g(t - self.t0, u).0
    }

    /// `f(theta) = -n X p1(theta)` on the unit sphere.
    pub fn psi1_unit(&self, theta: &[f64]) -> Result<f64> {
        match &self.p1 {
            None => Ok(0.0),
            Some(t) => Ok(-(self.n as f64) * xray_stacked(t, theta, XRAY_NODES)?),
        }
    }
}

/// Stationary point `(t, r)` of `t + r^2 g(t - t0, u) + mu F r` by Newton iteration from `(t0, r0)`.
pub fn critical_point(mp: &ModelPhase, mu: f64, u: f64, f: f64) -> Result<(f64, f64)> {
    let (mut tau, mut r) = (0.0, mp.r0);
    for _ in 0..50 {
        let (g, gt, gtt) = ModelPhase::g(tau, u);
        let f1 = 1.0 + r * r * gt;
        let f2 = 2.0 * r * g + mu * f;
        if f1.abs() < 1e-15 && f2.abs() < 1e-15 {
            return Ok((mp.t0 + tau, r));
        }
        let (a, b, c, e) = (r * r * gtt, 2.0 * r * gt, 2.0 * r * gt, 2.0 * g);
        let det = a * e - b * c;
        if det.abs() < 1e-14 {
            return Err(Error::Numerical("degenerate critical point system".into()));
        }
        let dtau = (e * f1 - b * f2) / det;
        let dr = (a * f2 - c * f1) / det;
        tau -= dtau;
        r -= dr;
        if dtau.abs() < 1e-15 && dr.abs() < 1e-15 * r.abs() {
            return Ok((mp.t0 + tau, r));
        }
        if tau.abs() >= PI / 2.0 || r <= 0.0 {
            return Err(Error::Numerical(format!("critical point left the domain at mu = {mu}")));
        }
    }
    Err(Error::Numerical(format!("critical point iteration did not converge at mu = {mu}")))
}

/// Offsets of the critical point against the first-order prediction
/// `t - t0 = mu F r0 / 2` and `r - r0 = mu r0 u F r0 / 2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriticalPointCheck {
    pub mu: Vec<f64>,
    /// `max |(t - t0, r - r0)| / mu` over the sampled directions.
    pub max_offset_over_mu: Vec<f64>,
    /// `max |offset - first-order prediction| / mu^2`.
    pub max_second_order: Vec<f64>,
    /// The locator returns `(t0, r0)` exactly at `mu = 0`.
    pub exact_at_zero: bool,
}

/// Tunables of [`stationary_phase_oracle`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StatPhaseOptions {
    /// Half-width of the smooth time bump around `t0`.
    pub time_half_width: f64,
    /// Radial plateau `[a0, a1, b1, b0]` in units of `r0`: zero outside `(a0, b0)`, one on `[a1, b1]`.
    pub radial_cut: [f64; 4],
    pub u_nodes: usize,
    pub f_nodes: usize,
    /// Gauss-Legendre order in `s = |z_1|^2` on the 3-sphere.
    pub s_order: usize,
    /// Trapezoid nodes per circle angle.
    pub phi_order: usize,
    /// Largest phase change per 8-point panel.
    pub panel_phase: f64,
    pub refine_check: bool,
    pub bins: BinScheme,
    /// Lower end of the envelope fit; the smallest lambda when absent.
    pub fit_from: Option<f64>,
}

impl Default for StatPhaseOptions {
    fn default() -> Self {
        StatPhaseOptions {
            time_half_width: 0.45,
            radial_cut: [0.7, 0.85, 1.15, 1.3],
            u_nodes: 21,
            f_nodes: 16,
            s_order: 48,
            phi_order: 12,
            panel_phase: 4.0,
            refine_check: true,
            bins: BinScheme::SqrtUniform { width: 1.5 },
            fit_from: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatPhaseReport {
    pub lambdas: Vec<f64>,
    #[serde(skip)]
    pub values: Vec<Complex64>,
    pub fit: FitReport,
    /// `d - 1` without `psi1`, `d - 1 - k/4` for a Morse-Bott average with `k` nondegenerate
    /// directions, absent otherwise.
    pub expected_exponent: Option<f64>,
    pub critical: CriticalPointCheck,
    /// Change of the largest-lambda value under refinement, relative to the largest magnitude.
    pub refinement_error: Option<f64>,
}

impl StatPhaseReport {
    /// CSV with header `lambda,re,im,abs`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("lambda,re,im,abs\n");
        for (l, z) in self.lambdas.iter().zip(&self.values) {
            s.push_str(&format!("{l:.16e},{:.16e},{:.16e},{:.16e}\n", z.re, z.im, z.norm()));
        }
        s
    }
}

fn bump(x: f64) -> f64 {
    if x.abs() >= 1.0 {
        0.0
    } else {
        (1.0 - 1.0 / (1.0 - x * x)).exp()
    }
}

fn smoothstep(x: f64) -> f64 {
    let e = |t: f64| if t > 0.0 { (-1.0 / t).exp() } else { 0.0 };
    if x <= 0.0 {
        0.0
    } else if x >= 1.0 {
        1.0
    } else {
        e(x) / (e(x) + e(1.0 - x))
    }
}

fn plateau(r: f64, c: &[f64; 4]) -> f64 {
    if r < c[1] {
        smoothstep((r - c[0]) / (c[1] - c[0]))
    } else if r > c[2] {
        smoothstep((c[3] - r) / (c[3] - c[2]))
    } else {
        1.0
    }
}

fn panels(a: f64, b: f64, n: usize, gx: &[f64], gw: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let h = (b - a) / n as f64;
    let mut x = Vec::with_capacity(n * gx.len());
    let mut w = Vec::with_capacity(n * gx.len());
    for p in 0..n {
        let mid = a + h * (p as f64 + 0.5);
        for (xi, wi) in gx.iter().zip(gw) {
            x.push(mid + 0.5 * h * xi);
            w.push(0.5 * h * wi);
        }
    }
    (x, w)
}

/// Chebyshev points of the first kind on `[lo, hi]`.
fn cheb_nodes(n: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..n)
        .map(|i| 0.5 * (lo + hi) + 0.5 * (hi - lo) * (PI * (i as f64 + 0.5) / n as f64).cos())
        .collect()
}

/// Lagrange cardinal values at `x` for first-kind Chebyshev nodes, by the barycentric formula.
fn cardinals(nodes: &[f64], x: f64) -> Vec<f64> {
    let n = nodes.len();
    if n == 1 {
        return vec![1.0];
    }
    let mut out = vec![0.0; n];
    if let Some(k) = nodes.iter().position(|&v| v == x) {
        out[k] = 1.0;
        return out;
    }
    let mut total = 0.0;
    for i in 0..n {
        let w = (if i % 2 == 0 { 1.0 } else { -1.0 }) * (PI * (2 * i + 1) as f64 / (2 * n) as f64).sin();
        out[i] = w / (x - nodes[i]);
        total += out[i];
    }
    out.iter_mut().for_each(|v| *v /= total);
    out
}

struct SphereData {
    u: Vec<f64>,
    f: Vec<f64>,
    /// weight times angular amplitude
    w: Vec<f64>,
}

fn sphere_data(mp: &ModelPhase, amplitude: Option<&HomogeneousTerm>, opts: &StatPhaseOptions) -> Result<SphereData> {
    let (points, weights) = if mp.d == 1 {
        let m = 4 * opts.phi_order.max(4) + 16;
        let h = 2.0 * PI / m as f64;
        let pts: Vec<Vec<f64>> = (0..m).map(|k| vec![(h * k as f64).cos(), (h * k as f64).sin()]).collect();
        (pts, vec![h; m])
    } else {
        let rule = SphereRule::hopf_s3(opts.s_order, opts.phi_order);
        (rule.points, rule.weights)
    };
    let d = mp.d;
    let rows: Vec<Result<(f64, f64, f64)>> = points
        .par_iter()
        .zip(&weights)
        .map(|(p, &w)| {
            let u: f64 = (0..d).map(|j| p[j] * p[d + j]).sum();
            let f = mp.psi1_unit(p)?;
            let a = match amplitude {
                Some(t) => t.value(p)?,
                None => 1.0,
            };
            Ok((u, f, w * a))
        })
        .collect();
    let mut out = SphereData { u: Vec::new(), f: Vec::new(), w: Vec::new() };
    for r in rows {
        let (u, f, w) = r?;
        out.u.push(u);
        out.f.push(f);
        out.w.push(w);
    }
    Ok(out)
}

struct Resolution {
    panel_phase: f64,
    u_nodes: usize,
    f_nodes: usize,
}

fn integral(
    mp: &ModelPhase,
    sphere: &SphereData,
    opts: &StatPhaseOptions,
    res: &Resolution,
    lam: f64,
) -> Complex64 {
    let d = mp.d;
    let h = opts.time_half_width;
    let cut = opts.radial_cut.map(|v| v * mp.r0);
    let sq = lam.sqrt();

    let (fmin, fmax) = sphere.f.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |a, &v| (a.0.min(v), a.1.max(v)));
    let f_nodes = if fmax - fmin < 1e-12 { vec![0.5 * (fmin + fmax)] } else { cheb_nodes(res.f_nodes, fmin, fmax) };
    let u_nodes = cheb_nodes(res.u_nodes, -0.5, 0.5);
    let fabs = fmin.abs().max(fmax.abs());

    let (gx, gw) = gauss_legendre(8);
    let (_, gt_max, _) = ModelPhase::g(h, 0.5);
    let t_rate = lam * (1.0 + cut[3] * cut[3] * gt_max.abs());
    let nt = ((t_rate * 2.0 * h / res.panel_phase).ceil() as usize).max(4);
    let g_max = ModelPhase::g(h, 0.5).0.abs().max(ModelPhase::g(-h, 0.5).0.abs());
    let r_rate = lam * 2.0 * cut[3] * g_max + sq * fabs;
    let nr = ((r_rate * (cut[3] - cut[0]) / res.panel_phase).ceil() as usize).max(4);
    let (tau, wt) = panels(-h, h, nt, &gx, &gw);
    let (r, wr) = panels(cut[0], cut[3], nr, &gx, &gw);

    let e1: Vec<Complex64> = tau
        .iter()
        .zip(&wt)
        .map(|(&t, &w)| Complex64::from_polar(w * bump(t / h), lam * t))
        .collect();
    let radial: Vec<f64> = r.iter().zip(&wr).map(|(&x, &w)| w * plateau(x, &cut) * x.powi(2 * d as i32 - 1)).collect();
    // G_F[r] e^{-i sqrt(lam) F r0} so that the tabulated K is smooth in F
    let gf: Vec<Vec<Complex64>> = f_nodes
        .iter()
        .map(|&f| r.iter().zip(&radial).map(|(&x, &a)| Complex64::from_polar(a, sq * f * (x - mp.r0))).collect())
        .collect();

    // table[i][j] = K~(u_i, F_j)
    let table: Vec<Vec<Complex64>> = u_nodes
        .par_iter()
        .map(|&u| {
            let mut v = vec![Complex64::new(0.0, 0.0); r.len()];
            for (k, &t) in tau.iter().enumerate() {
                let g = ModelPhase::g(t, u).0;
                let e = e1[k];
                if e == Complex64::new(0.0, 0.0) {
                    continue;
                }
                for (vr, &x) in v.iter_mut().zip(&r) {
                    *vr += e * Complex64::from_polar(1.0, lam * x * x * g);
                }
            }
            gf.iter().map(|g| g.iter().zip(&v).map(|(a, b)| a * b).sum()).collect()
        })
        .collect();

    let total: Complex64 = (0..sphere.u.len())
        .into_par_iter()
        .map(|k| {
            let lu = cardinals(&u_nodes, sphere.u[k]);
            let lf = cardinals(&f_nodes, sphere.f[k]);
            let mut acc = Complex64::new(0.0, 0.0);
            for (i, a) in lu.iter().enumerate() {
                for (j, b) in lf.iter().enumerate() {
                    acc += table[i][j] * (a * b);
                }
            }
            acc * Complex64::from_polar(sphere.w[k], sq * sphere.f[k] * mp.r0)
        })
        .collect::<Vec<_>>()
        .into_iter()
        .sum();
    total * lam.powi(d as i32) * Complex64::from_polar(1.0, lam * mp.t0)
}

fn check_critical_points(mp: &ModelPhase, sphere: &SphereData) -> Result<CriticalPointCheck> {
    let mus = vec![0.2, 0.1, 0.05, 0.025];
    let stride = (sphere.u.len() / 64).max(1);
    let idx: Vec<usize> = (0..sphere.u.len()).step_by(stride).collect();
    let mut exact = true;
    for &k in &idx {
        let (t, r) = critical_point(mp, 0.0, sphere.u[k], sphere.f[k])?;
        exact &= t == mp.t0 && r == mp.r0;
    }
    let mut first = Vec::new();
    let mut second = Vec::new();
    for &mu in &mus {
        let (mut m1, mut m2) = (0.0f64, 0.0f64);
        for &k in &idx {
            let (u, f) = (sphere.u[k], sphere.f[k]);
            let (t, r) = critical_point(mp, mu, u, f)?;
            let (dt, dr) = (t - mp.t0, r - mp.r0);
            let psi1 = f * mp.r0;
            let (pt, pr) = (mu * psi1 / 2.0, mu * mp.r0 * u * psi1 / 2.0);
            m1 = m1.max(dt.hypot(dr) / mu);
            m2 = m2.max((dt - pt).hypot(dr - pr) / (mu * mu));
        }
        first.push(m1);
        second.push(m2);
    }
    Ok(CriticalPointCheck { mu: mus, max_offset_over_mu: first, max_second_order: second, exact_at_zero: exact })
}

/// Evaluates the model integral on `lambdas` and fits its envelope exponent.
pub fn stationary_phase_oracle(
    mp: &ModelPhase,
    amplitude: Option<&HomogeneousTerm>,
    lambdas: &[f64],
    opts: &StatPhaseOptions,
) -> Result<StatPhaseReport> {
    if lambdas.iter().any(|l| !(*l > 0.0 && l.is_finite())) {
        return Err(precondition("lambda values must be positive"));
    }
    if !(opts.time_half_width > 0.0 && opts.time_half_width < 1.0) {
        return Err(precondition("time_half_width must lie in (0, 1)"));
    }
    let c = opts.radial_cut;
    if !(0.0 < c[0] && c[0] < c[1] && c[1] <= 1.0 && 1.0 <= c[2] && c[2] < c[3] && c[3] <= 3.0) {
        return Err(precondition("radial_cut must increase around 1 and stay inside (0, 3]"));
    }
    if opts.u_nodes < 2 || opts.f_nodes < 2 || !(opts.panel_phase > 0.0) {
        return Err(precondition("interpolation needs at least two nodes per direction"));
    }
    let sphere = sphere_data(mp, amplitude, opts)?;
    let base = Resolution { panel_phase: opts.panel_phase, u_nodes: opts.u_nodes, f_nodes: opts.f_nodes };
    let values: Vec<Complex64> = lambdas.iter().map(|&l| integral(mp, &sphere, opts, &base, l)).collect();

    let refinement_error = if opts.refine_check && !lambdas.is_empty() {
        let (k, &lmax) = lambdas.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).expect("nonempty");
        let fine = Resolution {
            panel_phase: opts.panel_phase / 1.5,
            u_nodes: opts.u_nodes + 8,
            f_nodes: opts.f_nodes + 4,
        };
        let v = integral(mp, &sphere, opts, &fine, lmax);
        let scale = values.iter().fold(0.0f64, |a, z| a.max(z.norm()));
        let err = (v - values[k]).norm() / scale;
        if err > 1e-6 {
            return Err(Error::Quadrature(format!(
                "model integral changed by {err:e} (relative) under refinement at lambda = {lmax}"
            )));
        }
        Some(err)
    } else {
        None
    };

    let mags: Vec<f64> = values.iter().map(|z| z.norm()).collect();
    let lo = lambdas.iter().cloned().fold(f64::INFINITY, f64::min).max(opts.fit_from.unwrap_or(0.0));
    let hi = lambdas.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let fit = envelope_fit(lambdas, &mags, opts.bins, lo, hi)?;

    let d = mp.d as f64;
    let expected_exponent = match &mp.p1 {
        None => Some(d - 1.0),
        Some(_) if mp.n == 0 => Some(d - 1.0),
        Some(t) if mp.d >= 2 => {
            let report = classify_morse_bott(t, mp.d, 64, 0)?;
            report.is_morse_bott.then(|| d - 1.0 - report.k_min as f64 / 4.0)
        }
        Some(_) => None,
    };
    let critical = check_critical_points(mp, &sphere)?;
    Ok(StatPhaseReport { lambdas: lambdas.to_vec(), values, fit, expected_exponent, critical, refinement_error })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fit::{grid, Spacing};
    use crate::geometry::hopf_pullback;

    #[test]
    fn phase_hypotheses_hold() {
        let mp = ModelPhase::new(1, 2, None).unwrap();
        for u in [-0.5, -0.1, 0.0, 0.3, 0.5] {
            assert_eq!(mp.psi2(mp.t0, 1.7, u), 0.0);
            let (_, gt, gtt) = ModelPhase::g(0.0, u);
            assert!((mp.r0 * mp.r0 * gt + 1.0).abs() < 1e-15);
            assert!((mp.r0 * mp.r0 * gtt - 2.0 * u).abs() < 1e-15);
        }
        // derivatives against differences
        let (tau, u, h) = (0.3, 0.2, 1e-5);
        let (_, gt, gtt) = ModelPhase::g(tau, u);
        let fd1 = (ModelPhase::g(tau + h, u).0 - ModelPhase::g(tau - h, u).0) / (2.0 * h);
        let fd2 = (ModelPhase::g(tau + h, u).1 - ModelPhase::g(tau - h, u).1) / (2.0 * h);
        assert!((gt - fd1).abs() < 1e-9 && (gtt - fd2).abs() < 1e-9);
    }

    #[test]
    fn critical_point_at_zero_is_exact() {
        let mp = ModelPhase::new(1, 2, Some(hopf_pullback(&[-0.35, 0.35]))).unwrap();
        for (u, f) in [(0.0, 1.0), (0.4, -2.0), (-0.5, 0.3)] {
            assert_eq!(critical_point(&mp, 0.0, u, f).unwrap(), (2.0 * PI, SQRT_2));
        }
        let (t, r) = critical_point(&mp, 1e-3, 0.25, 1.5).unwrap();
        assert!((t - 2.0 * PI - 1e-3 * 1.5 * SQRT_2 / 2.0).abs() < 1e-5);
        assert!((r - SQRT_2 - 1e-3 * SQRT_2 * 0.25 * 1.5 * SQRT_2 / 2.0).abs() < 1e-5);
    }

    #[test]
    fn control_d1_has_constant_amplitude() {
        let mp = ModelPhase::new(1, 1, None).unwrap();
        let lams = grid(25.0, 225.0, 41, Spacing::Sqrt);
        let opts = StatPhaseOptions { bins: BinScheme::SqrtUniform { width: 1.0 }, ..Default::default() };
        let rep = stationary_phase_oracle(&mp, None, &lams, &opts).unwrap();
        // leading stationary phase term is 4 pi^2, corrections are O(1/lam)
        for (_, z) in lams.iter().zip(&rep.values).filter(|(l, _)| **l >= 100.0) {
            assert!((z.norm() - 4.0 * PI * PI).abs() < 0.02 * 4.0 * PI * PI, "{z}");
        }
        assert!(rep.fit.exponent.abs() < 0.15, "{:?}", rep.fit);
        assert_eq!(rep.expected_exponent, Some(0.0));
        assert!(rep.critical.exact_at_zero);
        assert!(rep.refinement_error.unwrap() < 1e-6);
    }

    #[test]
    fn control_d2_grows_linearly() {
        let mp = ModelPhase::new(1, 2, None).unwrap();
        let lams = grid(25.0, 144.0, 29, Spacing::Sqrt);
        let opts = StatPhaseOptions { bins: BinScheme::SqrtUniform { width: 0.8 }, ..Default::default() };
        let rep = stationary_phase_oracle(&mp, None, &lams, &opts).unwrap();
        // 8 pi^3 lam at leading order
        let last = rep.values.last().unwrap().norm() / 144.0;
        assert!((last - 8.0 * PI.powi(3)).abs() < 0.02 * 8.0 * PI.powi(3), "{last}");
        assert!((rep.fit.exponent - 1.0).abs() < 0.05, "{:?}", rep.fit);
    }

    #[test]
    fn rejects_bad_options() {
        let mp = ModelPhase::new(1, 1, None).unwrap();
        let bad = StatPhaseOptions { radial_cut: [0.9, 0.8, 1.1, 1.2], ..Default::default() };
        assert!(stationary_phase_oracle(&mp, None, &[25.0], &bad).is_err());
        assert!(ModelPhase::new(1, 3, None).is_err());
    }
}
