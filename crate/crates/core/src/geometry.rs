//! Harmonic flow, period averages, calculus on the unit sphere of phase space and a
//! Morse-Bott classifier for period-averaged degree-one terms.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::symbols::HomogeneousTerm;

/// Default node count for the period average.
pub const XRAY_NODES: usize = 256;

/// Finite-difference step used on the sphere.
pub const FD_STEP: f64 = 1e-5;

/// A point (x, xi) of phase space R^{2d}.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhasePoint {
    pub x: Vec<f64>,
    pub xi: Vec<f64>,
}

impl PhasePoint {
    pub fn new(x: Vec<f64>, xi: Vec<f64>) -> Result<Self> {
        if x.is_empty() || x.len() != xi.len() {
            return Err(domain(format!(
                "phase point needs equal nonzero lengths, got {} and {}",
                x.len(),
                xi.len()
            )));
        }
        if x.iter().chain(&xi).any(|v| !v.is_finite()) {
            return Err(domain("phase point has non-finite entries"));
        }
        Ok(PhasePoint { x, xi })
    }

    /// Builds a point from the stacked layout (x_1..x_d, xi_1..xi_d).
    pub fn from_stacked(w: &[f64]) -> Self {
        let d = w.len() / 2;
        PhasePoint { x: w[..d].to_vec(), xi: w[d..].to_vec() }
    }

    pub fn stacked(&self) -> Vec<f64> {
        let mut w = self.x.clone();
        w.extend_from_slice(&self.xi);
        w
    }

    pub fn dim(&self) -> usize {
        self.x.len()
    }

    pub fn norm(&self) -> f64 {
        self.x.iter().chain(&self.xi).map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// A real function on phase space, evaluated at stacked coordinates (x, xi).
pub trait PhaseFn: Sync {
    fn eval(&self, w: &[f64]) -> Result<f64>;
}

impl<F> PhaseFn for F
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    fn eval(&self, w: &[f64]) -> Result<f64> {
        Ok(self(w))
    }
}

/// Image of `point` under the harmonic flow at time `t`.
pub fn flow(point: &PhasePoint, t: f64) -> PhasePoint {
    let (s, c) = t.sin_cos();
    let x = point.x.iter().zip(&point.xi).map(|(x, xi)| c * x + s * xi).collect();
    let xi = point.x.iter().zip(&point.xi).map(|(x, xi)| c * xi - s * x).collect();
    PhasePoint { x, xi }
}

fn flow_stacked(w: &[f64], t: f64, out: &mut [f64]) {
    let d = w.len() / 2;
    let (s, c) = t.sin_cos();
    for j in 0..d {
        out[j] = c * w[j] + s * w[d + j];
        out[d + j] = c * w[d + j] - s * w[j];
    }
}

/// Integral of `f` over one period of the flow through `point`, by the periodic trapezoid rule.
pub fn xray_average(f: &dyn PhaseFn, point: &PhasePoint, quadrature_order: usize) -> Result<f64> {
    xray_stacked(f, &point.stacked(), quadrature_order)
}

pub(crate) fn xray_stacked(f: &dyn PhaseFn, w: &[f64], order: usize) -> Result<f64> {
    if order < 4 {
        return Err(domain(format!("quadrature order {order} is below 4")));
    }
    let h = 2.0 * PI / order as f64;
    let mut buf = vec![0.0; w.len()];
    let mut acc = 0.0;
    for k in 0..order {
        let t = h * k as f64;
        flow_stacked(w, t, &mut buf);
        let v = f.eval(&buf)?;
        if !v.is_finite() {
            return Err(Error::NonFinite { t });
        }
        acc += v;
    }
    Ok(acc * h)
}

/// The Hopf pullback term `(sum_j c_j (x_j^2 + xi_j^2)/2) / sqrt(p2)`.
pub fn hopf_pullback(c: &[f64]) -> HomogeneousTerm {
    let d = c.len();
    let n = 2 * d;
    let mut q = vec![vec![0.0; n]; n];
    for (j, &cj) in c.iter().enumerate() {
        // value = w^T Q w / sqrt(2 p2) = w^T Q w / |w|
        q[j][j] = cj / 2f64.sqrt();
        q[d + j][d + j] = cj / 2f64.sqrt();
    }
    HomogeneousTerm::QuadraticOverRoot { degree: 1, q }
}

fn normalize(v: &mut [f64]) {
    let n = v.iter().map(|a| a * a).sum::<f64>().sqrt();
    v.iter_mut().for_each(|a| *a /= n);
}

/// Orthonormal basis of the tangent space at `theta`, optionally also orthogonal to the
/// flow direction `J theta = (xi, -x)`.
pub fn tangent_frame(theta: &[f64], exclude_flow: bool) -> Vec<Vec<f64>> {
    let n = theta.len();
    let d = n / 2;
    let mut basis: Vec<Vec<f64>> = vec![theta.to_vec()];
    if exclude_flow {
        let mut jt = vec![0.0; n];
        for j in 0..d {
            jt[j] = theta[d + j];
            jt[d + j] = -theta[j];
        }
        basis.push(jt);
    }
    let fixed = basis.len();
    // Gram-Schmidt on coordinate vectors, ordered by how little they overlap the fixed set
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        let oa: f64 = basis.iter().map(|v| v[a] * v[a]).sum();
        let ob: f64 = basis.iter().map(|v| v[b] * v[b]).sum();
        oa.partial_cmp(&ob).unwrap().then(a.cmp(&b))
    });
    for &i in &order {
        if basis.len() == n {
            break;
        }
        let mut e = vec![0.0; n];
        e[i] = 1.0;
        for _ in 0..2 {
            for b in &basis {
                let p: f64 = b.iter().zip(&e).map(|(x, y)| x * y).sum();
                e.iter_mut().zip(b).for_each(|(x, y)| *x -= p * y);
            }
        }
        let nrm = e.iter().map(|v| v * v).sum::<f64>().sqrt();
        if nrm > 1e-6 {
            e.iter_mut().for_each(|v| *v /= nrm);
            basis.push(e);
        }
    }
    basis.split_off(fixed)
}

/// Gradient and Hessian of `g` restricted to the sphere, in the coordinates of `frame`.
///
/// Uses central differences of `g(R(theta + h v))` with the normalization retraction `R`; the
/// retraction is second order, so the result is the Riemannian Hessian at any point.
fn frame_grad_hess(
    g: &dyn Fn(&[f64]) -> Result<f64>,
    theta: &[f64],
    frame: &[Vec<f64>],
    h: f64,
) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let m = frame.len();
    let at = |coef: &[(usize, f64)]| -> Result<f64> {
        let mut p = theta.to_vec();
        for &(i, a) in coef {
            p.iter_mut().zip(&frame[i]).for_each(|(x, v)| *x += a * v);
        }
        normalize(&mut p);
        g(&p)
    };
    let f0 = g(theta)?;
    let mut grad = DVector::zeros(m);
    let mut hess = DMatrix::zeros(m, m);
    let mut plus = vec![0.0; m];
    let mut minus = vec![0.0; m];
    for i in 0..m {
        plus[i] = at(&[(i, h)])?;
        minus[i] = at(&[(i, -h)])?;
        grad[i] = (plus[i] - minus[i]) / (2.0 * h);
        hess[(i, i)] = (plus[i] - 2.0 * f0 + minus[i]) / (h * h);
    }
    for i in 0..m {
        for j in i + 1..m {
            let pp = at(&[(i, h), (j, h)])?;
            let pm = at(&[(i, h), (j, -h)])?;
            let mp = at(&[(i, -h), (j, h)])?;
            let mm = at(&[(i, -h), (j, -h)])?;
            let v = (pp - pm - mp + mm) / (4.0 * h * h);
            hess[(i, j)] = v;
            hess[(j, i)] = v;
        }
    }
    Ok((grad, hess))
}

/// Gradient and Hessian of the restriction of `f` to the unit sphere at `point`.
///
/// The gradient is returned in ambient coordinates (it is tangent to the sphere); the Hessian
/// is expressed in the orthonormal tangent frame returned alongside it.
pub fn sphere_grad_hess(
    f: &dyn PhaseFn,
    point: &PhasePoint,
) -> Result<(Vec<f64>, DMatrix<f64>, Vec<Vec<f64>>)> {
    let theta = point.stacked();
    let nrm = point.norm();
    if (nrm - 1.0).abs() > 1e-12 {
        return Err(domain(format!("point has norm {nrm}, expected 1")));
    }
    let frame = tangent_frame(&theta, false);
    let g = |w: &[f64]| f.eval(w);
    let (gc, h) = frame_grad_hess(&g, &theta, &frame, FD_STEP)?;
    let mut grad = vec![0.0; theta.len()];
    for (i, v) in frame.iter().enumerate() {
        grad.iter_mut().zip(v).for_each(|(a, b)| *a += gc[i] * b);
    }
    Ok((grad, h, frame))
}

/// A connected set of critical points of the averaged function.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CriticalManifold {
    pub representative_points: Vec<PhasePoint>,
    pub dimension: usize,
    pub hessian_rank: usize,
    pub value: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MorseBottReport {
    pub manifolds: Vec<CriticalManifold>,
    pub k_min: usize,
    pub is_morse_bott: bool,
    pub flat_set_detected: bool,
    /// Fraction of random sphere samples where the averaged gradient is below the flatness threshold.
    pub flat_fraction: f64,
    pub starts: usize,
    pub converged: usize,
}

const FLAT_GRAD: f64 = 1e-9;
const FLAT_FRACTION: f64 = 1e-3;
const GRAD_TOL: f64 = 1e-7;
const MAX_ITERS: usize = 200;
const MAX_REPRESENTATIVES: usize = 8;

fn start_point(seed: u64, index: usize, n: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    let mut p: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
    normalize(&mut p);
    p
}

struct Converged {
    point: Vec<f64>,
    value: f64,
    rank: usize,
}

/// Locates the critical manifolds of the period average of `f` on the unit sphere.
///
/// Each start runs a damped Gauss-Newton iteration on the squared gradient in a tangent frame
/// orthogonal to the flow. Converged points are grouped by critical value; the transverse
/// Hessian rank is counted with the flow direction excluded, and the manifold dimension is
/// one (the flow circle) plus the Hessian nullity.
pub fn classify_morse_bott(f: &dyn PhaseFn, dim: usize, samples: usize, seed: u64) -> Result<MorseBottReport> {
    if dim == 0 {
        return Err(domain("dimension must be at least 1"));
    }
    if samples == 0 {
        return Err(domain("need at least one start"));
    }
    let n = 2 * dim;
    let avg = |w: &[f64]| xray_stacked(f, w, XRAY_NODES);

    let starts: Vec<Vec<f64>> = (0..samples).map(|i| start_point(seed, i, n)).collect();

    // flatness evidence: gradient norms at the random starts
    let grad_norms: Vec<f64> = starts
        .par_iter()
        .map(|p| {
            let frame = tangent_frame(p, true);
            grad_only(&avg, p, &frame).map(|g| g.norm())
        })
        .collect::<Result<_>>()?;
    let flat_count = grad_norms.iter().filter(|&&g| g < FLAT_GRAD).count();
    let flat_fraction = flat_count as f64 / samples as f64;
    if flat_fraction > FLAT_FRACTION {
        return Ok(MorseBottReport {
            manifolds: Vec::new(),
            k_min: 0,
            is_morse_bott: false,
            flat_set_detected: true,
            flat_fraction,
            starts: samples,
            converged: 0,
        });
    }

    let results: Vec<Option<Converged>> = starts
        .par_iter()
        .map(|p| descend(&avg, p.clone()))
        .collect::<Result<_>>()?;
    let converged: Vec<Converged> = results.into_iter().flatten().collect();
    let failed = samples - converged.len();
    if failed as f64 > 0.01 * samples as f64 {
        return Err(Error::Classification { converged: converged.len(), total: samples });
    }

    let mut sorted = converged;
    sorted.sort_by(|a, b| a.value.partial_cmp(&b.value).unwrap());
    let mut groups: Vec<Vec<Converged>> = Vec::new();
    for c in sorted {
        match groups.last_mut() {
            Some(g) if (c.value - g[0].value).abs() <= 1e-6 * (1.0 + g[0].value.abs()) => g.push(c),
            _ => groups.push(vec![c]),
        }
    }

    let mut consistent = true;
    let transverse = n - 2;
    let manifolds: Vec<CriticalManifold> = groups
        .into_iter()
        .map(|g| {
            let mut ranks: Vec<usize> = g.iter().map(|c| c.rank).collect();
            ranks.sort_unstable();
            if ranks[0] != ranks[ranks.len() - 1] {
                consistent = false;
            }
            // majority rank
            let rank = ranks[ranks.len() / 2];
            let value = g.iter().map(|c| c.value).sum::<f64>() / g.len() as f64;
            CriticalManifold {
                representative_points: g
                    .iter()
                    .take(MAX_REPRESENTATIVES)
                    .map(|c| PhasePoint::from_stacked(&c.point))
                    .collect(),
                dimension: 1 + transverse - rank,
                hessian_rank: rank,
                value,
            }
        })
        .collect();
    let k_min = manifolds.iter().map(|m| m.hessian_rank).min().unwrap_or(0);
    Ok(MorseBottReport {
        is_morse_bott: consistent && k_min > 0 && !manifolds.is_empty(),
        k_min,
        manifolds,
        flat_set_detected: false,
        flat_fraction,
        starts: samples,
        converged: samples - failed,
    })
}

fn grad_only(g: &dyn Fn(&[f64]) -> Result<f64>, theta: &[f64], frame: &[Vec<f64>]) -> Result<DVector<f64>> {
    let h = FD_STEP;
    let mut grad = DVector::zeros(frame.len());
    for (i, v) in frame.iter().enumerate() {
        let mut p: Vec<f64> = theta.iter().zip(v).map(|(a, b)| a + h * b).collect();
        normalize(&mut p);
        let mut m: Vec<f64> = theta.iter().zip(v).map(|(a, b)| a - h * b).collect();
        normalize(&mut m);
        grad[i] = (g(&p)? - g(&m)?) / (2.0 * h);
    }
    Ok(grad)
}

fn pseudo_solve(h: &DMatrix<f64>, g: &DVector<f64>) -> DVector<f64> {
    let svd = h.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let cutoff = 1e-8 * smax.max(1e-300);
    let u = svd.u.as_ref().unwrap();
    let vt = svd.v_t.as_ref().unwrap();
    let mut out = DVector::zeros(g.len());
    for (k, &s) in svd.singular_values.iter().enumerate() {
        if s > cutoff {
            let coef = u.column(k).dot(g) / s;
            out += vt.row(k).transpose() * coef;
        }
    }
    out
}

fn hessian_rank(h: &DMatrix<f64>) -> usize {
    let sym = (h + h.transpose()) * 0.5;
    let eig = sym.symmetric_eigenvalues();
    let scale = eig.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let tol = 1e-4 * scale.max(1.0);
    eig.iter().filter(|v| v.abs() > tol).count()
}

fn descend(g: &dyn Fn(&[f64]) -> Result<f64>, mut theta: Vec<f64>) -> Result<Option<Converged>> {
    for _ in 0..MAX_ITERS {
        let frame = tangent_frame(&theta, true);
        let (grad, hess) = frame_grad_hess(g, &theta, &frame, FD_STEP)?;
        let gn = grad.norm();
        if gn < GRAD_TOL {
            return Ok(Some(Converged { value: g(&theta)?, rank: hessian_rank(&hess), point: theta }));
        }
        let mut step = -pseudo_solve(&hess, &grad);
        // fall back to steepest descent on the value when Newton does not reduce |grad|
        let sn = step.norm();
        if sn > 0.5 {
            step *= 0.5 / sn;
        }
        let mut accepted = false;
        for dir in [step.clone(), -grad.clone() * (0.1 / gn.max(1.0))] {
            let mut alpha = 1.0;
            for _ in 0..30 {
                let mut cand = theta.clone();
                for (i, v) in frame.iter().enumerate() {
                    cand.iter_mut().zip(v).for_each(|(a, b)| *a += alpha * dir[i] * b);
                }
                normalize(&mut cand);
                let cf = tangent_frame(&cand, true);
                let cg = grad_only(g, &cand, &cf)?.norm();
                if cg < gn {
                    theta = cand;
                    accepted = true;
                    break;
                }
                alpha *= 0.5;
            }
            if accepted {
                break;
            }
        }
        if !accepted {
            // stalled at the finite-difference noise floor
            if gn < 1e2 * GRAD_TOL {
                return Ok(Some(Converged { value: g(&theta)?, rank: hessian_rank(&hess), point: theta }));
            }
            return Ok(None);
        }
    }
    Ok(None)
}
