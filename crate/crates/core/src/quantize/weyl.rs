use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;

use super::HermiteBasis;
use crate::error::{domain, Error, Result};
use crate::geometry::PhaseFn;
use crate::quadrature::{composite_gauss_legendre, gauss_hermite};
use crate::special::laguerre_functions;
use crate::symbols::Symbol;

/// Quadrature rule for one (x_j, xi_j) plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PlaneRule {
    /// Tensor Gauss-Hermite with `order` nodes per axis.
    GaussHermite { order: usize },
    /// Composite Gauss-Legendre in r on [0, r_max] times a trapezoid rule in the angle.
    /// Better suited to symbols that are smooth in polar coordinates but not polynomial.
    Polar { radial_panels: usize, angular: usize, r_max: f64 },
}

impl PlaneRule {
    fn nodes(&self) -> Vec<(f64, f64, f64)> {
        match *self {
            PlaneRule::GaussHermite { order } => {
                let (x, w) = gauss_hermite(order);
                let mut out = Vec::with_capacity(order * order);
                for (a, wa) in x.iter().zip(&w) {
                    for (b, wb) in x.iter().zip(&w) {
                        out.push((*a, *b, wa * wb));
                    }
                }
                out
            }
            PlaneRule::Polar { radial_panels, angular, r_max } => {
                let (r, wr) = composite_gauss_legendre(0.0, r_max, radial_panels, 8);
                let h = 2.0 * PI / angular as f64;
                let mut out = Vec::with_capacity(r.len() * angular);
                for (ri, wi) in r.iter().zip(&wr) {
                    for k in 0..angular {
                        let (s, c) = (h * k as f64).sin_cos();
                        out.push((ri * c, ri * s, wi * ri * h));
                    }
                }
                out
            }
        }
    }

    fn refined(&self, factor: f64) -> PlaneRule {
        let up = |n: usize| ((n as f64 * factor).ceil() as usize).max(n + 1);
        match *self {
            PlaneRule::GaussHermite { order } => PlaneRule::GaussHermite { order: up(order) },
            PlaneRule::Polar { radial_panels, angular, r_max } => {
                PlaneRule::Polar { radial_panels: up(radial_panels), angular: up(angular), r_max }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeylOptions {
    pub rule: PlaneRule,
    /// Recompute with the rule refined by this factor and require entries to agree to 1e-7.
    /// `None` skips the check.
    pub refine_factor: Option<f64>,
    /// Eigenvalues of the truncated matrix up to this level enter the tail estimate.
    pub tail_level: Option<f64>,
    /// Extra basis levels used for the tail estimate.
    pub tail_levels: u32,
}

impl WeylOptions {
    /// Gauss-Hermite with enough nodes to integrate polynomial symbols of the given degree exactly.
    pub fn for_polynomial(max_level: u32, degree: u32) -> Self {
        WeylOptions {
            rule: PlaneRule::GaussHermite { order: (max_level + 4 + degree / 2 + 2) as usize },
            refine_factor: Some(2.0),
            tail_level: None,
            tail_levels: 4,
        }
    }

    /// Polar rule sized for a basis up to `max_level`.
    pub fn polar(max_level: u32) -> Self {
        let r_max = (4.0 * max_level as f64 + 16.0).sqrt() / 2f64.sqrt() + 5.0;
        WeylOptions {
            rule: PlaneRule::Polar {
                radial_panels: (6.0 * r_max).ceil() as usize,
                angular: 2 * max_level as usize + 24,
                r_max,
            },
            refine_factor: Some(2.0),
            tail_level: None,
            tail_levels: 4,
        }
    }
}

#[derive(Debug, Clone)]
pub struct WeylMatrix {
    pub basis: HermiteBasis,
    /// Hermitian matrix `<psi_alpha, Op_W(a) psi_beta>`.
    pub matrix: DMatrix<Complex64>,
    /// Largest residual `|P_ext M v|` over eigenvectors `v` of the truncated matrix with
    /// eigenvalue below the tail level; zero when no level was requested.
    pub tail_error_estimate: f64,
}

/// Smooth cutoff in |w|: 0 on |w| <= 1, 1 on |w| >= 2.
pub fn cutoff_zeta(w: &[f64]) -> f64 {
    let r = w.iter().map(|v| v * v).sum::<f64>().sqrt();
    let u = r - 1.0;
    if u <= 0.0 {
        return 0.0;
    }
    if u >= 1.0 {
        return 1.0;
    }
    let a = (-1.0 / u).exp();
    let b = (-1.0 / (1.0 - u)).exp();
    a / (a + b)
}

/// The symbol with each singular term multiplied by the cutoff.
pub fn regularized(s: &Symbol) -> impl PhaseFn + '_ {
    move |w: &[f64]| {
        let mut acc = 0.0;
        let z = cutoff_zeta(w);
        for t in &s.terms {
            if t.is_singular() {
                if z > 0.0 {
                    acc += z * t.value(w).unwrap_or(f64::NAN);
                }
            } else {
                acc += t.value(w).unwrap_or(f64::NAN);
            }
        }
        acc
    }
}

/// Values `W(psi_b, psi_a)(x, xi)` for all `a, b <= nmax`, stored at `a * (nmax + 1) + b`, where
/// `W(f, g)(X, Xi) = int e^{-i s Xi} f(X + s/2) conj g(X - s/2) ds`.
fn cross_wigner_at(x: f64, xi: f64, nmax: usize, col: &mut [Complex64], buf: &mut Vec<f64>) {
    let p = nmax + 1;
    let r2 = x * x + xi * xi;
    let t = 2.0 * r2;
    let unit = if r2 > 0.0 { Complex64::new(x, xi) / r2.sqrt() } else { Complex64::new(1.0, 0.0) };
    let mut rot = Complex64::new(1.0, 0.0);
    for k in 0..p {
        laguerre_functions(nmax - k, k, t, buf);
        for n in 0..p - k {
            let sign = if n % 2 == 0 { 2.0 } else { -2.0 };
            // W(psi_n, psi_{n+k}) = 2 (-1)^n e^{i k phi} F_n^{(k)}(2 r^2)
            let v = rot * (sign * buf[n]);
            col[(n + k) * p + n] = v;
            if k > 0 {
                col[n * p + n + k] = v.conj();
            }
        }
        rot *= unit;
    }
}

/// Cross-Wigner table for one plane, one column per node.
fn cross_wigner(nodes: &[(f64, f64, f64)], nmax: usize) -> DMatrix<Complex64> {
    let p = nmax + 1;
    let cols: Vec<Vec<Complex64>> = nodes
        .par_iter()
        .map(|&(x, xi, _)| {
            let mut col = vec![Complex64::new(0.0, 0.0); p * p];
            let mut buf = Vec::with_capacity(p);
            cross_wigner_at(x, xi, nmax, &mut col, &mut buf);
            col
        })
        .collect();
    DMatrix::from_fn(p * p, nodes.len(), |i, j| cols[j][i])
}

const NODE_CHUNK: usize = 512;

fn assemble(f: &dyn PhaseFn, d: usize, nmax: u32, rule: &PlaneRule) -> Result<DMatrix<Complex64>> {
    if d == 0 || d > 2 {
        return Err(domain(format!("weyl_matrix supports d = 1 or 2, got {d}")));
    }
    let nodes = rule.nodes();
    let nm = nmax as usize;
    let p = nm + 1;
    let basis = HermiteBasis::new(d, nmax);
    let norm = (2.0 * PI).powi(-(d as i32));
    let mut out = DMatrix::zeros(basis.len(), basis.len());
    if d == 1 {
        // accumulate per chunk of nodes, then reduce chunks in order
        let partial: Vec<Result<Vec<Complex64>>> = nodes
            .par_chunks(NODE_CHUNK)
            .map(|chunk| {
                let mut acc = vec![Complex64::new(0.0, 0.0); p * p];
                let mut col = vec![Complex64::new(0.0, 0.0); p * p];
                let mut buf = Vec::with_capacity(p);
                for &(x, xi, wt) in chunk {
                    let v = f.eval(&[x, xi])? * wt;
                    if !v.is_finite() {
                        return Err(Error::Numerical(format!("symbol not finite at ({x}, {xi})")));
                    }
                    if v == 0.0 {
                        continue;
                    }
                    cross_wigner_at(x, xi, nm, &mut col, &mut buf);
                    for (a, c) in acc.iter_mut().zip(&col) {
                        *a += c * v;
                    }
                }
                Ok(acc)
            })
            .collect();
        let mut total = vec![Complex64::new(0.0, 0.0); p * p];
        for part in partial {
            for (t, v) in total.iter_mut().zip(part?) {
                *t += v;
            }
        }
        for a in 0..p {
            for b in 0..p {
                out[(a, b)] = total[a * p + b] * norm;
            }
        }
    } else {
        let w = cross_wigner(&nodes, nm);
        let q = nodes.len();
        // E = W diag(w) A diag(w) W^T with A[n1, n2] = a(x1, x2, xi1, xi2)
        let rows: Vec<Vec<f64>> = nodes
            .par_iter()
            .map(|&(x1, k1, w1)| {
                nodes
                    .iter()
                    .map(|&(x2, k2, w2)| f.eval(&[x1, x2, k1, k2]).map(|v| v * w1 * w2))
                    .collect::<Result<Vec<f64>>>()
            })
            .collect::<Result<_>>()?;
        if rows.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::Numerical("symbol not finite at a quadrature node".into()));
        }
        let a = DMatrix::from_fn(q, q, |i, j| rows[i][j]);
        let wt_re = w.map(|z| z.re).transpose();
        let wt_im = w.map(|z| z.im).transpose();
        let b_re = &a * &wt_re;
        let b_im = &a * &wt_im;
        let w_re = w.map(|z| z.re);
        let w_im = w.map(|z| z.im);
        let e_re = &w_re * &b_re - &w_im * &b_im;
        let e_im = &w_re * &b_im + &w_im * &b_re;
        for (i, al) in basis.indices.iter().enumerate() {
            for (j, be) in basis.indices.iter().enumerate() {
                let r1 = al[0] as usize * p + be[0] as usize;
                let r2 = al[1] as usize * p + be[1] as usize;
                out[(i, j)] = Complex64::new(e_re[(r1, r2)], e_im[(r1, r2)]) * norm;
            }
        }
    }
    // exact Hermitian symmetrization
    let sym = (&out + out.adjoint()) * Complex64::new(0.5, 0.0);
    Ok(sym)
}

/// Matrix of `Op_W(f)` on Hermite functions with `|alpha| <= max_level`, by pairing `f` against
/// cross-Wigner functions on a product quadrature in each (x_j, xi_j) plane.
pub fn weyl_matrix(f: &dyn PhaseFn, d: usize, max_level: u32, opts: &WeylOptions) -> Result<WeylMatrix> {
    let want_tail = opts.tail_level.is_some();
    let ext = if want_tail { max_level + opts.tail_levels } else { max_level };
    let full = assemble(f, d, ext, &opts.rule)?;
    let basis = HermiteBasis::new(d, max_level);
    let n = basis.len();

    if let Some(factor) = opts.refine_factor {
        let fine = assemble(f, d, ext, &opts.rule.refined(factor))?;
        let mut worst = (0.0, 0, 0);
        for i in 0..full.nrows() {
            for j in 0..full.ncols() {
                let diff = (fine[(i, j)] - full[(i, j)]).norm();
                if diff > worst.0 {
                    worst = (diff, i, j);
                }
            }
        }
        if worst.0 > 1e-7 {
            let big = HermiteBasis::new(d, ext);
            return Err(Error::Quadrature(format!(
                "entry {:?},{:?} changed by {:.3e} under refinement",
                big.indices[worst.1], big.indices[worst.2], worst.0
            )));
        }
    }

    let matrix = full.view((0, 0), (n, n)).into_owned();
    let mut tail = 0.0;
    if let Some(level) = opts.tail_level {
        let eig = matrix.clone().symmetric_eigen();
        let coupling = full.view((n, 0), (full.nrows() - n, n)).into_owned();
        for (k, &ev) in eig.eigenvalues.iter().enumerate() {
            if ev <= level {
                let v = eig.eigenvectors.column(k);
                let r = (&coupling * v).norm();
                tail = f64::max(tail, r);
            }
        }
    }
    Ok(WeylMatrix { basis, matrix, tail_error_estimate: tail })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quantize::{ladder_matrix, weyl_ordered_monomial, LadderOp, Monomial};
    use crate::symbols::HomogeneousTerm;

    fn max_diff(a: &DMatrix<Complex64>, b: &DMatrix<Complex64>) -> f64 {
        a.iter().zip(b.iter()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
    }

    #[test]
    fn position_and_momentum_match_ladder() {
        let opts = WeylOptions::for_polynomial(20, 1);
        let x = weyl_matrix(&|w: &[f64]| w[0], 1, 20, &opts).unwrap();
        let lx = ladder_matrix(&[LadderOp::X(0)], 1, 20).unwrap();
        assert!(max_diff(&x.matrix, &lx) < 1e-10);
        let p = weyl_matrix(&|w: &[f64]| w[1], 1, 20, &opts).unwrap();
        let lp = ladder_matrix(&[LadderOp::D(0)], 1, 20).unwrap();
        assert!(max_diff(&p.matrix, &lp) < 1e-10);
        assert!((p.matrix[(1, 0)] - Complex64::new(0.0, std::f64::consts::FRAC_1_SQRT_2)).norm() < 1e-12);
    }

    #[test]
    fn oscillator_symbol_is_diagonal() {
        let opts = WeylOptions::for_polynomial(30, 2);
        let h = weyl_matrix(&|w: &[f64]| 0.5 * (w[0] * w[0] + w[1] * w[1]), 1, 30, &opts).unwrap();
        for i in 0..=30 {
            for j in 0..=30 {
                let want = if i == j { i as f64 + 0.5 } else { 0.0 };
                assert!((h.matrix[(i, j)] - want).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn two_dimensional_monomials_match_ladder() {
        let nmax = 6;
        for (px, pxi) in [(vec![1, 0], vec![0, 1]), (vec![2, 1], vec![0, 1]), (vec![0, 0], vec![2, 2])] {
            let m = Monomial { px, pxi };
            let opts = WeylOptions::for_polynomial(nmax, m.degree());
            let a = weyl_matrix(&m, 2, nmax, &opts).unwrap();
            let b = weyl_ordered_monomial(&m, nmax).unwrap();
            assert!(max_diff(&a.matrix, &b) < 1e-9, "{m:?}: {}", max_diff(&a.matrix, &b));
        }
    }

    #[test]
    fn regularized_singular_symbol_is_stable() {
        let s = Symbol::new(
            1,
            vec![HomogeneousTerm::QuadraticOverRoot { degree: 1, q: vec![vec![1.0, 0.0], vec![0.0, 0.0]] }],
        )
        .unwrap();
        let f = regularized(&s);
        let low = |nmax: u32| -> Vec<f64> {
            let mut opts = WeylOptions::polar(nmax);
            opts.tail_level = Some(8.0);
            let m = weyl_matrix(&f, 1, nmax, &opts).unwrap();
            let re = m.matrix.map(|z| z.re);
            assert!(m.matrix.iter().all(|z| z.im.abs() < 1e-12));
            let h = DMatrix::from_fn(re.nrows(), re.ncols(), |i, j| re[(i, j)] + if i == j { i as f64 + 0.5 } else { 0.0 });
            let mut e: Vec<f64> = h.symmetric_eigenvalues().iter().copied().collect();
            e.sort_by(f64::total_cmp);
            e.truncate(6);
            e
        };
        let a = low(40);
        let b = low(60);
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-6, "{x} vs {y}");
        }
    }

    #[test]
    fn refinement_failure_is_reported() {
        // a symbol the coarse rule cannot resolve
        let f = |w: &[f64]| (40.0 * w[0]).cos();
        let opts = WeylOptions { rule: PlaneRule::GaussHermite { order: 12 }, ..WeylOptions::for_polynomial(4, 0) };
        assert!(matches!(weyl_matrix(&f, 1, 4, &opts), Err(Error::Quadrature(_))));
    }
}
