//! Hermite-basis quantization: exact spectra for flow-commuting perturbations, Weyl matrices
//! for general symbols and per-level block eigensolves.

mod ladder;
mod table;
mod weyl;

pub use ladder::{ladder_matrix, weyl_ordered_monomial, LadderOp, Monomial};
pub use table::SpectrumTable;
pub use weyl::{cutoff_zeta, regularized, weyl_matrix, PlaneRule, WeylMatrix, WeylOptions};

use std::collections::HashMap;

use nalgebra::DMatrix;
use serde_json::json;

use crate::error::{domain, precondition, Error, Result};
use crate::special::binomial;
use crate::symbols::Symbol;

/// Number of multi-indices `alpha` in N^d with `|alpha| = j`.
pub fn multiplicity(j: i64, d: i64) -> Result<u64> {
    if j < 0 || d < 1 {
        return Err(domain(format!("multiplicity needs j >= 0 and d >= 1, got j={j}, d={d}")));
    }
    binomial((d + j - 1) as u64, j as u64)
}

/// Calls `f` on every multi-index of length `d` with `|alpha| = level`, in lexicographic order.
pub fn for_each_index(d: usize, level: u32, mut f: impl FnMut(&[u32])) {
    let mut alpha = vec![0u32; d];
    fn rec(pos: usize, rest: u32, alpha: &mut Vec<u32>, f: &mut dyn FnMut(&[u32])) {
        let d = alpha.len();
        if pos == d - 1 {
            alpha[pos] = rest;
            f(alpha);
            return;
        }
        for a in 0..=rest {
            alpha[pos] = a;
            rec(pos + 1, rest - a, alpha, f);
        }
    }
    rec(0, level, &mut alpha, &mut f);
}

/// Products of Hermite functions with `|alpha| <= max_level`, ordered by level and then
/// lexicographically within a level.
#[derive(Debug, Clone)]
pub struct HermiteBasis {
    pub d: usize,
    pub max_level: u32,
    pub indices: Vec<Vec<u32>>,
    lookup: HashMap<Vec<u32>, usize>,
}

impl HermiteBasis {
    pub fn new(d: usize, max_level: u32) -> Self {
        let mut indices = Vec::new();
        for n in 0..=max_level {
            for_each_index(d, n, |a| indices.push(a.to_vec()));
        }
        let lookup = indices.iter().enumerate().map(|(i, a)| (a.clone(), i)).collect();
        HermiteBasis { d, max_level, indices, lookup }
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn index_of(&self, alpha: &[u32]) -> Option<usize> {
        self.lookup.get(alpha).copied()
    }

    /// Range of positions occupied by level `n`.
    pub fn level_range(&self, n: u32) -> std::ops::Range<usize> {
        let start: usize = (0..n).map(|k| multiplicity(k as i64, self.d as i64).unwrap() as usize).sum();
        start..start + multiplicity(n as i64, self.d as i64).unwrap() as usize
    }
}

/// The unperturbed spectrum `j + d/2` with multiplicity `p(j, d)`.
pub fn oscillator_spectrum(d: usize, lambda_max: f64) -> Result<SpectrumTable> {
    let half = d as f64 / 2.0;
    if d == 0 {
        return Err(domain("dimension must be at least 1"));
    }
    if !(lambda_max > half) || !lambda_max.is_finite() {
        return Err(domain(format!("lambda_max must exceed d/2 = {half}, got {lambda_max}")));
    }
    let top = (lambda_max - half).floor() as i64;
    let mut levels = Vec::new();
    for j in 0..=top {
        levels.push((j as f64 + half, multiplicity(j, d as i64)?));
    }
    SpectrumTable::from_levels(levels, lambda_max, "oscillator", json!({ "d": d }))
}

/// Spectrum of `H0 + a sqrt(H0)`: eigenvalues `j + d/2 + a sqrt(j + d/2)`, multiplicity `p(j, d)`.
pub fn sqrt_oscillator_spectrum_scaled(d: usize, a: f64, lambda_max: f64) -> Result<SpectrumTable> {
    if d == 0 {
        return Err(domain("dimension must be at least 1"));
    }
    if !lambda_max.is_finite() || !a.is_finite() {
        return Err(domain("lambda_max and a must be finite"));
    }
    let half = d as f64 / 2.0;
    let mut levels = Vec::new();
    let mut j: i64 = 0;
    loop {
        let e = j as f64 + half;
        // every later level lies above e - |a| sqrt(e) once this exceeds lambda_max
        if e - a.abs() * e.sqrt() > lambda_max && e > a * a {
            break;
        }
        let v = e + a * e.sqrt();
        if v <= lambda_max {
            levels.push((v, multiplicity(j, d as i64)?));
        }
        j += 1;
    }
    SpectrumTable::from_levels(levels, lambda_max, "sqrt", json!({ "d": d, "a": a }))
}

pub fn sqrt_oscillator_spectrum(d: usize, lambda_max: f64) -> Result<SpectrumTable> {
    sqrt_oscillator_spectrum_scaled(d, 1.0, lambda_max)
}

/// Smallest level `N` with `N + d/2 - bound (N + d)/sqrt(N + d/2) > lambda_max`: no eigenvalue
/// from this level on can fall below `lambda_max`.
pub fn trust_level(d: usize, bound: f64, lambda_max: f64) -> u32 {
    let half = d as f64 / 2.0;
    let mut n: u32 = 0;
    loop {
        let e = n as f64 + half;
        if e - bound * (n as f64 + d as f64) / e.sqrt() > lambda_max {
            return n;
        }
        n += 1;
    }
}

/// Eigenvalue of the diagonal model at `alpha`.
pub fn diagonal_eigenvalue(c: &[f64], alpha: &[u32]) -> f64 {
    let level: u32 = alpha.iter().sum();
    let e = level as f64 + c.len() as f64 / 2.0;
    let shift: f64 = c.iter().zip(alpha).map(|(c, &a)| c * (a as f64 + 0.5)).sum();
    e + shift / e.sqrt()
}

/// Joint functional-calculus quantization of `p2` plus the Hopf pullback of `c`.
pub fn diagonal_model_spectrum(c: &[f64], lambda_max: f64) -> Result<SpectrumTable> {
    let d = c.len();
    if d == 0 {
        return Err(domain("coefficient vector is empty"));
    }
    let cmax = c.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    if !(cmax < 1.0) {
        return Err(precondition(format!("need max |c_j| < 1, got {cmax}")));
    }
    if !lambda_max.is_finite() {
        return Err(domain("lambda_max must be finite"));
    }
    let top = trust_level(d, cmax, lambda_max);
    let mut levels = Vec::new();
    for n in 0..top {
        for_each_index(d, n, |a| {
            let v = diagonal_eigenvalue(c, a);
            if v <= lambda_max {
                levels.push((v, 1));
            }
        });
    }
    SpectrumTable::from_levels(
        levels,
        lambda_max,
        "diagonal",
        json!({ "c": c, "levels_enumerated": top, "perturbation_bound": cmax }),
    )
}

/// Restriction of a flow-commuting perturbation to one oscillator eigenspace.
#[derive(Debug, Clone)]
pub struct LevelBlock {
    pub level: u32,
    pub dim: usize,
    pub matrix: DMatrix<f64>,
}

impl LevelBlock {
    pub fn new(level: u32, d: usize, matrix: DMatrix<f64>) -> Result<Self> {
        let dim = multiplicity(level as i64, d as i64)? as usize;
        if matrix.nrows() != dim || matrix.ncols() != dim {
            return Err(domain(format!(
                "block at level {level} must be {dim}x{dim}, got {}x{}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        let scale = matrix.amax().max(f64::MIN_POSITIVE);
        for i in 0..dim {
            for j in 0..i {
                if (matrix[(i, j)] - matrix[(j, i)]).abs() > 1e-12 * scale {
                    return Err(domain(format!("block at level {level} is not symmetric at ({i},{j})")));
                }
            }
        }
        Ok(LevelBlock { level, dim, matrix })
    }

    /// Block of `sum_jk m_jk (a_j^+ a_k + delta_jk / 2)` on level `level`, for a real symmetric
    /// `d x d` matrix `m`. This is the Weyl quantization of `sum_jk m_jk (x_j x_k + xi_j xi_k)/2`.
    pub fn number_conserving(m: &DMatrix<f64>, level: u32) -> Result<Self> {
        let d = m.nrows();
        if m.ncols() != d {
            return Err(domain("coefficient matrix must be square"));
        }
        let mut basis = Vec::new();
        for_each_index(d, level, |a| basis.push(a.to_vec()));
        let pos: HashMap<Vec<u32>, usize> = basis.iter().enumerate().map(|(i, a)| (a.clone(), i)).collect();
        let dim = basis.len();
        let mut out = DMatrix::zeros(dim, dim);
        let trace: f64 = (0..d).map(|j| m[(j, j)]).sum();
        for (col, beta) in basis.iter().enumerate() {
            out[(col, col)] += 0.5 * trace;
            for k in 0..d {
                if beta[k] == 0 {
                    continue;
                }
                for j in 0..d {
                    let mut alpha = beta.clone();
                    alpha[k] -= 1;
                    alpha[j] += 1;
                    let amp = (beta[k] as f64).sqrt() * (alpha[j] as f64).sqrt();
                    out[(pos[&alpha], col)] += m[(j, k)] * amp;
                }
            }
        }
        LevelBlock::new(level, d, out)
    }
}

/// Spectrum of `H0 + P` for `P` commuting with `H0`, given per level: block eigenvalue `mu`
/// at level `N` contributes `(N + d/2) + mu / sqrt(N + d/2)`.
///
/// `perturbation_bound` is a constant `C` with `|mu| <= C (N + d)`; blocks must be supplied for
/// every level below the resulting trust level.
pub fn block_spectrum(
    blocks: &[LevelBlock],
    d: usize,
    lambda_max: f64,
    perturbation_bound: f64,
) -> Result<SpectrumTable> {
    if !(perturbation_bound >= 0.0 && perturbation_bound < 1.0) {
        return Err(precondition(format!("perturbation bound must lie in [0, 1), got {perturbation_bound}")));
    }
    let top = trust_level(d, perturbation_bound, lambda_max);
    let mut by_level: Vec<Option<&LevelBlock>> = vec![None; top as usize];
    for b in blocks {
        if multiplicity(b.level as i64, d as i64)? as usize != b.dim {
            return Err(domain(format!("block at level {} has wrong dimension for d = {d}", b.level)));
        }
        if (b.level as usize) < by_level.len() {
            by_level[b.level as usize] = Some(b);
        }
    }
    let mut levels = Vec::new();
    for (n, b) in by_level.iter().enumerate() {
        let b = b.ok_or_else(|| precondition(format!("missing block for level {n} (need all levels below {top})")))?;
        let e = n as f64 + d as f64 / 2.0;
        let eig = b.matrix.clone().symmetric_eigenvalues();
        for mu in eig.iter() {
            if mu.abs() > perturbation_bound * (n as f64 + d as f64) * (1.0 + 1e-12) {
                return Err(Error::Numerical(format!(
                    "block eigenvalue {mu} at level {n} exceeds the stated perturbation bound"
                )));
            }
            let v = e + mu / e.sqrt();
            if v <= lambda_max {
                levels.push((v, 1));
            }
        }
    }
    SpectrumTable::from_levels(
        levels,
        lambda_max,
        "block",
        json!({ "d": d, "levels_enumerated": top, "perturbation_bound": perturbation_bound }),
    )
}

/// Spectrum of `Op_W(s)` from the Hermite-basis matrix with `|alpha| <= max_level`.
///
/// Only eigenvalues up to half the basis energy `(max_level + d/2)/2` are kept, and the truncation
/// residual of their eigenvectors must stay below 1e-6.
pub fn weyl_spectrum(s: &Symbol, max_level: u32, lambda_max: f64) -> Result<SpectrumTable> {
    if !(lambda_max.is_finite() && lambda_max > 0.0) {
        return Err(domain("lambda_max must be positive"));
    }
    let d = s.d;
    let trust = lambda_max.min(0.5 * (max_level as f64 + d as f64 / 2.0));
    let singular = s.terms.iter().any(|t| t.is_singular());
    let mut opts = if singular { WeylOptions::polar(max_level) } else { WeylOptions::for_polynomial(max_level, 2) };
    opts.tail_level = Some(trust);
    let reg = regularized(s);
    let wm = weyl_matrix(&reg, d, max_level, &opts)?;
    if wm.tail_error_estimate > 1e-6 {
        return Err(Error::Quadrature(format!(
            "basis truncation residual {:e} below lambda = {trust}; raise the level cap",
            wm.tail_error_estimate
        )));
    }
    let eig = wm.matrix.symmetric_eigenvalues();
    let levels: Vec<(f64, u64)> = eig.iter().filter(|v| **v <= trust).map(|&v| (v, 1)).collect();
    SpectrumTable::from_levels(levels, trust, "weyl", json!({ "d": d, "max_level": max_level }))
}
