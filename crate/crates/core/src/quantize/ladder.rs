use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::HermiteBasis;
use crate::error::{domain, Result};
use crate::geometry::PhaseFn;
use crate::special::binomial;

/// Position `x_j` or momentum `D_j = -i d/dx_j`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LadderOp {
    X(usize),
    D(usize),
}

fn apply(op: LadderOp, basis: &HermiteBasis, v: &[Complex64], out: &mut [Complex64]) {
    out.iter_mut().for_each(|z| *z = Complex64::new(0.0, 0.0));
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let mut alpha = vec![0u32; basis.d];
    for (i, a) in basis.indices.iter().enumerate() {
        let c = v[i];
        if c == Complex64::new(0.0, 0.0) {
            continue;
        }
        let (j, is_x) = match op {
            LadderOp::X(j) => (j, true),
            LadderOp::D(j) => (j, false),
        };
        alpha.copy_from_slice(a);
        // raising: sqrt(a_j + 1) / sqrt(2)
        alpha[j] += 1;
        if let Some(k) = basis.index_of(&alpha) {
            let amp = s * ((a[j] + 1) as f64).sqrt();
            out[k] += if is_x { c * amp } else { c * Complex64::new(0.0, amp) };
        }
        alpha[j] -= 1;
        if a[j] > 0 {
            alpha[j] -= 1;
            let k = basis.index_of(&alpha).expect("lowered index is in the basis");
            let amp = s * (a[j] as f64).sqrt();
            out[k] += if is_x { c * amp } else { c * Complex64::new(0.0, -amp) };
        }
    }
}

fn word_matrix(word: &[LadderOp], d: usize, max_level: u32) -> Result<DMatrix<Complex64>> {
    for op in word {
        let j = match *op {
            LadderOp::X(j) | LadderOp::D(j) => j,
        };
        if j >= d {
            return Err(domain(format!("operator index {j} out of range for d = {d}")));
        }
    }
    // enlarged basis so that the product is exact on the truncated block
    let big = HermiteBasis::new(d, max_level + word.len() as u32);
    let small = HermiteBasis::new(d, max_level);
    let n = small.len();
    let mut m = DMatrix::zeros(n, n);
    let mut v = vec![Complex64::new(0.0, 0.0); big.len()];
    let mut w = v.clone();
    for col in 0..n {
        v.iter_mut().for_each(|z| *z = Complex64::new(0.0, 0.0));
        v[col] = Complex64::new(1.0, 0.0);
        for op in word.iter().rev() {
            apply(*op, &big, &v, &mut w);
            std::mem::swap(&mut v, &mut w);
        }
        for row in 0..n {
            m[(row, col)] = v[row];
        }
    }
    Ok(m)
}

/// Matrix of the operator product `word[0] word[1] ...` on Hermite functions up to `max_level`.
pub fn ladder_matrix(word: &[LadderOp], d: usize, max_level: u32) -> Result<DMatrix<Complex64>> {
    if max_level < 1 {
        return Err(domain("basis level must be at least 1"));
    }
    word_matrix(word, d, max_level)
}

/// The phase-space monomial `prod_j x_j^{px_j} xi_j^{pxi_j}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Monomial {
    pub px: Vec<u32>,
    pub pxi: Vec<u32>,
}

impl Monomial {
    pub fn degree(&self) -> u32 {
        self.px.iter().chain(&self.pxi).sum()
    }
}

impl PhaseFn for Monomial {
    fn eval(&self, w: &[f64]) -> Result<f64> {
        let d = self.px.len();
        let mut v = 1.0;
        for j in 0..d {
            v *= w[j].powi(self.px[j] as i32) * w[d + j].powi(self.pxi[j] as i32);
        }
        Ok(v)
    }
}

/// Weyl quantization of a monomial via the ladder algebra:
/// `Op(x^a xi^b) = 2^{-a} sum_k C(a,k) x^k D^b x^{a-k}` in each coordinate.
pub fn weyl_ordered_monomial(m: &Monomial, max_level: u32) -> Result<DMatrix<Complex64>> {
    let d = m.px.len();
    if m.pxi.len() != d || d == 0 {
        return Err(domain("monomial exponent vectors must have equal nonzero length"));
    }
    // expand the product over coordinates into a sum of words
    let mut terms: Vec<(f64, Vec<LadderOp>)> = vec![(1.0, Vec::new())];
    for j in 0..d {
        let a = m.px[j];
        let b = m.pxi[j];
        let mut next = Vec::new();
        for (coef, word) in &terms {
            for k in 0..=a {
                let c = coef * binomial(a as u64, k as u64)? as f64 / 2f64.powi(a as i32);
                let mut w = word.clone();
                w.extend(std::iter::repeat(LadderOp::X(j)).take(k as usize));
                w.extend(std::iter::repeat(LadderOp::D(j)).take(b as usize));
                w.extend(std::iter::repeat(LadderOp::X(j)).take((a - k) as usize));
                next.push((c, w));
            }
        }
        terms = next;
    }
    let basis = HermiteBasis::new(d, max_level);
    let mut out = DMatrix::zeros(basis.len(), basis.len());
    for (c, w) in terms {
        out += word_matrix(&w, d, max_level)? * Complex64::new(c, 0.0);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ladder_identities() {
        let x = ladder_matrix(&[LadderOp::X(0)], 1, 5).unwrap();
        assert!((x[(1, 0)].re - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-15);
        let x2 = ladder_matrix(&[LadderOp::X(0), LadderOp::X(0)], 1, 5).unwrap();
        assert!((x2[(0, 0)].re - 0.5).abs() < 1e-15);
        let d = ladder_matrix(&[LadderOp::D(0)], 1, 5).unwrap();
        assert!((d[(1, 0)].im - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-15);
    }

    #[test]
    fn oscillator_is_diagonal() {
        let a = weyl_ordered_monomial(&Monomial { px: vec![2], pxi: vec![0] }, 10).unwrap();
        let b = weyl_ordered_monomial(&Monomial { px: vec![0], pxi: vec![2] }, 10).unwrap();
        let h = (a + b) * Complex64::new(0.5, 0.0);
        for i in 0..=10 {
            for j in 0..=10 {
                let want = if i == j { i as f64 + 0.5 } else { 0.0 };
                assert!((h[(i, j)] - want).norm() < 1e-13);
            }
        }
    }

    #[test]
    fn canonical_commutator() {
        // [x, D] = i on the block away from the truncation edge
        let xd = ladder_matrix(&[LadderOp::X(0), LadderOp::D(0)], 1, 8).unwrap();
        let dx = ladder_matrix(&[LadderOp::D(0), LadderOp::X(0)], 1, 8).unwrap();
        let c = xd - dx;
        for i in 0..=8 {
            assert!((c[(i, i)] - Complex64::new(0.0, 1.0)).norm() < 1e-14);
        }
    }

    #[test]
    fn symmetric_product_is_hermitian() {
        let m = weyl_ordered_monomial(&Monomial { px: vec![1, 2], pxi: vec![1, 0] }, 4).unwrap();
        let diff = &m - m.adjoint();
        assert!(diff.iter().all(|z| z.norm() < 1e-13));
    }
}
