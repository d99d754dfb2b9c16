//! Exact binomials and normalized Laguerre functions.

use crate::error::{domain, Result};

/// Exact binomial coefficient C(n, k); errors if the value does not fit in u64.
pub fn binomial(n: u64, k: u64) -> Result<u64> {
    if k > n {
        return Ok(0);
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 1..=k as u128 {
        // acc * (n - k + i) / i is always an integer
        acc = acc
            .checked_mul(n as u128 - k as u128 + i)
            .ok_or_else(|| domain(format!("binomial({n},{k}) overflows")))?
            / i;
    }
    u64::try_from(acc).map_err(|_| domain(format!("binomial({n},{k}) overflows u64")))
}

/// Normalized Laguerre functions
/// `F_n^{(k)}(t) = sqrt(n!/(n+k)!) t^{k/2} e^{-t/2} L_n^{(k)}(t)` for n = 0..=nmax.
///
/// These satisfy `int_0^inf F_n^{(k)} F_m^{(k)} dt = delta_nm` and are evaluated by a
/// three-term recurrence that never forms the factorials.
pub fn laguerre_functions(nmax: usize, k: usize, t: f64, out: &mut Vec<f64>) {
    out.clear();
    let kf = k as f64;
    let f0 = if t > 0.0 {
        (0.5 * kf * t.ln() - 0.5 * t - 0.5 * libm::lgamma(kf + 1.0)).exp()
    } else if k == 0 {
        1.0
    } else {
        0.0
    };
    out.push(f0);
    if nmax == 0 {
        return;
    }
    out.push((1.0 + kf - t) * f0 / (1.0 + kf).sqrt());
    for n in 1..nmax {
        let nf = n as f64;
        let next = ((2.0 * nf + 1.0 + kf - t) * out[n] - (nf * (nf + kf)).sqrt() * out[n - 1])
            / ((nf + 1.0) * (nf + kf + 1.0)).sqrt();
        out.push(next);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::gauss_legendre_on;

    #[test]
    fn small_binomials() {
        assert_eq!(binomial(4, 3).unwrap(), 4);
        assert_eq!(binomial(10, 0).unwrap(), 1);
        assert_eq!(binomial(52, 5).unwrap(), 2_598_960);
        assert_eq!(binomial(3, 5).unwrap(), 0);
        assert!(binomial(200, 100).is_err());
    }

    #[test]
    fn laguerre_orthonormal() {
        let (t, w) = gauss_legendre_on(400, 0.0, 200.0);
        let mut buf = Vec::new();
        for k in [0usize, 1, 3] {
            let tab: Vec<Vec<f64>> = t
                .iter()
                .map(|&x| {
                    laguerre_functions(12, k, x, &mut buf);
                    buf.clone()
                })
                .collect();
            for m in 0..=12 {
                for n in 0..=12 {
                    let s: f64 = tab.iter().zip(&w).map(|(f, w)| w * f[m] * f[n]).sum();
                    let e = if m == n { 1.0 } else { 0.0 };
                    assert!((s - e).abs() < 1e-10, "k={k} m={m} n={n} s={s}");
                }
            }
        }
    }

    #[test]
    fn laguerre_closed_forms() {
        let mut buf = Vec::new();
        let t: f64 = 1.7;
        laguerre_functions(2, 0, t, &mut buf);
        // L_2(t) = (t^2 - 4t + 2)/2
        let l2 = (t * t - 4.0 * t + 2.0) / 2.0 * (-t / 2.0).exp();
        assert!((buf[2] - l2).abs() < 1e-14);
        laguerre_functions(1, 2, t, &mut buf);
        // L_1^{(2)}(t) = 3 - t, sqrt(1/3!) t e^{-t/2}
        let v = (1.0f64 / 6.0).sqrt() * t * (-t / 2.0).exp() * (3.0 - t);
        assert!((buf[1] - v).abs() < 1e-14);
    }
}
