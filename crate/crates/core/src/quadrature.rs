//! Gauss rules, Hermite functions and product rules on spheres.

use std::f64::consts::PI;

use nalgebra::DMatrix;

/// Gauss-Legendre nodes and weights on [-1, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "gauss_legendre needs at least one node");
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = (n + 1) / 2;
    for i in 0..m {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, z);
            dp = d;
            let dz = p / d;
            z -= dz;
            if dz.abs() < 1e-15 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, z);
        if d != 0.0 {
            dp = d;
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    (x, w)
}

fn legendre_with_derivative(n: usize, z: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = z;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * z * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (z * p1 - p0) / (z * z - 1.0);
    (p1, d)
}

/// Gauss-Legendre rule mapped to [a, b].
pub fn gauss_legendre_on(n: usize, a: f64, b: f64) -> (Vec<f64>, Vec<f64>) {
    let (x, w) = gauss_legendre(n);
    let h = 0.5 * (b - a);
    let c = 0.5 * (b + a);
    (
        x.iter().map(|&t| c + h * t).collect(),
        w.iter().map(|&v| h * v).collect(),
    )
}

/// Composite Gauss-Legendre rule: `panels` equal panels on [a, b], `order` nodes each.
pub fn composite_gauss_legendre(a: f64, b: f64, panels: usize, order: usize) -> (Vec<f64>, Vec<f64>) {
    let (x, w) = gauss_legendre(order);
    let panels = panels.max(1);
    let h = (b - a) / panels as f64;
    let mut nodes = Vec::with_capacity(panels * order);
    let mut weights = Vec::with_capacity(panels * order);
    for p in 0..panels {
        let lo = a + h * p as f64;
        for (t, v) in x.iter().zip(&w) {
            nodes.push(lo + 0.5 * h * (t + 1.0));
            weights.push(0.5 * h * v);
        }
    }
    (nodes, weights)
}

/// Normalized Hermite functions psi_0..=psi_nmax at `x`.
pub fn hermite_functions(nmax: usize, x: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(nmax + 1);
    hermite_functions_into(nmax, x, &mut out);
    out
}

pub fn hermite_functions_into(nmax: usize, x: f64, out: &mut Vec<f64>) {
    out.clear();
    let psi0 = PI.powf(-0.25) * (-0.5 * x * x).exp();
    out.push(psi0);
    if nmax == 0 {
        return;
    }
    out.push(2f64.sqrt() * x * psi0);
    for n in 1..nmax {
        let nf = n as f64;
        let next = (2.0 / (nf + 1.0)).sqrt() * x * out[n] - (nf / (nf + 1.0)).sqrt() * out[n - 1];
        out.push(next);
    }
}

/// Gauss-Hermite rule for plain integrals of the form `int g(x) dx`, where `g` decays like a
/// Gaussian. Returns nodes and weights already multiplied by `exp(x^2)`.
///
/// Nodes come from the Golub-Welsch eigenproblem and are then polished with Newton steps on
/// the Hermite function `psi_n`, which stays well scaled for large n.
pub fn gauss_hermite(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "gauss_hermite needs at least one node");
    let mut jac = DMatrix::<f64>::zeros(n, n);
    for k in 1..n {
        let b = (k as f64 / 2.0).sqrt();
        jac[(k, k - 1)] = b;
        jac[(k - 1, k)] = b;
    }
    let mut nodes: Vec<f64> = jac.symmetric_eigenvalues().iter().copied().collect();
    nodes.sort_by(|a, b| a.partial_cmp(b).unwrap());

    let mut buf = Vec::with_capacity(n + 1);
    for z in nodes.iter_mut() {
        for _ in 0..8 {
            hermite_functions_into(n, *z, &mut buf);
            // psi_n' = sqrt(2n) psi_{n-1} - x psi_n
            let p = buf[n];
            let dp = (2.0 * n as f64).sqrt() * buf[n - 1] - *z * p;
            if dp == 0.0 {
                break;
            }
            let dz = p / dp;
            *z -= dz;
            if dz.abs() < 1e-15 * (1.0 + z.abs()) {
                break;
            }
        }
    }
    // Symmetrize to remove any drift between mirrored nodes.
    for i in 0..n / 2 {
        let j = n - 1 - i;
        let v = 0.5 * (nodes[j] - nodes[i]);
        nodes[i] = -v;
        nodes[j] = v;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    let weights = nodes
        .iter()
        .map(|&z| {
            hermite_functions_into(n - 1, z, &mut buf);
            1.0 / buf.iter().map(|v| v * v).sum::<f64>()
        })
        .collect();
    (nodes, weights)
}

/// Surface area of the unit sphere S^{n-1} in R^n.
pub fn sphere_area(n: usize) -> f64 {
    // A(n) = 2 pi A(n-2) / (n-2), A(1) = 2, A(2) = 2 pi
    let mut a = if n % 2 == 0 { 2.0 * PI } else { 2.0 };
    let mut k = if n % 2 == 0 { 2 } else { 1 };
    while k < n {
        k += 2;
        a *= 2.0 * PI / (k - 2) as f64;
    }
    a
}

/// A weighted point set on the unit sphere of R^n.
#[derive(Debug, Clone)]
pub struct SphereRule {
    pub dim: usize,
    pub points: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
}

impl SphereRule {
    /// Product rule in hyperspherical angles: Gauss-Legendre in each polar angle (in the
    /// variable cos phi with the matching Jacobian) and a trapezoid rule in the last azimuth.
    pub fn hyperspherical(n: usize, polar_order: usize, azimuth_order: usize) -> Self {
        assert!(n >= 2, "sphere rule needs ambient dimension >= 2");
        let az: Vec<(f64, f64)> = (0..azimuth_order)
            .map(|k| {
                let phi = 2.0 * PI * k as f64 / azimuth_order as f64;
                (phi, 2.0 * PI / azimuth_order as f64)
            })
            .collect();
        // polar angle j (0-based) has weight sin^{n-2-j}; use Gauss-Jacobi-free trick:
        // integrate over cos(phi) = s in [-1,1] with weight (1-s^2)^{(n-3-j)/2}
        let mut polar: Vec<Vec<(f64, f64)>> = Vec::new();
        for j in 0..n - 2 {
            let m = n - 2 - j; // power of sin
            let (x, w) = gauss_legendre(polar_order);
            let rule = if m % 2 == 1 {
                // sin^m dphi = (1-s^2)^{(m-1)/2} ds, polynomial in s
                x.iter()
                    .zip(&w)
                    .map(|(&s, &v)| (s.acos(), v * (1.0 - s * s).powi(((m - 1) / 2) as i32)))
                    .collect()
            } else {
                // even power: sin^m dphi = (1-s^2)^{m/2} ds / sqrt(1-s^2), Gauss-Chebyshev
                (0..polar_order)
                    .map(|i| {
                        let phi = PI * (i as f64 + 0.5) / polar_order as f64;
                        (phi, PI / polar_order as f64 * phi.sin().powi(m as i32))
                    })
                    .collect()
            };
            polar.push(rule);
        }
        let mut points = Vec::new();
        let mut weights = Vec::new();
        let mut idx = vec![0usize; n - 2];
        loop {
            let mut prefix = 1.0;
            let mut base = Vec::with_capacity(n);
            let mut wt = 1.0;
            for (j, &i) in idx.iter().enumerate() {
                let (phi, w) = polar[j][i];
                base.push(prefix * phi.cos());
                prefix *= phi.sin();
                wt *= w;
            }
            for &(phi, w) in &az {
                let mut p = base.clone();
                p.push(prefix * phi.cos());
                p.push(prefix * phi.sin());
                points.push(p);
                weights.push(wt * w);
            }
            // advance the odometer
            let mut k = 0;
            loop {
                if k == idx.len() {
                    return SphereRule { dim: n, points, weights };
                }
                idx[k] += 1;
                if idx[k] < polar_order {
                    break;
                }
                idx[k] = 0;
                k += 1;
            }
        }
    }

    /// Rule on S^3 in Hopf coordinates for phase space layout (x1, x2, xi1, xi2):
    /// z_j = x_j + i xi_j, |z_1|^2 = s uniform, measure (1/2) ds dphi1 dphi2.
    pub fn hopf_s3(s_order: usize, phi_order: usize) -> Self {
        let (s, ws) = gauss_legendre_on(s_order, 0.0, 1.0);
        let dphi = 2.0 * PI / phi_order as f64;
        let mut points = Vec::new();
        let mut weights = Vec::new();
        for (&si, &wi) in s.iter().zip(&ws) {
            let a = si.sqrt();
            let b = (1.0 - si).sqrt();
            for k1 in 0..phi_order {
                let (s1, c1) = (dphi * k1 as f64).sin_cos();
                for k2 in 0..phi_order {
                    let (s2, c2) = (dphi * k2 as f64).sin_cos();
                    points.push(vec![a * c1, b * c2, a * s1, b * s2]);
                    weights.push(0.5 * wi * dphi * dphi);
                }
            }
        }
        SphereRule { dim: 4, points, weights }
    }

    pub fn integrate(&self, f: impl Fn(&[f64]) -> f64) -> f64 {
        self.points.iter().zip(&self.weights).map(|(p, w)| w * f(p)).sum()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn legendre_integrates_polynomials() {
        let (x, w) = gauss_legendre(7);
        let s: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(12)).sum();
        assert_relative_eq!(s, 2.0 / 13.0, epsilon = 1e-14);
        let total: f64 = w.iter().sum();
        assert_relative_eq!(total, 2.0, epsilon = 1e-14);
    }

    #[test]
    fn hermite_rule_moments() {
        let (x, w) = gauss_hermite(40);
        // int x^2 e^{-x^2} dx = sqrt(pi)/2
        let s: f64 = x.iter().zip(&w).map(|(x, w)| w * x * x * (-x * x).exp()).sum();
        assert_relative_eq!(s, PI.sqrt() / 2.0, epsilon = 1e-13);
        // int e^{-x^2/2} dx = sqrt(2 pi)
        let g: f64 = x.iter().zip(&w).map(|(x, w)| w * (-0.5 * x * x).exp()).sum();
        assert_relative_eq!(g, (2.0 * PI).sqrt(), epsilon = 1e-12);
    }

    #[test]
    fn hermite_functions_orthonormal() {
        let (x, w) = gauss_hermite(80);
        let tabs: Vec<Vec<f64>> = x.iter().map(|&z| hermite_functions(30, z)).collect();
        for m in 0..=30 {
            for n in 0..=30 {
                let s: f64 = tabs.iter().zip(&w).map(|(t, w)| w * t[m] * t[n]).sum();
                let e = if m == n { 1.0 } else { 0.0 };
                assert!((s - e).abs() < 1e-12, "m={m} n={n} s={s}");
            }
        }
    }

    #[test]
    fn large_hermite_rule_is_finite() {
        let (x, w) = gauss_hermite(300);
        assert!(x.iter().chain(&w).all(|v| v.is_finite()));
        let g: f64 = x.iter().zip(&w).map(|(x, w)| w * (-x * x).exp()).sum();
        assert_relative_eq!(g, PI.sqrt(), epsilon = 1e-12);
    }

    #[test]
    fn sphere_rules_area_and_moments() {
        for n in 2..=6 {
            let r = SphereRule::hyperspherical(n, 10, 12);
            assert_relative_eq!(r.integrate(|_| 1.0), sphere_area(n), max_relative = 1e-12);
            // int x_1^2 = area / n
            let m = r.integrate(|p| p[0] * p[0]);
            assert_relative_eq!(m, sphere_area(n) / n as f64, max_relative = 1e-12);
            let m = r.integrate(|p| p[n - 1] * p[n - 1] * p[0] * p[0]);
            assert_relative_eq!(m, sphere_area(n) / (n * (n + 2)) as f64, max_relative = 1e-12);
        }
        let h = SphereRule::hopf_s3(12, 16);
        assert_relative_eq!(h.integrate(|_| 1.0), 2.0 * PI * PI, epsilon = 1e-12);
        let m = h.integrate(|p| p[1] * p[1]);
        assert_relative_eq!(m, PI * PI / 2.0, epsilon = 1e-12);
    }
}
