//! Classical isotropic symbols built from a closed set of homogeneous terms.

use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{domain, precondition, Error, Result};
use crate::geometry::{PhaseFn, PhasePoint};
use crate::quadrature::{sphere_area, SphereRule};

/// One homogeneous term. `degree` is stored explicitly so that documents are self-describing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum HomogeneousTerm {
    /// w^T Q w
    QuadraticForm {
        degree: u8,
        #[serde(rename = "Q")]
        q: Vec<Vec<f64>>,
    },
    /// v . w
    LinearForm { degree: u8, v: Vec<f64> },
    /// coeff * p2^{degree/2}
    RadialPower { degree: u8, coeff: f64 },
    /// w^T Q w / sqrt(2 p2)
    QuadraticOverRoot {
        degree: u8,
        #[serde(rename = "Q")]
        q: Vec<Vec<f64>>,
    },
    Constant { degree: u8, value: f64 },
}

fn quad(q: &[Vec<f64>], w: &[f64]) -> f64 {
    let mut s = 0.0;
    for (i, row) in q.iter().enumerate() {
        let mut r = 0.0;
        for (j, a) in row.iter().enumerate() {
            r += a * w[j];
        }
        s += w[i] * r;
    }
    s
}

fn check_matrix(q: &[Vec<f64>], n: usize, what: &str) -> Result<()> {
    if q.len() != n || q.iter().any(|r| r.len() != n) {
        return Err(Error::InvalidSymbol(format!("{what}: matrix must be {n}x{n}")));
    }
    let scale = q.iter().flatten().fold(0.0f64, |a, v| a.max(v.abs())).max(1.0);
    for i in 0..n {
        for j in 0..i {
            if (q[i][j] - q[j][i]).abs() > 1e-14 * scale {
                return Err(Error::InvalidSymbol(format!("{what}: matrix not symmetric at ({i},{j})")));
            }
        }
    }
    if q.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::InvalidSymbol(format!("{what}: non-finite entry")));
    }
    Ok(())
}

impl HomogeneousTerm {
    pub fn degree(&self) -> u8 {
        match self {
            Self::QuadraticForm { degree, .. }
            | Self::LinearForm { degree, .. }
            | Self::RadialPower { degree, .. }
            | Self::QuadraticOverRoot { degree, .. }
            | Self::Constant { degree, .. } => *degree,
        }
    }

    /// Checks the kind/degree pairing and matrix shapes for phase-space dimension `2d`.
    pub fn validate(&self, d: usize) -> Result<()> {
        let n = 2 * d;
        let deg = self.degree();
        let bad = |kind: &str, want: u8| {
            Err(Error::InvalidSymbol(format!("{kind} must have degree {want}, got {deg}")))
        };
        match self {
            Self::QuadraticForm { q, .. } => {
                if deg != 2 {
                    return bad("quadratic_form", 2);
                }
                check_matrix(q, n, "quadratic_form")
            }
            Self::LinearForm { v, .. } => {
                if deg != 1 {
                    return bad("linear_form", 1);
                }
                if v.len() != n || v.iter().any(|a| !a.is_finite()) {
                    return Err(Error::InvalidSymbol(format!("linear_form: vector must have {n} finite entries")));
                }
                Ok(())
            }
            Self::RadialPower { coeff, .. } => {
                if deg > 2 {
                    return Err(Error::InvalidSymbol(format!("radial_power degree {deg} outside 0..=2")));
                }
                if !coeff.is_finite() {
                    return Err(Error::InvalidSymbol("radial_power: non-finite coefficient".into()));
                }
                Ok(())
            }
            Self::QuadraticOverRoot { q, .. } => {
                if deg != 1 {
                    return bad("quadratic_over_root", 1);
                }
                check_matrix(q, n, "quadratic_over_root")
            }
            Self::Constant { value, .. } => {
                if deg != 0 {
                    return bad("constant", 0);
                }
                if !value.is_finite() {
                    return Err(Error::InvalidSymbol("constant: non-finite value".into()));
                }
                Ok(())
            }
        }
    }

    /// True if the term cannot be evaluated at the origin.
    pub fn is_singular(&self) -> bool {
        matches!(self, Self::QuadraticOverRoot { .. }) || matches!(self, Self::RadialPower { degree: 1, .. })
    }

    pub fn value(&self, w: &[f64]) -> Result<f64> {
        let r2: f64 = w.iter().map(|v| v * v).sum();
        if r2 == 0.0 && self.is_singular() {
            return Err(domain("singular term evaluated at the origin"));
        }
        Ok(match self {
            Self::QuadraticForm { q, .. } => quad(q, w),
            Self::LinearForm { v, .. } => v.iter().zip(w).map(|(a, b)| a * b).sum(),
            Self::RadialPower { degree, coeff } => {
                let p2 = 0.5 * r2;
                match degree {
                    0 => *coeff,
                    1 => coeff * p2.sqrt(),
                    _ => coeff * p2,
                }
            }
            Self::QuadraticOverRoot { q, .. } => quad(q, w) / r2.sqrt(),
            Self::Constant { value, .. } => *value,
        })
    }
}

impl PhaseFn for HomogeneousTerm {
    fn eval(&self, w: &[f64]) -> Result<f64> {
        self.value(w)
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SymbolDoc {
    d: usize,
    terms: Vec<HomogeneousTerm>,
}

/// A symbol p = p2 + p1 + p0 given as a list of homogeneous terms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SymbolDoc", into = "SymbolDoc")]
pub struct Symbol {
    pub d: usize,
    pub terms: Vec<HomogeneousTerm>,
    pub principal_is_oscillator: bool,
}

impl TryFrom<SymbolDoc> for Symbol {
    type Error = Error;
    fn try_from(doc: SymbolDoc) -> Result<Self> {
        Symbol::new(doc.d, doc.terms)
    }
}

impl From<Symbol> for SymbolDoc {
    fn from(s: Symbol) -> Self {
        SymbolDoc { d: s.d, terms: s.terms }
    }
}

impl Symbol {
    pub fn new(d: usize, terms: Vec<HomogeneousTerm>) -> Result<Self> {
        if d == 0 {
            return Err(Error::InvalidSymbol("dimension must be at least 1".into()));
        }
        for t in &terms {
            t.validate(d)?;
        }
        let mut s = Symbol { d, terms, principal_is_oscillator: false };
        s.principal_is_oscillator = s.detect_oscillator();
        Ok(s)
    }

    /// p2 = (|x|^2 + |xi|^2)/2 alone.
    pub fn oscillator(d: usize) -> Self {
        Symbol::new(d, vec![HomogeneousTerm::RadialPower { degree: 2, coeff: 1.0 }]).unwrap()
    }

    pub fn with_term(mut self, t: HomogeneousTerm) -> Result<Self> {
        t.validate(self.d)?;
        self.terms.push(t);
        self.principal_is_oscillator = self.detect_oscillator();
        Ok(self)
    }

    fn detect_oscillator(&self) -> bool {
        let n = 2 * self.d;
        let mut m = vec![vec![0.0; n]; n];
        for t in &self.terms {
            match t {
                HomogeneousTerm::QuadraticForm { q, .. } => {
                    for i in 0..n {
                        for j in 0..n {
                            m[i][j] += q[i][j];
                        }
                    }
                }
                HomogeneousTerm::RadialPower { degree: 2, coeff } => {
                    for (i, row) in m.iter_mut().enumerate() {
                        row[i] += 0.5 * coeff;
                    }
                }
                _ => {}
            }
        }
        (0..n).all(|i| (0..n).all(|j| m[i][j] == if i == j { 0.5 } else { 0.0 }))
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("symbol serializes")
    }

    /// Sum of all terms at `point`.
    pub fn evaluate(&self, point: &PhasePoint) -> Result<f64> {
        if point.dim() != self.d {
            return Err(domain(format!("point has dimension {}, symbol has {}", point.dim(), self.d)));
        }
        self.value(&point.stacked())
    }

    pub fn value(&self, w: &[f64]) -> Result<f64> {
        self.terms.iter().map(|t| t.value(w)).sum()
    }

    /// Sum of the terms of the given degree.
    pub fn part(&self, degree: u8, w: &[f64]) -> Result<f64> {
        self.terms.iter().filter(|t| t.degree() == degree).map(|t| t.value(w)).sum()
    }

    pub fn has_degree(&self, degree: u8) -> bool {
        self.terms.iter().any(|t| t.degree() == degree)
    }

    /// The degree-one part as a phase-space function.
    pub fn p1(&self) -> impl PhaseFn + '_ {
        move |w: &[f64]| self.part(1, w).unwrap_or(f64::NAN)
    }
}

impl PhaseFn for Symbol {
    fn eval(&self, w: &[f64]) -> Result<f64> {
        self.value(w)
    }
}

/// How to compute the phase-space volume of a sublevel set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "method", deny_unknown_fields)]
pub enum VolumeMethod {
    MonteCarlo { n: u64, seed: u64 },
    RadialQuadrature { polar_order: usize, azimuth_order: usize },
}

impl Default for VolumeMethod {
    fn default() -> Self {
        VolumeMethod::RadialQuadrature { polar_order: 16, azimuth_order: 16 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub error: f64,
}

/// Boundary radius of `a r^2 + b r = lam` along one direction, with `a > 0`.
pub(crate) fn boundary_radius(a: f64, b: f64, lam: f64) -> f64 {
    let disc = (b * b + 4.0 * a * lam).sqrt();
    if b >= 0.0 {
        2.0 * lam / (b + disc)
    } else {
        (disc - b) / (2.0 * a)
    }
}

/// Precomputed sphere data for repeated volume evaluations of `{p2 + p1 <= lam}`.
#[derive(Debug, Clone)]
pub struct SublevelVolume {
    d: usize,
    a: Vec<f64>,
    b: Vec<f64>,
    w: Vec<f64>,
    coarse: Option<Box<SublevelVolume>>,
    subordination: f64,
}

impl SublevelVolume {
    pub fn new(s: &Symbol, polar_order: usize, azimuth_order: usize) -> Result<Self> {
        let mut v = Self::build(s, polar_order, azimuth_order)?;
        let coarse = Self::build(s, (polar_order * 3 / 4).max(4), (azimuth_order * 3 / 4).max(4))?;
        v.coarse = Some(Box::new(coarse));
        Ok(v)
    }

    fn build(s: &Symbol, polar_order: usize, azimuth_order: usize) -> Result<Self> {
        let rule = SphereRule::hyperspherical(2 * s.d, polar_order, azimuth_order);
        let n = rule.len();
        let mut a = Vec::with_capacity(n);
        let mut b = Vec::with_capacity(n);
        let mut sub: f64 = 0.0;
        for p in &rule.points {
            let ai = s.part(2, p)?;
            let bi = s.part(1, p)?;
            if !(ai > 0.0) {
                return Err(precondition("degree-2 part is not positive on the sphere: sublevel set unbounded"));
            }
            sub = sub.max(bi.abs() / ai.sqrt());
            a.push(ai);
            b.push(bi);
        }
        Ok(SublevelVolume { d: s.d, a, b, w: rule.weights, coarse: None, subordination: sub })
    }

    fn raw(&self, lam: f64) -> f64 {
        let two_d = 2 * self.d;
        let mut acc = 0.0;
        for i in 0..self.a.len() {
            let r = boundary_radius(self.a[i], self.b[i], lam);
            acc += self.w[i] * r.powi(two_d as i32);
        }
        acc / two_d as f64 / (2.0 * PI).powi(self.d as i32)
    }

    /// `(2 pi)^{-d} vol{p2 + p1 <= lam}` with an error estimate from a coarser rule.
    pub fn at(&self, lam: f64) -> Result<Estimate> {
        if !(lam > 0.0) {
            return Err(precondition(format!("lambda must be positive, got {lam}")));
        }
        // |p1| <= C sqrt(p2) with C < sqrt(lam); the sphere samples carry p2 = a
        if self.subordination * self.subordination >= lam {
            return Err(precondition(format!(
                "degree-1 part not subordinate at lambda {lam}: sup |p1|/sqrt(p2) = {}",
                self.subordination
            )));
        }
        let value = self.raw(lam);
        let error = self.coarse.as_ref().map(|c| (c.raw(lam) - value).abs()).unwrap_or(0.0);
        Ok(Estimate { value, error })
    }
}

/// `(2 pi)^{-d} vol{p2 + p1 <= lam}`, ignoring any degree-0 part.
pub fn weyl_volume(s: &Symbol, lam: f64, method: VolumeMethod) -> Result<Estimate> {
    match method {
        VolumeMethod::RadialQuadrature { polar_order, azimuth_order } => {
            SublevelVolume::new(s, polar_order, azimuth_order)?.at(lam)
        }
        VolumeMethod::MonteCarlo { n, seed } => monte_carlo_volume(s, lam, n, seed),
    }
}

const MC_CHUNK: u64 = 1 << 16;

fn monte_carlo_volume(s: &Symbol, lam: f64, n: u64, seed: u64) -> Result<Estimate> {
    if n < 2 {
        return Err(domain("monte carlo needs at least two samples"));
    }
    // run the quadrature path's checks for boundedness
    SublevelVolume::build(s, 6, 8)?.at(lam)?;
    let dim = 2 * s.d;
    let chunks = n.div_ceil(MC_CHUNK);
    let partial: Vec<(f64, f64)> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(c);
            let count = MC_CHUNK.min(n - c * MC_CHUNK);
            let mut sum = 0.0;
            let mut sq = 0.0;
            let mut p = vec![0.0; dim];
            for _ in 0..count {
                for v in p.iter_mut() {
                    *v = StandardNormal.sample(&mut rng);
                }
                let nrm = p.iter().map(|v| v * v).sum::<f64>().sqrt();
                p.iter_mut().for_each(|v| *v /= nrm);
                let a = s.part(2, &p).unwrap_or(f64::NAN);
                let b = s.part(1, &p).unwrap_or(f64::NAN);
                let r = boundary_radius(a, b, lam);
                let v = r.powi(dim as i32);
                sum += v;
                sq += v * v;
            }
            (sum, sq)
        })
        .collect();
    let (sum, sq) = partial.iter().fold((0.0, 0.0), |acc, x| (acc.0 + x.0, acc.1 + x.1));
    let nf = n as f64;
    let mean = sum / nf;
    let var = (sq / nf - mean * mean).max(0.0) * nf / (nf - 1.0);
    let scale = sphere_area(dim) / dim as f64 / (2.0 * PI).powi(s.d as i32);
    let value = scale * mean;
    let error = scale * (var / nf).sqrt();
    if !value.is_finite() {
        return Err(domain("monte carlo volume is not finite"));
    }
    Ok(Estimate { value, error })
}

fn default_sphere_order(d: usize) -> usize {
    match d {
        1 | 2 => 24,
        3 => 16,
        _ => 8,
    }
}

/// `(2 pi)^{-d} int_{p2=1} p1 dS/|grad p2|`, the coefficient of the `lam^{d-1/2}` correction.
pub fn surface_integral_p1(s: &Symbol) -> Result<f64> {
    let order = default_sphere_order(s.d);
    surface_integral_p1_with(s, order, order)
}

pub fn surface_integral_p1_with(s: &Symbol, polar_order: usize, azimuth_order: usize) -> Result<f64> {
    let rule = SphereRule::hyperspherical(2 * s.d, polar_order, azimuth_order);
    let mut acc = 0.0;
    for (p, w) in rule.points.iter().zip(&rule.weights) {
        acc += w * s.part(1, p)?;
    }
    let d = s.d as i32;
    // on {p2 = 1}: w = sqrt(2) theta, dS = 2^{d-1/2} dtheta, |grad p2| = sqrt(2), p1 scales by sqrt(2)
    Ok(acc * 2f64.powf(d as f64 - 0.5) / (2.0 * PI).powi(d))
}

/// `(2 pi)^{-d} int_{p2=lam} p0 dS/|grad p2|`, the second Weyl term.
pub fn surface_integral_p0(s: &Symbol, lam: f64) -> Result<f64> {
    if !s.has_degree(0) {
        return Ok(0.0);
    }
    let order = default_sphere_order(s.d);
    let rule = SphereRule::hyperspherical(2 * s.d, order, order);
    let mut acc = 0.0;
    for (p, w) in rule.points.iter().zip(&rule.weights) {
        acc += w * s.part(0, p)?;
    }
    let d = s.d as i32;
    Ok(acc * (2.0 * lam).powi(d - 1) / (2.0 * PI).powi(d))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::hopf_pullback;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn hopf_symbol(c: &[f64]) -> Symbol {
        Symbol::oscillator(c.len()).with_term(hopf_pullback(c)).unwrap()
    }

    #[test]
    fn evaluate_examples() {
        let s = Symbol::oscillator(2);
        assert!(s.principal_is_oscillator);
        let q = PhasePoint::new(vec![1.0, 0.0], vec![1.0, 0.0]).unwrap();
        assert_relative_eq!(s.evaluate(&q).unwrap(), 1.0, epsilon = 1e-15);
        let t = HomogeneousTerm::RadialPower { degree: 1, coeff: 2.0 };
        assert_relative_eq!(t.value(&[1.0, 0.0, 0.0, 1.0]).unwrap(), 2.0, epsilon = 1e-15);
        let h = hopf_pullback(&[0.3, 0.7]);
        assert!((h.value(&[1.0, 0.0, 0.0, 0.0]).unwrap() - 0.21213203435596426).abs() < 1e-12);
        assert!(h.value(&[0.0; 4]).is_err());
    }

    #[test]
    fn quadratic_form_makes_oscillator() {
        let mut q = vec![vec![0.0; 2]; 2];
        q[0][0] = 0.5;
        q[1][1] = 0.5;
        let s = Symbol::new(1, vec![HomogeneousTerm::QuadraticForm { degree: 2, q }]).unwrap();
        assert!(s.principal_is_oscillator);
        let s = Symbol::new(1, vec![HomogeneousTerm::RadialPower { degree: 2, coeff: 2.0 }]).unwrap();
        assert!(!s.principal_is_oscillator);
    }

    #[test]
    fn invalid_terms_rejected() {
        let q = vec![vec![1.0, 2.0], vec![0.0, 1.0]];
        assert!(Symbol::new(1, vec![HomogeneousTerm::QuadraticForm { degree: 2, q }]).is_err());
        let l = HomogeneousTerm::LinearForm { degree: 2, v: vec![1.0, 0.0] };
        assert!(Symbol::new(1, vec![l]).is_err());
        let json = r#"{"d":1,"terms":[{"degree":1,"kind":"linear_form","v":[1,0],"extra":1}]}"#;
        assert!(Symbol::from_json(json).is_err());
    }

    #[test]
    fn json_round_trip_is_exact() {
        let s = hopf_symbol(&[0.1 + 0.2, 1.0 / 3.0])
            .with_term(HomogeneousTerm::LinearForm { degree: 1, v: vec![1e-300, -2.5e17, PI, 0.1] })
            .unwrap()
            .with_term(HomogeneousTerm::Constant { degree: 0, value: -0.0 })
            .unwrap();
        let text = s.to_json();
        let back = Symbol::from_json(&text).unwrap();
        assert_eq!(back.to_json(), text);
        for (a, b) in s.terms.iter().zip(&back.terms) {
            assert_eq!(format!("{a:?}"), format!("{b:?}"));
        }
        assert!(text.contains("\"kind\":\"quadratic_over_root\""));
        assert!(text.contains("\"Q\""));
    }

    #[test]
    fn volume_of_oscillator_is_exact() {
        for d in 1..=3 {
            let s = Symbol::oscillator(d);
            let fact: f64 = (1..=d).map(|k| k as f64).product();
            for lam in [1.0, 7.5, 100.0] {
                let v = weyl_volume(&s, lam, VolumeMethod::default()).unwrap();
                assert_relative_eq!(v.value, lam.powi(d as i32) / fact, max_relative = 1e-12);
            }
        }
    }

    #[test]
    fn volume_d1_radial_closed_form() {
        let c = 0.4;
        let s = Symbol::oscillator(1).with_term(HomogeneousTerm::RadialPower { degree: 1, coeff: c }).unwrap();
        let lam = 20.0;
        // r^2/2 + c r / sqrt(2) = lam
        let r = (-c / 2f64.sqrt() + (c * c / 2.0 + 2.0 * lam).sqrt()) / 1.0;
        let exact = PI * r * r / (2.0 * PI);
        let q = weyl_volume(&s, lam, VolumeMethod::default()).unwrap();
        assert_relative_eq!(q.value, exact, max_relative = 1e-12);
        let mc = weyl_volume(&s, lam, VolumeMethod::MonteCarlo { n: 20_000, seed: 1 }).unwrap();
        assert!((mc.value - exact).abs() < 1e-9, "radial integrand is constant: {mc:?}");
    }

    #[test]
    fn volume_methods_agree_hopf() {
        let s = hopf_symbol(&[0.3, 0.7]);
        let q = weyl_volume(&s, 100.0, VolumeMethod::default()).unwrap();
        let mc = weyl_volume(&s, 100.0, VolumeMethod::MonteCarlo { n: 400_000, seed: 42 }).unwrap();
        assert!((q.value - mc.value).abs() < 3.0 * mc.error, "{q:?} vs {mc:?}");
        assert!(q.error < 1e-8 * q.value);
    }

    #[test]
    fn monte_carlo_is_thread_independent() {
        let s = hopf_symbol(&[0.3, 0.7]);
        let m = VolumeMethod::MonteCarlo { n: 150_000, seed: 5 };
        let a = weyl_volume(&s, 50.0, m).unwrap();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
        let b = pool.install(|| weyl_volume(&s, 50.0, m).unwrap());
        assert_eq!(a.value.to_bits(), b.value.to_bits());
    }

    #[test]
    fn unbounded_and_non_subordinate_rejected() {
        let s = Symbol::new(1, vec![HomogeneousTerm::RadialPower { degree: 1, coeff: 1.0 }]).unwrap();
        assert!(matches!(weyl_volume(&s, 10.0, VolumeMethod::default()), Err(Error::Precondition(_))));
        let s = Symbol::oscillator(1).with_term(HomogeneousTerm::RadialPower { degree: 1, coeff: 5.0 }).unwrap();
        assert!(matches!(weyl_volume(&s, 10.0, VolumeMethod::default()), Err(Error::Precondition(_))));
    }

    #[test]
    fn surface_integral_examples() {
        assert_eq!(surface_integral_p1(&Symbol::oscillator(2)).unwrap(), 0.0);
        for d in 1..=3usize {
            let c = 0.37;
            let s = Symbol::oscillator(d).with_term(HomogeneousTerm::RadialPower { degree: 1, coeff: c }).unwrap();
            let n = 2 * d;
            let area = sphere_area(n) * 2f64.sqrt().powi(n as i32 - 1);
            let exact = c * area / 2f64.sqrt() / (2.0 * PI).powi(d as i32);
            assert_relative_eq!(surface_integral_p1(&s).unwrap(), exact, max_relative = 1e-11);
        }
        let a = surface_integral_p1(&hopf_symbol(&[0.3, 0.7])).unwrap();
        let b = surface_integral_p1(&hopf_symbol(&[0.7, 0.3])).unwrap();
        let c = surface_integral_p1(&hopf_symbol(&[0.5, 0.5])).unwrap();
        assert_relative_eq!(a, b, max_relative = 1e-12);
        assert_relative_eq!(a, c, max_relative = 1e-12);
        assert_relative_eq!(a, 0.5, max_relative = 1e-12);
    }

    #[test]
    fn p0_second_term() {
        let s = Symbol::oscillator(2).with_term(HomogeneousTerm::Constant { degree: 0, value: 1.0 }).unwrap();
        // (2 pi)^{-2} * (2 lam) * area(S^3) = lam
        assert_relative_eq!(surface_integral_p0(&s, 3.0).unwrap(), 3.0, max_relative = 1e-12);
        assert_eq!(surface_integral_p0(&Symbol::oscillator(2), 3.0).unwrap(), 0.0);
    }

    #[test]
    fn two_term_expansion_recovers_surface_coefficient() {
        let s = hopf_symbol(&[0.3, 0.7]);
        let vol = SublevelVolume::new(&s, 16, 16).unwrap();
        let lams: Vec<f64> = (0..40).map(|i| 200.0 + 50.0 * i as f64).collect();
        // V - lam^2/2 = a lam^{3/2} + b lam + c lam^{1/2} + e
        let rows: Vec<[f64; 4]> = lams.iter().map(|&l| [l.powf(1.5), l, l.sqrt(), 1.0]).collect();
        let y: Vec<f64> = lams.iter().map(|&l| vol.at(l).unwrap().value - 0.5 * l * l).collect();
        let a = nalgebra::DMatrix::from_fn(rows.len(), 4, |i, j| rows[i][j]);
        let b = nalgebra::DVector::from_vec(y);
        let coef = a.svd(true, true).solve(&b, 1e-14).unwrap();
        let expected = -surface_integral_p1(&s).unwrap();
        assert!((coef[0] - expected).abs() < 1e-4 * expected.abs(), "{} vs {expected}", coef[0]);
    }

    proptest! {
        #[test]
        fn homogeneity(v in proptest::collection::vec(-3.0f64..3.0, 4), scale in prop::sample::select(vec![2.0, 10.0, 100.0])) {
            let n: f64 = v.iter().map(|a| a * a).sum::<f64>().sqrt();
            prop_assume!(n > 1e-3);
            let terms = vec![
                HomogeneousTerm::QuadraticForm { degree: 2, q: vec![vec![1.0, 0.2, 0.0, 0.0], vec![0.2, 0.5, 0.0, -0.1], vec![0.0, 0.0, 2.0, 0.0], vec![0.0, -0.1, 0.0, 1.0]] },
                HomogeneousTerm::LinearForm { degree: 1, v: vec![0.3, -1.0, 0.5, 2.0] },
                HomogeneousTerm::RadialPower { degree: 1, coeff: 0.7 },
                HomogeneousTerm::RadialPower { degree: 2, coeff: 1.3 },
                hopf_pullback(&[0.3, 0.7]),
                HomogeneousTerm::Constant { degree: 0, value: 2.0 },
            ];
            let sv: Vec<f64> = v.iter().map(|a| a * scale).collect();
            for t in &terms {
                let a = t.value(&v).unwrap();
                let b = t.value(&sv).unwrap();
                let expect = a * scale.powi(t.degree() as i32);
                prop_assert!((b - expect).abs() <= 1e-12 * expect.abs().max(1e-12 * scale.powi(t.degree() as i32)));
            }
        }

        #[test]
        fn volume_monotone(l1 in 1.0f64..500.0, dl in 0.0f64..50.0) {
            let s = hopf_symbol(&[0.3, 0.7]);
            let vol = SublevelVolume::new(&s, 8, 8).unwrap();
            prop_assert!(vol.at(l1 + dl).unwrap().value >= vol.at(l1).unwrap().value);
        }
    }
}
