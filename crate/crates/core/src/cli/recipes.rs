//! Shipped reproduction recipes.

pub struct Recipe {
    pub name: &'static str,
    pub summary: &'static str,
    /// Expected PASS bands, as printed by `isospec list`.
    pub bands: &'static str,
    pub config: &'static str,
}

macro_rules! recipe {
    ($name:literal, $summary:literal, $bands:literal) => {
        Recipe {
            name: $name,
            summary: $summary,
            bands: $bands,
            config: include_str!(concat!("../../recipes/", $name, ".json")),
        }
    };
}

pub const RECIPES: &[Recipe] = &[
    recipe!("spectrum-oscillator-d2", "oscillator spectrum, d=2, up to 10.5", "N(10.5) = 55; multiplicities binomial"),
    recipe!("oracles-mehler-d1", "Mehler kernel vs eigensum at 20 random points", "max error <= 1e-8"),
    recipe!("thm1.2-degenerate-d2", "trace near 2pi, hopf c=(0.5,0.5)", "exponent in [0.85, 1.15]; Poisson ratios <= 1e-3"),
    recipe!("thm1.2-morsebott-d2", "trace near 2pi, hopf c=(0.3,0.7)", "exponent in [0.35, 0.65]; Poisson ratios <= 1e-3"),
    recipe!("trace-sqrt-d2", "trace near 2pi, H0 + 0.5 sqrt(H0)", "exponent in [0.85, 1.15]; Poisson ratios <= 1e-3"),
    recipe!(
        "weyl-two-term-hopf",
        "two-term Weyl law, hopf c=(0.3,0.7), lambda in [100, 2000]",
        "remainder exponent < 0.9; coefficient within 2%; Tauberian gap bounded and decaying"
    ),
    recipe!(
        "weyl-two-term-oscillator",
        "Weyl remainder of the unperturbed oscillator",
        "remainder exponent in [0.9, 1.1]; Tauberian gap bounded"
    ),
    recipe!("statphase-control-d1", "model integral with psi1 = 0, d=1", "exponent in [-0.15, 0.15]"),
    recipe!("statphase-morsebott-d2", "model integral with Morse-Bott psi1, d=2", "exponent in [0.35, 0.65]"),
    recipe!("shift-diagonal-d1", "wavepacket shift, c=0.2, n=1..3", "deviation <= 10%; linearity <= 5%"),
    recipe!("shift-diagonal-d2", "wavepacket shift, c=(0.1,0.25), n=1..3", "deviation <= 10%; linearity <= 5%"),
    recipe!("morsebott-classifier-d2", "critical manifolds of the averaged hopf term, d=2", "k = 2"),
    recipe!("morsebott-classifier-d3", "critical manifolds of the averaged hopf term, d=3", "k = 4"),
    recipe!("morsebott-flat-d2", "equal coefficients, d=2", "flat set detected"),
];

pub fn find(name: &str) -> Option<&'static Recipe> {
    RECIPES.iter().find(|r| r.name == name)
}

/// Text catalog printed by `isospec list`.
pub fn catalog() -> String {
    let width = RECIPES.iter().map(|r| r.name.len()).max().unwrap_or(0);
    let mut s = String::new();
    for r in RECIPES {
        s.push_str(&format!("{:width$}  {}\n{:width$}  PASS: {}\n", r.name, r.summary, "", r.bands));
    }
    s
}
