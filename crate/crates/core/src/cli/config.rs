//! Experiment configuration: strict JSON schema plus semantic checks that name the bad key.

use std::f64::consts::PI;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::fit::Spacing;
use crate::geometry::hopf_pullback;
use crate::spectra::{WindowSpec, DEFAULT_SIGMA_T};
use crate::symbols::{HomogeneousTerm, Symbol};

/// A configuration problem, reported with exit code 2.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "config error: {}", self.0)
    }
}

impl std::error::Error for ConfigError {}

fn bad(key: &str, msg: impl std::fmt::Display) -> ConfigError {
    ConfigError(format!("`{key}`: {msg}"))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Experiment {
    Spectrum,
    Weyl,
    Trace,
    Morsebott,
    Mehler,
    Statphase,
    Shift,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelConfig {
    /// `p2` alone.
    Oscillator { d: usize },
    /// `p2 + a sqrt(p2)`.
    Sqrt { d: usize, a: f64 },
    /// `p2` plus the Hopf pullback with coefficients `c`.
    Hopf { d: usize, c: Vec<f64> },
    /// Any symbol document, quantized in the Hermite basis up to level `n_max`.
    General { symbol: Symbol, n_max: u32 },
}

impl ModelConfig {
    pub fn d(&self) -> usize {
        match self {
            ModelConfig::Oscillator { d } | ModelConfig::Sqrt { d, .. } | ModelConfig::Hopf { d, .. } => *d,
            ModelConfig::General { symbol, .. } => symbol.d,
        }
    }

    pub fn symbol(&self) -> Symbol {
        let d = self.d();
        match self {
            ModelConfig::Oscillator { .. } => Symbol::oscillator(d),
            ModelConfig::Sqrt { a, .. } => Symbol::oscillator(d)
                .with_term(HomogeneousTerm::RadialPower { degree: 1, coeff: *a })
                .expect("validated"),
            ModelConfig::Hopf { c, .. } => Symbol::oscillator(d).with_term(hopf_pullback(c)).expect("validated"),
            ModelConfig::General { symbol, .. } => symbol.clone(),
        }
    }

    /// The single degree-one term, if the symbol has exactly one.
    pub fn p1_term(&self) -> Option<HomogeneousTerm> {
        let s = self.symbol();
        let mut it = s.terms.iter().filter(|t| t.degree() == 1);
        match (it.next(), it.next()) {
            (Some(t), None) => Some(t.clone()),
            _ => None,
        }
    }

    fn validate(&self) -> Result<(), ConfigError> {
        let d = self.d();
        if !(1..=8).contains(&d) {
            return Err(bad("model.d", format!("dimension {d} outside 1..=8")));
        }
        match self {
            ModelConfig::Oscillator { .. } => {}
            ModelConfig::Sqrt { a, .. } => {
                if !(a.is_finite() && a.abs() < 1.0) {
                    return Err(bad("model.a", "must be finite with |a| < 1"));
                }
            }
            ModelConfig::Hopf { c, .. } => {
                if c.len() != d {
                    return Err(bad("model.c", format!("has {} entries, expected d = {d}", c.len())));
                }
                if c.iter().any(|v| !(v.is_finite() && v.abs() < 1.0)) {
                    return Err(bad("model.c", "entries must be finite with |c_j| < 1"));
                }
            }
            ModelConfig::General { symbol, n_max } => {
                if symbol.d > 2 {
                    return Err(bad("model.symbol.d", "general symbols are quantized for d <= 2 only"));
                }
                if !symbol.principal_is_oscillator {
                    return Err(bad("model.symbol.terms", "degree-2 part must be the oscillator p2"));
                }
                let cap = if symbol.d == 1 { 200 } else { 60 };
                if *n_max < 4 || *n_max > cap {
                    return Err(bad("model.n_max", format!("must lie in 4..={cap} for d = {}", symbol.d)));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LambdaConfig {
    pub min: f64,
    pub max: f64,
    pub points: usize,
    #[serde(default = "default_spacing")]
    pub spacing: Spacing,
}

fn default_spacing() -> Spacing {
    Spacing::Linear
}

impl LambdaConfig {
    pub fn grid(&self) -> Vec<f64> {
        crate::fit::grid(self.min, self.max, self.points, self.spacing)
    }

    fn validate(&self) -> Result<(), ConfigError> {
        if !(self.min.is_finite() && self.min > 0.0) {
            return Err(bad("lambda.min", "must be positive"));
        }
        if !(self.max.is_finite() && self.max > self.min) {
            return Err(bad("lambda.max", "must exceed lambda.min"));
        }
        if self.points < 2 || self.points > 1_000_000 {
            return Err(bad("lambda.points", "must lie in 2..=1000000"));
        }
        Ok(())
    }
}

/// Window fields; the centre defaults to `2 pi n` for trace experiments and to 0 otherwise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case", deny_unknown_fields)]
pub enum WindowConfig {
    Gaussian {
        sigma_t: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        center_t: Option<f64>,
    },
    HannBump {
        half_width: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        center_t: Option<f64>,
    },
}

impl WindowConfig {
    pub fn spec(&self, default_center: f64) -> WindowSpec {
        match *self {
            WindowConfig::Gaussian { sigma_t, center_t } => {
                WindowSpec::gaussian(sigma_t, center_t.unwrap_or(default_center))
            }
            WindowConfig::HannBump { half_width, center_t } => {
                WindowSpec::hann(half_width, center_t.unwrap_or(default_center))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub model: ModelConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<LambdaConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window: Option<WindowConfig>,
    #[serde(default = "default_n")]
    pub n: i64,
    pub output_dir: PathBuf,
    #[serde(default)]
    pub seed: u64,
    /// Packet momentum for `shift`; defaults to 12 along the first axis.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub carrier: Option<Vec<f64>>,
    /// Packet width for `shift`; defaults to 1.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub packet_width: Option<f64>,
    /// Random points for `mehler`, classifier starts for `morsebott`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
    /// Lower end of the exponent fit for `statphase`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fit_min: Option<f64>,
}

fn default_n() -> i64 {
    1
}

impl ExperimentConfig {
    /// Parses and validates a config document.
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: ExperimentConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            let inner = e.into_inner();
            if path.is_empty() || path == "." {
                ConfigError(inner.to_string())
            } else {
                ConfigError(format!("`{path}`: {inner}"))
            }
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    fn require_lambda(&self) -> Result<&LambdaConfig, ConfigError> {
        self.lambda.as_ref().ok_or_else(|| bad("lambda", "required for this experiment"))
    }

    /// Window used by the experiment, with its default filled in.
    pub fn window_spec(&self) -> WindowSpec {
        let center = match self.experiment {
            Experiment::Trace => 2.0 * PI * self.n as f64,
            _ => 0.0,
        };
        match &self.window {
            Some(w) => w.spec(center),
            None => WindowSpec::gaussian(DEFAULT_SIGMA_T, center),
        }
    }

    pub fn carrier(&self) -> Vec<f64> {
        self.carrier.clone().unwrap_or_else(|| {
            let mut v = vec![0.0; self.model.d()];
            v[0] = 12.0;
            v
        })
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.model.validate()?;
        if let Some(l) = &self.lambda {
            l.validate()?;
        }
        if self.output_dir.as_os_str().is_empty() {
            return Err(bad("output_dir", "must not be empty"));
        }
        if self.window.is_some() {
            self.window_spec().validate().map_err(|e| bad("window", e))?;
        }
        if let Some(s) = self.samples {
            if s == 0 || s > 100_000 {
                return Err(bad("samples", "must lie in 1..=100000"));
            }
        }
        let d = self.model.d();
        let is_oscillator = matches!(self.model, ModelConfig::Oscillator { .. });
        match self.experiment {
            Experiment::Spectrum => {
                self.require_lambda()?;
            }
            Experiment::Weyl => {
                self.require_lambda()?;
                if self.model.symbol().has_degree(0) {
                    return Err(bad("model", "two-term check needs a symbol without degree-0 terms"));
                }
                let w = self.window_spec();
                if w.center_t != 0.0 {
                    return Err(bad("window.center_t", "the mollifier must be centred at 0"));
                }
                if !matches!(w.shape, crate::spectra::WindowShape::Gaussian { .. }) {
                    return Err(bad("window.shape", "the mollifier must be gaussian"));
                }
            }
            Experiment::Trace => {
                self.require_lambda()?;
            }
            Experiment::Morsebott => {
                if self.model.p1_term().is_none() {
                    return Err(bad("model", "needs exactly one degree-1 term to classify"));
                }
            }
            Experiment::Mehler => {
                if !is_oscillator {
                    return Err(bad("model.kind", "mehler compares the oscillator kernel; use oscillator"));
                }
                if d != 1 {
                    return Err(bad("model.d", "the eigensum comparison is one-dimensional"));
                }
            }
            Experiment::Statphase => {
                self.require_lambda()?;
                if !(1..=2).contains(&d) {
                    return Err(bad("model.d", "statphase is implemented for d = 1, 2"));
                }
                if !is_oscillator && !matches!(self.model, ModelConfig::Hopf { .. }) {
                    return Err(bad("model.kind", "statphase takes oscillator (control) or hopf"));
                }
                if self.n < 1 {
                    return Err(bad("n", "statphase needs n >= 1"));
                }
                if let Some(f) = self.fit_min {
                    let l = self.require_lambda()?;
                    if !(f >= l.min && f < l.max) {
                        return Err(bad("fit_min", "must lie in [lambda.min, lambda.max)"));
                    }
                }
            }
            Experiment::Shift => {
                if !matches!(self.model, ModelConfig::Hopf { .. }) {
                    return Err(bad("model.kind", "shift evolves under the diagonal hopf model"));
                }
                if d > 2 {
                    return Err(bad("model.d", "shift is implemented for d = 1, 2"));
                }
                if !(1..=20).contains(&self.n) {
                    return Err(bad("n", "shift needs 1 <= n <= 20"));
                }
                let c = self.carrier();
                if c.len() != d || c.iter().any(|v| !v.is_finite()) || c.iter().all(|v| *v == 0.0) {
                    return Err(bad("carrier", format!("must be a nonzero finite vector of length {d}")));
                }
                if let Some(w) = self.packet_width {
                    if !(0.2..=3.0).contains(&w) {
                        return Err(bad("packet_width", "must lie in [0.2, 3]"));
                    }
                }
            }
        }
        if self.experiment != Experiment::Shift && (self.carrier.is_some() || self.packet_width.is_some()) {
            return Err(bad("carrier", "only used by the shift experiment"));
        }
        if self.experiment != Experiment::Statphase && self.fit_min.is_some() {
            return Err(bad("fit_min", "only used by the statphase experiment"));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = r#"{
        "experiment": "spectrum",
        "model": {"kind": "oscillator", "d": 2},
        "lambda": {"min": 1, "max": 10.5, "points": 20},
        "output_dir": "out"
    }"#;

    #[test]
    fn parses_minimal_config() {
        let c = ExperimentConfig::from_json(BASE).unwrap();
        assert_eq!(c.n, 1);
        assert_eq!(c.seed, 0);
        assert_eq!(c.lambda.unwrap().spacing, Spacing::Linear);
    }

    #[test]
    fn unknown_keys_are_named() {
        let text = BASE.replace(r#""d": 2"#, r#""dimention": 2"#);
        let e = ExperimentConfig::from_json(&text).unwrap_err();
        assert!(e.0.contains("dimention"), "{e}");
        let text = BASE.replace(r#""points": 20"#, r#""points": 20, "step": 1"#);
        assert!(ExperimentConfig::from_json(&text).unwrap_err().0.contains("step"));
    }

    #[test]
    fn semantic_errors_name_the_key() {
        let text = BASE.replace(r#""min": 1"#, r#""min": 20"#);
        assert!(ExperimentConfig::from_json(&text).unwrap_err().0.contains("lambda.max"));
        let text = BASE.replace(r#"{"kind": "oscillator", "d": 2}"#, r#"{"kind": "hopf", "d": 2, "c": [0.1]}"#);
        assert!(ExperimentConfig::from_json(&text).unwrap_err().0.contains("model.c"));
        let text = BASE.replace(r#""points": 20"#, r#""points": "many""#);
        assert!(ExperimentConfig::from_json(&text).unwrap_err().0.contains("lambda.points"));
    }

    #[test]
    fn trace_window_defaults_to_period() {
        let text = BASE.replace("spectrum", "trace").replace(r#""output_dir""#, r#""n": 2, "output_dir""#);
        let c = ExperimentConfig::from_json(&text).unwrap();
        assert_eq!(c.window_spec().center_t, 4.0 * PI);
    }

    #[test]
    fn round_trips() {
        let c = ExperimentConfig::from_json(BASE).unwrap();
        let again = ExperimentConfig::from_json(&serde_json::to_string(&c).unwrap()).unwrap();
        assert_eq!(c, again);
    }
}
