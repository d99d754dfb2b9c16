//! Config-driven experiment runner behind the `isospec` binary.

mod config;
pub mod recipes;

pub use config::{ConfigError, Experiment, ExperimentConfig, LambdaConfig, ModelConfig, WindowConfig};

use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::Error;
use crate::geometry::{classify_morse_bott, hopf_pullback, MorseBottReport};
use crate::quantize::{
    diagonal_model_spectrum, multiplicity, oscillator_spectrum, sqrt_oscillator_spectrum_scaled, weyl_spectrum,
    SpectrumTable,
};
use crate::spectra::{gap_trend, tauberian_gap, weyl_two_term_check, WindowSpec};
use crate::trace::{
    mehler_eigensum, mehler_kernel, poisson_ratio, singularity_exponent, stationary_phase_oracle, trace_transform,
    wavepacket_shift, windowed_trace, ModelPhase, StatPhaseOptions,
};

/// Samples used by the classifier when the config gives none.
const DEFAULT_CLASSIFIER_STARTS: usize = 256;
const DEFAULT_MEHLER_POINTS: usize = 20;
const POISSON_PROBES: [f64; 2] = [3.0, 5.0];
const POISSON_SIGMA: f64 = PI / 16.0;

/// Outcome of one acceptance check inside a run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Criterion {
    pub name: String,
    pub value: f64,
    pub band: String,
    pub pass: bool,
}

impl Criterion {
    fn new(name: impl Into<String>, value: f64, band: impl Into<String>, pass: bool) -> Self {
        Criterion { name: name.into(), value, band: band.into(), pass }
    }

    fn within(name: impl Into<String>, value: f64, lo: f64, hi: f64) -> Self {
        Criterion::new(name, value, format!("[{lo}, {hi}]"), value >= lo && value <= hi)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub config: ExperimentConfig,
    pub version: String,
    pub wall_time_seconds: f64,
    pub threads: usize,
    pub outputs: Vec<String>,
    pub criteria: Vec<Criterion>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl RunManifest {
    pub fn all_pass(&self) -> bool {
        self.error.is_none() && self.criteria.iter().all(|c| c.pass)
    }
}

#[derive(Debug)]
pub enum RunError {
    Config(ConfigError),
    Compute(Error),
}

impl RunError {
    /// 2 for configuration problems, 3 for trust-region and window-support violations, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) => 2,
            RunError::Compute(Error::Trust { .. } | Error::WindowSupport(_)) => 3,
            RunError::Compute(_) => 1,
        }
    }
}

impl std::fmt::Display for RunError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RunError::Config(e) => write!(f, "{e}"),
            RunError::Compute(e) => write!(f, "{e}"),
        }
    }
}

impl From<ConfigError> for RunError {
    fn from(e: ConfigError) -> Self {
        RunError::Config(e)
    }
}

impl From<Error> for RunError {
    fn from(e: Error) -> Self {
        RunError::Compute(e)
    }
}

/// Command-line overrides of config fields.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub output_dir: Option<PathBuf>,
    pub threads: Option<usize>,
    pub seed: Option<u64>,
}

/// Reads a config from `source`, which is a file path or, failing that, a shipped recipe name.
pub fn load_config(source: &str) -> Result<ExperimentConfig, ConfigError> {
    let path = Path::new(source);
    let text = if path.exists() {
        fs::read_to_string(path).map_err(|e| ConfigError(format!("cannot read {source}: {e}")))?
    } else if let Some(r) = recipes::find(source) {
        r.config.to_string()
    } else {
        return Err(ConfigError(format!("{source}: no such file or recipe")));
    };
    ExperimentConfig::from_json(&text)
}

/// Runs `source` with overrides; returns the exit code and the manifest if one was written.
pub fn run_source(source: &str, overrides: &Overrides) -> (i32, Option<RunManifest>, Option<RunError>) {
    let mut cfg = match load_config(source) {
        Ok(c) => c,
        Err(e) => return (2, None, Some(RunError::Config(e))),
    };
    if let Some(d) = &overrides.output_dir {
        cfg.output_dir = d.clone();
    }
    if let Some(s) = overrides.seed {
        cfg.seed = s;
    }
    if let Some(0) = overrides.threads {
        return (2, None, Some(RunError::Config(ConfigError("`--threads`: must be at least 1".into()))));
    }
    match run(&cfg, overrides.threads) {
        Ok(m) => (0, Some(m), None),
        Err((e, m)) => (e.exit_code(), m, Some(e)),
    }
}

/// Runs a validated config, optionally on a dedicated pool of `threads` workers. On failure the
/// manifest carries the error message when the output directory was usable.
pub fn run(cfg: &ExperimentConfig, threads: Option<usize>) -> Result<RunManifest, (RunError, Option<RunManifest>)> {
    if let Err(e) = cfg.validate() {
        return Err((e.into(), None));
    }
    let start = Instant::now();
    let pool = {
        let mut b = rayon::ThreadPoolBuilder::new();
        if let Some(n) = threads {
            b = b.num_threads(n);
        }
        match b.build() {
            Ok(p) => p,
            Err(e) => return Err((RunError::Compute(Error::Numerical(e.to_string())), None)),
        }
    };
    let workers = pool.current_num_threads();
    if let Err(e) = fs::create_dir_all(&cfg.output_dir) {
        return Err((RunError::Compute(e.into()), None));
    }
    let mut out = Outputs { dir: cfg.output_dir.clone(), files: Vec::new() };
    let result = pool.install(|| execute(cfg, &mut out));
    let mut manifest = RunManifest {
        config: cfg.clone(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        wall_time_seconds: start.elapsed().as_secs_f64(),
        threads: workers,
        outputs: out.files.clone(),
        criteria: Vec::new(),
        error: None,
    };
    match result {
        Ok(criteria) => {
            manifest.criteria = criteria;
            match write_manifest(&cfg.output_dir, &manifest) {
                Ok(()) => Ok(manifest),
                Err(e) => Err((e.into(), None)),
            }
        }
        Err(e) => {
            manifest.error = Some(e.to_string());
            let written = write_manifest(&cfg.output_dir, &manifest).is_ok();
            Err((e, written.then_some(manifest)))
        }
    }
}

fn write_manifest(dir: &Path, m: &RunManifest) -> Result<(), Error> {
    let text = serde_json::to_string_pretty(m)? + "\n";
    write_atomic(dir, "manifest.json", &text)
}

fn write_atomic(dir: &Path, name: &str, contents: &str) -> Result<(), Error> {
    let tmp = dir.join(format!(".{name}.tmp"));
    fs::write(&tmp, contents)?;
    fs::rename(&tmp, dir.join(name))?;
    Ok(())
}

struct Outputs {
    dir: PathBuf,
    files: Vec<String>,
}

impl Outputs {
    fn write(&mut self, name: &str, contents: &str) -> Result<(), RunError> {
        write_atomic(&self.dir, name, contents)?;
        self.files.push(name.to_string());
        Ok(())
    }

    fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), RunError> {
        let text = serde_json::to_string_pretty(value).map_err(Error::from)? + "\n";
        self.write(name, &text)
    }
}

fn execute(cfg: &ExperimentConfig, out: &mut Outputs) -> Result<Vec<Criterion>, RunError> {
    match cfg.experiment {
        Experiment::Spectrum => run_spectrum(cfg, out),
        Experiment::Weyl => run_weyl(cfg, out),
        Experiment::Trace => run_trace(cfg, out),
        Experiment::Morsebott => run_morsebott(cfg, out),
        Experiment::Mehler => run_mehler(cfg, out),
        Experiment::Statphase => run_statphase(cfg, out),
        Experiment::Shift => run_shift(cfg, out),
    }
}

fn lambda(cfg: &ExperimentConfig) -> &LambdaConfig {
    cfg.lambda.as_ref().expect("validated")
}

/// Exact or quantized spectrum of the configured model, complete up to `lambda_max`.
pub fn model_spectrum(model: &ModelConfig, lambda_max: f64) -> crate::Result<SpectrumTable> {
    match model {
        ModelConfig::Oscillator { d } => oscillator_spectrum(*d, lambda_max),
        ModelConfig::Sqrt { d, a } => sqrt_oscillator_spectrum_scaled(*d, *a, lambda_max),
        ModelConfig::Hopf { c, .. } => diagonal_model_spectrum(c, lambda_max),
        ModelConfig::General { symbol, n_max } => weyl_spectrum(symbol, *n_max, lambda_max),
    }
}

/// Classification of the period average of the degree-one part, if there is one.
fn classify(model: &ModelConfig, samples: usize, seed: u64) -> crate::Result<Option<MorseBottReport>> {
    match model.p1_term() {
        Some(t) => Ok(Some(classify_morse_bott(&t, model.d(), samples, seed)?)),
        None => Ok(None),
    }
}

/// Predicted growth exponent of the windowed trace near a nonzero period: `d - 1` when the
/// average of `p1` is flat, `d - 1 - k/4` in the Morse-Bott case, unknown otherwise.
fn expected_trace_exponent(cfg: &ExperimentConfig) -> crate::Result<Option<f64>> {
    let d = cfg.model.d() as f64;
    if cfg.n == 0 {
        return Ok(Some(d - 1.0));
    }
    match &cfg.model {
        ModelConfig::Oscillator { .. } | ModelConfig::Sqrt { .. } => return Ok(Some(d - 1.0)),
        _ => {}
    }
    Ok(match classify(&cfg.model, DEFAULT_CLASSIFIER_STARTS, cfg.seed)? {
        None => Some(d - 1.0),
        Some(r) if r.flat_set_detected => Some(d - 1.0),
        Some(r) if r.is_morse_bott => Some(d - 1.0 - r.k_min as f64 / 4.0),
        Some(_) => None,
    })
}

fn run_spectrum(cfg: &ExperimentConfig, out: &mut Outputs) -> Result<Vec<Criterion>, RunError> {
    let l = lambda(cfg);
    let table = model_spectrum(&cfg.model, l.max)?;
    out.write("spectrum.csv", &table.to_csv())?;
    out.write("spectrum.json", &table.metadata_json())?;
    let mut csv = String::from("lambda,N\n");
    for lam in l.grid() {
        csv.push_str(&format!("{lam:.16e},{}\n", table.count(lam)?));
    }
    out.write("counting.csv", &csv)?;
    let mut criteria = Vec::new();
    if let ModelConfig::Oscillator { d } | ModelConfig::Sqrt { d, .. } = cfg.model {
        let mut mismatches = 0u64;
        for (j, &m) in table.multiplicities().iter().enumerate() {
            if m != multiplicity(j as i64, d as i64)? {
                mismatches += 1;
            }
        }
        criteria.push(Criterion::new("multiplicity mismatches", mismatches as f64, "= 0", mismatches == 0));
    }
    Ok(criteria)
}

fn run_weyl(cfg: &ExperimentConfig, out: &mut Outputs) -> Result<Vec<Criterion>, RunError> {
    let l = lambda(cfg);
    let rho = cfg.window_spec();
    let grid = l.grid();
    let table = model_spectrum(&cfg.model, l.max + rho.lambda_cutoff() + 1.0)?;
    let symbol = cfg.model.symbol();
    let check = weyl_two_term_check(&table, &symbol, &grid, &rho)?;
    out.write("weyl.csv", &check.to_csv())?;
    let gap = tauberian_gap(&table, symbol.d, &rho, &grid)?;
    let mut csv = String::from("lambda,gap\n");
    for (lam, g) in grid.iter().zip(&gap) {
        csv.push_str(&format!("{lam:.16e},{g:.16e}\n"));
    }
    out.write("tauberian.csv", &csv)?;
    let trend = gap_trend(&gap)?;
    out.json("weyl.json", &serde_json::json!({ "check": check, "tauberian": trend }))?;

    let mut criteria = Vec::new();
    let e = check.remainder_fit.exponent;
    if matches!(cfg.model, ModelConfig::Oscillator { .. }) {
        criteria.push(Criterion::within("remainder exponent (control)", e, 0.9, 1.1));
    } else {
        criteria.push(Criterion::new("remainder exponent", e, "< 0.9", e < 0.9));
        if let Some(rel) = check.coefficient_relative_error {
            criteria.push(Criterion::new("second-term coefficient relative error", rel, "<= 0.02", rel <= 0.02));
        }
    }
    criteria.push(Criterion::new(
        "Tauberian gap bounded (max |gap|)",
        trend.max_abs,
        "upper-half max <= 2 x lower-half max",
        trend.bounded,
    ));
    let mb = classify(&cfg.model, DEFAULT_CLASSIFIER_STARTS, cfg.seed)?.is_some_and(|r| r.is_morse_bott);
    if mb {
        criteria.push(Criterion::new(
            "Tauberian gap decaying (last / first quartile mean)",
            trend.last_quartile_mean / trend.first_quartile_mean,
            "< 1",
            trend.decaying,
        ));
    }
    Ok(criteria)
}

fn run_trace(cfg: &ExperimentConfig, out: &mut Outputs) -> Result<Vec<Criterion>, RunError> {
    let l = lambda(cfg);
    let grid = l.grid();
    let window = cfg.window_spec();
    let reference = WindowSpec { center_t: 0.0, ..window };
    let probes: Vec<WindowSpec> = POISSON_PROBES.iter().map(|&t| WindowSpec::gaussian(POISSON_SIGMA, t)).collect();
    let cutoff = probes.iter().chain([&window, &reference]).map(|w| w.lambda_cutoff()).fold(0.0, f64::max);
    let table = model_spectrum(&cfg.model, l.max + cutoff + 1.0)?;

    let tt = trace_transform(&table, cfg.n, &window, &grid)?;
    out.write("trace.csv", &tt.to_csv())?;
    let fit = singularity_exponent(&tt)?;
    let r = trace_transform(&table, 0, &reference, &grid)?;
    out.write("trace_n0.csv", &r.to_csv())?;

    let mut criteria = Vec::new();
    let expected = expected_trace_exponent(cfg)?;
    match expected {
        Some(x) => criteria.push(Criterion::within("singularity exponent", fit.exponent, x - 0.15, x + 0.15)),
        None => criteria.push(Criterion::new("singularity exponent", fit.exponent, "reported", true)),
    }
    for p in &probes {
        let ratio = poisson_ratio(&table, p, &reference, &grid)?;
        let values = windowed_trace(&table, p, &grid)?;
        let mut csv = String::from("lambda,re,im,abs\n");
        for (lam, z) in grid.iter().zip(&values) {
            csv.push_str(&format!("{lam:.16e},{:.16e},{:.16e},{:.16e}\n", z.re, z.im, z.norm()));
        }
        out.write(&format!("poisson_t{}.csv", p.center_t), &csv)?;
        criteria.push(Criterion::new(
            format!("Poisson ratio at t = {}", p.center_t),
            ratio,
            "<= 1e-3",
            ratio <= 1e-3,
        ));
    }
    out.json("trace.json", &serde_json::json!({ "fit": fit, "expected_exponent": expected }))?;
    Ok(criteria)
}

fn run_morsebott(cfg: &ExperimentConfig, out: &mut Outputs) -> Result<Vec<Criterion>, RunError> {
    let samples = cfg.samples.unwrap_or(DEFAULT_CLASSIFIER_STARTS);
    let report = classify(&cfg.model, samples, cfg.seed)?.expect("validated");
    let mut csv = String::from("value,dimension,hessian_rank\n");
    for m in &report.manifolds {
        csv.push_str(&format!("{:.16e},{},{}\n", m.value, m.dimension, m.hessian_rank));
    }
    out.write("critical_manifolds.csv", &csv)?;
    out.json("morsebott.json", &report)?;
    let mut criteria = Vec::new();
    if let ModelConfig::Hopf { d, c } = &cfg.model {
        let mut sorted = c.clone();
        sorted.sort_by(f64::total_cmp);
        let distinct = sorted.windows(2).all(|w| w[0] != w[1]);
        let all_equal = sorted.windows(2).all(|w| w[0] == w[1]);
        if all_equal {
            criteria.push(Criterion::new(
                "flat set detected",
                report.flat_fraction,
                "flat",
                report.flat_set_detected,
            ));
        } else if distinct {
            let want = 2 * d - 2;
            criteria.push(Criterion::new(
                "Morse-Bott k",
                report.k_min as f64,
                format!("= {want}"),
                report.is_morse_bott && report.k_min == want,
            ));
        }
    }
    Ok(criteria)
}

fn run_mehler(cfg: &ExperimentConfig, out: &mut Outputs) -> Result<Vec<Criterion>, RunError> {
    let samples = cfg.samples.unwrap_or(DEFAULT_MEHLER_POINTS);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut csv = String::from("t,x,y,kernel_re,kernel_im,eigensum_re,eigensum_im,abs_error\n");
    let mut worst: f64 = 0.0;
    for _ in 0..samples {
        let t = loop {
            let t: f64 = rng.gen_range(-2.0 * PI..2.0 * PI);
            let s = t / PI;
            if (s - s.round()).abs() * PI > 0.3 {
                break t;
            }
        };
        let x: f64 = rng.gen_range(-2.0..2.0);
        let y: f64 = rng.gen_range(-2.0..2.0);
        let k = mehler_kernel(t, &[x], &[y])?;
        let s = mehler_eigensum(t, x, y);
        let err = (k - s).norm();
        worst = worst.max(err);
        csv.push_str(&format!(
            "{t:.16e},{x:.16e},{y:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{err:.16e}\n",
            k.re, k.im, s.re, s.im
        ));
    }
    out.write("mehler.csv", &csv)?;
    Ok(vec![Criterion::new("max |kernel - eigensum|", worst, "<= 1e-8", worst <= 1e-8)])
}

fn run_statphase(cfg: &ExperimentConfig, out: &mut Outputs) -> Result<Vec<Criterion>, RunError> {
    let l = lambda(cfg);
    let p1 = match &cfg.model {
        ModelConfig::Hopf { c, .. } => Some(hopf_pullback(c)),
        _ => None,
    };
    let mp = ModelPhase::new(cfg.n, cfg.model.d(), p1)?;
    let opts = StatPhaseOptions { fit_from: cfg.fit_min, ..Default::default() };
    let rep = stationary_phase_oracle(&mp, None, &l.grid(), &opts)?;
    out.write("statphase.csv", &rep.to_csv())?;
    out.json("statphase.json", &rep)?;
    Ok(match rep.expected_exponent {
        Some(x) => vec![Criterion::within("model integral exponent", rep.fit.exponent, x - 0.15, x + 0.15)],
        None => vec![Criterion::new("model integral exponent", rep.fit.exponent, "reported", true)],
    })
}

fn run_shift(cfg: &ExperimentConfig, out: &mut Outputs) -> Result<Vec<Criterion>, RunError> {
    let ModelConfig::Hopf { c, .. } = &cfg.model else { unreachable!("validated") };
    let ns: Vec<i64> = (1..=cfg.n).collect();
    let rep = wavepacket_shift(c, &ns, &cfg.carrier(), cfg.packet_width.unwrap_or(1.0))?;
    out.write("shift.csv", &rep.to_csv())?;
    out.json("shift.json", &rep)?;
    let worst = rep.measurements.iter().map(|m| m.relative_deviation).fold(0.0, f64::max);
    Ok(vec![
        Criterion::new("shift relative deviation", worst, "<= 0.1", worst <= 0.1),
        Criterion::new("linearity deviation", rep.linearity_deviation, "<= 0.05", rep.linearity_deviation <= 0.05),
    ])
}
