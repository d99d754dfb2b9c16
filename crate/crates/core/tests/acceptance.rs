//! Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fails.
//!
//! Runs without the libtest harness so the lines always reach stdout.

use std::f64::consts::PI;
use std::time::Instant;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use isospec::cli::{model_spectrum, ModelConfig};
use isospec::fit::{grid, Spacing};
use isospec::geometry::{classify_morse_bott, hopf_pullback};
use isospec::quantize::{
    ladder_matrix, multiplicity, weyl_matrix, weyl_ordered_monomial, LadderOp, Monomial, SpectrumTable,
    WeylOptions,
};
use isospec::spectra::{gap_trend, tauberian_gap, weyl_two_term_check, WindowSpec};
use isospec::trace::{
    mehler_eigensum, mehler_kernel, poisson_ratio, singularity_exponent, stationary_phase_oracle, trace_transform,
    wavepacket_shift, ModelPhase, StatPhaseOptions,
};
use isospec::Result;

const SIGMA_T: f64 = PI / 8.0;
const PROBE_SIGMA: f64 = PI / 16.0;

struct Outcome {
    pass: bool,
    detail: String,
}

impl Outcome {
    fn new() -> Self {
        Outcome { pass: true, detail: String::new() }
    }

    fn check(&mut self, label: impl AsRef<str>, ok: bool) {
        if !self.detail.is_empty() {
            self.detail.push_str("; ");
        }
        self.detail.push_str(label.as_ref());
        if !ok {
            self.detail.push_str(" [x]");
        }
        self.pass &= ok;
    }
}

struct Model {
    name: &'static str,
    config: ModelConfig,
    table: SpectrumTable,
}

fn hopf(c: &[f64]) -> ModelConfig {
    ModelConfig::Hopf { d: c.len(), c: c.to_vec() }
}

fn models() -> Result<Vec<Model>> {
    let cutoff = [WindowSpec::gaussian(SIGMA_T, 2.0 * PI), WindowSpec::gaussian(PROBE_SIGMA, 5.0)]
        .iter()
        .map(|w| w.lambda_cutoff())
        .fold(0.0, f64::max);
    let top = 2000.0 + cutoff + 1.0;
    let list = [
        ("oscillator", ModelConfig::Oscillator { d: 2 }),
        ("sqrt", ModelConfig::Sqrt { d: 2, a: 0.5 }),
        ("degenerate", hopf(&[0.5, 0.5])),
        ("morse-bott", hopf(&[0.3, 0.7])),
    ];
    list.into_iter()
        .map(|(name, config)| Ok(Model { name, table: model_spectrum(&config, top)?, config }))
        .collect()
}

fn model<'a>(ms: &'a [Model], name: &str) -> &'a Model {
    ms.iter().find(|m| m.name == name).expect("known model")
}

// Pascal's rule for the first `cols` columns, independent of the library's binomial.
fn pascal(rows: usize, cols: usize) -> Vec<Vec<u64>> {
    let mut t = vec![vec![0u64; cols]; rows + 1];
    t[0][0] = 1;
    for n in 1..=rows {
        t[n][0] = 1;
        for k in 1..cols {
            t[n][k] = t[n - 1][k - 1] + t[n - 1][k];
        }
    }
    t
}

fn max_diff(a: &nalgebra::DMatrix<Complex64>, b: &nalgebra::DMatrix<Complex64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

fn oracles() -> Result<Outcome> {
    let mut o = Outcome::new();
    let table = pascal(1004, 5);
    let mut bad = 0;
    for d in 1..=5i64 {
        for j in 0..=1000i64 {
            if multiplicity(j, d)? != table[(d + j - 1) as usize][(d - 1) as usize] {
                bad += 1;
            }
        }
    }
    o.check(format!("multiplicity mismatches {bad}"), bad == 0);

    let nmax = 60;
    let mut worst: f64 = 0.0;
    for deg in 0..=4u32 {
        for a in 0..=deg {
            let m = Monomial { px: vec![a], pxi: vec![deg - a] };
            let w = weyl_matrix(&m, 1, nmax, &WeylOptions::for_polynomial(nmax, deg))?;
            worst = worst.max(max_diff(&w.matrix, &weyl_ordered_monomial(&m, nmax)?));
        }
    }
    let x = weyl_matrix(&|w: &[f64]| w[0], 1, nmax, &WeylOptions::for_polynomial(nmax, 1))?;
    worst = worst.max(max_diff(&x.matrix, &ladder_matrix(&[LadderOp::X(0)], 1, nmax)?));
    o.check(format!("weyl vs ladder {worst:.2e} <= 1e-8"), worst <= 1e-8);

    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let t = loop {
            let t: f64 = rng.gen_range(-2.0 * PI..2.0 * PI);
            if (t / PI - (t / PI).round()).abs() * PI > 0.3 {
                break t;
            }
        };
        let x: f64 = rng.gen_range(-2.0..2.0);
        let y: f64 = rng.gen_range(-2.0..2.0);
        worst = worst.max((mehler_kernel(t, &[x], &[y])? - mehler_eigensum(t, x, y)).norm());
    }
    o.check(format!("mehler {worst:.2e} <= 1e-8"), worst <= 1e-8);
    Ok(o)
}

fn dichotomy(ms: &[Model]) -> Result<Outcome> {
    let mut o = Outcome::new();
    let g = grid(50.0, 2000.0, 800, Spacing::Geometric);
    let w = WindowSpec::gaussian(SIGMA_T, 2.0 * PI);
    let exponent = |name: &str| -> Result<f64> {
        Ok(singularity_exponent(&trace_transform(&model(ms, name).table, 1, &w, &g)?)?.exponent)
    };
    let deg = exponent("degenerate")?;
    let mb = exponent("morse-bott")?;
    o.check(format!("degenerate {deg:.3} in [0.85, 1.15]"), (0.85..=1.15).contains(&deg));
    o.check(format!("morse-bott {mb:.3} in [0.35, 0.65]"), (0.35..=0.65).contains(&mb));
    o.check(format!("gap {:.3} >= 0.25", deg - mb), deg - mb >= 0.25);
    Ok(o)
}

fn weyl_law(ms: &[Model]) -> Result<Outcome> {
    let mut o = Outcome::new();
    let g = grid(100.0, 2000.0, 1500, Spacing::Geometric);
    let rho = WindowSpec::mollifier();
    let h = model(ms, "morse-bott");
    let check = weyl_two_term_check(&h.table, &h.config.symbol(), &g, &rho)?;
    let e = check.remainder_fit.exponent;
    o.check(format!("hopf remainder {e:.3} < 0.9"), e < 0.9);
    let rel = check.coefficient_relative_error.unwrap_or(f64::INFINITY);
    o.check(format!("coefficient rel err {rel:.2e} <= 0.02"), rel <= 0.02);
    let c = model(ms, "oscillator");
    let e = weyl_two_term_check(&c.table, &c.config.symbol(), &g, &rho)?.remainder_fit.exponent;
    o.check(format!("control {e:.3} in [0.9, 1.1]"), (0.9..=1.1).contains(&e));
    Ok(o)
}

fn poisson(ms: &[Model]) -> Result<Outcome> {
    let mut o = Outcome::new();
    let g = grid(100.0, 1000.0, 400, Spacing::Geometric);
    let reference = WindowSpec::gaussian(SIGMA_T, 0.0);
    for name in ["sqrt", "degenerate", "morse-bott"] {
        for t in [3.0, 5.0] {
            let r = poisson_ratio(&model(ms, name).table, &WindowSpec::gaussian(PROBE_SIGMA, t), &reference, &g)?;
            o.check(format!("{name} t={t} {r:.1e}"), r <= 1e-3);
        }
    }
    Ok(o)
}

fn stationary_phase() -> Result<Outcome> {
    let mut o = Outcome::new();
    let g = grid(25.0, 400.0, 61, Spacing::Sqrt);
    for d in [1, 2] {
        let rep = stationary_phase_oracle(&ModelPhase::new(1, d, None)?, None, &g, &StatPhaseOptions::default())?;
        let want = d as f64 - 1.0;
        let e = rep.fit.exponent;
        o.check(format!("control d={d} {e:.3} vs {want}"), (e - want).abs() <= 0.15);
    }
    let mp = ModelPhase::new(1, 2, Some(hopf_pullback(&[-0.35, 0.35])))?;
    let opts = StatPhaseOptions { fit_from: Some(49.0), ..Default::default() };
    let e = stationary_phase_oracle(&mp, None, &g, &opts)?.fit.exponent;
    o.check(format!("morse-bott {e:.3} vs 0.5"), (e - 0.5).abs() <= 0.15);
    Ok(o)
}

fn shift() -> Result<Outcome> {
    let mut o = Outcome::new();
    for (c, carrier) in [(vec![0.2], vec![12.0]), (vec![0.1, 0.25], vec![12.0, 0.0])] {
        let rep = wavepacket_shift(&c, &[1, 2, 3], &carrier, 1.0)?;
        let worst = rep.measurements.iter().map(|m| m.relative_deviation).fold(0.0, f64::max);
        let d = c.len();
        o.check(format!("d={d} deviation {worst:.3} <= 0.1"), worst <= 0.1);
        let lin = rep.linearity_deviation;
        o.check(format!("d={d} linearity {lin:.3} <= 0.05"), lin <= 0.05);
    }
    Ok(o)
}

fn classifier() -> Result<Outcome> {
    let mut o = Outcome::new();
    for c in [vec![0.3, 0.7], vec![0.2, 0.45, 0.7]] {
        let d = c.len();
        let r = classify_morse_bott(&hopf_pullback(&c), d, 256, 7)?;
        o.check(format!("d={d} k={}", r.k_min), r.is_morse_bott && r.k_min == 2 * d - 2);
    }
    let r = classify_morse_bott(&hopf_pullback(&[0.5, 0.5]), 2, 256, 7)?;
    o.check(format!("equal c flat={}", r.flat_set_detected), r.flat_set_detected);
    Ok(o)
}

fn tauberian(ms: &[Model]) -> Result<Outcome> {
    let mut o = Outcome::new();
    let g = grid(100.0, 2000.0, 1500, Spacing::Geometric);
    for m in ms {
        let trend = gap_trend(&tauberian_gap(&m.table, 2, &WindowSpec::mollifier(), &g)?)?;
        o.check(format!("{} bounded={}", m.name, trend.bounded), trend.bounded);
        if m.name == "morse-bott" {
            let r = trend.last_quartile_mean / trend.first_quartile_mean;
            o.check(format!("decaying ratio {r:.3}"), trend.decaying);
        }
    }
    Ok(o)
}

fn report(n: usize, title: &str, start: Instant, r: Result<Outcome>) -> bool {
    let secs = start.elapsed().as_secs_f64();
    let (pass, detail) = match r {
        Ok(o) => (o.pass, o.detail),
        Err(e) => (false, format!("error: {e}")),
    };
    println!("{} {n} {title} ({secs:.1}s): {detail}", if pass { "PASS" } else { "FAIL" });
    pass
}

fn main() {
    let mut all = true;
    all &= report(1, "exact oracles", Instant::now(), oracles());

    let t = Instant::now();
    let ms = match models() {
        Ok(ms) => ms,
        Err(e) => {
            println!("FAIL model spectra: {e}");
            std::process::exit(1);
        }
    };
    println!("model spectra built in {:.1}s", t.elapsed().as_secs_f64());

    all &= report(2, "trace singularity dichotomy", Instant::now(), dichotomy(&ms));
    all &= report(3, "Weyl two-term law", Instant::now(), weyl_law(&ms));
    all &= report(4, "Poisson relation", Instant::now(), poisson(&ms));
    all &= report(5, "stationary-phase oracle", Instant::now(), stationary_phase());
    all &= report(6, "wavefront shift", Instant::now(), shift());
    all &= report(7, "Morse-Bott classifier", Instant::now(), classifier());
    all &= report(8, "Tauberian consistency", Instant::now(), tauberian(&ms));
    if !all {
        std::process::exit(1);
    }
}
