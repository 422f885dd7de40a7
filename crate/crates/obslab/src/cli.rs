//! Batch experiment runner: config parsing, dispatch to the experiment
//! modules, and reproducible CSV/JSON reports.
//!
//! Exit codes: 0 clean run, 1 inequality violations, 2 config error,
//! 3 numerical failure. Reports embed the fully resolved configuration and
//! seed; all randomness is derived from `(seed, stream)` so output is
//! byte-identical across re-runs and thread counts.

use crate::bandlimited::{
    bernstein_check, classify_cells, sample_bandlimited, uncertainty_experiment,
};
use crate::capacity::{content_capacity_check, slicing_experiment};
use crate::error::{LabError, Result};
use crate::fractal::{
    build_cantor, content_upper, frostman_lower_default, CantorLevel, CantorSpec, LengthRule,
};
use crate::gauge::Gauge;
use crate::heat1d::{
    build_counterexample, counterexample_ratio, einf_content_report, observability_ratio,
    HeatCoeffs,
};
use crate::lemniscate::{
    cartan_cover_with, cartan_radii, content_of_cover, sample_roots, Polynomial, RootEnsemble,
};
use crate::lognum::LogNum;
use crate::lr::{convergence_test, cost_constant, recurrence_crossover, schedule, t0_threshold};
use crate::remez::remez_experiment;
use crate::rng::trial_rng;
use crate::spectral1d::{
    nazarov_turan_check, sample_spectral, spectral_cost_experiment, ExpPolynomial,
};
use clap::{Parser, Subcommand};
use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

// ---------------------------------------------------------------------------
// Argument / config plumbing
// ---------------------------------------------------------------------------

#[derive(Parser, Debug)]
#[command(
    name = "obslab",
    about = "Numerical laboratory for log-gauge contents and observability",
    version
)]
struct Cli {
    #[command(subcommand)]
    experiment: Experiment,
}

#[derive(clap::Args, Debug)]
struct Common {
    /// JSON config file: {"seed": u64, "output": prefix, "parameters": {...}}.
    #[arg(long)]
    config: Option<String>,
    /// Overrides the seed from the config file.
    #[arg(long)]
    seed: Option<u64>,
    /// Output path prefix; writes <prefix>.csv and <prefix>.json.
    #[arg(long)]
    out: Option<String>,
}

#[derive(Subcommand, Debug)]
enum Experiment {
    /// Cantor content identity and Frostman lower bound.
    Content(Common),
    /// Cartan covers of random lemniscates.
    Cartan(Common),
    /// Remez-type disc/observation sup ratios.
    Remez(Common),
    /// Observability cost over spectral subspaces.
    SpectralCost(Common),
    /// Exponential-polynomial sup comparison.
    NazarovTuran(Common),
    /// Bernstein constants and good-cell mass for bandlimited samples.
    Bernstein(Common),
    /// Amalgam-norm uncertainty bound.
    Uncertainty(Common),
    /// Heat observability ratios for random data.
    HeatRatio(Common),
    /// Non-observable set: level invariants, ratio bounds, cover sums.
    Counterexample(Common),
    /// Relaxation/observation time schedule and cost constant.
    LrSchedule(Common),
    /// Content vs capacity transference on Cantor sets.
    Capacity(Common),
    /// Axis slicing of product Cantor sets.
    Slicing(Common),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    #[serde(default)]
    seed: Option<u64>,
    #[serde(default)]
    output: Option<String>,
    #[serde(default)]
    parameters: Option<serde_json::Value>,
}

/// Resolved (seed, output prefix, parameter struct).
fn resolve<P: for<'de> Deserialize<'de> + Default>(
    common: &Common,
    default_out: &str,
) -> Result<(u64, String, P)> {
    let file: FileConfig = match &common.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| LabError::Config(format!("cannot read {path}: {e}")))?;
            serde_json::from_str(&text)
                .map_err(|e| LabError::Config(format!("malformed config {path}: {e}")))?
        }
        None => FileConfig {
            seed: None,
            output: None,
            parameters: None,
        },
    };
    let params: P = match file.parameters {
        Some(v) => serde_json::from_value(v)
            .map_err(|e| LabError::Config(format!("bad parameters: {e}")))?,
        None => P::default(),
    };
    let seed = common.seed.or(file.seed).unwrap_or(0);
    let out = common
        .out
        .clone()
        .or(file.output)
        .unwrap_or_else(|| default_out.to_string());
    Ok((seed, out, params))
}

/// Full resolved config + summary, serialized with stable (declaration)
/// key order.
#[derive(Serialize)]
struct Report<'a, P: Serialize, S: Serialize> {
    experiment: &'a str,
    seed: u64,
    output: &'a str,
    parameters: &'a P,
    violations: usize,
    summary: S,
}

/// A LogNum rendered for reports: decimal where representable plus the
/// always-representable (sign, ln magnitude) pair.
#[derive(Serialize)]
struct LnVal {
    value: f64,
    sign: i8,
    ln_mag: f64,
}

impl From<LogNum> for LnVal {
    fn from(x: LogNum) -> Self {
        LnVal {
            value: x.to_f64(),
            sign: x.sign,
            ln_mag: x.ln_mag,
        }
    }
}

// ---------------------------------------------------------------------------
// CSV (RFC 4180: header row, CRLF records, '.' decimal separator)
// ---------------------------------------------------------------------------

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn csv_text(rows: &[Vec<String>]) -> String {
    let mut out = String::new();
    for r in rows {
        let fields: Vec<String> = r.iter().map(|f| csv_field(f)).collect();
        out.push_str(&fields.join(","));
        out.push_str("\r\n");
    }
    out
}

fn write_reports<P: Serialize, S: Serialize>(
    out: &str,
    rows: &[Vec<String>],
    report: &Report<P, S>,
) -> Result<()> {
    if let Some(dir) = std::path::Path::new(out).parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir)
                .map_err(|e| LabError::Config(format!("cannot create {}: {e}", dir.display())))?;
        }
    }
    std::fs::write(format!("{out}.csv"), csv_text(rows))
        .map_err(|e| LabError::Config(format!("cannot write {out}.csv: {e}")))?;
    let mut json = serde_json::to_string_pretty(report)
        .map_err(|e| LabError::Config(format!("serialization: {e}")))?;
    json.push('\n');
    std::fs::write(format!("{out}.json"), json)
        .map_err(|e| LabError::Config(format!("cannot write {out}.json: {e}")))?;
    Ok(())
}

macro_rules! srow {
    ($($x:expr),* $(,)?) => { vec![$($x.to_string()),*] };
}

// ---------------------------------------------------------------------------
// Shared constructions
// ---------------------------------------------------------------------------

/// Depth-k leaf midpoints of a Cantor level as plain f64 coordinates (leaves
/// below f64 resolution collapse onto their parent positions, which is fine
/// for sup sampling).
fn leaf_midpoints(level: &CantorLevel) -> Vec<f64> {
    let k = level.depth;
    (0..1u64 << k)
        .map(|path| {
            let mid = level.node_left(k, path).add(&level.scaled_len(k, 0.5));
            level.base.0 + level.eval_pos(&mid).to_f64()
        })
        .collect()
}

fn gauge_driven_cantor(alpha: f64, depth: usize) -> Result<Vec<CantorLevel>> {
    let spec = CantorSpec::unit(LengthRule::GaugeDriven(Gauge::h_alpha(alpha)));
    (1..=depth).map(|d| build_cantor(&spec, d)).collect()
}

/// Per-instance seed derived from the run seed and a stream index by integer
/// mixing (used where a callee takes a bare seed rather than a stream).
fn derived_seed(seed: u64, stream: u64) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(stream)
}

// ---------------------------------------------------------------------------
// content
// ---------------------------------------------------------------------------

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct ContentParams {
    depth: usize,
    alpha: f64,
}

impl Default for ContentParams {
    fn default() -> Self {
        ContentParams {
            depth: 8,
            alpha: 0.0,
        }
    }
}

#[derive(Serialize)]
struct ContentSummary {
    upper: LnVal,
    lower: LnVal,
    a2_hat: LnVal,
    balls_swept: usize,
}

fn run_content(common: &Common) -> Result<usize> {
    let (seed, out, p): (u64, String, ContentParams) = resolve(common, "content")?;
    if p.depth == 0 || p.depth > 24 {
        return Err(LabError::Config("depth must be in 1..=24".into()));
    }
    let g = Gauge::h_alpha(p.alpha);
    let levels = gauge_driven_cantor(p.alpha, p.depth)?;
    let mut rows = vec![srow!["depth", "ln_upper", "upper"]];
    let mut violations = 0usize;
    let mut upper = LogNum::ZERO;
    for lv in &levels {
        upper = content_upper(lv, &g)?;
        if upper.ln_value().abs() > 1e-10 {
            violations += 1;
        }
        rows.push(srow![lv.depth, upper.ln_value(), upper.to_f64()]);
    }
    let cert = frostman_lower_default(levels.last().unwrap(), &g)?;
    let report = Report {
        experiment: "content",
        seed,
        output: &out,
        parameters: &p,
        violations,
        summary: ContentSummary {
            upper: upper.into(),
            lower: cert.lower_bound.into(),
            a2_hat: cert.a2_hat.into(),
            balls_swept: cert.balls_swept,
        },
    };
    write_reports(&out, &rows, &report)?;
    Ok(violations)
}

// ---------------------------------------------------------------------------
// cartan
// ---------------------------------------------------------------------------

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct CartanParams {
    instances: usize,
    n_max: usize,
    samples: usize,
    alpha: f64,
    ln_h: f64,
}

impl Default for CartanParams {
    fn default() -> Self {
        CartanParams {
            instances: 200,
            n_max: 32,
            samples: 100_000,
            alpha: 0.0,
            ln_h: -9.0,
        }
    }
}

#[derive(Serialize)]
struct CartanSummary {
    instances: usize,
    max_content_rel_err: f64,
    uncovered_total: usize,
}

struct CartanRow {
    instance: usize,
    n: usize,
    ensemble: &'static str,
    mult_sum: usize,
    content_ln: f64,
    target_ln: f64,
    uncovered: usize,
}

fn run_cartan(common: &Common) -> Result<usize> {
    let (seed, out, p): (u64, String, CartanParams) = resolve(common, "cartan")?;
    if p.instances == 0 || p.n_max == 0 {
        return Err(LabError::Config("need instances >= 1 and n_max >= 1".into()));
    }
    let g = Gauge::h_alpha(p.alpha);
    let h = LogNum::from_ln(p.ln_h);
    let target_ln = g.eval(h)?.ln_value();
    let ensembles = [
        RootEnsemble::UniformDisc,
        RootEnsemble::Coincident,
        RootEnsemble::UnitCircle,
    ];
    let names = ["uniform_disc", "coincident", "unit_circle"];
    let results: Vec<Result<CartanRow>> = (0..p.instances)
        .into_par_iter()
        .map(|i| {
            let mut rng = trial_rng(seed, i as u64);
            let n = rng.gen_range(1..=p.n_max);
            let poly = Polynomial::monic(sample_roots(ensembles[i % 3], n, &mut rng));
            let radii = cartan_radii(&g, h, n)?;
            let (mult_sum, content_ln, uncovered) =
                match cartan_cover_with(&poly, &radii, p.samples, derived_seed(seed, i as u64)) {
                    Ok(cover) => {
                        let c = content_of_cover(&cover, &g)?;
                        (cover.multiplicity_sum(), c.ln_value(), 0)
                    }
                    Err(LabError::CoverageFailure(k)) => (0, f64::NAN, k),
                    Err(e) => return Err(e),
                };
            Ok(CartanRow {
                instance: i,
                n,
                ensemble: names[i % 3],
                mult_sum,
                content_ln,
                target_ln,
                uncovered,
            })
        })
        .collect();
    let mut rows = vec![srow![
        "instance",
        "n",
        "ensemble",
        "multiplicity_sum",
        "content_ln",
        "target_ln",
        "uncovered"
    ]];
    let mut violations = 0usize;
    let mut max_rel = 0.0f64;
    let mut uncovered_total = 0usize;
    for r in results {
        let r = r?;
        if r.uncovered > 0 {
            violations += 1;
            uncovered_total += r.uncovered;
        } else {
            if r.mult_sum != r.n {
                violations += 1;
            }
            let rel = (r.content_ln - r.target_ln).abs() / r.target_ln.abs().max(1.0);
            max_rel = max_rel.max(rel);
            if rel > 1e-10 {
                violations += 1;
            }
        }
        rows.push(srow![
            r.instance,
            r.n,
            r.ensemble,
            r.mult_sum,
            r.content_ln,
            r.target_ln,
            r.uncovered
        ]);
    }
    let report = Report {
        experiment: "cartan",
        seed,
        output: &out,
        parameters: &p,
        violations,
        summary: CartanSummary {
            instances: p.instances,
            max_content_rel_err: max_rel,
            uncovered_total,
        },
    };
    write_reports(&out, &rows, &report)?;
    Ok(violations)
}

// ---------------------------------------------------------------------------
// remez
// ---------------------------------------------------------------------------

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct RemezParams {
    n: usize,
    alpha: f64,
    depth: usize,
    trials: usize,
}

impl Default for RemezParams {
    fn default() -> Self {
        RemezParams {
            n: 16,
            alpha: 0.0,
            depth: 5,
            trials: 200,
        }
    }
}

#[derive(Serialize)]
struct RemezSummary {
    fitted_c: f64,
    max_ratio_ln: f64,
    e_points: usize,
    content: f64,
}

fn run_remez(common: &Common) -> Result<usize> {
    let (seed, out, p): (u64, String, RemezParams) = resolve(common, "remez")?;
    if p.depth == 0 || p.depth > 16 {
        return Err(LabError::Config("depth must be in 1..=16".into()));
    }
    let levels = gauge_driven_cantor(p.alpha, p.depth)?;
    let level = levels.last().unwrap();
    let e_points = leaf_midpoints(level);
    let content = content_upper(level, &Gauge::h_alpha(p.alpha))?.to_f64();
    let outcome = remez_experiment(p.n, &e_points, p.alpha, content, p.trials, seed)?;
    let mut rows = vec![srow!["trial", "n", "ratio_ln", "required_c"]];
    for t in &outcome.trials {
        rows.push(srow![t.trial, t.n, t.ratio_ln, t.required_c]);
    }
    let report = Report {
        experiment: "remez",
        seed,
        output: &out,
        parameters: &p,
        violations: outcome.violations,
        summary: RemezSummary {
            fitted_c: outcome.fitted_c,
            max_ratio_ln: outcome.max_ratio_ln,
            e_points: e_points.len(),
            content,
        },
    };
    write_reports(&out, &rows, &report)?;
    Ok(outcome.violations)
}

// ---------------------------------------------------------------------------
// spectral-cost
// ---------------------------------------------------------------------------

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct SpectralCostParams {
    l: f64,
    alpha: f64,
    depth: usize,
    trials: usize,
    lambda_min: f64,
    lambda_max: f64,
    lambda_points: usize,
}

impl Default for SpectralCostParams {
    fn default() -> Self {
        SpectralCostParams {
            l: 1.0,
            alpha: 0.0,
            depth: 8,
            trials: 100,
            lambda_min: 100.0,
            lambda_max: 10_000.0,
            lambda_points: 5,
        }
    }
}

#[derive(Serialize)]
struct SpectralCostSummary {
    fitted_c: f64,
    e_points: usize,
    content: f64,
    monotone: bool,
}

fn run_spectral_cost(common: &Common) -> Result<usize> {
    let (seed, out, p): (u64, String, SpectralCostParams) = resolve(common, "spectral-cost")?;
    if p.lambda_points < 2 || !(p.lambda_max > p.lambda_min) || p.lambda_min <= 0.0 {
        return Err(LabError::Config("need lambda_points >= 2 and 0 < lambda_min < lambda_max".into()));
    }
    if p.depth == 0 || p.depth > 16 {
        return Err(LabError::Config("depth must be in 1..=16".into()));
    }
    let grid: Vec<f64> = (0..p.lambda_points)
        .map(|i| {
            let f = i as f64 / (p.lambda_points - 1) as f64;
            (p.lambda_min.ln() + f * (p.lambda_max / p.lambda_min).ln()).exp()
        })
        .collect();
    let levels = gauge_driven_cantor(p.alpha, p.depth)?;
    let level = levels.last().unwrap();
    let e_points = leaf_midpoints(level);
    let content = content_upper(level, &Gauge::h_alpha(p.alpha))?.to_f64();
    let curve = spectral_cost_experiment(p.l, &e_points, p.alpha, content, &grid, p.trials, seed)?;
    let mut rows = vec![srow!["lambda", "k", "ln_cost", "ln_bound_at_fit"]];
    for pt in &curve.points {
        rows.push(srow![pt.lambda, pt.k, pt.ln_cost, pt.ln_bound_at_fit]);
    }
    let monotone = curve
        .points
        .windows(2)
        .all(|w| w[1].ln_cost >= w[0].ln_cost - 1e-12);
    let violations = curve.violations + usize::from(!monotone);
    let report = Report {
        experiment: "spectral-cost",
        seed,
        output: &out,
        parameters: &p,
        violations,
        summary: SpectralCostSummary {
            fitted_c: curve.fitted_c,
            e_points: e_points.len(),
            content,
            monotone,
        },
    };
    write_reports(&out, &rows, &report)?;
    Ok(violations)
}

// ---------------------------------------------------------------------------
// nazarov-turan
// ---------------------------------------------------------------------------

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct NazarovTuranParams {
    order: usize,
    trials: usize,
    grid: usize,
    e_intervals: Vec<(f64, f64)>,
}

impl Default for NazarovTuranParams {
    fn default() -> Self {
        NazarovTuranParams {
            order: 6,
            trials: 50,
            grid: 2048,
            e_intervals: vec![(0.0, 0.1), (0.45, 0.55), (0.9, 1.0)],
        }
    }
}

#[derive(Serialize)]
struct NazarovTuranSummary {
    fitted_c: f64,
    max_ratio: f64,
}

fn run_nazarov_turan(common: &Common) -> Result<usize> {
    let (seed, out, p): (u64, String, NazarovTuranParams) = resolve(common, "nazarov-turan")?;
    if p.order == 0 || p.trials == 0 {
        return Err(LabError::Config("need order >= 1 and trials >= 1".into()));
    }
    let mut rows = vec![srow!["trial", "ratio", "required_c"]];
    let mut fitted_c = 0.0f64;
    let mut max_ratio = 0.0f64;
    let mut trials = Vec::with_capacity(p.trials);
    for t in 0..p.trials {
        let mut rng = trial_rng(seed, t as u64);
        let terms: Vec<(Complex64, Complex64)> = (0..p.order)
            .map(|_| {
                (
                    Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)),
                    Complex64::new(rng.gen_range(-10.0..10.0), rng.gen_range(-20.0..20.0)),
                )
            })
            .collect();
        let poly = ExpPolynomial { terms };
        let res = nazarov_turan_check(&poly, (0.0, 1.0), &p.e_intervals, p.grid)?;
        fitted_c = fitted_c.max(res.required_c);
        max_ratio = max_ratio.max(res.ratio);
        trials.push((t, res));
    }
    let mut violations = 0usize;
    for (t, res) in &trials {
        if res.required_c > fitted_c + 1e-12 {
            violations += 1;
        }
        rows.push(srow![t, res.ratio, res.required_c]);
    }
    let report = Report {
        experiment: "nazarov-turan",
        seed,
        output: &out,
        parameters: &p,
        violations,
        summary: NazarovTuranSummary {
            fitted_c,
            max_ratio,
        },
    };
    write_reports(&out, &rows, &report)?;
    Ok(violations)
}

// ---------------------------------------------------------------------------
// bernstein
// ---------------------------------------------------------------------------

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct BernsteinParams {
    w: usize,
    n: f64,
    m_max: u32,
    trials: usize,
    /// Good-cell threshold multiplier A in (A N)^m.
    a_cell: f64,
}

impl Default for BernsteinParams {
    fn default() -> Self {
        BernsteinParams {
            w: 64,
            n: 8.0,
            m_max: 8,
            trials: 100,
            a_cell: 2.0,
        }
    }
}

#[derive(Serialize)]
struct BernsteinSummary {
    fitted_c: f64,
    fitted_c_half: f64,
    stable: bool,
    per_m: Vec<f64>,
    max_bad_mass_fraction: f64,
}

fn run_bernstein(common: &Common) -> Result<usize> {
    let (seed, out, p): (u64, String, BernsteinParams) = resolve(common, "bernstein")?;
    if p.trials < 2 || p.m_max == 0 {
        return Err(LabError::Config("need trials >= 2 and m_max >= 1".into()));
    }
    let fit = bernstein_check(p.w, p.n, p.m_max, p.trials, seed)?;
    let fit_half = bernstein_check(p.w, p.n, p.m_max, p.trials / 2, seed)?;
    let stable = (fit.fitted_c - fit_half.fitted_c).abs() <= 0.1 * fit.fitted_c;
    // Good-cell mass check per trial on the same sample streams.
    let mut rows = vec![srow!["trial", "bad_mass_fraction", "good_cells", "bad_cells"]];
    let mut violations = usize::from(!stable);
    let mut max_bad = 0.0f64;
    for t in 0..p.trials {
        let mut rng = trial_rng(seed, t as u64);
        let u = sample_bandlimited(p.w, p.n, &mut rng)?;
        match classify_cells(&u, p.a_cell) {
            Ok(cls) => {
                max_bad = max_bad.max(cls.bad_mass_fraction);
                rows.push(srow![
                    t,
                    cls.bad_mass_fraction,
                    cls.good.len(),
                    cls.bad.len()
                ]);
            }
            Err(LabError::MassViolation { frac }) => {
                violations += 1;
                max_bad = max_bad.max(frac);
                rows.push(srow![t, frac, 0, p.w]);
            }
            Err(e) => return Err(e),
        }
    }
    let report = Report {
        experiment: "bernstein",
        seed,
        output: &out,
        parameters: &p,
        violations,
        summary: BernsteinSummary {
            fitted_c: fit.fitted_c,
            fitted_c_half: fit_half.fitted_c,
            stable,
            per_m: fit.per_m,
            max_bad_mass_fraction: max_bad,
        },
    };
    write_reports(&out, &rows, &report)?;
    Ok(violations)
}

// ---------------------------------------------------------------------------
// uncertainty
// ---------------------------------------------------------------------------

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct UncertaintyParams {
    w: usize,
    e_offsets: Vec<f64>,
    alpha: f64,
    gamma: f64,
    l_thick: f64,
    n_grid: Vec<f64>,
    trials: usize,
}

impl Default for UncertaintyParams {
    fn default() -> Self {
        UncertaintyParams {
            w: 64,
            e_offsets: vec![0.125, 0.5, 0.875],
            alpha: 0.0,
            gamma: 0.3,
            l_thick: 1.0,
            n_grid: vec![4.0, 8.0, 16.0, 32.0],
            trials: 10,
        }
    }
}

#[derive(Serialize)]
struct UncertaintySummary {
    fitted_c: f64,
}

fn run_uncertainty(common: &Common) -> Result<usize> {
    let (seed, out, p): (u64, String, UncertaintyParams) = resolve(common, "uncertainty")?;
    let curve = uncertainty_experiment(
        p.w,
        &p.e_offsets,
        p.alpha,
        p.gamma,
        p.l_thick,
        &p.n_grid,
        p.trials,
        seed,
    )?;
    let mut rows = vec![srow!["n", "ln_ratio", "ln_bound", "pass"]];
    let mut violations = 0usize;
    for r in &curve.rows {
        if !r.pass {
            violations += 1;
        }
        rows.push(srow![r.n, r.ln_ratio, r.ln_bound, r.pass]);
    }
    let report = Report {
        experiment: "uncertainty",
        seed,
        output: &out,
        parameters: &p,
        violations,
        summary: UncertaintySummary {
            fitted_c: curve.fitted_c,
        },
    };
    write_reports(&out, &rows, &report)?;
    Ok(violations)
}

// ---------------------------------------------------------------------------
// heat-ratio
// ---------------------------------------------------------------------------

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct HeatRatioParams {
    l: f64,
    lambda: f64,
    t_final: f64,
    trials: usize,
    e_grid: usize,
    init_nodes: usize,
}

impl Default for HeatRatioParams {
    fn default() -> Self {
        HeatRatioParams {
            l: 1.0,
            lambda: 400.0,
            t_final: 0.1,
            trials: 20,
            e_grid: 200,
            init_nodes: 16,
        }
    }
}

#[derive(Serialize)]
struct HeatRatioSummary {
    min_ratio_ln: f64,
    max_ratio_ln: f64,
}

fn run_heat_ratio(common: &Common) -> Result<usize> {
    let (seed, out, p): (u64, String, HeatRatioParams) = resolve(common, "heat-ratio")?;
    if p.trials == 0 || p.e_grid == 0 {
        return Err(LabError::Config("need trials >= 1 and e_grid >= 1".into()));
    }
    let e_points: Vec<f64> = (0..=p.e_grid)
        .map(|i| p.l * i as f64 / p.e_grid as f64)
        .collect();
    let mut rows = vec![srow!["trial", "ratio_ln", "ratio"]];
    let mut min_ln = f64::INFINITY;
    let mut max_ln = f64::NEG_INFINITY;
    for t in 0..p.trials {
        let mut rng = trial_rng(seed, t as u64);
        let v = sample_spectral(p.l, p.lambda, &mut rng)?;
        let u = HeatCoeffs::from_spectral(&v);
        let ratio = observability_ratio(&u, p.t_final, &e_points, p.init_nodes)?;
        let rln = ratio.ln_value();
        min_ln = min_ln.min(rln);
        max_ln = max_ln.max(rln);
        rows.push(srow![t, rln, ratio.to_f64()]);
    }
    let report = Report {
        experiment: "heat-ratio",
        seed,
        output: &out,
        parameters: &p,
        violations: 0,
        summary: HeatRatioSummary {
            min_ratio_ln: min_ln,
            max_ratio_ln: max_ln,
        },
    };
    write_reports(&out, &rows, &report)?;
    Ok(0)
}

// ---------------------------------------------------------------------------
// counterexample
// ---------------------------------------------------------------------------

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct CounterexampleParams {
    eps: f64,
    levels: usize,
    t: f64,
    alpha: f64,
}

impl Default for CounterexampleParams {
    fn default() -> Self {
        CounterexampleParams {
            eps: 1.0,
            levels: 4,
            t: 1.0,
            alpha: 1.0,
        }
    }
}

#[derive(Serialize)]
struct CounterexampleSummary {
    eps1: f64,
    eps2: f64,
    ln_q1: f64,
    ratios_strictly_decreasing: bool,
}

fn run_counterexample(common: &Common) -> Result<usize> {
    let (seed, out, p): (u64, String, CounterexampleParams) = resolve(common, "counterexample")?;
    let spec = build_counterexample(p.eps, p.levels)?;
    let mut violations = 0usize;
    if spec.check_invariants().is_err() {
        violations += 1;
    }
    let mut rows = vec![srow![
        "k",
        "ln_ln_q",
        "ratio_ln",
        "ratio_representable",
        "f0_sum_ln_sign",
        "f0_sum_ln_mag",
        "f_eps_sum_ln_sign",
        "f_eps_sum_ln_mag",
        "h_alpha_sum_ln_sign",
        "h_alpha_sum_ln_mag"
    ]];
    let mut ratios = Vec::new();
    for k in 1..=p.levels {
        let (ratio_ln, representable) = match counterexample_ratio(&spec, k, p.t) {
            Ok(r) => {
                ratios.push((k, r));
                (r.to_f64(), true)
            }
            Err(LabError::Param(_)) => (f64::NAN, false),
            Err(e) => return Err(e),
        };
        let rep = einf_content_report(&spec, k, p.alpha)?;
        // The h_alpha cover sum must not exceed the f_0 cover sum (the extra
        // double-log factor only shrinks the gauge).
        if rep.ln_h_alpha_sum_upper > rep.ln_f0_sum_upper {
            violations += 1;
        }
        rows.push(srow![
            k,
            spec.ln_q[k - 1].ln_mag,
            ratio_ln,
            representable,
            rep.ln_f0_sum_upper.sign,
            rep.ln_f0_sum_upper.ln_mag,
            rep.ln_f_eps_sum_lower.sign,
            rep.ln_f_eps_sum_lower.ln_mag,
            rep.ln_h_alpha_sum_upper.sign,
            rep.ln_h_alpha_sum_upper.ln_mag
        ]);
    }
    let decreasing = ratios.windows(2).all(|w| w[1].1 < w[0].1);
    if !decreasing {
        violations += 1;
    }
    let report = Report {
        experiment: "counterexample",
        seed,
        output: &out,
        parameters: &p,
        violations,
        summary: CounterexampleSummary {
            eps1: spec.eps1,
            eps2: spec.eps2,
            ln_q1: spec.ln_q[0].to_f64(),
            ratios_strictly_decreasing: decreasing,
        },
    };
    write_reports(&out, &rows, &report)?;
    Ok(violations)
}

// ---------------------------------------------------------------------------
// lr-schedule
// ---------------------------------------------------------------------------

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct LrScheduleParams {
    lambda1: f64,
    alpha: f64,
    c: f64,
    l: f64,
    n_max: usize,
    t: f64,
    a0: f64,
}

impl Default for LrScheduleParams {
    fn default() -> Self {
        LrScheduleParams {
            lambda1: 1e6,
            alpha: 2.0,
            c: 0.25,
            l: 1.0,
            n_max: 60,
            t: 1.0,
            a0: 10.0,
        }
    }
}

#[derive(Serialize)]
struct LrScheduleSummary {
    converges: bool,
    t1_bound: Option<f64>,
    t0: f64,
    cost_n: u64,
    cost_t_n: f64,
    ln_c_obs: LnVal,
    crossover_k: Option<usize>,
}

fn run_lr_schedule(common: &Common) -> Result<usize> {
    let (seed, out, p): (u64, String, LrScheduleParams) = resolve(common, "lr-schedule")?;
    let sched = schedule(p.lambda1, p.alpha, p.c, p.l, p.n_max)?;
    let conv = convergence_test(p.alpha, p.c, p.l, p.lambda1)?;
    let t0 = t0_threshold(p.alpha, p.c, p.lambda1)?;
    let cost = cost_constant(p.t, p.alpha, p.c, p.l, p.lambda1)?;
    let crossover = recurrence_crossover(&sched, p.a0);
    let mut rows = vec![srow!["k", "ln_lambda", "lambda", "tau", "t_tail", "ln_f"]];
    let mut violations = 0usize;
    for r in &sched.rows {
        rows.push(srow![r.k, r.ln_lambda, r.lambda, r.tau, r.t_tail, r.ln_f]);
    }
    // Certified structure: tau and the tail bounds must decrease along the
    // ladder when the series converges.
    if conv.converges {
        for w in sched.rows.windows(2) {
            if !(w[1].tau < w[0].tau && w[1].t_tail < w[0].t_tail) {
                violations += 1;
            }
        }
    }
    let report = Report {
        experiment: "lr-schedule",
        seed,
        output: &out,
        parameters: &p,
        violations,
        summary: LrScheduleSummary {
            converges: conv.converges,
            t1_bound: conv.t1_bound,
            t0,
            cost_n: cost.n,
            cost_t_n: cost.t_n,
            ln_c_obs: cost.ln_c_obs.into(),
            crossover_k: crossover,
        },
    };
    write_reports(&out, &rows, &report)?;
    Ok(violations)
}

// ---------------------------------------------------------------------------
// capacity
// ---------------------------------------------------------------------------

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct CapacityParams {
    depth: usize,
    /// Explicit length rule ln c_k = -(lens_slope * k + lens_offset).
    lens_slope: f64,
    lens_offset: f64,
    alpha: f64,
    beta: f64,
    eps_shift: f64,
    tol: f64,
}

impl Default for CapacityParams {
    fn default() -> Self {
        CapacityParams {
            depth: 5,
            lens_slope: 3.0,
            lens_offset: 1.0,
            alpha: 2.0,
            beta: 1.5,
            eps_shift: 0.5,
            tol: 1e-6,
        }
    }
}

#[derive(Serialize)]
struct CapacitySummary {
    content_upper: LnVal,
    capacity: LnVal,
    capacity_refined: LnVal,
    refinement_slack: f64,
    transference_holds: bool,
    integrability_finite: bool,
    integrability_ratios: Vec<f64>,
}

fn run_capacity(common: &Common) -> Result<usize> {
    let (seed, out, p): (u64, String, CapacityParams) = resolve(common, "capacity")?;
    if p.depth == 0 || p.depth > 8 {
        return Err(LabError::Config("depth must be in 1..=8".into()));
    }
    let lens: Vec<f64> = (1..=p.depth)
        .map(|k| -(p.lens_slope * k as f64 + p.lens_offset))
        .collect();
    let spec = CantorSpec {
        rule: LengthRule::Explicit(lens),
        base: (0.0, (-3.0f64).exp()),
    };
    let levels: Vec<CantorLevel> = (1..=p.depth)
        .map(|d| build_cantor(&spec, d))
        .collect::<Result<_>>()?;
    let rep = content_capacity_check(&levels, p.alpha, p.beta, p.eps_shift, p.tol)?;
    let mut rows = vec![srow!["depth", "shifted_cap_over_content_ln"]];
    for (lv, ratio) in levels.iter().zip(&rep.ratio_by_depth) {
        rows.push(srow![lv.depth, ratio.ln_value()]);
    }
    let violations =
        usize::from(!rep.transference_holds) + usize::from(!rep.integrability.finite);
    let report = Report {
        experiment: "capacity",
        seed,
        output: &out,
        parameters: &p,
        violations,
        summary: CapacitySummary {
            content_upper: rep.content_upper.into(),
            capacity: rep.capacity.into(),
            capacity_refined: rep.capacity_refined.into(),
            refinement_slack: rep.refinement_slack,
            transference_holds: rep.transference_holds,
            integrability_finite: rep.integrability.finite,
            integrability_ratios: rep.integrability.window_ratios.clone(),
        },
    };
    write_reports(&out, &rows, &report)?;
    Ok(violations)
}

// ---------------------------------------------------------------------------
// slicing
// ---------------------------------------------------------------------------

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct SlicingParams {
    depth: usize,
    width: f64,
    alpha: f64,
    beta: f64,
    offsets: usize,
}

impl Default for SlicingParams {
    fn default() -> Self {
        SlicingParams {
            depth: 5,
            width: 0.02,
            alpha: 2.0,
            beta: 1.5,
            offsets: 200,
        }
    }
}

#[derive(Serialize)]
struct SlicingSummary {
    good_offset_measure: LnVal,
    empirical_hit_fraction: f64,
    slice_cap: LnVal,
    e2_capacity: LnVal,
    fitted_k: LnVal,
    fitted_c: LnVal,
}

fn run_slicing(common: &Common) -> Result<usize> {
    let (seed, out, p): (u64, String, SlicingParams) = resolve(common, "slicing")?;
    if p.depth == 0 || p.depth > 7 {
        return Err(LabError::Config("depth must be in 1..=7".into()));
    }
    // Double-exponential lengths one level in from the square-root-log
    // profile so the first level fits the narrow base interval.
    let lens: Vec<f64> = (1..=p.depth as u32)
        .map(|k| -(4f64.powi(k as i32 + 1)))
        .collect();
    let spec = CantorSpec {
        rule: LengthRule::Explicit(lens),
        base: (0.0, p.width),
    };
    let x = build_cantor(&spec, p.depth)?;
    let y = build_cantor(&spec, p.depth)?;
    let outcome = slicing_experiment(&x, &y, p.alpha, p.beta, p.offsets, seed)?;
    let rows = vec![
        srow![
            "offsets",
            "hit_fraction",
            "good_measure_ln",
            "slice_cap_ln",
            "e2_cap_ln",
            "violations"
        ],
        srow![
            outcome.offsets,
            outcome.empirical_hit_fraction,
            outcome.good_offset_measure.ln_value(),
            outcome.slice_cap.ln_value(),
            outcome.e2_capacity.ln_value(),
            outcome.violations
        ],
    ];
    let report = Report {
        experiment: "slicing",
        seed,
        output: &out,
        parameters: &p,
        violations: outcome.violations,
        summary: SlicingSummary {
            good_offset_measure: outcome.good_offset_measure.into(),
            empirical_hit_fraction: outcome.empirical_hit_fraction,
            slice_cap: outcome.slice_cap.into(),
            e2_capacity: outcome.e2_capacity.into(),
            fitted_k: outcome.fitted_k.into(),
            fitted_c: outcome.fitted_c.into(),
        },
    };
    write_reports(&out, &rows, &report)?;
    Ok(outcome.violations)
}

// ---------------------------------------------------------------------------
// Entry point
// ---------------------------------------------------------------------------

pub fn main_entry() -> i32 {
    if let Ok(threads) = std::env::var("OBSLAB_THREADS") {
        if let Ok(n) = threads.parse::<usize>() {
            let _ = rayon::ThreadPoolBuilder::new()
                .num_threads(n.max(1))
                .build_global();
        }
    }
    let cli = Cli::parse();
    let outcome = match &cli.experiment {
        Experiment::Content(c) => run_content(c),
        Experiment::Cartan(c) => run_cartan(c),
        Experiment::Remez(c) => run_remez(c),
        Experiment::SpectralCost(c) => run_spectral_cost(c),
        Experiment::NazarovTuran(c) => run_nazarov_turan(c),
        Experiment::Bernstein(c) => run_bernstein(c),
        Experiment::Uncertainty(c) => run_uncertainty(c),
        Experiment::HeatRatio(c) => run_heat_ratio(c),
        Experiment::Counterexample(c) => run_counterexample(c),
        Experiment::LrSchedule(c) => run_lr_schedule(c),
        Experiment::Capacity(c) => run_capacity(c),
        Experiment::Slicing(c) => run_slicing(c),
    };
    match outcome {
        Ok(0) => 0,
        Ok(v) => {
            eprintln!("{v} inequality violation(s)");
            1
        }
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                LabError::Config(_) | LabError::Param(_) => 2,
                LabError::BoundViolation(_)
                | LabError::CoverageFailure(_)
                | LabError::MassViolation { .. } => 1,
                _ => 3,
            }
        }
    }
}
