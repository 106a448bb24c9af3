//! The subcommands: parameters, computation and artifacts.

use std::fmt;
use std::path::{Path, PathBuf};

use anyhow::{bail, Result};
use clap::{Args, ValueEnum};
use log::info;
use petlab::exact::{bo_gamma, cubic_integral, exact_wave, gradient_integral, kdv_k_from_c};
use petlab::petviashvili::{initial_guess_classical, initial_guess_shifted, run, IterationConfig, IterationReport};
use petlab::spectrum::{
    complex_pair_margin, gep_spectrum, iterated_wave, negative_count_check, resolved_wave, speed_range, sweep,
    NegativeCounts, SpectrumReport, SweepResult, SweepSettings, DEFAULT_MODES,
};
use petlab::stokes::{lambda1_limit, stokes_wave, Parity};
use petlab::{Convention, Field, SpectralGrid, Variant, WaveSolution};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::output::{ensure_dir, fmt_f64, write_csv, write_json, write_svg, Series, SCHEMA_VERSION};

/// A bad flag combination detected after parsing.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

/// Exit status for an error: 3 for a singular operator or vanishing
/// quotient, 2 for invalid input, 1 otherwise.
pub fn exit_code(err: &anyhow::Error) -> i32 {
    use petlab::Error as E;
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<E>() {
            return match e {
                E::ResonantSpeed { .. } | E::VanishingDenominator { .. } => 3,
                E::OddOrTooSmallGrid(..)
                | E::InvalidAlpha(..)
                | E::AlphaTooSmall(..)
                | E::ModulusOutOfRange(..)
                | E::SpeedOutOfRange(..)
                | E::NoClosedForm(..)
                | E::EmptyRange
                | E::InvalidConfig(..) => 2,
                _ => 1,
            };
        }
        if cause.downcast_ref::<UsageError>().is_some() || cause.downcast_ref::<crate::verify::ExpectedFileError>().is_some() {
            return 2;
        }
    }
    1
}

pub fn parse_variant(s: &str) -> std::result::Result<Variant, String> {
    s.parse::<Variant>().map_err(|e| e.to_string())
}

fn default_modes() -> usize {
    DEFAULT_MODES
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct SolveParams {
    #[arg(long, value_parser = parse_variant, default_value = "classical")]
    pub variant: Variant,
    #[arg(long)]
    pub c: f64,
    #[arg(long, default_value_t = 2.0)]
    pub alpha: f64,
    /// Amplitude of the cos x term of the starting guess.
    #[arg(long, default_value_t = 0.4, allow_hyphen_values = true)]
    pub a: f64,
    /// Amplitude of the sin x term of the starting guess.
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub eps: f64,
    /// Collocation points.
    #[arg(long, default_value_t = 256)]
    pub n: usize,
    #[arg(long, default_value_t = 500)]
    pub max_iter: usize,
    /// Residual at which the iteration stops.
    #[arg(long, default_value_t = 1e-12)]
    pub tol: f64,
}

#[derive(Debug, Clone, Args)]
pub struct SolveArgs {
    #[command(flatten)]
    pub params: SolveParams,
    #[arg(long)]
    pub out: PathBuf,
    /// Also write SVG plots.
    #[arg(long)]
    pub svg: bool,
}

pub struct SolveOutcome {
    pub report: IterationReport,
    /// `‖final - exact‖_∞` when a closed form exists at this (c, α).
    pub error_vs_exact: Option<f64>,
}

pub fn starting_guess(p: &SolveParams, grid: &SpectralGrid) -> Field {
    match p.variant {
        Variant::Classical => initial_guess_classical(p.a, p.eps, p.alpha, grid),
        Variant::Shifted => {
            let odd = Field::from_fn(grid, |x| p.eps * x.sin());
            &initial_guess_shifted(p.a, p.c, grid) + &odd
        }
    }
}

pub fn solve(p: &SolveParams) -> Result<SolveOutcome> {
    let grid = SpectralGrid::new(p.n)?;
    let cfg = IterationConfig::new(p.variant, p.c, p.alpha)
        .with_max_iter(p.max_iter)
        .with_tol_residual(p.tol);
    let report = run(&starting_guess(p, &grid), &cfg)?;
    let error_vs_exact = exact_wave(p.c, p.alpha, Convention::of_variant(p.variant), &grid)
        .ok()
        .map(|exact| report.final_field.max_abs_diff(&exact.profile));
    Ok(SolveOutcome { report, error_vs_exact })
}

pub fn cmd_solve(args: &SolveArgs) -> Result<SolveOutcome> {
    let p = &args.params;
    let outcome = solve(p)?;
    let r = &outcome.report;
    ensure_dir(&args.out)?;
    write_csv(
        &args.out.join("iterations.csv"),
        &["n", "M_n", "one_minus_M", "step_inf", "residual_inf", "crest", "argmax"],
        r.steps.iter().map(|s| {
            vec![
                s.n.to_string(),
                fmt_f64(s.m_n),
                fmt_f64(s.one_minus_m),
                fmt_f64(s.step_inf),
                fmt_f64(s.residual_inf),
                fmt_f64(s.crest),
                s.argmax.to_string(),
            ]
        }),
    )?;
    let grid = r.final_field.grid();
    write_csv(
        &args.out.join("final_profile.csv"),
        &["x", "u"],
        grid.nodes()
            .into_iter()
            .zip(r.final_field.samples())
            .map(|(x, u)| vec![fmt_f64(x), fmt_f64(*u)]),
    )?;
    write_json(
        &args.out.join("report.json"),
        &json!({
            "schema_version": SCHEMA_VERSION,
            "command": "solve",
            "parameters": p,
            "verdict": r.verdict,
            "iterations": r.iterations(),
            "final_quotient": r.last().map(|s| s.m_n),
            "final_residual": r.final_residual(),
            "m_limit": r.m_limit,
            "error_vs_exact": outcome.error_vs_exact,
        }),
    )?;
    if args.svg {
        let profile: Vec<(f64, f64)> = grid.nodes().into_iter().zip(r.final_field.samples().iter().copied()).collect();
        let mut series = vec![Series::new("final", profile)];
        if let Some((even, odd)) = &r.cycle_pair {
            series = vec![
                Series::new("even iterate", grid.nodes().into_iter().zip(even.samples().iter().copied()).collect()),
                Series::new("odd iterate", grid.nodes().into_iter().zip(odd.samples().iter().copied()).collect()),
            ];
        }
        write_svg(&args.out.join("profile.svg"), &format!("c = {}, alpha = {}", p.c, p.alpha), &series, false)?;
        let steps = |f: fn(&petlab::petviashvili::StepDiag) -> f64| r.steps.iter().map(|s| (s.n as f64, f(s))).collect();
        write_svg(
            &args.out.join("errors.svg"),
            "errors versus n",
            &[
                Series::new("|1 - M|", steps(|s| s.one_minus_m)),
                Series::new("step", steps(|s| s.step_inf)),
                Series::new("residual", steps(|s| s.residual_inf)),
            ],
            true,
        )?;
    }
    info!("solve: {:?} after {} iterations", r.verdict, r.iterations());
    Ok(outcome)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WaveSource {
    /// Closed form when α ∈ {1, 2}, iterated otherwise.
    Auto,
    Exact,
    /// Shifted iteration from `c + a cos x`, on a finer grid if needed.
    Iterated,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct SpectrumParams {
    #[arg(long)]
    pub c: f64,
    #[arg(long, default_value_t = 2.0)]
    pub alpha: f64,
    #[arg(long, value_parser = parse_variant, default_value = "classical")]
    pub variant: Variant,
    /// Retained Fourier modes (odd).
    #[arg(long, default_value_t = DEFAULT_MODES)]
    #[serde(default = "default_modes")]
    pub modes: usize,
    /// Collocation points for the wave.
    #[arg(long, default_value_t = 256)]
    pub n: usize,
    #[arg(long, value_enum, default_value_t = WaveSource::Auto)]
    pub wave: WaveSource,
    /// Guess amplitude for iterated waves.
    #[arg(long, default_value_t = 0.4)]
    pub a: f64,
}

#[derive(Debug, Clone, Args)]
pub struct SpectrumArgs {
    #[command(flatten)]
    pub params: SpectrumParams,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub svg: bool,
}

pub struct SpectrumOutcome {
    pub report: SpectrumReport,
    /// Label of each entry of `report.eigenvalues`.
    pub tags: Vec<&'static str>,
    pub counts: NegativeCounts,
    pub wave_source: &'static str,
}

fn spectrum_wave(p: &SpectrumParams) -> Result<(WaveSolution, usize, &'static str)> {
    let convention = Convention::of_variant(p.variant);
    let grid = SpectralGrid::new(p.n)?;
    let exact = || exact_wave(p.c, p.alpha, convention, &grid);
    match p.wave {
        WaveSource::Exact => Ok((exact()?, p.modes, "exact")),
        WaveSource::Auto if p.alpha == 1.0 || p.alpha == 2.0 => Ok((exact()?, p.modes, "exact")),
        _ if p.modes == DEFAULT_MODES && p.n == 256 => {
            let (w, modes) = resolved_wave(p.c, p.alpha, p.variant, p.a)?;
            Ok((w, modes, "iterated"))
        }
        _ => Ok((iterated_wave(p.c, p.alpha, p.variant, &grid, p.a)?, p.modes, "iterated")),
    }
}

/// Labels the exact pair and the constrained eigenvalues closest to the
/// small-amplitude limits λ₁ (odd) and 2 (even).
pub fn tag_eigenvalues(report: &SpectrumReport) -> Vec<&'static str> {
    let mut tags = vec!["constrained"; report.eigenvalues.len()];
    tags[report.minus_one] = "minus_one";
    tags[report.zero] = "zero";
    let nearest = |parity: Parity, target: f64| {
        report
            .eigenvalues
            .iter()
            .enumerate()
            .filter(|(i, e)| *i != report.minus_one && *i != report.zero && e.parity == parity)
            .min_by(|(_, x), (_, y)| (x.value - target).norm().total_cmp(&(y.value - target).norm()))
            .map(|(i, _)| i)
    };
    if report.convention == Convention::Phi {
        if let Some(i) = lambda1_limit(report.alpha).ok().and_then(|l1| nearest(Parity::Odd, l1)) {
            tags[i] = "lambda1";
        }
        if let Some(i) = nearest(Parity::Even, 2.0) {
            tags[i] = "lambda2";
        }
    }
    tags
}

fn sign(x: f64) -> i32 {
    if x.abs() < 1e-12 {
        0
    } else if x > 0.0 {
        1
    } else {
        -1
    }
}

pub fn spectrum(p: &SpectrumParams) -> Result<SpectrumOutcome> {
    let (wave, modes, wave_source) = spectrum_wave(p)?;
    let report = gep_spectrum(&wave, modes)?;
    let counts = negative_count_check(&wave, modes)?;
    let tags = tag_eigenvalues(&report);
    Ok(SpectrumOutcome {
        report,
        tags,
        counts,
        wave_source,
    })
}

pub fn cmd_spectrum(args: &SpectrumArgs) -> Result<SpectrumOutcome> {
    let p = &args.params;
    let outcome = spectrum(p)?;
    let r = &outcome.report;
    ensure_dir(&args.out)?;
    write_csv(
        &args.out.join("eigenvalues.csv"),
        &["re", "im", "tag", "parity", "l_sign", "h_sign"],
        r.eigenvalues.iter().zip(&outcome.tags).map(|(e, tag)| {
            vec![
                fmt_f64(e.value.re),
                fmt_f64(e.value.im),
                tag.to_string(),
                format!("{:?}", e.parity).to_lowercase(),
                sign(e.l_form).to_string(),
                sign(e.h_form).to_string(),
            ]
        }),
    )?;
    let tagged: Vec<_> = r
        .eigenvalues
        .iter()
        .zip(&outcome.tags)
        .filter(|(_, t)| **t != "constrained")
        .map(|(e, t)| {
            json!({
                "tag": t,
                "re": e.value.re,
                "im": e.value.im,
                "parity": format!("{:?}", e.parity).to_lowercase(),
                "correlation": e.correlation,
                "l_sign": sign(e.l_form),
                "h_sign": sign(e.h_form),
            })
        })
        .collect();
    write_json(
        &args.out.join("report.json"),
        &json!({
            "schema_version": SCHEMA_VERSION,
            "command": "spectrum",
            "parameters": p,
            "wave_source": outcome.wave_source,
            "modes_used": r.n_modes,
            "verdict": r.verdict,
            "spectral_radius": r.spectral_radius,
            "unstable_count": r.unstable_count,
            "tagged": tagged,
            "negative_counts": outcome.counts,
        }),
    )?;
    if args.svg {
        let pts: Vec<(f64, f64)> = r.eigenvalues.iter().map(|e| (e.value.re, e.value.im)).collect();
        let series: Vec<Series> = pts.iter().map(|&p| Series::new("", vec![p])).collect();
        write_svg(&args.out.join("eigenvalues.svg"), "eigenvalues (re, im)", &series, false)?;
    }
    Ok(outcome)
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct SweepParams {
    #[arg(long, default_value_t = 2.0)]
    pub alpha: f64,
    #[arg(long)]
    pub c_min: f64,
    #[arg(long)]
    pub c_max: f64,
    #[arg(long, default_value_t = 0.01)]
    pub c_step: f64,
    #[arg(long, value_parser = parse_variant, default_value = "classical")]
    pub variant: Variant,
    #[arg(long, default_value_t = DEFAULT_MODES)]
    #[serde(default = "default_modes")]
    pub modes: usize,
    #[arg(long, default_value_t = 256)]
    pub n: usize,
    #[arg(long, default_value_t = 0.4)]
    pub a: f64,
}

#[derive(Debug, Clone, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub params: SweepParams,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub svg: bool,
}

pub struct SweepOutcome {
    pub result: SweepResult,
    /// `max |1 - λ|` over the complex constrained eigenvalues, per speed.
    pub margins: Option<Vec<(f64, f64)>>,
    /// Fewest eigenvalues within 1e-4 of -1 at any speed.
    pub min_minus_one_multiplicity: usize,
}

pub fn run_sweep(p: &SweepParams) -> Result<SweepOutcome> {
    let cs = speed_range(p.c_min, p.c_max, p.c_step)?;
    let mut settings = SweepSettings::new(p.alpha, p.variant);
    settings.n_modes = p.modes;
    settings.n_points = p.n;
    settings.amplitude = p.a;
    let result = sweep(&cs, &settings)?;
    let margins = complex_pair_margin(&result).ok();
    let min_minus_one_multiplicity = result
        .points
        .iter()
        .map(|(_, r)| r.eigenvalues.iter().filter(|e| (e.value + 1.0).norm() < 1e-4).count())
        .min()
        .unwrap_or(0);
    Ok(SweepOutcome {
        result,
        margins,
        min_minus_one_multiplicity,
    })
}

pub fn cmd_sweep(args: &SweepArgs) -> Result<SweepOutcome> {
    let p = &args.params;
    let outcome = run_sweep(p)?;
    let res = &outcome.result;
    ensure_dir(&args.out)?;
    let rows = res.tracks.iter().flat_map(|t| {
        t.points
            .iter()
            .map(move |(c, z)| vec![fmt_f64(*c), t.id.to_string(), fmt_f64(z.re), fmt_f64(z.im)])
    });
    write_csv(&args.out.join("tracks.csv"), &["c", "track_id", "re", "im"], rows)?;
    if let Some(m) = &outcome.margins {
        write_csv(
            &args.out.join("margins.csv"),
            &["c", "margin"],
            m.iter().map(|(c, v)| vec![fmt_f64(*c), fmt_f64(*v)]),
        )?;
    }
    let max_margin = outcome.margins.as_ref().map(|m| m.iter().map(|x| x.1).fold(0.0, f64::max));
    write_json(
        &args.out.join("events.json"),
        &json!({
            "schema_version": SCHEMA_VERSION,
            "command": "sweep",
            "parameters": p,
            "c_star": res.events.c_star,
            "c_2star": res.events.c_2star,
            "c_3star": res.events.c_3star,
            "speeds_computed": res.points.len(),
            "max_complex_margin": max_margin,
            "min_minus_one_multiplicity": outcome.min_minus_one_multiplicity,
        }),
    )?;
    if args.svg {
        let series: Vec<Series> = res
            .tracks
            .iter()
            .filter(|t| t.points.iter().any(|(_, z)| (z.re - 1.0).abs() > 0.05))
            .map(|t| Series::new("", t.points.iter().map(|(c, z)| (*c, z.re)).collect()))
            .collect();
        write_svg(&args.out.join("tracks.svg"), "Re eigenvalue versus c", &series, false)?;
        if let Some(m) = &outcome.margins {
            write_svg(&args.out.join("margins.svg"), "|1 - lambda| on complex pair", &[Series::new("margin", m.clone())], false)?;
        }
    }
    Ok(outcome)
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct ExactParams {
    #[arg(long)]
    pub c: f64,
    /// 2 (KdV) or 1 (Benjamin-Ono).
    #[arg(long, default_value_t = 2.0)]
    pub alpha: f64,
    #[arg(long, default_value_t = 256)]
    pub n: usize,
    /// Form of the profile: phi or psi.
    #[arg(long, value_parser = parse_convention, default_value = "phi")]
    pub convention: Convention,
}

pub fn parse_convention(s: &str) -> std::result::Result<Convention, String> {
    match s.to_ascii_lowercase().as_str() {
        "phi" => Ok(Convention::Phi),
        "psi" => Ok(Convention::Psi),
        other => Err(format!("unknown convention '{other}' (expected phi or psi)")),
    }
}

#[derive(Debug, Clone, Args)]
pub struct ExactArgs {
    #[command(flatten)]
    pub params: ExactParams,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub svg: bool,
}

pub fn cmd_exact(args: &ExactArgs) -> Result<WaveSolution> {
    let p = &args.params;
    let grid = SpectralGrid::new(p.n)?;
    let w = exact_wave(p.c, p.alpha, p.convention, &grid)?;
    ensure_dir(&args.out)?;
    write_csv(
        &args.out.join("profile.csv"),
        &["x", "u"],
        grid.nodes().into_iter().zip(w.profile.samples()).map(|(x, u)| vec![fmt_f64(x), fmt_f64(*u)]),
    )?;
    let modulus = if p.alpha == 2.0 { Some(kdv_k_from_c(p.c)?.k()) } else { None };
    let gamma = if p.alpha == 1.0 { Some(bo_gamma(p.c)) } else { None };
    let samples = w.profile.samples();
    write_json(
        &args.out.join("report.json"),
        &json!({
            "schema_version": SCHEMA_VERSION,
            "command": "exact",
            "parameters": p,
            "residual": w.residual(),
            "modulus_k": modulus,
            "gamma": gamma,
            "max": samples.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            "min": samples.iter().copied().fold(f64::INFINITY, f64::min),
            "cubic_integral": cubic_integral(&w),
            "gradient_integral": gradient_integral(&w),
        }),
    )?;
    if args.svg {
        let pts = grid.nodes().into_iter().zip(samples.iter().copied()).collect();
        write_svg(&args.out.join("profile.svg"), "closed-form wave", &[Series::new(p.convention.to_string(), pts)], false)?;
    }
    Ok(w)
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct StokesParams {
    #[arg(long, default_value_t = 2.0)]
    pub alpha: f64,
    /// Amplitudes for the residual fit, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "0.04,0.02,0.01")]
    pub amplitudes: Vec<f64>,
    #[arg(long, default_value_t = 32)]
    pub n: usize,
}

#[derive(Debug, Clone, Args)]
pub struct StokesArgs {
    #[command(flatten)]
    pub params: StokesParams,
    /// Directory for stokes.csv and report.json; the table is printed either way.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StokesRow {
    pub order: u32,
    pub a: f64,
    pub speed: f64,
    pub residual: f64,
}

pub struct StokesOutcome {
    pub rows: Vec<StokesRow>,
    /// Least-squares slope of log residual against log a, per order 1..=4.
    pub slopes: Vec<(u32, f64)>,
}

fn fit_slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let (sx, sy) = points.iter().fold((0.0, 0.0), |(sx, sy), (x, y)| (sx + x, sy + y));
    let (mx, my) = (sx / n, sy / n);
    let num: f64 = points.iter().map(|(x, y)| (x - mx) * (y - my)).sum();
    let den: f64 = points.iter().map(|(x, _)| (x - mx).powi(2)).sum();
    num / den
}

pub fn stokes_check(p: &StokesParams) -> Result<StokesOutcome> {
    if p.amplitudes.len() < 2 || p.amplitudes.iter().any(|&a| !(a > 0.0)) {
        bail!(UsageError("need at least two positive amplitudes".into()));
    }
    let grid = SpectralGrid::new(p.n)?;
    let mut rows = Vec::new();
    let mut slopes = Vec::new();
    for order in 1..=4u32 {
        let mut pts = Vec::new();
        for &a in &p.amplitudes {
            let w = stokes_wave(a, p.alpha, &grid, order)?;
            let residual = w.residual();
            pts.push((a.ln(), residual.ln()));
            rows.push(StokesRow {
                order,
                a,
                speed: w.c,
                residual,
            });
        }
        slopes.push((order, fit_slope(&pts)));
    }
    Ok(StokesOutcome { rows, slopes })
}

pub fn cmd_stokes(args: &StokesArgs) -> Result<StokesOutcome> {
    let outcome = stokes_check(&args.params)?;
    println!("{:>5} {:>10} {:>24} {:>24}", "order", "a", "speed", "residual");
    for r in &outcome.rows {
        println!("{:>5} {:>10} {:>24} {:>24}", r.order, r.a, fmt_f64(r.speed), fmt_f64(r.residual));
    }
    for (order, slope) in &outcome.slopes {
        println!("order {order}: residual slope {slope:.3} (expected {})", order + 1);
    }
    if let Some(out) = &args.out {
        write_outputs_stokes(out, &args.params, &outcome)?;
    }
    Ok(outcome)
}

fn write_outputs_stokes(out: &Path, p: &StokesParams, o: &StokesOutcome) -> Result<()> {
    ensure_dir(out)?;
    write_csv(
        &out.join("stokes.csv"),
        &["order", "a", "speed", "residual"],
        o.rows
            .iter()
            .map(|r| vec![r.order.to_string(), fmt_f64(r.a), fmt_f64(r.speed), fmt_f64(r.residual)]),
    )?;
    let slopes: serde_json::Map<String, serde_json::Value> =
        o.slopes.iter().map(|(k, s)| (k.to_string(), json!(s))).collect();
    write_json(
        &out.join("report.json"),
        &json!({
            "schema_version": SCHEMA_VERSION,
            "command": "stokes-check",
            "parameters": p,
            "slopes": slopes,
        }),
    )
}
