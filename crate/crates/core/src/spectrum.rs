//! Spectrum of the generalized eigenvalue problem `H v = λ L v` in a truncated
//! Fourier basis, where `H = L - 2u` is the Jacobian of `L u - u²` at a wave
//! `u` (φ with the classical `L`, ψ with the shifted one; both give the same
//! `H`). The linearized Petviashvili map acts as `Id - L⁻¹H` once the two
//! eigenpairs fixed by the wave itself are removed:
//!
//! ```text
//! L⁻¹H u  = -u      (scaling, removed by the quotient)
//! L⁻¹H u′ =  0      (translation)
//! ```
//!
//! so the iteration is predicted to converge iff `|1 - λ| < 1` on the rest.
//!
//! For an even wave the Fourier basis splits into cosine and sine blocks
//! which are solved separately.

use std::f64::consts::SQRT_2;
use std::sync::Once;

use faer::Mat;
use log::debug;
use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exact::{Convention, WaveSolution};
use crate::petviashvili::{initial_guess_shifted, run, IterationConfig, Verdict};
use crate::spectral::{abs_pow, SpectralGrid, SymbolSpec, Variant};
use crate::stokes::Parity;

/// Retained Fourier modes `-64..=64`.
pub const DEFAULT_MODES: usize = 129;
/// Minimum eigenvector correlation for identifying the -1 and 0 eigenpairs.
pub const TAG_CORRELATION: f64 = 0.999;
/// Largest Fourier coefficient allowed at and beyond the mode cutoff,
/// relative to `max(1, max |û|)`.
pub const RESOLUTION_TOL: f64 = 1e-12;
/// Imaginary parts below this count as real.
pub const IMAG_TOL: f64 = 1e-8;
/// Eigenvalues of `H` within this of zero count as zero.
pub const ZERO_TOL: f64 = 1e-8;

static SEQUENTIAL: Once = Once::new();

fn init_eigensolver() {
    // dense blocks here are small; sequential kernels keep results bitwise
    // reproducible regardless of thread count
    SEQUENTIAL.call_once(|| faer::set_global_parallelism(faer::Par::Seq));
}

/// Dense operator in the Fourier basis `e^{inx}`, `n = -K..=K`.
#[derive(Debug, Clone)]
pub struct OperatorMatrix {
    pub dim: usize,
    entries: Vec<Complex64>,
    pub c: f64,
    pub alpha: f64,
    pub convention: Convention,
}

impl OperatorMatrix {
    fn zeros(dim: usize, c: f64, alpha: f64, convention: Convention) -> Self {
        Self {
            dim,
            entries: vec![Complex64::new(0.0, 0.0); dim * dim],
            c,
            alpha,
            convention,
        }
    }

    pub fn max_mode(&self) -> i64 {
        ((self.dim - 1) / 2) as i64
    }

    /// Row/column index of mode `n`.
    pub fn index(&self, mode: i64) -> usize {
        (mode + self.max_mode()) as usize
    }

    pub fn get(&self, row: usize, col: usize) -> Complex64 {
        self.entries[row * self.dim + col]
    }

    fn set(&mut self, row: usize, col: usize, value: Complex64) {
        self.entries[row * self.dim + col] = value;
    }

    pub fn apply(&self, v: &[Complex64]) -> Vec<Complex64> {
        (0..self.dim)
            .map(|i| (0..self.dim).map(|j| self.get(i, j) * v[j]).sum())
            .collect()
    }

    /// `max |A_ij - conj(A_ji)|`.
    pub fn hermitian_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.dim {
            for j in 0..=i {
                worst = worst.max((self.get(i, j) - self.get(j, i).conj()).norm());
            }
        }
        worst
    }

    fn to_real(&self) -> Mat<f64> {
        Mat::from_fn(self.dim, self.dim, |i, j| self.get(i, j).re)
    }
}

/// Fourier coefficients of a wave as a function of the signed mode, with
/// the Nyquist coefficient split evenly between `±N/2` and zero beyond.
struct WaveCoefficients {
    coeffs: Vec<Complex64>,
    grid: SpectralGrid,
}

impl WaveCoefficients {
    fn new(w: &WaveSolution) -> Self {
        Self {
            coeffs: w.profile.coefficients(),
            grid: w.grid().clone(),
        }
    }

    fn get(&self, mode: i64) -> Complex64 {
        let nyq = self.grid.nyquist();
        if mode.abs() > nyq {
            Complex64::new(0.0, 0.0)
        } else if mode.abs() == nyq {
            0.5 * self.coeffs[self.grid.n_points() / 2]
        } else {
            self.coeffs[self.grid.index_of_mode(mode)]
        }
    }

    fn real(&self, mode: i64) -> f64 {
        self.get(mode).re
    }

    /// `max_{|m| ≥ k} |û_m|` relative to `max(1, max |û|)`.
    fn tail(&self, k: i64) -> f64 {
        let scale = self.coeffs.iter().fold(1.0f64, |m, c| m.max(c.norm()));
        let tail = self
            .grid
            .modes()
            .filter(|m| m.abs() >= k)
            .fold(0.0f64, |t, m| t.max(self.get(m).norm()));
        tail / scale
    }
}

fn half_width(n_modes: usize) -> Result<i64> {
    if n_modes < 3 || n_modes.is_multiple_of(2) {
        return Err(Error::InvalidConfig(format!(
            "number of retained modes must be odd and at least 3 (got {n_modes})"
        )));
    }
    Ok(((n_modes - 1) / 2) as i64)
}

fn check_resolved(coeffs: &WaveCoefficients, k: i64) -> Result<()> {
    let tail = coeffs.tail(k);
    if tail > RESOLUTION_TOL {
        return Err(Error::UnderResolvedWave { tail });
    }
    Ok(())
}

fn check_invertible(spec: &SymbolSpec, k: i64) -> Result<()> {
    match (0..=k).find(|&n| spec.symbol(n).abs() <= crate::spectral::TOL_SING) {
        Some(mode) => Err(Error::ResonantSpeed {
            c: spec.c,
            alpha: spec.alpha,
            mode,
        }),
        None => Ok(()),
    }
}

/// `L` (diagonal) and `H = L - 2u` in the basis `e^{inx}`, `|n| ≤ K`.
pub fn build_matrices(w: &WaveSolution, n_modes: usize) -> Result<(OperatorMatrix, OperatorMatrix)> {
    let k = half_width(n_modes)?;
    let coeffs = WaveCoefficients::new(w);
    check_resolved(&coeffs, k)?;
    let spec = w.symbol_spec();
    let mut l = OperatorMatrix::zeros(n_modes, w.c, w.alpha, w.convention);
    let mut h = l.clone();
    for n in -k..=k {
        let i = l.index(n);
        l.set(i, i, Complex64::new(spec.symbol(n), 0.0));
        for m in -k..=k {
            let j = l.index(m);
            let mut value = -2.0 * coeffs.get(n - m);
            if n == m {
                value += spec.symbol(n);
            }
            h.set(i, j, value);
        }
    }
    Ok((l, h))
}

/// One eigenvalue of `L⁻¹H` with its block and the signs of the quadratic
/// forms of its eigenvector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GepEigenvalue {
    pub value: Complex64,
    pub parity: Parity,
    /// `⟨L v, v⟩` for the unit eigenvector.
    pub l_form: f64,
    /// `⟨H v, v⟩` for the unit eigenvector.
    pub h_form: f64,
    /// Correlation of the eigenvector with the wave (even block) or its
    /// derivative (odd block).
    pub correlation: f64,
}

impl GepEigenvalue {
    pub fn is_real(&self) -> bool {
        self.value.im.abs() <= IMAG_TOL
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpectralVerdict {
    PredictConverge,
    PredictDiverge,
}

impl SpectralVerdict {
    pub fn predicts_convergence(self) -> bool {
        self == SpectralVerdict::PredictConverge
    }
}

#[derive(Debug, Clone)]
pub struct SpectrumReport {
    pub c: f64,
    pub alpha: f64,
    pub convention: Convention,
    pub n_modes: usize,
    /// Every eigenvalue of `L⁻¹H`, even block first.
    pub eigenvalues: Vec<GepEigenvalue>,
    /// Index into `eigenvalues` of the eigenvalue tied to the wave (≈ -1).
    pub minus_one: usize,
    /// Index into `eigenvalues` of the eigenvalue tied to its derivative (≈ 0).
    pub zero: usize,
    /// `eigenvalues` without the two tagged ones.
    pub constrained: Vec<GepEigenvalue>,
    /// `max |1 - λ|` over the constrained eigenvalues.
    pub spectral_radius: f64,
    pub verdict: SpectralVerdict,
    /// Constrained eigenvalues with `|1 - λ| ≥ 1`.
    pub unstable_count: usize,
}

impl SpectrumReport {
    pub fn tagged_minus_one(&self) -> &GepEigenvalue {
        &self.eigenvalues[self.minus_one]
    }

    pub fn tagged_zero(&self) -> &GepEigenvalue {
        &self.eigenvalues[self.zero]
    }

    /// Eigenvalues `1 - λ` of the linearized iteration on the constrained space.
    pub fn iteration_eigenvalues(&self) -> Vec<Complex64> {
        self.constrained.iter().map(|e| 1.0 - e.value).collect()
    }

    pub fn constrained_values(&self) -> Vec<Complex64> {
        self.constrained.iter().map(|e| e.value).collect()
    }

    /// Real constrained eigenvalues strictly above `level`.
    pub fn real_above(&self, level: f64) -> usize {
        self.constrained
            .iter()
            .filter(|e| e.is_real() && e.value.re > level)
            .count()
    }

    pub fn complex_count(&self) -> usize {
        self.constrained.iter().filter(|e| !e.is_real()).count()
    }

    /// Eigenvalues of the given parity, sorted by real part.
    pub fn block(&self, parity: Parity) -> Vec<Complex64> {
        let mut v: Vec<Complex64> = self
            .eigenvalues
            .iter()
            .filter(|e| e.parity == parity)
            .map(|e| e.value)
            .collect();
        v.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
        v
    }
}

/// Real symmetric-basis block of `C` (multiplication by the wave) and the
/// matching symbols.
struct Block {
    modes: Vec<i64>,
    conv: Vec<Vec<f64>>,
    target: Vec<f64>,
}

fn even_block(coeffs: &WaveCoefficients, k: i64) -> Block {
    let modes: Vec<i64> = (0..=k).collect();
    let conv = modes
        .iter()
        .map(|&n| {
            modes
                .iter()
                .map(|&m| match (n, m) {
                    (0, 0) => coeffs.real(0),
                    (0, m) => SQRT_2 * coeffs.real(m),
                    (n, 0) => SQRT_2 * coeffs.real(n),
                    (n, m) => coeffs.real(n - m) + coeffs.real(n + m),
                })
                .collect()
        })
        .collect();
    let target = modes
        .iter()
        .map(|&n| if n == 0 { coeffs.real(0) } else { SQRT_2 * coeffs.real(n) })
        .collect();
    Block { modes, conv, target }
}

fn odd_block(coeffs: &WaveCoefficients, k: i64) -> Block {
    let modes: Vec<i64> = (1..=k).collect();
    let conv = modes
        .iter()
        .map(|&n| modes.iter().map(|&m| coeffs.real(n - m) - coeffs.real(n + m)).collect())
        .collect();
    // sine coefficients of u′ for even u
    let target = modes.iter().map(|&n| SQRT_2 * n as f64 * coeffs.real(n)).collect();
    Block { modes, conv, target }
}

fn solve_block(block: &Block, spec: &SymbolSpec, parity: Parity) -> Result<Vec<GepEigenvalue>> {
    let dim = block.modes.len();
    let symbols: Vec<f64> = block.modes.iter().map(|&n| spec.symbol(n)).collect();
    let a = Mat::<f64>::from_fn(dim, dim, |i, j| {
        let delta = if i == j { 1.0 } else { 0.0 };
        delta - 2.0 * block.conv[i][j] / symbols[i]
    });
    let eig = a.eigen().map_err(|e| Error::Eigensolver(format!("{e:?}")))?;
    let values: Vec<Complex64> = eig.S().column_vector().iter().copied().collect();
    let vectors = eig.U();
    let target_norm = block.target.iter().map(|t| t * t).sum::<f64>().sqrt();

    let mut out = Vec::with_capacity(dim);
    for (col, &value) in values.iter().enumerate() {
        let v: Vec<Complex64> = (0..dim).map(|i| vectors[(i, col)]).collect();
        let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        let v: Vec<Complex64> = v.iter().map(|z| z / norm).collect();
        let l_form: f64 = v.iter().zip(&symbols).map(|(z, s)| s * z.norm_sqr()).sum();
        let mut conv_form = Complex64::new(0.0, 0.0);
        for i in 0..dim {
            for j in 0..dim {
                conv_form += v[i].conj() * block.conv[i][j] * v[j];
            }
        }
        let h_form = l_form - 2.0 * conv_form.re;
        let overlap: Complex64 = v.iter().zip(&block.target).map(|(z, t)| z.conj() * t).sum();
        let correlation = if target_norm > 0.0 {
            overlap.norm() / target_norm
        } else {
            0.0
        };
        out.push(GepEigenvalue {
            value,
            parity,
            l_form,
            h_form,
            correlation,
        });
    }
    Ok(out)
}

fn best_match(eigs: &[GepEigenvalue], parity: Parity, label: &'static str) -> Result<usize> {
    let (idx, corr) = eigs
        .iter()
        .enumerate()
        .filter(|(_, e)| e.parity == parity)
        .fold((usize::MAX, -1.0f64), |(bi, bc), (i, e)| {
            if e.correlation > bc {
                (i, e.correlation)
            } else {
                (bi, bc)
            }
        });
    if idx == usize::MAX || corr < TAG_CORRELATION {
        return Err(Error::TaggingFailed {
            label,
            correlation: corr.max(0.0),
        });
    }
    Ok(idx)
}

/// Spectrum of `L⁻¹H` at an even wave; the operators follow the wave's form.
pub fn gep_spectrum(w: &WaveSolution, n_modes: usize) -> Result<SpectrumReport> {
    init_eigensolver();
    let k = half_width(n_modes)?;
    let spec = w.symbol_spec();
    check_invertible(&spec, k)?;
    let odd = w.profile.odd_part_norm();
    if odd > 1e-10 * w.profile.sup_norm().max(1.0) {
        return Err(Error::WaveNotEven { odd });
    }
    let coeffs = WaveCoefficients::new(w);
    check_resolved(&coeffs, k)?;

    let mut eigenvalues = solve_block(&even_block(&coeffs, k), &spec, Parity::Even)?;
    eigenvalues.extend(solve_block(&odd_block(&coeffs, k), &spec, Parity::Odd)?);

    let minus_one = best_match(&eigenvalues, Parity::Even, "wave (lambda = -1)")?;
    let zero = best_match(&eigenvalues, Parity::Odd, "derivative (lambda = 0)")?;
    let constrained: Vec<GepEigenvalue> = eigenvalues
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != minus_one && *i != zero)
        .map(|(_, e)| *e)
        .collect();
    let spectral_radius = constrained
        .iter()
        .map(|e| (1.0 - e.value).norm())
        .fold(0.0, f64::max);
    let unstable_count = constrained
        .iter()
        .filter(|e| (1.0 - e.value).norm() >= 1.0)
        .count();
    let verdict = if spectral_radius < 1.0 {
        SpectralVerdict::PredictConverge
    } else {
        SpectralVerdict::PredictDiverge
    };
    debug!(
        "spectrum c={} alpha={} {:?}: radius {spectral_radius:.6}, tagged {:.3e} / {:.3e}",
        w.c,
        w.alpha,
        w.convention,
        eigenvalues[minus_one].value.re + 1.0,
        eigenvalues[zero].value.re
    );
    Ok(SpectrumReport {
        c: w.c,
        alpha: w.alpha,
        convention: w.convention,
        n_modes,
        eigenvalues,
        minus_one,
        zero,
        constrained,
        spectral_radius,
        verdict,
        unstable_count,
    })
}

/// Spectrum of the shifted problem `H̃ v = λ L̃ v` at the ψ form of `w`.
pub fn shifted_gep_spectrum(w: &WaveSolution, n_modes: usize) -> Result<SpectrumReport> {
    gep_spectrum(&w.to_convention(Convention::Psi), n_modes)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct NegativeCounts {
    /// Negative symbols of `L` over the retained modes.
    pub l: usize,
    /// Negative eigenvalues of `H`.
    pub h: usize,
    /// Eigenvalues of `H` within [`ZERO_TOL`] of zero.
    pub h_zero: usize,
    /// Real negative eigenvalues of `L⁻¹H` on the constrained space.
    pub gep: usize,
}

/// Eigenvalues of the self-adjoint `H` in ascending order.
pub fn h_eigenvalues(w: &WaveSolution, n_modes: usize) -> Result<Vec<f64>> {
    init_eigensolver();
    let (_, h) = build_matrices(w, n_modes)?;
    let mut eigs = h
        .to_real()
        .self_adjoint_eigenvalues(faer::Side::Lower)
        .map_err(|e| Error::Eigensolver(format!("{e:?}")))?;
    eigs.sort_by(f64::total_cmp);
    Ok(eigs)
}

pub fn negative_count_check(w: &WaveSolution, n_modes: usize) -> Result<NegativeCounts> {
    let k = half_width(n_modes)?;
    let spec = w.symbol_spec();
    let l = (-k..=k).filter(|&n| spec.symbol(n) < 0.0).count();
    let eigs = h_eigenvalues(w, n_modes)?;
    let h_neg = eigs.iter().filter(|&&x| x < -ZERO_TOL).count();
    let h_zero = eigs.iter().filter(|&&x| x.abs() <= ZERO_TOL).count();
    let report = gep_spectrum(w, n_modes)?;
    let gep = report
        .constrained
        .iter()
        .filter(|e| e.is_real() && e.value.re < 0.0)
        .count();
    Ok(NegativeCounts {
        l,
        h: h_neg,
        h_zero,
        gep,
    })
}

/// Largest Fourier coefficient of `w` at or beyond the cutoff of an
/// `n_modes` truncation, relative to `max(1, max |û|)`.
pub fn resolution_tail(w: &WaveSolution, n_modes: usize) -> Result<f64> {
    let k = half_width(n_modes)?;
    Ok(WaveCoefficients::new(w).tail(k))
}

/// Grid sizes tried by [`resolved_wave`]; each is paired with `N/2 + 1` modes.
pub const RESOLUTION_LADDER: [usize; 4] = [256, 512, 1024, 2048];

/// Iterated wave on the coarsest grid of [`RESOLUTION_LADDER`] whose
/// coefficients fall below [`RESOLUTION_TOL`] at the cutoff, with the
/// matching number of modes.
pub fn resolved_wave(c: f64, alpha: f64, variant: Variant, amplitude: f64) -> Result<(WaveSolution, usize)> {
    let mut tail = f64::NAN;
    for n in RESOLUTION_LADDER {
        let grid = SpectralGrid::new(n)?;
        let wave = iterated_wave(c, alpha, variant, &grid, amplitude)?;
        let n_modes = n / 2 + 1;
        tail = resolution_tail(&wave, n_modes)?;
        if tail <= RESOLUTION_TOL {
            return Ok((wave, n_modes));
        }
        debug!("c={c} alpha={alpha}: tail {tail:e} on N={n}, refining");
    }
    Err(Error::UnderResolvedWave { tail })
}

/// Everything needed to recompute one point of a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepSettings {
    pub alpha: f64,
    /// Operators analysed: classical (φ) or shifted (ψ).
    pub variant: Variant,
    pub n_modes: usize,
    /// Collocation points for computing the waves.
    pub n_points: usize,
    /// Amplitude of the `c + a cos x` guess for the shifted iteration.
    pub amplitude: f64,
    /// Worker threads; `None` uses the rayon default.
    pub threads: Option<usize>,
}

impl SweepSettings {
    pub fn new(alpha: f64, variant: Variant) -> Self {
        Self {
            alpha,
            variant,
            n_modes: DEFAULT_MODES,
            n_points: 256,
            amplitude: 0.4,
            threads: threads_from_env(),
        }
    }
}

/// Thread cap from `PETLAB_THREADS`, if set to a positive integer.
pub fn threads_from_env() -> Option<usize> {
    std::env::var("PETLAB_THREADS")
        .ok()
        .and_then(|s| s.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
}

/// Non-constant wave at speed `c` from the shifted iteration started at
/// `c + a cos x`, in the form matching `variant`.
pub fn iterated_wave(c: f64, alpha: f64, variant: Variant, grid: &SpectralGrid, amplitude: f64) -> Result<WaveSolution> {
    let cfg = IterationConfig::new(Variant::Shifted, c, alpha).with_max_iter(2000);
    let report = run(&initial_guess_shifted(amplitude, c, grid), &cfg)?;
    let psi = report.wave();
    let samples = psi.profile.samples();
    let spread = samples.iter().copied().fold(f64::NEG_INFINITY, f64::max)
        - samples.iter().copied().fold(f64::INFINITY, f64::min);
    if report.verdict != Verdict::Converged || spread < 1e-6 {
        return Err(Error::InvalidConfig(format!(
            "no non-constant wave found at c = {c}, alpha = {alpha} ({:?}, spread {spread:e})",
            report.verdict
        )));
    }
    Ok(psi.to_convention(Convention::of_variant(variant)))
}

fn point_spectrum(c: f64, settings: &SweepSettings) -> Result<SpectrumReport> {
    let grid = SpectralGrid::new(settings.n_points)?;
    let wave = iterated_wave(c, settings.alpha, settings.variant, &grid, settings.amplitude)?;
    gep_spectrum(&wave, settings.n_modes)
}

/// Continuous eigenvalue branch across a sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct Track {
    pub id: usize,
    pub points: Vec<(f64, Complex64)>,
}

impl Track {
    pub fn is_complex_somewhere(&self) -> bool {
        self.points.iter().any(|(_, z)| z.im.abs() > IMAG_TOL)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct SweepEvents {
    /// First speed at which a constrained eigenvalue leaves the real axis.
    pub c_star: Option<f64>,
    /// First speed with one real constrained eigenvalue above 2.
    pub c_2star: Option<f64>,
    /// First speed with two real constrained eigenvalues above 2.
    pub c_3star: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct SweepResult {
    pub settings: SweepSettings,
    /// Spectra at every computed speed (requested and refinement points),
    /// ordered by `c`.
    pub points: Vec<(f64, SpectrumReport)>,
    pub tracks: Vec<Track>,
    pub events: SweepEvents,
}

const MAX_MATCH_DISTANCE: f64 = 0.1;
const MAX_REFINEMENTS: usize = 4;
const EVENT_TOL: f64 = 1e-4;

fn in_pool<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match threads {
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))?;
            Ok(pool.install(f))
        }
        None => Ok(f()),
    }
}

fn compute_points(cs: &[f64], settings: &SweepSettings) -> Result<Vec<(f64, SpectrumReport)>> {
    let results: Vec<Result<SpectrumReport>> = in_pool(settings.threads, || {
        cs.par_iter().map(|&c| point_spectrum(c, settings)).collect()
    })?;
    cs.iter()
        .zip(results)
        .map(|(&c, r)| r.map(|rep| (c, rep)))
        .collect()
}

/// Greedy nearest-neighbour assignment of `next` onto `prev`; returns, for
/// each entry of `prev`, the index in `next` and the largest distance used.
fn greedy_match(prev: &[Complex64], next: &[Complex64]) -> (Vec<usize>, f64) {
    let mut pairs: Vec<(f64, usize, usize)> = Vec::with_capacity(prev.len() * next.len());
    for (i, a) in prev.iter().enumerate() {
        for (j, b) in next.iter().enumerate() {
            pairs.push(((a - b).norm(), i, j));
        }
    }
    pairs.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)).then(x.2.cmp(&y.2)));
    let mut assigned = vec![usize::MAX; prev.len()];
    let mut taken = vec![false; next.len()];
    let mut worst: f64 = 0.0;
    let mut left = prev.len().min(next.len());
    for (d, i, j) in pairs {
        if left == 0 {
            break;
        }
        if assigned[i] == usize::MAX && !taken[j] {
            assigned[i] = j;
            taken[j] = true;
            worst = worst.max(d);
            left -= 1;
        }
    }
    (assigned, worst)
}

/// Inserts midpoints between neighbours whose eigenvalues jump by more than
/// [`MAX_MATCH_DISTANCE`], up to [`MAX_REFINEMENTS`] halvings.
fn refine(points: &mut Vec<(f64, SpectrumReport)>, settings: &SweepSettings) -> Result<()> {
    for _ in 0..MAX_REFINEMENTS {
        let mids: Vec<f64> = points
            .windows(2)
            .filter(|w| {
                let (_, d) = greedy_match(&w[0].1.constrained_values(), &w[1].1.constrained_values());
                d > MAX_MATCH_DISTANCE
            })
            .map(|w| 0.5 * (w[0].0 + w[1].0))
            .collect();
        if mids.is_empty() {
            break;
        }
        debug!("refining sweep at {} midpoints", mids.len());
        points.extend(compute_points(&mids, settings)?);
        points.sort_by(|a, b| a.0.total_cmp(&b.0));
    }
    Ok(())
}

fn build_tracks(points: &[(f64, SpectrumReport)]) -> Vec<Track> {
    let Some((c0, first)) = points.first() else {
        return Vec::new();
    };
    let mut start = first.constrained_values();
    start.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
    let mut tracks: Vec<Track> = start
        .iter()
        .enumerate()
        .map(|(id, &z)| Track {
            id,
            points: vec![(*c0, z)],
        })
        .collect();
    for (c, report) in &points[1..] {
        let prev: Vec<Complex64> = tracks.iter().map(|t| t.points.last().expect("non-empty").1).collect();
        let next = report.constrained_values();
        let (assigned, _) = greedy_match(&prev, &next);
        for (track, j) in tracks.iter_mut().zip(assigned) {
            if j != usize::MAX {
                track.points.push((*c, next[j]));
            }
        }
    }
    tracks
}

/// Bisects `[lo, hi]` for the first speed where `indicator` holds, given that
/// it fails at `lo` and holds at `hi`.
fn bisect_event(
    mut lo: f64,
    mut hi: f64,
    settings: &SweepSettings,
    indicator: impl Fn(&SpectrumReport) -> bool,
) -> Result<f64> {
    while hi - lo > EVENT_TOL {
        let mid = 0.5 * (lo + hi);
        if indicator(&point_spectrum(mid, settings)?) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

fn locate_event(
    points: &[(f64, SpectrumReport)],
    settings: &SweepSettings,
    indicator: impl Fn(&SpectrumReport) -> bool + Copy,
) -> Result<Option<f64>> {
    let Some(first) = points.iter().position(|(_, r)| indicator(r)) else {
        return Ok(None);
    };
    if first == 0 {
        return Ok(Some(points[0].0));
    }
    bisect_event(points[first - 1].0, points[first].0, settings, indicator).map(Some)
}

/// Spectra over a list of speeds, with continuity-ordered tracks and the
/// transition speeds.
pub fn sweep(c_values: &[f64], settings: &SweepSettings) -> Result<SweepResult> {
    init_eigensolver();
    if c_values.is_empty() {
        return Err(Error::EmptyRange);
    }
    let mut cs = c_values.to_vec();
    cs.sort_by(f64::total_cmp);
    cs.dedup();
    let mut points = compute_points(&cs, settings)?;
    refine(&mut points, settings)?;
    let tracks = build_tracks(&points);
    let events = SweepEvents {
        c_star: locate_event(&points, settings, |r| r.complex_count() > 0)?,
        c_2star: locate_event(&points, settings, |r| r.real_above(2.0) >= 1)?,
        c_3star: locate_event(&points, settings, |r| r.real_above(2.0) >= 2)?,
    };
    Ok(SweepResult {
        settings: *settings,
        points,
        tracks,
        events,
    })
}

/// Evenly spaced speeds `c_min, c_min + Δc, …` up to `c_max` (inclusive
/// within round-off).
pub fn speed_range(c_min: f64, c_max: f64, step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0) || !(c_max >= c_min) || !c_min.is_finite() || !c_max.is_finite() {
        return Err(Error::EmptyRange);
    }
    let count = ((c_max - c_min) / step + 1e-9).floor() as usize;
    Ok((0..=count).map(|i| c_min + step * i as f64).collect())
}

/// `max |1 - λ|` over the non-real constrained eigenvalues at every sweep
/// point that has any.
pub fn complex_pair_margin(result: &SweepResult) -> Result<Vec<(f64, f64)>> {
    let margins: Vec<(f64, f64)> = result
        .points
        .iter()
        .filter_map(|(c, r)| {
            r.constrained
                .iter()
                .filter(|e| !e.is_real())
                .map(|e| (1.0 - e.value).norm())
                .reduce(f64::max)
                .map(|m| (*c, m))
        })
        .collect();
    if margins.is_empty() {
        return Err(Error::NoComplexTrack);
    }
    Ok(margins)
}

/// Symbol of `L` on mode `n` for the given form, exposed for callers that
/// tabulate the diagonal directly.
pub fn l_symbol(c: f64, alpha: f64, convention: Convention, n: i64) -> f64 {
    match convention {
        Convention::Phi => -c + abs_pow(n, alpha),
        Convention::Psi => c + abs_pow(n, alpha),
    }
}
