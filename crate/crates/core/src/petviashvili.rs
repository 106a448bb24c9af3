//! Petviashvili iteration for `L u = u²`:
//!
//! ```text
//! M(w) = ⟨L w, w⟩ / ⟨w², w⟩,     w_{n+1} = M(w_n)² L⁻¹(w_n²)
//! ```
//!
//! with `L = -c - D_α` (classical, iterating φ) or `L = c - D_α` (shifted,
//! iterating ψ = c + φ).

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exact::{Convention, Provenance, WaveSolution};
use crate::spectral::{invert_operator, Field, SpectralGrid, SymbolSpec, Variant};
use crate::stokes::StokesCoefficients;

/// Relative guard on the quotient denominator: `|∫w³| ≤ TOL_DENOM · ‖w‖_∞³`
/// is treated as zero.
pub const TOL_DENOM: f64 = 1e-10;

/// Quotient magnitude treated as a runaway.
pub const BLOWUP_THRESHOLD: f64 = 1e6;

/// First iteration index at which two-cycles are looked for.
pub const TWO_CYCLE_START: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterationConfig {
    pub variant: Variant,
    pub c: f64,
    pub alpha: f64,
    pub max_iter: usize,
    pub tol_residual: f64,
    pub tol_step: f64,
}

impl IterationConfig {
    pub fn new(variant: Variant, c: f64, alpha: f64) -> Self {
        Self {
            variant,
            c,
            alpha,
            max_iter: 500,
            tol_residual: 1e-12,
            tol_step: 1e-13,
        }
    }

    pub fn with_max_iter(mut self, max_iter: usize) -> Self {
        self.max_iter = max_iter;
        self
    }

    pub fn with_tol_residual(mut self, tol: f64) -> Self {
        self.tol_residual = tol;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_iter < 1 {
            return Err(Error::InvalidConfig("max_iter must be at least 1".into()));
        }
        if !(self.tol_residual > 0.0) || !(self.tol_step > 0.0) {
            return Err(Error::InvalidConfig("tolerances must be positive".into()));
        }
        SymbolSpec::new(self.alpha, self.c, self.variant).map(|_| ())
    }

    pub fn symbol_spec(&self) -> SymbolSpec {
        SymbolSpec {
            alpha: self.alpha,
            c: self.c,
            variant: self.variant,
        }
    }
}

/// Diagnostics of one iteration `w_n ↦ w_{n+1}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepDiag {
    pub n: usize,
    /// `M(w_n)`
    pub m_n: f64,
    /// `|1 - M(w_n)|`
    pub one_minus_m: f64,
    /// `‖w_{n+1} - w_n‖_∞`
    pub step_inf: f64,
    /// `‖L w_{n+1} - w_{n+1}²‖_∞`
    pub residual_inf: f64,
    /// Crest position of `w_{n+1}` on [-π, π), from the phase of its first
    /// Fourier mode.
    pub crest: f64,
    /// Grid index of the maximum of `w_{n+1}`.
    pub argmax: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Converged,
    MaxIterExceeded,
    TwoCycle,
    QuotientBlowup,
}

impl Verdict {
    pub fn is_converged(self) -> bool {
        self == Verdict::Converged
    }
}

#[derive(Debug, Clone)]
pub struct IterationReport {
    pub config: IterationConfig,
    pub steps: Vec<StepDiag>,
    pub verdict: Verdict,
    pub final_field: Field,
    /// The two alternating iterates when a two-cycle was detected.
    pub cycle_pair: Option<(Field, Field)>,
    /// Quotient at the even steps of a detected two-cycle.
    pub m_limit: Option<f64>,
}

impl IterationReport {
    pub fn iterations(&self) -> usize {
        self.steps.len()
    }

    pub fn last(&self) -> Option<&StepDiag> {
        self.steps.last()
    }

    pub fn final_residual(&self) -> f64 {
        self.last().map_or(f64::NAN, |s| s.residual_inf)
    }

    /// Number of steps until the residual first drops to `tol`.
    pub fn iterations_to(&self, tol: f64) -> Option<usize> {
        self.steps.iter().position(|s| s.residual_inf <= tol).map(|i| i + 1)
    }

    /// The final iterate as a wave in the form matching the variant.
    pub fn wave(&self) -> WaveSolution {
        WaveSolution {
            profile: self.final_field.clone(),
            c: self.config.c,
            alpha: self.config.alpha,
            convention: Convention::of_variant(self.config.variant),
            provenance: Provenance::Iterated,
        }
    }
}

/// `2π Σ_n σ(n) |ŵ_n|²`, which equals the rectangle rule for `⟨L w, w⟩`.
fn operator_form(w: &Field, spec: &SymbolSpec) -> f64 {
    let grid = w.grid();
    let sum: f64 = w
        .coefficients()
        .iter()
        .enumerate()
        .map(|(k, c)| spec.symbol(grid.mode_of_index(k)) * c.norm_sqr())
        .sum();
    2.0 * PI * sum
}

/// The Petviashvili quotient `⟨L w, w⟩ / ⟨w², w⟩`.
pub fn quotient(w: &Field, cfg: &IterationConfig) -> Result<f64> {
    let cubic = w.map(|s| s * s * s).integral();
    let threshold = TOL_DENOM * w.sup_norm().powi(3);
    if !(cubic.abs() > threshold) {
        return Err(Error::VanishingDenominator {
            value: cubic.abs(),
            threshold,
        });
    }
    Ok(operator_form(w, &cfg.symbol_spec()) / cubic)
}

/// One iteration `M(w)² L⁻¹(w²)`.
pub fn step(w: &Field, cfg: &IterationConfig) -> Result<Field> {
    let spec = cfg.symbol_spec();
    spec.check_invertible(w.grid())?;
    let m = quotient(w, cfg)?;
    Ok(invert_operator(&w.squared(), &spec)?.scaled(m * m))
}

fn crest_position(w: &Field) -> f64 {
    let c1 = w.coefficients()[1];
    // w ≈ ĉ₀ + 2|ĉ₁| cos(x - x₀) with ĉ₁ = |ĉ₁| e^{-i x₀}
    -c1.arg()
}

/// Iterates from `w0` until convergence, a two-cycle, quotient blow-up or
/// `max_iter` steps.
pub fn run(w0: &Field, cfg: &IterationConfig) -> Result<IterationReport> {
    cfg.validate()?;
    let spec = cfg.symbol_spec();
    spec.check_invertible(w0.grid())?;

    let mut steps = Vec::with_capacity(cfg.max_iter);
    let mut previous: Option<Field> = None;
    let mut w = w0.clone();
    let mut verdict = Verdict::MaxIterExceeded;
    let mut cycle_pair = None;
    let mut m_limit = None;

    for n in 0..cfg.max_iter {
        let m = quotient(&w, cfg)?;
        if !m.is_finite() || m.abs() > BLOWUP_THRESHOLD {
            steps.push(StepDiag {
                n,
                m_n: m,
                one_minus_m: (1.0 - m).abs(),
                step_inf: f64::NAN,
                residual_inf: f64::NAN,
                crest: f64::NAN,
                argmax: w.argmax(),
            });
            verdict = Verdict::QuotientBlowup;
            break;
        }
        let square = w.squared();
        let next = invert_operator(&square, &spec)?.scaled(m * m);
        // L w_{n+1} = M² w_n² exactly, which avoids amplifying round-off by
        // the largest symbol when the residual is formed
        let residual = square.scaled(m * m).max_abs_diff(&next.squared());
        let diag = StepDiag {
            n,
            m_n: m,
            one_minus_m: (1.0 - m).abs(),
            step_inf: next.max_abs_diff(&w),
            residual_inf: residual,
            crest: crest_position(&next),
            argmax: next.argmax(),
        };
        steps.push(diag);

        if residual <= cfg.tol_residual {
            verdict = Verdict::Converged;
            w = next;
            break;
        }
        if n >= TWO_CYCLE_START {
            if let Some(prev) = &previous {
                let return_distance = next.max_abs_diff(prev);
                if return_distance <= cfg.tol_step && diag.step_inf > 100.0 * cfg.tol_step {
                    verdict = Verdict::TwoCycle;
                    let (even, odd) = if n % 2 == 0 { (&w, &next) } else { (&next, &w) };
                    m_limit = Some(quotient(even, cfg)?);
                    cycle_pair = Some((even.clone(), odd.clone()));
                    w = next;
                    break;
                }
            }
        }
        previous = Some(std::mem::replace(&mut w, next));
    }

    Ok(IterationReport {
        config: *cfg,
        steps,
        verdict,
        final_field: w,
        cycle_pair,
        m_limit,
    })
}

/// Classical starting guess. For α = 2 and α = 1 these are
/// `a cos x + a²(cos 2x - 3)/2 + ε sin x` and `a cos x + a²(cos 2x - 1)/2 + ε sin x`;
/// other α use the Stokes correction `a cos x + a² φ₂ + ε sin x`.
pub fn initial_guess_classical(a: f64, eps: f64, alpha: f64, grid: &SpectralGrid) -> Field {
    let (mean, second) = if alpha == 2.0 {
        (-1.5, 0.5)
    } else if alpha == 1.0 {
        (-0.5, 0.5)
    } else {
        let phi2 = StokesCoefficients::new(alpha).phi2;
        (phi2.amplitude(0), phi2.amplitude(2))
    };
    let a2 = a * a;
    Field::from_fn(grid, |x| {
        a * x.cos() + a2 * (mean + second * (2.0 * x).cos()) + eps * x.sin()
    })
}

/// Shifted starting guess `c + a cos x`.
pub fn initial_guess_shifted(a: f64, c: f64, grid: &SpectralGrid) -> Field {
    Field::from_fn(grid, |x| c + a * x.cos())
}
