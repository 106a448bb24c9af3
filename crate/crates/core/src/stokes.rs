//! Small-amplitude (Stokes) expansion of the φ-form wave bifurcating from
//! `c = 1`, the critical exponents, and the leading-order eigenvalues of the
//! generalized eigenvalue problem `H v = λ L v` near that bifurcation.
//!
//! With `t = 2^α - 1`, `s = 3^α - 1`, `q = 4^α - 1`:
//!
//! ```text
//! φ = a cos x + a² φ₂ + a³ φ₃ + a⁴ φ₄ + O(a⁵),   c = 1 + c₂ a² + c₄ a⁴ + O(a⁶)
//! φ₂ = -1/2 + cos 2x / (2t)
//! φ₃ = cos 3x / (2ts)
//! φ₄ = 1/4 - 1/(4t) - 1/(8t²) + (2/s - 1/t) cos 2x / (4t²) + (4/s + 1/t) cos 4x / (8tq)
//! c₂ = 1 - 1/(2t)
//! c₄ = -1/2 + 1/(2t) + 1/(4t²) + 1/(4t³) - 3/(4t²s)
//! ```

use std::collections::BTreeMap;

use log::warn;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::exact::{Convention, Provenance, WaveSolution};
use crate::spectral::{Field, SpectralGrid};

/// Amplitudes above this trigger a warning in [`stokes_wave`].
pub const ADVISORY_AMPLITUDE: f64 = 0.5;

/// `(α₀, α₁) = (log 3/log 2 - 1, log 5/log 2 - 1)`.
pub fn alpha_criticals() -> (f64, f64) {
    (3f64.log2() - 1.0, 5f64.log2() - 1.0)
}

/// Finite cosine series `Σ_m a_m cos(m x)`.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct CosineSeries(BTreeMap<u32, f64>);

impl CosineSeries {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, mode: u32, amplitude: f64) -> Self {
        *self.0.entry(mode).or_insert(0.0) += amplitude;
        self
    }

    pub fn amplitude(&self, mode: u32) -> f64 {
        self.0.get(&mode).copied().unwrap_or(0.0)
    }

    pub fn terms(&self) -> impl Iterator<Item = (u32, f64)> + '_ {
        self.0.iter().map(|(&m, &a)| (m, a))
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.terms().map(|(m, a)| a * (m as f64 * x).cos()).sum()
    }

    pub fn sample(&self, grid: &SpectralGrid) -> Field {
        Field::from_fn(grid, |x| self.eval(x))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StokesCoefficients {
    pub alpha: f64,
    pub c2: f64,
    pub c4: f64,
    pub phi2: CosineSeries,
    pub phi3: CosineSeries,
    pub phi4: CosineSeries,
}

impl StokesCoefficients {
    pub fn new(alpha: f64) -> Self {
        let t = 2f64.powf(alpha) - 1.0;
        let s = 3f64.powf(alpha) - 1.0;
        let q = 4f64.powf(alpha) - 1.0;
        let phi2 = CosineSeries::new().with(0, -0.5).with(2, 1.0 / (2.0 * t));
        let phi3 = CosineSeries::new().with(3, 1.0 / (2.0 * t * s));
        let phi4 = CosineSeries::new()
            .with(0, 0.25 - 1.0 / (4.0 * t) - 1.0 / (8.0 * t * t))
            .with(2, (2.0 / s - 1.0 / t) / (4.0 * t * t))
            .with(4, (4.0 / s + 1.0 / t) / (8.0 * t * q));
        Self {
            alpha,
            c2: 1.0 - 1.0 / (2.0 * t),
            c4: -0.5 + 1.0 / (2.0 * t) + 1.0 / (4.0 * t * t) + 1.0 / (4.0 * t.powi(3))
                - 3.0 / (4.0 * t * t * s),
            phi2,
            phi3,
            phi4,
        }
    }

    /// Speed of the expansion truncated at `order` in the amplitude.
    pub fn speed(&self, a: f64, order: u32) -> f64 {
        let mut c = 1.0;
        if order >= 2 {
            c += self.c2 * a * a;
        }
        if order >= 4 {
            c += self.c4 * a.powi(4);
        }
        c
    }

    /// Profile coefficients of the expansion truncated at `order`.
    pub fn profile(&self, a: f64, order: u32) -> CosineSeries {
        let mut series = CosineSeries::new().with(1, a);
        let corrections = [(2, &self.phi2), (3, &self.phi3), (4, &self.phi4)];
        for (k, phi) in corrections {
            if order >= k {
                let scale = a.powi(k as i32);
                for (m, amp) in phi.terms() {
                    series = series.with(m, scale * amp);
                }
            }
        }
        series
    }
}

/// φ-form Stokes wave of amplitude `a`, truncated at `order` (1 to 4).
pub fn stokes_wave(a: f64, alpha: f64, grid: &SpectralGrid, order: u32) -> Result<WaveSolution> {
    if !(1..=4).contains(&order) {
        return Err(Error::InvalidConfig(format!("Stokes order must be 1..=4 (got {order})")));
    }
    if a.abs() > ADVISORY_AMPLITUDE {
        warn!("Stokes amplitude {a} exceeds {ADVISORY_AMPLITUDE}; expansion may be inaccurate");
    }
    let coeffs = StokesCoefficients::new(alpha);
    Ok(WaveSolution {
        profile: coeffs.profile(a, order).sample(grid),
        c: coeffs.speed(a, order),
        alpha,
        convention: Convention::Phi,
        provenance: Provenance::Stokes,
    })
}

fn check_pole(alpha: f64) -> Result<()> {
    if (alpha - alpha_criticals().0).abs() < 1e-9 {
        Err(Error::PoleAtAlpha0(alpha))
    } else {
        Ok(())
    }
}

/// `Λ₂ = -1 + 3/(2^α - 1) - 7/(2^{α+1} - 3)`, the a² correction of the
/// even eigenvalue that starts at 2.
pub fn lambda2_coefficient(alpha: f64) -> Result<f64> {
    check_pole(alpha)?;
    let p = 2f64.powf(alpha);
    Ok(-1.0 + 3.0 / (p - 1.0) - 7.0 / (2.0 * p - 3.0))
}

/// Limit of the odd eigenvalue λ₁ as a → 0.
pub fn lambda1_limit(alpha: f64) -> Result<f64> {
    check_pole(alpha)?;
    let p = 2.0 * 2f64.powf(alpha);
    Ok((p - 5.0) / (p - 3.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Parity {
    Even,
    Odd,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PredictedEigenvalue {
    pub label: &'static str,
    pub parity: Parity,
    pub value: f64,
}

/// The four distinguished eigenvalues of `H v = λ L v` for a small wave:
/// -1 and 0 exactly, λ₁ to leading order, and λ₂ = 2 + Λ₂a².
pub fn predicted_gep_eigenvalues(a: f64, alpha: f64) -> Result<Vec<PredictedEigenvalue>> {
    Ok(vec![
        PredictedEigenvalue {
            label: "minus_one",
            parity: Parity::Even,
            value: -1.0,
        },
        PredictedEigenvalue {
            label: "zero",
            parity: Parity::Odd,
            value: 0.0,
        },
        PredictedEigenvalue {
            label: "lambda1",
            parity: Parity::Odd,
            value: lambda1_limit(alpha)?,
        },
        PredictedEigenvalue {
            label: "lambda2",
            parity: Parity::Even,
            value: 2.0 + lambda2_coefficient(alpha)? * a * a,
        },
    ])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::ode_residual;
    use proptest::prelude::*;

    /// Product of two cosine series, by cos m x cos n x = (cos(m+n)x + cos(m-n)x)/2.
    fn product(f: &CosineSeries, g: &CosineSeries) -> CosineSeries {
        let mut out = CosineSeries::new();
        for (m, a) in f.terms() {
            for (n, b) in g.terms() {
                out = out.with(m + n, 0.5 * a * b).with(m.abs_diff(n), 0.5 * a * b);
            }
        }
        out
    }

    fn sum(parts: &[(f64, &CosineSeries)]) -> CosineSeries {
        let mut out = CosineSeries::new();
        for (w, s) in parts {
            for (m, a) in s.terms() {
                out = out.with(m, w * a);
            }
        }
        out
    }

    /// `(1 + D_α)` on a cosine series.
    fn one_plus_d(f: &CosineSeries, alpha: f64) -> CosineSeries {
        let mut out = CosineSeries::new();
        for (m, a) in f.terms() {
            out = out.with(m, (1.0 - (m as f64).powf(alpha)) * a);
        }
        out
    }

    fn max_amp(f: &CosineSeries) -> f64 {
        f.terms().fold(0.0, |acc, (_, a)| acc.max(a.abs()))
    }

    fn check_hierarchy(alpha: f64) {
        let s = StokesCoefficients::new(alpha);
        let phi1 = CosineSeries::new().with(1, 1.0);
        let o2 = sum(&[(1.0, &one_plus_d(&s.phi2, alpha)), (1.0, &product(&phi1, &phi1))]);
        assert!(max_amp(&o2) < 1e-12, "O(a^2) at alpha={alpha}");
        let o3 = sum(&[
            (1.0, &one_plus_d(&s.phi3, alpha)),
            (s.c2, &phi1),
            (2.0, &product(&phi1, &s.phi2)),
        ]);
        assert!(max_amp(&o3) < 1e-12, "O(a^3) at alpha={alpha}");
        let o4 = sum(&[
            (1.0, &one_plus_d(&s.phi4, alpha)),
            (s.c2, &s.phi2),
            (2.0, &product(&phi1, &s.phi3)),
            (1.0, &product(&s.phi2, &s.phi2)),
        ]);
        assert!(max_amp(&o4) < 1e-12, "O(a^4) at alpha={alpha}");
        // solvability at O(a^5): the cos x component of the forcing vanishes
        let o5 = sum(&[
            (s.c2, &s.phi3),
            (s.c4, &phi1),
            (2.0, &product(&phi1, &s.phi4)),
            (2.0, &product(&s.phi2, &s.phi3)),
        ]);
        assert!(o5.amplitude(1).abs() < 1e-12, "O(a^5) at alpha={alpha}");
        // corrections are orthogonal to cos x
        for phi in [&s.phi2, &s.phi3, &s.phi4] {
            assert_eq!(phi.amplitude(1), 0.0);
        }
    }

    #[test]
    fn hierarchy_is_solved() {
        for alpha in [0.7, 0.8, 1.0, 1.3, 1.5, 2.0] {
            check_hierarchy(alpha);
        }
    }

    #[test]
    fn criticals() {
        let (a0, a1) = alpha_criticals();
        assert!((a0 - 0.584_962_500_7).abs() < 1e-10);
        assert!((a1 - 1.321_928_094_9).abs() < 1e-10);
        assert!(0.5 < a0 && a0 < 1.0 && 1.0 < a1 && a1 < 2.0);
    }

    #[test]
    fn known_coefficients() {
        let s = StokesCoefficients::new(2.0);
        assert!((s.c2 - 5.0 / 6.0).abs() < 1e-15);
        assert!((s.phi2.amplitude(0) + 0.5).abs() < 1e-15);
        assert!((s.phi2.amplitude(2) - 1.0 / 6.0).abs() < 1e-15);
        assert!((s.phi3.amplitude(3) - 1.0 / 48.0).abs() < 1e-15);
    }

    #[test]
    fn c2_changes_sign_at_alpha0() {
        let (a0, _) = alpha_criticals();
        assert!(StokesCoefficients::new(a0 - 0.01).c2 < 0.0);
        assert!(StokesCoefficients::new(a0 + 0.01).c2 > 0.0);
        assert!(StokesCoefficients::new(a0).c2.abs() < 1e-14);
    }

    #[test]
    fn lambda_coefficients() {
        assert!((lambda2_coefficient(2.0).unwrap() + 1.4).abs() < 1e-14);
        assert!((lambda2_coefficient(1.0).unwrap() + 5.0).abs() < 1e-14);
        for alpha in [0.7, 1.0, 1.5, 2.0] {
            assert!(lambda2_coefficient(alpha).unwrap() < 0.0);
        }
        let (a0, a1) = alpha_criticals();
        assert!(matches!(lambda2_coefficient(a0), Err(Error::PoleAtAlpha0(_))));
        assert!((lambda1_limit(2.0).unwrap() - 0.6).abs() < 1e-15);
        assert!((lambda1_limit(1.0).unwrap() + 1.0).abs() < 1e-15);
        // λ₁ limit crosses zero at α₁
        assert!(lambda1_limit(a1).unwrap().abs() < 1e-14);
    }

    #[test]
    fn predicted_at_zero_amplitude() {
        let p = predicted_gep_eigenvalues(0.0, 2.0).unwrap();
        let values: Vec<f64> = p.iter().map(|e| e.value).collect();
        assert_eq!(values[0], -1.0);
        assert_eq!(values[1], 0.0);
        assert!((values[2] - 0.6).abs() < 1e-15);
        assert_eq!(values[3], 2.0);
        let p = predicted_gep_eigenvalues(0.1, 2.0).unwrap();
        assert!((p[3].value - (2.0 - 1.4 * 0.01)).abs() < 1e-14);
    }

    #[test]
    fn zero_amplitude_wave() {
        let g = SpectralGrid::new(64).unwrap();
        for alpha in [0.8, 1.0, 2.0] {
            let w = stokes_wave(0.0, alpha, &g, 4).unwrap();
            assert_eq!(w.c, 1.0);
            assert_eq!(w.profile.sup_norm(), 0.0);
        }
        assert!(stokes_wave(0.1, 2.0, &g, 5).is_err());
    }

    fn residual(a: f64, alpha: f64, order: u32) -> f64 {
        let g = SpectralGrid::new(32).unwrap();
        let w = stokes_wave(a, alpha, &g, order).unwrap();
        ode_residual(&w.profile, &w.symbol_spec())
    }

    #[test]
    fn residual_scales_with_order() {
        // at α = 2 the a⁶ term of the residual is ~15a times the a⁵ term, so
        // the fit needs amplitudes well below 0.1 to see the leading power
        for alpha in [0.8, 1.0, 1.5, 2.0] {
            for order in 1..=4u32 {
                let r: Vec<f64> = [0.04, 0.02, 0.01].iter().map(|&a| residual(a, alpha, order)).collect();
                let slope = (r[0] / r[2]).ln() / 4f64.ln();
                let expected = (order + 1) as f64;
                assert!(
                    (slope - expected).abs() <= 0.3,
                    "alpha={alpha} order={order} slope={slope}"
                );
            }
        }
        let r = residual(0.1, 2.0, 4);
        assert!(r < 1e-5 && r > 1e-8, "{r}");
        let ratio = residual(0.1, 2.0, 4) / residual(0.05, 2.0, 4);
        assert!(ratio > 2f64.powf(4.7) && ratio < 64.0, "{ratio}");
    }

    proptest! {
        #[test]
        fn hierarchy_holds_for_any_alpha(alpha in 0.6..2.5f64) {
            check_hierarchy(alpha);
        }
    }
}
