//! Closed-form periodic waves (KdV cnoidal, Benjamin-Ono), the shift between
//! the φ and ψ forms of the wave equation, and the integrals ∫φ³ and ∫φφ′².
//!
//! A φ-form wave solves `(c + D_α)φ + φ² = 0`; the ψ-form `ψ = c + φ` solves
//! `(c - D_α)ψ = ψ²`.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::special::{ellip_k, jacobi_cn, EllipticModulus, MAX_MODULUS};
use crate::spectral::{apply_operator, Field, SpectralGrid, SymbolSpec, Variant};

/// Which form of the wave equation a profile solves.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Convention {
    /// `(c + D_α)φ + φ² = 0`
    Phi,
    /// `(c - D_α)ψ = ψ²`
    Psi,
}

impl Convention {
    /// The operator whose equation `L u = u²` this form solves.
    pub fn variant(self) -> Variant {
        match self {
            Convention::Phi => Variant::Classical,
            Convention::Psi => Variant::Shifted,
        }
    }

    pub fn of_variant(variant: Variant) -> Self {
        match variant {
            Variant::Classical => Convention::Phi,
            Variant::Shifted => Convention::Psi,
        }
    }
}

impl fmt::Display for Convention {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Convention::Phi => f.write_str("phi"),
            Convention::Psi => f.write_str("psi"),
        }
    }
}

/// Where a wave profile came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    ExactKdV,
    ExactBO,
    Stokes,
    Iterated,
}

#[derive(Debug, Clone)]
pub struct WaveSolution {
    pub profile: Field,
    pub c: f64,
    pub alpha: f64,
    pub convention: Convention,
    pub provenance: Provenance,
}

impl WaveSolution {
    pub fn symbol_spec(&self) -> SymbolSpec {
        SymbolSpec {
            alpha: self.alpha,
            c: self.c,
            variant: self.convention.variant(),
        }
    }

    /// Sup-norm residual of the wave equation in this wave's own form.
    pub fn residual(&self) -> f64 {
        ode_residual(&self.profile, &self.symbol_spec())
    }

    /// The same wave expressed in `convention`.
    pub fn to_convention(&self, convention: Convention) -> WaveSolution {
        if convention == self.convention {
            self.clone()
        } else {
            shift_convention(self)
        }
    }

    pub fn grid(&self) -> &SpectralGrid {
        self.profile.grid()
    }
}

/// `‖L u - u²‖_∞` for the operator `L` of `spec`. For the classical operator
/// this is `‖(c + D_α)u + u²‖_∞`, for the shifted one `‖(c - D_α)u - u²‖_∞`.
pub fn ode_residual(u: &Field, spec: &SymbolSpec) -> f64 {
    apply_operator(u, spec).max_abs_diff(&u.squared())
}

/// Speed of the cnoidal wave with modulus `k`.
pub fn kdv_speed(k: EllipticModulus) -> f64 {
    let kk = ellip_k(k);
    let k2 = k.k() * k.k();
    4.0 * kk * kk / (std::f64::consts::PI.powi(2)) * (1.0 - k2 + k2 * k2).sqrt()
}

/// The KdV (α = 2) cnoidal wave in the φ form.
pub fn kdv_cnoidal(k: EllipticModulus, grid: &SpectralGrid) -> WaveSolution {
    let kk = ellip_k(k);
    let k2 = k.k() * k.k();
    let scale = 2.0 * kk * kk / std::f64::consts::PI.powi(2);
    let root = (1.0 - k2 + k2 * k2).sqrt();
    let base = 1.0 - 2.0 * k2 - root;
    let profile = Field::from_fn(grid, |x| {
        let cn = jacobi_cn(kk * x / std::f64::consts::PI, k);
        scale * (base + 3.0 * k2 * cn * cn)
    });
    WaveSolution {
        profile,
        c: 2.0 * scale * root,
        alpha: 2.0,
        convention: Convention::Phi,
        provenance: Provenance::ExactKdV,
    }
}

/// Inverts the speed map `k ↦ c(k)` by bisection.
pub fn kdv_k_from_c(c: f64) -> Result<EllipticModulus> {
    let top = EllipticModulus::new(MAX_MODULUS)?;
    if !(c > 1.0) || c > kdv_speed(top) {
        return Err(Error::SpeedOutOfRange(c));
    }
    let (mut lo, mut hi) = (0.0, MAX_MODULUS);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if kdv_speed(EllipticModulus::new(mid)?) < c {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let k_lo = EllipticModulus::new(lo)?;
    let k_hi = EllipticModulus::new(hi)?;
    if (kdv_speed(k_lo) - c).abs() <= (kdv_speed(k_hi) - c).abs() {
        Ok(k_lo)
    } else {
        Ok(k_hi)
    }
}

/// `γ = artanh(1/c)` in logarithmic form.
pub fn bo_gamma(c: f64) -> f64 {
    0.5 * ((c + 1.0) / (c - 1.0)).ln()
}

/// The Benjamin-Ono (α = 1) wave in the φ form.
pub fn bo_wave(c: f64, grid: &SpectralGrid) -> Result<WaveSolution> {
    if !(c > 1.0) || !c.is_finite() {
        return Err(Error::SpeedOutOfRange(c));
    }
    let gamma = bo_gamma(c);
    let (sh, ch) = (gamma.sinh(), gamma.cosh());
    let profile = Field::from_fn(grid, |x| (ch * x.cos() - 1.0) / (sh * (ch - x.cos())));
    Ok(WaveSolution {
        profile,
        c,
        alpha: 1.0,
        convention: Convention::Phi,
        provenance: Provenance::ExactBO,
    })
}

/// Toggles between the φ and ψ forms via `ψ = c + φ`.
pub fn shift_convention(w: &WaveSolution) -> WaveSolution {
    let (profile, convention) = match w.convention {
        Convention::Phi => (w.profile.offset(w.c), Convention::Psi),
        Convention::Psi => (w.profile.offset(-w.c), Convention::Phi),
    };
    WaveSolution {
        profile,
        convention,
        ..w.clone()
    }
}

fn phi_profile(w: &WaveSolution) -> Field {
    w.to_convention(Convention::Phi).profile
}

/// `∫ φ³ dx` of the φ form of `w`.
pub fn cubic_integral(w: &WaveSolution) -> f64 {
    phi_profile(w).map(|s| s * s * s).integral()
}

/// `∫ φ (φ′)² dx` of the φ form of `w`, with φ′ taken spectrally.
pub fn gradient_integral(w: &WaveSolution) -> f64 {
    let phi = phi_profile(w);
    let d = phi.derivative();
    let samples = phi
        .samples()
        .iter()
        .zip(d.samples())
        .map(|(p, q)| p * q * q)
        .collect();
    Field::new(phi.grid(), samples)
        .expect("same grid")
        .integral()
}

/// Closed-form wave at speed `c` for α = 2 (cnoidal) or α = 1 (Benjamin-Ono),
/// in the requested form.
pub fn exact_wave(c: f64, alpha: f64, convention: Convention, grid: &SpectralGrid) -> Result<WaveSolution> {
    let phi = if alpha == 2.0 {
        kdv_cnoidal(kdv_k_from_c(c)?, grid)
    } else if alpha == 1.0 {
        bo_wave(c, grid)?
    } else {
        return Err(Error::NoClosedForm(alpha));
    };
    Ok(phi.to_convention(convention))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn grid() -> SpectralGrid {
        SpectralGrid::new(256).unwrap()
    }

    fn m(k: f64) -> EllipticModulus {
        EllipticModulus::new(k).unwrap()
    }

    #[test]
    fn cnoidal_zero_amplitude_limit() {
        let w = kdv_cnoidal(m(0.0), &grid());
        assert!((w.c - 1.0).abs() < 1e-15);
        assert!(w.profile.sup_norm() < 1e-15);
        let w = kdv_cnoidal(m(1e-4), &grid());
        assert!((w.c - 1.0).abs() < 1e-7);
        assert!(w.profile.sup_norm() < 1e-7);
    }

    #[test]
    fn cnoidal_residuals() {
        for k in [0.3, 0.5, 0.8] {
            let w = kdv_cnoidal(m(k), &grid());
            assert!(w.residual() <= 1e-9, "k={k}: {}", w.residual());
            assert!(w.profile.odd_part_norm() < 1e-10);
        }
    }

    #[test]
    fn cnoidal_speed_increases() {
        let speeds: Vec<f64> = (1..=19).map(|i| kdv_speed(m(0.05 * i as f64))).collect();
        assert!(speeds.windows(2).all(|p| p[1] > p[0]));
        assert!(kdv_speed(m(0.9)) > kdv_speed(m(0.5)));
        assert!(speeds[0] > 1.0);
    }

    #[test]
    fn speed_inversion() {
        let k = kdv_k_from_c(3.0).unwrap();
        assert!((kdv_speed(k) - 3.0).abs() < 1e-12);
        // c - 1 grows like k⁴ near the bifurcation
        let k = kdv_k_from_c(1.0 + 1e-9).unwrap();
        assert!(k.k() > 0.0 && k.k() < 0.02);
        assert!((kdv_speed(k) - (1.0 + 1e-9)).abs() < 1e-12);
        assert_eq!(kdv_k_from_c(0.5).unwrap_err(), Error::SpeedOutOfRange(0.5));
        assert!(kdv_k_from_c(1.0).is_err());
        for c in [1.05, 1.5, 2.0, 2.3, 3.9, 7.0] {
            let k = kdv_k_from_c(c).unwrap();
            assert!((kdv_speed(k) - c).abs() < 1e-12, "c={c}");
        }
    }

    #[test]
    fn bo_residual_and_positivity() {
        for c in [1.1, 1.6, 2.0] {
            let w = bo_wave(c, &grid()).unwrap();
            assert!(w.residual() <= 1e-9, "c={c}: {}", w.residual());
            let psi = shift_convention(&w);
            assert!(psi.residual() <= 1e-9);
            // ψ(±π) = sinh γ / (cosh γ + 1) = tanh(γ/2)
            let gamma = bo_gamma(c);
            let min = psi.profile.samples().iter().copied().fold(f64::INFINITY, f64::min);
            assert!((min - (0.5 * gamma).tanh()).abs() < 1e-14);
            assert!(min > 0.0);
        }
        assert!(bo_wave(1.0, &grid()).is_err());
        assert!(bo_wave(0.5, &grid()).is_err());
    }

    #[test]
    fn bo_psi_closed_form() {
        let c = 1.6;
        let g = grid();
        let gamma = bo_gamma(c);
        let psi = shift_convention(&bo_wave(c, &g).unwrap());
        let closed = Field::from_fn(&g, |x| gamma.sinh() / (gamma.cosh() - x.cos()));
        assert!(psi.profile.max_abs_diff(&closed) < 1e-13);
        assert!((1.0 / gamma.tanh() - c).abs() < 1e-14);
    }

    #[test]
    fn bo_amplitude_vanishes_at_bifurcation() {
        // φ(0) = 1/sinh γ, so the amplitude shrinks as c decreases to 1
        let g = grid();
        let amps: Vec<f64> = [2.0, 1.5, 1.1, 1.01]
            .iter()
            .map(|&c| bo_wave(c, &g).unwrap().profile.sup_norm())
            .collect();
        assert!(amps.windows(2).all(|p| p[1] < p[0]));
        assert!(amps[3] < 0.2);
        let w = bo_wave(1.6, &g).unwrap();
        assert!((w.profile.samples()[128] - 1.0 / bo_gamma(1.6).sinh()).abs() < 1e-14);
    }

    #[test]
    fn bo_psi_trough_vanishes_at_high_speed() {
        // for c -> ∞, ψ -> 0 away from the crest
        let g = grid();
        let troughs: Vec<f64> = [2.0, 4.0, 8.0]
            .iter()
            .map(|&c| shift_convention(&bo_wave(c, &g).unwrap()).profile.samples()[0])
            .collect();
        assert!(troughs[0] > troughs[1] && troughs[1] > troughs[2]);
    }

    #[test]
    fn shift_examples() {
        let g = grid();
        let constant = WaveSolution {
            profile: Field::constant(&g, 2.5),
            c: 2.5,
            alpha: 1.5,
            convention: Convention::Psi,
            provenance: Provenance::Iterated,
        };
        let phi = shift_convention(&constant);
        assert_eq!(phi.convention, Convention::Phi);
        assert!(phi.profile.sup_norm() < 1e-15);

        let w = kdv_cnoidal(m(0.5), &g);
        let back = shift_convention(&shift_convention(&w));
        assert_eq!(back.convention, Convention::Phi);
        assert!(back.profile.max_abs_diff(&w.profile) < 1e-15);

        // ψ form of the cnoidal wave has the opposite sign on the square root
        let k = 0.5f64;
        let kk = ellip_k(m(k));
        let k2 = k * k;
        let closed = Field::from_fn(&g, |x| {
            let cn = jacobi_cn(kk * x / PI, m(k));
            2.0 * kk * kk / (PI * PI) * (1.0 - 2.0 * k2 + (1.0 - k2 + k2 * k2).sqrt() + 3.0 * k2 * cn * cn)
        });
        let psi = shift_convention(&w);
        assert!(psi.profile.max_abs_diff(&closed) < 1e-12);
        assert!(psi.residual() < 1e-9);
        assert!(psi.profile.samples().iter().all(|&v| v > 0.0));
    }

    #[test]
    fn bo_integrals_match_closed_forms() {
        let g = grid();
        let w = bo_wave(2.0, &g).unwrap();
        assert!((cubic_integral(&w) + 5.0 * PI).abs() < 1e-8 * 5.0 * PI);
        assert!((gradient_integral(&w) - 9.0 * PI / 4.0).abs() < 1e-8 * 9.0 * PI / 4.0);
        for c in [1.1, 1.5, 2.0, 3.0] {
            let w = bo_wave(c, &g).unwrap();
            let cubic = -PI * (c - 1.0).powi(2) * (2.0 * c + 1.0);
            let grad = PI * (c * c - 1.0).powi(2) / 4.0;
            assert!(((cubic_integral(&w) - cubic) / cubic).abs() < 1e-8, "c={c}");
            assert!(((gradient_integral(&w) - grad) / grad).abs() < 1e-8, "c={c}");
            // same integrals from the ψ form
            let psi = shift_convention(&w);
            assert!(((cubic_integral(&psi) - cubic) / cubic).abs() < 1e-8);
        }
    }

    #[test]
    fn kdv_integrals_are_negative() {
        let g = grid();
        for k in [0.1, 0.3, 0.5, 0.7, 0.9] {
            let w = kdv_cnoidal(m(k), &g);
            assert!(cubic_integral(&w) < 0.0, "k={k}");
            assert!(gradient_integral(&w) < 0.0, "k={k}");
        }
    }

    #[test]
    fn exact_wave_dispatch() {
        let g = grid();
        let w = exact_wave(3.0, 2.0, Convention::Psi, &g).unwrap();
        assert_eq!(w.convention, Convention::Psi);
        assert!((w.c - 3.0).abs() < 1e-12);
        assert!(w.residual() < 1e-9);
        let w = exact_wave(1.6, 1.0, Convention::Phi, &g).unwrap();
        assert_eq!(w.provenance, Provenance::ExactBO);
        assert_eq!(exact_wave(2.0, 1.5, Convention::Phi, &g).unwrap_err(), Error::NoClosedForm(1.5));
    }
}
