//! Named experiments. Each preset is fully described by its serialized
//! parameters, so `preset.json` in an output directory reruns it exactly.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use petlab::Variant;
use serde::{Deserialize, Serialize};

use crate::commands::{
    cmd_exact, cmd_solve, cmd_spectrum, cmd_stokes, cmd_sweep, ExactArgs, ExactParams, SolveArgs, SolveParams,
    SpectrumArgs, SpectrumParams, StokesArgs, StokesParams, SweepArgs, SweepParams, UsageError, WaveSource,
};
use crate::output::{ensure_dir, write_json};
use crate::verify::BO_SWEEP_C_MAX;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "kebab-case")]
pub enum PresetParams {
    Solve(SolveParams),
    Spectrum(SpectrumParams),
    Sweep(SweepParams),
    Exact(ExactParams),
    StokesCheck(StokesParams),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Preset {
    pub name: String,
    /// What the outputs show.
    pub reproduces: String,
    pub params: PresetParams,
}

fn solve(variant: Variant, c: f64, alpha: f64, eps: f64, max_iter: usize) -> PresetParams {
    PresetParams::Solve(SolveParams {
        variant,
        c,
        alpha,
        a: 0.4,
        eps,
        n: 256,
        max_iter,
        tol: 1e-12,
    })
}

fn sweep(alpha: f64, c_min: f64, c_max: f64) -> PresetParams {
    PresetParams::Sweep(SweepParams {
        alpha,
        c_min,
        c_max,
        c_step: 0.01,
        variant: Variant::Classical,
        modes: petlab::spectrum::DEFAULT_MODES,
        n: 256,
        a: 0.4,
    })
}

fn preset(name: &str, reproduces: &str, params: PresetParams) -> Preset {
    Preset {
        name: name.into(),
        reproduces: reproduces.into(),
        params,
    }
}

/// The manifest.
pub fn presets() -> Vec<Preset> {
    use Variant::{Classical, Shifted};
    vec![
        preset(
            "kdv-classical-c2",
            "classical iteration for KdV at c = 2: last iterate and the three error measures versus n (converges)",
            solve(Classical, 2.0, 2.0, 0.0, 500),
        ),
        preset(
            "kdv-classical-c23",
            "classical iteration for KdV at c = 2.3: slow convergence at the level-2 crossing",
            solve(Classical, 2.3, 2.0, 0.0, 500),
        ),
        preset(
            "kdv-classical-c3",
            "classical iteration for KdV at c = 3: two-cycle between double-lobe profiles, M -> -4.3737",
            solve(Classical, 3.0, 2.0, 0.0, 500),
        ),
        preset(
            "bo-classical-c11",
            "classical iteration for BO at c = 1.1: stalls with slow drift of the crest",
            solve(Classical, 1.1, 1.0, 0.0, 500),
        ),
        preset(
            "bo-classical-c153",
            "classical iteration for BO at c = 1.53: two-cycle, M -> -5.1447",
            solve(Classical, 1.53, 1.0, 0.0, 2000),
        ),
        preset(
            "kdv-shifted-c3",
            "shifted iteration for KdV at c = 3: convergence to the cnoidal wave",
            solve(Shifted, 3.0, 2.0, 0.0, 500),
        ),
        preset(
            "bo-shifted-c16",
            "shifted iteration for BO at c = 1.6: convergence to the closed-form wave",
            solve(Shifted, 1.6, 1.0, 0.0, 500),
        ),
        preset(
            "kdv-spectrum-c105",
            "generalized eigenvalues near the bifurcation point, KdV at c = 1.05",
            PresetParams::Spectrum(SpectrumParams {
                c: 1.05,
                alpha: 2.0,
                variant: Classical,
                modes: petlab::spectrum::DEFAULT_MODES,
                n: 256,
                wave: WaveSource::Auto,
                a: 0.4,
            }),
        ),
        preset(
            "eigensweep-alpha2",
            "generalized eigenvalues versus c for KdV, with the complex-pair modulus and transition speeds",
            sweep(2.0, 1.05, 3.9),
        ),
        preset(
            "eigensweep-alpha1",
            "generalized eigenvalues versus c for BO, showing the double eigenvalue -1",
            sweep(1.0, 1.05, BO_SWEEP_C_MAX),
        ),
        preset(
            "kdv-exact-c2",
            "closed-form cnoidal wave at c = 2",
            PresetParams::Exact(ExactParams {
                c: 2.0,
                alpha: 2.0,
                n: 256,
                convention: petlab::Convention::Phi,
            }),
        ),
        preset(
            "stokes-residuals-alpha2",
            "residual of the truncated small-amplitude expansion versus amplitude, orders 1-4",
            PresetParams::StokesCheck(StokesParams {
                alpha: 2.0,
                amplitudes: vec![0.04, 0.02, 0.01],
                n: 32,
            }),
        ),
    ]
}

pub fn find(name: &str) -> Option<Preset> {
    presets().into_iter().find(|p| p.name == name)
}

pub fn load(path: &Path) -> Result<Preset> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text)
        .map_err(|e| anyhow::Error::new(UsageError(format!("{}: {e}", path.display()))))
}

/// Runs a preset into `out` and records it as `out/preset.json`.
pub fn run_preset(preset: &Preset, out: &Path, svg: bool) -> Result<()> {
    ensure_dir(out)?;
    write_json(&out.join("preset.json"), preset)?;
    let out: PathBuf = out.to_path_buf();
    match &preset.params {
        PresetParams::Solve(p) => cmd_solve(&SolveArgs {
            params: p.clone(),
            out,
            svg,
        })
        .map(|_| ()),
        PresetParams::Spectrum(p) => cmd_spectrum(&SpectrumArgs {
            params: p.clone(),
            out,
            svg,
        })
        .map(|_| ()),
        PresetParams::Sweep(p) => cmd_sweep(&SweepArgs {
            params: p.clone(),
            out,
            svg,
        })
        .map(|_| ()),
        PresetParams::Exact(p) => cmd_exact(&ExactArgs {
            params: p.clone(),
            out,
            svg,
        })
        .map(|_| ()),
        PresetParams::StokesCheck(p) => cmd_stokes(&StokesArgs {
            params: p.clone(),
            out: Some(out),
        })
        .map(|_| ()),
    }
}

pub fn resolve(name: Option<&str>, from: Option<&Path>) -> Result<Preset> {
    match (name, from) {
        (Some(n), None) => match find(n) {
            Some(p) => Ok(p),
            None => bail!(UsageError(format!("unknown preset '{n}' (see `petlab presets list`)"))),
        },
        (None, Some(path)) => load(path),
        _ => bail!(UsageError("give exactly one of a preset name or --from <preset.json>".into())),
    }
}
