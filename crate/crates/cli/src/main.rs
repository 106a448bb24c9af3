use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Parser, Subcommand};
use petlab_cli::commands::{
    cmd_exact, cmd_solve, cmd_spectrum, cmd_stokes, cmd_sweep, ExactArgs, SolveArgs, SpectrumArgs, StokesArgs,
    SweepArgs,
};
use petlab_cli::presets::{presets, resolve, run_preset};
use petlab_cli::verify::{format_table, run_suite, ExpectedFile, Suite};
use petlab_cli::exit_code;

/// Periodic traveling waves of the fractional KdV equation by Petviashvili
/// iteration, with spectral convergence diagnostics.
#[derive(Debug, Parser)]
#[command(name = "petlab", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the classical or shifted iteration from the standard guess.
    Solve(SolveArgs),
    /// Eigenvalues of the linearized iteration at one wave.
    Spectrum(SpectrumArgs),
    /// Eigenvalue tracks and transition speeds over a range of c.
    Sweep(SweepArgs),
    /// Closed-form KdV (alpha = 2) or Benjamin-Ono (alpha = 1) wave.
    Exact(ExactArgs),
    /// Residual of the small-amplitude expansion versus amplitude.
    StokesCheck(StokesArgs),
    /// List, describe or run named experiments.
    Presets {
        #[command(subcommand)]
        action: PresetAction,
    },
    /// Run the acceptance matrix against the expected values.
    Verify {
        #[arg(long, value_enum, default_value_t = Suite::Fast)]
        suite: Suite,
        /// Expected-values file (defaults to the built-in copy).
        #[arg(long)]
        expected: Option<PathBuf>,
    },
}

#[derive(Debug, Subcommand)]
enum PresetAction {
    /// Names and descriptions.
    List,
    /// Full manifest as JSON.
    Manifest,
    /// Run a preset by name, or rerun one from a saved preset.json.
    Run {
        name: Option<String>,
        #[arg(long)]
        from: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        svg: bool,
    },
}

fn dispatch(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Solve(args) => {
            let o = cmd_solve(&args)?;
            let r = &o.report;
            println!("verdict: {:?} after {} iterations", r.verdict, r.iterations());
            println!("final residual: {:e}", r.final_residual());
            if let Some(m) = r.m_limit {
                println!("limiting quotient: {m:.6}");
            }
            if let Some(e) = o.error_vs_exact {
                println!("error vs exact: {e:e}");
            }
        }
        Command::Spectrum(args) => {
            let o = cmd_spectrum(&args)?;
            let r = &o.report;
            println!("verdict: {:?} (max |1 - lambda| = {:.6})", r.verdict, r.spectral_radius);
            for (e, tag) in r.eigenvalues.iter().zip(&o.tags).filter(|(_, t)| **t != "constrained") {
                println!("{tag:>10}: {:+.8} {:+.8}i", e.value.re, e.value.im);
            }
        }
        Command::Sweep(args) => {
            let o = cmd_sweep(&args)?;
            let ev = o.result.events;
            let show = |x: Option<f64>| x.map_or("not found".to_string(), |v| format!("{v:.4}"));
            println!("c*   = {}", show(ev.c_star));
            println!("c**  = {}", show(ev.c_2star));
            println!("c*** = {}", show(ev.c_3star));
        }
        Command::Exact(args) => {
            let w = cmd_exact(&args)?;
            println!("residual: {:e}", w.residual());
        }
        Command::StokesCheck(args) => {
            cmd_stokes(&args)?;
        }
        Command::Presets { action } => match action {
            PresetAction::List => {
                for p in presets() {
                    println!("{:<26} {}", p.name, p.reproduces);
                }
            }
            PresetAction::Manifest => println!("{}", serde_json::to_string_pretty(&presets())?),
            PresetAction::Run { name, from, out, svg } => {
                let preset = resolve(name.as_deref(), from.as_deref())?;
                run_preset(&preset, &out, svg)?;
                println!("{} -> {}", preset.name, out.display());
            }
        },
        Command::Verify { suite, expected } => {
            let file = ExpectedFile::load(expected.as_deref())?;
            let outcomes = run_suite(suite, &file);
            print!("{}", format_table(&outcomes));
            return Ok(outcomes.iter().all(|o| o.passed()));
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
