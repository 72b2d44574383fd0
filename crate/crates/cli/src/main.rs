//! `qbrush`: apply brushes to image files, precompute the H2 family grid and
//! export analysis curves.

mod commands;
mod plot;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use qbrush_core::family_store::DEFAULT_GRID_SIZE;
use qbrush_core::h2chem::{MAX_DISTANCE, MIN_DISTANCE};

#[derive(Debug, Parser)]
#[command(
    name = "qbrush",
    version,
    about = "Quantum brush effects on PNG images"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Steer the colors of a paste region from a source region toward a target region.
    Steer(SteerArgs),
    /// Recolor a stroke along an H2 VQE trajectory.
    Chem(ChemArgs),
    /// Compute circuit families over a uniform bond-distance grid.
    Precompute(PrecomputeArgs),
    /// Export dissociation, fidelity or control curves as CSV plus a PNG plot.
    Curves(CurvesArgs),
}

#[derive(Debug, clap::Args)]
struct SteerArgs {
    #[arg(long)]
    image: PathBuf,
    /// Region JSON file (or inline JSON).
    #[arg(long)]
    source: String,
    #[arg(long)]
    target: String,
    /// Paste region; the source region is used when omitted.
    #[arg(long)]
    paste: Option<String>,
    #[arg(long, value_parser = non_negative)]
    t: f64,
    #[arg(long, default_value_t = 25, value_parser = clap::value_parser!(u32).range(1..))]
    timestep: u32,
    /// Qubits of the color encoding: 2, 3 or 4.
    #[arg(long, default_value_t = 2, value_parser = clap::value_parser!(u8).range(2..=4))]
    controls: u8,
    #[arg(long)]
    seed: u64,
    #[arg(long, default_value_t = 500)]
    max_iters: usize,
    /// Outline the source and target regions in the output.
    #[arg(long)]
    show_source_target: bool,
    /// Output PNG; a sidecar `.json` with the training record is written next to it.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, clap::Args)]
struct ChemArgs {
    #[arg(long)]
    image: PathBuf,
    /// Stroke JSON file (or inline JSON).
    #[arg(long)]
    stroke: String,
    /// Bond distance in Å.
    #[arg(long, value_parser = bond_distance)]
    distance: f64,
    /// Overrides the stroke's radius.
    #[arg(long, value_parser = radius)]
    radius: Option<f64>,
    #[arg(long, default_value_t = 0, value_parser = clap::value_parser!(u16).range(0..=100))]
    reps: u16,
    #[arg(long, default_value = "data")]
    data_dir: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, clap::Args)]
struct PrecomputeArgs {
    #[arg(long, default_value_t = DEFAULT_GRID_SIZE, value_parser = grid_size)]
    grid: usize,
    #[arg(long, default_value_t = MIN_DISTANCE, value_parser = bond_distance)]
    min: f64,
    #[arg(long, default_value_t = MAX_DISTANCE, value_parser = bond_distance)]
    max: f64,
    #[arg(long, default_value = "data")]
    data_dir: PathBuf,
    /// Spread distances over all cores.
    #[arg(long)]
    parallel: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum CurveKind {
    /// HF, VQE and exact energies over the family store.
    Dissociation,
    /// F(rho(t), target) of a trained steering.
    Fidelity,
    /// Control amplitudes u_i at every propagator step.
    Controls,
}

#[derive(Debug, clap::Args)]
struct CurvesArgs {
    #[arg(long, value_enum)]
    kind: CurveKind,
    /// Family store (dissociation).
    #[arg(long)]
    data_dir: Option<PathBuf>,
    /// Sidecar JSON written by `steer` (fidelity, controls).
    #[arg(long)]
    sidecar: Option<PathBuf>,
    /// Sample count over [0, t_max] for the fidelity curve.
    #[arg(long, default_value_t = 101, value_parser = clap::value_parser!(u32).range(2..))]
    samples: u32,
    #[arg(long, default_value_t = 1.0, value_parser = non_negative)]
    t_max: f64,
    /// CSV output.
    #[arg(long)]
    out: PathBuf,
    /// Plot output; defaults to the CSV path with a `.png` extension.
    #[arg(long)]
    plot: Option<PathBuf>,
}

fn number(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|_| format!("`{s}` is not a number"))?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(format!("`{s}` is not finite"))
    }
}

fn non_negative(s: &str) -> Result<f64, String> {
    let v = number(s)?;
    if v >= 0.0 {
        Ok(v)
    } else {
        Err(format!("must be >= 0, got {v}"))
    }
}

fn bond_distance(s: &str) -> Result<f64, String> {
    let v = number(s)?;
    if (MIN_DISTANCE..=MAX_DISTANCE).contains(&v) {
        Ok(v)
    } else {
        Err(format!("{v} Å outside [{MIN_DISTANCE}, {MAX_DISTANCE}]"))
    }
}

fn radius(s: &str) -> Result<f64, String> {
    let v = number(s)?;
    if v >= 1.0 {
        Ok(v)
    } else {
        Err(format!("must be at least 1, got {v}"))
    }
}

fn grid_size(s: &str) -> Result<usize, String> {
    match s.parse::<usize>() {
        Ok(n) if n >= 2 => Ok(n),
        _ => Err(format!("need an integer >= 2, got `{s}`")),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Steer(a) => commands::steer(a),
        Command::Chem(a) => commands::chem(a),
        Command::Precompute(a) => commands::precompute(a),
        Command::Curves(a) => commands::curves(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(commands::Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(commands::Failure::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
