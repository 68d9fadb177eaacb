//! `phasemod` command-line front end.
//!
//! Exit codes: 0 success, 1 input error, 2 no solution, 3 unreliable result.

mod commands;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(name = "phasemod", version, about = "Design and analyse phase-modulated entangling gates")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Design a maximally entangling gate for a mode spectrum.
    Design(DesignArgs),
    /// Sweep a design or noise parameter and write a curve.
    Sweep(SweepArgs),
    /// Sample phase-space trajectories of a gate.
    Trajectory(TrajectoryArgs),
    /// Compute final-state observables with the analytic engine or the Fock oracle.
    Simulate(SimulateArgs),
    /// Write per-segment blue and red tone phases for a two-tone drive.
    ExportBichromatic(BichromaticArgs),
}

#[derive(Args, Debug, Clone)]
pub struct Output {
    /// Directory receiving the output files.
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum BasisArg {
    X,
    Y,
    Z,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum SchemeArg {
    Standard,
    PhaseModulated,
}

#[derive(Args, Debug, Clone)]
pub struct DesignParams {
    /// Gate time in seconds.
    #[arg(long)]
    pub gate_time: f64,
    /// Targeted modes and suppression orders as mode:order pairs, 1-based (e.g. 1:1,2:1).
    #[arg(long, default_value = "")]
    pub targets: String,
    /// "min-rabi", or mode indices in application order, innermost first (e.g. 2,1).
    #[arg(long, default_value = "min-rabi")]
    pub ordering: String,
    #[arg(long, value_enum, default_value = "x")]
    pub basis: BasisArg,
    #[arg(long, value_enum, default_value = "phase-modulated")]
    pub scheme: SchemeArg,
}

#[derive(Args, Debug)]
pub struct DesignArgs {
    /// Spectrum JSON file.
    pub spectrum: PathBuf,
    #[command(flatten)]
    pub params: DesignParams,
    #[command(flatten)]
    pub output: Output,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepKind {
    Detuning,
    StaticError,
    FilterFunction,
    Response,
}

#[derive(Args, Debug)]
pub struct SweepArgs {
    #[arg(long, value_enum)]
    pub kind: SweepKind,
    /// Spectrum JSON file; optional when --gate is a design file.
    #[arg(long)]
    pub spectrum: Option<PathBuf>,
    /// Gate or design JSON file (all kinds except detuning).
    #[arg(long)]
    pub gate: Option<PathBuf>,
    /// First abscissa: Hz for detuning and static-error, ωτ/2π otherwise.
    #[arg(long, allow_negative_numbers = true)]
    pub from: f64,
    /// Last abscissa, same unit as --from.
    #[arg(long, allow_negative_numbers = true)]
    pub to: f64,
    #[arg(long, default_value_t = 101)]
    pub points: usize,
    /// Logarithmic spacing (requires a positive range).
    #[arg(long)]
    pub log: bool,
    /// Worker threads; output never depends on this.
    #[arg(long, default_value_t = 1)]
    pub parallel: usize,
    /// Static-error sweep: full thermal two-qubit P₁ instead of the quadratic estimate.
    #[arg(long)]
    pub exact: bool,
    /// Static-error sweep: re-solve Ω at each offset.
    #[arg(long)]
    pub rescale_rabi: bool,
    /// Filter function: report F(ω) + F(−ω).
    #[arg(long)]
    pub symmetric: bool,
    /// Qubit whose excitation is reported, 1-based.
    #[arg(long, default_value_t = 1)]
    pub qubit: usize,
    /// Response sweep: modulation depth in Hz.
    #[arg(long)]
    pub depth_hz: Option<f64>,
    /// Response sweep: modulation start phases averaged over.
    #[arg(long, default_value_t = 32)]
    pub phase_grid: usize,
    /// Detuning sweep: gate time in seconds.
    #[arg(long)]
    pub gate_time: Option<f64>,
    /// Detuning sweep: targets as in `design`.
    #[arg(long, default_value = "")]
    pub targets: String,
    /// Detuning sweep: ordering as in `design`.
    #[arg(long, default_value = "min-rabi")]
    pub ordering: String,
    #[arg(long, value_enum, default_value = "x")]
    pub basis: BasisArg,
    #[arg(long, value_enum, default_value = "phase-modulated")]
    pub scheme: SchemeArg,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Args, Debug)]
pub struct TrajectoryArgs {
    /// Gate or design JSON file.
    pub gate: PathBuf,
    /// Spectrum JSON file; optional when the gate file is a design file.
    #[arg(long)]
    pub spectrum: Option<PathBuf>,
    /// Mode to sample, 1-based; all modes when omitted.
    #[arg(long)]
    pub mode: Option<usize>,
    /// Samples per segment.
    #[arg(long, default_value_t = 64)]
    pub points: usize,
    #[command(flatten)]
    pub output: Output,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum Engine {
    Analytic,
    Fock,
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    /// Gate or design JSON file.
    pub gate: PathBuf,
    /// Spectrum JSON file; optional when the gate file is a design file.
    #[arg(long)]
    pub spectrum: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "analytic")]
    pub engine: Engine,
    /// Highest Fock level kept per mode (fock engine).
    #[arg(long, default_value_t = 12)]
    pub cutoff: usize,
    /// Noise JSON file.
    #[arg(long)]
    pub noise: Option<PathBuf>,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Args, Debug)]
pub struct BichromaticArgs {
    /// Gate or design JSON file.
    pub gate: PathBuf,
    /// Common spin phase of both tones, rad.
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub spin_phase: f64,
    #[command(flatten)]
    pub output: Output,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Design(a) => commands::design(a),
        Command::Sweep(a) => commands::sweep(a),
        Command::Trajectory(a) => commands::trajectory(a),
        Command::Simulate(a) => commands::simulate(a),
        Command::ExportBichromatic(a) => commands::export_bichromatic(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}
