//! `xtalk`: termination synthesis, figures of merit, link simulation and
//! eye analysis from the command line.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

const VERSION: &str = concat!(
    env!("CARGO_PKG_VERSION"),
    "\nschemas: bundle 1, network 1, link 1, impedance 1, fom 1, eye 1, waves-csv 1"
);

#[derive(Parser)]
#[command(name = "xtalk", version = VERSION, about = "Crosstalk-cancelling termination synthesis and link analysis")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compute Zc and realize its inverse as a resistor network.
    Synth(SynthArgs),
    /// Apply cutoffs to an existing network file.
    Reduce(ReduceArgs),
    /// Switching-current and power figures of merit.
    Fom(FomArgs),
    /// Simulate a link and write receiver waveforms.
    Sim(SimArgs),
    /// Measure eye openings of simulated waveforms.
    Eye(EyeArgs),
    /// Sweep one link parameter and record the eye openings.
    Sweep(SweepArgs),
    /// Export the transmitted bit streams of a link.
    Bits(BitsArgs),
}

#[derive(Args)]
struct SynthArgs {
    /// Bundle file with per-unit-length L and C.
    #[arg(long)]
    lc: PathBuf,
    /// Reference supply voltage of the network.
    #[arg(long)]
    vref: f64,
    /// Drop self resistors above this value (ohm).
    #[arg(long)]
    cutoff_self: Option<f64>,
    /// Drop cross resistors above this value (ohm).
    #[arg(long)]
    cutoff_cross: Option<f64>,
    /// Network output file.
    #[arg(short, long)]
    output: PathBuf,
    /// Characteristic impedance output (default: <output stem>.zc.json).
    #[arg(long)]
    zc: Option<PathBuf>,
    /// Conductance histogram CSV.
    #[arg(long)]
    histogram: Option<PathBuf>,
    /// Histogram bin count.
    #[arg(long, default_value_t = 20)]
    bins: usize,
}

#[derive(Args)]
struct ReduceArgs {
    #[arg(long)]
    network: PathBuf,
    #[arg(long)]
    cutoff_self: f64,
    #[arg(long)]
    cutoff_cross: f64,
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Args)]
struct FomArgs {
    #[arg(long)]
    lc: PathBuf,
    /// Use this network's steady-state admittance instead of Yc.
    #[arg(long)]
    network: Option<PathBuf>,
    /// Logic levels `low,high` in volts.
    #[arg(long, default_value = "0,1")]
    levels: String,
    #[arg(long, default_value_t = 0.5)]
    vref: f64,
    #[arg(short, long)]
    output: PathBuf,
    /// Per-code current table CSV.
    #[arg(long)]
    codes: Option<PathBuf>,
    /// Estimate from this many random codes instead of enumerating.
    #[arg(long)]
    samples: Option<u64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct SimArgs {
    #[arg(long)]
    link: PathBuf,
    /// Waveform CSV output.
    #[arg(short, long)]
    output: PathBuf,
    /// Override the stimulus PRBS seed.
    #[arg(long)]
    seed: Option<u32>,
}

#[derive(Args)]
struct EyeArgs {
    #[arg(long)]
    waves: PathBuf,
    #[arg(long)]
    link: PathBuf,
    /// Eye report JSON.
    #[arg(short, long)]
    output: PathBuf,
    /// Eye diagram SVG of one wire.
    #[arg(long)]
    svg: Option<PathBuf>,
    /// Folded samples CSV of the same wire.
    #[arg(long)]
    folded: Option<PathBuf>,
    /// 1-based wire to draw (default: the wire with the smallest eye).
    #[arg(long)]
    wire: Option<usize>,
    /// Sampling latency in seconds (default: nominal link delay).
    #[arg(long)]
    latency: Option<f64>,
    #[arg(long)]
    seed: Option<u32>,
}

#[derive(Clone, Copy, ValueEnum)]
enum SweepMode {
    Rs,
    Cutoff,
    Uncoupled,
}

#[derive(Clone, Copy, ValueEnum)]
enum Pattern {
    Worst,
    Best,
    Random,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long, value_enum)]
    mode: SweepMode,
    #[arg(long)]
    link: PathBuf,
    /// Comma-separated values: ohms (rs), `inf` or `SELF/CROSS` ohms
    /// (cutoff), or metres (uncoupled).
    #[arg(long)]
    values: String,
    #[arg(short, long)]
    output: PathBuf,
    /// Override the link's pattern mode.
    #[arg(long, value_enum)]
    pattern: Option<Pattern>,
    #[arg(long)]
    seed: Option<u32>,
}

#[derive(Args)]
struct BitsArgs {
    #[arg(long)]
    link: PathBuf,
    #[arg(short, long)]
    output: PathBuf,
    #[arg(long)]
    seed: Option<u32>,
}

/// A problem with the command line or the files it names.
#[derive(Debug)]
struct InputError(String);

impl std::fmt::Display for InputError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for InputError {}

fn exit_code(err: &anyhow::Error) -> u8 {
    use xtalk_core::Error as E;
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<E>() {
            return match e {
                E::NonRealizable { .. } => 3,
                E::EnumerationCap { .. } => 4,
                E::NonFinite { .. } => 5,
                E::NoConvergence(_) => 1,
                _ => 2,
            };
        }
        if cause.is::<InputError>() {
            return 2;
        }
    }
    1
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Synth(a) => commands::synth(a),
        Command::Reduce(a) => commands::reduce(a),
        Command::Fom(a) => commands::fom(a),
        Command::Sim(a) => commands::sim(a),
        Command::Eye(a) => commands::eye(a),
        Command::Sweep(a) => commands::sweep(a),
        Command::Bits(a) => commands::bits(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
