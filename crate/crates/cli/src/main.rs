use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use pimaw_cli::{cmd_compare, cmd_simulate, cmd_synth, cmd_verify, Options};

#[derive(Parser)]
#[command(name = "pimaw", version, about = "Projected internal-model anti-windup gradient flows")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize K and rho for a scenario and write the design JSON.
    Synth(Flags),
    /// Simulate one method and write its trajectory CSV and summary.
    Simulate(Flags),
    /// Run P-IMAW, the rho=0 variant and OP-GD side by side.
    Compare(Flags),
    /// Recheck a design's certificates (and optionally a trajectory).
    Verify(Flags),
}

#[derive(Args)]
struct Flags {
    #[arg(long)]
    scenario: Option<PathBuf>,
    #[arg(long)]
    design: Option<PathBuf>,
    /// pimaw | pimaw-rho0 | opgd | unconstrained-im | pimaw-decoupled
    #[arg(long)]
    method: Option<String>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Anti-windup gain of the baseline variant.
    #[arg(long)]
    rho: Option<f64>,
    #[arg(long)]
    gamma: Option<f64>,
    /// Replaces the Hessian seed; the signal uses seed + 1.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    dt: Option<f64>,
    /// Trajectory CSV for the L2 prefix check (verify only).
    #[arg(long)]
    trajectory: Option<PathBuf>,
    #[arg(long)]
    quiet: bool,
}

impl From<Flags> for Options {
    fn from(f: Flags) -> Self {
        Options {
            scenario: f.scenario,
            design: f.design,
            method: f.method,
            out: f.out,
            rho: f.rho,
            gamma: f.gamma,
            seed: f.seed,
            dt: f.dt,
            trajectory: f.trajectory,
            quiet: f.quiet,
            exec: Default::default(),
        }
    }
}

fn main() -> ExitCode {
    // clap's own usage errors exit with 2, which is reserved for infeasible
    // synthesis here.
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let (run, flags): (fn(&Options) -> _, Flags) = match cli.command {
        Command::Synth(f) => (cmd_synth, f),
        Command::Simulate(f) => (cmd_simulate, f),
        Command::Compare(f) => (cmd_compare, f),
        Command::Verify(f) => (cmd_verify, f),
    };
    let opts = Options::from(flags);
    match run(&opts) {
        Ok(report) => {
            if !opts.quiet {
                println!("{report}");
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("pimaw: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
