use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod commands;

#[derive(Parser, Debug)]
#[command(name = "vortexred", version, about = "Four-vortex dynamics and its reduction to the sphere")]
struct Cli {
    /// Strength Γ of the central vortex; the outer three carry −Γ/3.
    #[arg(long, global = true, default_value_t = 3.0, allow_negative_numbers = true)]
    gamma: f64,
    /// Size parameter of the momentum level set.
    #[arg(long, global = true, default_value_t = 1.0)]
    alpha: f64,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Integrate the planar vortex equations and write the trajectory CSV.
    Simulate(SimulateArgs),
    /// Send a trajectory CSV through the reduction chain.
    Project(ProjectArgs),
    /// Locate and classify the critical points of the reduced energy.
    Equilibria(EquilibriaArgs),
    /// Trace reduced orbits and write the cylinder portrait CSV.
    Portrait(PortraitArgs),
    /// Run the property suites.
    Verify(VerifyArgs),
}

#[derive(Args, Debug)]
struct SimulateArgs {
    /// canonical | saddle | sample:SEED | file:PATH
    #[arg(long, default_value = "canonical", value_parser = commands::parse_init)]
    init: commands::Init,
    #[arg(long)]
    t_end: f64,
    #[arg(long)]
    out: PathBuf,
    /// Write samples at multiples of this interval instead of every step.
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long, default_value_t = 1e-12)]
    rtol: f64,
    #[arg(long, default_value_t = 1e-12)]
    atol: f64,
    /// Minimum pair distance that stops the run; defaults to 1e-6·α.
    #[arg(long)]
    collision_epsilon: Option<f64>,
    /// Re-impose the level-set momentum after every sample.
    #[arg(long)]
    project: bool,
}

#[derive(Args, Debug)]
struct ProjectArgs {
    /// Trajectory CSV as written by `simulate`.
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Comma-separated subset of w, p, q, cyl, or all.
    #[arg(long, default_value = "all", value_parser = commands::parse_coords)]
    coords: vortexred::io::CoordinateSelection,
    /// Largest accepted momentum residual.
    #[arg(long, default_value_t = 1e-6)]
    tolerance: f64,
}

#[derive(Args, Debug)]
struct EquilibriaArgs {
    /// JSON output; standard output if omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct PortraitArgs {
    #[arg(long, default_value_t = 40)]
    orbits: usize,
    #[arg(long, default_value_t = 500.0)]
    t_max: f64,
    #[arg(long, default_value_t = 512)]
    samples: usize,
    /// CSV output; standard output if omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct VerifyArgs {
    #[arg(long, default_value_t = 7)]
    seed: u64,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let usage_error = e.use_stderr();
            let _ = e.print();
            // Exit code 2 is reserved for collisions.
            return if usage_error { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    if let Err(e) = commands::configure_threads() {
        eprintln!("error: {e:#}");
        return ExitCode::from(1);
    }
    let result = vortexred::SystemParams::new(cli.gamma, cli.alpha)
        .map_err(anyhow::Error::from)
        .and_then(|params| match cli.command {
            Command::Simulate(a) => commands::simulate(&params, a),
            Command::Project(a) => commands::project(&params, a),
            Command::Equilibria(a) => commands::equilibria(&params, a),
            Command::Portrait(a) => commands::portrait(&params, a),
            Command::Verify(a) => commands::verify(a),
        });
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
