use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use harmonica::commands::{
    self, cmd_decompose, cmd_div, cmd_generate, cmd_simulate, cmd_volume, GameClass, SimulateArgs,
};
use harmonica::mixture::{self, ExperimentConfig};
use harmonica_core::fixtures;

/// Decompose finite games into potential and harmonic parts and study the
/// exponential-weights flow on them.
#[derive(Parser)]
#[command(name = "harmonica", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a random game of a given class and write it as JSON.
    Generate {
        /// Action counts per player, e.g. `2,3,2`.
        #[arg(long, value_delimiter = ',', required = true)]
        shape: Vec<usize>,
        /// One of `harmonic`, `potential`, `random`.
        #[arg(long, default_value = "random")]
        class: GameClass,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Payoffs are drawn uniformly from `[-scale, scale]`.
        #[arg(long, default_value_t = 1.0)]
        scale: f64,
        /// Output path for the game JSON.
        #[arg(long)]
        out: PathBuf,
    },
    /// Split a game into a potential part plus a harmonic remainder.
    Decompose {
        game: PathBuf,
        /// Output path for the decomposition JSON.
        #[arg(long)]
        out: PathBuf,
        /// Relative residual target of the least-squares solve.
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
        #[arg(long, default_value_t = 100_000)]
        max_iter: usize,
    },
    /// Integrate the exponential-weights flow and export diagnostics.
    Simulate {
        game: PathBuf,
        /// Initial profile, blocks separated by `;`: `0.2,0.8;0.5,0.5`.
        /// Defaults to a seeded random interior point, or the barycenter.
        #[arg(long)]
        x0: Option<String>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value_t = 100.0)]
        t_end: f64,
        #[arg(long, default_value_t = 1e-9)]
        rtol: f64,
        #[arg(long, default_value_t = 1e-12)]
        atol: f64,
        /// Resample the trajectory on a uniform grid for the CSV.
        #[arg(long)]
        sample_dt: Option<f64>,
        /// Trajectory CSV path (`t,x_i_a...,energy,divergence`).
        #[arg(long)]
        csv: Option<PathBuf>,
        /// Report JSON path.
        #[arg(long)]
        report: Option<PathBuf>,
        /// Also detect near-returns to the start.
        #[arg(long)]
        recurrence: bool,
        /// Ball radius for recurrence detection.
        #[arg(long, default_value_t = 1e-2)]
        eps: f64,
    },
    /// Sweep convex combinations of a potential and a harmonic game.
    Mixture {
        /// Potential game JSON (defaults to the built-in 2x2x2 table).
        #[arg(long)]
        potential: Option<PathBuf>,
        /// Harmonic game JSON (defaults to the built-in 2x2x2 table).
        #[arg(long)]
        harmonic: Option<PathBuf>,
        /// Number of evenly spaced lambda values in [0, 1].
        #[arg(long, default_value_t = 8)]
        lambdas: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 150.0)]
        t_end: f64,
        #[arg(long, default_value_t = 1e-9)]
        rtol: f64,
        #[arg(long, default_value_t = 1e-12)]
        atol: f64,
        #[arg(long, default_value_t = 1e-2)]
        eps: f64,
        /// Distance to a vertex under which the run counts as converged.
        #[arg(long, default_value_t = 1e-3)]
        vertex_tol: f64,
        /// Optional JSON output with one row per lambda.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Sample the divergence of the replicator field at random points.
    Div {
        game: PathBuf,
        #[arg(long, default_value_t = 20)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// CSV output path (stdout when omitted).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Report the closed-form simplex volume next to its quadrature.
    Volume {
        /// Simplex dimension.
        #[arg(long)]
        m: usize,
        /// Base node count of the quadrature (m <= 2 only).
        #[arg(long, default_value_t = 32)]
        points: usize,
        /// Refinement tolerance of the quadrature.
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
    },
}

fn run(cli: Cli) -> harmonica_core::Result<()> {
    match cli.command {
        Command::Generate { shape, class, seed, scale, out } => {
            cmd_generate(&shape, class, seed, scale, &out)?;
            println!("wrote {}", out.display());
        }
        Command::Decompose { game, out, tol, max_iter } => {
            cmd_decompose(&game, &out, tol, max_iter)?;
            println!("wrote {}", out.display());
        }
        Command::Simulate {
            game,
            x0,
            seed,
            t_end,
            rtol,
            atol,
            sample_dt,
            csv,
            report,
            recurrence,
            eps,
        } => {
            let x0 = x0.as_deref().map(commands::parse_profile).transpose()?;
            let summary = cmd_simulate(&SimulateArgs {
                input: &game,
                x0,
                seed,
                t_end,
                rtol,
                atol,
                sample_dt,
                csv: csv.as_deref(),
                report: report.as_deref(),
                recurrence,
                eps,
            })?;
            let mut text = serde_json::to_string_pretty(&summary)
                .expect("report serialization cannot fail");
            text.push('\n');
            print!("{text}");
        }
        Command::Mixture {
            potential,
            harmonic,
            lambdas,
            seed,
            t_end,
            rtol,
            atol,
            eps,
            vertex_tol,
            out,
        } => {
            let p = commands::load_game_or(potential.as_deref(), fixtures::potential_222)?;
            let h = commands::load_game_or(harmonic.as_deref(), fixtures::harmonic_222)?;
            let config = ExperimentConfig {
                seed,
                lambda_grid: ExperimentConfig::even_grid(lambdas),
                t_end,
                rtol,
                atol,
                eps,
                vertex_tol,
            };
            let rows = mixture::run_mixture(&p, &h, &config)?;
            print!("{}", mixture::format_table(&rows));
            if let Some(path) = out {
                let mut text = serde_json::to_string_pretty(&rows)?;
                text.push('\n');
                std::fs::write(path, text)?;
            }
        }
        Command::Div { game, samples, seed, out } => {
            let text = cmd_div(&game, samples, seed, out.as_deref())?;
            if out.is_none() {
                print!("{text}");
            }
        }
        Command::Volume { m, points, tol } => {
            let report = cmd_volume(m, points, tol)?;
            let mut text = serde_json::to_string_pretty(&report)
                .expect("report serialization cannot fail");
            text.push('\n');
            print!("{text}");
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(harmonica::exit_code(&err) as u8)
        }
    }
}
