//! The individual subcommands, as functions over parsed arguments.

use std::io::Write;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use serde::Serialize;

use harmonica_core::decomposition::{
    self, decompose, extract_potential, is_harmonic, PotentialOutcome, SolverKind,
};
use harmonica_core::dynamics::{
    detect_recurrence, integrate, IntegrateOptions, RecurrenceReport, TrajectoryRecord,
};
use harmonica_core::geometry::{
    replicator_divergence_analytic, shah_divergence, simplex_volume_numeric, simplex_volume_shah,
    JacobianMode, ReplicatorFieldEff,
};
use harmonica_core::json::{self, GameJson};
use harmonica_core::{embed, reduce, Error, Game, MixedProfile, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GameClass {
    Harmonic,
    Potential,
    Random,
}

impl std::str::FromStr for GameClass {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "harmonic" => Ok(GameClass::Harmonic),
            "potential" => Ok(GameClass::Potential),
            "random" => Ok(GameClass::Random),
            other => Err(format!("unknown class `{other}` (harmonic|potential|random)")),
        }
    }
}

/// Parse a shape argument like `2,3,2`.
pub fn parse_shape(s: &str) -> std::result::Result<Vec<usize>, String> {
    s.split(',')
        .map(|p| p.trim().parse::<usize>().map_err(|e| format!("bad action count `{p}`: {e}")))
        .collect()
}

/// Parse a profile argument like `0.2,0.8;0.5,0.5` (blocks separated by
/// semicolons).
pub fn parse_profile(s: &str) -> Result<MixedProfile> {
    let blocks = s
        .split(';')
        .map(|b| {
            b.split(',')
                .map(|p| {
                    p.trim()
                        .parse::<f64>()
                        .map_err(|e| Error::InvalidProfile(format!("bad coordinate `{p}`: {e}")))
                })
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    MixedProfile::new(blocks)
}

/// Generate a game of the requested class; the class is verified before
/// the file is written.
pub fn cmd_generate(
    shape: &[usize],
    class: GameClass,
    seed: u64,
    scale: f64,
    out: &Path,
) -> Result<()> {
    let game = match class {
        GameClass::Random => decomposition::random_game(shape, seed, scale),
        GameClass::Harmonic => {
            let g = decomposition::random_harmonic(shape, seed, scale);
            if !is_harmonic(&g, 1e-8) {
                return Err(Error::InternalCheck("generated game is not harmonic".into()));
            }
            g
        }
        GameClass::Potential => {
            let g = decomposition::random_potential(shape, seed, scale);
            if !matches!(extract_potential(&g, 1e-9), PotentialOutcome::Exact { .. }) {
                return Err(Error::InternalCheck("generated game is not potential".into()));
            }
            g
        }
    };
    json::write_game(&game, out)
}

#[derive(Debug, Serialize)]
struct SolverReport {
    kind: &'static str,
    iterations: usize,
    residual: f64,
}

#[derive(Debug, Serialize)]
struct DecompositionReport {
    phi: Vec<f64>,
    potential_game: GameJson,
    harmonic_game: GameJson,
    residual_harmonicity: f64,
    harmonic_part_is_harmonic: bool,
    solver: SolverReport,
}

pub fn cmd_decompose(input: &Path, out: &Path, tol: f64, max_iter: usize) -> Result<()> {
    let game = json::read_game(input)?;
    let result = decompose(&game, tol, max_iter)?;
    let report = DecompositionReport {
        phi: result.potential_fn.clone(),
        potential_game: GameJson::from_game(&result.potential_game),
        harmonic_game: GameJson::from_game(&result.harmonic_game),
        residual_harmonicity: result.residual_harmonicity,
        harmonic_part_is_harmonic: is_harmonic(&result.harmonic_game, 1e-8),
        solver: SolverReport {
            kind: match result.solver_stats.solver {
                SolverKind::ConjugateGradient => "conjugate-gradient",
                SolverKind::DenseCholesky => "dense-cholesky",
            },
            iterations: result.solver_stats.iterations,
            residual: result.solver_stats.residual,
        },
    };
    write_json(out, &report)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

fn write_trajectory_csv(path: &Path, g: &Game, record: &TrajectoryRecord) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    let mut header = String::from("t");
    for (i, &n) in g.action_counts().iter().enumerate() {
        for a in 0..n {
            header.push_str(&format!(",x_{i}_{a}"));
        }
    }
    header.push_str(",energy,divergence");
    writeln!(f, "{header}")?;
    for (k, &t) in record.times.iter().enumerate() {
        let mut line = format!("{t}");
        for b in record.states[k].blocks() {
            for v in b {
                line.push_str(&format!(",{v}"));
            }
        }
        line.push_str(&format!(",{},{}", record.energy[k], record.divergence[k]));
        writeln!(f, "{line}")?;
    }
    Ok(())
}

#[derive(Debug, Serialize)]
pub struct SimulationReport {
    pub t_end: f64,
    pub samples: usize,
    pub energy_initial: f64,
    pub energy_final: f64,
    pub max_energy_drift: f64,
    pub regret: Vec<f64>,
    pub regret_bound: Vec<f64>,
    pub final_state: Vec<Vec<f64>>,
    pub final_vertex_distance: f64,
    pub recurrence: Option<RecurrenceReport>,
}

pub struct SimulateArgs<'a> {
    pub input: &'a Path,
    pub x0: Option<MixedProfile>,
    pub seed: Option<u64>,
    pub t_end: f64,
    pub rtol: f64,
    pub atol: f64,
    pub sample_dt: Option<f64>,
    pub csv: Option<&'a Path>,
    pub report: Option<&'a Path>,
    pub recurrence: bool,
    pub eps: f64,
}

pub fn cmd_simulate(args: &SimulateArgs) -> Result<SimulationReport> {
    let game = json::read_game(args.input)?;
    let x0 = match (&args.x0, args.seed) {
        (Some(x), _) => {
            if x.blocks().len() != game.num_players() {
                return Err(Error::ShapeMismatch(
                    "initial profile does not match the game shape".into(),
                ));
            }
            x.clone()
        }
        (None, Some(seed)) => {
            let mut rng = ChaCha12Rng::seed_from_u64(seed);
            MixedProfile::sample_interior(&mut rng, game.action_counts(), 0.05)
        }
        (None, None) => MixedProfile::uniform(game.action_counts()),
    };
    let opts = IntegrateOptions {
        rtol: args.rtol,
        atol: args.atol,
        sample_dt: args.sample_dt,
        ..IntegrateOptions::default()
    };
    let record = integrate(&game, &x0, args.t_end, &opts)?;
    if let Some(csv) = args.csv {
        write_trajectory_csv(csv, &game, &record)?;
    }
    let recurrence = if args.recurrence {
        Some(detect_recurrence(&game, &x0, args.eps, args.t_end, &opts)?)
    } else {
        None
    };
    let e0 = record.energy[0];
    let drift = record.energy.iter().fold(0.0f64, |m, e| m.max((e - e0).abs()));
    let last = record.states.last().expect("nonempty record");
    let report = SimulationReport {
        t_end: args.t_end,
        samples: record.times.len(),
        energy_initial: e0,
        energy_final: *record.energy.last().unwrap(),
        max_energy_drift: drift,
        regret: record.regret.clone(),
        regret_bound: game
            .action_counts()
            .iter()
            .map(|&n| (n as f64).ln())
            .collect(),
        final_state: last.blocks().to_vec(),
        final_vertex_distance: last.distance_to_nearest_vertex(),
        recurrence,
    };
    if let Some(path) = args.report {
        write_json(path, &report)?;
    }
    Ok(report)
}

/// Sample the divergence of the replicator field at random interior
/// points, reporting the closed form next to the finite-difference value.
pub fn cmd_div(input: &Path, samples: usize, seed: u64, out: Option<&Path>) -> Result<String> {
    let game = json::read_game(input)?;
    let field = ReplicatorFieldEff { game: &game };
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let dim: usize = game.action_counts().iter().map(|n| n - 1).sum();
    let mut text = String::from("sample");
    for k in 0..dim {
        text.push_str(&format!(",x_{k}"));
    }
    text.push_str(",div_analytic,div_finite_difference,abs_diff\n");
    for s in 0..samples {
        let x = MixedProfile::sample_interior(&mut rng, game.action_counts(), 0.02);
        let xe = reduce(&x)?;
        let analytic = replicator_divergence_analytic(&game, &x)?;
        let fd = shah_divergence(&field, &xe, JacobianMode::FiniteDifference)?;
        let mut line = format!("{s}");
        for v in xe.blocks().iter().flatten() {
            line.push_str(&format!(",{v}"));
        }
        line.push_str(&format!(",{analytic},{fd},{}\n", (analytic - fd).abs()));
        text.push_str(&line);
    }
    if let Some(path) = out {
        std::fs::write(path, &text)?;
    }
    Ok(text)
}

#[derive(Debug, Serialize)]
pub struct VolumeReport {
    pub m: usize,
    pub closed_form: f64,
    pub quadrature: Option<f64>,
    pub abs_diff: Option<f64>,
    pub points: usize,
}

pub fn cmd_volume(m: usize, points: usize, tol: f64) -> Result<VolumeReport> {
    if m == 0 {
        return Err(Error::InvalidProfile("dimension must be at least 1".into()));
    }
    let closed = simplex_volume_shah(m);
    let quadrature = if m <= 2 {
        Some(simplex_volume_numeric(m, points, tol)?)
    } else {
        None
    };
    Ok(VolumeReport {
        m,
        closed_form: closed,
        quadrature,
        abs_diff: quadrature.map(|q| (q - closed).abs()),
        points,
    })
}

/// Shared helper: load a game or fall back to a built-in fixture.
pub fn load_game_or(input: Option<&Path>, fallback: fn() -> Game) -> Result<Game> {
    match input {
        Some(path) => json::read_game(path),
        None => Ok(fallback()),
    }
}

/// Round-trip check used by tests: an interior start embedded from
/// corner-of-cube coordinates.
pub fn interior_start(blocks: Vec<Vec<f64>>) -> Result<MixedProfile> {
    Ok(embed(&harmonica_core::EffProfile::new(blocks)?))
}
