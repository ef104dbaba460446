//! Interpolation experiment between a potential and a harmonic game:
//! integrate the flow of `lambda * P + (1 - lambda) * H` across a grid of
//! lambda values and report, per value, the recurrence verdict, the energy
//! drift, and the distance of the final state to the nearest vertex.

use serde::Serialize;

use harmonica_core::dynamics::{
    detect_recurrence, integrate, IntegrateOptions, Verdict,
};
use harmonica_core::{Error, Game, MixedProfile, Result};

/// Parameters of one sweep.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub lambda_grid: Vec<f64>,
    pub t_end: f64,
    pub rtol: f64,
    pub atol: f64,
    /// Ball radius for recurrence detection.
    pub eps: f64,
    /// A final state closer than this to a vertex counts as converged.
    pub vertex_tol: f64,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.t_end <= 0.0 {
            return Err(Error::InvalidProfile("t_end must be positive".into()));
        }
        if self.lambda_grid.is_empty()
            || self.lambda_grid.iter().any(|l| !(0.0..=1.0).contains(l))
        {
            return Err(Error::InvalidProfile(
                "lambda grid must be nonempty with values in [0, 1]".into(),
            ));
        }
        Ok(())
    }

    /// Evenly spaced grid with `k >= 2` points from 0 to 1.
    pub fn even_grid(k: usize) -> Vec<f64> {
        let k = k.max(2);
        (0..k).map(|j| j as f64 / (k - 1) as f64).collect()
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct LambdaRow {
    pub lambda: f64,
    pub recurrent: bool,
    pub n_returns: usize,
    pub energy_drift: f64,
    pub final_vertex_distance: f64,
    pub converged_to_pure: bool,
}

fn run_one(
    potential: &Game,
    harmonic: &Game,
    lambda: f64,
    x0: &MixedProfile,
    config: &ExperimentConfig,
) -> Result<LambdaRow> {
    let game = Game::weighted_sum(&[(lambda, potential), (1.0 - lambda, harmonic)])?;
    let opts = IntegrateOptions {
        rtol: config.rtol,
        atol: config.atol,
        ..IntegrateOptions::default()
    };
    let record = integrate(&game, x0, config.t_end, &opts)?;
    let report = detect_recurrence(&game, x0, config.eps, config.t_end, &opts)?;
    let e0 = record.energy[0];
    let drift = record.energy.iter().fold(0.0f64, |m, e| m.max((e - e0).abs()));
    let final_vertex_distance = record
        .states
        .last()
        .expect("nonempty record")
        .distance_to_nearest_vertex();
    Ok(LambdaRow {
        lambda,
        recurrent: report.verdict == Verdict::Recurrent,
        n_returns: report.return_times.len(),
        energy_drift: drift,
        final_vertex_distance,
        converged_to_pure: final_vertex_distance < config.vertex_tol,
    })
}

/// Worker cap: the `HARMONICA_THREADS` variable when set, otherwise the
/// available parallelism.
pub fn worker_cap() -> usize {
    std::env::var("HARMONICA_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&n| n >= 1)
        .unwrap_or_else(|| {
            std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
        })
}

/// Run the sweep; rows come back in grid order. Lambda values are
/// processed in parallel, each worker owning its integrator state.
pub fn run_mixture(
    potential: &Game,
    harmonic: &Game,
    config: &ExperimentConfig,
) -> Result<Vec<LambdaRow>> {
    config.validate()?;
    if potential.action_counts() != harmonic.action_counts() {
        return Err(Error::ShapeMismatch(
            "potential and harmonic games must share a shape".into(),
        ));
    }
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(config.seed);
    let x0 = MixedProfile::sample_interior(&mut rng, potential.action_counts(), 0.05);

    let workers = worker_cap().min(config.lambda_grid.len()).max(1);
    let mut rows: Vec<Option<Result<LambdaRow>>> =
        (0..config.lambda_grid.len()).map(|_| None).collect();
    let next = std::sync::atomic::AtomicUsize::new(0);
    let rows_mutex = std::sync::Mutex::new(&mut rows);
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let k = next.fetch_add(1, std::sync::atomic::Ordering::SeqCst);
                if k >= config.lambda_grid.len() {
                    break;
                }
                let row = run_one(potential, harmonic, config.lambda_grid[k], &x0, config);
                rows_mutex.lock().expect("worker poisoned the row store")[k] = Some(row);
            });
        }
    });
    rows.into_iter()
        .map(|r| r.expect("every grid index was claimed by a worker"))
        .collect()
}

/// Fixed-width text table of the sweep results.
pub fn format_table(rows: &[LambdaRow]) -> String {
    let mut out = String::from(
        "lambda    recurrent  returns  energy_drift   vertex_dist    converged\n",
    );
    for r in rows {
        out.push_str(&format!(
            "{:<9.5} {:<10} {:<8} {:<14.6e} {:<14.6e} {}\n",
            r.lambda, r.recurrent, r.n_returns, r.energy_drift, r.final_vertex_distance,
            r.converged_to_pure,
        ));
    }
    out
}
