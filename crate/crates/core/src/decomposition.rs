//! Potential / harmonic structure of games and the least-squares split.
//!
//! A game is harmonic when the net incentive to deviate toward or away
//! from every pure profile vanishes; it is incompressible when the
//! replicator field is divergence-free under the simplex metric. The two
//! coincide, and the divergence equals half the multilinear extension of
//! the per-profile deviation sum, so both tests reduce to the same pure
//! data.
//!
//! [`decompose`] splits any game into a common-interest potential part and
//! a harmonic remainder by least squares on the response graph (nodes are
//! pure profiles, edges join profiles differing in one player's action):
//! the normal equations are `L phi = -F` with `L` the graph Laplacian and
//! `F` the deviation sums. `L` has the constants as kernel, so `phi` is
//! pinned to zero at the all-zeros profile.

use rand::distributions::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

use crate::error::{Error, Result};
use crate::game::{Game, MixedProfile};
use crate::geometry::replicator_divergence_analytic;
use crate::linalg;

/// Per-profile net deviation incentive
/// `F(p) = sum_i sum_b [u_i(b; p_{-i}) - u_i(p)]`.
pub fn harmonicity_defect(g: &Game) -> Vec<f64> {
    let num = g.num_profiles();
    let mut defect = vec![0.0; num];
    for i in 0..g.num_players() {
        let n = g.action_counts()[i];
        let s = g.strides()[i];
        let tensor = g.payoff_tensor(i);
        for p in 0..num {
            let a = g.action_of(p, i);
            let base = p - a * s;
            let mut sum = 0.0;
            for b in 0..n {
                sum += tensor[base + b * s];
            }
            defect[p] += sum - n as f64 * tensor[p];
        }
    }
    defect
}

/// Multilinear extension of [`harmonicity_defect`] at a mixed profile.
pub fn harmonicity_defect_extension(g: &Game, x: &MixedProfile) -> f64 {
    let defect = harmonicity_defect(g);
    (0..g.num_profiles())
        .map(|p| {
            let profile = g.profile_of(p);
            let w: f64 = profile
                .iter()
                .enumerate()
                .map(|(j, &a)| x.block(j)[a])
                .product();
            w * defect[p]
        })
        .sum()
}

/// True iff the deviation sums vanish at every pure profile, up to `tol`.
pub fn is_harmonic(g: &Game, tol: f64) -> bool {
    harmonicity_defect(g).iter().all(|v| v.abs() <= tol)
}

/// True iff the replicator field is divergence-free. The exact certificate
/// is `max_p |F(p)| <= tol`; the closed-form divergence is additionally
/// sampled at `samples` interior points as a redundant cross-check (the
/// divergence is half the multilinear extension of `F`, so it can never
/// exceed the certificate).
pub fn is_incompressible(g: &Game, samples: usize, tol: f64) -> bool {
    if !is_harmonic(g, tol) {
        return false;
    }
    let mut rng = ChaCha12Rng::seed_from_u64(0x01CE);
    for _ in 0..samples {
        let x = MixedProfile::sample_interior(&mut rng, g.action_counts(), 0.0);
        match replicator_divergence_analytic(g, &x) {
            Ok(d) if d.abs() <= tol => {}
            _ => return false,
        }
    }
    true
}

/// Outcome of exact-potential extraction.
#[derive(Debug, Clone)]
pub enum PotentialOutcome {
    /// The game admits an exact potential; `phi` is pinned to 0 at the
    /// all-zeros profile.
    Exact { phi: Vec<f64> },
    /// No exact potential; the largest deviation mismatch found.
    Inexact { max_violation: f64 },
}

impl PotentialOutcome {
    pub fn phi(&self) -> Option<&[f64]> {
        match self {
            PotentialOutcome::Exact { phi } => Some(phi),
            PotentialOutcome::Inexact { .. } => None,
        }
    }
}

/// Reconstruct a potential by integrating deviation gains along coordinate
/// paths (player 0's action first, then player 1's, and so on), then check
/// that every unilateral deviation difference matches the potential
/// difference within `tol`.
pub fn extract_potential(g: &Game, tol: f64) -> PotentialOutcome {
    let num = g.num_profiles();
    let mut phi = vec![0.0; num];
    for p in 1..num {
        let profile = g.profile_of(p);
        // last player with a nonzero action moves last along the path
        let i = profile
            .iter()
            .rposition(|&a| a > 0)
            .expect("nonzero profile");
        let prev = p - profile[i] * g.strides()[i];
        phi[p] = phi[prev] + g.payoff_at(i, p) - g.payoff_at(i, prev);
    }

    let mut max_violation: f64 = 0.0;
    for i in 0..g.num_players() {
        let n = g.action_counts()[i];
        let s = g.strides()[i];
        let tensor = g.payoff_tensor(i);
        for p in 0..num {
            let a = g.action_of(p, i);
            let base = p - a * s;
            for b in 0..n {
                let q = base + b * s;
                let dev = tensor[q] - tensor[p];
                let dphi = phi[q] - phi[p];
                max_violation = max_violation.max((dev - dphi).abs());
            }
        }
    }
    if max_violation <= tol {
        PotentialOutcome::Exact { phi }
    } else {
        PotentialOutcome::Inexact { max_violation }
    }
}

/// Which linear solver backs the least-squares split.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolverChoice {
    /// Dense Cholesky below 10^4 profiles, conjugate gradient above.
    Auto,
    ConjugateGradient,
    DenseCholesky,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolverKind {
    ConjugateGradient,
    DenseCholesky,
}

#[derive(Debug, Clone)]
pub struct SolverStats {
    pub solver: SolverKind,
    pub iterations: usize,
    /// Final relative residual of the normal equations.
    pub residual: f64,
}

#[derive(Debug, Clone)]
pub struct DecompositionResult {
    /// Least-squares potential over pure profiles, pinned to 0 at the
    /// all-zeros profile.
    pub potential_fn: Vec<f64>,
    /// Common-interest realization of the potential part.
    pub potential_game: Game,
    /// The remainder `g - potential_game`; harmonic up to solver residual.
    pub harmonic_game: Game,
    /// `max_p |F(p)|` of the harmonic part.
    pub residual_harmonicity: f64,
    pub solver_stats: SolverStats,
}

const DENSE_SOLVE_LIMIT: usize = 10_000;

/// Apply the response-graph Laplacian: `(L phi)(p) = deg * phi(p) - sum of
/// phi over neighbors`, with constant degree `sum_i (n_i - 1)`.
fn laplacian_apply(g: &Game, phi: &[f64], out: &mut [f64]) {
    let deg: usize = g.action_counts().iter().map(|n| n - 1).sum();
    for (o, &v) in out.iter_mut().zip(phi) {
        *o = deg as f64 * v;
    }
    for i in 0..g.num_players() {
        let n = g.action_counts()[i];
        let s = g.strides()[i];
        for p in 0..phi.len() {
            let a = g.action_of(p, i);
            let base = p - a * s;
            for b in 0..n {
                if b != a {
                    out[p] -= phi[base + b * s];
                }
            }
        }
    }
}

fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

/// Jacobi-preconditioned conjugate gradient on the singular but consistent
/// system `L phi = d` (`d` is orthogonal to the constants, and iterates
/// stay so when started from zero).
fn solve_cg(g: &Game, d: &[f64], tol: f64, max_iter: usize) -> Result<(Vec<f64>, SolverStats)> {
    let num = d.len();
    let deg: f64 = g.action_counts().iter().map(|n| (n - 1) as f64).sum();
    let d_norm = norm2(d);
    if d_norm == 0.0 {
        return Ok((
            vec![0.0; num],
            SolverStats {
                solver: SolverKind::ConjugateGradient,
                iterations: 0,
                residual: 0.0,
            },
        ));
    }
    let mut phi = vec![0.0; num];
    let mut r = d.to_vec();
    let mut z: Vec<f64> = r.iter().map(|v| v / deg).collect();
    let mut p = z.clone();
    let mut rz: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
    let mut ap = vec![0.0; num];
    for it in 1..=max_iter {
        laplacian_apply(g, &p, &mut ap);
        let pap: f64 = p.iter().zip(&ap).map(|(a, b)| a * b).sum();
        let alpha = rz / pap;
        for k in 0..num {
            phi[k] += alpha * p[k];
            r[k] -= alpha * ap[k];
        }
        let res = norm2(&r) / d_norm;
        if res <= tol {
            return Ok((
                phi,
                SolverStats {
                    solver: SolverKind::ConjugateGradient,
                    iterations: it,
                    residual: res,
                },
            ));
        }
        for k in 0..num {
            z[k] = r[k] / deg;
        }
        let rz_next: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
        let beta = rz_next / rz;
        rz = rz_next;
        for k in 0..num {
            p[k] = z[k] + beta * p[k];
        }
    }
    Err(Error::SolverDiverged {
        residual: norm2(&r) / d_norm,
        iterations: max_iter,
    })
}

/// Direct solve of the reduced system with the all-zeros profile pinned.
fn solve_dense(g: &Game, d: &[f64]) -> Result<(Vec<f64>, SolverStats)> {
    let num = d.len();
    let n = num - 1;
    let deg: usize = g.action_counts().iter().map(|c| c - 1).sum();
    let mut a = vec![0.0; n * n];
    for r in 0..n {
        a[r * n + r] = deg as f64;
    }
    for i in 0..g.num_players() {
        let ni = g.action_counts()[i];
        let s = g.strides()[i];
        for p in 1..num {
            let ai = g.action_of(p, i);
            let base = p - ai * s;
            for b in 0..ni {
                if b == ai {
                    continue;
                }
                let q = base + b * s;
                if q >= 1 {
                    a[(p - 1) * n + (q - 1)] -= 1.0;
                }
            }
        }
    }
    if !linalg::cholesky_factor(&mut a, n) {
        return Err(Error::SolverDiverged {
            residual: f64::INFINITY,
            iterations: 0,
        });
    }
    let reduced = linalg::cholesky_solve(&a, n, &d[1..]);
    let mut phi = vec![0.0; num];
    phi[1..].copy_from_slice(&reduced);
    let mut lphi = vec![0.0; num];
    laplacian_apply(g, &phi, &mut lphi);
    let d_norm = norm2(d);
    let res = if d_norm == 0.0 {
        0.0
    } else {
        let diff: f64 = lphi.iter().zip(d).map(|(a, b)| (a - b) * (a - b)).sum();
        diff.sqrt() / d_norm
    };
    Ok((
        phi,
        SolverStats {
            solver: SolverKind::DenseCholesky,
            iterations: 1,
            residual: res,
        },
    ))
}

/// Split `g` into a common-interest potential game plus a harmonic
/// remainder. `solver_tol` is the relative residual target of the normal
/// equations; `max_iter` bounds conjugate-gradient iterations.
pub fn decompose(g: &Game, solver_tol: f64, max_iter: usize) -> Result<DecompositionResult> {
    decompose_with(g, solver_tol, max_iter, SolverChoice::Auto)
}

pub fn decompose_with(
    g: &Game,
    solver_tol: f64,
    max_iter: usize,
    solver: SolverChoice,
) -> Result<DecompositionResult> {
    let defect = harmonicity_defect(g);
    let mut d: Vec<f64> = defect.iter().map(|v| -v).collect();
    // a defect at the rounding level of the payoffs carries no signal;
    // the potential part is zero
    let payoff_scale = (0..g.num_players())
        .flat_map(|i| g.payoff_tensor(i))
        .fold(0.0f64, |m, v| m.max(v.abs()));
    let deg: f64 = g.action_counts().iter().map(|n| (n - 1) as f64).sum();
    let noise_floor =
        32.0 * f64::EPSILON * payoff_scale * deg * (g.num_profiles() as f64).sqrt();
    if norm2(&d) <= noise_floor {
        d.iter_mut().for_each(|v| *v = 0.0);
    }
    let (mut phi, stats) = match solver {
        SolverChoice::ConjugateGradient => solve_cg(g, &d, solver_tol, max_iter)?,
        SolverChoice::DenseCholesky => solve_dense(g, &d)?,
        SolverChoice::Auto => {
            if g.num_profiles() <= DENSE_SOLVE_LIMIT {
                solve_dense(g, &d)?
            } else {
                solve_cg(g, &d, solver_tol, max_iter)?
            }
        }
    };
    let pin = phi[0];
    for v in &mut phi {
        *v -= pin;
    }

    let counts = g.action_counts().to_vec();
    let potential_game = Game::new(counts.clone(), vec![phi.clone(); counts.len()])?;
    let harmonic_payoffs: Vec<Vec<f64>> = (0..g.num_players())
        .map(|i| {
            g.payoff_tensor(i)
                .iter()
                .zip(&phi)
                .map(|(u, p)| u - p)
                .collect()
        })
        .collect();
    let harmonic_game = Game::new(counts, harmonic_payoffs)?;
    let residual_harmonicity = harmonicity_defect(&harmonic_game)
        .iter()
        .fold(0.0f64, |m, v| m.max(v.abs()));
    Ok(DecompositionResult {
        potential_fn: phi,
        potential_game,
        harmonic_game,
        residual_harmonicity,
        solver_stats: stats,
    })
}

/// Draw a game with i.i.d. uniform payoffs on `[-scale, scale]`.
pub fn random_game(action_counts: &[usize], seed: u64, scale: f64) -> Game {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let dist = Uniform::new_inclusive(-scale, scale);
    let num: usize = action_counts.iter().product();
    let payoffs = (0..action_counts.len())
        .map(|_| (0..num).map(|_| dist.sample(&mut rng)).collect())
        .collect();
    Game::new(action_counts.to_vec(), payoffs).expect("random payoffs are finite")
}

/// Harmonic component of a random game; passes [`is_harmonic`] at 1e-8.
pub fn random_harmonic(action_counts: &[usize], seed: u64, scale: f64) -> Game {
    let g = random_game(action_counts, seed, scale);
    let result = decompose(&g, 1e-13, 50 * g.num_profiles().max(100))
        .expect("decomposition of a random game");
    result.harmonic_game
}

/// Random exact-potential game: a random potential realized as a
/// common-interest game plus per-player payoffs that depend only on the
/// opponents' actions.
pub fn random_potential(action_counts: &[usize], seed: u64, scale: f64) -> Game {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let dist = Uniform::new_inclusive(-scale, scale);
    let num: usize = action_counts.iter().product();
    let phi: Vec<f64> = (0..num).map(|_| dist.sample(&mut rng)).collect();
    let probe = Game::new(action_counts.to_vec(), vec![vec![0.0; num]; action_counts.len()])
        .expect("probe game");
    let payoffs: Vec<Vec<f64>> = (0..action_counts.len())
        .map(|i| {
            let opp: usize = num / action_counts[i];
            let f: Vec<f64> = (0..opp).map(|_| dist.sample(&mut rng)).collect();
            (0..num)
                .map(|p| {
                    let mut key = 0usize;
                    for j in 0..action_counts.len() {
                        if j != i {
                            key = key * action_counts[j] + probe.action_of(p, j);
                        }
                    }
                    phi[p] + f[key]
                })
                .collect()
        })
        .collect();
    Game::new(action_counts.to_vec(), payoffs).expect("random payoffs are finite")
}
