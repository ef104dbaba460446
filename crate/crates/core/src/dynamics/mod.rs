//! Exponential-weights learning and the replicator flow it induces.
//!
//! Trajectories are integrated in score space, `dy_i/dt = v_i(logit(y))`,
//! which keeps the strategy image inside the simplex with no clamping; the
//! mixed state is recovered through the logit map at output points. A
//! direct stepper in corner-of-cube coordinates is provided for
//! cross-validation.
//!
//! Along a trajectory the module tracks the conserved energy (the
//! action-count-weighted sum of KL divergences from the block
//! barycenters), the closed-form divergence of the replicator field,
//! per-player regret, the log volume of a propagated frame, and
//! near-returns to the initial point.

pub mod ode;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::game::{
    embed, payoff_field_raw, payoff_pair_matrix_raw, EffProfile, Game, MixedProfile,
};
use crate::geometry::replicator_divergence_analytic;
use crate::linalg;
use ode::{OdeOptions, OdeSolution};

/// Cumulative payoff scores, one block per player.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreState {
    pub blocks: Vec<Vec<f64>>,
}

impl ScoreState {
    pub fn zeros(action_counts: &[usize]) -> Self {
        ScoreState { blocks: action_counts.iter().map(|&n| vec![0.0; n]).collect() }
    }

    /// Scores whose logit image is the given interior profile.
    pub fn from_profile(x: &MixedProfile) -> Result<Self> {
        if !x.is_interior() {
            return Err(Error::Boundary("scores require an interior profile".into()));
        }
        Ok(ScoreState {
            blocks: x
                .blocks()
                .iter()
                .map(|b| b.iter().map(|v| v.ln()).collect())
                .collect(),
        })
    }

    fn flatten(&self) -> Vec<f64> {
        self.blocks.iter().flatten().copied().collect()
    }

    fn from_flat(flat: &[f64], action_counts: &[usize]) -> Self {
        let mut blocks = Vec::with_capacity(action_counts.len());
        let mut off = 0;
        for &n in action_counts {
            blocks.push(flat[off..off + n].to_vec());
            off += n;
        }
        ScoreState { blocks }
    }
}

fn log_sum_exp(v: &[f64]) -> f64 {
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    m + v.iter().map(|&a| (a - m).exp()).sum::<f64>().ln()
}

/// Logit choice map, max-shifted for overflow safety.
pub fn logit(y: &ScoreState) -> MixedProfile {
    let blocks = y
        .blocks
        .iter()
        .map(|b| {
            let m = b.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let mut e: Vec<f64> = b.iter().map(|&v| (v - m).exp()).collect();
            let sum: f64 = e.iter().sum();
            e.iter_mut().for_each(|v| *v /= sum);
            e
        })
        .collect();
    MixedProfile::new(blocks).expect("logit image lies on the simplex")
}

fn logit_blocks(flat: &[f64], action_counts: &[usize]) -> Vec<Vec<f64>> {
    let mut blocks = Vec::with_capacity(action_counts.len());
    let mut off = 0;
    for &n in action_counts {
        let b = &flat[off..off + n];
        let m = b.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut e: Vec<f64> = b.iter().map(|&v| (v - m).exp()).collect();
        let sum: f64 = e.iter().sum();
        e.iter_mut().for_each(|v| *v /= sum);
        blocks.push(e);
        off += n;
    }
    blocks
}

/// Replicator vector field in full coordinates,
/// `x_a (v_a - <v, x>)` per block. Defined on the whole simplex; it
/// vanishes along faces and at vertices.
pub fn replicator_field(g: &Game, x: &MixedProfile) -> Result<Vec<Vec<f64>>> {
    let v = crate::game::payoff_field(g, x)?;
    Ok(x.blocks()
        .iter()
        .zip(&v.blocks)
        .map(|(xb, vb)| {
            let u: f64 = xb.iter().zip(vb).map(|(&a, &b)| a * b).sum();
            xb.iter().zip(vb).map(|(&a, &b)| a * (b - u)).collect()
        })
        .collect())
}

/// Replicator field in corner-of-cube coordinates.
pub fn eff_replicator_field(g: &Game, x: &EffProfile) -> Result<Vec<Vec<f64>>> {
    let w = crate::game::eff_payoff_field(g, x)?;
    Ok(x.blocks()
        .iter()
        .zip(&w.blocks)
        .map(|(xb, wb)| {
            let mean: f64 = xb.iter().zip(wb).map(|(&a, &b)| a * b).sum();
            xb.iter().zip(wb).map(|(&a, &b)| a * (b - mean)).collect()
        })
        .collect())
}

fn eff_offsets(action_counts: &[usize]) -> (Vec<usize>, usize) {
    let mut offsets = Vec::with_capacity(action_counts.len());
    let mut total = 0;
    for &n in action_counts {
        offsets.push(total);
        total += n - 1;
    }
    (offsets, total)
}

/// Jacobian of the reduced payoff field at the full-coordinate point with
/// blocks `xb`. Row `(i, l)`, column `(j, m)`; the diagonal player blocks
/// vanish because a player's field never depends on the player's own mix.
fn eff_payfield_jacobian_raw(g: &Game, xb: &[Vec<f64>]) -> Vec<f64> {
    let counts = g.action_counts();
    let (offsets, dim) = eff_offsets(counts);
    let mut jac = vec![0.0; dim * dim];
    for i in 0..counts.len() {
        for j in 0..counts.len() {
            if i == j {
                continue;
            }
            let w = payoff_pair_matrix_raw(g, xb, i, j);
            let nj = counts[j];
            for l in 0..counts[i] - 1 {
                for m in 0..nj - 1 {
                    let entry = w[(l + 1) * nj + (m + 1)] - w[(l + 1) * nj]
                        - w[m + 1]
                        + w[0];
                    jac[(offsets[i] + l) * dim + offsets[j] + m] = entry;
                }
            }
        }
    }
    jac
}

/// Jacobian of the reduced payoff field at an interior point.
pub fn eff_payfield_jacobian(g: &Game, x: &EffProfile) -> Vec<f64> {
    eff_payfield_jacobian_raw(g, embed(x).blocks())
}

fn eff_blocks_of_full(xb: &[Vec<f64>]) -> Vec<Vec<f64>> {
    xb.iter().map(|b| b[1..].to_vec()).collect()
}

fn eff_field_raw(g: &Game, xb: &[Vec<f64>]) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let v = payoff_field_raw(g, xb);
    let w: Vec<Vec<f64>> = v
        .iter()
        .map(|vb| vb[1..].iter().map(|&c| c - vb[0]).collect())
        .collect();
    let xe = eff_blocks_of_full(xb);
    let field = xe
        .iter()
        .zip(&w)
        .map(|(xb, wb)| {
            let mean: f64 = xb.iter().zip(wb).map(|(&a, &b)| a * b).sum();
            xb.iter().zip(wb).map(|(&a, &b)| a * (b - mean)).collect()
        })
        .collect();
    (field, w)
}

/// Jacobian of the reduced replicator field at the full-coordinate point
/// with blocks `xb`, flattened row-major over the reduced coordinates.
fn eff_replicator_jacobian_raw(g: &Game, xb: &[Vec<f64>]) -> Vec<f64> {
    let counts = g.action_counts();
    let (offsets, dim) = eff_offsets(counts);
    let b = eff_payfield_jacobian_raw(g, xb);
    let (_, w) = eff_field_raw(g, xb);
    let xe = eff_blocks_of_full(xb);
    let mut jac = vec![0.0; dim * dim];
    for i in 0..counts.len() {
        let mi = counts[i] - 1;
        let mean: f64 = xe[i].iter().zip(&w[i]).map(|(&a, &b)| a * b).sum();
        for l in 0..mi {
            let row = offsets[i] + l;
            for j in 0..counts.len() {
                let mj = counts[j] - 1;
                for m in 0..mj {
                    let col = offsets[j] + m;
                    jac[row * dim + col] = if i == j {
                        let mut v = -xe[i][l] * w[i][m];
                        if l == m {
                            v += w[i][l] - mean;
                        }
                        v
                    } else {
                        let db = b[row * dim + col];
                        let mean_db: f64 = (0..mi)
                            .map(|k| xe[i][k] * b[(offsets[i] + k) * dim + col])
                            .sum();
                        xe[i][l] * (db - mean_db)
                    };
                }
            }
        }
    }
    jac
}

/// Jacobian of the reduced replicator field at an interior point.
pub fn eff_replicator_jacobian(g: &Game, x: &EffProfile) -> Vec<f64> {
    eff_replicator_jacobian_raw(g, embed(x).blocks())
}

/// Conserved energy of the flow on harmonic games: the action-count
/// weighted sum of KL divergences of the barycenters from the blocks,
/// `E(x) = -(sum_{i,a} log x_{ia} + sum_i n_i log n_i)`. Nonnegative, zero
/// exactly at the barycenter.
pub fn constant_of_motion(g: &Game, x: &MixedProfile) -> Result<f64> {
    if !x.is_interior() {
        return Err(Error::Boundary("energy is finite on the interior only".into()));
    }
    let mut e = 0.0;
    for (i, b) in x.blocks().iter().enumerate() {
        let n = g.action_counts()[i] as f64;
        e -= n * n.ln();
        for &v in b {
            e -= v.ln();
        }
    }
    Ok(e)
}

/// Energy evaluated from scores: `log x = y - logsumexp(y)` avoids any
/// underflow near the boundary.
pub fn energy_from_scores(y: &ScoreState, action_counts: &[usize]) -> f64 {
    let mut e = 0.0;
    for (b, &n) in y.blocks.iter().zip(action_counts) {
        let lse = log_sum_exp(b);
        e -= n as f64 * (n as f64).ln();
        for &v in b {
            e -= v - lse;
        }
    }
    e
}

#[derive(Debug, Clone)]
pub struct IntegrateOptions {
    pub rtol: f64,
    pub atol: f64,
    pub h_max: Option<f64>,
    pub max_steps: usize,
    /// Resample the trajectory on a uniform grid through the dense output
    /// instead of reporting accepted steps.
    pub sample_dt: Option<f64>,
}

impl Default for IntegrateOptions {
    fn default() -> Self {
        IntegrateOptions {
            rtol: 1e-9,
            atol: 1e-12,
            h_max: None,
            max_steps: 20_000_000,
            sample_dt: None,
        }
    }
}

impl IntegrateOptions {
    fn ode(&self) -> OdeOptions {
        OdeOptions {
            rtol: self.rtol,
            atol: self.atol,
            h_init: None,
            h_max: self.h_max,
            max_steps: self.max_steps,
        }
    }
}

/// A sampled trajectory with its diagnostics.
#[derive(Debug, Clone)]
pub struct TrajectoryRecord {
    pub times: Vec<f64>,
    pub states: Vec<MixedProfile>,
    /// Score states at the sample times, when the trajectory came from the
    /// score-space integrator.
    pub scores: Option<Vec<ScoreState>>,
    pub energy: Vec<f64>,
    pub divergence: Vec<f64>,
    /// Per-player regret at the final time.
    pub regret: Vec<f64>,
    /// Log volume of a propagated frame, when tracked.
    pub logvol: Option<Vec<f64>>,
}

fn score_ode_solution(
    g: &Game,
    x0: &MixedProfile,
    t_end: f64,
    opts: &IntegrateOptions,
) -> Result<OdeSolution> {
    if !x0.is_interior() {
        return Err(Error::Boundary("integration requires an interior start".into()));
    }
    let counts = g.action_counts().to_vec();
    let y0 = ScoreState::from_profile(x0)?.flatten();
    let f = |_t: f64, y: &[f64], dy: &mut [f64]| {
        let xb = logit_blocks(y, &counts);
        let v = payoff_field_raw(g, &xb);
        let mut off = 0;
        for vb in v {
            dy[off..off + vb.len()].copy_from_slice(&vb);
            off += vb.len();
        }
    };
    ode::solve(f, 0.0, t_end, &y0, &opts.ode())
}

fn sample_times(sol: &OdeSolution, t_end: f64, sample_dt: Option<f64>) -> Vec<f64> {
    match sample_dt {
        None => sol.times.clone(),
        Some(dt) => {
            let mut ts = Vec::new();
            let mut t = 0.0;
            while t < t_end - 1e-12 {
                ts.push(t);
                t += dt;
            }
            ts.push(t_end);
            ts
        }
    }
}

/// Integrate the exponential-weights flow of `g` from `x0` up to `t_end`,
/// recording states, energy, divergence, and final per-player regret.
pub fn integrate(
    g: &Game,
    x0: &MixedProfile,
    t_end: f64,
    opts: &IntegrateOptions,
) -> Result<TrajectoryRecord> {
    let sol = score_ode_solution(g, x0, t_end, opts)?;
    let counts = g.action_counts();
    let ts = sample_times(&sol, t_end, opts.sample_dt);

    let mut states = Vec::with_capacity(ts.len());
    let mut scores = Vec::with_capacity(ts.len());
    let mut energy = Vec::with_capacity(ts.len());
    let mut divergence = Vec::with_capacity(ts.len());
    for &t in &ts {
        let y = ScoreState::from_flat(&sol.eval(t), counts);
        let x = logit(&y);
        energy.push(energy_from_scores(&y, counts));
        divergence.push(replicator_divergence_analytic(g, &x)?);
        states.push(x);
        scores.push(y);
    }

    let mut record = TrajectoryRecord {
        times: ts,
        states,
        scores: Some(scores),
        energy,
        divergence,
        regret: Vec::new(),
        logvol: None,
    };
    record.regret = (0..g.num_players())
        .map(|i| regret(&record, g, i))
        .collect::<Result<_>>()?;
    Ok(record)
}

/// Direct integration of the replicator flow in corner-of-cube
/// coordinates, for cross-validating the score-space path.
pub fn integrate_eff(
    g: &Game,
    x0: &EffProfile,
    t_end: f64,
    opts: &IntegrateOptions,
) -> Result<(Vec<f64>, Vec<EffProfile>)> {
    let counts = g.action_counts().to_vec();
    let (offsets, dim) = eff_offsets(&counts);
    let flat0: Vec<f64> = x0.blocks().iter().flatten().copied().collect();
    let to_full = move |flat: &[f64]| -> Vec<Vec<f64>> {
        counts
            .iter()
            .enumerate()
            .map(|(i, &n)| {
                let slice = &flat[offsets[i]..offsets[i] + n - 1];
                let mut b = Vec::with_capacity(n);
                b.push(1.0 - slice.iter().sum::<f64>());
                b.extend_from_slice(slice);
                b
            })
            .collect()
    };
    let f = {
        let to_full = to_full.clone();
        move |_t: f64, x: &[f64], dx: &mut [f64]| {
            let xb = to_full(x);
            let (field, _) = eff_field_raw(g, &xb);
            let mut off = 0;
            for fb in field {
                dx[off..off + fb.len()].copy_from_slice(&fb);
                off += fb.len();
            }
        }
    };
    let sol = ode::solve(f, 0.0, t_end, &flat0, &opts.ode())?;
    let mut profiles = Vec::with_capacity(sol.times.len());
    for state in &sol.states {
        debug_assert_eq!(state.len(), dim);
        let blocks = eff_blocks_of_full(&to_full(state));
        profiles.push(EffProfile::new(blocks)?);
    }
    Ok((sol.times.clone(), profiles))
}

/// Regret of player `i` over the recorded horizon: the best fixed action's
/// cumulative payoff against the realized play, minus the realized
/// cumulative payoff.
///
/// With scores available both integrals are exact functions of the score
/// trajectory (`int v dt` is the score increment and `int u dt` the
/// increment of `logsumexp`); otherwise the integrals fall back to the
/// trapezoid rule on the sample grid.
pub fn regret(record: &TrajectoryRecord, g: &Game, i: usize) -> Result<f64> {
    let series = regret_series(record, g, i)?;
    Ok(*series.last().expect("record is nonempty"))
}

/// Regret of player `i` at every recorded time.
pub fn regret_series(record: &TrajectoryRecord, g: &Game, i: usize) -> Result<Vec<f64>> {
    if record.times.is_empty() {
        return Err(Error::ShapeMismatch("empty trajectory record".into()));
    }
    if let Some(scores) = &record.scores {
        let y0 = &scores[0].blocks[i];
        let lse0 = log_sum_exp(y0);
        return Ok(scores
            .iter()
            .map(|y| {
                let yt = &y.blocks[i];
                let best = yt
                    .iter()
                    .zip(y0)
                    .map(|(a, b)| a - b)
                    .fold(f64::NEG_INFINITY, f64::max);
                best - (log_sum_exp(yt) - lse0)
            })
            .collect());
    }
    regret_series_trapezoid(record, g, i)
}

/// Trapezoid-rule regret on the sample grid, independent of scores.
pub fn regret_series_trapezoid(
    record: &TrajectoryRecord,
    g: &Game,
    i: usize,
) -> Result<Vec<f64>> {
    let n = g.action_counts()[i];
    let mut cumulative = vec![0.0; n];
    let mut series = Vec::with_capacity(record.times.len());
    let mut prev: Option<(f64, Vec<f64>)> = None;
    for (&t, x) in record.times.iter().zip(&record.states) {
        let v = crate::game::payoff_field(g, x)?;
        let u: f64 = v.blocks[i].iter().zip(x.block(i)).map(|(&a, &b)| a * b).sum();
        let gain: Vec<f64> = v.blocks[i].iter().map(|&a| a - u).collect();
        if let Some((tp, gp)) = prev {
            let h = t - tp;
            for (c, (a, b)) in cumulative.iter_mut().zip(gp.iter().zip(&gain)) {
                *c += 0.5 * h * (a + b);
            }
        }
        series.push(cumulative.iter().copied().fold(f64::NEG_INFINITY, f64::max));
        prev = Some((t, gain));
    }
    Ok(series)
}

/// Two independent log-volume ledgers along one trajectory.
#[derive(Debug, Clone)]
pub struct VolumeTrack {
    pub times: Vec<f64>,
    /// `log(sqrt(det G) |det J|)` relative to the start, with `J` the
    /// frame propagated by the variational equation.
    pub logvol_jacobian: Vec<f64>,
    /// Time integral of the closed-form divergence.
    pub logvol_divergence: Vec<f64>,
}

impl VolumeTrack {
    /// Largest departure of the Jacobian ledger from its initial value.
    pub fn jacobian_drift(&self) -> f64 {
        self.logvol_jacobian.iter().fold(0.0f64, |m, &v| m.max(v.abs()))
    }

    /// Largest disagreement between the two ledgers.
    pub fn max_method_gap(&self) -> f64 {
        self.logvol_jacobian
            .iter()
            .zip(&self.logvol_divergence)
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()))
    }
}

/// Track the volume of an infinitesimal frame along the flow from `x0`.
///
/// The flow Jacobian obeys the variational equation `dJ/dt = A J` with `A`
/// the field Jacobian; the metric factor `sqrt(det G)` is evaluated from
/// the scores. The divergence ledger integrates the closed-form divergence
/// alongside and must agree.
pub fn volume_tracker(
    g: &Game,
    x0: &EffProfile,
    t_end: f64,
    opts: &IntegrateOptions,
) -> Result<VolumeTrack> {
    let counts = g.action_counts().to_vec();
    let (_, m_dim) = eff_offsets(&counts);
    let s_dim: usize = counts.iter().sum();
    let full0 = embed(x0);
    let y0 = ScoreState::from_profile(&full0)?.flatten();

    // state = scores, then J row-major, then the divergence integral
    let mut state0 = y0;
    for r in 0..m_dim {
        for c in 0..m_dim {
            state0.push(if r == c { 1.0 } else { 0.0 });
        }
    }
    state0.push(0.0);

    let f = |_t: f64, s: &[f64], ds: &mut [f64]| {
        let xb = logit_blocks(&s[..s_dim], &counts);
        let v = payoff_field_raw(g, &xb);
        let mut off = 0;
        for vb in &v {
            ds[off..off + vb.len()].copy_from_slice(vb);
            off += vb.len();
        }
        let a = eff_replicator_jacobian_raw(g, &xb);
        let j = &s[s_dim..s_dim + m_dim * m_dim];
        for r in 0..m_dim {
            for c in 0..m_dim {
                let mut acc = 0.0;
                for k in 0..m_dim {
                    acc += a[r * m_dim + k] * j[k * m_dim + c];
                }
                ds[s_dim + r * m_dim + c] = acc;
            }
        }
        // closed-form divergence from the payoff field already in hand
        let mut div = 0.0;
        for (i, vb) in v.iter().enumerate() {
            let u: f64 = vb.iter().zip(&xb[i]).map(|(&a, &b)| a * b).sum();
            div += 0.5 * vb.iter().map(|&w| w - u).sum::<f64>();
        }
        ds[s_dim + m_dim * m_dim] = div;
    };
    let sol = ode::solve(f, 0.0, t_end, &state0, &opts.ode())?;

    let log_sqrt_det = |flat: &[f64]| -> f64 {
        // log sqrt(det G) = -0.5 * sum log x, from scores
        let y = ScoreState::from_flat(&flat[..s_dim], &counts);
        let mut acc = 0.0;
        for b in &y.blocks {
            let lse = log_sum_exp(b);
            for &v in b {
                acc -= 0.5 * (v - lse);
            }
        }
        acc
    };
    let base = log_sqrt_det(&sol.states[0]);

    let mut logvol_jacobian = Vec::with_capacity(sol.times.len());
    let mut logvol_divergence = Vec::with_capacity(sol.times.len());
    for state in &sol.states {
        let j = &state[s_dim..s_dim + m_dim * m_dim];
        let dj = linalg::det(j, m_dim);
        if dj <= 0.0 {
            return Err(Error::NonFinite("flow Jacobian lost orientation".into()));
        }
        logvol_jacobian.push(log_sqrt_det(state) - base + dj.ln());
        logvol_divergence.push(state[s_dim + m_dim * m_dim]);
    }
    Ok(VolumeTrack { times: sol.times, logvol_jacobian, logvol_divergence })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Recurrent,
    NotObserved,
}

/// Near-returns of a trajectory to its starting point.
#[derive(Debug, Clone, Serialize)]
pub struct RecurrenceReport {
    pub epsilon: f64,
    /// Times of re-entry into the epsilon ball, counted with hysteresis:
    /// the orbit must leave the 2-epsilon ball before a return may count.
    pub return_times: Vec<f64>,
    /// First time the orbit left the epsilon ball, if it did.
    pub first_exit: Option<f64>,
    /// Per accepted step, the smallest distance to the start seen in that
    /// step and the time it occurred.
    pub min_distance_envelope: Vec<(f64, f64)>,
    pub verdict: Verdict,
}

/// Integrate from `x0` up to `t_max` and report epsilon-returns to `x0`.
/// Distances are Euclidean over all mixed coordinates. The dense output is
/// subsampled finely enough that the inter-sample displacement stays well
/// below `epsilon`.
pub fn detect_recurrence(
    g: &Game,
    x0: &MixedProfile,
    epsilon: f64,
    t_max: f64,
    opts: &IntegrateOptions,
) -> Result<RecurrenceReport> {
    if epsilon <= 0.0 {
        return Err(Error::InvalidProfile("epsilon must be positive".into()));
    }
    let sol = score_ode_solution(g, x0, t_max, opts)?;
    let counts = g.action_counts();
    let x0_flat: Vec<f64> = x0.blocks().iter().flatten().copied().collect();

    let dist_at = |y_flat: &[f64]| -> f64 {
        let xb = logit_blocks(y_flat, counts);
        xb.iter()
            .flatten()
            .zip(&x0_flat)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    };

    let mut return_times = Vec::new();
    let mut first_exit = None;
    let mut envelope = Vec::with_capacity(sol.segments.len());
    let mut armed = false; // true once the orbit has left the 2-eps ball
    let mut y_buf = vec![0.0; sol.dim()];

    for seg in &sol.segments {
        seg.eval_into(seg.t0, &mut y_buf);
        let d_start = dist_at(&y_buf);
        seg.eval_into(seg.t1(), &mut y_buf);
        let d_end = dist_at(&y_buf);
        let displacement = (d_end - d_start).abs().max(1e-12);
        let n_sub = ((8.0 * displacement / epsilon).ceil() as usize).clamp(2, 4096);

        let mut seg_min = (seg.t0, d_start);
        for s in 0..=n_sub {
            let t = seg.t0 + seg.h * s as f64 / n_sub as f64;
            seg.eval_into(t, &mut y_buf);
            let d = dist_at(&y_buf);
            if d < seg_min.1 {
                seg_min = (t, d);
            }
            if first_exit.is_none() && d > epsilon {
                first_exit = Some(t);
            }
            if !armed && d > 2.0 * epsilon {
                armed = true;
            } else if armed && d < epsilon {
                return_times.push(t);
                armed = false;
            }
        }
        envelope.push(seg_min);
    }

    let verdict = if return_times.len() >= 3 {
        Verdict::Recurrent
    } else {
        Verdict::NotObserved
    };
    Ok(RecurrenceReport {
        epsilon,
        return_times,
        first_exit,
        min_distance_envelope: envelope,
        verdict,
    })
}

/// Damped Newton iteration on the reduced payoff field, searching for an
/// interior zero (a fully mixed rest point of the flow). Returns `None`
/// when the Jacobian is singular, the damping underflows, or `max_iter`
/// runs out.
pub fn interior_rest_point(
    g: &Game,
    x_init: &EffProfile,
    newton_tol: f64,
    max_iter: usize,
) -> Option<EffProfile> {
    let counts = g.action_counts().to_vec();
    let (offsets, dim) = eff_offsets(&counts);
    let mut x: Vec<f64> = x_init.blocks().iter().flatten().copied().collect();

    let to_full = |flat: &[f64]| -> Vec<Vec<f64>> {
        counts
            .iter()
            .enumerate()
            .map(|(i, &n)| {
                let slice = &flat[offsets[i]..offsets[i] + n - 1];
                let mut b = Vec::with_capacity(n);
                b.push(1.0 - slice.iter().sum::<f64>());
                b.extend_from_slice(slice);
                b
            })
            .collect()
    };
    let interior = |flat: &[f64]| -> bool {
        for (i, &n) in counts.iter().enumerate() {
            let slice = &flat[offsets[i]..offsets[i] + n - 1];
            if slice.iter().any(|&v| v <= 1e-12) {
                return false;
            }
            if slice.iter().sum::<f64>() >= 1.0 - 1e-12 {
                return false;
            }
        }
        true
    };
    let field = |flat: &[f64]| -> Vec<f64> {
        let xb = to_full(flat);
        let v = payoff_field_raw(g, &xb);
        let mut w = Vec::with_capacity(dim);
        for vb in v {
            for &c in &vb[1..] {
                w.push(c - vb[0]);
            }
        }
        w
    };

    for _ in 0..max_iter {
        let w = field(&x);
        let norm = w.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if norm <= newton_tol {
            let xb = to_full(&x);
            return EffProfile::new(eff_blocks_of_full(&xb)).ok();
        }
        let mut jac = eff_payfield_jacobian_raw(g, &to_full(&x));
        let (perm, _) = linalg::lu_factor(&mut jac, dim)?;
        let rhs: Vec<f64> = w.iter().map(|v| -v).collect();
        let step = linalg::lu_solve(&jac, dim, &perm, &rhs);
        let mut sigma = 1.0;
        loop {
            let trial: Vec<f64> = x.iter().zip(&step).map(|(a, d)| a + sigma * d).collect();
            if interior(&trial) {
                x = trial;
                break;
            }
            sigma *= 0.5;
            if sigma < 1e-12 {
                return None;
            }
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::game::{eff_payoff_field, mixed_payoff, reduce};
    use crate::geometry::metric_eff_inverse;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    #[test]
    fn logit_basics() {
        let x = logit(&ScoreState { blocks: vec![vec![0.0, 0.0]] });
        assert_eq!(x.block(0), &[0.5, 0.5]);

        let x = logit(&ScoreState { blocks: vec![vec![0.0, 3f64.ln()]] });
        assert!((x.block(0)[0] - 0.25).abs() < 1e-15);
        assert!((x.block(0)[1] - 0.75).abs() < 1e-15);

        // the max shift keeps huge scores finite; the sum 1000 + ln 2
        // itself carries ~1e-13 of rounding
        let x = logit(&ScoreState { blocks: vec![vec![1000.0, 1000.0 + 2f64.ln()]] });
        assert!(x.block(0).iter().all(|v| v.is_finite()));
        assert!((x.block(0)[0] - 1.0 / 3.0).abs() < 1e-12);
        assert!((x.block(0)[1] - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn replicator_field_rest_points() {
        let g = fixtures::matching_pennies();
        let vertex = MixedProfile::vertex(&[2, 2], &[0, 1]);
        let f = replicator_field(&g, &vertex).unwrap();
        assert!(f.iter().flatten().all(|&v| v == 0.0));

        let bary = MixedProfile::uniform(&[2, 2]);
        let f = replicator_field(&g, &bary).unwrap();
        assert!(f.iter().flatten().all(|&v| v.abs() < 1e-15));
    }

    #[test]
    fn replicator_field_of_single_player_game() {
        let g = fixtures::single_player_two_actions();
        let mut rng = ChaCha12Rng::seed_from_u64(3);
        for _ in 0..10 {
            let x = MixedProfile::sample_interior(&mut rng, &[2], 0.0);
            let (xa, xb) = (x.block(0)[0], x.block(0)[1]);
            let f = replicator_field(&g, &x).unwrap();
            assert!((f[0][0] - (-xa * xb)).abs() < 1e-15);
            assert!((f[0][1] - (xb - xb * xb)).abs() < 1e-15);
        }
    }

    #[test]
    fn eff_field_closed_form_in_two_by_two() {
        let g = fixtures::prisoners_dilemma();
        let mut rng = ChaCha12Rng::seed_from_u64(5);
        for _ in 0..10 {
            let xe = EffProfile::sample_interior(&mut rng, &[2, 2], 0.0);
            let f = eff_replicator_field(&g, &xe).unwrap();
            let w = eff_payoff_field(&g, &xe).unwrap();
            for i in 0..2 {
                let xv = xe.block(i)[0];
                assert!((f[i][0] - xv * (1.0 - xv) * w.blocks[i][0]).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn eff_field_is_reduction_of_full_field() {
        let g = fixtures::harmonic_two_by_three(1.0, 2.0);
        let mut rng = ChaCha12Rng::seed_from_u64(7);
        for _ in 0..20 {
            let xe = EffProfile::sample_interior(&mut rng, &[2, 3], 0.0);
            let f_eff = eff_replicator_field(&g, &xe).unwrap();
            let f_full = replicator_field(&g, &embed(&xe)).unwrap();
            for i in 0..2 {
                for l in 0..f_eff[i].len() {
                    assert!((f_eff[i][l] - f_full[i][l + 1]).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn eff_field_is_inverse_metric_times_payfield() {
        let g = fixtures::harmonic_222();
        let mut rng = ChaCha12Rng::seed_from_u64(11);
        for _ in 0..50 {
            let xe = EffProfile::sample_interior(&mut rng, &[2, 2, 2], 1e-3);
            let f = eff_replicator_field(&g, &xe).unwrap();
            let w = eff_payoff_field(&g, &xe).unwrap();
            for i in 0..3 {
                let inv = metric_eff_inverse(&xe, i);
                for l in 0..f[i].len() {
                    let got: f64 = inv[l].iter().zip(&w.blocks[i]).map(|(a, b)| a * b).sum();
                    assert!((f[i][l] - got).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn replicator_jacobian_matches_finite_differences() {
        let g = fixtures::harmonic_two_by_three(1.0, -0.5);
        let mut rng = ChaCha12Rng::seed_from_u64(13);
        let xe = EffProfile::sample_interior(&mut rng, &[2, 3], 0.05);
        let jac = eff_replicator_jacobian(&g, &xe);
        let dim = 3;
        let flat: Vec<f64> = xe.blocks().iter().flatten().copied().collect();
        let eval = |flat: &[f64]| -> Vec<f64> {
            let blocks = vec![flat[0..1].to_vec(), flat[1..3].to_vec()];
            let xe = EffProfile::new(blocks).unwrap();
            eff_replicator_field(&g, &xe)
                .unwrap()
                .into_iter()
                .flatten()
                .collect()
        };
        let h = 1e-6;
        for c in 0..dim {
            let mut hi = flat.clone();
            hi[c] += h;
            let mut lo = flat.clone();
            lo[c] -= h;
            let f_hi = eval(&hi);
            let f_lo = eval(&lo);
            for r in 0..dim {
                let fd = (f_hi[r] - f_lo[r]) / (2.0 * h);
                assert!(
                    (jac[r * dim + c] - fd).abs() < 1e-6,
                    "entry ({r},{c}): {} vs {fd}",
                    jac[r * dim + c]
                );
            }
        }
    }

    #[test]
    fn energy_at_barycenter_and_frozen_point() {
        let g = fixtures::prisoners_dilemma();
        let bary = MixedProfile::uniform(&[2, 2]);
        assert!(constant_of_motion(&g, &bary).unwrap().abs() < 1e-15);

        let x = MixedProfile::new(vec![vec![0.75, 0.25], vec![0.75, 0.25]]).unwrap();
        let e = constant_of_motion(&g, &x).unwrap();
        // -2 (ln(3/4) + ln(1/4)) - 4 ln 2
        assert!((e - 0.5753641449035618).abs() < 1e-12, "{e}");
        assert!(e > 0.0);

        let boundary = MixedProfile::vertex(&[2, 2], &[0, 0]);
        assert!(constant_of_motion(&g, &boundary).is_err());
    }

    #[test]
    fn energy_from_scores_matches_direct_formula() {
        let g = fixtures::harmonic_two_by_three(2.0, 1.0);
        let mut rng = ChaCha12Rng::seed_from_u64(17);
        for _ in 0..10 {
            let x = MixedProfile::sample_interior(&mut rng, &[2, 3], 1e-6);
            let y = ScoreState::from_profile(&x).unwrap();
            let a = constant_of_motion(&g, &x).unwrap();
            let b = energy_from_scores(&y, g.action_counts());
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn prisoners_dilemma_converges_to_defection() {
        let g = fixtures::prisoners_dilemma();
        let x0 = MixedProfile::uniform(&[2, 2]);
        let rec = integrate(&g, &x0, 50.0, &IntegrateOptions::default()).unwrap();
        let last = rec.states.last().unwrap();
        let vertex = MixedProfile::vertex(&[2, 2], &[1, 1]);
        assert!(last.euclidean_distance(&vertex) < 1e-3);
        assert!(rec.states.iter().all(MixedProfile::is_interior));
        // energy is not conserved here
        let drift = rec
            .energy
            .iter()
            .fold(0.0f64, |m, &e| m.max((e - rec.energy[0]).abs()));
        assert!(drift > 1e-2);
    }

    #[test]
    fn matching_pennies_conserves_energy() {
        let g = fixtures::matching_pennies();
        let x0 = embed(&EffProfile::new(vec![vec![0.3], vec![0.3]]).unwrap());
        let rec = integrate(&g, &x0, 100.0, &IntegrateOptions::default()).unwrap();
        let drift = rec
            .energy
            .iter()
            .fold(0.0f64, |m, &e| m.max((e - rec.energy[0]).abs()));
        assert!(drift < 1e-7, "energy drift {drift}");
        for x in &rec.states {
            assert!(x.is_interior());
            for b in x.blocks() {
                assert!(b.iter().all(|&v| v > 1e-12));
                assert!((b.iter().sum::<f64>() - 1.0).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn energy_derivative_is_minus_twice_divergence() {
        // d/dt E = -sum (v - u) = -2 div, algebraically, at any interior x
        let g = fixtures::prisoners_dilemma();
        let mut rng = ChaCha12Rng::seed_from_u64(19);
        for _ in 0..10 {
            let x = MixedProfile::sample_interior(&mut rng, &[2, 2], 1e-3);
            let v = crate::game::payoff_field(&g, &x).unwrap();
            let mut de = 0.0;
            for i in 0..2 {
                let u: f64 = v.blocks[i].iter().zip(x.block(i)).map(|(a, b)| a * b).sum();
                de -= v.blocks[i].iter().map(|&w| w - u).sum::<f64>();
            }
            let div = replicator_divergence_analytic(&g, &x).unwrap();
            assert!((de + 2.0 * div).abs() < 1e-12);
        }
    }

    #[test]
    fn score_and_direct_steppers_agree() {
        let g = fixtures::matching_pennies();
        let xe0 = EffProfile::new(vec![vec![0.3], vec![0.4]]).unwrap();
        let opts = IntegrateOptions { sample_dt: Some(0.5), ..IntegrateOptions::default() };
        let rec = integrate(&g, &embed(&xe0), 10.0, &opts).unwrap();
        let (ts, xs) = integrate_eff(&g, &xe0, 10.0, &IntegrateOptions::default()).unwrap();
        // compare at the direct stepper's accepted times via dense record
        for (t, xe) in ts.iter().zip(&xs) {
            // find the nearest recorded sample
            let k = rec
                .times
                .iter()
                .position(|&rt| (rt - t).abs() < 0.25)
                .map(|k0| {
                    let mut best = k0;
                    for k in k0..rec.times.len() {
                        if (rec.times[k] - t).abs() < (rec.times[best] - t).abs() {
                            best = k;
                        }
                    }
                    best
                });
            if let Some(k) = k {
                if (rec.times[k] - t).abs() < 1e-9 {
                    let full = embed(xe);
                    let d = rec.states[k].euclidean_distance(&full);
                    assert!(d < 1e-6, "at t={t}: {d}");
                }
            }
        }
        let _ = ts;
    }

    #[test]
    fn regret_stays_under_log_action_count() {
        let bound = 2f64.ln() + 1e-6;
        for g in [fixtures::matching_pennies(), fixtures::prisoners_dilemma()] {
            let x0 = MixedProfile::uniform(&[2, 2]);
            let rec = integrate(&g, &x0, 50.0, &IntegrateOptions::default()).unwrap();
            for i in 0..2 {
                let series = regret_series(&rec, &g, i).unwrap();
                assert!(series.iter().all(|&r| r <= bound));
            }
        }
    }

    #[test]
    fn exact_and_trapezoid_regret_agree() {
        let g = fixtures::matching_pennies();
        let x0 = embed(&EffProfile::new(vec![vec![0.35], vec![0.45]]).unwrap());
        let opts = IntegrateOptions { sample_dt: Some(0.01), ..IntegrateOptions::default() };
        let rec = integrate(&g, &x0, 20.0, &opts).unwrap();
        for i in 0..2 {
            let exact = regret(&rec, &g, i).unwrap();
            let trap = *regret_series_trapezoid(&rec, &g, i).unwrap().last().unwrap();
            assert!((exact - trap).abs() < 1e-3, "{exact} vs {trap}");
        }
    }

    #[test]
    fn constant_record_at_pure_equilibrium_has_no_regret() {
        let g = fixtures::prisoners_dilemma();
        let ne = MixedProfile::vertex(&[2, 2], &[1, 1]);
        let record = TrajectoryRecord {
            times: vec![0.0, 1.0, 2.0],
            states: vec![ne.clone(), ne.clone(), ne],
            scores: None,
            energy: vec![],
            divergence: vec![],
            regret: vec![],
            logvol: None,
        };
        for i in 0..2 {
            assert!(regret(&record, &g, i).unwrap() <= 0.0);
        }
    }

    #[test]
    fn volume_is_preserved_on_harmonic_games_only() {
        let opts = IntegrateOptions::default();
        let mp = fixtures::matching_pennies();
        let xe0 = EffProfile::new(vec![vec![0.3], vec![0.35]]).unwrap();
        let track = volume_tracker(&mp, &xe0, 50.0, &opts).unwrap();
        assert!(track.jacobian_drift() < 1e-5, "drift {}", track.jacobian_drift());
        assert!(track.max_method_gap() < 1e-5);

        let pd = fixtures::prisoners_dilemma();
        let near_vertex = EffProfile::new(vec![vec![0.9], vec![0.9]]).unwrap();
        let track = volume_tracker(&pd, &near_vertex, 10.0, &opts).unwrap();
        let last = *track.logvol_jacobian.last().unwrap();
        assert!(last < -0.1, "contraction expected, got {last}");
        assert!(track.max_method_gap() < 1e-5);
        // strictly decreasing along the approach to the attracting vertex
        for w in track.logvol_jacobian.windows(2) {
            assert!(w[1] < w[0] + 1e-12);
        }
    }

    #[test]
    fn recurrence_verdicts() {
        let opts = IntegrateOptions::default();
        let mp = fixtures::matching_pennies();
        let x0 = embed(&EffProfile::new(vec![vec![0.3], vec![0.3]]).unwrap());
        let report = detect_recurrence(&mp, &x0, 1e-3, 200.0, &opts).unwrap();
        assert_eq!(report.verdict, Verdict::Recurrent);
        assert!(report.return_times.len() >= 3);
        assert!(report.first_exit.is_some());
        for w in report.return_times.windows(2) {
            assert!(w[1] > w[0]);
        }

        let pd = fixtures::prisoners_dilemma();
        let x0 = MixedProfile::uniform(&[2, 2]);
        let report = detect_recurrence(&pd, &x0, 1e-3, 200.0, &opts).unwrap();
        assert_eq!(report.verdict, Verdict::NotObserved);
        assert!(report.return_times.is_empty());
    }

    #[test]
    fn rest_point_of_matching_pennies() {
        let g = fixtures::matching_pennies();
        let init = EffProfile::new(vec![vec![0.2], vec![0.7]]).unwrap();
        let star = interior_rest_point(&g, &init, 1e-12, 50).unwrap();
        assert!((star.block(0)[0] - 0.5).abs() < 1e-12);
        assert!((star.block(1)[0] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn rest_point_absent_for_prisoners_dilemma() {
        let g = fixtures::prisoners_dilemma();
        let init = EffProfile::new(vec![vec![0.5], vec![0.5]]).unwrap();
        assert!(interior_rest_point(&g, &init, 1e-10, 50).is_none());
    }

    #[test]
    fn rest_point_of_two_by_three_harmonic_family() {
        let g = fixtures::harmonic_two_by_three(1.0, 2.0);
        let init = reduce(&MixedProfile::uniform(&[2, 3])).unwrap();
        let star = interior_rest_point(&g, &init, 1e-10, 100).unwrap();
        let w = eff_payoff_field(&g, &star).unwrap();
        let norm = w.blocks.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(norm <= 1e-10, "residual {norm}");
        // genuinely a rest point of the flow
        let f = eff_replicator_field(&g, &star).unwrap();
        assert!(f.iter().flatten().all(|v| v.abs() < 1e-10));
    }

    #[test]
    fn potential_increases_along_potential_game_trajectories() {
        let g = fixtures::prisoners_dilemma();
        let phi = fixtures::prisoners_dilemma_potential();
        let phi_game = fixtures::common_interest(&[2, 2], &phi);
        let x0 = MixedProfile::new(vec![vec![0.6, 0.4], vec![0.55, 0.45]]).unwrap();
        let rec = integrate(&g, &x0, 30.0, &IntegrateOptions::default()).unwrap();
        let mut prev = f64::NEG_INFINITY;
        for x in &rec.states {
            let val = mixed_payoff(&phi_game, x, 0).unwrap();
            assert!(val >= prev - 1e-9, "{val} < {prev}");
            prev = val;
        }
    }
}
