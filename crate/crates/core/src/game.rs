//! Finite normal-form games as dense payoff tensors.
//!
//! A [`Game`] holds one payoff tensor per player over the common profile
//! space, stored flat in row-major profile order (the last player's action
//! index varies fastest). Mixed strategies live on a product of simplices
//! ([`MixedProfile`]); dropping action 0 of every player gives the
//! corner-of-cube coordinates ([`EffProfile`]) used by the geometric and
//! dynamic machinery.

use rand::Rng;

use crate::error::{Error, Result};

/// Sum tolerance for simplex membership checks.
pub const SIMPLEX_SUM_TOL: f64 = 1e-12;

/// A finite game in normal form: `N` players, `action_counts[i]` pure
/// actions for player `i`, and one dense payoff tensor per player.
#[derive(Debug, Clone, PartialEq)]
pub struct Game {
    action_counts: Vec<usize>,
    payoffs: Vec<Vec<f64>>,
    strides: Vec<usize>,
}

fn row_major_strides(counts: &[usize]) -> Vec<usize> {
    let mut strides = vec![1usize; counts.len()];
    for i in (0..counts.len().saturating_sub(1)).rev() {
        strides[i] = strides[i + 1] * counts[i + 1];
    }
    strides
}

impl Game {
    /// Build a game from action counts and flat per-player payoff tensors.
    ///
    /// Rejects games with fewer than one player, any player with fewer than
    /// two actions, tensors of the wrong length, and non-finite entries.
    pub fn new(action_counts: Vec<usize>, payoffs: Vec<Vec<f64>>) -> Result<Self> {
        if action_counts.is_empty() {
            return Err(Error::InvalidGame("at least one player required".into()));
        }
        if let Some(i) = action_counts.iter().position(|&n| n < 2) {
            return Err(Error::InvalidGame(format!(
                "player {i} has {} actions; at least 2 required",
                action_counts[i]
            )));
        }
        let num_profiles: usize = action_counts.iter().product();
        if payoffs.len() != action_counts.len() {
            return Err(Error::InvalidGame(format!(
                "{} payoff tensors for {} players",
                payoffs.len(),
                action_counts.len()
            )));
        }
        for (i, tensor) in payoffs.iter().enumerate() {
            if tensor.len() != num_profiles {
                return Err(Error::InvalidGame(format!(
                    "payoff tensor of player {i} has {} entries, expected {num_profiles}",
                    tensor.len()
                )));
            }
            if let Some(k) = tensor.iter().position(|v| !v.is_finite()) {
                return Err(Error::InvalidGame(format!(
                    "payoff tensor of player {i} has non-finite entry at flat index {k}"
                )));
            }
        }
        let strides = row_major_strides(&action_counts);
        Ok(Game { action_counts, payoffs, strides })
    }

    /// Build a game by listing `(profile, value)` entries per player.
    /// Every profile of every player must be covered exactly once.
    pub fn from_entries(
        action_counts: Vec<usize>,
        entries: &[Vec<(&[usize], f64)>],
    ) -> Result<Self> {
        let num_profiles: usize = action_counts.iter().product();
        let strides = row_major_strides(&action_counts);
        let mut payoffs = Vec::with_capacity(entries.len());
        for (i, per_player) in entries.iter().enumerate() {
            let mut tensor = vec![f64::NAN; num_profiles];
            for (profile, value) in per_player {
                let mut idx = 0usize;
                for (j, &a) in profile.iter().enumerate() {
                    idx += a * strides[j];
                }
                tensor[idx] = *value;
            }
            if tensor.iter().any(|v| v.is_nan()) {
                return Err(Error::InvalidGame(format!(
                    "entry list of player {i} does not cover every profile"
                )));
            }
            payoffs.push(tensor);
        }
        Game::new(action_counts, payoffs)
    }

    pub fn num_players(&self) -> usize {
        self.action_counts.len()
    }

    pub fn action_counts(&self) -> &[usize] {
        &self.action_counts
    }

    /// Number of pure profiles, `prod_i action_counts[i]`.
    pub fn num_profiles(&self) -> usize {
        self.action_counts.iter().product()
    }

    /// Row-major strides of the profile space.
    pub fn strides(&self) -> &[usize] {
        &self.strides
    }

    /// Flat payoff tensor of player `i`.
    pub fn payoff_tensor(&self, i: usize) -> &[f64] {
        &self.payoffs[i]
    }

    /// Payoff of player `i` at the pure profile with flat index `idx`.
    pub fn payoff_at(&self, i: usize, idx: usize) -> f64 {
        self.payoffs[i][idx]
    }

    /// Payoff of player `i` at a pure profile given as action indices.
    pub fn payoff(&self, i: usize, profile: &[usize]) -> f64 {
        self.payoffs[i][self.flat_index(profile)]
    }

    pub fn flat_index(&self, profile: &[usize]) -> usize {
        profile
            .iter()
            .zip(&self.strides)
            .map(|(a, s)| a * s)
            .sum()
    }

    pub fn profile_of(&self, mut idx: usize) -> Vec<usize> {
        let mut profile = vec![0usize; self.num_players()];
        for (i, &s) in self.strides.iter().enumerate() {
            profile[i] = idx / s;
            idx %= s;
        }
        profile
    }

    /// Action of player `i` in the profile with flat index `idx`.
    pub fn action_of(&self, idx: usize, i: usize) -> usize {
        (idx / self.strides[i]) % self.action_counts[i]
    }

    /// Entry-wise linear combination of same-shaped games.
    pub fn weighted_sum(terms: &[(f64, &Game)]) -> Result<Game> {
        let first = terms
            .first()
            .ok_or_else(|| Error::InvalidGame("empty combination".into()))?
            .1;
        let counts = first.action_counts.clone();
        for (_, g) in terms {
            if g.action_counts != counts {
                return Err(Error::ShapeMismatch(format!(
                    "cannot combine games of shapes {:?} and {:?}",
                    counts, g.action_counts
                )));
            }
        }
        let num_profiles = first.num_profiles();
        let mut payoffs = vec![vec![0.0; num_profiles]; counts.len()];
        for (c, g) in terms {
            for (i, tensor) in g.payoffs.iter().enumerate() {
                for (dst, src) in payoffs[i].iter_mut().zip(tensor) {
                    *dst += c * src;
                }
            }
        }
        Game::new(counts, payoffs)
    }

    fn check_blocks(&self, blocks: &[Vec<f64>], what: &str) -> Result<()> {
        if blocks.len() != self.num_players() {
            return Err(Error::ShapeMismatch(format!(
                "{what} has {} blocks for a {}-player game",
                blocks.len(),
                self.num_players()
            )));
        }
        for (i, b) in blocks.iter().enumerate() {
            if b.len() != self.action_counts[i] {
                return Err(Error::ShapeMismatch(format!(
                    "{what} block {i} has {} entries, expected {}",
                    b.len(),
                    self.action_counts[i]
                )));
            }
        }
        Ok(())
    }
}

/// A point of the product of simplices: one probability vector per player.
#[derive(Debug, Clone, PartialEq)]
pub struct MixedProfile {
    blocks: Vec<Vec<f64>>,
}

impl MixedProfile {
    /// Validate non-negativity and unit block sums (within [`SIMPLEX_SUM_TOL`]).
    pub fn new(blocks: Vec<Vec<f64>>) -> Result<Self> {
        for (i, b) in blocks.iter().enumerate() {
            if b.len() < 2 {
                return Err(Error::InvalidProfile(format!(
                    "block {i} has fewer than 2 entries"
                )));
            }
            if b.iter().any(|v| !v.is_finite() || *v < 0.0) {
                return Err(Error::InvalidProfile(format!(
                    "block {i} has a negative or non-finite entry"
                )));
            }
            let sum: f64 = b.iter().sum();
            if (sum - 1.0).abs() > SIMPLEX_SUM_TOL {
                return Err(Error::InvalidProfile(format!(
                    "block {i} sums to {sum}, not 1"
                )));
            }
        }
        Ok(MixedProfile { blocks })
    }

    /// The barycenter of every block.
    pub fn uniform(action_counts: &[usize]) -> Self {
        let blocks = action_counts
            .iter()
            .map(|&n| vec![1.0 / n as f64; n])
            .collect();
        MixedProfile { blocks }
    }

    /// The pure profile `profile` as a vertex of the product of simplices.
    pub fn vertex(action_counts: &[usize], profile: &[usize]) -> Self {
        let blocks = action_counts
            .iter()
            .zip(profile)
            .map(|(&n, &a)| {
                let mut b = vec![0.0; n];
                b[a] = 1.0;
                b
            })
            .collect();
        MixedProfile { blocks }
    }

    /// Draw a profile uniformly from the product of simplices, resampling
    /// until every coordinate is at least `margin` away from the boundary.
    pub fn sample_interior<R: Rng>(rng: &mut R, action_counts: &[usize], margin: f64) -> Self {
        loop {
            let blocks: Vec<Vec<f64>> = action_counts
                .iter()
                .map(|&n| {
                    let mut b: Vec<f64> = (0..n).map(|_| -rng.gen::<f64>().ln()).collect();
                    let sum: f64 = b.iter().sum();
                    for v in &mut b {
                        *v /= sum;
                    }
                    b
                })
                .collect();
            if blocks.iter().all(|b| b.iter().all(|&v| v >= margin)) {
                return MixedProfile { blocks };
            }
        }
    }

    pub fn blocks(&self) -> &[Vec<f64>] {
        &self.blocks
    }

    pub fn block(&self, i: usize) -> &[f64] {
        &self.blocks[i]
    }

    /// True iff every coordinate is strictly positive.
    pub fn is_interior(&self) -> bool {
        self.blocks.iter().all(|b| b.iter().all(|&v| v > 0.0))
    }

    /// Replace one block, revalidating it.
    pub fn with_block(&self, i: usize, block: Vec<f64>) -> Result<Self> {
        let mut blocks = self.blocks.clone();
        blocks[i] = block;
        MixedProfile::new(blocks)
    }

    /// Euclidean distance to another profile over all coordinates.
    pub fn euclidean_distance(&self, other: &MixedProfile) -> f64 {
        self.blocks
            .iter()
            .flatten()
            .zip(other.blocks.iter().flatten())
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }

    /// Distance to the nearest vertex of the product of simplices.
    pub fn distance_to_nearest_vertex(&self) -> f64 {
        self.blocks
            .iter()
            .map(|b| {
                let best = b
                    .iter()
                    .copied()
                    .fold(f64::NEG_INFINITY, f64::max);
                b.iter()
                    .map(|&v| {
                        let target = if v == best { 1.0 } else { 0.0 };
                        (v - target) * (v - target)
                    })
                    .sum::<f64>()
            })
            .sum::<f64>()
            .sqrt()
    }
}

/// Corner-of-cube coordinates: per player the probabilities of actions
/// `1..n_i`, each positive with block sum strictly below 1.
#[derive(Debug, Clone, PartialEq)]
pub struct EffProfile {
    blocks: Vec<Vec<f64>>,
}

impl EffProfile {
    pub fn new(blocks: Vec<Vec<f64>>) -> Result<Self> {
        for (i, b) in blocks.iter().enumerate() {
            if b.is_empty() {
                return Err(Error::InvalidProfile(format!("block {i} is empty")));
            }
            if b.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidProfile(format!(
                    "block {i} has a non-finite entry"
                )));
            }
            if b.iter().any(|&v| v <= 0.0) {
                return Err(Error::Boundary(format!(
                    "block {i} has a coordinate at or below 0"
                )));
            }
            let sum: f64 = b.iter().sum();
            if sum >= 1.0 {
                return Err(Error::Boundary(format!(
                    "block {i} sums to {sum}, leaving no mass for action 0"
                )));
            }
        }
        Ok(EffProfile { blocks })
    }

    pub fn sample_interior<R: Rng>(rng: &mut R, action_counts: &[usize], margin: f64) -> Self {
        reduce(&MixedProfile::sample_interior(rng, action_counts, margin))
            .expect("sampled profile is interior")
    }

    pub fn blocks(&self) -> &[Vec<f64>] {
        &self.blocks
    }

    pub fn block(&self, i: usize) -> &[f64] {
        &self.blocks[i]
    }

    /// Probability of action 0 for player `i`.
    pub fn mass_on_zero(&self, i: usize) -> f64 {
        1.0 - self.blocks[i].iter().sum::<f64>()
    }

    /// Total number of coordinates, `sum_i (n_i - 1)`.
    pub fn dim(&self) -> usize {
        self.blocks.iter().map(Vec::len).sum()
    }
}

/// Per-player payoffs to each pure action against the opponents' mix.
#[derive(Debug, Clone, PartialEq)]
pub struct PayoffField {
    pub blocks: Vec<Vec<f64>>,
}

/// Payoff field in corner-of-cube coordinates: per player the payoff
/// advantage of each action `1..n_i` over action 0.
#[derive(Debug, Clone, PartialEq)]
pub struct EffPayoffField {
    pub blocks: Vec<Vec<f64>>,
}

/// Contract `axis` of a flat row-major tensor against the weights `w`.
fn contract_axis(tensor: &[f64], shape: &[usize], axis: usize, w: &[f64]) -> Vec<f64> {
    let n = shape[axis];
    let inner: usize = shape[axis + 1..].iter().product();
    let outer: usize = shape[..axis].iter().product();
    let mut out = vec![0.0; outer * inner];
    for o in 0..outer {
        for k in 0..n {
            let wk = w[k];
            let src = (o * n + k) * inner;
            let dst = o * inner;
            for r in 0..inner {
                out[dst + r] += wk * tensor[src + r];
            }
        }
    }
    out
}

/// Contract every axis except those in `keep` (given in increasing order)
/// against the corresponding weight blocks. The result is flat row-major
/// over the kept axes.
fn contract_all_but(tensor: &[f64], shape: &[usize], keep: &[usize], blocks: &[Vec<f64>]) -> Vec<f64> {
    let mut cur = tensor.to_vec();
    let mut cur_shape = shape.to_vec();
    for axis in (0..shape.len()).rev() {
        if keep.contains(&axis) {
            continue;
        }
        cur = contract_axis(&cur, &cur_shape, axis, &blocks[axis]);
        cur_shape.remove(axis);
    }
    cur
}

/// Payoff field from raw coordinate blocks, without profile validation.
/// The multilinear forms are defined on all of the ambient space, so the
/// integrator may call this on trial points slightly off the simplex.
pub(crate) fn payoff_field_raw(g: &Game, blocks: &[Vec<f64>]) -> Vec<Vec<f64>> {
    (0..g.num_players())
        .map(|i| contract_all_but(g.payoff_tensor(i), g.action_counts(), &[i], blocks))
        .collect()
}

pub(crate) fn payoff_pair_matrix_raw(
    g: &Game,
    blocks: &[Vec<f64>],
    i: usize,
    j: usize,
) -> Vec<f64> {
    let keep = if i < j { [i, j] } else { [j, i] };
    let flat = contract_all_but(g.payoff_tensor(i), g.action_counts(), &keep, blocks);
    if i < j {
        return flat;
    }
    let (nj, ni) = (g.action_counts()[j], g.action_counts()[i]);
    let mut out = vec![0.0; ni * nj];
    for b in 0..nj {
        for a in 0..ni {
            out[a * nj + b] = flat[b * ni + a];
        }
    }
    out
}

/// Expected payoff of player `i` under the mixed profile `x`, computed by
/// sequential tensor contraction (one axis per player).
pub fn mixed_payoff(g: &Game, x: &MixedProfile, i: usize) -> Result<f64> {
    g.check_blocks(x.blocks(), "mixed profile")?;
    let out = contract_all_but(g.payoff_tensor(i), g.action_counts(), &[], x.blocks());
    Ok(out[0])
}

/// The payoff field at `x`: block `i` lists the payoff of each pure action
/// of player `i` against the opponents' mixed strategies. Block `i` never
/// depends on `x`'s block `i`.
pub fn payoff_field(g: &Game, x: &MixedProfile) -> Result<PayoffField> {
    g.check_blocks(x.blocks(), "mixed profile")?;
    Ok(PayoffField { blocks: payoff_field_raw(g, x.blocks()) })
}

/// Second partials of the multilinear payoff: entry `[a * n_j + b]` is the
/// payoff of player `i` with `i` pinned to action `a` and `j` pinned to
/// action `b`, the remaining players mixing per `x`. Requires `i != j`.
pub fn payoff_pair_matrix(g: &Game, x: &MixedProfile, i: usize, j: usize) -> Result<Vec<f64>> {
    g.check_blocks(x.blocks(), "mixed profile")?;
    Ok(payoff_pair_matrix_raw(g, x.blocks(), i, j))
}

/// Map corner-of-cube coordinates back onto the product of simplices by
/// restoring each block's action-0 coordinate.
pub fn embed(x_eff: &EffProfile) -> MixedProfile {
    let blocks = x_eff
        .blocks()
        .iter()
        .map(|b| {
            let mut full = Vec::with_capacity(b.len() + 1);
            full.push(1.0 - b.iter().sum::<f64>());
            full.extend_from_slice(b);
            full
        })
        .collect();
    MixedProfile { blocks }
}

/// Drop each block's action-0 coordinate. Errors on boundary profiles.
pub fn reduce(x: &MixedProfile) -> Result<EffProfile> {
    if !x.is_interior() {
        return Err(Error::Boundary(
            "corner-of-cube coordinates are defined on the interior only".into(),
        ));
    }
    EffProfile::new(x.blocks().iter().map(|b| b[1..].to_vec()).collect())
}

/// Payoff field in corner-of-cube coordinates at `x_eff`.
pub fn eff_payoff_field(g: &Game, x_eff: &EffProfile) -> Result<EffPayoffField> {
    let full = payoff_field(g, &embed(x_eff))?;
    Ok(EffPayoffField {
        blocks: full
            .blocks
            .iter()
            .map(|v| v[1..].iter().map(|&w| w - v[0]).collect())
            .collect(),
    })
}

/// Deviation differences on pure profiles: for player `i`, profile `p`
/// (flat index) and action `b`, the gain from switching to `b`.
#[derive(Debug, Clone)]
pub struct DeviationFlow {
    /// `per_player[i][p * n_i + b] = u_i(b; p_{-i}) - u_i(p)`.
    pub per_player: Vec<Vec<f64>>,
}

impl DeviationFlow {
    pub fn of(g: &Game) -> Self {
        let per_player = (0..g.num_players())
            .map(|i| {
                let n = g.action_counts()[i];
                let s = g.strides()[i];
                let tensor = g.payoff_tensor(i);
                let mut flow = vec![0.0; g.num_profiles() * n];
                for p in 0..g.num_profiles() {
                    let a = g.action_of(p, i);
                    let base = tensor[p];
                    for b in 0..n {
                        let q = (p as isize + (b as isize - a as isize) * s as isize) as usize;
                        flow[p * n + b] = tensor[q] - base;
                    }
                }
                flow
            })
            .collect();
        DeviationFlow { per_player }
    }

    /// Gain for player `i` of switching from profile `p` to action `b`.
    pub fn gain(&self, g: &Game, i: usize, p: usize, b: usize) -> f64 {
        self.per_player[i][p * g.action_counts()[i] + b]
    }
}

/// True iff every player is indifferent among own actions at every pure
/// profile, up to `tol`.
pub fn is_non_strategic(g: &Game, tol: f64) -> bool {
    for i in 0..g.num_players() {
        let n = g.action_counts()[i];
        let s = g.strides()[i];
        let tensor = g.payoff_tensor(i);
        for p in 0..g.num_profiles() {
            if g.action_of(p, i) != 0 {
                continue;
            }
            let mut lo = f64::INFINITY;
            let mut hi = f64::NEG_INFINITY;
            for b in 0..n {
                let v = tensor[p + b * s];
                lo = lo.min(v);
                hi = hi.max(v);
            }
            if hi - lo > tol {
                return false;
            }
        }
    }
    true
}

/// True iff `g` and `h` have the same deviation differences on every pure
/// profile, for every player and every unilateral deviation, up to `tol`.
pub fn is_strategically_equivalent(g: &Game, h: &Game, tol: f64) -> Result<bool> {
    if g.action_counts() != h.action_counts() {
        return Err(Error::ShapeMismatch(format!(
            "games of shapes {:?} and {:?}",
            g.action_counts(),
            h.action_counts()
        )));
    }
    for i in 0..g.num_players() {
        let n = g.action_counts()[i];
        let s = g.strides()[i];
        let (tg, th) = (g.payoff_tensor(i), h.payoff_tensor(i));
        for p in 0..g.num_profiles() {
            if g.action_of(p, i) != 0 {
                continue;
            }
            for a in 0..n {
                for b in (a + 1)..n {
                    let dg = tg[p + b * s] - tg[p + a * s];
                    let dh = th[p + b * s] - th[p + a * s];
                    if (dg - dh).abs() > tol {
                        return Ok(false);
                    }
                }
            }
        }
    }
    Ok(true)
}
