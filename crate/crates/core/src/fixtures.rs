//! Reference games used by the test suites, the command-line experiments,
//! and the documentation examples.

use crate::game::Game;

/// Matching Pennies: zero-sum, harmonic, unique fully mixed equilibrium.
pub fn matching_pennies() -> Game {
    let u1 = vec![1.0, -1.0, -1.0, 1.0];
    let u2 = vec![-1.0, 1.0, 1.0, -1.0];
    Game::new(vec![2, 2], vec![u1, u2]).expect("valid fixture")
}

/// Matching Pennies scaled by 3.
pub fn rescaled_matching_pennies() -> Game {
    let u1 = vec![3.0, -3.0, -3.0, 3.0];
    let u2 = vec![-3.0, 3.0, 3.0, -3.0];
    Game::new(vec![2, 2], vec![u1, u2]).expect("valid fixture")
}

/// Prisoner's Dilemma with payoffs `u1 = (2, 0, 3, 1)`, `u2 = (2, 3, 0, 1)`
/// in row-major order over (cooperate, defect) pairs. An exact potential
/// game with potential `(-1, 0, 0, 1)`.
pub fn prisoners_dilemma() -> Game {
    let u1 = vec![2.0, 0.0, 3.0, 1.0];
    let u2 = vec![2.0, 3.0, 0.0, 1.0];
    Game::new(vec![2, 2], vec![u1, u2]).expect("valid fixture")
}

/// The potential of [`prisoners_dilemma`], flat over its four profiles.
pub fn prisoners_dilemma_potential() -> Vec<f64> {
    vec![-1.0, 0.0, 0.0, 1.0]
}

/// A 2x3 family that is harmonic for every `(a, b)` and zero-sum for none
/// (player 2 earns `-2/3` of player 1's payoff).
pub fn harmonic_two_by_three(a: f64, b: f64) -> Game {
    let u1 = vec![a, b, -a - b, -a, -b, a + b];
    let u2: Vec<f64> = u1.iter().map(|v| -2.0 / 3.0 * v).collect();
    Game::new(vec![2, 3], vec![u1, u2]).expect("valid fixture")
}

/// One-player game with payoffs 0 and 1. Trivially a potential game, yet
/// its replicator field is not a Euclidean gradient.
pub fn single_player_two_actions() -> Game {
    Game::new(vec![2], vec![vec![0.0, 1.0]]).expect("valid fixture")
}

/// The all-zero game of a given shape.
pub fn zero_game(action_counts: &[usize]) -> Game {
    let p: usize = action_counts.iter().product();
    Game::new(action_counts.to_vec(), vec![vec![0.0; p]; action_counts.len()])
        .expect("valid fixture")
}

/// Common-interest game: every player receives `w`.
pub fn common_interest(action_counts: &[usize], w: &[f64]) -> Game {
    Game::new(
        action_counts.to_vec(),
        vec![w.to_vec(); action_counts.len()],
    )
    .expect("valid fixture")
}

/// Three-player, two-action potential game used by the interpolation
/// experiment between convergent and recurrent regimes.
pub fn potential_222() -> Game {
    let profiles: [[usize; 3]; 8] = [
        [0, 0, 0],
        [1, 0, 0],
        [0, 1, 0],
        [1, 1, 0],
        [0, 0, 1],
        [1, 0, 1],
        [0, 1, 1],
        [1, 1, 1],
    ];
    let u1 = [-14.0, -8.0, -18.0, -7.0, 13.0, 8.0, -8.0, 1.0];
    let u2 = [-16.0, -16.0, 2.0, 7.0, 6.0, 0.0, -1.0, 7.0];
    let u3 = [-7.0, 0.0, 2.0, 8.0, 8.0, 4.0, -8.0, -4.0];
    let entries: Vec<Vec<(&[usize], f64)>> = [u1, u2, u3]
        .iter()
        .map(|u| {
            profiles
                .iter()
                .zip(u.iter())
                .map(|(p, &v)| (p.as_slice(), v))
                .collect()
        })
        .collect();
    Game::from_entries(vec![2, 2, 2], &entries).expect("valid fixture")
}

/// Three-player, two-action harmonic game paired with [`potential_222`].
pub fn harmonic_222() -> Game {
    let profiles: [[usize; 3]; 8] = [
        [0, 0, 0],
        [1, 0, 0],
        [0, 1, 0],
        [1, 1, 0],
        [0, 0, 1],
        [1, 0, 1],
        [0, 1, 1],
        [1, 1, 1],
    ];
    let u1 = [7.0, 2.0, 1.0, 7.0, -29.0, -6.0, 24.0, 0.0];
    let u2 = [-15.0, -3.0, -10.0, 2.0, 23.0, -9.0, 0.0, 4.0];
    let u3 = [-8.0, 4.0, 1.0, -6.0, -8.0, -6.0, 0.0, 5.0];
    let entries: Vec<Vec<(&[usize], f64)>> = [u1, u2, u3]
        .iter()
        .map(|u| {
            profiles
                .iter()
                .zip(u.iter())
                .map(|(p, &v)| (p.as_slice(), v))
                .collect()
        })
        .collect();
    Game::from_entries(vec![2, 2, 2], &entries).expect("valid fixture")
}
