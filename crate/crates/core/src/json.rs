//! Canonical JSON game format.
//!
//! ```json
//! {"players": 2, "actions": [2, 2], "payoffs": [[...], [...]]}
//! ```
//!
//! `payoffs[i]` is player `i`'s tensor flattened in row-major profile
//! order. Serialization is byte-stable for a given game.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::Game;

#[derive(Debug, Serialize, Deserialize)]
pub struct GameJson {
    pub players: usize,
    pub actions: Vec<usize>,
    pub payoffs: Vec<Vec<f64>>,
}

impl GameJson {
    pub fn from_game(g: &Game) -> Self {
        GameJson {
            players: g.num_players(),
            actions: g.action_counts().to_vec(),
            payoffs: (0..g.num_players())
                .map(|i| g.payoff_tensor(i).to_vec())
                .collect(),
        }
    }

    pub fn into_game(self) -> Result<Game> {
        if self.players != self.actions.len() {
            return Err(Error::InvalidGame(format!(
                "\"players\" is {} but \"actions\" lists {} players",
                self.players,
                self.actions.len()
            )));
        }
        Game::new(self.actions, self.payoffs)
    }
}

pub fn to_json_string(g: &Game) -> String {
    let mut s = serde_json::to_string_pretty(&GameJson::from_game(g))
        .expect("game serialization cannot fail");
    s.push('\n');
    s
}

pub fn from_json_str(s: &str) -> Result<Game> {
    let parsed: GameJson = serde_json::from_str(s)?;
    parsed.into_game()
}

pub fn write_game(g: &Game, path: &Path) -> Result<()> {
    std::fs::write(path, to_json_string(g))?;
    Ok(())
}

pub fn read_game(path: &Path) -> Result<Game> {
    let text = std::fs::read_to_string(path)?;
    from_json_str(&text)
}
