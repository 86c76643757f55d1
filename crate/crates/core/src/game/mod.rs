//! Normal-form games and the zero-sum gifting extension.
//!
//! Payoffs are stored densely: one flat tensor per player, indexed in
//! row-major order with player 0 as the most significant axis. Games here
//! are small (a handful of players and actions), so every query is an
//! exact lookup and every enumeration is exhaustive.

mod coordination;
mod document;
mod gifting;
mod graph;
mod repeated;

pub use coordination::{coordination_game, stag_hunt, CoordinationKind, CoordinationParams};
pub use document::GameDocument;
pub use gifting::{extend_with_gifting, gift_transfer, GiftSet, GiftedGame};
pub use graph::{fully_connected_edges, make_graph_stag_hunt, GraphGame};
pub use repeated::{Observation, RepeatedGame, RepeatedStep};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One action index per player.
pub type JointAction = Vec<usize>;

/// An N-player game in normal form with dense payoff tensors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalFormGame {
    action_counts: Vec<usize>,
    strides: Vec<usize>,
    payoffs: Vec<Vec<f64>>,
    labels: Vec<Vec<String>>,
}

impl NormalFormGame {
    /// Builds a game from per-player payoff tensors laid out in row-major
    /// order over the joint action space.
    pub fn new(action_counts: Vec<usize>, payoffs: Vec<Vec<f64>>) -> Result<Self> {
        if action_counts.is_empty() {
            return Err(Error::input("a game needs at least one player"));
        }
        if let Some(p) = action_counts.iter().position(|&n| n == 0) {
            return Err(Error::input(format!("player {p} has no actions")));
        }
        if payoffs.len() != action_counts.len() {
            return Err(Error::input(format!(
                "expected {} payoff tensors, got {}",
                action_counts.len(),
                payoffs.len()
            )));
        }
        let size: usize = action_counts.iter().product();
        for (player, tensor) in payoffs.iter().enumerate() {
            if tensor.len() != size {
                return Err(Error::input(format!(
                    "payoff tensor of player {player} has {} entries, expected {size}",
                    tensor.len()
                )));
            }
            if let Some(k) = tensor.iter().position(|v| !v.is_finite()) {
                return Err(Error::input(format!(
                    "payoff tensor of player {player} has a non-finite entry at {k}"
                )));
            }
        }
        let mut strides = vec![1; action_counts.len()];
        for i in (0..action_counts.len() - 1).rev() {
            strides[i] = strides[i + 1] * action_counts[i + 1];
        }
        let labels = action_counts
            .iter()
            .map(|&n| (0..n).map(|a| format!("a{a}")).collect())
            .collect();
        Ok(Self {
            action_counts,
            strides,
            payoffs,
            labels,
        })
    }

    /// Builds a two-player game from row/column payoff matrices.
    pub fn bimatrix(row: &[Vec<f64>], col: &[Vec<f64>]) -> Result<Self> {
        let rows = row.len();
        let cols = row.first().map_or(0, Vec::len);
        if col.len() != rows || row.iter().chain(col).any(|r| r.len() != cols) {
            return Err(Error::input("bimatrix payoffs must be rectangular and equal in shape"));
        }
        let flat = |m: &[Vec<f64>]| m.iter().flatten().copied().collect::<Vec<_>>();
        Self::new(vec![rows, cols], vec![flat(row), flat(col)])
    }

    pub fn with_labels(mut self, labels: Vec<Vec<String>>) -> Result<Self> {
        if labels.len() != self.num_players()
            || labels.iter().zip(&self.action_counts).any(|(l, &n)| l.len() != n)
        {
            return Err(Error::input("action labels do not match the action counts"));
        }
        self.labels = labels;
        Ok(self)
    }

    pub fn num_players(&self) -> usize {
        self.action_counts.len()
    }

    pub fn action_counts(&self) -> &[usize] {
        &self.action_counts
    }

    pub fn labels(&self, player: usize) -> &[String] {
        &self.labels[player]
    }

    pub fn all_labels(&self) -> &[Vec<String>] {
        &self.labels
    }

    /// Number of joint actions.
    pub fn num_profiles(&self) -> usize {
        self.strides[0] * self.action_counts[0]
    }

    /// Flat payoff tensor of one player.
    pub fn tensor(&self, player: usize) -> &[f64] {
        &self.payoffs[player]
    }

    pub fn strides(&self) -> &[usize] {
        &self.strides
    }

    pub fn check_joint(&self, joint: &[usize]) -> Result<()> {
        if joint.len() != self.num_players() {
            return Err(Error::input(format!(
                "joint action has {} entries for {} players",
                joint.len(),
                self.num_players()
            )));
        }
        for (player, (&a, &n)) in joint.iter().zip(&self.action_counts).enumerate() {
            if a >= n {
                return Err(Error::input(format!(
                    "action {a} out of range for player {player} ({n} actions)"
                )));
            }
        }
        Ok(())
    }

    /// Flat tensor index of an in-range joint action.
    pub fn flat_index(&self, joint: &[usize]) -> usize {
        joint.iter().zip(&self.strides).map(|(a, s)| a * s).sum()
    }

    pub fn joint_at(&self, mut index: usize) -> JointAction {
        self.strides
            .iter()
            .map(|&s| {
                let a = index / s;
                index %= s;
                a
            })
            .collect()
    }

    /// Payoff of every player under `joint`.
    pub fn payoff_of(&self, joint: &[usize]) -> Result<Vec<f64>> {
        self.check_joint(joint)?;
        let k = self.flat_index(joint);
        Ok(self.payoffs.iter().map(|t| t[k]).collect())
    }

    /// Payoff of one player; `joint` must be in range.
    pub fn payoff(&self, player: usize, joint: &[usize]) -> f64 {
        self.payoffs[player][self.flat_index(joint)]
    }

    /// Iterates every joint action in flat-index order.
    pub fn profiles(&self) -> impl Iterator<Item = JointAction> + '_ {
        (0..self.num_profiles()).map(move |k| self.joint_at(k))
    }

    pub fn describe(&self, joint: &[usize]) -> String {
        let names: Vec<&str> = joint
            .iter()
            .enumerate()
            .map(|(p, &a)| self.labels[p][a].as_str())
            .collect();
        format!("({})", names.join(", "))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn payoff_lookup_and_range_errors() {
        let g = stag_hunt(-6.0).unwrap();
        assert_eq!(g.payoff_of(&[0, 0]).unwrap(), vec![2.0, 2.0]);
        assert_eq!(g.payoff_of(&[0, 1]).unwrap(), vec![-6.0, 1.0]);
        assert!(matches!(g.payoff_of(&[0, 2]), Err(Error::Input(_))));
        assert!(matches!(g.payoff_of(&[0]), Err(Error::Input(_))));
    }

    #[test]
    fn zero_game_pays_zero() {
        let g = NormalFormGame::new(vec![2, 2], vec![vec![0.0; 4]; 2]).unwrap();
        for s in g.profiles() {
            assert_eq!(g.payoff_of(&s).unwrap(), vec![0.0, 0.0]);
        }
    }

    #[test]
    fn joint_index_round_trip() {
        let g = NormalFormGame::new(vec![2, 3, 4], vec![vec![0.0; 24]; 3]).unwrap();
        for k in 0..g.num_profiles() {
            assert_eq!(g.flat_index(&g.joint_at(k)), k);
        }
        assert_eq!(g.joint_at(23), vec![1, 2, 3]);
    }

    #[test]
    fn rejects_malformed_tensors() {
        assert!(NormalFormGame::new(vec![2, 2], vec![vec![0.0; 3], vec![0.0; 4]]).is_err());
        assert!(NormalFormGame::new(vec![2, 2], vec![vec![0.0; 4]]).is_err());
        assert!(NormalFormGame::new(vec![2, 0], vec![vec![], vec![]]).is_err());
        let mut bad = vec![0.0; 4];
        bad[2] = f64::NAN;
        assert!(NormalFormGame::new(vec![2, 2], vec![bad, vec![0.0; 4]]).is_err());
    }
}
