use serde::{Deserialize, Serialize};

use super::{JointAction, NormalFormGame};
use crate::error::{Error, Result};

/// Zero-sum transfer induced by a gift vector.
///
/// Each player loses its own gift and receives an equal share of everyone
/// else's: `sigma_i = -g_i + sum_{j != i} g_j / (N - 1)`.
pub fn gift_transfer(gifts: &[f64]) -> Result<Vec<f64>> {
    let n = gifts.len();
    if n < 2 {
        return Err(Error::input("gift transfer needs at least two players"));
    }
    if let Some(g) = gifts.iter().find(|g| !(**g >= 0.0) || !g.is_finite()) {
        return Err(Error::input(format!("gift {g} is not a finite nonnegative amount")));
    }
    Ok(transfer_unchecked(gifts))
}

pub(crate) fn transfer_unchecked(gifts: &[f64]) -> Vec<f64> {
    let share = 1.0 / (gifts.len() - 1) as f64;
    let total: f64 = gifts.iter().sum();
    gifts.iter().map(|&g| -g + (total - g) * share).collect()
}

/// Per-player finite sets of gift amounts.
///
/// Each set is kept sorted ascending and deduplicated, so index 0 is
/// always the zero gift.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GiftSet {
    values: Vec<Vec<f64>>,
}

impl GiftSet {
    pub fn new(values: Vec<Vec<f64>>) -> Result<Self> {
        let mut out = Vec::with_capacity(values.len());
        for (player, mut set) in values.into_iter().enumerate() {
            if let Some(g) = set.iter().find(|g| !(**g >= 0.0) || !g.is_finite()) {
                return Err(Error::input(format!(
                    "gift set of player {player} contains invalid amount {g}"
                )));
            }
            if !set.contains(&0.0) {
                return Err(Error::input(format!("gift set of player {player} must contain 0")));
            }
            set.sort_by(f64::total_cmp);
            set.dedup();
            out.push(set);
        }
        Ok(Self { values: out })
    }

    /// `{0, gamma}` for every player; `gamma = 0` collapses to `{0}`.
    pub fn uniform(num_players: usize, gamma: f64) -> Result<Self> {
        Self::new(vec![vec![0.0, gamma]; num_players])
    }

    /// The identity extension `{0}`.
    pub fn none(num_players: usize) -> Self {
        Self {
            values: vec![vec![0.0]; num_players],
        }
    }

    pub fn num_players(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self, player: usize) -> &[f64] {
        &self.values[player]
    }

    pub fn all(&self) -> &[Vec<f64>] {
        &self.values
    }

    /// True when no player can gift a nonzero amount.
    pub fn is_trivial(&self) -> bool {
        self.values.iter().all(|s| s.len() == 1)
    }
}

/// A game whose actions are (base action, gift) pairs.
///
/// Extended action `k` of player `i` is base action `k % |S_i|` with gift
/// index `k / |S_i|`, so the zero-gift actions come first in base order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GiftedGame {
    base: NormalFormGame,
    gifts: GiftSet,
    extended: NormalFormGame,
}

/// Extends `game` with zero-sum gifting actions drawn from `gifts`.
pub fn extend_with_gifting(game: &NormalFormGame, gifts: &GiftSet) -> Result<GiftedGame> {
    let n = game.num_players();
    if gifts.num_players() != n {
        return Err(Error::input(format!(
            "gift set covers {} players, game has {n}",
            gifts.num_players()
        )));
    }
    // Re-run validation in case the set was deserialized.
    let gifts = GiftSet::new(gifts.values.clone())?;
    if n < 2 && !gifts.is_trivial() {
        return Err(Error::input("gifting needs at least two players"));
    }

    let counts: Vec<usize> = (0..n)
        .map(|i| game.action_counts()[i] * gifts.values(i).len())
        .collect();
    let size: usize = counts.iter().product();
    let mut payoffs = vec![Vec::with_capacity(size); n];
    let layout = NormalFormGame::new(counts.clone(), vec![vec![0.0; size]; n])?;

    let mut base_joint = vec![0; n];
    let mut gift_vec = vec![0.0; n];
    for k in 0..size {
        let ext = layout.joint_at(k);
        for i in 0..n {
            let m = game.action_counts()[i];
            base_joint[i] = ext[i] % m;
            gift_vec[i] = gifts.values(i)[ext[i] / m];
        }
        let sigma = if n >= 2 { transfer_unchecked(&gift_vec) } else { vec![0.0] };
        for i in 0..n {
            payoffs[i].push(game.payoff(i, &base_joint) + sigma[i]);
        }
    }

    let labels = (0..n)
        .map(|i| {
            let m = game.action_counts()[i];
            (0..counts[i])
                .map(|k| {
                    let base = &game.labels(i)[k % m];
                    let g = gifts.values(i)[k / m];
                    if g == 0.0 {
                        base.clone()
                    } else {
                        format!("{base}+Gift({g})")
                    }
                })
                .collect()
        })
        .collect();
    let extended = NormalFormGame::new(counts, payoffs)?.with_labels(labels)?;

    Ok(GiftedGame {
        base: game.clone(),
        gifts,
        extended,
    })
}

impl GiftedGame {
    /// The identity extension of `game` (no nonzero gifts).
    pub fn ungifted(game: &NormalFormGame) -> Self {
        extend_with_gifting(game, &GiftSet::none(game.num_players()))
            .expect("identity extension is always valid")
    }

    pub fn base(&self) -> &NormalFormGame {
        &self.base
    }

    pub fn gifts(&self) -> &GiftSet {
        &self.gifts
    }

    /// The extended game over (base action, gift) pairs.
    pub fn game(&self) -> &NormalFormGame {
        &self.extended
    }

    pub fn num_players(&self) -> usize {
        self.base.num_players()
    }

    /// Splits an extended action into (base action, gift index).
    pub fn split(&self, player: usize, action: usize) -> (usize, usize) {
        let m = self.base.action_counts()[player];
        (action % m, action / m)
    }

    pub fn join(&self, player: usize, base_action: usize, gift_index: usize) -> usize {
        gift_index * self.base.action_counts()[player] + base_action
    }

    pub fn gift_amount(&self, player: usize, action: usize) -> f64 {
        self.gifts.values(player)[self.split(player, action).1]
    }

    pub fn is_gifting(&self, player: usize, action: usize) -> bool {
        self.gift_amount(player, action) != 0.0
    }

    /// Projects an extended joint action onto base actions and gift amounts.
    pub fn project(&self, joint: &[usize]) -> (JointAction, Vec<f64>) {
        joint
            .iter()
            .enumerate()
            .map(|(i, &a)| (self.split(i, a).0, self.gift_amount(i, a)))
            .unzip()
    }

    /// Appends zero gifts to a base joint action.
    pub fn zero_gift(&self, base_joint: &[usize]) -> JointAction {
        base_joint
            .iter()
            .enumerate()
            .map(|(i, &a)| self.join(i, a, 0))
            .collect()
    }
}
