//! Softmax learning dynamics on normal-form games.
//!
//! Each player holds one logit per (extended) action and follows the exact
//! gradient of its own expected payoff. Stacking all players' gradients
//! gives an autonomous flow `z' = f(z)` whose stable points are the pure
//! equilibria; this module integrates that flow, classifies where it ends
//! up, and sweeps initial conditions to estimate basins of attraction.

mod basin;
mod flow;

pub use basin::{
    basin_sweep, basin_sweep_pair, frequency_sweep, grid_axis, phase_portrait, BasinCell, BasinGrid,
    FrequencyRow, PortraitPoint,
};
pub use flow::{classify_terminal, integrate, FlowConfig, FlowField, Integration, Integrator, Terminal};

use crate::error::{Error, Result};
use crate::game::NormalFormGame;

/// Numerically stable softmax (max-subtracted).
pub fn softmax(logits: &[f64]) -> Result<Vec<f64>> {
    if logits.is_empty() {
        return Err(Error::input("softmax of an empty vector"));
    }
    if let Some(x) = logits.iter().find(|x| !x.is_finite()) {
        return Err(Error::input(format!("non-finite logit {x}")));
    }
    let mut out = vec![0.0; logits.len()];
    softmax_into(logits, &mut out);
    Ok(out)
}

pub(crate) fn softmax_into(logits: &[f64], out: &mut [f64]) {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for (o, &x) in out.iter_mut().zip(logits) {
        *o = (x - max).exp();
        total += *o;
    }
    for o in out.iter_mut() {
        *o /= total;
    }
}

fn check_policies(game: &NormalFormGame, logits: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    if logits.len() != game.num_players() {
        return Err(Error::input(format!(
            "{} policies for {} players",
            logits.len(),
            game.num_players()
        )));
    }
    logits
        .iter()
        .zip(game.action_counts())
        .enumerate()
        .map(|(i, (x, &n))| {
            if x.len() != n {
                Err(Error::input(format!("player {i} has {n} actions but {} logits", x.len())))
            } else {
                softmax(x)
            }
        })
        .collect()
}

/// Per-player action values `u_i(a) = E[mu_i | s_i = a]` under independent
/// mixed strategies `probs`.
pub(crate) fn action_values(game: &NormalFormGame, probs: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = game.num_players();
    let mut values: Vec<Vec<f64>> = game.action_counts().iter().map(|&m| vec![0.0; m]).collect();
    for (k, joint) in game.profiles().enumerate() {
        for i in 0..n {
            let weight: f64 = (0..n).filter(|&j| j != i).map(|j| probs[j][joint[j]]).product();
            values[i][joint[i]] += weight * game.tensor(i)[k];
        }
    }
    values
}

/// Expected payoff of every player when each plays the softmax of its logits.
pub fn expected_payoff(game: &NormalFormGame, logits: &[Vec<f64>]) -> Result<Vec<f64>> {
    let probs = check_policies(game, logits)?;
    let values = action_values(game, &probs);
    Ok(values
        .iter()
        .zip(&probs)
        .map(|(u, p)| u.iter().zip(p).map(|(a, b)| a * b).sum())
        .collect())
}

/// Gradient of each player's expected payoff with respect to its own logits.
///
/// With softmax Jacobian `d pi_k / d x_j = pi_k (delta_kj - pi_j)` this is
/// `pi_j (u_j - sum_k pi_k u_k)`.
pub fn exact_gradient(game: &NormalFormGame, logits: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    let probs = check_policies(game, logits)?;
    let values = action_values(game, &probs);
    Ok(values
        .iter()
        .zip(&probs)
        .map(|(u, p)| {
            let mean: f64 = u.iter().zip(p).map(|(a, b)| a * b).sum();
            u.iter().zip(p).map(|(a, b)| b * (a - mean)).collect()
        })
        .collect())
}
