use serde::{Deserialize, Serialize};

use super::GiftedGame;
use crate::error::{Error, Result};

/// What one agent sees: one categorical symbol per opponent.
///
/// Symbol 0 is the start-of-episode marker; symbol `1 + a` means the
/// opponent's most recent extended action was `a`. One-shot games use an
/// empty observation (a single constant state).
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct Observation(pub Vec<usize>);

impl Observation {
    pub const START: usize = 0;

    pub fn constant() -> Self {
        Observation(Vec::new())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RepeatedStep {
    pub rewards: Vec<f64>,
    pub observations: Vec<Observation>,
    pub done: bool,
}

/// A stage game played for a fixed number of steps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepeatedGame {
    stage: GiftedGame,
    horizon: usize,
}

impl RepeatedGame {
    pub fn new(stage: GiftedGame, horizon: usize) -> Result<Self> {
        if horizon == 0 {
            return Err(Error::input("horizon must be positive"));
        }
        Ok(Self { stage, horizon })
    }

    pub fn stage(&self) -> &GiftedGame {
        &self.stage
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn num_agents(&self) -> usize {
        self.stage.num_players()
    }

    /// Symbol alphabet sizes of agent `agent`'s observation, one per opponent.
    pub fn observation_radices(&self, agent: usize) -> Vec<usize> {
        let counts = self.stage.game().action_counts();
        (0..self.num_agents())
            .filter(|&j| j != agent)
            .map(|j| counts[j] + 1)
            .collect()
    }

    pub fn initial_observations(&self) -> Vec<Observation> {
        let n = self.num_agents();
        vec![Observation(vec![Observation::START; n - 1]); n]
    }

    /// Plays step `t` of an episode.
    pub fn step(&self, t: usize, joint: &[usize]) -> Result<RepeatedStep> {
        if t >= self.horizon {
            return Err(Error::State(format!(
                "step {t} is beyond the horizon {}",
                self.horizon
            )));
        }
        let rewards = self.stage.game().payoff_of(joint)?;
        let n = self.num_agents();
        let observations = (0..n)
            .map(|i| {
                Observation(
                    (0..n)
                        .filter(|&j| j != i)
                        .map(|j| joint[j] + 1)
                        .collect(),
                )
            })
            .collect();
        Ok(RepeatedStep {
            rewards,
            observations,
            done: t + 1 == self.horizon,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::{extend_with_gifting, stag_hunt, GiftSet};

    fn env(gamma: f64) -> RepeatedGame {
        let base = stag_hunt(-6.0).unwrap();
        let stage = extend_with_gifting(&base, &GiftSet::uniform(2, gamma).unwrap()).unwrap();
        RepeatedGame::new(stage, 10).unwrap()
    }

    #[test]
    fn done_only_on_last_step() {
        let e = env(0.0);
        assert!(!e.step(8, &[0, 0]).unwrap().done);
        assert!(e.step(9, &[0, 0]).unwrap().done);
        assert!(matches!(e.step(10, &[0, 0]), Err(Error::State(_))));
    }

    #[test]
    fn first_step_rewards_and_observations() {
        let e = env(0.0);
        let s = e.step(0, &[0, 0]).unwrap();
        assert_eq!(s.rewards, vec![2.0, 2.0]);
        assert_eq!(s.observations, vec![Observation(vec![1]), Observation(vec![1])]);
    }

    #[test]
    fn start_symbol_is_shared() {
        let e = env(10.0);
        let obs = e.initial_observations();
        assert_eq!(obs, vec![Observation(vec![0]); 2]);
        assert_eq!(e.observation_radices(0), vec![5]);
    }

    #[test]
    fn gifted_step_applies_transfer() {
        let e = env(10.0);
        let s = e.step(3, &[2, 1]).unwrap();
        assert_eq!(s.rewards, vec![-16.0, 11.0]);
        assert_eq!(s.observations[1], Observation(vec![3]));
    }
}
