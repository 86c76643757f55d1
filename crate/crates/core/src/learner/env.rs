use crate::equilibrium::{classify_equilibria, PneSet};
use crate::error::Result;
use crate::game::{GiftedGame, JointAction, RepeatedGame};

use super::qfunc::ObsCodec;

/// Where the agents play: a one-shot (possibly graph-defined) normal-form
/// game with constant observations, or a finite-horizon repeated game in
/// which each agent observes its opponents' previous actions.
#[derive(Debug, Clone)]
pub struct Environment {
    kind: EnvKind,
    codecs: Vec<ObsCodec>,
    gift_masks: Vec<Vec<bool>>,
    /// PNE of the extended game (one-shot) or of the base stage game (repeated).
    pne: PneSet,
}

#[derive(Debug, Clone)]
enum EnvKind {
    OneShot(GiftedGame),
    Repeated(RepeatedGame),
}

impl Environment {
    pub fn one_shot(game: GiftedGame) -> Self {
        let n = game.num_players();
        let pne = classify_equilibria(game.game());
        let gift_masks = masks(&game);
        Self {
            kind: EnvKind::OneShot(game),
            codecs: vec![ObsCodec::constant(); n],
            gift_masks,
            pne,
        }
    }

    pub fn repeated(game: RepeatedGame) -> Result<Self> {
        let n = game.num_agents();
        let codecs = (0..n)
            .map(|i| ObsCodec::new(game.observation_radices(i)))
            .collect::<Result<Vec<_>>>()?;
        let pne = classify_equilibria(game.stage().base());
        let gift_masks = masks(game.stage());
        Ok(Self {
            kind: EnvKind::Repeated(game),
            codecs,
            gift_masks,
            pne,
        })
    }

    pub fn is_repeated(&self) -> bool {
        matches!(self.kind, EnvKind::Repeated(_))
    }

    /// The (extended) stage game.
    pub fn stage(&self) -> &GiftedGame {
        match &self.kind {
            EnvKind::OneShot(g) => g,
            EnvKind::Repeated(r) => r.stage(),
        }
    }

    pub fn num_agents(&self) -> usize {
        self.stage().num_players()
    }

    pub fn num_actions(&self, agent: usize) -> usize {
        self.stage().game().action_counts()[agent]
    }

    pub fn horizon(&self) -> usize {
        match &self.kind {
            EnvKind::OneShot(_) => 1,
            EnvKind::Repeated(r) => r.horizon(),
        }
    }

    pub fn codec(&self, agent: usize) -> &ObsCodec {
        &self.codecs[agent]
    }

    pub fn gift_mask(&self, agent: usize) -> &[bool] {
        &self.gift_masks[agent]
    }

    /// Equilibria used to classify outcomes.
    pub fn reference_pne(&self) -> &PneSet {
        &self.pne
    }

    /// Encoded observation of every agent at the start of an episode.
    pub fn initial_states(&self, out: &mut [u32]) {
        for (i, s) in out.iter_mut().enumerate() {
            let slots = self.codecs[i].radices().len();
            *s = self.codecs[i].encode(&vec![0; slots]);
        }
    }

    /// Plays one step: fills rewards and next encoded observations, returns `done`.
    pub fn step(&self, t: usize, joint: &[usize], rewards: &mut [f64], next: &mut [u32]) -> bool {
        let game = self.stage().game();
        let idx = game.flat_index(joint);
        for (p, r) in rewards.iter_mut().enumerate() {
            *r = game.tensor(p)[idx];
        }
        match &self.kind {
            EnvKind::OneShot(_) => {
                next.iter_mut().for_each(|s| *s = 0);
                true
            }
            EnvKind::Repeated(r) => {
                let n = joint.len();
                for (i, s) in next.iter_mut().enumerate() {
                    let radices = self.codecs[i].radices();
                    let mut idx = 0usize;
                    for (k, j) in (0..n).filter(|&j| j != i).enumerate() {
                        idx = idx * radices[k] + joint[j] + 1;
                    }
                    *s = idx as u32;
                }
                t + 1 >= r.horizon()
            }
        }
    }

    /// Plays the greedy policies (`policies[i][state]`) for one episode and
    /// returns the extended joint action of every step.
    pub fn rollout(&self, policies: &[Vec<usize>]) -> Vec<JointAction> {
        let n = self.num_agents();
        let mut states = vec![0u32; n];
        self.initial_states(&mut states);
        let mut rewards = vec![0.0; n];
        let mut next = vec![0u32; n];
        let mut out = Vec::with_capacity(self.horizon());
        for t in 0..self.horizon() {
            let joint: JointAction = (0..n).map(|i| policies[i][states[i] as usize]).collect();
            let done = self.step(t, &joint, &mut rewards, &mut next);
            out.push(joint);
            std::mem::swap(&mut states, &mut next);
            if done {
                break;
            }
        }
        out
    }
}

fn masks(game: &GiftedGame) -> Vec<Vec<bool>> {
    (0..game.num_players())
        .map(|p| {
            (0..game.game().action_counts()[p])
                .map(|a| game.is_gifting(p, a))
                .collect()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::{extend_with_gifting, stag_hunt, GiftSet, Observation};

    fn gifted(gamma: f64) -> GiftedGame {
        extend_with_gifting(&stag_hunt(-6.0).unwrap(), &GiftSet::uniform(2, gamma).unwrap()).unwrap()
    }

    #[test]
    fn one_shot_step_pays_extended_payoffs() {
        let env = Environment::one_shot(gifted(10.0));
        let mut r = [0.0; 2];
        let mut next = [9u32; 2];
        assert!(env.step(0, &[2, 1], &mut r, &mut next));
        assert_eq!(r, [-16.0, 11.0]);
        assert_eq!(next, [0, 0]);
        assert_eq!(env.gift_mask(0), &[false, false, true, true]);
        assert_eq!(env.reference_pne().len(), 2);
    }

    #[test]
    fn repeated_encoding_matches_observations() {
        let rg = RepeatedGame::new(gifted(10.0), 10).unwrap();
        let env = Environment::repeated(rg.clone()).unwrap();
        assert_eq!(env.codec(0).num_states(), 5);
        let mut s = [7u32; 2];
        env.initial_states(&mut s);
        assert_eq!(s, [0, 0]);
        let mut r = [0.0; 2];
        let mut next = [0u32; 2];
        let joint = [3, 0];
        let done = env.step(0, &joint, &mut r, &mut next);
        let reference = rg.step(0, &joint).unwrap();
        assert_eq!(done, reference.done);
        assert_eq!(r.to_vec(), reference.rewards);
        for i in 0..2 {
            let Observation(sym) = &reference.observations[i];
            assert_eq!(next[i], env.codec(i).encode(sym));
        }
        assert!(!done);
        assert!(env.step(9, &joint, &mut r, &mut next));
    }

    #[test]
    fn rollout_follows_policies() {
        let env = Environment::repeated(RepeatedGame::new(gifted(10.0), 4).unwrap()).unwrap();
        // agent plays Hunt at the start, then copies the opponent's base action
        let policy: Vec<usize> = (0..5).map(|s| if s == 0 { 0 } else { (s - 1) % 2 }).collect();
        let steps = env.rollout(&[policy.clone(), vec![1; 5]]);
        assert_eq!(steps, vec![vec![0, 1], vec![1, 1], vec![1, 1], vec![1, 1]]);
    }
}
