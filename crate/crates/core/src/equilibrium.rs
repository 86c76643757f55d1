//! Pure-strategy Nash equilibria: brute-force enumeration, dominance checks,
//! Nash products and the prosocial / payoff-dominant / risk-dominant labels.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::{extend_with_gifting, GiftSet, JointAction, NormalFormGame};

/// Absolute tolerance for the `>=` comparisons in the equilibrium condition.
pub const PAYOFF_TOLERANCE: f64 = 1e-9;

/// Returns every weak pure-strategy Nash equilibrium, in flat-index order.
pub fn enumerate_pne(game: &NormalFormGame) -> Vec<JointAction> {
    game.profiles().filter(|s| is_pne(game, s)).collect()
}

/// No player gains more than [`PAYOFF_TOLERANCE`] by a unilateral deviation.
pub fn is_pne(game: &NormalFormGame, joint: &[usize]) -> bool {
    let mut dev = joint.to_vec();
    for (i, &n) in game.action_counts().iter().enumerate() {
        let here = game.payoff(i, joint);
        for alt in 0..n {
            dev[i] = alt;
            if game.payoff(i, &dev) > here + PAYOFF_TOLERANCE {
                return false;
            }
        }
        dev[i] = joint[i];
    }
    true
}

/// True iff `dominant` pays `player` strictly more than `dominated` against
/// every opponent profile.
pub fn is_strictly_dominated(
    game: &NormalFormGame,
    player: usize,
    dominated: usize,
    dominant: usize,
) -> Result<bool> {
    let n = *game
        .action_counts()
        .get(player)
        .ok_or_else(|| Error::input(format!("no player {player}")))?;
    if dominated >= n || dominant >= n {
        return Err(Error::input(format!("action out of range for player {player}")));
    }
    Ok(game
        .profiles()
        .filter(|s| s[player] == dominated)
        .all(|mut s| {
            let worse = game.payoff(player, &s);
            s[player] = dominant;
            game.payoff(player, &s) > worse
        }))
}

/// Smallest payoff drop `player` suffers by deviating from `joint`.
fn deviation_loss(game: &NormalFormGame, player: usize, joint: &[usize]) -> Option<f64> {
    let here = game.payoff(player, joint);
    let mut dev = joint.to_vec();
    (0..game.action_counts()[player])
        .filter(|&a| a != joint[player])
        .map(|a| {
            dev[player] = a;
            here - game.payoff(player, &dev)
        })
        .min_by(f64::total_cmp)
}

/// Product of both players' deviation losses at a PNE of a 2-player game.
///
/// With more than two actions the loss is the smallest drop over all
/// deviations, which coincides with the usual definition for 2x2 games.
pub fn nash_product(game: &NormalFormGame, profile: &[usize]) -> Result<f64> {
    if game.num_players() != 2 {
        return Err(Error::input("Nash product is defined for 2-player games only"));
    }
    game.check_joint(profile)?;
    if !is_pne(game, profile) {
        return Err(Error::input(format!("{} is not a PNE", game.describe(profile))));
    }
    let mut product = 1.0;
    for p in 0..2 {
        product *= deviation_loss(game, p, profile)
            .ok_or_else(|| Error::input(format!("player {p} has no deviation")))?;
    }
    Ok(product)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PneProfile {
    pub joint: JointAction,
    pub labels: Vec<String>,
    pub payoffs: Vec<f64>,
    pub total: f64,
    pub nash_product: Option<f64>,
    pub prosocial: bool,
    pub payoff_dominant: bool,
    pub risk_dominant: bool,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct PneSet {
    pub profiles: Vec<PneProfile>,
}

impl PneSet {
    pub fn len(&self) -> usize {
        self.profiles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.profiles.is_empty()
    }

    pub fn find(&self, joint: &[usize]) -> Option<&PneProfile> {
        self.profiles.iter().find(|p| p.joint == joint)
    }

    pub fn joints(&self) -> Vec<JointAction> {
        self.profiles.iter().map(|p| p.joint.clone()).collect()
    }

    pub fn prosocial(&self) -> impl Iterator<Item = &PneProfile> {
        self.profiles.iter().filter(|p| p.prosocial)
    }

    pub fn risk_dominant(&self) -> Option<&PneProfile> {
        self.profiles.iter().find(|p| p.risk_dominant)
    }

    pub fn payoff_dominant(&self) -> Option<&PneProfile> {
        self.profiles.iter().find(|p| p.payoff_dominant)
    }
}

/// Enumerates the PNE of `game` and labels them.
///
/// Prosocial profiles maximize the payoff sum among PNE (ties share the
/// label). A payoff-dominant profile is weakly better for every player than
/// every other PNE and strictly better for someone. Risk dominance (strictly
/// largest Nash product) is only assessed for 2-player games.
pub fn classify_equilibria(game: &NormalFormGame) -> PneSet {
    let joints = enumerate_pne(game);
    let two_player = game.num_players() == 2;
    let mut profiles: Vec<PneProfile> = joints
        .into_iter()
        .map(|joint| {
            let payoffs: Vec<f64> = (0..game.num_players()).map(|i| game.payoff(i, &joint)).collect();
            let nash_product = if two_player { nash_product(game, &joint).ok() } else { None };
            PneProfile {
                labels: joint.iter().enumerate().map(|(i, &a)| game.labels(i)[a].clone()).collect(),
                total: payoffs.iter().sum(),
                payoffs,
                joint,
                nash_product,
                prosocial: false,
                payoff_dominant: false,
                risk_dominant: false,
            }
        })
        .collect();

    let best_total = profiles.iter().map(|p| p.total).fold(f64::NEG_INFINITY, f64::max);
    for p in &mut profiles {
        p.prosocial = p.total >= best_total - PAYOFF_TOLERANCE;
    }

    for k in 0..profiles.len() {
        let mine = &profiles[k].payoffs;
        profiles[k].payoff_dominant = profiles.iter().enumerate().filter(|(j, _)| *j != k).all(|(_, other)| {
            let weakly = mine.iter().zip(&other.payoffs).all(|(a, b)| *a >= *b - PAYOFF_TOLERANCE);
            let strictly = mine.iter().zip(&other.payoffs).any(|(a, b)| *a > *b + PAYOFF_TOLERANCE);
            weakly && strictly
        });
    }

    if two_player && profiles.len() >= 2 {
        for k in 0..profiles.len() {
            let Some(mine) = profiles[k].nash_product else { continue };
            profiles[k].risk_dominant = profiles.iter().enumerate().filter(|(j, _)| *j != k).all(|(_, o)| {
                o.nash_product.map_or(true, |np| mine > np + PAYOFF_TOLERANCE)
            });
        }
    }

    PneSet { profiles }
}

/// Outcome of comparing PNE(M) with PNE of the gifted extension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GiftMappingVerdict {
    pub holds: bool,
    pub base_pne: Vec<JointAction>,
    pub extended_pne: Vec<JointAction>,
    /// An extended profile present in exactly one of the two sets.
    pub witness: Option<JointAction>,
}

/// Checks that the PNE of the gifted game are exactly the base PNE with
/// zero gifts appended.
pub fn verify_gift_pne_mapping(game: &NormalFormGame, gifts: &GiftSet) -> Result<GiftMappingVerdict> {
    let gifted = extend_with_gifting(game, gifts)?;
    let base_pne = enumerate_pne(game);
    let extended_pne = enumerate_pne(gifted.game());
    let expected: Vec<JointAction> = base_pne.iter().map(|s| gifted.zero_gift(s)).collect();

    let witness = extended_pne
        .iter()
        .find(|s| !expected.contains(s))
        .or_else(|| expected.iter().find(|s| !extended_pne.contains(s)))
        .cloned();
    Ok(GiftMappingVerdict {
        holds: witness.is_none(),
        base_pne,
        extended_pne,
        witness,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::{coordination_game, stag_hunt, CoordinationKind};

    fn matching_pennies() -> NormalFormGame {
        NormalFormGame::bimatrix(
            &[vec![1.0, -1.0], vec![-1.0, 1.0]],
            &[vec![-1.0, 1.0], vec![1.0, -1.0]],
        )
        .unwrap()
    }

    #[test]
    fn stag_hunt_pne() {
        assert_eq!(enumerate_pne(&stag_hunt(-6.0).unwrap()), vec![vec![0, 0], vec![1, 1]]);
    }

    #[test]
    fn matching_pennies_has_none() {
        assert!(enumerate_pne(&matching_pennies()).is_empty());
    }

    #[test]
    fn zero_game_all_weak_pne() {
        let g = NormalFormGame::new(vec![2, 2], vec![vec![0.0; 4]; 2]).unwrap();
        assert_eq!(enumerate_pne(&g).len(), 4);
    }

    #[test]
    fn dominance_examples() {
        let base = stag_hunt(-6.0).unwrap();
        let gifted = extend_with_gifting(&base, &GiftSet::uniform(2, 10.0).unwrap()).unwrap();
        let hunt_gift = gifted.join(0, 0, 1);
        assert!(is_strictly_dominated(gifted.game(), 0, hunt_gift, 0).unwrap());
        assert!(!is_strictly_dominated(&base, 0, 1, 0).unwrap());
        assert!(!is_strictly_dominated(&base, 0, 0, 0).unwrap());
        assert!(is_strictly_dominated(&base, 0, 5, 0).is_err());
    }

    #[test]
    fn nash_products() {
        let g = stag_hunt(-6.0).unwrap();
        assert_eq!(nash_product(&g, &[0, 0]).unwrap(), 1.0);
        assert_eq!(nash_product(&g, &[1, 1]).unwrap(), 49.0);
        assert_eq!(nash_product(&stag_hunt(-10.0).unwrap(), &[1, 1]).unwrap(), 121.0);
        assert!(nash_product(&g, &[0, 1]).is_err());
    }

    #[test]
    fn stag_hunt_labels() {
        let set = classify_equilibria(&stag_hunt(-6.0).unwrap());
        assert_eq!(set.len(), 2);
        let hh = set.find(&[0, 0]).unwrap();
        assert!(hh.prosocial && hh.payoff_dominant && !hh.risk_dominant);
        let ff = set.find(&[1, 1]).unwrap();
        assert!(!ff.prosocial && !ff.payoff_dominant && ff.risk_dominant);
    }

    #[test]
    fn bos_and_assurance_labels() {
        let k = CoordinationKind::Bos;
        let set = classify_equilibria(&coordination_game(k, &k.default_params()).unwrap());
        assert_eq!(set.prosocial().count(), 2);
        assert!(set.payoff_dominant().is_none());
        assert!(set.risk_dominant().is_none());

        let k = CoordinationKind::Assurance;
        let set = classify_equilibria(&coordination_game(k, &k.default_params()).unwrap());
        let first = set.find(&[0, 0]).unwrap();
        assert!(first.payoff_dominant && first.risk_dominant && first.prosocial);
    }

    #[test]
    fn gift_mapping_examples() {
        let v = verify_gift_pne_mapping(&stag_hunt(-6.0).unwrap(), &GiftSet::uniform(2, 10.0).unwrap()).unwrap();
        assert!(v.holds);
        assert_eq!(v.extended_pne, vec![vec![0, 0], vec![1, 1]]);

        let v = verify_gift_pne_mapping(&matching_pennies(), &GiftSet::uniform(2, 5.0).unwrap()).unwrap();
        assert!(v.holds && v.base_pne.is_empty() && v.extended_pne.is_empty());
    }
}
