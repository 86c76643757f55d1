use serde::{Deserialize, Serialize};

use super::{extend_with_gifting, CoordinationParams, GiftSet, GiftedGame, GraphGame, NormalFormGame};
use crate::error::{Error, Result};

/// Text form of a game definition.
///
/// Either `payoffs` (one row-major tensor per player) or `graph_edges`
/// together with a symmetric 2x2 `stage` must be given.
///
/// ```toml
/// players = 2
/// action_counts = [2, 2]
/// action_labels = [["Hunt", "Forage"], ["Hunt", "Forage"]]
/// payoffs = [[2, -6, 1, 1], [2, 1, -6, 1]]
/// gift_sets = [[0, 10], [0, 10]]
/// horizon = 10
/// ```
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GameDocument {
    pub players: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub action_counts: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub action_labels: Option<Vec<Vec<String>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub payoffs: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stage: Option<[f64; 4]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub graph_edges: Option<Vec<(usize, usize)>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gift_sets: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub horizon: Option<usize>,
}

impl GameDocument {
    pub fn from_game(game: &GiftedGame, horizon: Option<usize>) -> Self {
        let base = game.base();
        Self {
            players: base.num_players(),
            action_counts: Some(base.action_counts().to_vec()),
            action_labels: Some(base.all_labels().to_vec()),
            payoffs: Some((0..base.num_players()).map(|p| base.tensor(p).to_vec()).collect()),
            stage: None,
            graph_edges: None,
            gift_sets: (!game.gifts().is_trivial()).then(|| game.gifts().all().to_vec()),
            horizon,
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn base_game(&self) -> Result<NormalFormGame> {
        let game = match (&self.payoffs, &self.graph_edges) {
            (Some(payoffs), None) => {
                let counts = match (&self.action_counts, &self.action_labels) {
                    (Some(c), _) => c.clone(),
                    (None, Some(labels)) => labels.iter().map(Vec::len).collect(),
                    (None, None) => {
                        return Err(Error::Config("action_counts or action_labels is required".into()))
                    }
                };
                if counts.len() != self.players {
                    return Err(Error::Config(format!(
                        "players = {} but {} action counts given",
                        self.players,
                        counts.len()
                    )));
                }
                NormalFormGame::new(counts, payoffs.clone())?
            }
            (None, Some(edges)) => {
                let stage = self
                    .stage
                    .ok_or_else(|| Error::Config("graph_edges requires a 2x2 stage".into()))?;
                let [a, b, c, d] = stage;
                GraphGame::new(self.players, edges, CoordinationParams::symmetric(a, b, c, d))?
                    .to_game(["a0", "a1"])?
            }
            (Some(_), Some(_)) => return Err(Error::Config("give either payoffs or graph_edges, not both".into())),
            (None, None) => return Err(Error::Config("payoffs or graph_edges is required".into())),
        };
        match &self.action_labels {
            Some(labels) => game.with_labels(labels.clone()),
            None => Ok(game),
        }
    }

    pub fn build(&self) -> Result<GiftedGame> {
        let base = self.base_game()?;
        let gifts = match &self.gift_sets {
            Some(sets) => GiftSet::new(sets.clone())?,
            None => GiftSet::none(base.num_players()),
        };
        extend_with_gifting(&base, &gifts)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::stag_hunt;

    #[test]
    fn round_trip_through_toml() {
        let base = stag_hunt(-6.0).unwrap();
        let g = extend_with_gifting(&base, &GiftSet::uniform(2, 10.0).unwrap()).unwrap();
        let doc = GameDocument::from_game(&g, Some(10));
        let text = doc.to_toml().unwrap();
        let back = GameDocument::from_toml(&text).unwrap();
        assert_eq!(back, doc);
        assert_eq!(back.build().unwrap(), g);
    }

    #[test]
    fn graph_document() {
        let text = "players = 3\nstage = [2, -6, 1, 1]\ngraph_edges = [[0, 1], [1, 2], [0, 2]]\n";
        let g = GameDocument::from_toml(text).unwrap().base_game().unwrap();
        assert_eq!(g.payoff_of(&[0, 1, 1]).unwrap(), vec![-6.0, 1.0, 1.0]);
    }

    #[test]
    fn unknown_keys_rejected() {
        let text = "players = 2\naction_counts = [2, 2]\npayofs = [[0,0,0,0],[0,0,0,0]]\n";
        assert!(matches!(GameDocument::from_toml(text), Err(Error::Config(_))));
    }
}
