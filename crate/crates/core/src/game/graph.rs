use serde::{Deserialize, Serialize};

use super::{coordination_game, CoordinationKind, CoordinationParams, NormalFormGame};
use crate::error::{Error, Result};

/// N agents on an undirected graph, each playing one 2x2 stage game per edge.
///
/// An agent picks a single action for all its games and receives the mean
/// of its stage payoffs. The stage is read from the row player's side, so
/// the stage matrix should be symmetric.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphGame {
    num_agents: usize,
    neighbors: Vec<Vec<usize>>,
    stage: CoordinationParams,
}

impl GraphGame {
    pub fn new(num_agents: usize, edges: &[(usize, usize)], stage: CoordinationParams) -> Result<Self> {
        if num_agents < 2 {
            return Err(Error::input("a graph game needs at least two agents"));
        }
        let mut neighbors = vec![Vec::new(); num_agents];
        for &(u, v) in edges {
            if u >= num_agents || v >= num_agents {
                return Err(Error::input(format!("edge ({u}, {v}) references a missing agent")));
            }
            if u == v {
                return Err(Error::input(format!("self-loop on agent {u}")));
            }
            if !neighbors[u].contains(&v) {
                neighbors[u].push(v);
                neighbors[v].push(u);
            }
        }
        if let Some(i) = neighbors.iter().position(Vec::is_empty) {
            return Err(Error::input(format!("agent {i} has no neighbors")));
        }
        for n in &mut neighbors {
            n.sort_unstable();
        }
        Ok(Self {
            num_agents,
            neighbors,
            stage,
        })
    }

    pub fn neighbors(&self, agent: usize) -> &[usize] {
        &self.neighbors[agent]
    }

    pub fn to_game(&self, labels: [&str; 2]) -> Result<NormalFormGame> {
        let n = self.num_agents;
        let counts = vec![2; n];
        let size = 1usize << n;
        let mut payoffs = vec![Vec::with_capacity(size); n];
        let layout = NormalFormGame::new(counts.clone(), vec![vec![0.0; size]; n])?;
        for k in 0..size {
            let s = layout.joint_at(k);
            for (i, tensor) in payoffs.iter_mut().enumerate() {
                let nbrs = &self.neighbors[i];
                let total: f64 = nbrs.iter().map(|&j| self.stage.row[2 * s[i] + s[j]]).sum();
                tensor.push(total / nbrs.len() as f64);
            }
        }
        let labels = vec![labels.iter().map(|s| s.to_string()).collect(); n];
        NormalFormGame::new(counts, payoffs)?.with_labels(labels)
    }
}

/// Edges of the complete graph on `n` vertices.
pub fn fully_connected_edges(n: usize) -> Vec<(usize, usize)> {
    (0..n)
        .flat_map(|u| (u + 1..n).map(move |v| (u, v)))
        .collect()
}

/// Stag Hunt played on a graph; `r` must give a valid 2-player Stag Hunt stage.
pub fn make_graph_stag_hunt(num_agents: usize, edges: &[(usize, usize)], r: f64) -> Result<NormalFormGame> {
    let kind = CoordinationKind::StagHunt { r };
    let params = kind.default_params();
    // validates the stage
    coordination_game(kind, &params)?;
    GraphGame::new(num_agents, edges, params)?.to_game(["Hunt", "Forage"])
}
