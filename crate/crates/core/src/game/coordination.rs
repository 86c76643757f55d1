use serde::{Deserialize, Serialize};

use super::NormalFormGame;
use crate::error::{Error, Result};

/// The 2x2 coordination sub-classes with their default payoff matrices.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum CoordinationKind {
    PureCoordination,
    /// Bach or Stravinsky.
    Bos,
    Assurance,
    /// Stag Hunt with `r` the payoff for hunting alone.
    StagHunt { r: f64 },
}

/// Payoffs of a general 2x2 game.
///
/// Entries are ordered (1,1), (1,2), (2,1), (2,2); `row` holds the row
/// player's payoffs `a, b, c, d` and `col` the column player's `A, B, C, D`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoordinationParams {
    pub row: [f64; 4],
    pub col: [f64; 4],
}

impl CoordinationParams {
    pub fn new(row: [f64; 4], col: [f64; 4]) -> Self {
        Self { row, col }
    }

    /// Symmetric game: the column player's matrix is the row player's transposed.
    pub fn symmetric(a: f64, b: f64, c: f64, d: f64) -> Self {
        Self::new([a, b, c, d], [a, c, b, d])
    }

    fn check_coordination(&self) -> Result<()> {
        let [a, b, c, d] = self.row;
        let [big_a, big_b, big_c, big_d] = self.col;
        let conds = [
            (a > c, "a > c"),
            (big_a > big_b, "A > B"),
            (d > b, "d > b"),
            (big_d > big_c, "D > C"),
        ];
        for (ok, name) in conds {
            if !ok {
                return Err(Error::constraint(format!("coordination condition {name} fails")));
            }
        }
        Ok(())
    }

    /// Checks the coordination inequalities plus the sub-class conditions of `kind`.
    pub fn validate(&self, kind: CoordinationKind) -> Result<()> {
        self.check_coordination()?;
        let [a, b, c, d] = self.row;
        let [big_a, big_b, big_c, big_d] = self.col;
        let off_diagonal_equal = || -> Result<f64> {
            if b == big_b && b == c && b == big_c {
                Ok(b)
            } else {
                Err(Error::constraint("off-diagonal payoffs must all equal zeta"))
            }
        };
        match kind {
            CoordinationKind::PureCoordination => {
                let zeta = off_diagonal_equal()?;
                require(a == d && big_a == big_d, "a = d and A = D")?;
                require(zeta < a.min(big_a), "zeta < min(a, A)")
            }
            CoordinationKind::Bos => {
                let zeta = off_diagonal_equal()?;
                require(a > d && big_a < big_d, "a > d and A < D")?;
                require(zeta < a.min(big_a), "zeta < min(a, A)")
            }
            CoordinationKind::Assurance => {
                let zeta = off_diagonal_equal()?;
                require(a > d && big_a > big_d, "a > d and A > D")?;
                require(zeta < a.min(big_a), "zeta < min(a, A)")
            }
            CoordinationKind::StagHunt { r } => {
                require(a > d && big_a > big_d, "a > d and A > D")?;
                require(
                    a == big_a && d == big_d && c == big_b && big_c == b && b == r,
                    "a = A, d = D, c = B, C = b = r",
                )?;
                require(a - c < d - r, "a - c < d - r")
            }
        }
    }

    pub fn to_game(&self) -> Result<NormalFormGame> {
        let [a, b, c, d] = self.row;
        let [big_a, big_b, big_c, big_d] = self.col;
        NormalFormGame::new(vec![2, 2], vec![vec![a, b, c, d], vec![big_a, big_b, big_c, big_d]])
    }
}

fn require(ok: bool, name: &str) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::constraint(format!("condition {name} fails")))
    }
}

impl CoordinationKind {
    pub fn default_params(&self) -> CoordinationParams {
        match *self {
            CoordinationKind::PureCoordination => CoordinationParams::symmetric(1.0, 0.0, 0.0, 1.0),
            CoordinationKind::Bos => CoordinationParams::new([2.0, 0.0, 0.0, 1.0], [1.0, 0.0, 0.0, 2.0]),
            CoordinationKind::Assurance => CoordinationParams::symmetric(2.0, 0.0, 0.0, 1.0),
            CoordinationKind::StagHunt { r } => CoordinationParams::symmetric(2.0, r, 1.0, 1.0),
        }
    }

    fn labels(&self) -> [&'static str; 2] {
        match self {
            CoordinationKind::StagHunt { .. } => ["Hunt", "Forage"],
            _ => ["Action 1", "Action 2"],
        }
    }
}

/// Builds a validated 2-player coordination game of the given kind.
pub fn coordination_game(kind: CoordinationKind, params: &CoordinationParams) -> Result<NormalFormGame> {
    params.validate(kind)?;
    let labels: Vec<String> = kind.labels().iter().map(|s| s.to_string()).collect();
    params.to_game()?.with_labels(vec![labels.clone(), labels])
}

/// Stag Hunt with the default payoffs and risk parameter `r`.
pub fn stag_hunt(r: f64) -> Result<NormalFormGame> {
    let kind = CoordinationKind::StagHunt { r };
    coordination_game(kind, &kind.default_params())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn matrix(g: &NormalFormGame) -> Vec<Vec<f64>> {
        g.profiles().map(|s| g.payoff_of(&s).unwrap()).collect()
    }

    #[test]
    fn stag_hunt_default_matrix() {
        let g = stag_hunt(-6.0).unwrap();
        assert_eq!(
            matrix(&g),
            vec![vec![2.0, 2.0], vec![-6.0, 1.0], vec![1.0, -6.0], vec![1.0, 1.0]]
        );
        assert_eq!(g.labels(0), ["Hunt", "Forage"]);
    }

    #[test]
    fn assurance_default_matrix() {
        let k = CoordinationKind::Assurance;
        let g = coordination_game(k, &k.default_params()).unwrap();
        assert_eq!(
            matrix(&g),
            vec![vec![2.0, 2.0], vec![0.0, 0.0], vec![0.0, 0.0], vec![1.0, 1.0]]
        );
    }

    #[test]
    fn bos_and_pure_coordination_construct() {
        for k in [CoordinationKind::Bos, CoordinationKind::PureCoordination] {
            let g = coordination_game(k, &k.default_params()).unwrap();
            assert_eq!(g.num_players(), 2);
        }
        let k = CoordinationKind::Bos;
        let g = coordination_game(k, &k.default_params()).unwrap();
        assert_eq!(g.payoff_of(&[0, 0]).unwrap(), vec![2.0, 1.0]);
        assert_eq!(g.payoff_of(&[1, 1]).unwrap(), vec![1.0, 2.0]);
    }

    #[test]
    fn stag_hunt_rejects_low_risk_violations() {
        for r in [1.5, 3.0, 0.0] {
            let err = stag_hunt(r).unwrap_err();
            assert!(matches!(err, Error::Constraint(_)), "r={r}: {err}");
        }
        assert!(stag_hunt(-0.5).is_ok());
        assert!(stag_hunt(-10.0).is_ok());
    }

    #[test]
    fn sub_class_conditions_are_checked() {
        // Assurance payoffs do not satisfy BoS's A < D.
        let assurance = CoordinationKind::Assurance.default_params();
        assert!(assurance.validate(CoordinationKind::Bos).is_err());
        // Anti-coordination violates the coordination inequalities.
        let chicken = CoordinationParams::symmetric(0.0, -1.0, 1.0, -10.0);
        let err = chicken.validate(CoordinationKind::Assurance).unwrap_err();
        assert!(err.to_string().contains("a > c"));
    }

    #[test]
    fn every_default_satisfies_coordination() {
        let kinds = [
            CoordinationKind::PureCoordination,
            CoordinationKind::Bos,
            CoordinationKind::Assurance,
            CoordinationKind::StagHunt { r: -2.0 },
            CoordinationKind::StagHunt { r: -6.0 },
            CoordinationKind::StagHunt { r: -10.0 },
        ];
        for k in kinds {
            let p = k.default_params();
            let [a, b, c, d] = p.row;
            let [aa, bb, cc, dd] = p.col;
            assert!(a > c && aa > bb && d > b && dd > cc, "{k:?}");
            assert!(coordination_game(k, &p).is_ok());
        }
    }
}
