use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::flow::{FlowConfig, FlowField, Terminal};
use crate::equilibrium::classify_equilibria;
use crate::error::{Error, Result};
use crate::game::{extend_with_gifting, stag_hunt, GiftSet, GiftedGame, JointAction, NormalFormGame};

/// Half-width of the sampled logit-difference range.
pub const AXIS_RANGE: f64 = 3.0;

/// `n` evenly spaced points over `[-3, 3]`, endpoints included; a single
/// point sits at 0.
pub fn grid_axis(n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![0.0],
        _ => (0..n)
            .map(|k| -AXIS_RANGE + 2.0 * AXIS_RANGE * k as f64 / (n - 1) as f64)
            .collect(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BasinCell {
    /// Row player's `x1 - x2`.
    pub d1: f64,
    /// Column player's `y1 - y2`.
    pub d2: f64,
    pub samples: usize,
    pub prosocial: usize,
    pub risk_dominant: usize,
    pub other_pne: usize,
    pub unconverged: usize,
    pub failed: usize,
}

impl BasinCell {
    /// Fraction of samples that reached a prosocial equilibrium. Unconverged
    /// and failed samples count against it.
    pub fn fraction(&self) -> f64 {
        self.prosocial as f64 / self.samples as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BasinGrid {
    pub gifted: bool,
    pub axis: Vec<f64>,
    pub gift_axis: Vec<f64>,
    /// Number of gift logits sampled per initial state.
    pub gift_dims: usize,
    /// Row-major over (d1, d2).
    pub cells: Vec<BasinCell>,
}

impl BasinGrid {
    pub fn resolution(&self) -> usize {
        self.axis.len()
    }

    pub fn cell(&self, i: usize, j: usize) -> &BasinCell {
        &self.cells[i * self.axis.len() + j]
    }

    fn total(&self, f: impl Fn(&BasinCell) -> usize) -> f64 {
        let n: usize = self.cells.iter().map(&f).sum();
        let d: usize = self.cells.iter().map(|c| c.samples).sum();
        n as f64 / d as f64
    }

    /// Prosocial fraction over every sample of every cell.
    pub fn aggregate_fraction(&self) -> f64 {
        self.total(|c| c.prosocial)
    }

    pub fn unconverged_fraction(&self) -> f64 {
        self.total(|c| c.unconverged)
    }

    pub fn failed_fraction(&self) -> f64 {
        self.total(|c| c.failed)
    }
}

/// Outcome labels of the extended game's equilibria.
struct Labels {
    prosocial: Vec<JointAction>,
    risk_dominant: Option<JointAction>,
}

impl Labels {
    fn new(game: &NormalFormGame) -> Self {
        let set = classify_equilibria(game);
        Self {
            prosocial: set.prosocial().map(|p| p.joint.clone()).collect(),
            risk_dominant: set.risk_dominant().map(|p| p.joint.clone()),
        }
    }
}

fn check_two_by_two(game: &GiftedGame) -> Result<()> {
    if game.num_players() != 2 || game.base().action_counts() != [2, 2] {
        return Err(Error::input("basin analysis needs a 2-player game with two base actions each"));
    }
    Ok(())
}

fn gift_dims(game: &GiftedGame) -> usize {
    game.game().action_counts().iter().map(|n| n - 2).sum()
}

/// Builds the system state with `x2 = y2 = 0` as the reference logits.
fn initial_state(game: &GiftedGame, d1: f64, d2: f64, gift_logits: &[f64]) -> Vec<f64> {
    let counts = game.game().action_counts();
    let mut z = Vec::with_capacity(counts[0] + counts[1]);
    let mut g = gift_logits.iter();
    for (d, &n) in [d1, d2].into_iter().zip(counts) {
        z.push(d);
        z.push(0.0);
        z.extend(g.by_ref().take(n - 2));
    }
    z
}

/// Sweeps initial logit differences over a `resolution x resolution` grid on
/// `[-3, 3]^2`. For each cell, every combination of `gift_samples` evenly
/// spaced values per gift logit is integrated and the prosocial fraction is
/// recorded; an ungifted game has one sample per cell.
pub fn basin_sweep(game: &GiftedGame, resolution: usize, gift_samples: usize, config: &FlowConfig) -> Result<BasinGrid> {
    check_two_by_two(game)?;
    config.validate()?;
    if resolution < 2 {
        return Err(Error::input("resolution must be at least 2"));
    }
    if gift_samples == 0 {
        return Err(Error::input("need at least one sample per gift axis"));
    }
    let dims = gift_dims(game);
    let axis = grid_axis(resolution);
    let gift_axis = grid_axis(gift_samples);
    let combos = gift_samples.pow(dims as u32);
    let field = FlowField::new(game.game());
    let labels = Labels::new(game.game());

    let cells = (0..resolution * resolution)
        .into_par_iter()
        .map(|c| {
            let (d1, d2) = (axis[c / resolution], axis[c % resolution]);
            let mut cell = BasinCell {
                d1,
                d2,
                samples: combos,
                prosocial: 0,
                risk_dominant: 0,
                other_pne: 0,
                unconverged: 0,
                failed: 0,
            };
            let mut gift_logits = vec![0.0; dims];
            for mut k in 0..combos {
                for g in gift_logits.iter_mut() {
                    *g = gift_axis[k % gift_samples];
                    k /= gift_samples;
                }
                let z0 = initial_state(game, d1, d2, &gift_logits);
                match field.integrate(&z0, config) {
                    Ok(out) => match out.terminal {
                        Terminal::Pne(j) if labels.prosocial.contains(&j) => cell.prosocial += 1,
                        Terminal::Pne(j) if labels.risk_dominant.as_ref() == Some(&j) => cell.risk_dominant += 1,
                        Terminal::Pne(_) => cell.other_pne += 1,
                        Terminal::Unconverged => cell.unconverged += 1,
                    },
                    Err(_) => cell.failed += 1,
                }
            }
            cell
        })
        .collect();

    Ok(BasinGrid {
        gifted: dims > 0,
        axis,
        gift_axis: if dims > 0 { gift_axis } else { Vec::new() },
        gift_dims: dims,
        cells,
    })
}

/// Basin grids of `base` without gifting and with gifts `{0, gamma}`.
pub fn basin_sweep_pair(
    base: &NormalFormGame,
    gamma: f64,
    resolution: usize,
    gift_samples: usize,
    config: &FlowConfig,
) -> Result<(BasinGrid, BasinGrid)> {
    let plain = basin_sweep(&GiftedGame::ungifted(base), resolution, gift_samples, config)?;
    let gifted = extend_with_gifting(base, &GiftSet::uniform(2, gamma)?)?;
    let with = basin_sweep(&gifted, resolution, gift_samples, config)?;
    Ok((plain, with))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrequencyRow {
    pub r: f64,
    /// `None` for the ungifted baseline.
    pub gamma: Option<f64>,
    pub frequency: f64,
    pub unconverged: f64,
    pub failed: f64,
}

/// Aggregate prosocial frequency of Stag Hunt for every `(r, gamma)` pair,
/// plus the ungifted baseline for each `r` (listed first).
pub fn frequency_sweep(
    r_values: &[f64],
    gammas: &[f64],
    resolution: usize,
    gift_samples: usize,
    config: &FlowConfig,
) -> Result<Vec<FrequencyRow>> {
    let mut rows = Vec::with_capacity(r_values.len() * (gammas.len() + 1));
    for &r in r_values {
        let base = stag_hunt(r)?;
        let mut push = |gamma: Option<f64>, grid: BasinGrid| {
            rows.push(FrequencyRow {
                r,
                gamma,
                frequency: grid.aggregate_fraction(),
                unconverged: grid.unconverged_fraction(),
                failed: grid.failed_fraction(),
            })
        };
        push(None, basin_sweep(&GiftedGame::ungifted(&base), resolution, gift_samples, config)?);
        for &gamma in gammas {
            let game = extend_with_gifting(&base, &GiftSet::uniform(2, gamma)?)?;
            push(Some(gamma), basin_sweep(&game, resolution, gift_samples, config)?);
        }
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PortraitPoint {
    pub d1: f64,
    pub d2: f64,
    /// Unit direction of `(d/dt (x1 - x2), d/dt (y1 - y2))`; zero at stationary points.
    pub dx: f64,
    pub dy: f64,
    pub magnitude: f64,
}

/// Normalized flow directions in the `(x1 - x2, y1 - y2)` plane with the
/// gift logits held at `gift_offsets` (relative to `x2`, `y2`).
pub fn phase_portrait(game: &GiftedGame, gift_offsets: &[f64], axis: &[f64]) -> Result<Vec<PortraitPoint>> {
    check_two_by_two(game)?;
    let dims = gift_dims(game);
    if gift_offsets.len() != dims {
        return Err(Error::input(format!(
            "expected {dims} gift offsets, got {}",
            gift_offsets.len()
        )));
    }
    if axis.iter().any(|v| !v.is_finite()) {
        return Err(Error::input("portrait axis must be finite"));
    }
    let field = FlowField::new(game.game());
    let n1 = game.game().action_counts()[0];
    let mut out = Vec::with_capacity(axis.len() * axis.len());
    for &d1 in axis {
        for &d2 in axis {
            let f = field.eval(&initial_state(game, d1, d2, gift_offsets));
            let (u, v) = (f[0] - f[1], f[n1] - f[n1 + 1]);
            let magnitude = u.hypot(v);
            let (dx, dy) = if magnitude > 0.0 { (u / magnitude, v / magnitude) } else { (0.0, 0.0) };
            out.push(PortraitPoint {
                d1,
                d2,
                dx,
                dy,
                magnitude,
            });
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn axis_includes_endpoints() {
        assert_eq!(grid_axis(3), vec![-3.0, 0.0, 3.0]);
        assert_eq!(grid_axis(1), vec![0.0]);
        let a = grid_axis(21);
        assert_eq!((a[0], a[20]), (-3.0, 3.0));
        assert_abs_diff_eq!(a[10], 0.0, epsilon = 1e-15);
    }

    #[test]
    fn ungifted_corners() {
        let g = GiftedGame::ungifted(&stag_hunt(-6.0).unwrap());
        let grid = basin_sweep(&g, 3, 5, &FlowConfig::default()).unwrap();
        assert_eq!(grid.cells.len(), 9);
        assert!(!grid.gifted);
        assert_eq!(grid.cell(2, 2).fraction(), 1.0);
        assert_eq!(grid.cell(0, 0).fraction(), 0.0);
        assert_eq!(grid.cell(0, 0).risk_dominant, 1);
        assert!(grid.cells.iter().all(|c| c.samples == 1));
    }

    #[test]
    fn gifted_sweep_shape() {
        let base = stag_hunt(-6.0).unwrap();
        let g = extend_with_gifting(&base, &GiftSet::uniform(2, 10.0).unwrap()).unwrap();
        let grid = basin_sweep(&g, 2, 2, &FlowConfig::default()).unwrap();
        assert_eq!(grid.gift_dims, 4);
        assert!(grid.cells.iter().all(|c| c.samples == 16));
        for c in &grid.cells {
            assert_eq!(c.prosocial + c.risk_dominant + c.other_pne + c.unconverged + c.failed, 16);
            assert!((0.0..=1.0).contains(&c.fraction()));
        }
    }

    #[test]
    fn sweep_rejects_bad_arguments() {
        let g = GiftedGame::ungifted(&stag_hunt(-6.0).unwrap());
        assert!(basin_sweep(&g, 1, 1, &FlowConfig::default()).is_err());
        assert!(basin_sweep(&g, 3, 0, &FlowConfig::default()).is_err());
        let three = NormalFormGame::new(vec![3, 2], vec![vec![0.0; 6]; 2]).unwrap();
        assert!(basin_sweep(&GiftedGame::ungifted(&three), 3, 1, &FlowConfig::default()).is_err());
    }

    #[test]
    fn portrait_points_toward_prosocial_corner() {
        let g = GiftedGame::ungifted(&stag_hunt(-6.0).unwrap());
        let field = phase_portrait(&g, &[], &[3.0]).unwrap();
        assert!(field[0].dx > 0.0 && field[0].dy > 0.0);
        assert_abs_diff_eq!(field[0].dx.hypot(field[0].dy), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn portrait_zero_at_stationary_point() {
        let g = GiftedGame::ungifted(&stag_hunt(-6.0).unwrap());
        let p = phase_portrait(&g, &[], &[7f64.ln()]).unwrap();
        assert!(p[0].magnitude < 1e-14);
        let k = crate::game::CoordinationKind::PureCoordination;
        let pc = crate::game::coordination_game(k, &k.default_params()).unwrap();
        let p = phase_portrait(&GiftedGame::ungifted(&pc), &[], &[0.0]).unwrap();
        assert_eq!((p[0].dx, p[0].dy, p[0].magnitude), (0.0, 0.0, 0.0));
    }

    #[test]
    fn portrait_is_symmetric_under_player_swap() {
        let base = stag_hunt(-6.0).unwrap();
        let g = extend_with_gifting(&base, &GiftSet::uniform(2, 10.0).unwrap()).unwrap();
        let axis = grid_axis(7);
        let field = phase_portrait(&g, &[1.0, -0.5, 1.0, -0.5], &axis).unwrap();
        let n = axis.len();
        for i in 0..n {
            for j in 0..n {
                let p = &field[i * n + j];
                let q = &field[j * n + i];
                assert_abs_diff_eq!(p.dx, q.dy, epsilon = 1e-12);
                assert_abs_diff_eq!(p.dy, q.dx, epsilon = 1e-12);
            }
        }
        assert!(phase_portrait(&g, &[0.0; 3], &axis).is_err());
    }
}
