use serde::{Deserialize, Serialize};

use super::softmax_into;
use crate::equilibrium::enumerate_pne;
use crate::error::{Error, Result};
use crate::game::{JointAction, NormalFormGame};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Integrator {
    /// Plain gradient ascent, `z += h f(z)`.
    Euler,
    Rk4,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FlowConfig {
    pub step_size: f64,
    pub max_steps: u64,
    /// Probability a player must put on one action to count as committed.
    pub threshold: f64,
    pub integrator: Integrator,
}

impl Default for FlowConfig {
    fn default() -> Self {
        Self {
            step_size: 0.1,
            max_steps: 200_000,
            threshold: 0.999,
            integrator: Integrator::Euler,
        }
    }
}

impl FlowConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.step_size > 0.0 && self.step_size.is_finite()) {
            return Err(Error::Config(format!("step_size must be positive, got {}", self.step_size)));
        }
        if !(self.threshold > 0.5 && self.threshold < 1.0) {
            return Err(Error::Config(format!("threshold must lie in (0.5, 1), got {}", self.threshold)));
        }
        if self.max_steps == 0 {
            return Err(Error::Config("max_steps must be positive".into()));
        }
        Ok(())
    }
}

/// Where an integration ended.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Terminal {
    Pne(JointAction),
    Unconverged,
}

/// Returns the PNE of `game` every player has committed to with probability
/// at least `threshold`, or `Unconverged`.
pub fn classify_terminal(game: &NormalFormGame, probs: &[Vec<f64>], threshold: f64) -> Terminal {
    let pne = enumerate_pne(game);
    let mut joint = Vec::with_capacity(probs.len());
    for p in probs {
        match p.iter().position(|&q| q >= threshold) {
            Some(a) => joint.push(a),
            None => return Terminal::Unconverged,
        }
    }
    if pne.contains(&joint) {
        Terminal::Pne(joint)
    } else {
        Terminal::Unconverged
    }
}

/// The vector field `f(z)` of a game, with all players' logits concatenated.
#[derive(Debug, Clone)]
pub struct FlowField {
    game: NormalFormGame,
    counts: Vec<usize>,
    offsets: Vec<usize>,
    pne: Vec<JointAction>,
}

/// Scratch buffers reused across evaluations.
#[derive(Debug, Clone)]
struct Scratch {
    probs: Vec<f64>,
    values: Vec<f64>,
}

impl FlowField {
    pub fn new(game: &NormalFormGame) -> Self {
        let counts = game.action_counts().to_vec();
        let mut offsets = Vec::with_capacity(counts.len() + 1);
        let mut acc = 0;
        for &c in &counts {
            offsets.push(acc);
            acc += c;
        }
        offsets.push(acc);
        Self {
            game: game.clone(),
            counts,
            offsets,
            pne: enumerate_pne(game),
        }
    }

    /// Length of the system state.
    pub fn dim(&self) -> usize {
        *self.offsets.last().unwrap()
    }

    pub fn pne(&self) -> &[JointAction] {
        &self.pne
    }

    fn scratch(&self) -> Scratch {
        Scratch {
            probs: vec![0.0; self.dim()],
            values: vec![0.0; self.dim()],
        }
    }

    pub fn split_state(&self, z: &[f64]) -> Vec<Vec<f64>> {
        (0..self.counts.len())
            .map(|i| z[self.offsets[i]..self.offsets[i + 1]].to_vec())
            .collect()
    }

    pub fn policies(&self, z: &[f64]) -> Vec<Vec<f64>> {
        let mut s = self.scratch();
        self.fill_probs(z, &mut s.probs);
        self.split_state(&s.probs)
    }

    fn fill_probs(&self, z: &[f64], probs: &mut [f64]) {
        for i in 0..self.counts.len() {
            let r = self.offsets[i]..self.offsets[i + 1];
            softmax_into(&z[r.clone()], &mut probs[r]);
        }
    }

    /// Action values from `probs`, written into `values`.
    fn fill_values(&self, probs: &[f64], values: &mut [f64]) {
        values.iter_mut().for_each(|v| *v = 0.0);
        if self.counts.len() == 2 {
            let (n1, n2) = (self.counts[0], self.counts[1]);
            let (px, py) = probs.split_at(n1);
            let (ux, uy) = values.split_at_mut(n1);
            let (m1, m2) = (self.game.tensor(0), self.game.tensor(1));
            for a in 0..n1 {
                let row = a * n2;
                let mut acc = 0.0;
                for b in 0..n2 {
                    acc += m1[row + b] * py[b];
                    uy[b] += m2[row + b] * px[a];
                }
                ux[a] = acc;
            }
            return;
        }
        let n = self.counts.len();
        for (k, joint) in self.game.profiles().enumerate() {
            for i in 0..n {
                let w: f64 = (0..n)
                    .filter(|&j| j != i)
                    .map(|j| probs[self.offsets[j] + joint[j]])
                    .product();
                values[self.offsets[i] + joint[i]] += w * self.game.tensor(i)[k];
            }
        }
    }

    /// Evaluates `f(z)` into `out`; `probs` receives the policies at `z`.
    fn eval_with(&self, z: &[f64], s: &mut Scratch, out: &mut [f64]) {
        self.fill_probs(z, &mut s.probs);
        self.fill_values(&s.probs, &mut s.values);
        for i in 0..self.counts.len() {
            let r = self.offsets[i]..self.offsets[i + 1];
            let p = &s.probs[r.clone()];
            let u = &s.values[r.clone()];
            let mean: f64 = p.iter().zip(u).map(|(a, b)| a * b).sum();
            for ((o, &pj), &uj) in out[r].iter_mut().zip(p).zip(u) {
                *o = pj * (uj - mean);
            }
        }
    }

    pub fn eval(&self, z: &[f64]) -> Vec<f64> {
        let mut s = self.scratch();
        let mut out = vec![0.0; self.dim()];
        self.eval_with(z, &mut s, &mut out);
        out
    }

    fn classify_probs(&self, probs: &[f64], threshold: f64) -> Terminal {
        let committed = (0..self.counts.len())
            .all(|i| probs[self.offsets[i]..self.offsets[i + 1]].iter().any(|&q| q >= threshold));
        if !committed {
            return Terminal::Unconverged;
        }
        let mut joint = Vec::with_capacity(self.counts.len());
        for i in 0..self.counts.len() {
            let p = &probs[self.offsets[i]..self.offsets[i + 1]];
            match p.iter().position(|&q| q >= threshold) {
                Some(a) => joint.push(a),
                None => return Terminal::Unconverged,
            }
        }
        if self.pne.contains(&joint) {
            Terminal::Pne(joint)
        } else {
            Terminal::Unconverged
        }
    }

    /// Integrates from `z0` until a PNE is reached or the step budget runs out.
    pub fn integrate(&self, z0: &[f64], config: &FlowConfig) -> Result<Integration> {
        config.validate()?;
        if z0.len() != self.dim() {
            return Err(Error::input(format!("state has length {}, expected {}", z0.len(), self.dim())));
        }
        let d = self.dim();
        let h = config.step_size;
        let mut z = z0.to_vec();
        let mut s = self.scratch();
        let mut k1 = vec![0.0; d];
        let (mut k2, mut k3, mut k4, mut tmp) = match config.integrator {
            Integrator::Euler => (Vec::new(), Vec::new(), Vec::new(), Vec::new()),
            Integrator::Rk4 => (vec![0.0; d], vec![0.0; d], vec![0.0; d], vec![0.0; d]),
        };

        let mut step = 0;
        let terminal = loop {
            self.eval_with(&z, &mut s, &mut k1);
            if let Some(bad) = z.iter().chain(&k1).position(|v| !v.is_finite()) {
                return Err(Error::Numerical {
                    step,
                    detail: format!("non-finite state or gradient at component {}", bad % d),
                });
            }
            let t = self.classify_probs(&s.probs, config.threshold);
            if t != Terminal::Unconverged || step >= config.max_steps {
                break t;
            }
            match config.integrator {
                Integrator::Euler => {
                    for (zi, ki) in z.iter_mut().zip(&k1) {
                        *zi += h * ki;
                    }
                }
                Integrator::Rk4 => {
                    let axpy = |out: &mut [f64], base: &[f64], dir: &[f64], a: f64| {
                        for ((o, b), k) in out.iter_mut().zip(base).zip(dir) {
                            *o = b + a * k;
                        }
                    };
                    axpy(&mut tmp, &z, &k1, 0.5 * h);
                    self.eval_with(&tmp, &mut s, &mut k2);
                    axpy(&mut tmp, &z, &k2, 0.5 * h);
                    self.eval_with(&tmp, &mut s, &mut k3);
                    axpy(&mut tmp, &z, &k3, h);
                    self.eval_with(&tmp, &mut s, &mut k4);
                    for i in 0..d {
                        z[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
                    }
                }
            }
            step += 1;
        };

        Ok(Integration {
            terminal,
            steps: step,
            policies: self.split_state(&s.probs),
            state: z,
        })
    }
}

/// Summary of one trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Integration {
    pub terminal: Terminal,
    pub steps: u64,
    /// Final system state (concatenated logits).
    pub state: Vec<f64>,
    /// Final per-player action probabilities.
    pub policies: Vec<Vec<f64>>,
}

/// Integrates the learning flow of `game` from `z0`.
pub fn integrate(game: &NormalFormGame, z0: &[f64], config: &FlowConfig) -> Result<Integration> {
    FlowField::new(game).integrate(z0, config)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::exact_gradient;
    use crate::game::{coordination_game, extend_with_gifting, stag_hunt, CoordinationKind, GiftSet};
    use approx::assert_abs_diff_eq;

    #[test]
    fn field_matches_gradient_api() {
        let base = stag_hunt(-6.0).unwrap();
        let g = extend_with_gifting(&base, &GiftSet::uniform(2, 10.0).unwrap()).unwrap();
        let field = FlowField::new(g.game());
        let z = [0.3, -0.2, 1.0, 0.5, -1.0, 0.0, 0.25, 2.0];
        let f = field.eval(&z);
        let grad = exact_gradient(g.game(), &field.split_state(&z)).unwrap();
        for (a, b) in f.iter().zip(grad.concat()) {
            assert_abs_diff_eq!(*a, b, epsilon = 1e-14);
        }
    }

    #[test]
    fn deep_prosocial_start_reaches_hunt_hunt() {
        let g = stag_hunt(-6.0).unwrap();
        let out = integrate(&g, &[3.0, 0.0, 3.0, 0.0], &FlowConfig::default()).unwrap();
        assert_eq!(out.terminal, Terminal::Pne(vec![0, 0]));
        assert!(out.policies.iter().all(|p| p[0] >= 0.999));
    }

    #[test]
    fn deep_forage_start_reaches_risk_dominant() {
        let g = stag_hunt(-6.0).unwrap();
        let out = integrate(&g, &[-3.0, 0.0, -3.0, 0.0], &FlowConfig::default()).unwrap();
        assert_eq!(out.terminal, Terminal::Pne(vec![1, 1]));
    }

    #[test]
    fn rk4_agrees_with_euler() {
        let g = stag_hunt(-6.0).unwrap();
        let rk4 = FlowConfig {
            integrator: Integrator::Rk4,
            ..FlowConfig::default()
        };
        for z in [[3.0, 0.0, 3.0, 0.0], [-3.0, 0.0, -3.0, 0.0], [2.5, 0.0, 1.0, 0.0]] {
            let a = integrate(&g, &z, &FlowConfig::default()).unwrap();
            let b = integrate(&g, &z, &rk4).unwrap();
            assert_eq!(a.terminal, b.terminal, "{z:?}");
        }
    }

    #[test]
    fn stationary_start_stays_unconverged() {
        // uniform play is a fixed point of Pure Coordination
        let k = CoordinationKind::PureCoordination;
        let g = coordination_game(k, &k.default_params()).unwrap();
        let cfg = FlowConfig {
            max_steps: 5_000,
            ..FlowConfig::default()
        };
        let out = integrate(&g, &[0.0; 4], &cfg).unwrap();
        assert_eq!(out.terminal, Terminal::Unconverged);
        assert_eq!(out.steps, 5_000);
        assert_eq!(out.state, vec![0.0; 4]);
    }

    #[test]
    fn stag_hunt_mixed_point_is_stationary() {
        // each player is indifferent when the other hunts with probability 7/8
        let g = stag_hunt(-6.0).unwrap();
        let z = [7f64.ln(), 0.0, 7f64.ln(), 0.0];
        let f = FlowField::new(&g).eval(&z);
        assert!(f.iter().all(|v| v.abs() < 1e-14), "{f:?}");
        let cfg = FlowConfig {
            max_steps: 2_000,
            ..FlowConfig::default()
        };
        assert_eq!(integrate(&g, &z, &cfg).unwrap().terminal, Terminal::Unconverged);
    }

    #[test]
    fn classification_rules() {
        let base = stag_hunt(-6.0).unwrap();
        let g = extend_with_gifting(&base, &GiftSet::uniform(2, 10.0).unwrap()).unwrap();
        let pne = g.game();
        let committed = vec![vec![0.9995, 0.0005, 0.0, 0.0]; 2];
        assert_eq!(classify_terminal(&pne, &committed, 0.999), Terminal::Pne(vec![0, 0]));
        let split = vec![vec![0.9995, 0.0005, 0.0, 0.0], vec![0.2, 0.8, 0.0, 0.0]];
        assert_eq!(classify_terminal(&pne, &split, 0.999), Terminal::Unconverged);
        let gifting = vec![vec![0.0, 0.0, 0.9995, 0.0005]; 2];
        assert_eq!(classify_terminal(&pne, &gifting, 0.999), Terminal::Unconverged);
    }

    #[test]
    fn invalid_inputs() {
        let g = stag_hunt(-6.0).unwrap();
        assert!(integrate(&g, &[0.0; 3], &FlowConfig::default()).is_err());
        let bad = FlowConfig {
            threshold: 0.4,
            ..FlowConfig::default()
        };
        assert!(integrate(&g, &[0.0; 4], &bad).is_err());
        let out = integrate(&g, &[f64::NAN, 0.0, 0.0, 0.0], &FlowConfig::default());
        assert!(matches!(out, Err(Error::Numerical { step: 0, .. })));
    }
}
