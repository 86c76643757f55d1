use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Backend {
    Tabular,
    Mlp,
}

/// Maps categorical observations (one symbol per opponent) to dense state
/// indices and one-hot feature positions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ObsCodec {
    radices: Vec<usize>,
    offsets: Vec<usize>,
    num_states: usize,
    input_dim: usize,
}

impl ObsCodec {
    /// A codec over `radices[k]` symbols for slot `k`. No slots means a
    /// single constant observation encoded as one always-on input.
    pub fn new(radices: Vec<usize>) -> Result<Self> {
        if radices.iter().any(|&r| r == 0) {
            return Err(Error::input("observation radices must be positive"));
        }
        let num_states = radices
            .iter()
            .try_fold(1usize, |acc, &r| acc.checked_mul(r))
            .filter(|&n| n <= u32::MAX as usize)
            .ok_or_else(|| Error::input("observation space too large"))?;
        let mut offsets = Vec::with_capacity(radices.len());
        let mut acc = 0;
        for &r in &radices {
            offsets.push(acc);
            acc += r;
        }
        Ok(Self {
            input_dim: acc.max(1),
            radices,
            offsets,
            num_states,
        })
    }

    pub fn constant() -> Self {
        Self::new(Vec::new()).expect("empty codec is valid")
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn radices(&self) -> &[usize] {
        &self.radices
    }

    /// Mixed-radix index with the first slot most significant.
    pub fn encode(&self, symbols: &[usize]) -> u32 {
        debug_assert_eq!(symbols.len(), self.radices.len());
        let mut idx = 0usize;
        for (&s, &r) in symbols.iter().zip(&self.radices) {
            debug_assert!(s < r);
            idx = idx * r + s;
        }
        idx as u32
    }

    pub fn decode(&self, state: u32) -> Vec<usize> {
        let mut rest = state as usize;
        let mut out = vec![0; self.radices.len()];
        for k in (0..self.radices.len()).rev() {
            out[k] = rest % self.radices[k];
            rest /= self.radices[k];
        }
        out
    }

    /// Active one-hot positions of `state`.
    pub fn features(&self, state: u32, out: &mut Vec<usize>) {
        out.clear();
        if self.radices.is_empty() {
            out.push(0);
            return;
        }
        let mut rest = state as usize;
        for k in (0..self.radices.len()).rev() {
            out.push(self.offsets[k] + rest % self.radices[k]);
            rest /= self.radices[k];
        }
    }
}

/// How initial action values are drawn.
#[derive(Debug, Clone, PartialEq)]
pub struct QInit {
    /// Half-width of the uniform noise on initial values.
    pub noise: f64,
    /// Added to gifting actions. When positive, non-gifting actions start
    /// with equal values.
    pub gift_bias: f64,
    pub gift_mask: Vec<bool>,
}

/// Reusable buffers for MLP evaluation.
#[derive(Debug, Clone, Default)]
pub struct Scratch {
    features: Vec<usize>,
    pre: Vec<f64>,
    hidden: Vec<f64>,
}

/// Action-value function over encoded observations.
///
/// The MLP layout in `params` is `W1[input][hidden]`, `b1[hidden]`,
/// `W2[action][hidden]`, `b2[action]`.
#[derive(Debug, Clone, PartialEq)]
pub struct QFunction {
    backend: Backend,
    codec: ObsCodec,
    num_actions: usize,
    hidden: usize,
    params: Vec<f64>,
}

impl QFunction {
    pub fn new<R: Rng>(
        backend: Backend,
        codec: ObsCodec,
        num_actions: usize,
        hidden: usize,
        init: &QInit,
        rng: &mut R,
    ) -> Result<Self> {
        if num_actions == 0 || num_actions > u16::MAX as usize {
            return Err(Error::input("action count out of range"));
        }
        if init.gift_mask.len() != num_actions {
            return Err(Error::input("gift mask length must equal the action count"));
        }
        if !(init.noise >= 0.0 && init.noise.is_finite() && init.gift_bias.is_finite()) {
            return Err(Error::input("initialization noise must be finite and non-negative"));
        }
        let biased = init.gift_bias > 0.0;
        let uniform = |rng: &mut R, half: f64| if half > 0.0 { rng.gen_range(-half..=half) } else { 0.0 };
        let params = match backend {
            Backend::Tabular => {
                let mut p = Vec::with_capacity(codec.num_states() * num_actions);
                for _ in 0..codec.num_states() {
                    let shared = uniform(rng, init.noise);
                    for &gift in &init.gift_mask {
                        let v = if biased { shared } else { uniform(rng, init.noise) };
                        p.push(if gift { v + init.gift_bias } else { v });
                    }
                }
                p
            }
            Backend::Mlp => {
                if hidden == 0 {
                    return Err(Error::input("hidden width must be positive"));
                }
                let input = codec.input_dim();
                let bound = 1.0 / (input as f64).sqrt();
                let mut p = Vec::with_capacity((input + 1 + num_actions) * hidden + num_actions);
                for _ in 0..(input + 1) * hidden {
                    p.push(uniform(rng, bound));
                }
                let out_bound = init.noise / hidden as f64;
                let row: Vec<f64> = (0..hidden).map(|_| uniform(rng, out_bound)).collect();
                for _ in 0..num_actions {
                    if biased {
                        p.extend_from_slice(&row);
                    } else {
                        p.extend((0..hidden).map(|_| uniform(rng, out_bound)));
                    }
                }
                let shared = uniform(rng, 0.5 * init.noise);
                for &gift in &init.gift_mask {
                    let v = if biased { shared } else { uniform(rng, 0.5 * init.noise) };
                    p.push(if gift { v + init.gift_bias } else { v });
                }
                p
            }
        };
        Ok(Self {
            backend,
            codec,
            num_actions,
            hidden,
            params,
        })
    }

    pub fn backend(&self) -> Backend {
        self.backend
    }

    pub fn codec(&self) -> &ObsCodec {
        &self.codec
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn num_params(&self) -> usize {
        self.params.len()
    }

    /// Copies parameters from `other` (same architecture).
    pub fn copy_from(&mut self, other: &QFunction) {
        self.params.copy_from_slice(&other.params);
    }

    pub fn values(&self, state: u32, scratch: &mut Scratch, out: &mut [f64]) {
        debug_assert_eq!(out.len(), self.num_actions);
        match self.backend {
            Backend::Tabular => {
                let at = state as usize * self.num_actions;
                out.copy_from_slice(&self.params[at..at + self.num_actions]);
            }
            Backend::Mlp => {
                self.forward_hidden(state, scratch);
                let h = self.hidden;
                let w2 = (self.codec.input_dim() + 1) * h;
                let b2 = w2 + self.num_actions * h;
                for (a, q) in out.iter_mut().enumerate() {
                    let row = &self.params[w2 + a * h..w2 + (a + 1) * h];
                    *q = self.params[b2 + a] + row.iter().zip(&scratch.hidden).map(|(w, x)| w * x).sum::<f64>();
                }
            }
        }
    }

    pub fn values_vec(&self, state: u32) -> Vec<f64> {
        let mut out = vec![0.0; self.num_actions];
        self.values(state, &mut Scratch::default(), &mut out);
        out
    }

    fn forward_hidden(&self, state: u32, scratch: &mut Scratch) {
        let h = self.hidden;
        let b1 = self.codec.input_dim() * h;
        self.codec.features(state, &mut scratch.features);
        scratch.pre.clear();
        scratch.pre.extend_from_slice(&self.params[b1..b1 + h]);
        for &k in &scratch.features {
            for (z, w) in scratch.pre.iter_mut().zip(&self.params[k * h..(k + 1) * h]) {
                *z += w;
            }
        }
        scratch.hidden.clear();
        scratch.hidden.extend(scratch.pre.iter().map(|&z| z.max(0.0)));
    }

    /// Adds `d loss / d params` to `grad` given `dq[a] = d loss / d Q(state, a)`.
    pub fn accumulate_grad(&self, state: u32, dq: &[f64], grad: &mut [f64], scratch: &mut Scratch) {
        debug_assert_eq!(dq.len(), self.num_actions);
        match self.backend {
            Backend::Tabular => {
                let at = state as usize * self.num_actions;
                for (g, d) in grad[at..at + self.num_actions].iter_mut().zip(dq) {
                    *g += d;
                }
            }
            Backend::Mlp => {
                self.forward_hidden(state, scratch);
                let h = self.hidden;
                let b1 = self.codec.input_dim() * h;
                let w2 = b1 + h;
                let b2 = w2 + self.num_actions * h;
                // reuse `pre` as d loss / d pre-activation
                for j in 0..h {
                    let mut dh = 0.0;
                    for (a, &d) in dq.iter().enumerate() {
                        dh += d * self.params[w2 + a * h + j];
                    }
                    scratch.pre[j] = if scratch.pre[j] > 0.0 { dh } else { 0.0 };
                }
                for (a, &d) in dq.iter().enumerate() {
                    if d == 0.0 {
                        continue;
                    }
                    grad[b2 + a] += d;
                    for (g, x) in grad[w2 + a * h..w2 + (a + 1) * h].iter_mut().zip(&scratch.hidden) {
                        *g += d * x;
                    }
                }
                for (g, dz) in grad[b1..b1 + h].iter_mut().zip(&scratch.pre) {
                    *g += dz;
                }
                for &k in &scratch.features {
                    for (g, dz) in grad[k * h..(k + 1) * h].iter_mut().zip(&scratch.pre) {
                        *g += dz;
                    }
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn init(n: usize, bias: f64) -> QInit {
        QInit {
            noise: 0.01,
            gift_bias: bias,
            gift_mask: (0..n).map(|a| a >= n / 2).collect(),
        }
    }

    #[test]
    fn codec_round_trip() {
        let c = ObsCodec::new(vec![5, 3]).unwrap();
        assert_eq!(c.num_states(), 15);
        assert_eq!(c.input_dim(), 8);
        for s in 0..15u32 {
            let sym = c.decode(s);
            assert_eq!(c.encode(&sym), s);
            let mut f = Vec::new();
            c.features(s, &mut f);
            f.sort();
            assert_eq!(f, vec![sym[0], 5 + sym[1]]);
        }
        let k = ObsCodec::constant();
        assert_eq!((k.num_states(), k.input_dim()), (1, 1));
        assert_eq!(k.encode(&[]), 0);
    }

    #[test]
    fn initial_values_are_small() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for backend in [Backend::Tabular, Backend::Mlp] {
            let q = QFunction::new(backend, ObsCodec::new(vec![5]).unwrap(), 4, 64, &init(4, 0.0), &mut rng).unwrap();
            for s in 0..5 {
                for v in q.values_vec(s) {
                    assert!(v.abs() <= 0.03, "{backend:?} {v}");
                }
            }
        }
    }

    #[test]
    fn gift_bias_raises_gift_actions_only() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for backend in [Backend::Tabular, Backend::Mlp] {
            let q = QFunction::new(backend, ObsCodec::constant(), 4, 16, &init(4, 1.0), &mut rng).unwrap();
            let v = q.values_vec(0);
            assert_eq!(v[0], v[1], "{backend:?}");
            assert_eq!(v[2], v[3]);
            assert!((v[2] - v[0] - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn mlp_gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut q = QFunction::new(Backend::Mlp, ObsCodec::new(vec![3, 2]).unwrap(), 3, 8, &init(3, 0.0), &mut rng).unwrap();
        for p in q.params_mut() {
            *p += rng.gen_range(-0.5..0.5);
        }
        let dq = [0.7, -1.3, 0.4];
        let loss = |q: &QFunction, s: u32| q.values_vec(s).iter().zip(&dq).map(|(v, d)| v * d).sum::<f64>();
        for s in 0..6 {
            let mut grad = vec![0.0; q.num_params()];
            q.accumulate_grad(s, &dq, &mut grad, &mut Scratch::default());
            for i in 0..q.num_params() {
                let h = 1e-6;
                let mut plus = q.clone();
                plus.params_mut()[i] += h;
                let mut minus = q.clone();
                minus.params_mut()[i] -= h;
                let fd = (loss(&plus, s) - loss(&minus, s)) / (2.0 * h);
                assert!((fd - grad[i]).abs() < 1e-6, "param {i} state {s}: {fd} vs {}", grad[i]);
            }
        }
    }

    #[test]
    fn tabular_gradient_touches_one_row() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let q = QFunction::new(Backend::Tabular, ObsCodec::new(vec![2]).unwrap(), 2, 0, &init(2, 0.0), &mut rng).unwrap();
        let mut grad = vec![0.0; 4];
        q.accumulate_grad(1, &[1.0, 2.0], &mut grad, &mut Scratch::default());
        assert_eq!(grad, vec![0.0, 0.0, 1.0, 2.0]);
    }
}
