use std::collections::VecDeque;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{
    q_update, select_action_with, Adam, AdamConfig, Backend, Environment, EpsilonSchedule, QFunction, QInit,
    ReplayBuffer, Scratch, Transition, UpdateWork,
};
use crate::error::{Error, Result};
use crate::game::JointAction;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TraceLevel {
    /// Gifting-frequency summaries only.
    #[default]
    Summary,
    /// Also keep the per-step batch gifting curve.
    Curve,
    /// Also keep the curve and one record per environment step.
    Full,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub backend: Backend,
    /// Hidden width of the MLP backend.
    pub hidden: usize,
    pub episodes: u64,
    pub batch_size: usize,
    pub buffer_capacity: usize,
    /// Transitions collected before the first update.
    pub warmup: usize,
    /// Target copies are refreshed every this many episodes.
    pub target_period: u64,
    pub discount: f64,
    pub epsilon: EpsilonSchedule,
    pub adam: AdamConfig,
    pub init_noise: f64,
    /// Extra initial value on gifting actions (0 disables).
    pub gift_bias: f64,
    pub trace: TraceLevel,
    /// Optimization steps averaged for the initial batch gifting frequency.
    pub gift_window_start: usize,
    /// Optimization steps averaged for the final batch gifting frequency.
    pub gift_window_end: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            backend: Backend::Tabular,
            hidden: 64,
            episodes: 45_000,
            batch_size: 4,
            buffer_capacity: 100_000,
            warmup: 500,
            target_period: 250,
            discount: 0.99,
            epsilon: EpsilonSchedule::default(),
            adam: AdamConfig::default(),
            init_noise: 0.3,
            gift_bias: 0.0,
            trace: TraceLevel::Summary,
            gift_window_start: 100,
            gift_window_end: 1000,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::Config(m.to_string()));
        if self.episodes == 0 || self.batch_size == 0 || self.buffer_capacity == 0 || self.target_period == 0 {
            return fail("episodes, batch_size, buffer_capacity and target_period must be positive");
        }
        if self.backend == Backend::Mlp && self.hidden == 0 {
            return fail("hidden must be positive for the mlp backend");
        }
        if !(0.0..=1.0).contains(&self.discount) {
            return fail("discount must lie in [0, 1]");
        }
        if !self.epsilon.is_valid() {
            return fail("epsilon schedule must have start, end in (0, 1] and positive decay_steps");
        }
        let a = &self.adam;
        if !(a.learning_rate > 0.0 && (0.0..1.0).contains(&a.beta1) && (0.0..1.0).contains(&a.beta2) && a.eps > 0.0) {
            return fail("adam settings out of range");
        }
        if !(self.init_noise >= 0.0 && self.init_noise.is_finite() && self.gift_bias >= 0.0 && self.gift_bias.is_finite())
        {
            return fail("init_noise and gift_bias must be finite and non-negative");
        }
        if self.gift_window_start == 0 || self.gift_window_end == 0 {
            return fail("gift windows must be positive");
        }
        Ok(())
    }
}

/// One independent learner. It owns its parameters, target copy, optimizer,
/// replay buffer and random stream, and never reads another agent's.
#[derive(Debug, Clone)]
pub struct Agent {
    q: QFunction,
    target: QFunction,
    adam: Adam,
    buffer: ReplayBuffer,
    rng: ChaCha8Rng,
    gift_mask: Vec<bool>,
    work: UpdateWork,
    scratch: Scratch,
    values: Vec<f64>,
    batch: Vec<Transition>,
}

impl Agent {
    pub fn new(env: &Environment, index: usize, config: &TrainConfig, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(index as u64 + 1);
        let gift_mask = env.gift_mask(index).to_vec();
        let init = QInit {
            noise: config.init_noise,
            gift_bias: config.gift_bias,
            gift_mask: gift_mask.clone(),
        };
        let n_actions = env.num_actions(index);
        let q = QFunction::new(config.backend, env.codec(index).clone(), n_actions, config.hidden, &init, &mut rng)?;
        Ok(Self {
            target: q.clone(),
            adam: Adam::new(config.adam, q.num_params()),
            buffer: ReplayBuffer::new(config.buffer_capacity),
            rng,
            gift_mask,
            work: UpdateWork::default(),
            scratch: Scratch::default(),
            values: vec![0.0; n_actions],
            batch: Vec::with_capacity(config.batch_size),
            q,
        })
    }

    pub fn q(&self) -> &QFunction {
        &self.q
    }

    pub fn target(&self) -> &QFunction {
        &self.target
    }

    pub fn buffer(&self) -> &ReplayBuffer {
        &self.buffer
    }

    pub fn act(&mut self, state: u32, epsilon: f64) -> usize {
        select_action_with(&self.q, state, epsilon, &mut self.rng, &mut self.scratch, &mut self.values)
    }

    pub fn remember(&mut self, t: Transition) {
        self.buffer.push(t);
    }

    /// Samples a batch and takes one optimization step. Returns the fraction
    /// of gifting actions in the sampled batch.
    pub fn learn(&mut self, batch_size: usize, discount: f64) -> Result<f64> {
        self.buffer.sample_into(batch_size, &mut self.rng, &mut self.batch);
        q_update(&mut self.q, &self.target, &self.batch, &mut self.adam, discount, &mut self.work)?;
        let gifts = self.batch.iter().filter(|t| self.gift_mask[t.action as usize]).count();
        Ok(gifts as f64 / self.batch.len() as f64)
    }

    pub fn sync_target(&mut self) {
        self.target.copy_from(&self.q);
    }

    /// Greedy action for every observation state.
    pub fn greedy_policy(&self) -> Vec<usize> {
        let mut scratch = Scratch::default();
        let mut values = vec![0.0; self.q.num_actions()];
        (0..self.q.codec().num_states() as u32)
            .map(|s| {
                self.q.values(s, &mut scratch, &mut values);
                super::argmax(&values)
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OutcomeClass {
    Prosocial,
    RiskDominant,
    OtherPne,
    Unconverged,
    Failed,
}

impl OutcomeClass {
    pub fn is_pne(self) -> bool {
        matches!(self, Self::Prosocial | Self::RiskDominant | Self::OtherPne)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunOutcome {
    pub class: OutcomeClass,
    /// Greedy extended joint action of every step of the evaluation episode.
    pub rollout: Vec<JointAction>,
    /// Whether any agent gifts in the greedy rollout.
    pub gifting: bool,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub episode: u64,
    pub step: usize,
    pub epsilon: f64,
    pub actions: Vec<usize>,
    pub rewards: Vec<f64>,
    /// Mean over agents of the gifting fraction in their sampled batches.
    pub batch_gift: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Traces {
    pub episodes: u64,
    pub env_steps: u64,
    pub opt_steps: u64,
    /// Mean batch gifting fraction over the first optimization steps.
    pub gift_start: Option<f64>,
    /// Mean batch gifting fraction over the last optimization steps.
    pub gift_end: Option<f64>,
    /// Fraction of gifting actions taken over the last environment steps.
    pub env_gift_end: Option<f64>,
    /// Batch gifting fraction per optimization step (curve and full traces).
    pub gift_curve: Vec<f64>,
    pub records: Vec<StepRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    /// Greedy action per observation state, per agent.
    pub policies: Vec<Vec<usize>>,
    pub outcome: RunOutcome,
    pub traces: Traces,
}

/// Classifies greedy policies by the equilibrium their rollout reaches.
///
/// One-shot games compare the greedy joint action with the equilibria of
/// the extended game. Repeated games require every step's base joint
/// action to be the same kind of stage equilibrium; gift components are
/// reported in [`RunOutcome::gifting`] only.
pub fn extract_outcome(env: &Environment, policies: &[Vec<usize>]) -> RunOutcome {
    let stage = env.stage();
    let rollout = env.rollout(policies);
    let gifting = rollout
        .iter()
        .any(|joint| joint.iter().enumerate().any(|(p, &a)| stage.is_gifting(p, a)));
    let pne = env.reference_pne();
    let classes: Vec<OutcomeClass> = rollout
        .iter()
        .map(|joint| {
            let key = if env.is_repeated() { stage.project(joint).0 } else { joint.clone() };
            match pne.find(&key) {
                None => OutcomeClass::Unconverged,
                Some(p) if p.prosocial => OutcomeClass::Prosocial,
                Some(p) if p.risk_dominant => OutcomeClass::RiskDominant,
                Some(_) => OutcomeClass::OtherPne,
            }
        })
        .collect();
    let class = if classes.iter().any(|&c| c == OutcomeClass::Unconverged) {
        OutcomeClass::Unconverged
    } else if classes.iter().all(|&c| c == classes[0]) {
        classes[0]
    } else {
        OutcomeClass::OtherPne
    };
    RunOutcome {
        class,
        rollout,
        gifting,
        error: None,
    }
}

struct GiftTracker {
    start_window: usize,
    start: Vec<f64>,
    end: VecDeque<f64>,
    end_window: usize,
    env_end: VecDeque<f64>,
    curve: Option<Vec<f64>>,
}

impl GiftTracker {
    fn push_batch(&mut self, frac: f64) {
        if self.start.len() < self.start_window {
            self.start.push(frac);
        }
        if self.end.len() == self.end_window {
            self.end.pop_front();
        }
        self.end.push_back(frac);
        if let Some(c) = &mut self.curve {
            c.push(frac);
        }
    }

    fn push_env(&mut self, frac: f64) {
        if self.env_end.len() == self.end_window {
            self.env_end.pop_front();
        }
        self.env_end.push_back(frac);
    }
}

fn mean(xs: impl ExactSizeIterator<Item = f64>) -> Option<f64> {
    let n = xs.len();
    (n > 0).then(|| xs.sum::<f64>() / n as f64)
}

/// Trains one independent learner per agent and classifies the result.
///
/// Agent `i` draws its initialization, exploration and replay sampling from
/// stream `i + 1` of a generator seeded with `seed`. A numerical failure ends
/// the run with a [`OutcomeClass::Failed`] outcome.
pub fn train_run(env: &Environment, config: &TrainConfig, seed: u64) -> Result<RunResult> {
    config.validate()?;
    let n = env.num_agents();
    let mut agents = (0..n)
        .map(|i| Agent::new(env, i, config, seed))
        .collect::<Result<Vec<_>>>()?;
    let full = config.trace == TraceLevel::Full;
    let mut tracker = GiftTracker {
        start_window: config.gift_window_start,
        start: Vec::new(),
        end: VecDeque::with_capacity(config.gift_window_end),
        end_window: config.gift_window_end,
        env_end: VecDeque::with_capacity(config.gift_window_end),
        curve: (config.trace != TraceLevel::Summary).then(Vec::new),
    };
    let mut traces = Traces::default();
    let ready = config.warmup.max(config.batch_size);
    let mut states = vec![0u32; n];
    let mut next = vec![0u32; n];
    let mut joint = vec![0usize; n];
    let mut rewards = vec![0.0; n];
    let mut failure = None;

    'episodes: for episode in 0..config.episodes {
        env.initial_states(&mut states);
        for t in 0..env.horizon() {
            let epsilon = config.epsilon.epsilon_at(traces.env_steps);
            for (i, agent) in agents.iter_mut().enumerate() {
                joint[i] = agent.act(states[i], epsilon);
            }
            let done = env.step(t, &joint, &mut rewards, &mut next);
            traces.env_steps += 1;
            let gifting = (0..n).filter(|&i| env.gift_mask(i)[joint[i]]).count();
            tracker.push_env(gifting as f64 / n as f64);
            for (i, agent) in agents.iter_mut().enumerate() {
                agent.remember(Transition {
                    obs: states[i],
                    action: joint[i] as u16,
                    reward: rewards[i],
                    next_obs: next[i],
                    done,
                });
            }
            let mut batch_gift = None;
            if agents[0].buffer().len() >= ready {
                let mut sum = 0.0;
                for agent in agents.iter_mut() {
                    match agent.learn(config.batch_size, config.discount) {
                        Ok(f) => sum += f,
                        Err(e) => {
                            failure = Some(e);
                            break 'episodes;
                        }
                    }
                }
                traces.opt_steps += 1;
                let frac = sum / n as f64;
                tracker.push_batch(frac);
                batch_gift = Some(frac);
            }
            if full {
                traces.records.push(StepRecord {
                    episode,
                    step: t,
                    epsilon,
                    actions: joint.clone(),
                    rewards: rewards.clone(),
                    batch_gift,
                });
            }
            std::mem::swap(&mut states, &mut next);
            if done {
                break;
            }
        }
        traces.episodes = episode + 1;
        if traces.episodes % config.target_period == 0 {
            agents.iter_mut().for_each(Agent::sync_target);
        }
    }

    traces.gift_start = mean(tracker.start.iter().copied());
    traces.gift_end = mean(tracker.end.iter().copied());
    traces.env_gift_end = mean(tracker.env_end.iter().copied());
    traces.gift_curve = tracker.curve.unwrap_or_default();
    let policies: Vec<Vec<usize>> = agents.iter().map(Agent::greedy_policy).collect();
    let outcome = match failure {
        None => extract_outcome(env, &policies),
        Some(e) => RunOutcome {
            class: OutcomeClass::Failed,
            rollout: Vec::new(),
            gifting: false,
            error: Some(e.to_string()),
        },
    };
    Ok(RunResult {
        policies,
        outcome,
        traces,
    })
}
