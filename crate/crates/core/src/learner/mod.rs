//! Independent Q-learners: ε-greedy exploration, experience replay, a frozen
//! target copy and Adam updates, one learner per agent.

mod adam;
mod env;
mod qfunc;
mod replay;
mod schedule;
mod train;

pub use adam::{Adam, AdamConfig};
pub use env::Environment;
pub use qfunc::{Backend, ObsCodec, QFunction, QInit, Scratch};
pub use replay::{ReplayBuffer, Transition};
pub use schedule::EpsilonSchedule;
pub use train::{
    extract_outcome, train_run, Agent, OutcomeClass, RunOutcome, RunResult, StepRecord, TraceLevel, TrainConfig,
    Traces,
};

use rand::Rng;

use crate::error::{Error, Result};

/// Index of the largest value, lowest index on ties.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (a, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = a;
        }
    }
    best
}

/// ε-greedy choice: a uniform action with probability `epsilon`, otherwise
/// the greedy action.
pub fn select_action<R: Rng>(q: &QFunction, state: u32, epsilon: f64, rng: &mut R) -> usize {
    let mut values = vec![0.0; q.num_actions()];
    select_action_with(q, state, epsilon, rng, &mut Scratch::default(), &mut values)
}

pub(crate) fn select_action_with<R: Rng>(
    q: &QFunction,
    state: u32,
    epsilon: f64,
    rng: &mut R,
    scratch: &mut Scratch,
    values: &mut [f64],
) -> usize {
    if rng.gen::<f64>() < epsilon {
        rng.gen_range(0..q.num_actions())
    } else {
        q.values(state, scratch, values);
        argmax(values)
    }
}

/// Buffers reused across [`q_update`] calls.
#[derive(Debug, Clone, Default)]
pub struct UpdateWork {
    grad: Vec<f64>,
    scratch: Scratch,
    states: Vec<u32>,
    q_values: Vec<f64>,
    dq: Vec<f64>,
    next_states: Vec<u32>,
    next_max: Vec<f64>,
    row: Vec<f64>,
}

/// One Adam step on the mean squared TD error of `batch`. Terminal
/// transitions regress on the reward; others bootstrap from `target`.
/// Returns the batch loss.
pub fn q_update(
    q: &mut QFunction,
    target: &QFunction,
    batch: &[Transition],
    adam: &mut Adam,
    discount: f64,
    work: &mut UpdateWork,
) -> Result<f64> {
    if batch.is_empty() {
        return Err(Error::input("empty batch"));
    }
    let n_actions = q.num_actions();
    work.states.clear();
    work.q_values.clear();
    work.dq.clear();
    work.next_states.clear();
    work.next_max.clear();
    work.row.resize(n_actions, 0.0);
    let scale = 2.0 / batch.len() as f64;
    let mut loss = 0.0;
    let mut max_target: f64 = 0.0;
    for t in batch {
        let y = if t.done {
            t.reward
        } else {
            let k = match work.next_states.iter().position(|&s| s == t.next_obs) {
                Some(k) => k,
                None => {
                    target.values(t.next_obs, &mut work.scratch, &mut work.row);
                    work.next_states.push(t.next_obs);
                    work.next_max.push(work.row.iter().copied().fold(f64::NEG_INFINITY, f64::max));
                    work.next_states.len() - 1
                }
            };
            t.reward + discount * work.next_max[k]
        };
        let k = match work.states.iter().position(|&s| s == t.obs) {
            Some(k) => k,
            None => {
                q.values(t.obs, &mut work.scratch, &mut work.row);
                work.states.push(t.obs);
                work.q_values.extend_from_slice(&work.row);
                work.dq.extend(std::iter::repeat(0.0).take(n_actions));
                work.states.len() - 1
            }
        };
        let at = k * n_actions + t.action as usize;
        let diff = work.q_values[at] - y;
        loss += diff * diff;
        work.dq[at] += scale * diff;
        max_target = max_target.max(y.abs());
    }
    loss /= batch.len() as f64;
    if !loss.is_finite() {
        let max_q = work.q_values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        return Err(Error::Numerical {
            step: adam.steps() + 1,
            detail: format!(
                "non-finite loss {loss} over batch of {} (max |target| {max_target}, max |Q| {max_q})",
                batch.len()
            ),
        });
    }
    work.grad.clear();
    work.grad.resize(q.num_params(), 0.0);
    for (k, &s) in work.states.iter().enumerate() {
        q.accumulate_grad(s, &work.dq[k * n_actions..(k + 1) * n_actions], &mut work.grad, &mut work.scratch);
    }
    adam.step(q.params_mut(), &work.grad);
    Ok(loss)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn table(values: &[f64]) -> QFunction {
        let init = QInit {
            noise: 0.0,
            gift_bias: 0.0,
            gift_mask: vec![false; values.len()],
        };
        let mut q = QFunction::new(
            Backend::Tabular,
            ObsCodec::constant(),
            values.len(),
            0,
            &init,
            &mut ChaCha8Rng::seed_from_u64(0),
        )
        .unwrap();
        q.params_mut().copy_from_slice(values);
        q
    }

    #[test]
    fn greedy_choice_and_ties() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(select_action(&table(&[1.0, 2.0, 0.5, 0.3]), 0, 0.0, &mut rng), 1);
        assert_eq!(select_action(&table(&[2.0, 2.0, 0.0, 0.0]), 0, 0.0, &mut rng), 0);
    }

    #[test]
    fn full_exploration_is_uniform() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let q = table(&[1.0, 2.0, 0.5, 0.3]);
        let mut counts = [0usize; 4];
        for _ in 0..10_000 {
            counts[select_action(&q, 0, 1.0, &mut rng)] += 1;
        }
        // 2500 expected, sd = sqrt(10000 * 0.25 * 0.75) ~ 43.3
        for c in counts {
            assert!((c as f64 - 2500.0).abs() <= 3.0 * 43.3, "{counts:?}");
        }
    }

    #[test]
    fn terminal_update_converges_to_reward() {
        let mut q = table(&[0.0, 0.0]);
        let target = q.clone();
        let frozen = target.params().to_vec();
        let mut adam = Adam::new(
            AdamConfig {
                learning_rate: 0.01,
                ..AdamConfig::default()
            },
            2,
        );
        let batch = [Transition {
            obs: 0,
            action: 1,
            reward: 2.0,
            next_obs: 0,
            done: true,
        }];
        let mut work = UpdateWork::default();
        let mut prev = 0.0;
        for _ in 0..2000 {
            q_update(&mut q, &target, &batch, &mut adam, 0.99, &mut work).unwrap();
            let v = q.params()[1];
            assert!(v > prev - 1e-9 || (v - 2.0).abs() < 0.05);
            prev = v;
        }
        assert!((q.params()[1] - 2.0).abs() < 1e-2, "{}", q.params()[1]);
        assert_eq!(q.params()[0], 0.0);
        assert_eq!(target.params(), frozen.as_slice());
    }

    #[test]
    fn bootstrap_uses_target_maximum() {
        let mut q = table(&[0.0, 0.0]);
        let target = table(&[3.0, 5.0]);
        let mut adam = Adam::new(AdamConfig::default(), 2);
        let batch = [Transition {
            obs: 0,
            action: 0,
            reward: 1.0,
            next_obs: 0,
            done: false,
        }];
        let loss = q_update(&mut q, &target, &batch, &mut adam, 0.5, &mut UpdateWork::default()).unwrap();
        // target 1 + 0.5 * 5 = 3.5
        assert!((loss - 3.5f64.powi(2)).abs() < 1e-12);
        assert!(q.params()[0] > 0.0);
    }

    #[test]
    fn non_finite_loss_is_a_numerical_error() {
        let mut q = table(&[0.0, 0.0]);
        let target = q.clone();
        let mut adam = Adam::new(AdamConfig::default(), 2);
        let batch = [Transition {
            obs: 0,
            action: 0,
            reward: f64::INFINITY,
            next_obs: 0,
            done: true,
        }];
        let err = q_update(&mut q, &target, &batch, &mut adam, 0.9, &mut UpdateWork::default()).unwrap_err();
        assert!(matches!(err, Error::Numerical { step: 1, .. }), "{err:?}");
    }
}
