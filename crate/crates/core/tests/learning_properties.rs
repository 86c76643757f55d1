use proptest::collection::vec;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use gifting::dynamics::{exact_gradient, expected_payoff, integrate, softmax, FlowConfig, Terminal};
use gifting::equilibrium::enumerate_pne;
use gifting::experiments::{derive_seed, wilson_interval, Arm, Z_95};
use gifting::game::{extend_with_gifting, GiftSet, NormalFormGame};
use gifting::learner::{EpsilonSchedule, ReplayBuffer, Transition};

/// Two players with 2-4 actions, optionally extended with `{0, gamma}` gifts.
fn two_player_game() -> impl Strategy<Value = NormalFormGame> {
    (2usize..=4, 2usize..=4, prop::option::of(0.5f64..20.0)).prop_flat_map(|(a, b, gamma)| {
        vec(vec(-10.0f64..10.0, a * b), 2).prop_map(move |p| {
            let base = NormalFormGame::new(vec![a, b], p).unwrap();
            match gamma {
                None => base,
                Some(g) => extend_with_gifting(&base, &GiftSet::uniform(2, g).unwrap())
                    .unwrap()
                    .game()
                    .clone(),
            }
        })
    })
}

fn random_logits(game: &NormalFormGame, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    game.action_counts()
        .iter()
        .map(|&n| (0..n).map(|_| rng.gen_range(-3.0..3.0)).collect())
        .collect()
}

/// Central differences of each player's expected payoff in its own logits.
fn finite_difference(game: &NormalFormGame, logits: &[Vec<f64>], h: f64) -> Vec<Vec<f64>> {
    (0..logits.len())
        .map(|p| {
            (0..logits[p].len())
                .map(|j| {
                    let mut up = logits.to_vec();
                    let mut down = logits.to_vec();
                    up[p][j] += h;
                    down[p][j] -= h;
                    let fu = expected_payoff(game, &up).unwrap()[p];
                    let fd = expected_payoff(game, &down).unwrap()[p];
                    (fu - fd) / (2.0 * h)
                })
                .collect()
        })
        .collect()
}

fn max_abs(v: &[Vec<f64>]) -> f64 {
    v.iter().flatten().fold(0.0, |m, x| m.max(x.abs()))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(10))]

    #[test]
    fn gradient_matches_finite_differences(game in two_player_game(), seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..100 {
            let logits = random_logits(&game, &mut rng);
            let exact = exact_gradient(&game, &logits).unwrap();
            let fd = finite_difference(&game, &logits, 1e-5);
            let diff: Vec<Vec<f64>> = exact
                .iter()
                .zip(&fd)
                .map(|(a, b)| a.iter().zip(b).map(|(x, y)| x - y).collect())
                .collect();
            let scale = max_abs(&exact).max(max_abs(&fd));
            prop_assert!(scale > 0.0);
            let rel = max_abs(&diff) / scale;
            prop_assert!(rel < 1e-6, "relative error {rel}");
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn flow_ignores_per_player_shifts(
        game in two_player_game(),
        seed in any::<u64>(),
        shifts in vec(-4i32..=4, 2),
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let logits = random_logits(&game, &mut rng);
        let z0: Vec<f64> = logits.iter().flatten().copied().collect();
        let shifted: Vec<f64> = logits
            .iter()
            .zip(&shifts)
            .flat_map(|(l, &c)| l.iter().map(move |x| x + c as f64))
            .collect();
        let cfg = FlowConfig { max_steps: 20_000, ..FlowConfig::default() };
        let a = integrate(&game, &z0, &cfg).unwrap();
        let b = integrate(&game, &shifted, &cfg).unwrap();
        prop_assert_eq!(&a.terminal, &b.terminal);
        for (p, q) in a.policies.iter().flatten().zip(b.policies.iter().flatten()) {
            prop_assert!((p - q).abs() <= 1e-9);
        }
        if let Terminal::Pne(joint) = &a.terminal {
            prop_assert!(enumerate_pne(&game).contains(joint));
        }
    }
}

proptest! {
    #[test]
    fn softmax_is_a_shift_invariant_distribution(x in vec(-50.0f64..50.0, 1..8), c in -100.0f64..100.0) {
        let p = softmax(&x).unwrap();
        let shifted: Vec<f64> = x.iter().map(|v| v + c).collect();
        let q = softmax(&shifted).unwrap();
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        for (a, b) in p.iter().zip(&q) {
            prop_assert!((a - b).abs() <= 1e-12);
        }
    }

    #[test]
    fn epsilon_decays_monotonically(start in 0.05f64..1.0, ratio in 0.01f64..1.0, decay in 1u64..50_000, t in 0u64..100_000) {
        let s = EpsilonSchedule { start, end: start * ratio, decay_steps: decay };
        prop_assert_eq!(s.epsilon_at(0), start);
        prop_assert!(s.epsilon_at(t + 1) <= s.epsilon_at(t));
        prop_assert_eq!(s.epsilon_at(decay + t), s.end);
    }

    #[test]
    fn buffer_keeps_the_newest(capacity in 1usize..64, pushes in 0usize..200) {
        let mut buf = ReplayBuffer::new(capacity);
        for i in 0..pushes {
            buf.push(Transition { obs: i as u32, action: 0, reward: 0.0, next_obs: 0, done: true });
            prop_assert!(buf.len() <= capacity);
        }
        let kept: Vec<u32> = buf.iter().map(|t| t.obs).collect();
        let first = pushes.saturating_sub(capacity) as u32;
        prop_assert_eq!(kept, (first..pushes as u32).collect::<Vec<_>>());
    }

    #[test]
    fn wilson_interval_brackets_the_rate(n in 1usize..2_000, frac in 0.0f64..=1.0) {
        let k = ((n as f64) * frac).round() as usize;
        let (lo, hi) = wilson_interval(k, n, Z_95);
        let p = k as f64 / n as f64;
        prop_assert!((0.0..=1.0).contains(&lo) && (0.0..=1.0).contains(&hi));
        prop_assert!(lo <= p + 1e-12 && p <= hi + 1e-12);
    }

    #[test]
    fn run_seeds_are_distinct(study in any::<u64>(), gamma in 0.5f64..20.0) {
        let mut seen = std::collections::HashSet::new();
        for env in ["Stag Hunt (r=-6)", "FC-3", "Repeated Stag Hunt"] {
            for arm in [Arm::Off, Arm::Gift { gamma }] {
                for run in 0..64 {
                    prop_assert!(seen.insert(derive_seed(study, env, arm, run)));
                }
            }
        }
        prop_assert_eq!(
            derive_seed(study, "FC-3", Arm::Off, 5),
            derive_seed(study, "FC-3", Arm::Gift { gamma: 0.0 }, 5)
        );
    }
}
