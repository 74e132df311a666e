//! End-to-end learning checks for DQN and SAC on problems with known optima.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rlcache_rl::toy::{train_dqn_on_mdp, train_sac_on_bandit, QuadraticBandit, TwoStateMdp};
use rlcache_rl::{DqnAgent, DqnConfig, EpsilonSchedule, SacAgent, SacConfig, Transition};

/// Value iteration on the deterministic two-state MDP; returns the greedy policy.
fn value_iteration(mdp: &TwoStateMdp, gamma: f64) -> [usize; 2] {
    let mut v = [0.0f64; 2];
    for _ in 0..10_000 {
        let mut next = [0.0; 2];
        for s in 0..2 {
            next[s] = (0..2)
                .map(|a| mdp.rewards[s][a] + gamma * v[a])
                .fold(f64::NEG_INFINITY, f64::max);
        }
        v = next;
    }
    let mut policy = [0; 2];
    for s in 0..2 {
        let q: Vec<f64> = (0..2).map(|a| mdp.rewards[s][a] + gamma * v[a]).collect();
        policy[s] = if q[1] > q[0] { 1 } else { 0 };
    }
    policy
}

pub fn toy_dqn_config() -> DqnConfig {
    DqnConfig {
        gamma: 0.9,
        learning_rate: 1e-3,
        warmup: 200,
        target_sync: 100,
        epsilon: EpsilonSchedule {
            start: 1.0,
            floor: 0.1,
            decay_steps: 2_000,
        },
        ..DqnConfig::default()
    }
}

#[test]
fn dqn_matches_value_iteration_on_two_state_mdp() {
    let mdp = TwoStateMdp::default();
    let optimum = value_iteration(&mdp, 0.9);
    // The myopic action in state 0 differs from the optimum.
    assert_eq!(optimum, [1, 1]);
    for seed in [1, 2, 3] {
        let policy = train_dqn_on_mdp(&mdp, toy_dqn_config(), 5_000, seed).unwrap();
        assert_eq!(policy, optimum, "seed {seed}");
    }
}

#[test]
fn sac_finds_bandit_optimum() {
    let bandit = QuadraticBandit { target: 0.7 };
    let config = SacConfig {
        gamma: 0.0,
        warmup: 256,
        ..SacConfig::default()
    };
    let mut actions: Vec<f64> = [1, 2, 3]
        .iter()
        .map(|&s| train_sac_on_bandit(&bandit, config.clone(), 3_000, s).unwrap())
        .collect();
    actions.sort_by(f64::total_cmp);
    assert!((actions[1] - 0.7).abs() <= 0.1, "{actions:?}");
}

#[test]
fn sac_critic_loss_falls_on_zero_reward() {
    let config = SacConfig {
        gamma: 0.0,
        hidden: vec![32, 32],
        batch_size: 32,
        warmup: 32,
        ..SacConfig::default()
    };
    let mut agent = SacAgent::new(config, 2, None, vec![0.0], vec![1.0], 9).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let batch: Vec<Transition<Vec<f64>>> = (0..32)
        .map(|_| {
            let s = vec![rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
            Transition {
                state: s.clone(),
                action: vec![rng.gen_range(0.0..1.0)],
                reward: 0.0,
                next_state: s,
                continuing: false,
            }
        })
        .collect();
    let refs: Vec<_> = batch.iter().collect();
    let losses: Vec<f64> = (0..500).map(|_| agent.train_step(&refs).unwrap().critic).collect();
    let early: f64 = losses[..50].iter().sum::<f64>() / 50.0;
    let late: f64 = losses[450..].iter().sum::<f64>() / 50.0;
    assert!(late < early, "critic loss did not fall: {early} -> {late}");
}

#[test]
fn sac_bounds_hold_over_100k_states() {
    let config = SacConfig {
        hidden: vec![32, 32],
        ..SacConfig::default()
    };
    let mut agent = SacAgent::new(config, 4, None, vec![0.0, 0.0], vec![1.0, 120.0], 3).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..100_000 {
        let s: Vec<f64> = (0..4).map(|_| rng.gen_range(-50.0..50.0)).collect();
        let a = agent.act(&s, false).unwrap();
        assert!((0.0..=1.0).contains(&a[0]) && (0.0..=120.0).contains(&a[1]));
    }
}

#[test]
fn identical_seeds_give_bit_identical_training() {
    let run = || {
        let config = DqnConfig {
            warmup: 32,
            hidden: vec![16],
            ..DqnConfig::default()
        };
        let mut agent = DqnAgent::new(config, 3, None, 2, 42).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(43);
        for _ in 0..300 {
            let s: Vec<f64> = (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let a = agent.act(&s).unwrap();
            agent
                .observe(Transition {
                    state: s.clone(),
                    action: a,
                    reward: rng.gen_range(-1.0..1.0),
                    next_state: s,
                    continuing: true,
                })
                .unwrap();
        }
        agent.online().params().iter().map(|p| p.to_bits()).collect::<Vec<_>>()
    };
    assert_eq!(run(), run());
}
