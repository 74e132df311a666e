//! Tiny environments for sanity-checking the agents end to end.

use crate::dqn::{DqnAgent, DqnConfig};
use crate::error::Result;
use crate::replay::Transition;
use crate::sac::{SacAgent, SacConfig};

/// Deterministic two-state, two-action MDP. Action `a` moves the system to
/// state `a`. Staying in state 0 pays a small reward, moving is free, and
/// staying in state 1 pays 1, so the myopic choice in state 0 is wrong.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoStateMdp {
    /// `rewards[s][a]`.
    pub rewards: [[f64; 2]; 2],
}

impl Default for TwoStateMdp {
    fn default() -> Self {
        Self {
            rewards: [[0.1, 0.0], [0.0, 1.0]],
        }
    }
}

impl TwoStateMdp {
    pub fn step(&self, state: usize, action: usize) -> (usize, f64) {
        (action, self.rewards[state][action])
    }

    pub fn encode(state: usize) -> Vec<f64> {
        let mut v = vec![0.0; 2];
        v[state] = 1.0;
        v
    }
}

/// Runs epsilon-greedy interaction until `train_steps` gradient steps have
/// been taken, then returns the greedy action per state.
pub fn train_dqn_on_mdp(mdp: &TwoStateMdp, config: DqnConfig, train_steps: u64, seed: u64) -> Result<[usize; 2]> {
    let mut agent = DqnAgent::new(config, 2, None, 2, seed)?;
    let mut state = 0;
    while agent.train_steps() < train_steps {
        let s = TwoStateMdp::encode(state);
        let action = agent.act(&s)?;
        let (next, reward) = mdp.step(state, action);
        agent.observe(Transition {
            state: s,
            action,
            reward,
            next_state: TwoStateMdp::encode(next),
            continuing: true,
        })?;
        state = next;
    }
    Ok([
        agent.greedy(&TwoStateMdp::encode(0))?,
        agent.greedy(&TwoStateMdp::encode(1))?,
    ])
}

/// One-step continuous bandit with reward `-(a - target)^2`, actions in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadraticBandit {
    pub target: f64,
}

impl QuadraticBandit {
    pub fn reward(&self, action: f64) -> f64 {
        -(action - self.target).powi(2)
    }
}

/// Trains SAC on the bandit for `train_steps` gradient steps and returns the
/// final deterministic action.
pub fn train_sac_on_bandit(bandit: &QuadraticBandit, config: SacConfig, train_steps: u64, seed: u64) -> Result<f64> {
    let mut agent = SacAgent::new(config, 1, None, vec![0.0], vec![1.0], seed)?;
    let state = vec![1.0];
    while agent.train_steps() < train_steps {
        let a = agent.act(&state, false)?;
        let reward = bandit.reward(a[0]);
        agent.observe(Transition {
            state: state.clone(),
            action: a,
            reward,
            next_state: state.clone(),
            continuing: false,
        })?;
    }
    Ok(agent.act_deterministic(&state)?[0])
}
