//! Deep Q-network with a periodically synchronised target network.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::adam::{Adam, AdamConfig};
use crate::epsilon::EpsilonSchedule;
use crate::error::{Result, RlError};
use crate::mlp::{EmbeddingSpec, GradBuffer, Mlp, MlpSpec};
use crate::replay::{ReplayBuffer, Transition};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DqnConfig {
    pub gamma: f64,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub replay_capacity: usize,
    /// Stored transitions required before the first train step.
    pub warmup: usize,
    /// Train steps between target-network copies.
    pub target_sync: u64,
    pub hidden: Vec<usize>,
    pub epsilon: EpsilonSchedule,
    /// Observed transitions per train step.
    pub train_every: u64,
}

impl Default for DqnConfig {
    fn default() -> Self {
        Self {
            gamma: 0.99,
            learning_rate: 3e-4,
            batch_size: 32,
            replay_capacity: 50_000,
            warmup: 1_000,
            target_sync: 500,
            hidden: vec![64, 64],
            epsilon: EpsilonSchedule::evaluation(),
            train_every: 1,
        }
    }
}

#[derive(Debug, Clone)]
pub struct DqnAgent {
    config: DqnConfig,
    n_actions: usize,
    online: Mlp,
    target: Mlp,
    opt: Adam,
    replay: ReplayBuffer<Transition<usize>>,
    rng: ChaCha8Rng,
    grads: GradBuffer,
    act_steps: u64,
    train_steps: u64,
    observed: u64,
}

/// Index of the largest value; the lowest index wins ties.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

impl DqnAgent {
    pub fn new(
        config: DqnConfig,
        input_dim: usize,
        embedding: Option<EmbeddingSpec>,
        n_actions: usize,
        seed: u64,
    ) -> Result<Self> {
        if n_actions == 0 {
            return Err(RlError::InvalidArgument("need at least one action".into()));
        }
        if config.batch_size == 0 || config.target_sync == 0 || config.train_every == 0 {
            return Err(RlError::InvalidArgument(
                "batch_size, target_sync and train_every must be positive".into(),
            ));
        }
        let mut spec = MlpSpec::new(input_dim, &config.hidden, n_actions);
        spec.embedding = embedding;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let online = Mlp::new(spec, &mut rng)?;
        let target = online.clone();
        let opt = Adam::new(
            AdamConfig {
                learning_rate: config.learning_rate,
                ..AdamConfig::default()
            },
            online.num_params(),
        );
        let replay = ReplayBuffer::new(config.replay_capacity, rng.gen());
        let grads = GradBuffer::for_net(&online);
        Ok(Self {
            config,
            n_actions,
            online,
            target,
            opt,
            replay,
            rng,
            grads,
            act_steps: 0,
            train_steps: 0,
            observed: 0,
        })
    }

    pub fn config(&self) -> &DqnConfig {
        &self.config
    }

    pub fn online(&self) -> &Mlp {
        &self.online
    }

    pub fn online_mut(&mut self) -> &mut Mlp {
        &mut self.online
    }

    pub fn target(&self) -> &Mlp {
        &self.target
    }

    pub fn replay_len(&self) -> usize {
        self.replay.len()
    }

    pub fn act_steps(&self) -> u64 {
        self.act_steps
    }

    pub fn train_steps(&self) -> u64 {
        self.train_steps
    }

    /// Exploration rate the next [`act`](Self::act) call will use.
    pub fn epsilon(&self) -> f64 {
        self.config.epsilon.value(self.act_steps)
    }

    pub fn q_values(&self, state: &[f64]) -> Result<Vec<f64>> {
        self.online.forward(state)
    }

    pub fn greedy(&self, state: &[f64]) -> Result<usize> {
        Ok(argmax(&self.q_values(state)?))
    }

    /// Epsilon-greedy choice with an explicit rate and RNG.
    pub fn act_with<R: Rng + ?Sized>(&self, state: &[f64], epsilon: f64, rng: &mut R) -> Result<usize> {
        let greedy = self.greedy(state)?;
        if epsilon > 0.0 && rng.gen::<f64>() < epsilon {
            Ok(rng.gen_range(0..self.n_actions))
        } else {
            Ok(greedy)
        }
    }

    /// Epsilon-greedy on the agent's own schedule and RNG; advances the step counter.
    pub fn act(&mut self, state: &[f64]) -> Result<usize> {
        let eps = self.epsilon();
        let mut rng = std::mem::replace(&mut self.rng, ChaCha8Rng::seed_from_u64(0));
        let action = self.act_with(state, eps, &mut rng);
        self.rng = rng;
        self.act_steps += 1;
        action
    }

    /// Squared TD error against `r + gamma * max_a Q_target(s', a)`; one Adam step.
    pub fn train_step(&mut self, batch: &[&Transition<usize>]) -> Result<f64> {
        if batch.is_empty() {
            return Err(RlError::InvalidArgument("empty batch".into()));
        }
        let scale = 1.0 / batch.len() as f64;
        self.grads.clear();
        let mut loss = 0.0;
        let mut out_grad = vec![0.0; self.n_actions];
        for t in batch {
            if t.action >= self.n_actions {
                return Err(RlError::InvalidArgument(format!("action {} out of range", t.action)));
            }
            let trace = self.online.forward_trace(&t.state)?;
            let q = trace.output()[t.action];
            let mut y = t.reward;
            if t.continuing {
                let next = self.target.forward(&t.next_state)?;
                y += self.config.gamma * next.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            }
            let diff = q - y;
            loss += diff * diff;
            out_grad.iter_mut().for_each(|g| *g = 0.0);
            out_grad[t.action] = 2.0 * diff * scale;
            self.grads.note(&trace);
            self.online.backward(&trace, &out_grad, Some(self.grads.values_mut()))?;
        }
        self.grads.apply(&mut self.opt, self.online.params_mut())?;
        self.train_steps += 1;
        if self.train_steps % self.config.target_sync == 0 {
            self.target.copy_from(&self.online);
        }
        Ok(loss * scale)
    }

    /// Stores a transition and trains once the warm-up threshold is met.
    pub fn observe(&mut self, transition: Transition<usize>) -> Result<Option<f64>> {
        self.replay.push(transition);
        self.observed += 1;
        let ready = self.replay.len() >= self.config.warmup.max(self.config.batch_size);
        if !ready || self.observed % self.config.train_every != 0 {
            return Ok(None);
        }
        let batch: Vec<Transition<usize>> = self
            .replay
            .sample(self.config.batch_size)?
            .into_iter()
            .cloned()
            .collect();
        let refs: Vec<&Transition<usize>> = batch.iter().collect();
        self.train_step(&refs).map(Some)
    }
}
