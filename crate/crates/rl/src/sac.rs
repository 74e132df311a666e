//! Soft actor-critic with twin critics, a tanh-squashed Gaussian policy and a
//! fixed entropy temperature.
//!
//! Critics see the action in the squashed `[-1, 1]` space; the environment sees
//! it rescaled to `[low, high]`. Log-probabilities are taken in the squashed
//! space, which differs from the environment-space density by a constant.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::adam::{Adam, AdamConfig};
use crate::error::{Result, RlError};
use crate::mlp::{EmbeddingSpec, GradBuffer, Mlp, MlpSpec};
use crate::replay::{ReplayBuffer, Transition};

const HALF_LN_2PI: f64 = 0.918_938_533_204_672_8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SacConfig {
    pub gamma: f64,
    pub learning_rate: f64,
    /// Entropy temperature.
    pub alpha: f64,
    /// Target-critic smoothing coefficient.
    pub tau: f64,
    pub batch_size: usize,
    pub replay_capacity: usize,
    pub warmup: usize,
    pub hidden: Vec<usize>,
    pub log_std_min: f64,
    pub log_std_max: f64,
    pub train_every: u64,
}

impl Default for SacConfig {
    fn default() -> Self {
        Self {
            gamma: 0.99,
            learning_rate: 3e-4,
            alpha: 0.2,
            tau: 0.005,
            batch_size: 64,
            replay_capacity: 100_000,
            warmup: 1_000,
            hidden: vec![128, 128, 128],
            log_std_min: -20.0,
            log_std_max: 2.0,
            train_every: 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SacLosses {
    pub critic: f64,
    pub actor: f64,
}

/// One reparameterised policy draw for a single action dimension.
#[derive(Debug, Clone, Copy)]
struct Draw {
    noise: f64,
    sigma: f64,
    /// Pre-squash sample.
    u: f64,
    /// Squashed sample in [-1, 1].
    squashed: f64,
    /// Whether the log-std sat inside its clamp range (gradient passes).
    log_std_free: bool,
}

#[derive(Debug, Clone)]
pub struct SacAgent {
    config: SacConfig,
    state_dim: usize,
    low: Vec<f64>,
    high: Vec<f64>,
    actor: Mlp,
    critics: [Mlp; 2],
    targets: [Mlp; 2],
    actor_opt: Adam,
    critic_opts: [Adam; 2],
    actor_grads: GradBuffer,
    critic_grads: [GradBuffer; 2],
    replay: ReplayBuffer<Transition<Vec<f64>>>,
    rng: ChaCha8Rng,
    train_steps: u64,
    observed: u64,
}

/// ln(1 - tanh(u)^2), stable for large |u|.
fn log1m_tanh2(u: f64) -> f64 {
    let x = -2.0 * u;
    let softplus = if x > 0.0 { x + (-x).exp().ln_1p() } else { x.exp().ln_1p() };
    2.0 * (std::f64::consts::LN_2 - u - softplus)
}

impl SacAgent {
    pub fn new(
        config: SacConfig,
        state_dim: usize,
        embedding: Option<EmbeddingSpec>,
        low: Vec<f64>,
        high: Vec<f64>,
        seed: u64,
    ) -> Result<Self> {
        if low.is_empty() || low.len() != high.len() {
            return Err(RlError::InvalidArgument("action bounds must be non-empty and paired".into()));
        }
        if low.iter().zip(&high).any(|(l, h)| !(l < h)) {
            return Err(RlError::InvalidArgument("every action needs low < high".into()));
        }
        if config.batch_size == 0 || config.train_every == 0 {
            return Err(RlError::InvalidArgument("batch_size and train_every must be positive".into()));
        }
        let adim = low.len();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);

        let mut actor_spec = MlpSpec::new(state_dim, &config.hidden, 2 * adim);
        actor_spec.embedding = embedding.clone();
        let mut critic_spec = MlpSpec::new(state_dim + adim, &config.hidden, 1);
        critic_spec.embedding = embedding;

        let actor = Mlp::new(actor_spec, &mut rng)?;
        let critics = [Mlp::new(critic_spec.clone(), &mut rng)?, Mlp::new(critic_spec, &mut rng)?];
        let targets = critics.clone();
        let adam = AdamConfig {
            learning_rate: config.learning_rate,
            ..AdamConfig::default()
        };
        let actor_opt = Adam::new(adam, actor.num_params());
        let critic_opts = [
            Adam::new(adam, critics[0].num_params()),
            Adam::new(adam, critics[1].num_params()),
        ];
        let actor_grads = GradBuffer::for_net(&actor);
        let critic_grads = [GradBuffer::for_net(&critics[0]), GradBuffer::for_net(&critics[1])];
        let replay = ReplayBuffer::new(config.replay_capacity, rng.gen());
        Ok(Self {
            config,
            state_dim,
            low,
            high,
            actor,
            critics,
            targets,
            actor_opt,
            critic_opts,
            actor_grads,
            critic_grads,
            replay,
            rng,
            train_steps: 0,
            observed: 0,
        })
    }

    pub fn config(&self) -> &SacConfig {
        &self.config
    }

    pub fn action_dim(&self) -> usize {
        self.low.len()
    }

    pub fn bounds(&self) -> (&[f64], &[f64]) {
        (&self.low, &self.high)
    }

    pub fn actor(&self) -> &Mlp {
        &self.actor
    }

    pub fn actor_mut(&mut self) -> &mut Mlp {
        &mut self.actor
    }

    pub fn critic(&self, i: usize) -> &Mlp {
        &self.critics[i]
    }

    pub fn target_critic(&self, i: usize) -> &Mlp {
        &self.targets[i]
    }

    pub fn train_steps(&self) -> u64 {
        self.train_steps
    }

    pub fn replay_len(&self) -> usize {
        self.replay.len()
    }

    fn to_env(&self, squashed: &[f64]) -> Vec<f64> {
        squashed
            .iter()
            .zip(self.low.iter().zip(&self.high))
            .map(|(&t, (&lo, &hi))| (lo + (hi - lo) * 0.5 * (t + 1.0)).clamp(lo, hi))
            .collect()
    }

    fn to_squashed(&self, action: &[f64]) -> Vec<f64> {
        action
            .iter()
            .zip(self.low.iter().zip(&self.high))
            .map(|(&a, (&lo, &hi))| (2.0 * (a - lo) / (hi - lo) - 1.0).clamp(-1.0, 1.0))
            .collect()
    }

    fn clamp_log_std(&self, raw: f64) -> (f64, bool) {
        let c = raw.clamp(self.config.log_std_min, self.config.log_std_max);
        (c, c == raw)
    }

    /// Samples from the policy head output; returns the draws and log-probability.
    fn draw<R: Rng + ?Sized>(&self, head: &[f64], rng: &mut R) -> (Vec<Draw>, f64) {
        let adim = self.action_dim();
        let mut draws = Vec::with_capacity(adim);
        let mut logp = 0.0;
        for i in 0..adim {
            let (log_std, log_std_free) = self.clamp_log_std(head[adim + i]);
            let sigma = log_std.exp();
            let noise: f64 = rng.sample(StandardNormal);
            let u = head[i] + sigma * noise;
            let squashed = u.tanh();
            logp += -0.5 * noise * noise - log_std - HALF_LN_2PI - log1m_tanh2(u);
            draws.push(Draw {
                noise,
                sigma,
                u,
                squashed,
                log_std_free,
            });
        }
        (draws, logp)
    }

    /// Action in `[low, high]`; the deterministic mode returns the squashed mean.
    pub fn act(&mut self, state: &[f64], deterministic: bool) -> Result<Vec<f64>> {
        let head = self.actor.forward(state)?;
        let adim = self.action_dim();
        if deterministic {
            let squashed: Vec<f64> = head[..adim].iter().map(|m| m.tanh()).collect();
            return Ok(self.to_env(&squashed));
        }
        let mut rng = std::mem::replace(&mut self.rng, ChaCha8Rng::seed_from_u64(0));
        let (draws, _) = self.draw(&head, &mut rng);
        self.rng = rng;
        let squashed: Vec<f64> = draws.iter().map(|d| d.squashed).collect();
        Ok(self.to_env(&squashed))
    }

    /// Deterministic action without touching the RNG.
    pub fn act_deterministic(&self, state: &[f64]) -> Result<Vec<f64>> {
        let head = self.actor.forward(state)?;
        let squashed: Vec<f64> = head[..self.action_dim()].iter().map(|m| m.tanh()).collect();
        Ok(self.to_env(&squashed))
    }

    fn critic_input(&self, state: &[f64], squashed: &[f64]) -> Result<Vec<f64>> {
        if state.len() != self.state_dim {
            return Err(RlError::DimensionMismatch {
                what: "sac state",
                expected: self.state_dim,
                got: state.len(),
            });
        }
        let mut x = Vec::with_capacity(state.len() + squashed.len());
        x.extend_from_slice(state);
        x.extend_from_slice(squashed);
        Ok(x)
    }

    pub fn train_step(&mut self, batch: &[&Transition<Vec<f64>>]) -> Result<SacLosses> {
        if batch.is_empty() {
            return Err(RlError::InvalidArgument("empty batch".into()));
        }
        let adim = self.action_dim();
        let scale = 1.0 / batch.len() as f64;
        let alpha = self.config.alpha;
        let mut rng = std::mem::replace(&mut self.rng, ChaCha8Rng::seed_from_u64(0));

        // Soft Bellman targets from the target critics and a fresh policy draw at s'.
        let mut targets = Vec::with_capacity(batch.len());
        for t in batch {
            if t.action.len() != adim {
                self.rng = rng;
                return Err(RlError::DimensionMismatch {
                    what: "sac action",
                    expected: adim,
                    got: t.action.len(),
                });
            }
            let mut y = t.reward;
            if t.continuing {
                let head = self.actor.forward(&t.next_state)?;
                let (draws, logp) = self.draw(&head, &mut rng);
                let next_a: Vec<f64> = draws.iter().map(|d| d.squashed).collect();
                let x = self.critic_input(&t.next_state, &next_a)?;
                let q1 = self.targets[0].forward(&x)?[0];
                let q2 = self.targets[1].forward(&x)?[0];
                y += self.config.gamma * (q1.min(q2) - alpha * logp);
            }
            targets.push(y);
        }

        let mut critic_loss = 0.0;
        for k in 0..2 {
            self.critic_grads[k].clear();
            for (t, &y) in batch.iter().zip(&targets) {
                let x = self.critic_input(&t.state, &self.to_squashed(&t.action))?;
                let trace = self.critics[k].forward_trace(&x)?;
                let diff = trace.output()[0] - y;
                critic_loss += 0.5 * diff * diff * scale;
                self.critic_grads[k].note(&trace);
                self.critics[k].backward(&trace, &[2.0 * diff * scale], Some(self.critic_grads[k].values_mut()))?;
            }
            self.critic_grads[k].apply(&mut self.critic_opts[k], self.critics[k].params_mut())?;
        }

        // Actor: minimise alpha * log pi(a|s) - min_k Q_k(s, a) through the reparameterisation.
        self.actor_grads.clear();
        let mut actor_loss = 0.0;
        let mut head_grad = vec![0.0; 2 * adim];
        for t in batch {
            let trace = self.actor.forward_trace(&t.state)?;
            let (draws, logp) = self.draw(trace.output(), &mut rng);
            let a: Vec<f64> = draws.iter().map(|d| d.squashed).collect();
            let x = self.critic_input(&t.state, &a)?;
            let tr1 = self.critics[0].forward_trace(&x)?;
            let tr2 = self.critics[1].forward_trace(&x)?;
            let (q, k, tr) = if tr1.output()[0] <= tr2.output()[0] {
                (tr1.output()[0], 0, &tr1)
            } else {
                (tr2.output()[0], 1, &tr2)
            };
            let dq_dx = self.critics[k].backward(tr, &[1.0], None)?;
            actor_loss += (alpha * logp - q) * scale;
            for (i, d) in draws.iter().enumerate() {
                let dq_da = dq_dx[self.state_dim + i];
                let da_du = 1.0 - d.squashed * d.squashed;
                let tanh_u = d.u.tanh();
                head_grad[i] = scale * (alpha * 2.0 * tanh_u - dq_da * da_du);
                head_grad[adim + i] = if d.log_std_free {
                    scale
                        * (alpha * (-1.0 + 2.0 * tanh_u * d.sigma * d.noise)
                            - dq_da * da_du * d.sigma * d.noise)
                } else {
                    0.0
                };
            }
            self.actor_grads.note(&trace);
            self.actor.backward(&trace, &head_grad, Some(self.actor_grads.values_mut()))?;
        }
        self.actor_grads.apply(&mut self.actor_opt, self.actor.params_mut())?;

        for k in 0..2 {
            self.targets[k].soft_update_from(&self.critics[k], self.config.tau);
        }
        self.rng = rng;
        self.train_steps += 1;
        Ok(SacLosses {
            critic: critic_loss,
            actor: actor_loss,
        })
    }

    /// Stores a transition and trains every `train_every` transitions once warm.
    pub fn observe(&mut self, transition: Transition<Vec<f64>>) -> Result<Option<SacLosses>> {
        self.remember(transition)?;
        if self.observed % self.config.train_every != 0 {
            return Ok(None);
        }
        self.train()
    }

    /// Stores a transition without training, for callers that pace training themselves.
    pub fn remember(&mut self, transition: Transition<Vec<f64>>) -> Result<()> {
        if transition.action.len() != self.action_dim() {
            return Err(RlError::DimensionMismatch {
                what: "sac action",
                expected: self.action_dim(),
                got: transition.action.len(),
            });
        }
        self.replay.push(transition);
        self.observed += 1;
        Ok(())
    }

    /// One gradient step on a replay sample, once the buffer is warm.
    pub fn train(&mut self) -> Result<Option<SacLosses>> {
        if self.replay.len() < self.config.warmup.max(self.config.batch_size) {
            return Ok(None);
        }
        let batch: Vec<Transition<Vec<f64>>> = self
            .replay
            .sample(self.config.batch_size)?
            .into_iter()
            .cloned()
            .collect();
        let refs: Vec<&Transition<Vec<f64>>> = batch.iter().collect();
        self.train_step(&refs).map(Some)
    }
}
