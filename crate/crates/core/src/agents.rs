//! DDPG and SAC learners: replay buffer, action selection, critic / actor /
//! temperature updates, target-network maintenance, and the interaction
//! loop. Both agents act in the raw `[-1, 1]` action box; feasibility
//! projection happens inside the environment, which keeps the learner's
//! action space smooth.

use rand::RngCore;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::env::Env;
use crate::nn::{polyak_update, AdamState, Mlp, OutputActivation, PolicySample, SquashedGaussian};
use crate::rng::{mix, normal, uniform_pm1, Stream};
use crate::topology::{RisAssociation, Scenario};

#[derive(Debug, Error)]
pub enum AgentError {
    #[error("replay buffer holds {have} transitions, need {need}")]
    InsufficientBuffer { have: usize, need: usize },
    #[error("malformed checkpoint: {0}")]
    MalformedCheckpoint(String),
}

/// One stored interaction. The action is the squashed raw action (before
/// projection), so the critics see the same smooth space the actor emits.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub state: Vec<f64>,
    pub action: Vec<f64>,
    pub reward: f64,
    pub next_state: Vec<f64>,
    pub done: bool,
}

/// Fixed-capacity ring buffer with a uniform mini-batch sampler.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    data: Vec<Transition>,
    capacity: usize,
    cursor: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0);
        Self { data: Vec::new(), capacity, cursor: 0 }
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    /// Insertion cursor (next slot to overwrite once full).
    pub fn cursor(&self) -> usize {
        self.cursor
    }

    pub fn push(&mut self, t: Transition) {
        if self.data.len() < self.capacity {
            self.data.push(t);
        } else {
            self.data[self.cursor] = t;
        }
        self.cursor = (self.cursor + 1) % self.capacity;
    }

    pub fn get(&self, idx: usize) -> &Transition {
        &self.data[idx]
    }

    /// Uniform sample (with replacement) of `batch` indices.
    pub fn sample_indices(&self, rng: &mut ChaCha8Rng, batch: usize) -> Result<Vec<usize>, AgentError> {
        if self.data.len() < batch {
            return Err(AgentError::InsufficientBuffer { have: self.data.len(), need: batch });
        }
        Ok((0..batch)
            .map(|_| (rng.next_u64() % self.data.len() as u64) as usize)
            .collect())
    }
}

/// Running estimate of the reward magnitude used to normalize critic
/// targets. Raw rewards stay in the buffer and in the metrics.
#[derive(Debug, Clone)]
pub struct RewardScale {
    sum_abs: f64,
    count: u64,
    enabled: bool,
}

impl RewardScale {
    pub fn new(enabled: bool, _gamma: f64) -> Self {
        Self { sum_abs: 0.0, count: 0, enabled }
    }

    pub fn observe(&mut self, reward: f64) {
        self.sum_abs += reward.abs();
        self.count += 1;
    }

    pub fn scale(&self) -> f64 {
        if !self.enabled || self.count == 0 {
            1.0
        } else {
            (self.sum_abs / self.count as f64).max(1e-6)
        }
    }
}

fn gather_batch(
    buffer: &ReplayBuffer,
    indices: &[usize],
    state_dim: usize,
    action_dim: usize,
) -> (Vec<f64>, Vec<f64>, Vec<f64>, Vec<f64>) {
    let b = indices.len();
    let mut states = Vec::with_capacity(b * state_dim);
    let mut actions = Vec::with_capacity(b * action_dim);
    let mut rewards = Vec::with_capacity(b);
    let mut next_states = Vec::with_capacity(b * state_dim);
    for &i in indices {
        let t = buffer.get(i);
        states.extend_from_slice(&t.state);
        actions.extend_from_slice(&t.action);
        rewards.push(t.reward);
        next_states.extend_from_slice(&t.next_state);
    }
    (states, actions, rewards, next_states)
}

fn concat_state_action(states: &[f64], actions: &[f64], s_dim: usize, a_dim: usize, batch: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(batch * (s_dim + a_dim));
    for i in 0..batch {
        out.extend_from_slice(&states[i * s_dim..(i + 1) * s_dim]);
        out.extend_from_slice(&actions[i * a_dim..(i + 1) * a_dim]);
    }
    out
}

/// Deterministic-policy learner with one critic and additive Gaussian
/// exploration noise.
pub struct DdpgAgent {
    pub actor: Mlp,
    pub critic: Mlp,
    pub target_actor: Mlp,
    pub target_critic: Mlp,
    pub opt_actor: AdamState,
    pub opt_critic: AdamState,
    pub gamma: f64,
    pub tau: f64,
    /// Current exploration noise scale; the training loop anneals it.
    pub expl_sigma: f64,
    pub reward_scale: RewardScale,
    state_dim: usize,
    action_dim: usize,
    noise_rng: ChaCha8Rng,
    sample_rng: ChaCha8Rng,
}

impl DdpgAgent {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        state_dim: usize,
        action_dim: usize,
        hidden: usize,
        lr_actor: f64,
        lr_critic: f64,
        gamma: f64,
        tau: f64,
        reward_norm: bool,
        seed: u64,
    ) -> Self {
        let mut init_rng = ChaCha8Rng::seed_from_u64(mix(seed, Stream::AgentInit as u64, 0));
        let actor = Mlp::new(&[state_dim, hidden, hidden, action_dim], OutputActivation::Tanh, &mut init_rng);
        let critic =
            Mlp::new(&[state_dim + action_dim, hidden, hidden, 1], OutputActivation::Linear, &mut init_rng);
        // Targets start as exact copies of the online networks.
        let target_actor = actor.clone();
        let target_critic = critic.clone();
        let opt_actor = AdamState::new(actor.num_params(), lr_actor);
        let opt_critic = AdamState::new(critic.num_params(), lr_critic);
        Self {
            actor,
            critic,
            target_actor,
            target_critic,
            opt_actor,
            opt_critic,
            gamma,
            tau,
            expl_sigma: 0.0,
            reward_scale: RewardScale::new(reward_norm, gamma),
            state_dim,
            action_dim,
            noise_rng: ChaCha8Rng::seed_from_u64(mix(seed, Stream::Exploration as u64, 0)),
            sample_rng: ChaCha8Rng::seed_from_u64(mix(seed, Stream::ReplaySample as u64, 0)),
        }
    }

    /// Raw action from the deterministic policy, with clipped Gaussian noise
    /// added when exploring.
    pub fn select(&mut self, state: &[f64], explore: bool) -> Vec<f64> {
        let mut action = self.actor.forward(state).expect("state dim");
        if explore && self.expl_sigma > 0.0 {
            for a in action.iter_mut() {
                *a = (*a + self.expl_sigma * normal(&mut self.noise_rng)).clamp(-1.0, 1.0);
            }
        }
        action
    }

    /// One critic step against the target `r + gamma Q'(s', pi'(s'))`, one
    /// actor step against `-Q(s, pi(s))`, then Polyak target updates.
    pub fn update(&mut self, buffer: &ReplayBuffer, batch: usize) -> Result<(f64, f64), AgentError> {
        let indices = buffer.sample_indices(&mut self.sample_rng, batch)?;
        let (s, a, r, s2) = gather_batch(buffer, &indices, self.state_dim, self.action_dim);
        let scale = self.reward_scale.scale();
        let b = batch;

        // Critic target.
        let a2 = self.target_actor.forward_batch(&s2, b);
        let sa2 = concat_state_action(&s2, a2.output(), self.state_dim, self.action_dim, b);
        let q2 = self.target_critic.forward_batch(&sa2, b);
        let y: Vec<f64> =
            (0..b).map(|i| r[i] / scale + self.gamma * q2.output()[i]).collect();

        // Critic regression.
        let sa = concat_state_action(&s, &a, self.state_dim, self.action_dim, b);
        let q_cache = self.critic.forward_batch(&sa, b);
        let mut critic_loss = 0.0;
        let d_q: Vec<f64> = (0..b)
            .map(|i| {
                let diff = q_cache.output()[i] - y[i];
                critic_loss += diff * diff;
                2.0 * diff / b as f64
            })
            .collect();
        critic_loss /= b as f64;
        let (critic_grads, _) = self.critic.backward_batch(&sa, &q_cache, &d_q);
        self.opt_critic.step(self.critic.params_mut(), &critic_grads);

        // Actor ascent on the (updated) critic.
        let a_pi = self.actor.forward_batch(&s, b);
        let sa_pi = concat_state_action(&s, a_pi.output(), self.state_dim, self.action_dim, b);
        let q_pi = self.critic.forward_batch(&sa_pi, b);
        let actor_loss = -q_pi.output().iter().sum::<f64>() / b as f64;
        let d_q_pi: Vec<f64> = vec![-1.0 / b as f64; b];
        let d_sa = self.critic.backward_input(&sa_pi, &q_pi, &d_q_pi);
        let mut d_action = vec![0.0; b * self.action_dim];
        for i in 0..b {
            let src = &d_sa[i * (self.state_dim + self.action_dim) + self.state_dim
                ..(i + 1) * (self.state_dim + self.action_dim)];
            d_action[i * self.action_dim..(i + 1) * self.action_dim].copy_from_slice(src);
        }
        let (actor_grads, _) = self.actor.backward_batch(&s, &a_pi, &d_action);
        self.opt_actor.step(self.actor.params_mut(), &actor_grads);

        polyak_update(self.target_actor.params_mut(), self.actor.params(), self.tau);
        polyak_update(self.target_critic.params_mut(), self.critic.params(), self.tau);

        Ok((critic_loss, actor_loss))
    }
}

/// Losses reported by one SAC update round.
#[derive(Debug, Clone, Copy, Default)]
pub struct SacLosses {
    pub q1_loss: f64,
    pub q2_loss: f64,
    /// Present only on rounds where the actor updated.
    pub policy_loss: Option<f64>,
    pub alpha_loss: Option<f64>,
    pub alpha: f64,
}

/// Stochastic-policy learner with twin critics, soft targets, and adaptive
/// entropy temperature.
pub struct SacAgent {
    pub actor: Mlp,
    pub q1: Mlp,
    pub q2: Mlp,
    pub target_q1: Mlp,
    pub target_q2: Mlp,
    pub opt_actor: AdamState,
    pub opt_q1: AdamState,
    pub opt_q2: AdamState,
    pub log_alpha: f64,
    pub opt_alpha: AdamState,
    pub target_entropy: f64,
    pub gamma: f64,
    pub tau: f64,
    pub policy_delay: usize,
    pub reward_scale: RewardScale,
    head: SquashedGaussian,
    update_counter: u64,
    state_dim: usize,
    action_dim: usize,
    noise_rng: ChaCha8Rng,
    sample_rng: ChaCha8Rng,
}

impl SacAgent {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        state_dim: usize,
        action_dim: usize,
        hidden: usize,
        lr_actor: f64,
        lr_critic: f64,
        lr_alpha: f64,
        alpha_init: f64,
        gamma: f64,
        tau: f64,
        policy_delay: usize,
        reward_norm: bool,
        seed: u64,
    ) -> Self {
        let mut init_rng = ChaCha8Rng::seed_from_u64(mix(seed, Stream::AgentInit as u64, 1));
        let head = SquashedGaussian { action_dim };
        let actor =
            Mlp::new(&[state_dim, hidden, hidden, head.head_dim()], OutputActivation::Linear, &mut init_rng);
        let q1 = Mlp::new(&[state_dim + action_dim, hidden, hidden, 1], OutputActivation::Linear, &mut init_rng);
        let q2 = Mlp::new(&[state_dim + action_dim, hidden, hidden, 1], OutputActivation::Linear, &mut init_rng);
        let target_q1 = q1.clone();
        let target_q2 = q2.clone();
        let opt_actor = AdamState::new(actor.num_params(), lr_actor);
        let opt_q1 = AdamState::new(q1.num_params(), lr_critic);
        let opt_q2 = AdamState::new(q2.num_params(), lr_critic);
        Self {
            actor,
            q1,
            q2,
            target_q1,
            target_q2,
            opt_actor,
            opt_q1,
            opt_q2,
            log_alpha: alpha_init.max(1e-12).ln(),
            opt_alpha: AdamState::new(1, lr_alpha),
            target_entropy: -(action_dim as f64),
            gamma,
            tau,
            policy_delay,
            reward_scale: RewardScale::new(reward_norm, gamma),
            head,
            update_counter: 0,
            state_dim,
            action_dim,
            noise_rng: ChaCha8Rng::seed_from_u64(mix(seed, Stream::Exploration as u64, 1)),
            sample_rng: ChaCha8Rng::seed_from_u64(mix(seed, Stream::ReplaySample as u64, 1)),
        }
    }

    pub fn alpha(&self) -> f64 {
        self.log_alpha.exp()
    }

    fn draw_eps(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
        (0..n).map(|_| normal(rng)).collect()
    }

    /// Samples a raw action; deterministic mode returns the squashed mean.
    /// Returns the action together with its log-probability.
    pub fn select(&mut self, state: &[f64], deterministic: bool) -> (Vec<f64>, f64) {
        let out = self.actor.forward(state).expect("state dim");
        let eps = if deterministic {
            vec![0.0; self.action_dim]
        } else {
            Self::draw_eps(&mut self.noise_rng, self.action_dim)
        };
        let sample = self.head.sample(&out, &eps);
        if deterministic {
            (self.head.mean_action(&out), sample.log_prob)
        } else {
            (sample.action.clone(), sample.log_prob)
        }
    }

    fn sample_batch(&self, cache_out: &[f64], eps: &[f64], batch: usize) -> Vec<PolicySample> {
        (0..batch)
            .map(|i| {
                let out = &cache_out[i * self.head.head_dim()..(i + 1) * self.head.head_dim()];
                let e = &eps[i * self.action_dim..(i + 1) * self.action_dim];
                self.head.sample(out, e)
            })
            .collect()
    }

    /// One update round: twin-critic regression to the entropy-regularized
    /// soft target, an actor + temperature step every `policy_delay` rounds,
    /// then Polyak target updates.
    pub fn update(&mut self, buffer: &ReplayBuffer, batch: usize) -> Result<SacLosses, AgentError> {
        let indices = buffer.sample_indices(&mut self.sample_rng, batch)?;
        let (s, a, r, s2) = gather_batch(buffer, &indices, self.state_dim, self.action_dim);
        let scale = self.reward_scale.scale();
        let alpha = self.alpha();
        let b = batch;

        // Soft target y = r + gamma (min_i Q_i'(s', a') - alpha log pi(a'|s')).
        let out2 = self.actor.forward_batch(&s2, b);
        let eps2 = Self::draw_eps(&mut self.noise_rng, b * self.action_dim);
        let samples2 = self.sample_batch(out2.output(), &eps2, b);
        let a2: Vec<f64> = samples2.iter().flat_map(|smp| smp.action.iter().copied()).collect();
        let sa2 = concat_state_action(&s2, &a2, self.state_dim, self.action_dim, b);
        let tq1 = self.target_q1.forward_batch(&sa2, b);
        let tq2 = self.target_q2.forward_batch(&sa2, b);
        let y: Vec<f64> = (0..b)
            .map(|i| {
                let qmin = tq1.output()[i].min(tq2.output()[i]);
                r[i] / scale + self.gamma * (qmin - alpha * samples2[i].log_prob)
            })
            .collect();

        // Twin critic regression.
        let sa = concat_state_action(&s, &a, self.state_dim, self.action_dim, b);
        let mut q_losses = [0.0f64; 2];
        for (qi, (critic, opt)) in
            [(&mut self.q1, &mut self.opt_q1), (&mut self.q2, &mut self.opt_q2)]
                .into_iter()
                .enumerate()
        {
            let cache = critic.forward_batch(&sa, b);
            let mut loss = 0.0;
            let d_q: Vec<f64> = (0..b)
                .map(|i| {
                    let diff = cache.output()[i] - y[i];
                    loss += diff * diff;
                    2.0 * diff / b as f64
                })
                .collect();
            q_losses[qi] = loss / b as f64;
            let (grads, _) = critic.backward_batch(&sa, &cache, &d_q);
            opt.step(critic.params_mut(), &grads);
        }

        // Delayed actor and temperature updates.
        self.update_counter += 1;
        let mut policy_loss = None;
        let mut alpha_loss = None;
        if self.update_counter % self.policy_delay as u64 == 0 {
            let out = self.actor.forward_batch(&s, b);
            let eps = Self::draw_eps(&mut self.noise_rng, b * self.action_dim);
            let samples = self.sample_batch(out.output(), &eps, b);
            let a_pi: Vec<f64> = samples.iter().flat_map(|smp| smp.action.iter().copied()).collect();
            let sa_pi = concat_state_action(&s, &a_pi, self.state_dim, self.action_dim, b);
            let c1 = self.q1.forward_batch(&sa_pi, b);
            let c2 = self.q2.forward_batch(&sa_pi, b);

            // Route the action gradient through whichever critic attains the
            // per-sample minimum.
            let mut d1 = vec![0.0; b];
            let mut d2 = vec![0.0; b];
            let mut loss = 0.0;
            for i in 0..b {
                let (v1, v2) = (c1.output()[i], c2.output()[i]);
                loss += alpha * samples[i].log_prob - v1.min(v2);
                if v1 <= v2 {
                    d1[i] = -1.0 / b as f64;
                } else {
                    d2[i] = -1.0 / b as f64;
                }
            }
            policy_loss = Some(loss / b as f64);
            let din1 = self.q1.backward_input(&sa_pi, &c1, &d1);
            let din2 = self.q2.backward_input(&sa_pi, &c2, &d2);
            let sa_dim = self.state_dim + self.action_dim;
            let mut d_head = vec![0.0; b * self.head.head_dim()];
            for i in 0..b {
                let mut d_action = vec![0.0; self.action_dim];
                for d in 0..self.action_dim {
                    d_action[d] = din1[i * sa_dim + self.state_dim + d]
                        + din2[i * sa_dim + self.state_dim + d];
                }
                self.head.backward(
                    &samples[i],
                    &d_action,
                    alpha / b as f64,
                    &mut d_head[i * self.head.head_dim()..(i + 1) * self.head.head_dim()],
                );
            }
            let (actor_grads, _) = self.actor.backward_batch(&s, &out, &d_head);
            self.opt_actor.step(self.actor.params_mut(), &actor_grads);

            // Temperature: L(alpha) = E[-alpha (log pi + H_target)].
            let mean_term: f64 =
                samples.iter().map(|smp| smp.log_prob + self.target_entropy).sum::<f64>() / b as f64;
            alpha_loss = Some(-alpha * mean_term);
            let d_log_alpha = -alpha * mean_term;
            let mut la = [self.log_alpha];
            self.opt_alpha.step(&mut la, &[d_log_alpha]);
            self.log_alpha = la[0];
        }

        polyak_update(self.target_q1.params_mut(), self.q1.params(), self.tau);
        polyak_update(self.target_q2.params_mut(), self.q2.params(), self.tau);

        Ok(SacLosses {
            q1_loss: q_losses[0],
            q2_loss: q_losses[1],
            policy_loss,
            alpha_loss,
            alpha: self.alpha(),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AgentKind {
    Ddpg,
    Sac,
}

impl AgentKind {
    pub fn name(self) -> &'static str {
        match self {
            AgentKind::Ddpg => "ddpg",
            AgentKind::Sac => "sac",
        }
    }
}

/// Training-loop parameters. Defaults follow the published hyperparameter
/// table; DDPG differs only where the table scopes a value to SAC.
#[derive(Debug, Clone)]
pub struct TrainParams {
    pub total_steps: usize,
    pub episode_length: usize,
    pub warmup_steps: usize,
    pub gamma: f64,
    pub tau: f64,
    pub batch_size: usize,
    pub buffer_capacity: usize,
    pub lr_actor: f64,
    pub lr_critic: f64,
    pub lr_alpha: f64,
    /// Initial entropy temperature (tuned adaptively from here).
    pub alpha_init: f64,
    /// Gradient update rounds per environment step.
    pub updates_per_step: usize,
    /// Actor update interval in rounds (SAC only).
    pub policy_delay: usize,
    pub hidden: usize,
    /// DDPG exploration noise, linearly annealed over the first half of
    /// training.
    pub expl_sigma_start: f64,
    pub expl_sigma_end: f64,
    pub reward_norm: bool,
    pub seed: u64,
}

impl TrainParams {
    pub fn defaults(kind: AgentKind) -> Self {
        Self {
            total_steps: 20_000,
            episode_length: 100,
            warmup_steps: 1000,
            gamma: 0.99,
            tau: 5e-3,
            batch_size: 256,
            buffer_capacity: 200_000,
            lr_actor: 1e-4,
            lr_critic: 1e-4,
            lr_alpha: 1e-4,
            alpha_init: 0.1,
            updates_per_step: match kind {
                AgentKind::Ddpg => 1,
                AgentKind::Sac => 2,
            },
            policy_delay: 2,
            hidden: 256,
            expl_sigma_start: 0.3,
            expl_sigma_end: 0.05,
            reward_norm: true,
            seed: 1,
        }
    }
}

/// One metrics record per post-warm-up interaction step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepMetrics {
    pub step: usize,
    pub episode: usize,
    pub reward_raw: f64,
    pub sum_utility: f64,
    pub utility_per_vsp: Vec<f64>,
    pub qos_penalty: f64,
    pub sum_rate: f64,
    pub critic_loss: f64,
    pub actor_loss: f64,
    pub alpha: f64,
}

enum Learner {
    Ddpg(Box<DdpgAgent>),
    Sac(Box<SacAgent>),
}

/// Runs warm-up plus the interaction/update loop and returns one metrics
/// record per step. Fully deterministic for a fixed (scenario, params).
pub fn train(
    kind: AgentKind,
    scenario: &Scenario,
    assoc: &RisAssociation,
    params: &TrainParams,
) -> Vec<StepMetrics> {
    let mut env = Env::new(scenario.clone(), assoc.clone(), params.episode_length, params.seed);
    let state_dim = env.state_dim();
    let action_dim = env.action_dim();
    let mut learner = match kind {
        AgentKind::Ddpg => Learner::Ddpg(Box::new(DdpgAgent::new(
            state_dim,
            action_dim,
            params.hidden,
            params.lr_actor,
            params.lr_critic,
            params.gamma,
            params.tau,
            params.reward_norm,
            params.seed,
        ))),
        AgentKind::Sac => Learner::Sac(Box::new(SacAgent::new(
            state_dim,
            action_dim,
            params.hidden,
            params.lr_actor,
            params.lr_critic,
            params.lr_alpha,
            params.alpha_init,
            params.gamma,
            params.tau,
            params.policy_delay,
            params.reward_norm,
            params.seed,
        ))),
    };
    let mut buffer = ReplayBuffer::new(params.buffer_capacity);
    let mut warmup_rng = ChaCha8Rng::seed_from_u64(mix(params.seed, Stream::Warmup as u64, 0));

    let mut state = env.reset();
    let mut episode = 0usize;

    for _ in 0..params.warmup_steps {
        let action: Vec<f64> = (0..action_dim).map(|_| uniform_pm1(&mut warmup_rng)).collect();
        let result = env.step(&action).expect("env stepped after reset");
        match &mut learner {
            Learner::Ddpg(agent) => agent.reward_scale.observe(result.reward),
            Learner::Sac(agent) => agent.reward_scale.observe(result.reward),
        }
        buffer.push(Transition {
            state: std::mem::take(&mut state),
            action,
            reward: result.reward,
            next_state: result.next_state.clone(),
            done: result.done,
        });
        if result.done {
            state = env.reset();
            episode += 1;
        } else {
            state = result.next_state;
        }
    }

    let mut metrics = Vec::with_capacity(params.total_steps);
    let mut last_critic_loss = 0.0;
    let mut last_actor_loss = 0.0;
    let mut last_alpha = match &learner {
        Learner::Ddpg(_) => 0.0,
        Learner::Sac(agent) => agent.alpha(),
    };

    for t in 1..=params.total_steps {
        let action = match &mut learner {
            Learner::Ddpg(agent) => {
                let progress = (t as f64 / (params.total_steps as f64 / 2.0)).min(1.0);
                agent.expl_sigma = params.expl_sigma_start
                    + (params.expl_sigma_end - params.expl_sigma_start) * progress;
                agent.select(&state, true)
            }
            Learner::Sac(agent) => agent.select(&state, false).0,
        };
        let result = env.step(&action).expect("env stepped after reset");
        match &mut learner {
            Learner::Ddpg(agent) => agent.reward_scale.observe(result.reward),
            Learner::Sac(agent) => agent.reward_scale.observe(result.reward),
        }
        buffer.push(Transition {
            state: std::mem::take(&mut state),
            action,
            reward: result.reward,
            next_state: result.next_state.clone(),
            done: result.done,
        });

        if buffer.len() >= params.batch_size {
            for _ in 0..params.updates_per_step {
                match &mut learner {
                    Learner::Ddpg(agent) => {
                        let (cl, al) = agent.update(&buffer, params.batch_size).expect("buffer size checked");
                        last_critic_loss = cl;
                        last_actor_loss = al;
                    }
                    Learner::Sac(agent) => {
                        let losses = agent.update(&buffer, params.batch_size).expect("buffer size checked");
                        last_critic_loss = 0.5 * (losses.q1_loss + losses.q2_loss);
                        if let Some(pl) = losses.policy_loss {
                            last_actor_loss = pl;
                        }
                        last_alpha = losses.alpha;
                    }
                }
            }
        }

        metrics.push(StepMetrics {
            step: t,
            episode,
            reward_raw: result.reward,
            sum_utility: result.info.sum_utility,
            utility_per_vsp: result.info.utility.clone(),
            qos_penalty: result.info.qos_penalty,
            sum_rate: result.info.sum_rate(),
            critic_loss: last_critic_loss,
            actor_loss: last_actor_loss,
            alpha: last_alpha,
        });

        if result.done {
            state = env.reset();
            episode += 1;
        } else {
            state = result.next_state;
        }
    }
    metrics
}

pub mod checkpoint {
    //! Binary checkpoints: network parameters, optimizer moments, the
    //! temperature, step counters, and the replay-buffer cursor. Enough to
    //! resume updates; buffer contents refill from fresh interaction.

    use super::*;

    const MAGIC: &[u8; 8] = b"RSCKPT1\0";

    fn put_adam(out: &mut Vec<u8>, opt: &AdamState) {
        out.extend_from_slice(&opt.lr.to_le_bytes());
        out.extend_from_slice(&opt.t.to_le_bytes());
        out.extend_from_slice(&(opt.m.len() as u64).to_le_bytes());
        for &x in opt.m.iter().chain(opt.v.iter()) {
            out.extend_from_slice(&x.to_le_bytes());
        }
    }

    fn put_mlp(out: &mut Vec<u8>, net: &Mlp, seed: u64, step: u64) {
        let blob = net.save_blob(seed, step);
        out.extend_from_slice(&(blob.len() as u64).to_le_bytes());
        out.extend_from_slice(&blob);
    }

    struct Reader<'a> {
        data: &'a [u8],
        pos: usize,
    }

    impl<'a> Reader<'a> {
        fn take(&mut self, n: usize) -> Result<&'a [u8], AgentError> {
            if self.pos + n > self.data.len() {
                return Err(AgentError::MalformedCheckpoint("truncated".into()));
            }
            let s = &self.data[self.pos..self.pos + n];
            self.pos += n;
            Ok(s)
        }

        fn u64(&mut self) -> Result<u64, AgentError> {
            Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
        }

        fn f64(&mut self) -> Result<f64, AgentError> {
            Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
        }

        fn adam(&mut self) -> Result<AdamState, AgentError> {
            let lr = self.f64()?;
            let t = self.u64()?;
            let n = self.u64()? as usize;
            let mut opt = AdamState::new(n, lr);
            opt.t = t;
            for i in 0..n {
                opt.m[i] = self.f64()?;
            }
            for i in 0..n {
                opt.v[i] = self.f64()?;
            }
            Ok(opt)
        }

        fn mlp(&mut self) -> Result<Mlp, AgentError> {
            let len = self.u64()? as usize;
            let blob = self.take(len)?;
            let (net, _, _) = Mlp::load_blob(blob)
                .map_err(|e| AgentError::MalformedCheckpoint(e.to_string()))?;
            Ok(net)
        }

        fn rng(&mut self) -> Result<ChaCha8Rng, AgentError> {
            let mut seed = [0u8; 32];
            seed.copy_from_slice(self.take(32)?);
            let stream = self.u64()?;
            let lo = self.u64()? as u128;
            let hi = self.u64()? as u128;
            let mut rng = ChaCha8Rng::from_seed(seed);
            rng.set_stream(stream);
            rng.set_word_pos((hi << 64) | lo);
            Ok(rng)
        }
    }

    fn put_rng(out: &mut Vec<u8>, rng: &ChaCha8Rng) {
        out.extend_from_slice(&rng.get_seed());
        out.extend_from_slice(&rng.get_stream().to_le_bytes());
        let pos = rng.get_word_pos();
        out.extend_from_slice(&(pos as u64).to_le_bytes());
        out.extend_from_slice(&((pos >> 64) as u64).to_le_bytes());
    }

    /// Serializes a SAC agent together with the buffer cursor and step count.
    pub fn save_sac(agent: &SacAgent, buffer_cursor: usize, step: u64) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.push(1); // kind tag: SAC
        out.extend_from_slice(&step.to_le_bytes());
        out.extend_from_slice(&(buffer_cursor as u64).to_le_bytes());
        out.extend_from_slice(&agent.log_alpha.to_le_bytes());
        out.extend_from_slice(&agent.target_entropy.to_le_bytes());
        out.extend_from_slice(&agent.gamma.to_le_bytes());
        out.extend_from_slice(&agent.tau.to_le_bytes());
        out.extend_from_slice(&(agent.policy_delay as u64).to_le_bytes());
        out.extend_from_slice(&agent.update_counter.to_le_bytes());
        out.extend_from_slice(&agent.reward_scale.sum_abs.to_le_bytes());
        out.extend_from_slice(&agent.reward_scale.count.to_le_bytes());
        out.push(agent.reward_scale.enabled as u8);
        for net in [&agent.actor, &agent.q1, &agent.q2, &agent.target_q1, &agent.target_q2] {
            put_mlp(&mut out, net, 0, step);
        }
        for opt in [&agent.opt_actor, &agent.opt_q1, &agent.opt_q2, &agent.opt_alpha] {
            put_adam(&mut out, opt);
        }
        put_rng(&mut out, &agent.noise_rng);
        put_rng(&mut out, &agent.sample_rng);
        out
    }

    /// Restores a SAC agent; returns (agent, buffer_cursor, step).
    pub fn load_sac(data: &[u8]) -> Result<(SacAgent, usize, u64), AgentError> {
        let mut r = Reader { data, pos: 0 };
        if r.take(8)? != MAGIC {
            return Err(AgentError::MalformedCheckpoint("bad magic".into()));
        }
        if r.take(1)?[0] != 1 {
            return Err(AgentError::MalformedCheckpoint("not a SAC checkpoint".into()));
        }
        let step = r.u64()?;
        let cursor = r.u64()? as usize;
        let log_alpha = r.f64()?;
        let target_entropy = r.f64()?;
        let gamma = r.f64()?;
        let tau = r.f64()?;
        let policy_delay = r.u64()? as usize;
        let update_counter = r.u64()?;
        let scale_sum = r.f64()?;
        let scale_count = r.u64()?;
        let scale_enabled = r.take(1)?[0] != 0;
        let actor = r.mlp()?;
        let q1 = r.mlp()?;
        let q2 = r.mlp()?;
        let target_q1 = r.mlp()?;
        let target_q2 = r.mlp()?;
        let opt_actor = r.adam()?;
        let opt_q1 = r.adam()?;
        let opt_q2 = r.adam()?;
        let opt_alpha = r.adam()?;
        let noise_rng = r.rng()?;
        let sample_rng = r.rng()?;
        let state_dim = actor.input_dim();
        let action_dim = actor.output_dim() / 2;
        let mut scale = RewardScale::new(scale_enabled, gamma);
        scale.sum_abs = scale_sum;
        scale.count = scale_count;
        Ok((
            SacAgent {
                actor,
                q1,
                q2,
                target_q1,
                target_q2,
                opt_actor,
                opt_q1,
                opt_q2,
                log_alpha,
                opt_alpha,
                target_entropy,
                gamma,
                tau,
                policy_delay,
                reward_scale: scale,
                head: SquashedGaussian { action_dim },
                update_counter,
                state_dim,
                action_dim,
                noise_rng,
                sample_rng,
            },
            cursor,
            step,
        ))
    }

    /// Serializes a DDPG agent together with the buffer cursor and step count.
    pub fn save_ddpg(agent: &DdpgAgent, buffer_cursor: usize, step: u64) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.push(0); // kind tag: DDPG
        out.extend_from_slice(&step.to_le_bytes());
        out.extend_from_slice(&(buffer_cursor as u64).to_le_bytes());
        out.extend_from_slice(&agent.gamma.to_le_bytes());
        out.extend_from_slice(&agent.tau.to_le_bytes());
        out.extend_from_slice(&agent.expl_sigma.to_le_bytes());
        out.extend_from_slice(&agent.reward_scale.sum_abs.to_le_bytes());
        out.extend_from_slice(&agent.reward_scale.count.to_le_bytes());
        out.push(agent.reward_scale.enabled as u8);
        for net in [&agent.actor, &agent.critic, &agent.target_actor, &agent.target_critic] {
            put_mlp(&mut out, net, 0, step);
        }
        for opt in [&agent.opt_actor, &agent.opt_critic] {
            put_adam(&mut out, opt);
        }
        put_rng(&mut out, &agent.noise_rng);
        put_rng(&mut out, &agent.sample_rng);
        out
    }

    /// Restores a DDPG agent; returns (agent, buffer_cursor, step).
    pub fn load_ddpg(data: &[u8]) -> Result<(DdpgAgent, usize, u64), AgentError> {
        let mut r = Reader { data, pos: 0 };
        if r.take(8)? != MAGIC {
            return Err(AgentError::MalformedCheckpoint("bad magic".into()));
        }
        if r.take(1)?[0] != 0 {
            return Err(AgentError::MalformedCheckpoint("not a DDPG checkpoint".into()));
        }
        let step = r.u64()?;
        let cursor = r.u64()? as usize;
        let gamma = r.f64()?;
        let tau = r.f64()?;
        let expl_sigma = r.f64()?;
        let scale_sum = r.f64()?;
        let scale_count = r.u64()?;
        let scale_enabled = r.take(1)?[0] != 0;
        let actor = r.mlp()?;
        let critic = r.mlp()?;
        let target_actor = r.mlp()?;
        let target_critic = r.mlp()?;
        let opt_actor = r.adam()?;
        let opt_critic = r.adam()?;
        let noise_rng = r.rng()?;
        let sample_rng = r.rng()?;
        let state_dim = actor.input_dim();
        let action_dim = actor.output_dim();
        let mut scale = RewardScale::new(scale_enabled, gamma);
        scale.sum_abs = scale_sum;
        scale.count = scale_count;
        Ok((
            DdpgAgent {
                actor,
                critic,
                target_actor,
                target_critic,
                opt_actor,
                opt_critic,
                gamma,
                tau,
                expl_sigma,
                reward_scale: scale,
                state_dim,
                action_dim,
                noise_rng,
                sample_rng,
            },
            cursor,
            step,
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::topology::{build_scenario, fix_ris_association, ScenarioConfig};

    fn tiny_scenario(seed: u64) -> (Scenario, RisAssociation) {
        let mut config = ScenarioConfig {
            vsps: 1,
            users_per_vsp: 2,
            subchannels: 2,
            reusable: vec![0],
            dedicated: vec![1],
            l_c: 1,
            seed,
            ..Default::default()
        };
        config.ris.elements = 2;
        let s = build_scenario(&config).unwrap();
        let assoc = fix_ris_association(&s);
        (s, assoc)
    }

    fn dummy_transition(state_dim: usize, action_dim: usize, tag: f64) -> Transition {
        Transition {
            state: vec![tag; state_dim],
            action: vec![0.1; action_dim],
            reward: tag,
            next_state: vec![tag + 0.5; state_dim],
            done: false,
        }
    }

    #[test]
    fn replay_buffer_ring_semantics() {
        let mut buf = ReplayBuffer::new(4);
        for i in 0..10 {
            buf.push(dummy_transition(2, 1, i as f64));
        }
        assert_eq!(buf.len(), 4);
        // Entries 6..10 survive; nothing older than capacity insertions.
        let rewards: Vec<f64> = (0..4).map(|i| buf.get(i).reward).collect();
        for r in rewards {
            assert!(r >= 6.0);
        }
    }

    #[test]
    fn replay_sampling_requires_batch() {
        let mut buf = ReplayBuffer::new(8);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(matches!(
            buf.sample_indices(&mut rng, 4),
            Err(AgentError::InsufficientBuffer { .. })
        ));
        for i in 0..4 {
            buf.push(dummy_transition(2, 1, i as f64));
        }
        let idx = buf.sample_indices(&mut rng, 4).unwrap();
        assert_eq!(idx.len(), 4);
        assert!(idx.iter().all(|&i| i < 4));
    }

    #[test]
    fn ddpg_select_deterministic_without_noise() {
        let mut agent = DdpgAgent::new(6, 3, 16, 1e-4, 1e-4, 0.99, 5e-3, true, 0);
        let state = vec![0.1, -0.3, 0.5, 0.0, 0.2, -0.1];
        let a1 = agent.select(&state, false);
        let a2 = agent.select(&state, false);
        assert_eq!(a1, a2);
        agent.expl_sigma = 0.0;
        let a3 = agent.select(&state, true);
        assert_eq!(a1, a3, "zero noise scale equals deterministic action");
        assert!(a1.iter().all(|x| x.abs() <= 1.0));
    }

    #[test]
    fn ddpg_noise_statistics() {
        let mut agent = DdpgAgent::new(4, 200, 8, 1e-4, 1e-4, 0.99, 5e-3, true, 3);
        // Zero the actor so actions are pure noise (un-clipped region).
        agent.actor.params_mut().iter_mut().for_each(|p| *p = 0.0);
        agent.expl_sigma = 0.1;
        let state = vec![0.0; 4];
        let mut sq = 0.0;
        let mut n = 0usize;
        for _ in 0..50 {
            let a = agent.select(&state, true);
            for x in a {
                sq += x * x;
                n += 1;
            }
        }
        let sigma = (sq / n as f64).sqrt();
        assert!((sigma / 0.1 - 1.0).abs() < 0.05, "empirical sigma {sigma}");
    }

    #[test]
    fn ddpg_fits_constant_target() {
        // Identical transitions with gamma = 0: the critic target is exactly
        // r; the TD loss must shrink under repeated updates.
        let state_dim = 4;
        let action_dim = 2;
        let mut agent = DdpgAgent::new(state_dim, action_dim, 16, 1e-3, 1e-3, 0.0, 5e-3, false, 7);
        let mut buf = ReplayBuffer::new(64);
        for _ in 0..8 {
            buf.push(Transition {
                state: vec![0.2, -0.1, 0.4, 0.3],
                action: vec![0.5, -0.5],
                reward: 1.7,
                next_state: vec![0.0; 4],
                done: false,
            });
        }
        let (first_loss, _) = agent.update(&buf, 8).unwrap();
        let mut last_loss = first_loss;
        for _ in 0..299 {
            let (cl, _) = agent.update(&buf, 8).unwrap();
            last_loss = cl;
        }
        assert!(
            last_loss < first_loss * 0.1,
            "critic loss did not shrink: {first_loss} -> {last_loss}"
        );
    }

    #[test]
    fn polyak_factor_exact() {
        let mut agent = DdpgAgent::new(3, 2, 8, 1e-4, 1e-4, 0.99, 5e-3, false, 11);
        // Make targets differ from online nets.
        agent.target_actor.params_mut().iter_mut().for_each(|p| *p += 1.0);
        let online: Vec<f64> = agent.actor.params().to_vec();
        let before: Vec<f64> = agent.target_actor.params().to_vec();
        polyak_update(agent.target_actor.params_mut(), &online, 5e-3);
        for ((t, b), o) in agent.target_actor.params().iter().zip(before.iter()).zip(online.iter()) {
            let want = 5e-3 * o + (1.0 - 5e-3) * b;
            assert!((t - want).abs() < 1e-15);
        }
        // tau = 1 -> hard copy.
        let mut t2 = agent.target_critic.params().to_vec();
        polyak_update(&mut t2, agent.critic.params(), 1.0);
        assert_eq!(&t2, agent.critic.params());
    }

    #[test]
    fn sac_select_modes() {
        let mut agent = SacAgent::new(5, 3, 16, 1e-4, 1e-4, 1e-4, 1.0, 0.99, 5e-3, 2, true, 0);
        let state = vec![0.3, -0.2, 0.1, 0.0, 0.4];
        let (d1, _) = agent.select(&state, true);
        let (d2, _) = agent.select(&state, true);
        assert_eq!(d1, d2);
        for _ in 0..2000 {
            let (a, _) = agent.select(&state, false);
            assert!(a.iter().all(|x| x.abs() <= 1.0));
        }
    }

    #[test]
    fn sac_log_prob_matches_histogram_density() {
        // 1-D policy with fixed mean/log-std via a zero-weight net with
        // biases; histogram density around a probe point must match the
        // analytic log-probability the head reports.
        let mut agent = SacAgent::new(2, 1, 4, 1e-4, 1e-4, 1e-4, 1.0, 0.99, 5e-3, 2, true, 5);
        let np = agent.actor.num_params();
        agent.actor.params_mut()[..np].iter_mut().for_each(|p| *p = 0.0);
        // Last layer biases: mean 0.4, log-std -0.7.
        let out_dim = agent.actor.output_dim();
        let ofs = np - out_dim;
        agent.actor.params_mut()[ofs] = 0.4;
        agent.actor.params_mut()[ofs + 1] = -0.7;
        let state = vec![0.0, 0.0];

        let (probe_action, probe_logp) = agent.select(&state, false);
        let a0 = probe_action[0];
        let width = 0.02;
        let n = 1_000_000usize;
        let mut count = 0usize;
        for _ in 0..n {
            let (a, _) = agent.select(&state, false);
            if (a[0] - a0).abs() < width / 2.0 {
                count += 1;
            }
        }
        let density = count as f64 / (n as f64 * width);
        let err = (density.ln() - probe_logp).abs();
        assert!(err < 1e-2 * probe_logp.abs().max(10.0), "log density gap {err}");
    }

    #[test]
    fn sac_target_uses_min_of_target_critics() {
        // Construct critics where Q2' is uniformly below Q1'; the effective
        // target must track Q2'.
        let state_dim = 3;
        let action_dim = 2;
        let mut agent =
            SacAgent::new(state_dim, action_dim, 8, 1e-9, 1e-9, 1e-9, 1.0, 0.5, 0.0, 2, false, 9);
        // Zero both target critics, then bias them apart.
        for net in [&mut agent.target_q1, &mut agent.target_q2] {
            net.params_mut().iter_mut().for_each(|p| *p = 0.0);
        }
        let np1 = agent.target_q1.num_params();
        agent.target_q1.params_mut()[np1 - 1] = 5.0; // Q1' = 5
        let np2 = agent.target_q2.num_params();
        agent.target_q2.params_mut()[np2 - 1] = -1.0; // Q2' = -1
        // alpha = 0 so the entropy term drops.
        agent.log_alpha = f64::NEG_INFINITY;

        let mut buf = ReplayBuffer::new(16);
        for _ in 0..8 {
            buf.push(Transition {
                state: vec![0.1; state_dim],
                action: vec![0.0; action_dim],
                reward: 2.0,
                next_state: vec![0.2; state_dim],
                done: false,
            });
        }
        // Zero online critics too: prediction 0, so the recorded loss equals
        // y^2 = (r + gamma * min)^2 = (2 + 0.5 * -1)^2 = 2.25.
        for net in [&mut agent.q1, &mut agent.q2] {
            net.params_mut().iter_mut().for_each(|p| *p = 0.0);
        }
        let losses = agent.update(&buf, 8).unwrap();
        assert!((losses.q1_loss - 2.25).abs() < 1e-9, "q1 loss {}", losses.q1_loss);
        assert!((losses.q2_loss - 2.25).abs() < 1e-9);
    }

    #[test]
    fn sac_alpha_falls_when_entropy_above_target() {
        // A fresh wide policy has log pi strongly negative, so
        // log pi + H_target < 0 and the temperature gradient pushes
        // log alpha down.
        let mut agent = SacAgent::new(3, 2, 8, 1e-9, 1e-9, 1e-2, 1.0, 0.99, 5e-3, 1, false, 13);
        let before = agent.log_alpha;
        let mut buf = ReplayBuffer::new(16);
        for i in 0..8 {
            buf.push(dummy_transition(3, 2, i as f64 * 0.1));
        }
        agent.update(&buf, 8).unwrap();
        assert!(
            agent.log_alpha < before,
            "alpha should fall when policy entropy exceeds target"
        );
    }

    #[test]
    fn sac_reduces_to_ddpg_when_entropy_off_and_critics_tied() {
        // alpha = 0, identical twin critics, zero sampling noise: the SAC
        // soft target coincides with the DDPG target evaluated with the
        // target actor equal to the online actor.
        let state_dim = 3;
        let action_dim = 2;
        let hidden = 8;
        let seed = 21;
        let mut sac =
            SacAgent::new(state_dim, action_dim, hidden, 1e-4, 1e-4, 1e-9, 1.0, 0.9, 1e-3, 1, false, seed);
        sac.log_alpha = f64::NEG_INFINITY; // alpha = 0
        sac.q2.copy_params_from(&sac.q1);
        sac.target_q1.copy_params_from(&sac.q1);
        sac.target_q2.copy_params_from(&sac.q1);

        // A DDPG agent sharing the same critic. Its actor must equal
        // tanh(mu(s)): copy the SAC trunk and the mean slice of the output
        // layer into a tanh-output actor of matching shape.
        let mut ddpg =
            DdpgAgent::new(state_dim, action_dim, hidden, 1e-4, 1e-4, 0.9, 1e-3, false, seed + 1);
        ddpg.critic.copy_params_from(&sac.q1);
        ddpg.target_critic.copy_params_from(&sac.q1);
        let out_dim = sac.actor.output_dim(); // 2 A
        let sac_params = sac.actor.params().to_vec();
        let sac_np = sac.actor.num_params();
        let sac_w_base = sac_np - out_dim - hidden * out_dim;
        let sac_b_base = sac_np - out_dim;
        let ddpg_np = ddpg.actor.num_params();
        let trunk_len = ddpg_np - (hidden * action_dim + action_dim);
        ddpg.actor.params_mut()[..trunk_len].copy_from_slice(&sac_params[..trunk_len]);
        for h in 0..hidden {
            for d in 0..action_dim {
                ddpg.actor.params_mut()[trunk_len + h * action_dim + d] =
                    sac_params[sac_w_base + h * out_dim + d];
            }
        }
        for d in 0..action_dim {
            ddpg.actor.params_mut()[trunk_len + hidden * action_dim + d] =
                sac_params[sac_b_base + d];
        }
        ddpg.target_actor.copy_params_from(&ddpg.actor);

        let mut buf = ReplayBuffer::new(16);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..8 {
            buf.push(Transition {
                state: (0..state_dim).map(|_| crate::rng::normal(&mut rng) * 0.3).collect(),
                action: (0..action_dim).map(|_| crate::rng::normal(&mut rng) * 0.2).collect(),
                reward: crate::rng::normal(&mut rng),
                next_state: (0..state_dim).map(|_| crate::rng::normal(&mut rng) * 0.3).collect(),
                done: false,
            });
        }
        let indices: Vec<usize> = (0..8).collect();
        let (_s, _a, r, s2) = gather_batch(&buf, &indices, state_dim, action_dim);

        // SAC target with alpha = 0 and eps = 0 (deterministic head sample).
        let out2 = sac.actor.forward_batch(&s2, 8);
        let samples2: Vec<PolicySample> = (0..8)
            .map(|i| {
                sac.head.sample(
                    &out2.output()[i * out_dim..(i + 1) * out_dim],
                    &vec![0.0; action_dim],
                )
            })
            .collect();
        let a2: Vec<f64> = samples2.iter().flat_map(|smp| smp.action.iter().copied()).collect();
        let sa2 = concat_state_action(&s2, &a2, state_dim, action_dim, 8);
        let tq = sac.target_q1.forward_batch(&sa2, 8);
        let sac_targets: Vec<f64> = (0..8).map(|i| r[i] + 0.9 * tq.output()[i]).collect();

        // DDPG target.
        let a2d = ddpg.target_actor.forward_batch(&s2, 8);
        let sa2d = concat_state_action(&s2, a2d.output(), state_dim, action_dim, 8);
        let tqd = ddpg.target_critic.forward_batch(&sa2d, 8);
        let ddpg_targets: Vec<f64> = (0..8).map(|i| r[i] + 0.9 * tqd.output()[i]).collect();

        for (a, b) in sac_targets.iter().zip(ddpg_targets.iter()) {
            assert!((a - b).abs() < 1e-9, "targets diverge: {a} vs {b}");
        }
    }

    #[test]
    fn sac_bandit_critic_matches_reward() {
        // gamma = 0 bandit with a known reward function: the learned
        // min-critic must approximate E[r | s, a] at sampled actions.
        let state_dim = 1;
        let action_dim = 1;
        let mut agent =
            SacAgent::new(state_dim, action_dim, 32, 3e-4, 3e-3, 1e-3, 1.0, 0.0, 5e-3, 2, false, 31);
        let reward_fn = |a: f64| 2.0 - (a - 0.3) * (a - 0.3);
        let mut buf = ReplayBuffer::new(4096);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..2048 {
            let a = uniform_pm1(&mut rng);
            buf.push(Transition {
                state: vec![0.0],
                action: vec![a],
                reward: reward_fn(a),
                next_state: vec![0.0],
                done: true,
            });
        }
        for _ in 0..5000 {
            agent.update(&buf, 64).unwrap();
        }
        for &a in &[-0.5, 0.0, 0.3, 0.7] {
            let q1 = agent.q1.forward(&[0.0, a]).unwrap()[0];
            let q2 = agent.q2.forward(&[0.0, a]).unwrap()[0];
            let q = q1.min(q2);
            let want = reward_fn(a);
            assert!(
                (q - want).abs() < 0.05 * want.abs(),
                "critic {q} vs expected reward {want} at a={a}"
            );
        }
    }

    #[test]
    fn train_t0_stores_warmup_only() {
        let (s, assoc) = tiny_scenario(1);
        let mut params = TrainParams::defaults(AgentKind::Sac);
        params.total_steps = 0;
        params.warmup_steps = 50;
        params.hidden = 8;
        params.seed = 4;
        let metrics = train(AgentKind::Sac, &s, &assoc, &params);
        assert!(metrics.is_empty());
    }

    #[test]
    fn train_deterministic_for_fixed_seed() {
        let (s, assoc) = tiny_scenario(2);
        for kind in [AgentKind::Sac, AgentKind::Ddpg] {
            let mut params = TrainParams::defaults(kind);
            params.total_steps = 120;
            params.warmup_steps = 40;
            params.batch_size = 16;
            params.hidden = 8;
            params.episode_length = 25;
            params.seed = 77;
            let m1 = train(kind, &s, &assoc, &params);
            let m2 = train(kind, &s, &assoc, &params);
            assert_eq!(m1, m2, "{} training not deterministic", kind.name());
            assert_eq!(m1.len(), 120);
        }
    }

    #[test]
    fn train_smoke_learning_progress() {
        // Tiny scenario, short run: the mean reward over the final tenth
        // must beat the first tenth after warm-up, median of 3 seeds.
        let (s, assoc) = tiny_scenario(3);
        let mut deltas = Vec::new();
        for seed in [1, 2, 3] {
            let mut params = TrainParams::defaults(AgentKind::Sac);
            params.total_steps = 2000;
            params.warmup_steps = 200;
            params.batch_size = 32;
            params.hidden = 16;
            params.seed = seed;
            let metrics = train(AgentKind::Sac, &s, &assoc, &params);
            let first: f64 =
                metrics[..200].iter().map(|m| m.reward_raw).sum::<f64>() / 200.0;
            let last: f64 =
                metrics[1800..].iter().map(|m| m.reward_raw).sum::<f64>() / 200.0;
            deltas.push(last - first);
        }
        deltas.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert!(
            deltas[1] > 0.0,
            "no learning progress: median delta {} (all {deltas:?})",
            deltas[1]
        );
    }

    #[test]
    fn checkpoint_roundtrip_sac() {
        let mut agent = SacAgent::new(4, 2, 8, 1e-4, 1e-4, 1e-4, 1.0, 0.99, 5e-3, 2, true, 17);
        let mut buf = ReplayBuffer::new(32);
        for i in 0..16 {
            buf.push(dummy_transition(4, 2, i as f64 * 0.2));
        }
        agent.reward_scale.observe(1.0);
        for _ in 0..5 {
            agent.update(&buf, 8).unwrap();
        }
        let blob = checkpoint::save_sac(&agent, buf.cursor(), 5);
        let (mut restored, cursor, step) = checkpoint::load_sac(&blob).unwrap();
        assert_eq!(cursor, buf.cursor());
        assert_eq!(step, 5);
        assert_eq!(restored.actor.params(), agent.actor.params());
        assert_eq!(restored.log_alpha, agent.log_alpha);
        // Same future behavior: next stochastic action matches.
        let state = vec![0.5, -0.5, 0.2, 0.0];
        let (want, want_lp) = agent.select(&state, false);
        let (got, got_lp) = restored.select(&state, false);
        assert_eq!(want, got);
        assert_eq!(want_lp, got_lp);
        // And the next update produces identical parameters.
        let l1 = agent.update(&buf, 8).unwrap();
        let l2 = restored.update(&buf, 8).unwrap();
        assert_eq!(l1.q1_loss, l2.q1_loss);
        assert_eq!(agent.q1.params(), restored.q1.params());
    }

    #[test]
    fn checkpoint_roundtrip_ddpg() {
        let mut agent = DdpgAgent::new(4, 2, 8, 1e-4, 1e-4, 0.99, 5e-3, true, 19);
        agent.expl_sigma = 0.2;
        let mut buf = ReplayBuffer::new(32);
        for i in 0..16 {
            buf.push(dummy_transition(4, 2, i as f64 * 0.2));
        }
        agent.reward_scale.observe(0.5);
        agent.update(&buf, 8).unwrap();
        let blob = checkpoint::save_ddpg(&agent, buf.cursor(), 1);
        let (mut restored, _, _) = checkpoint::load_ddpg(&blob).unwrap();
        let state = vec![0.5, -0.5, 0.2, 0.0];
        assert_eq!(agent.select(&state, true), restored.select(&state, true));
        agent.update(&buf, 8).unwrap();
        restored.update(&buf, 8).unwrap();
        assert_eq!(agent.critic.params(), restored.critic.params());
    }
}
