//! The training loop: one exploratory action per monitoring period, every
//! transition stored, and `eta` gradient steps at the end of each episode
//! once the warm-up step count is reached.

use gsc_core::environment::{Environment, Scenario};
use gsc_core::replay::{collate_transitions, ReplayBuffer, Transition};
use gsc_core::traffic::derive_seed;
use gsc_nn::agent::{AgentConfig, DdpgAgent, EncoderKind, Hyperparams};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::HarnessError;

// stream ids under the run seed
const ENV_STREAM: u64 = 10;
const NOISE_STREAM: u64 = 11;
const REPLAY_STREAM: u64 = 12;
const INIT_STREAM: u64 = 13;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub episodes: usize,
    /// Environment steps before the first gradient step.
    #[serde(default = "default_warmup")]
    pub warmup: usize,
    /// Gradient steps per training period (one episode).
    #[serde(default = "default_eta")]
    pub eta: usize,
    #[serde(default)]
    pub seed: u64,
}

fn default_warmup() -> usize {
    200
}

fn default_eta() -> usize {
    64
}

impl TrainConfig {
    pub fn new(episodes: usize, seed: u64) -> Self {
        Self {
            episodes,
            warmup: default_warmup(),
            eta: default_eta(),
            seed,
        }
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.eta == 0 {
            return Err(HarnessError::Config("eta must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    /// Mean reward of every episode.
    pub curve: Vec<f64>,
    pub env_steps: u64,
    /// Episodes that ended with at least `warmup` steps taken.
    pub episodes_after_warmup: u64,
    pub gradient_steps: u64,
    pub target_updates: u64,
    pub final_critic_loss: Option<f64>,
}

/// Which observation encoder an agent uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AgentKind {
    /// GNN embedder; any topology size.
    Gsc,
    /// Flattened fixed-size observation.
    Flat,
}

impl AgentKind {
    pub fn name(self) -> &'static str {
        match self {
            AgentKind::Gsc => "gsc",
            AgentKind::Flat => "flat-ddpg",
        }
    }
}

/// Agent shaped for `scenario`, initialized from `seed`. The flat encoder is
/// sized by the first topology variant.
pub fn new_agent(kind: AgentKind, scenario: &Scenario, hp: Hyperparams, seed: u64) -> DdpgAgent {
    let config = AgentConfig {
        chain_length: scenario.chain.len(),
        v_max: scenario.v_max,
        ..AgentConfig::default()
    };
    let encoder = match kind {
        AgentKind::Gsc => EncoderKind::Graph,
        AgentKind::Flat => {
            let t = &scenario.variants[0];
            EncoderKind::Flat {
                nodes: t.num_nodes(),
                edges: 2 * t.num_links(),
            }
        }
    };
    let hp = Hyperparams {
        threshold: scenario.threshold,
        ..hp
    };
    DdpgAgent::with_encoder(config, hp, encoder, derive_seed(seed, INIT_STREAM))
}

/// Runs the training loop. `progress` sees every finished episode's index
/// and mean reward.
pub fn train(
    agent: &mut DdpgAgent,
    scenario: &Scenario,
    config: &TrainConfig,
    mut progress: impl FnMut(usize, f64),
) -> Result<TrainReport, HarnessError> {
    config.validate()?;
    let hp = *agent.hyperparams();
    let mut env = Environment::new(scenario.clone(), derive_seed(config.seed, ENV_STREAM))?;
    let mut noise = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, NOISE_STREAM));
    let mut sampler = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, REPLAY_STREAM));
    let mut buffer = ReplayBuffer::new(hp.buffer_capacity);
    let mut report = TrainReport {
        curve: Vec::with_capacity(config.episodes),
        env_steps: 0,
        episodes_after_warmup: 0,
        gradient_steps: 0,
        target_updates: 0,
        final_critic_loss: None,
    };
    let (steps0, updates0) = (agent.gradient_steps(), agent.target_updates());
    for episode in 0..config.episodes {
        let mut obs = env.reset()?;
        let mut total = 0.0;
        let mut steps = 0usize;
        loop {
            let raw = agent.act(&obs, true, &mut noise)?;
            let out = env.step(&raw)?;
            total += out.reward;
            steps += 1;
            report.env_steps += 1;
            buffer.store(Transition {
                obs,
                action: out.applied,
                reward: out.reward,
                next_obs: out.observation.clone(),
                done: out.done,
            });
            obs = out.observation;
            if out.done {
                break;
            }
        }
        if report.env_steps >= config.warmup as u64 {
            report.episodes_after_warmup += 1;
            for _ in 0..config.eta {
                let batch = buffer.sample(hp.batch_size.min(buffer.len()), &mut sampler)?;
                let losses = agent.update(&collate_transitions(&batch))?;
                report.final_critic_loss = Some(losses.critic);
            }
        }
        let mean = total / steps as f64;
        report.curve.push(mean);
        progress(episode, mean);
    }
    report.gradient_steps = agent.gradient_steps() - steps0;
    report.target_updates = agent.target_updates() - updates0;
    Ok(report)
}
