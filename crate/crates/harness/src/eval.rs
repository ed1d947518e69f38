//! Policies and the evaluation protocol.

use gsc_core::environment::{Environment, Observation, Scenario};
use gsc_core::simulator::ActionTensor;
use gsc_core::traffic::derive_seed;
use gsc_nn::agent::{AgentError, DdpgAgent};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::HarnessError;

const POLICY_STREAM: u64 = 20;

/// Maps observations to raw actions; the environment post-processes them.
pub trait Policy {
    fn name(&self) -> &str;
    fn act(&mut self, obs: &Observation, rng: &mut ChaCha8Rng) -> Result<ActionTensor, HarnessError>;
}

/// Uniform `[0, 1)` entries on every valid position.
#[derive(Debug, Clone)]
pub struct RandomPolicy {
    chain_length: usize,
    v_max: usize,
}

impl RandomPolicy {
    pub fn new(chain_length: usize, v_max: usize) -> Self {
        Self { chain_length, v_max }
    }

    pub fn for_scenario(scenario: &Scenario) -> Self {
        Self::new(scenario.chain.len(), scenario.v_max)
    }
}

impl Policy for RandomPolicy {
    fn name(&self) -> &str {
        "random"
    }

    fn act(&mut self, obs: &Observation, rng: &mut ChaCha8Rng) -> Result<ActionTensor, HarnessError> {
        let mut a = ActionTensor::zeros(self.chain_length, self.v_max);
        let slots = a.as_mut_slice();
        for f in obs.mask.valid_indices() {
            slots[f] = rng.random::<f64>();
        }
        Ok(a)
    }
}

/// A trained agent acting without exploration noise.
#[derive(Debug, Clone, Copy)]
pub struct GreedyPolicy<'a> {
    name: &'a str,
    agent: &'a DdpgAgent,
}

impl<'a> GreedyPolicy<'a> {
    pub fn new(name: &'a str, agent: &'a DdpgAgent) -> Self {
        Self { name, agent }
    }
}

impl Policy for GreedyPolicy<'_> {
    fn name(&self) -> &str {
        self.name
    }

    fn act(&mut self, obs: &Observation, rng: &mut ChaCha8Rng) -> Result<ActionTensor, HarnessError> {
        Ok(self.agent.act(obs, false, rng)?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalProtocol {
    #[serde(default = "default_repetitions")]
    pub repetitions: usize,
    /// Monitoring periods per repetition.
    #[serde(default = "default_windows")]
    pub windows: usize,
    #[serde(default)]
    pub seed: u64,
}

fn default_repetitions() -> usize {
    25
}

fn default_windows() -> usize {
    200
}

impl Default for EvalProtocol {
    fn default() -> Self {
        Self {
            repetitions: default_repetitions(),
            windows: default_windows(),
            seed: 0,
        }
    }
}

/// One evaluated (agent, scenario) pair. `mean` and `std` are absent when
/// the agent could not run on the scenario; `error` then says why.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRecord {
    pub agent: String,
    pub scenario: String,
    pub generalization: String,
    pub seed: u64,
    pub mean: Option<f64>,
    pub std: Option<f64>,
    pub values: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl ResultRecord {
    pub fn is_unsupported(&self) -> bool {
        self.error.is_some()
    }
}

/// Average reward over `windows` periods for each repetition. Repetition
/// `r` runs its own environment seeded from `(protocol.seed, r)`; when an
/// episode ends before the window budget a new one starts.
pub fn evaluate(policy: &mut dyn Policy, scenario: &Scenario, protocol: &EvalProtocol) -> Result<ResultRecord, HarnessError> {
    if protocol.repetitions == 0 || protocol.windows == 0 {
        return Err(HarnessError::Config("evaluation needs at least one repetition and one window".into()));
    }
    let mut values = Vec::with_capacity(protocol.repetitions);
    for r in 0..protocol.repetitions as u64 {
        let seed = derive_seed(protocol.seed, r);
        let mut env = Environment::new(scenario.clone(), seed)?;
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, POLICY_STREAM));
        let mut obs = env.reset()?;
        let mut total = 0.0;
        for _ in 0..protocol.windows {
            let out = env.step(&policy.act(&obs, &mut rng)?)?;
            total += out.reward;
            obs = if out.done { env.reset()? } else { out.observation };
        }
        values.push(total / protocol.windows as f64);
    }
    let (mean, std) = mean_std(&values);
    Ok(ResultRecord {
        agent: policy.name().to_string(),
        scenario: scenario.name.clone(),
        generalization: scenario.generalization.to_string(),
        seed: protocol.seed,
        mean: Some(mean),
        std: Some(std),
        values,
        error: None,
    })
}

/// Like [`evaluate`], but an agent that cannot handle the scenario's
/// topology yields a record carrying the error instead of failing.
pub fn evaluate_or_record(policy: &mut dyn Policy, scenario: &Scenario, protocol: &EvalProtocol) -> Result<ResultRecord, HarnessError> {
    match evaluate(policy, scenario, protocol) {
        Err(HarnessError::Agent(e @ AgentError::UnsupportedCapability(_))) => Ok(ResultRecord {
            agent: policy.name().to_string(),
            scenario: scenario.name.clone(),
            generalization: scenario.generalization.to_string(),
            seed: protocol.seed,
            mean: None,
            std: None,
            values: Vec::new(),
            error: Some(e.to_string()),
        }),
        other => other,
    }
}

/// Mean and sample standard deviation (zero for a single value).
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}
