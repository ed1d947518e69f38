//! Experiment grids: every agent, ingress count and training seed of a spec
//! is trained (if it learns) and evaluated.

use std::fs;
use std::path::{Path, PathBuf};

use gsc_core::environment::{Scenario, ScenarioConfig};
use gsc_nn::agent::{AgentError, Hyperparams};
use serde::{Deserialize, Serialize};

use crate::eval::{evaluate_or_record, EvalProtocol, GreedyPolicy, RandomPolicy, ResultRecord};
use crate::train::{new_agent, train, AgentKind, TrainConfig};
use crate::HarnessError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepAgent {
    Gsc,
    Flat,
    Random,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainSection {
    #[serde(default = "default_episodes")]
    pub episodes: usize,
    #[serde(default = "default_warmup")]
    pub warmup: usize,
    #[serde(default = "default_eta")]
    pub eta: usize,
}

fn default_episodes() -> usize {
    300
}

fn default_warmup() -> usize {
    200
}

fn default_eta() -> usize {
    64
}

impl Default for TrainSection {
    fn default() -> Self {
        Self {
            episodes: default_episodes(),
            warmup: default_warmup(),
            eta: default_eta(),
        }
    }
}

/// On-disk experiment grid. Scenario paths are relative to the spec file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub name: String,
    pub train_scenario: PathBuf,
    /// Defaults to the training scenario.
    #[serde(default)]
    pub eval_scenario: Option<PathBuf>,
    pub agents: Vec<SweepAgent>,
    /// When set, each value `k` replaces every variant's ingress set with
    /// nodes `0..k`.
    #[serde(default)]
    pub ingress_counts: Vec<usize>,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub train: TrainSection,
    #[serde(default)]
    pub eval: EvalProtocol,
}

fn default_seeds() -> Vec<u64> {
    vec![0]
}

impl ExperimentSpec {
    pub fn load(path: impl AsRef<Path>) -> Result<(Self, PathBuf), HarnessError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
        let spec: Self = toml::from_str(&text).map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new(".")).to_path_buf();
        Ok((spec, base))
    }
}

fn with_ingress_count(scenario: &Scenario, k: usize) -> Result<Scenario, HarnessError> {
    let ingress: Vec<usize> = (0..k).collect();
    let mut s = scenario.clone();
    s.variants = scenario
        .variants
        .iter()
        .map(|t| t.with_ingress(&ingress))
        .collect::<Result<_, _>>()
        .map_err(|e| HarnessError::Config(e.to_string()))?;
    s.name = format!("{}/ingress={k}", scenario.name);
    Ok(s.validated()?)
}

fn unsupported(agent: SweepAgent, scenario: &Scenario, seed: u64, e: AgentError) -> ResultRecord {
    ResultRecord {
        agent: agent_name(agent).into(),
        scenario: scenario.name.clone(),
        generalization: scenario.generalization.to_string(),
        seed,
        mean: None,
        std: None,
        values: Vec::new(),
        error: Some(e.to_string()),
    }
}

fn agent_name(agent: SweepAgent) -> &'static str {
    match agent {
        SweepAgent::Gsc => AgentKind::Gsc.name(),
        SweepAgent::Flat => AgentKind::Flat.name(),
        SweepAgent::Random => "random",
    }
}

/// One record per (ingress count, agent, seed), in that nesting order.
/// `progress` receives a line of text per finished training run.
pub fn run_sweep(
    spec: &ExperimentSpec,
    base: &Path,
    mut progress: impl FnMut(&str),
) -> Result<Vec<ResultRecord>, HarnessError> {
    let train_base = ScenarioConfig::load(base.join(&spec.train_scenario))?;
    let eval_base = match &spec.eval_scenario {
        Some(p) => ScenarioConfig::load(base.join(p))?,
        None => train_base.clone(),
    };
    let counts: Vec<Option<usize>> = if spec.ingress_counts.is_empty() {
        vec![None]
    } else {
        spec.ingress_counts.iter().copied().map(Some).collect()
    };
    let mut records = Vec::new();
    for count in counts {
        let (train_sc, eval_sc) = match count {
            Some(k) => (with_ingress_count(&train_base, k)?, with_ingress_count(&eval_base, k)?),
            None => (train_base.clone(), eval_base.clone()),
        };
        for &agent in &spec.agents {
            for &seed in &spec.seeds {
                let protocol = EvalProtocol {
                    seed: spec.eval.seed ^ seed,
                    ..spec.eval
                };
                let record = match agent {
                    SweepAgent::Random => {
                        evaluate_or_record(&mut RandomPolicy::for_scenario(&eval_sc), &eval_sc, &protocol)?
                    }
                    SweepAgent::Gsc | SweepAgent::Flat => {
                        let kind = if agent == SweepAgent::Gsc { AgentKind::Gsc } else { AgentKind::Flat };
                        let mut learner = new_agent(kind, &train_sc, Hyperparams::default(), seed);
                        let cfg = TrainConfig {
                            episodes: spec.train.episodes,
                            warmup: spec.train.warmup,
                            eta: spec.train.eta,
                            seed,
                        };
                        match train(&mut learner, &train_sc, &cfg, |_, _| {}) {
                            Ok(report) => {
                                progress(&format!(
                                    "{} seed {seed} on {}: final episode reward {:.4}, {} gradient steps",
                                    kind.name(),
                                    train_sc.name,
                                    report.curve.last().copied().unwrap_or(f64::NAN),
                                    report.gradient_steps
                                ));
                                let mut policy = GreedyPolicy::new(kind.name(), &learner);
                                evaluate_or_record(&mut policy, &eval_sc, &protocol)?
                            }
                            Err(HarnessError::Agent(e @ AgentError::UnsupportedCapability(_))) => {
                                unsupported(agent, &train_sc, seed, e)
                            }
                            Err(e) => return Err(e),
                        }
                    }
                };
                records.push(record);
            }
        }
    }
    Ok(records)
}
