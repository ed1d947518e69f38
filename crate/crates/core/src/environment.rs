//! Episodic wrapper around the simulator: builds graph observations from the
//! monitoring snapshots, turns raw actions into scheduling tensors, and rotates
//! through scenario variants (capacities, ingress sets, topologies) on reset.
//!
//! Scenario files are TOML. Paths are relative to the file:
//!
//! ```toml
//! name = "abilene-fixed"
//! generalization = "seen"
//! episode_length = 200
//! monitoring_period = 100.0
//! rotation = "cycle"
//!
//! [traffic]
//! process = { kind = "fixed", interval = 2.0 }
//!
//! [[topologies]]
//! path = "../data/topologies/Abilene.graphml"
//! ingress_sets = [[0]]
//! ```

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::simulator::{
    post_process, reward, ActionTensor, MonitoringSnapshot, SchedulingError, SchedulingTensor, SimError, Simulator,
    DEFAULT_SCHEDULING_THRESHOLD,
};
use crate::topology::{
    build_mask, load_topology, ActionMask, NetworkTopology, ParameterOverrides, TopologyError, DEFAULT_V_MAX,
};
use crate::traffic::{derive_seed, ServiceChain, TrafficConfig, TrafficError, TrafficGenerator};

pub const NODE_FEATURES: usize = 3;
pub const EDGE_FEATURES: usize = 2;

#[derive(Debug, thiserror::Error)]
pub enum EnvError {
    #[error("scenario {name:?}: {message}")]
    Config { name: String, message: String },
    #[error("reading scenario {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("parsing scenario {path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error(transparent)]
    Topology(#[from] TopologyError),
    #[error(transparent)]
    Traffic(#[from] TrafficError),
    #[error("action rejected: {0}")]
    Action(#[from] SchedulingError),
    #[error(transparent)]
    Simulation(#[from] SimError),
    #[error("step called before reset")]
    NotReset,
    #[error("episode finished after {0} steps; reset before stepping again")]
    EpisodeDone(usize),
}

/// `v -> 2 * min(v / v_max, 1) - 1`, for non-negative `v`.
pub fn normalize_feature(v: f64, v_max: f64) -> f64 {
    debug_assert!(v_max > 0.0);
    2.0 * (v / v_max).clamp(0.0, 1.0) - 1.0
}

pub fn normalize_features(values: &[f64], v_max: f64) -> Vec<f64> {
    values.iter().map(|&v| normalize_feature(v, v_max)).collect()
}

/// Normalization maxima, shared by every topology of a scenario so feature
/// scales agree across topology switches. Ratios are already in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeatureScale {
    #[serde(default = "default_ingress_max")]
    pub ingress_traffic: f64,
    #[serde(default = "default_capacity_max")]
    pub capacity: f64,
    #[serde(default = "default_delay_max")]
    pub delay: f64,
}

fn default_ingress_max() -> f64 {
    100.0
}

fn default_capacity_max() -> f64 {
    10.0
}

fn default_delay_max() -> f64 {
    20.0
}

impl Default for FeatureScale {
    fn default() -> Self {
        Self {
            ingress_traffic: default_ingress_max(),
            capacity: default_capacity_max(),
            delay: default_delay_max(),
        }
    }
}

impl FeatureScale {
    fn validate(&self) -> Result<(), String> {
        if self.ingress_traffic > 0.0 && self.capacity > 0.0 && self.delay > 0.0 {
            Ok(())
        } else {
            Err("feature maxima must be positive".into())
        }
    }
}

/// Graph observation of one monitoring period.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    /// `|V| x 3` row-major: ingress traffic, load ratio, capacity.
    pub node_features: Vec<f64>,
    /// `|E_dir| x 2` row-major: delay, used bandwidth ratio.
    pub edge_features: Vec<f64>,
    /// Directed edge `e` goes from `edge_src[e]` to `edge_dst[e]`. Link `l`
    /// appears as edges `2l` (a to b) and `2l + 1` (b to a).
    pub edge_src: Vec<usize>,
    pub edge_dst: Vec<usize>,
    pub mask: ActionMask,
}

impl Observation {
    pub fn num_nodes(&self) -> usize {
        self.node_features.len() / NODE_FEATURES
    }

    pub fn num_edges(&self) -> usize {
        self.edge_src.len()
    }

    pub fn node_row(&self, v: usize) -> &[f64] {
        &self.node_features[v * NODE_FEATURES..(v + 1) * NODE_FEATURES]
    }

    pub fn edge_row(&self, e: usize) -> &[f64] {
        &self.edge_features[e * EDGE_FEATURES..(e + 1) * EDGE_FEATURES]
    }

    /// Builds the observation of `topo` after a window with `snapshot`, or
    /// the zero-traffic initial observation when `snapshot` is `None`.
    pub fn build(
        topo: &NetworkTopology,
        snapshot: Option<&MonitoringSnapshot>,
        scale: &FeatureScale,
        mask: ActionMask,
    ) -> Self {
        let n = topo.num_nodes();
        let mut node_features = Vec::with_capacity(n * NODE_FEATURES);
        for v in 0..n {
            let (ingress, load) = snapshot.map_or((0.0, 0.0), |s| (s.ingress_traffic[v], s.load_ratio[v]));
            node_features.push(normalize_feature(ingress, scale.ingress_traffic));
            node_features.push(normalize_feature(load, 1.0));
            node_features.push(normalize_feature(topo.capacity(v), scale.capacity));
        }
        let m = topo.num_links();
        let mut edge_features = Vec::with_capacity(2 * m * EDGE_FEATURES);
        let mut edge_src = Vec::with_capacity(2 * m);
        let mut edge_dst = Vec::with_capacity(2 * m);
        for (l, link) in topo.links().iter().enumerate() {
            let used = snapshot.map_or(0.0, |s| s.bandwidth_ratio[l]);
            let row = [normalize_feature(link.delay, scale.delay), normalize_feature(used, 1.0)];
            for (s, d) in [(link.a, link.b), (link.b, link.a)] {
                edge_src.push(s);
                edge_dst.push(d);
                edge_features.extend_from_slice(&row);
            }
        }
        Self {
            node_features,
            edge_features,
            edge_src,
            edge_dst,
            mask,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Generalization {
    Seen,
    Gen1,
    Gen2,
    Gen3,
    Gen4,
}

impl fmt::Display for Generalization {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Generalization::Seen => "seen",
            Generalization::Gen1 => "gen1",
            Generalization::Gen2 => "gen2",
            Generalization::Gen3 => "gen3",
            Generalization::Gen4 => "gen4",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Rotation {
    /// Always the first variant.
    Fixed,
    /// Variants in order, one per rotation period.
    Cycle,
    /// A seeded draw per rotation period.
    SeededRandom,
}

/// One topology entry of a scenario file. Every capacity set is combined with
/// every ingress set; missing lists fall back to the file's own values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TopologyEntry {
    pub path: PathBuf,
    /// Overrides file; defaults to `<stem>.overrides.toml` next to `path` if present.
    #[serde(default)]
    pub overrides: Option<PathBuf>,
    #[serde(default)]
    pub capacity_sets: Vec<Vec<f64>>,
    #[serde(default)]
    pub ingress_sets: Vec<Vec<usize>>,
}

fn default_episode_length() -> usize {
    200
}

fn default_mp() -> f64 {
    100.0
}

fn default_rotation_period() -> usize {
    1
}

fn default_chain_length() -> usize {
    3
}

fn default_v_max() -> usize {
    DEFAULT_V_MAX
}

fn default_threshold() -> f64 {
    DEFAULT_SCHEDULING_THRESHOLD
}

/// On-disk scenario description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: String,
    #[serde(default = "default_generalization")]
    pub generalization: Generalization,
    #[serde(default = "default_episode_length")]
    pub episode_length: usize,
    #[serde(default = "default_mp")]
    pub monitoring_period: f64,
    #[serde(default = "default_rotation")]
    pub rotation: Rotation,
    /// Episodes per variant before rotating.
    #[serde(default = "default_rotation_period")]
    pub rotation_period: usize,
    #[serde(default = "default_chain_length")]
    pub chain_length: usize,
    #[serde(default = "default_v_max")]
    pub v_max: usize,
    #[serde(default = "default_threshold")]
    pub threshold: f64,
    pub traffic: TrafficConfig,
    #[serde(default)]
    pub features: FeatureScale,
    pub topologies: Vec<TopologyEntry>,
}

fn default_generalization() -> Generalization {
    Generalization::Seen
}

fn default_rotation() -> Rotation {
    Rotation::Fixed
}

impl ScenarioConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Scenario, EnvError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|source| EnvError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let cfg: ScenarioConfig = toml::from_str(&text).map_err(|e| EnvError::Parse {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        cfg.resolve(path.parent().unwrap_or_else(|| Path::new(".")))
    }

    /// Loads every topology (relative to `base`) and expands the variants.
    pub fn resolve(&self, base: &Path) -> Result<Scenario, EnvError> {
        let err = |message: String| EnvError::Config {
            name: self.name.clone(),
            message,
        };
        if self.topologies.is_empty() {
            return Err(err("no topologies listed".into()));
        }
        let mut variants = Vec::new();
        for entry in &self.topologies {
            let path = base.join(&entry.path);
            let overrides = match &entry.overrides {
                Some(p) => ParameterOverrides::load(base.join(p))?,
                None => {
                    let sidecar = path.with_extension("overrides.toml");
                    if sidecar.exists() {
                        ParameterOverrides::load(sidecar)?
                    } else {
                        ParameterOverrides::none()
                    }
                }
            };
            let topo = load_topology(&path, &overrides)?;
            variants.extend(expand_variants(&topo, &entry.capacity_sets, &entry.ingress_sets)?);
        }
        let mut traffic = self.traffic.clone();
        if let crate::traffic::ArrivalProcess::Trace { path } = &mut traffic.process {
            *path = base.join(&*path);
        }
        Scenario {
            name: self.name.clone(),
            generalization: self.generalization,
            variants,
            traffic,
            episode_length: self.episode_length,
            monitoring_period: self.monitoring_period,
            rotation: self.rotation,
            rotation_period: self.rotation_period,
            chain: ServiceChain::uniform(self.chain_length),
            v_max: self.v_max,
            threshold: self.threshold,
            features: self.features,
        }
        .validated()
    }
}

/// Cartesian product of capacity sets and ingress sets over `topo`.
pub fn expand_variants(
    topo: &NetworkTopology,
    capacity_sets: &[Vec<f64>],
    ingress_sets: &[Vec<usize>],
) -> Result<Vec<NetworkTopology>, TopologyError> {
    let caps: Vec<Option<&Vec<f64>>> = if capacity_sets.is_empty() {
        vec![None]
    } else {
        capacity_sets.iter().map(Some).collect()
    };
    let ingress: Vec<Option<&Vec<usize>>> = if ingress_sets.is_empty() {
        vec![None]
    } else {
        ingress_sets.iter().map(Some).collect()
    };
    let mut out = Vec::with_capacity(caps.len() * ingress.len());
    for c in &caps {
        let base = match c {
            Some(c) => topo.with_capacities(c)?,
            None => topo.clone(),
        };
        for i in &ingress {
            out.push(match i {
                Some(i) => base.with_ingress(i)?,
                None => base.clone(),
            });
        }
    }
    Ok(out)
}

/// A resolved scenario: concrete topology variants plus episode settings.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub generalization: Generalization,
    pub variants: Vec<NetworkTopology>,
    pub traffic: TrafficConfig,
    pub episode_length: usize,
    pub monitoring_period: f64,
    pub rotation: Rotation,
    pub rotation_period: usize,
    pub chain: ServiceChain,
    pub v_max: usize,
    pub threshold: f64,
    pub features: FeatureScale,
}

impl Scenario {
    /// One fixed topology with default episode settings.
    pub fn single(name: impl Into<String>, topology: NetworkTopology, traffic: TrafficConfig) -> Self {
        Self {
            name: name.into(),
            generalization: Generalization::Seen,
            variants: vec![topology],
            traffic,
            episode_length: default_episode_length(),
            monitoring_period: default_mp(),
            rotation: Rotation::Fixed,
            rotation_period: 1,
            chain: ServiceChain::uniform(default_chain_length()),
            v_max: DEFAULT_V_MAX,
            threshold: DEFAULT_SCHEDULING_THRESHOLD,
            features: FeatureScale::default(),
        }
    }

    pub fn validated(self) -> Result<Self, EnvError> {
        let err = |message: String| EnvError::Config {
            name: self.name.clone(),
            message,
        };
        if self.variants.is_empty() {
            return Err(err("no topology variants".into()));
        }
        if self.episode_length == 0 {
            return Err(err("episode length must be positive".into()));
        }
        if !(self.monitoring_period > 0.0) {
            return Err(err("monitoring period must be positive".into()));
        }
        if self.rotation_period == 0 {
            return Err(err("rotation period must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.threshold) {
            return Err(err(format!("threshold {} outside [0, 1]", self.threshold)));
        }
        self.features.validate().map_err(err)?;
        self.chain.validate()?;
        self.traffic.validate()?;
        for t in &self.variants {
            build_mask(t, self.chain.len(), self.v_max)?;
            if t.ingress_nodes().is_empty() {
                return Err(err(format!("topology {:?} has no ingress node", t.name())));
            }
        }
        Ok(self)
    }

    /// Variant used in `episode`; depends only on `(seed, episode)`.
    pub fn variant_index(&self, seed: u64, episode: u64) -> usize {
        let m = self.variants.len();
        let slot = episode / self.rotation_period as u64;
        match self.rotation {
            Rotation::Fixed => 0,
            Rotation::Cycle => (slot % m as u64) as usize,
            Rotation::SeededRandom => (derive_seed(seed ^ 0x5eed_5ce0, slot) % m as u64) as usize,
        }
    }

    /// Largest |V| over the variants.
    pub fn max_nodes(&self) -> usize {
        self.variants.iter().map(|t| t.num_nodes()).max().unwrap_or(0)
    }
}

#[derive(Debug, Clone)]
pub struct StepResult {
    pub observation: Observation,
    pub reward: f64,
    pub done: bool,
    pub snapshot: MonitoringSnapshot,
    /// The tensor the simulator actually applied.
    pub applied: SchedulingTensor,
}

#[derive(Debug, Clone)]
struct Episode {
    variant: usize,
    mask: ActionMask,
    sim: Simulator,
    traffic: TrafficGenerator,
    steps: usize,
}

#[derive(Debug, Clone)]
pub struct Environment {
    scenario: Scenario,
    seed: u64,
    next_episode: u64,
    episode: Option<Episode>,
    event_log: bool,
}

impl Environment {
    pub fn new(scenario: Scenario, seed: u64) -> Result<Self, EnvError> {
        Ok(Self {
            scenario: scenario.validated()?,
            seed,
            next_episode: 0,
            episode: None,
            event_log: false,
        })
    }

    /// Keeps a simulator event log for inspection via [`Environment::simulator`].
    pub fn with_event_log(mut self) -> Self {
        self.event_log = true;
        self
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Number of resets so far.
    pub fn episodes_started(&self) -> u64 {
        self.next_episode
    }

    pub fn steps_taken(&self) -> usize {
        self.episode.as_ref().map_or(0, |e| e.steps)
    }

    pub fn topology(&self) -> Option<&NetworkTopology> {
        self.episode.as_ref().map(|e| &self.scenario.variants[e.variant])
    }

    pub fn mask(&self) -> Option<ActionMask> {
        self.episode.as_ref().map(|e| e.mask)
    }

    pub fn simulator(&self) -> Option<&Simulator> {
        self.episode.as_ref().map(|e| &e.sim)
    }

    pub fn simulator_mut(&mut self) -> Option<&mut Simulator> {
        self.episode.as_mut().map(|e| &mut e.sim)
    }

    /// Starts the next episode on the variant the rotation selects and
    /// returns the zero-traffic observation.
    pub fn reset(&mut self) -> Result<Observation, EnvError> {
        let e = self.next_episode;
        self.next_episode += 1;
        self.start_episode(e)
    }

    /// Starts episode `episode` directly (the counter continues from it).
    pub fn reset_to(&mut self, episode: u64) -> Result<Observation, EnvError> {
        self.next_episode = episode + 1;
        self.start_episode(episode)
    }

    fn start_episode(&mut self, e: u64) -> Result<Observation, EnvError> {
        let s = &self.scenario;
        let variant = s.variant_index(self.seed, e);
        let topo = &s.variants[variant];
        let mask = build_mask(topo, s.chain.len(), s.v_max)?;
        let episode_seed = derive_seed(self.seed, e);
        let mut sim = Simulator::new(topo.clone(), s.chain.clone(), derive_seed(episode_seed, 0));
        if self.event_log {
            sim = sim.with_event_log();
        }
        let traffic = TrafficGenerator::new(&s.traffic, &topo.ingress_nodes(), derive_seed(episode_seed, 1), 0.0)?;
        let obs = Observation::build(topo, None, &s.features, mask);
        self.episode = Some(Episode {
            variant,
            mask,
            sim,
            traffic,
            steps: 0,
        });
        Ok(obs)
    }

    /// Applies `action` for one monitoring period.
    pub fn step(&mut self, action: &ActionTensor) -> Result<StepResult, EnvError> {
        let s = &self.scenario;
        let ep = self.episode.as_mut().ok_or(EnvError::NotReset)?;
        if ep.steps >= s.episode_length {
            return Err(EnvError::EpisodeDone(ep.steps));
        }
        let x = post_process(action, &ep.mask, s.threshold)?;
        let start = ep.sim.now();
        let flows = ep.traffic.spawn(start, start + s.monitoring_period);
        let snapshot = ep.sim.run_window(&x, flows, s.monitoring_period)?;
        ep.steps += 1;
        let topo = &s.variants[ep.variant];
        Ok(StepResult {
            observation: Observation::build(topo, Some(&snapshot), &s.features, ep.mask),
            reward: reward(&snapshot),
            done: ep.steps >= s.episode_length,
            snapshot,
            applied: x,
        })
    }
}
