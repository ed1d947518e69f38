//! DDPG actor-critic over graph observations with a masked, fixed-size
//! action space.
//!
//! The actor maps the pooled graph embedding and the flattened action mask
//! through one hidden layer to a sigmoid score per scheduling entry; only the
//! entries the mask allows are evaluated, which is the same as computing all
//! of them and multiplying by the mask. The critic scores the concatenation
//! of its own graph embedding, the flattened action and the flattened mask.
//! Flattening is row-major over `(function, source, destination)`.

use std::path::Path;
use std::rc::Rc;

use gsc_core::environment::Observation;
use gsc_core::replay::TransitionBatch;
use gsc_core::simulator::{ActionTensor, SchedulingTensor, DEFAULT_SCHEDULING_THRESHOLD};
use gsc_core::topology::{ActionMask, DEFAULT_V_MAX};
use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::adam::{Adam, AdamConfig};
use crate::embedder::{Embedder, EmbedderConfig, GraphTensors};
use crate::params::{load_checkpoint, save_checkpoint, Bound, CheckpointError, ParamId, ParameterSet};
use crate::tape::{DiffError, Picks, Tape, Var};
use crate::tensor::Tensor;

#[derive(Debug, thiserror::Error)]
pub enum AgentError {
    #[error("unsupported capability: {0}")]
    UnsupportedCapability(String),
    #[error("contract violation: {0}")]
    Contract(String),
    #[error(transparent)]
    Diff(#[from] DiffError),
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hyperparams {
    pub gamma: f64,
    pub lr: f64,
    pub tau: f64,
    pub noise_mean: f64,
    pub noise_std: f64,
    pub threshold: f64,
    pub warmup: usize,
    pub batch_size: usize,
    pub buffer_capacity: usize,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Self {
            gamma: 0.99,
            lr: 1e-3,
            tau: 1e-4,
            noise_mean: 0.15,
            noise_std: 0.3,
            threshold: DEFAULT_SCHEDULING_THRESHOLD,
            warmup: 200,
            batch_size: 100,
            buffer_capacity: 10_000,
        }
    }
}

impl Hyperparams {
    fn entries(&self) -> Vec<(String, String)> {
        [
            ("gamma", self.gamma),
            ("lr", self.lr),
            ("tau", self.tau),
            ("noise_mean", self.noise_mean),
            ("noise_std", self.noise_std),
            ("threshold", self.threshold),
            ("warmup", self.warmup as f64),
            ("batch_size", self.batch_size as f64),
            ("buffer_capacity", self.buffer_capacity as f64),
        ]
        .into_iter()
        .map(|(k, v)| (format!("hp.{k}"), format!("{v:?}")))
        .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AgentConfig {
    pub embedder: EmbedderConfig,
    pub actor_hidden: usize,
    pub critic_hidden: usize,
    pub chain_length: usize,
    pub v_max: usize,
}

impl Default for AgentConfig {
    fn default() -> Self {
        Self {
            embedder: EmbedderConfig::default(),
            actor_hidden: 256,
            critic_hidden: 64,
            chain_length: 3,
            v_max: DEFAULT_V_MAX,
        }
    }
}

impl AgentConfig {
    /// Length of the flattened action and mask.
    pub fn action_len(&self) -> usize {
        self.chain_length * self.v_max * self.v_max
    }
}

/// Fixed-size observation encoder: concatenated node and edge features of
/// a graph with exactly `nodes` nodes and `edges` directed edges, then one
/// dense ReLU layer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlatEncoder {
    pub nodes: usize,
    pub edges: usize,
    pub w: ParamId,
    pub b: ParamId,
}

impl FlatEncoder {
    pub fn new(params: &mut ParameterSet, prefix: &str, nodes: usize, edges: usize, hidden: usize) -> Self {
        let input = nodes * gsc_core::environment::NODE_FEATURES + edges * gsc_core::environment::EDGE_FEATURES;
        Self {
            nodes,
            edges,
            w: params.add_uniform(format!("{prefix}.flat.w"), input, hidden, input),
            b: params.add_uniform(format!("{prefix}.flat.b"), 1, hidden, input),
        }
    }

    /// One row per graph; the self-loops of `g` are skipped.
    pub fn flatten(&self, g: &GraphTensors) -> Result<Tensor, AgentError> {
        let nf = g.node_features.cols();
        let ef = g.edge_features.cols();
        let width = self.nodes * nf + self.edges * ef;
        let mut rows: Vec<Vec<f64>> = vec![Vec::with_capacity(width); g.num_graphs];
        for v in 0..g.num_nodes() {
            rows[g.membership[v]].extend_from_slice(g.node_features.row(v));
        }
        let mut node_counts = vec![0usize; g.num_graphs];
        for &m in g.membership.iter() {
            node_counts[m] += 1;
        }
        for (gi, &c) in node_counts.iter().enumerate() {
            if c != self.nodes {
                return Err(AgentError::UnsupportedCapability(format!(
                    "flat observation encoder was built for {} nodes, graph {gi} has {c}",
                    self.nodes
                )));
            }
        }
        for e in 0..g.num_edges() {
            if g.src[e] != g.dst[e] {
                rows[g.membership[g.src[e]]].extend_from_slice(g.edge_features.row(e));
            }
        }
        for r in &rows {
            if r.len() != width {
                return Err(AgentError::UnsupportedCapability(format!(
                    "flat observation encoder was built for {} edges, got {}",
                    self.edges,
                    (r.len() - self.nodes * nf) / ef
                )));
            }
        }
        Ok(Tensor::from_vec(g.num_graphs, width, rows.concat()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Encoder {
    Graph(Embedder),
    Flat(FlatEncoder),
}

impl Encoder {
    /// `G x hidden` per-graph features.
    pub fn forward(&self, tape: &Tape<'_>, p: &Bound, g: &GraphTensors) -> Result<Var, AgentError> {
        match self {
            Encoder::Graph(e) => Ok(e.forward(tape, p, g).graphs),
            Encoder::Flat(f) => {
                let x = tape.constant(f.flatten(g)?);
                Ok(tape.relu(tape.dense(x, p[f.w], p[f.b])))
            }
        }
    }

    fn new(kind: &EncoderKind, config: &AgentConfig, params: &mut ParameterSet, prefix: &str) -> Self {
        match *kind {
            EncoderKind::Graph => Encoder::Graph(Embedder::new(config.embedder, params, prefix)),
            EncoderKind::Flat { nodes, edges } => {
                Encoder::Flat(FlatEncoder::new(params, prefix, nodes, edges, config.embedder.hidden))
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EncoderKind {
    Graph,
    Flat { nodes: usize, edges: usize },
}

/// `(graph, flat index)` of every entry the masks allow.
pub fn mask_picks(masks: &[ActionMask]) -> Picks {
    let mut out = Vec::new();
    for (g, m) in masks.iter().enumerate() {
        out.extend(m.valid_indices().map(|f| (g as u32, f as u32)));
    }
    Rc::from(out)
}

/// Nonzero entries of post-processed actions as `(graph, flat index)` plus values.
pub fn action_entries(actions: &[&SchedulingTensor]) -> (Picks, Tensor) {
    let mut picks = Vec::new();
    let mut values = Vec::new();
    for (g, x) in actions.iter().enumerate() {
        let m = x.mask();
        for i in 0..m.chain_length() {
            for j in 0..m.num_nodes() {
                for (k, &p) in x.row(i, j).iter().enumerate() {
                    if p != 0.0 {
                        picks.push((g as u32, m.flat_index(i, j, k) as u32));
                        values.push(p);
                    }
                }
            }
        }
    }
    (Rc::from(picks), Tensor::column_vector(values))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Actor {
    pub encoder: Encoder,
    pub w_embed: ParamId,
    pub w_mask: ParamId,
    pub b_hidden: ParamId,
    /// One row per flattened action entry.
    pub w_out: ParamId,
    pub b_out: ParamId,
}

impl Actor {
    pub fn new(config: &AgentConfig, kind: &EncoderKind, params: &mut ParameterSet) -> Self {
        let h = config.embedder.hidden;
        let m = config.action_len();
        let hidden = config.actor_hidden;
        let fan = h + m;
        Self {
            encoder: Encoder::new(kind, config, params, "actor"),
            w_embed: params.add_uniform("actor.fc1.w_embed", h, hidden, fan),
            w_mask: params.add_uniform("actor.fc1.w_mask", m, hidden, fan),
            b_hidden: params.add_uniform("actor.fc1.b", 1, hidden, fan),
            w_out: params.add_uniform("actor.out.w", m, hidden, hidden),
            b_out: params.add_uniform("actor.out.b", 1, m, hidden),
        }
    }

    /// Sigmoid scores at `picks` (`P x 1`).
    pub fn forward(&self, tape: &Tape<'_>, p: &Bound, g: &GraphTensors, picks: &Picks) -> Result<Var, AgentError> {
        let emb = self.encoder.forward(tape, p, g)?;
        let ones = tape.constant(Tensor::filled(picks.len(), 1, 1.0));
        let mask_part = tape.sparse_dense(ones, p[self.w_mask], picks.clone(), g.num_graphs);
        let pre = tape.add(tape.matmul(emb, p[self.w_embed]), mask_part);
        let hidden = tape.relu(tape.add_row(pre, p[self.b_hidden]));
        Ok(tape.sigmoid(tape.select_dense(hidden, p[self.w_out], p[self.b_out], picks.clone())))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Critic {
    pub encoder: Encoder,
    pub w_embed: ParamId,
    pub w_action: ParamId,
    pub w_mask: ParamId,
    pub b_hidden: ParamId,
    pub w_out: ParamId,
    pub b_out: ParamId,
}

impl Critic {
    pub fn new(config: &AgentConfig, kind: &EncoderKind, params: &mut ParameterSet) -> Self {
        let h = config.embedder.hidden;
        let m = config.action_len();
        let hidden = config.critic_hidden;
        let fan = h + 2 * m;
        Self {
            encoder: Encoder::new(kind, config, params, "critic"),
            w_embed: params.add_uniform("critic.fc1.w_embed", h, hidden, fan),
            w_action: params.add_uniform("critic.fc1.w_action", m, hidden, fan),
            w_mask: params.add_uniform("critic.fc1.w_mask", m, hidden, fan),
            b_hidden: params.add_uniform("critic.fc1.b", 1, hidden, fan),
            w_out: params.add_uniform("critic.out.w", hidden, 1, hidden),
            b_out: params.add_uniform("critic.out.b", 1, 1, hidden),
        }
    }

    /// `G x 1` values of the sparse actions `(pattern, values)`.
    pub fn forward(
        &self,
        tape: &Tape<'_>,
        p: &Bound,
        g: &GraphTensors,
        mask_picks: &Picks,
        action_pattern: &Picks,
        action_values: Var,
    ) -> Result<Var, AgentError> {
        let emb = self.encoder.forward(tape, p, g)?;
        let ones = tape.constant(Tensor::filled(mask_picks.len(), 1, 1.0));
        let mask_part = tape.sparse_dense(ones, p[self.w_mask], mask_picks.clone(), g.num_graphs);
        let action_part = tape.sparse_dense(action_values, p[self.w_action], action_pattern.clone(), g.num_graphs);
        let pre = tape.add(tape.add(tape.matmul(emb, p[self.w_embed]), mask_part), action_part);
        let hidden = tape.relu(tape.add_row(pre, p[self.b_hidden]));
        Ok(tape.dense(hidden, p[self.w_out], p[self.b_out]))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Losses {
    pub critic: f64,
    pub actor: f64,
}

/// Actor, critic, their targets and optimizers.
#[derive(Debug, Clone)]
pub struct DdpgAgent {
    config: AgentConfig,
    hp: Hyperparams,
    kind: EncoderKind,
    actor: Actor,
    critic: Critic,
    actor_params: ParameterSet,
    critic_params: ParameterSet,
    actor_target: ParameterSet,
    critic_target: ParameterSet,
    actor_opt: Adam,
    critic_opt: Adam,
    gradient_steps: u64,
    target_updates: u64,
}

impl DdpgAgent {
    /// Graph-embedding agent.
    pub fn new(config: AgentConfig, hp: Hyperparams, seed: u64) -> Self {
        Self::with_encoder(config, hp, EncoderKind::Graph, seed)
    }

    pub fn with_encoder(config: AgentConfig, hp: Hyperparams, kind: EncoderKind, seed: u64) -> Self {
        let mut actor_params = ParameterSet::new(gsc_core::traffic::derive_seed(seed, 1));
        let actor = Actor::new(&config, &kind, &mut actor_params);
        let mut critic_params = ParameterSet::new(gsc_core::traffic::derive_seed(seed, 2));
        let critic = Critic::new(&config, &kind, &mut critic_params);
        let adam = AdamConfig {
            lr: hp.lr,
            ..AdamConfig::default()
        };
        Self {
            config,
            hp,
            kind,
            actor,
            critic,
            actor_target: actor_params.clone(),
            critic_target: critic_params.clone(),
            actor_opt: Adam::new(adam, &actor_params),
            critic_opt: Adam::new(adam, &critic_params),
            actor_params,
            critic_params,
            gradient_steps: 0,
            target_updates: 0,
        }
    }

    pub fn config(&self) -> &AgentConfig {
        &self.config
    }

    pub fn hyperparams(&self) -> &Hyperparams {
        &self.hp
    }

    pub fn encoder_kind(&self) -> EncoderKind {
        self.kind
    }

    pub fn actor_params(&self) -> &ParameterSet {
        &self.actor_params
    }

    pub fn critic_params(&self) -> &ParameterSet {
        &self.critic_params
    }

    pub fn actor_target(&self) -> &ParameterSet {
        &self.actor_target
    }

    pub fn critic_target(&self) -> &ParameterSet {
        &self.critic_target
    }

    pub fn actor_params_mut(&mut self) -> &mut ParameterSet {
        &mut self.actor_params
    }

    pub fn critic_params_mut(&mut self) -> &mut ParameterSet {
        &mut self.critic_params
    }

    pub fn actor(&self) -> &Actor {
        &self.actor
    }

    pub fn critic(&self) -> &Critic {
        &self.critic
    }

    pub fn gradient_steps(&self) -> u64 {
        self.gradient_steps
    }

    pub fn target_updates(&self) -> u64 {
        self.target_updates
    }

    fn check_mask(&self, mask: &ActionMask) -> Result<(), AgentError> {
        if mask.chain_length() != self.config.chain_length || mask.v_max() != self.config.v_max {
            return Err(AgentError::Contract(format!(
                "mask shape {:?} does not match the agent's {}x{}x{}",
                mask.shape(),
                self.config.chain_length,
                self.config.v_max,
                self.config.v_max
            )));
        }
        Ok(())
    }

    /// Actor scores on the valid entries of `obs`, in mask order.
    fn actor_scores(&self, params: &ParameterSet, obs: &Observation) -> Result<(Picks, Tensor), AgentError> {
        self.check_mask(&obs.mask)?;
        let g = GraphTensors::from_observation(obs);
        let picks = mask_picks(&[obs.mask]);
        let tape = Tape::new();
        let p = params.bind(&tape, false);
        let out = self.actor.forward(&tape, &p, &g, &picks)?;
        let values = tape.value(out).clone();
        Ok((picks, values))
    }

    /// Raw action: sigmoid scores, plus clipped Gaussian noise when
    /// exploring, multiplied by the mask.
    pub fn act<R: Rng + ?Sized>(&self, obs: &Observation, explore: bool, rng: &mut R) -> Result<ActionTensor, AgentError> {
        let (picks, values) = self.actor_scores(&self.actor_params, obs)?;
        let mut action = ActionTensor::zeros(self.config.chain_length, self.config.v_max);
        let noise = Normal::new(self.hp.noise_mean, self.hp.noise_std)
            .map_err(|e| AgentError::Contract(format!("noise distribution: {e}")))?;
        let slot = action.as_mut_slice();
        for (&(_, f), &v) in picks.iter().zip(values.as_slice()) {
            let v = if explore { (v + noise.sample(rng)).clamp(0.0, 1.0) } else { v };
            slot[f as usize] = v;
        }
        Ok(action)
    }

    /// Q of a raw action (the masked part of it) in `obs`.
    pub fn critic_value(&self, obs: &Observation, action: &ActionTensor) -> Result<f64, AgentError> {
        self.check_mask(&obs.mask)?;
        action
            .check_shape(&obs.mask)
            .map_err(|e| AgentError::Contract(e.to_string()))?;
        let g = GraphTensors::from_observation(obs);
        let picks = mask_picks(&[obs.mask]);
        let values: Vec<f64> = picks.iter().map(|&(_, f)| action.as_slice()[f as usize]).collect();
        let tape = Tape::new();
        let p = self.critic_params.bind(&tape, false);
        let v = tape.constant(Tensor::column_vector(values));
        let q = self.critic.forward(&tape, &p, &g, &picks, &picks, v)?;
        let out = tape.value(q).item();
        Ok(out)
    }

    /// Bootstrapped critic targets `r + gamma (1 - done) Q'(s', mu'(s'))`.
    pub fn critic_targets(&self, batch: &TransitionBatch<'_>) -> Result<Vec<f64>, AgentError> {
        let g = GraphTensors::from_batch(&batch.next_obs);
        let picks = mask_picks(&batch.next_obs.masks);
        let tape = Tape::new();
        let pa = self.actor_target.bind(&tape, false);
        let pc = self.critic_target.bind(&tape, false);
        let mu = self.actor.forward(&tape, &pa, &g, &picks)?;
        let q = self.critic.forward(&tape, &pc, &g, &picks, &picks, mu)?;
        let q = tape.value(q);
        Ok(batch
            .rewards
            .iter()
            .zip(&batch.dones)
            .zip(q.as_slice())
            .map(|((&r, &d), &qn)| r + if d { 0.0 } else { self.hp.gamma * qn })
            .collect())
    }

    fn check_batch(&self, batch: &TransitionBatch<'_>) -> Result<(), AgentError> {
        if batch.is_empty() {
            return Err(AgentError::Contract("empty batch".into()));
        }
        for (i, (a, m)) in batch.actions.iter().zip(&batch.obs.masks).enumerate() {
            self.check_mask(m)?;
            if a.mask() != m {
                return Err(AgentError::Contract(format!(
                    "transition {i}: action tensor shape {:?} for an observation with {} nodes",
                    a.mask().shape(),
                    m.num_nodes()
                )));
            }
        }
        for m in &batch.next_obs.masks {
            self.check_mask(m)?;
        }
        Ok(())
    }

    /// Mean squared error of the critic against `targets`, and its gradients.
    pub fn critic_loss(&self, batch: &TransitionBatch<'_>, targets: &[f64]) -> Result<(f64, Vec<Tensor>), AgentError> {
        let g = GraphTensors::from_batch(&batch.obs);
        let picks = mask_picks(&batch.obs.masks);
        let (pattern, values) = action_entries(&batch.actions);
        let tape = Tape::new();
        let p = self.critic_params.bind(&tape, true);
        let v = tape.constant(values);
        let q = self.critic.forward(&tape, &p, &g, &picks, &pattern, v)?;
        let y = tape.constant(Tensor::column_vector(targets.to_vec()));
        let loss = tape.mean(tape.square(tape.sub(q, y)));
        let value = tape.value(loss).item();
        let mut grads = tape.backward(loss)?;
        Ok((value, self.critic_params.gradients(&p, &mut grads)))
    }

    /// `-mean Q(s, mu(s))` with the critic held fixed, and actor gradients.
    pub fn actor_loss(&self, batch: &TransitionBatch<'_>) -> Result<(f64, Vec<Tensor>), AgentError> {
        let g = GraphTensors::from_batch(&batch.obs);
        let picks = mask_picks(&batch.obs.masks);
        let tape = Tape::new();
        let pa = self.actor_params.bind(&tape, true);
        let pc = self.critic_params.bind(&tape, false);
        let mu = self.actor.forward(&tape, &pa, &g, &picks)?;
        let q = self.critic.forward(&tape, &pc, &g, &picks, &picks, mu)?;
        let loss = tape.scale(tape.mean(q), -1.0);
        let value = tape.value(loss).item();
        let mut grads = tape.backward(loss)?;
        Ok((value, self.actor_params.gradients(&pa, &mut grads)))
    }

    /// One gradient step: critic, then actor, then soft target updates.
    pub fn update(&mut self, batch: &TransitionBatch<'_>) -> Result<Losses, AgentError> {
        self.check_batch(batch)?;
        let targets = self.critic_targets(batch)?;
        let (critic, grads) = self.critic_loss(batch, &targets)?;
        self.critic_opt.step(&mut self.critic_params, &grads);
        let (actor, grads) = self.actor_loss(batch)?;
        self.actor_opt.step(&mut self.actor_params, &grads);
        self.soft_update()?;
        self.gradient_steps += 1;
        Ok(Losses { critic, actor })
    }

    pub fn soft_update(&mut self) -> Result<(), AgentError> {
        self.actor_target.soft_update_from(&self.actor_params, self.hp.tau)?;
        self.critic_target.soft_update_from(&self.critic_params, self.hp.tau)?;
        self.target_updates += 1;
        Ok(())
    }

    pub fn save(&self, dir: impl AsRef<Path>) -> Result<(), AgentError> {
        let mut meta = self.hp.entries();
        let c = &self.config;
        meta.extend(
            [
                ("config.hidden", c.embedder.hidden),
                ("config.iterations", c.embedder.iterations),
                ("config.node_features", c.embedder.node_features),
                ("config.edge_features", c.embedder.edge_features),
                ("config.actor_hidden", c.actor_hidden),
                ("config.critic_hidden", c.critic_hidden),
                ("config.chain_length", c.chain_length),
                ("config.v_max", c.v_max),
            ]
            .into_iter()
            .map(|(k, v)| (k.to_string(), v.to_string())),
        );
        meta.push((
            "encoder".into(),
            match self.kind {
                EncoderKind::Graph => "graph".into(),
                EncoderKind::Flat { nodes, edges } => format!("flat {nodes} {edges}"),
            },
        ));
        meta.push(("gradient_steps".into(), self.gradient_steps.to_string()));
        meta.push(("target_updates".into(), self.target_updates.to_string()));
        save_checkpoint(
            dir,
            &[
                ("actor", &self.actor_params),
                ("critic", &self.critic_params),
                ("actor_target", &self.actor_target),
                ("critic_target", &self.critic_target),
            ],
            &meta,
        )?;
        Ok(())
    }

    /// Rebuilds an agent from [`DdpgAgent::save`] output. Optimizer moments
    /// are not stored and restart from zero.
    pub fn load(dir: impl AsRef<Path>) -> Result<Self, AgentError> {
        let ck = load_checkpoint(dir)?;
        let bad = |k: &str| AgentError::Contract(format!("checkpoint metadata {k} missing or malformed"));
        let num = |k: &str| -> Result<f64, AgentError> { ck.meta(k).and_then(|v| v.parse().ok()).ok_or_else(|| bad(k)) };
        let hp = Hyperparams {
            gamma: num("hp.gamma")?,
            lr: num("hp.lr")?,
            tau: num("hp.tau")?,
            noise_mean: num("hp.noise_mean")?,
            noise_std: num("hp.noise_std")?,
            threshold: num("hp.threshold")?,
            warmup: num("hp.warmup")? as usize,
            batch_size: num("hp.batch_size")? as usize,
            buffer_capacity: num("hp.buffer_capacity")? as usize,
        };
        let config = AgentConfig {
            embedder: EmbedderConfig {
                node_features: num("config.node_features")? as usize,
                edge_features: num("config.edge_features")? as usize,
                hidden: num("config.hidden")? as usize,
                iterations: num("config.iterations")? as usize,
            },
            actor_hidden: num("config.actor_hidden")? as usize,
            critic_hidden: num("config.critic_hidden")? as usize,
            chain_length: num("config.chain_length")? as usize,
            v_max: num("config.v_max")? as usize,
        };
        let kind = match ck.meta("encoder").map(|s| s.split_whitespace().collect::<Vec<_>>()) {
            Some(w) if w == ["graph"] => EncoderKind::Graph,
            Some(w) if w.len() == 3 && w[0] == "flat" => EncoderKind::Flat {
                nodes: w[1].parse().map_err(|_| bad("encoder"))?,
                edges: w[2].parse().map_err(|_| bad("encoder"))?,
            },
            _ => return Err(bad("encoder")),
        };
        let mut agent = Self::with_encoder(config, hp, kind, ck.set("actor")?.seed());
        for (name, slot) in [
            ("actor", &mut agent.actor_params),
            ("critic", &mut agent.critic_params),
            ("actor_target", &mut agent.actor_target),
            ("critic_target", &mut agent.critic_target),
        ] {
            let loaded = ck.set(name)?;
            slot.check_layout(loaded)?;
            *slot = loaded.clone();
        }
        agent.gradient_steps = num("gradient_steps")? as u64;
        agent.target_updates = num("target_updates")? as u64;
        Ok(agent)
    }
}
