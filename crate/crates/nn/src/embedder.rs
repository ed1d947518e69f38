//! GATv2 message passing and the encode-process-decode graph embedder.
//!
//! For a directed edge `w -> v` with features `e_vw`, a layer scores
//! `s_vw = a . LeakyReLU(W [h_v | h_w | e_vw])`, normalizes the scores of
//! each node's incoming edges (its own self-loop included) with a softmax,
//! and returns `h'_v = sum_w alpha_vw W_out h_w`. `W` is stored as three
//! blocks acting on the target, source and edge parts; the sum of the three
//! products equals `W` applied to the concatenation.


use gsc_core::environment::{Observation, EDGE_FEATURES, NODE_FEATURES};
use gsc_core::replay::GraphBatch;

use crate::params::{Bound, ParamId, ParameterSet};
use crate::tape::{Index, Tape, Var};
use crate::tensor::Tensor;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum GraphError {
    #[error("node {0} has no self-loop")]
    MissingSelfLoop(usize),
    #[error("node {0} has more than one self-loop")]
    DuplicateSelfLoop(usize),
    #[error("edge {edge} references node {node} outside 0..{nodes}")]
    EdgeOutOfRange { edge: usize, node: usize, nodes: usize },
    #[error("{0}")]
    Shape(String),
}

/// Stacked graphs in the form message passing consumes: every node carries
/// exactly one self-loop edge with zero features.
#[derive(Debug, Clone)]
pub struct GraphTensors {
    pub node_features: Tensor,
    pub edge_features: Tensor,
    pub src: Index,
    pub dst: Index,
    pub membership: Index,
    pub num_graphs: usize,
}

impl GraphTensors {
    /// Validates an edge list that already contains the self-loops.
    pub fn new(
        node_features: Tensor,
        edge_features: Tensor,
        src: Vec<usize>,
        dst: Vec<usize>,
        membership: Vec<usize>,
        num_graphs: usize,
    ) -> Result<Self, GraphError> {
        let n = node_features.rows();
        if src.len() != dst.len() || edge_features.rows() != src.len() {
            return Err(GraphError::Shape("edge list and edge features disagree".into()));
        }
        if membership.len() != n || membership.iter().any(|&g| g >= num_graphs) {
            return Err(GraphError::Shape("membership must assign every node to a graph".into()));
        }
        let mut loops = vec![0usize; n];
        for (e, (&s, &d)) in src.iter().zip(&dst).enumerate() {
            for node in [s, d] {
                if node >= n {
                    return Err(GraphError::EdgeOutOfRange { edge: e, node, nodes: n });
                }
            }
            if membership[s] != membership[d] {
                return Err(GraphError::Shape(format!("edge {e} joins two graphs")));
            }
            if s == d {
                loops[s] += 1;
            }
        }
        for (v, &c) in loops.iter().enumerate() {
            match c {
                0 => return Err(GraphError::MissingSelfLoop(v)),
                1 => {}
                _ => return Err(GraphError::DuplicateSelfLoop(v)),
            }
        }
        Ok(Self {
            node_features,
            edge_features,
            src: src.into(),
            dst: dst.into(),
            membership: membership.into(),
            num_graphs,
        })
    }

    /// Appends one zero-feature self-loop per node to a collated batch.
    pub fn from_batch(batch: &GraphBatch) -> Self {
        let n = batch.num_nodes();
        let e = batch.num_edges();
        let mut edge_features = batch.edge_features.clone();
        edge_features.resize((e + n) * EDGE_FEATURES, 0.0);
        let mut src = batch.edge_src.clone();
        let mut dst = batch.edge_dst.clone();
        src.extend(0..n);
        dst.extend(0..n);
        Self::new(
            Tensor::from_vec(n, NODE_FEATURES, batch.node_features.clone()),
            Tensor::from_vec(e + n, EDGE_FEATURES, edge_features),
            src,
            dst,
            batch.membership.clone(),
            batch.num_graphs(),
        )
        .expect("observations contain no self-loops of their own")
    }

    pub fn from_observation(obs: &Observation) -> Self {
        Self::from_batch(&gsc_core::replay::collate([obs]))
    }

    pub fn num_nodes(&self) -> usize {
        self.node_features.rows()
    }

    pub fn num_edges(&self) -> usize {
        self.src.len()
    }
}

/// Parameters of one GATv2 layer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GatLayer {
    pub w_dst: ParamId,
    pub w_src: ParamId,
    pub w_edge: ParamId,
    pub a: ParamId,
    pub w_out: ParamId,
    pub negative_slope: f64,
}

impl GatLayer {
    pub fn new(params: &mut ParameterSet, prefix: &str, in_dim: usize, out_dim: usize, edge_dim: usize) -> Self {
        let fan = 2 * in_dim + edge_dim;
        Self {
            w_dst: params.add_uniform(format!("{prefix}.w_dst"), in_dim, out_dim, fan),
            w_src: params.add_uniform(format!("{prefix}.w_src"), in_dim, out_dim, fan),
            w_edge: params.add_uniform(format!("{prefix}.w_edge"), edge_dim, out_dim, fan),
            a: params.add_uniform(format!("{prefix}.a"), out_dim, 1, out_dim),
            w_out: params.add_uniform(format!("{prefix}.w_out"), in_dim, out_dim, in_dim),
            negative_slope: 0.2,
        }
    }

    /// Attention coefficients (`E x 1`) and updated node states (`N x out`).
    pub fn forward_with_attention(&self, tape: &Tape<'_>, p: &Bound, h: Var, edges: Var, g: &GraphTensors) -> (Var, Var) {
        let n = g.num_nodes();
        let z_dst = tape.matmul(h, p[self.w_dst]);
        let z_src = tape.matmul(h, p[self.w_src]);
        let z_edge = tape.matmul(edges, p[self.w_edge]);
        let pre = tape.add(
            tape.add(tape.gather(z_dst, g.dst.clone()), tape.gather(z_src, g.src.clone())),
            z_edge,
        );
        let scores = tape.matmul(tape.leaky_relu(pre, self.negative_slope), p[self.a]);
        let alpha = tape.segment_softmax(scores, g.dst.clone(), n);
        let values = tape.matmul(h, p[self.w_out]);
        let messages = tape.row_scale(tape.gather(values, g.src.clone()), alpha);
        (alpha, tape.scatter_sum(messages, g.dst.clone(), n))
    }

    pub fn forward(&self, tape: &Tape<'_>, p: &Bound, h: Var, edges: Var, g: &GraphTensors) -> Var {
        self.forward_with_attention(tape, p, h, edges, g).1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EmbedderConfig {
    pub node_features: usize,
    pub edge_features: usize,
    pub hidden: usize,
    /// Applications of the shared processor layer.
    pub iterations: usize,
}

impl Default for EmbedderConfig {
    fn default() -> Self {
        Self {
            node_features: NODE_FEATURES,
            edge_features: EDGE_FEATURES,
            hidden: 64,
            iterations: 4,
        }
    }
}

/// Node embeddings (`N x hidden`) and their per-graph means (`G x hidden`).
#[derive(Debug, Clone, Copy)]
pub struct Embedding {
    pub nodes: Var,
    pub graphs: Var,
}

/// Encoder GATv2, one processor GATv2 repeated `iterations` times, dense
/// decoder, mean pooling. ReLU follows every layer.
#[derive(Debug, Clone, PartialEq)]
pub struct Embedder {
    pub config: EmbedderConfig,
    pub encoder: GatLayer,
    pub processor: GatLayer,
    pub decoder_w: ParamId,
    pub decoder_b: ParamId,
}

impl Embedder {
    pub fn new(config: EmbedderConfig, params: &mut ParameterSet, prefix: &str) -> Self {
        let h = config.hidden;
        Self {
            config,
            encoder: GatLayer::new(params, &format!("{prefix}.encoder"), config.node_features, h, config.edge_features),
            processor: GatLayer::new(params, &format!("{prefix}.processor"), h, h, config.edge_features),
            decoder_w: params.add_uniform(format!("{prefix}.decoder.w"), h, h, h),
            decoder_b: params.add_uniform(format!("{prefix}.decoder.b"), 1, h, h),
        }
    }

    pub fn forward(&self, tape: &Tape<'_>, p: &Bound, g: &GraphTensors) -> Embedding {
        // graph inputs are cloned onto the tape; they are small next to the weights
        let x = tape.constant(g.node_features.clone());
        let e = tape.constant(g.edge_features.clone());
        let mut h = tape.relu(self.encoder.forward(tape, p, x, e, g));
        for _ in 0..self.config.iterations {
            h = tape.relu(self.processor.forward(tape, p, h, e, g));
        }
        let nodes = tape.relu(tape.dense(h, p[self.decoder_w], p[self.decoder_b]));
        let graphs = tape.segment_mean(nodes, g.membership.clone(), g.num_graphs);
        Embedding { nodes, graphs }
    }

    /// Numeric node and graph embeddings.
    pub fn embed(&self, params: &ParameterSet, g: &GraphTensors) -> (Tensor, Tensor) {
        let tape = Tape::new();
        let bound = params.bind(&tape, false);
        let out = self.forward(&tape, &bound, g);
        let nodes = tape.value(out.nodes).clone();
        let graphs = tape.value(out.graphs).clone();
        (nodes, graphs)
    }
}
