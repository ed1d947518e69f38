//! Central finite-difference verification of tape gradients.

use gsc_core::environment::{Observation, EDGE_FEATURES, NODE_FEATURES};
use gsc_core::topology::ActionMask;

use crate::agent::{mask_picks, Actor, AgentConfig, Critic, EncoderKind};
use crate::embedder::{Embedder, EmbedderConfig, GatLayer, GraphTensors};
use crate::params::{Bound, ParameterSet};
use crate::tape::{Tape, Var};
use crate::tensor::Tensor;

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub checked: usize,
    pub max_rel_error: f64,
    /// Coordinates skipped because the loss has a kink within `h` of them
    /// (one-sided differences disagree and the central one is off).
    pub kinks: usize,
    /// Largest analytic gradient magnitude seen, to rule out vacuous checks.
    pub max_abs_grad: f64,
}

impl GradCheckReport {
    pub fn passes(&self, tol: f64) -> bool {
        self.checked > 0 && self.max_rel_error < tol
    }
}

/// `|a - n| / max(|a|, |n|, 1e-6)`
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-6)
}

/// Compares analytic gradients of `loss` w.r.t. every parameter in `params`
/// with central differences of step `h`. At most `per_tensor` coordinates of
/// each tensor are checked, spread evenly.
pub fn check_gradients<F>(params: &ParameterSet, h: f64, per_tensor: usize, loss: F) -> GradCheckReport
where
    F: for<'p> Fn(&Tape<'p>, &Bound) -> Var,
{
    let analytic = {
        let tape = Tape::new();
        let bound = params.bind(&tape, true);
        let l = loss(&tape, &bound);
        let mut grads = tape.backward(l).expect("scalar loss");
        params.gradients(&bound, &mut grads)
    };
    let eval = |p: &ParameterSet| -> f64 {
        let tape = Tape::new();
        let bound = p.bind(&tape, false);
        let l = loss(&tape, &bound);
        let v = tape.value(l).item();
        v
    };
    let f0 = eval(params);
    let mut work = params.clone();
    let mut report = GradCheckReport {
        checked: 0,
        max_rel_error: 0.0,
        kinks: 0,
        max_abs_grad: 0.0,
    };
    for (pi, id) in params.ids().enumerate() {
        let n = params.get(id).len();
        let stride = n.div_ceil(per_tensor.max(1)).max(1);
        for c in (0..n).step_by(stride) {
            let orig = params.get(id).as_slice()[c];
            work.get_mut(id).as_mut_slice()[c] = orig + h;
            let fp = eval(&work);
            work.get_mut(id).as_mut_slice()[c] = orig - h;
            let fm = eval(&work);
            work.get_mut(id).as_mut_slice()[c] = orig;
            let numeric = (fp - fm) / (2.0 * h);
            let a = analytic[pi].as_slice()[c];
            let err = relative_error(a, numeric);
            let (fwd, bwd) = ((fp - f0) / h, (f0 - fm) / h);
            if err >= 1e-4 && relative_error(fwd, bwd) > 1e-2 {
                report.kinks += 1;
                continue;
            }
            report.checked += 1;
            report.max_rel_error = report.max_rel_error.max(err);
            report.max_abs_grad = report.max_abs_grad.max(a.abs());
        }
    }
    report
}

/// Finite-difference step used by [`suite`].
pub const SUITE_STEP: f64 = 1e-5;

/// Checks the dense layer, one GATv2 layer, a GATv2 + dense composite, the
/// full embedder, and the actor and critic heads on small deterministic
/// inputs.
pub fn suite() -> Vec<(&'static str, GradCheckReport)> {
    let obs = probe_observation(4, 2, 4);
    let g = GraphTensors::from_observation(&obs);
    let weights = |n: usize, cols: usize| Tensor::from_vec(n, cols, (0..n * cols).map(|i| (i as f64 * 0.77 + 0.1).sin()).collect());
    let mut out = Vec::new();

    let mut p = ParameterSet::new(1);
    let w = p.add_uniform("w", 3, 5, 3);
    let b = p.add_uniform("b", 1, 5, 3);
    let c = weights(4, 5);
    out.push((
        "dense",
        check_gradients(&p, SUITE_STEP, 64, |tape, bound| {
            let x = tape.constant(g.node_features.clone());
            let y = tape.dense(x, bound[w], bound[b]);
            tape.sum(tape.mul(y, tape.constant(c.clone())))
        }),
    ));

    let mut p = ParameterSet::new(2);
    let layer = GatLayer::new(&mut p, "gat", 3, 5, 2);
    let c = weights(4, 5);
    out.push((
        "gatv2",
        check_gradients(&p, SUITE_STEP, 64, |tape, bound| {
            let x = tape.constant(g.node_features.clone());
            let e = tape.constant(g.edge_features.clone());
            let y = layer.forward(tape, bound, x, e, &g);
            tape.sum(tape.mul(y, tape.constant(c.clone())))
        }),
    ));

    let mut p = ParameterSet::new(3);
    let layer = GatLayer::new(&mut p, "gat", 3, 5, 2);
    let w = p.add_uniform("dense.w", 5, 3, 5);
    let b = p.add_uniform("dense.b", 1, 3, 5);
    out.push((
        "gatv2+dense",
        check_gradients(&p, SUITE_STEP, 64, |tape, bound| {
            let x = tape.constant(g.node_features.clone());
            let e = tape.constant(g.edge_features.clone());
            let y = tape.relu(layer.forward(tape, bound, x, e, &g));
            let z = tape.sigmoid(tape.dense(y, bound[w], bound[b]));
            tape.mean(tape.square(z))
        }),
    ));

    let cfg = EmbedderConfig {
        hidden: 6,
        iterations: 2,
        ..EmbedderConfig::default()
    };
    let mut p = ParameterSet::new(4);
    let emb = Embedder::new(cfg, &mut p, "e");
    let c = weights(1, 6);
    out.push((
        "embedder",
        check_gradients(&p, SUITE_STEP, 48, |tape, bound| {
            let y = emb.forward(tape, bound, &g).graphs;
            tape.sum(tape.mul(y, tape.constant(c.clone())))
        }),
    ));

    let config = AgentConfig {
        embedder: cfg,
        actor_hidden: 8,
        critic_hidden: 6,
        chain_length: 2,
        v_max: 4,
    };
    let picks = mask_picks(&[obs.mask]);
    let mut p = ParameterSet::new(5);
    let actor = Actor::new(&config, &EncoderKind::Graph, &mut p);
    let c = weights(picks.len(), 1);
    out.push((
        "actor",
        check_gradients(&p, SUITE_STEP, 48, |tape, bound| {
            let y = actor.forward(tape, bound, &g, &picks).expect("actor forward");
            tape.sum(tape.mul(y, tape.constant(c.clone())))
        }),
    ));

    let mut p = ParameterSet::new(6);
    let critic = Critic::new(&config, &EncoderKind::Graph, &mut p);
    let action = weights(picks.len(), 1).map(|v| 0.5 + 0.5 * v);
    out.push((
        "critic",
        check_gradients(&p, SUITE_STEP, 48, |tape, bound| {
            let a = tape.constant(action.clone());
            let q = critic.forward(tape, bound, &g, &picks, &picks, a).expect("critic forward");
            tape.sum(q)
        }),
    ));
    out
}

/// A path graph with fixed, non-symmetric features.
pub fn probe_observation(n: usize, chain: usize, v_max: usize) -> Observation {
    let mut src = Vec::new();
    let mut dst = Vec::new();
    for a in 1..n {
        src.extend([a - 1, a]);
        dst.extend([a, a - 1]);
    }
    Observation {
        node_features: (0..n * NODE_FEATURES).map(|i| (i as f64 * 0.61 + 0.2).sin()).collect(),
        edge_features: (0..src.len() * EDGE_FEATURES).map(|i| (i as f64 * 1.37).cos()).collect(),
        edge_src: src,
        edge_dst: dst,
        mask: ActionMask::new(n, chain, v_max),
    }
}
