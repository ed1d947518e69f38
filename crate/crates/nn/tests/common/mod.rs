#![allow(dead_code)]

pub mod oracle;

use gsc_core::environment::{Observation, EDGE_FEATURES, NODE_FEATURES};
use gsc_core::topology::ActionMask;
use rand::seq::SliceRandom;
use rand::Rng;

/// Random features in [-1, 1]; each undirected pair appears in both
/// directions with probability `density`.
pub fn random_observation<R: Rng>(rng: &mut R, n: usize, density: f64, chain: usize, v_max: usize) -> Observation {
    let mut src = Vec::new();
    let mut dst = Vec::new();
    for a in 0..n {
        for b in a + 1..n {
            if rng.random_bool(density) {
                src.extend([a, b]);
                dst.extend([b, a]);
            }
        }
    }
    Observation {
        node_features: (0..n * NODE_FEATURES).map(|_| rng.random_range(-1.0..1.0)).collect(),
        edge_features: (0..src.len() * EDGE_FEATURES).map(|_| rng.random_range(-1.0..1.0)).collect(),
        edge_src: src,
        edge_dst: dst,
        mask: ActionMask::new(n, chain, v_max),
    }
}

pub fn path_observation(n: usize, chain: usize, v_max: usize) -> Observation {
    let mut src = Vec::new();
    let mut dst = Vec::new();
    for a in 1..n {
        src.extend([a - 1, a]);
        dst.extend([a, a - 1]);
    }
    Observation {
        node_features: (0..n * NODE_FEATURES).map(|i| (i as f64 * 0.37).sin()).collect(),
        edge_features: (0..src.len() * EDGE_FEATURES).map(|i| (i as f64 * 0.91).cos()).collect(),
        edge_src: src,
        edge_dst: dst,
        mask: ActionMask::new(n, chain, v_max),
    }
}

/// Node `v` becomes `perm[v]`; edge order is kept.
pub fn permute_observation(obs: &Observation, perm: &[usize]) -> Observation {
    let n = obs.num_nodes();
    let mut node_features = vec![0.0; obs.node_features.len()];
    for v in 0..n {
        node_features[perm[v] * NODE_FEATURES..(perm[v] + 1) * NODE_FEATURES].copy_from_slice(obs.node_row(v));
    }
    Observation {
        node_features,
        edge_features: obs.edge_features.clone(),
        edge_src: obs.edge_src.iter().map(|&s| perm[s]).collect(),
        edge_dst: obs.edge_dst.iter().map(|&d| perm[d]).collect(),
        mask: obs.mask,
    }
}

pub fn random_permutation<R: Rng>(rng: &mut R, n: usize) -> Vec<usize> {
    let mut p: Vec<usize> = (0..n).collect();
    p.shuffle(rng);
    p
}
