//! Dense loop re-implementation of one GATv2 layer.

use gsc_nn::embedder::{GatLayer, GraphTensors};
use gsc_nn::{ParameterSet, Tensor};

fn leaky(x: f64, slope: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        slope * x
    }
}

/// Straight loops over the stacked weight `[W_dst; W_src; W_edge]` applied
/// to `[h_v | h_w | e_vw]`, one softmax per target node.
pub fn dense_gat(params: &ParameterSet, layer: &GatLayer, h: &Tensor, g: &GraphTensors) -> (Vec<f64>, Tensor) {
    let (wd, ws, we) = (params.get(layer.w_dst), params.get(layer.w_src), params.get(layer.w_edge));
    let (a, wo) = (params.get(layer.a), params.get(layer.w_out));
    let in_dim = h.cols();
    let ed = g.edge_features.cols();
    let out = wd.cols();
    let mut stacked = Tensor::zeros(2 * in_dim + ed, out);
    for c in 0..out {
        for r in 0..in_dim {
            stacked.set(r, c, wd.get(r, c));
            stacked.set(in_dim + r, c, ws.get(r, c));
        }
        for r in 0..ed {
            stacked.set(2 * in_dim + r, c, we.get(r, c));
        }
    }
    let n = h.rows();
    let m = g.num_edges();
    let mut score = vec![0.0; m];
    for e in 0..m {
        let mut cat = h.row(g.dst[e]).to_vec();
        cat.extend_from_slice(h.row(g.src[e]));
        cat.extend_from_slice(g.edge_features.row(e));
        for c in 0..out {
            let z: f64 = (0..cat.len()).map(|r| cat[r] * stacked.get(r, c)).sum();
            score[e] += a.get(c, 0) * leaky(z, layer.negative_slope);
        }
    }
    let mut alpha = vec![0.0; m];
    let mut next = Tensor::zeros(n, out);
    for v in 0..n {
        let incoming: Vec<usize> = (0..m).filter(|&e| g.dst[e] == v).collect();
        let top = incoming.iter().map(|&e| score[e]).fold(f64::NEG_INFINITY, f64::max);
        let z: f64 = incoming.iter().map(|&e| (score[e] - top).exp()).sum();
        for &e in &incoming {
            alpha[e] = (score[e] - top).exp() / z;
            let w = g.src[e];
            for c in 0..out {
                let val: f64 = (0..in_dim).map(|r| h.get(w, r) * wo.get(r, c)).sum();
                next.set(v, c, next.get(v, c) + alpha[e] * val);
            }
        }
    }
    (alpha, next)
}
