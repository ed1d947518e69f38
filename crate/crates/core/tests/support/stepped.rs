//! Brute-force time-stepped reference simulator for small networks.
//!
//! Time advances in ticks of 0.01. Usage is kept per tick in plain arrays and
//! routes are found by enumerating simple paths, so nothing is shared with the
//! event engine except the per-hop uniform draw.

#![allow(dead_code)]

use gsc_core::simulator::{hop_uniform, post_process, ActionTensor, SchedulingTensor};
use gsc_core::topology::{ActionMask, LinkSpec, NetworkTopology, NodeSpec};
use gsc_core::traffic::{Flow, FunctionSpec, ServiceChain};
use rand::Rng;

pub const DT: f64 = 0.01;

fn ticks(t: f64) -> usize {
    let k = (t / DT).round();
    assert!((k * DT - t).abs() < 1e-9, "{t} is not on the tick grid");
    k as usize
}

#[derive(Debug, Clone)]
pub struct SmallScenario {
    pub topology: NetworkTopology,
    pub chain: ServiceChain,
    pub x: SchedulingTensor,
    pub flows: Vec<Flow>,
    pub seed: u64,
    pub horizon: f64,
}

/// Lowest-delay simple path from `s` to `d`; the lexicographically smallest
/// node sequence among ties.
fn route(topo: &NetworkTopology, s: usize, d: usize) -> Vec<usize> {
    fn walk(topo: &NetworkTopology, path: &mut Vec<usize>, d: usize, best: &mut Option<(f64, Vec<usize>)>, delay: f64) {
        let at = *path.last().unwrap();
        if at == d {
            let better = match best {
                None => true,
                Some((bd, bp)) => delay < *bd - 1e-12 || ((delay - *bd).abs() <= 1e-12 && *path < *bp),
            };
            if better {
                *best = Some((delay, path.clone()));
            }
            return;
        }
        for next in 0..topo.num_nodes() {
            if path.contains(&next) {
                continue;
            }
            if let Some(l) = topo.link_between(at, next) {
                path.push(next);
                walk(topo, path, d, best, delay + topo.links()[l].delay);
                path.pop();
            }
        }
    }
    let mut best = None;
    walk(topo, &mut vec![s], d, &mut best, 0.0);
    best.expect("connected").1
}

/// Successful and dropped counts over `[0, horizon)`.
pub fn run_stepped(sc: &SmallScenario) -> (u64, u64) {
    let topo = &sc.topology;
    let n = topo.num_nodes();
    let end = ticks(sc.horizon);
    let span = end + 100_000;
    let mut node_use = vec![vec![0.0f64; span]; n];
    let mut link_use = vec![vec![0.0f64; span]; topo.num_links()];

    // (next decision tick, function index, node, start tick) per flow
    let mut state: Vec<Option<(usize, usize, usize)>> =
        sc.flows.iter().map(|f| Some((ticks(f.arrival_time), 0, f.src))).collect();
    let mut done_at: Vec<Option<usize>> = vec![None; sc.flows.len()];
    let (mut succ, mut drop) = (0u64, 0u64);

    for t in 0..end {
        for (idx, f) in sc.flows.iter().enumerate() {
            if let Some(c) = done_at[idx] {
                if c == t {
                    succ += 1;
                    done_at[idx] = None;
                }
            }
            let Some((due, i, at)) = state[idx] else { continue };
            if due != t {
                continue;
            }
            state[idx] = None;
            let row = sc.x.row(i, at);
            let u = hop_uniform(sc.seed, f.flow_id, i);
            let total: f64 = row.iter().sum();
            let mut dest = None;
            let mut cum = 0.0;
            for (k, &p) in row.iter().enumerate() {
                if p > 0.0 {
                    cum += p;
                    dest = Some(k);
                    if u * total < cum {
                        break;
                    }
                }
            }
            let Some(k) = dest.filter(|_| total > 0.0) else {
                drop += 1;
                continue;
            };
            let path = route(topo, at, k);
            let dur = ticks(f.duration);
            let mut enter = t;
            let mut slots = Vec::new();
            let mut ok = true;
            for w in path.windows(2) {
                let l = topo.link_between(w[0], w[1]).unwrap();
                let bw = topo.links()[l].bandwidth;
                if (enter..enter + dur).any(|s| link_use[l][s] + f.rate > bw + 1e-9) {
                    ok = false;
                    break;
                }
                slots.push((l, enter));
                enter += ticks(topo.links()[l].delay);
            }
            let func = &sc.chain.functions[i];
            let demand = f.rate * func.demand_factor;
            if ok && (enter..enter + dur).any(|s| node_use[k][s] + demand > topo.capacity(k) + 1e-9) {
                ok = false;
            }
            if !ok {
                drop += 1;
                continue;
            }
            for (l, s0) in slots {
                for s in s0..s0 + dur {
                    link_use[l][s] += f.rate;
                }
            }
            for s in enter..enter + dur {
                node_use[k][s] += demand;
            }
            let ready = enter + ticks(func.processing_delay);
            if i + 1 == sc.chain.len() {
                done_at[idx] = Some(ready);
            } else {
                state[idx] = Some((ready, i + 1, k));
            }
        }
    }
    (succ, drop)
}

fn quarter<R: Rng>(rng: &mut R, lo: u32, hi: u32) -> f64 {
    rng.random_range(lo..=hi) as f64 * 0.25
}

/// Random connected network of 1..=3 nodes with up to 10 flows; every time
/// and amount is a multiple of 0.25.
pub fn random_scenario<R: Rng>(rng: &mut R, horizon: f64) -> SmallScenario {
    let n = rng.random_range(1..=3usize);
    let nodes = (0..n)
        .map(|id| NodeSpec {
            id,
            capacity: quarter(rng, 0, 12),
            is_ingress: true,
        })
        .collect();
    let mut pairs = Vec::new();
    for b in 1..n {
        pairs.push((rng.random_range(0..b), b));
    }
    if n == 3 && rng.random_bool(0.5) {
        let missing = [(0, 1), (0, 2), (1, 2)].into_iter().find(|p| !pairs.contains(p)).unwrap();
        pairs.push(missing);
    }
    let links = pairs
        .into_iter()
        .map(|(a, b)| LinkSpec {
            a,
            b,
            bandwidth: quarter(rng, 0, 16),
            delay: quarter(rng, 1, 12),
        })
        .collect();
    let topology = NetworkTopology::new("small", nodes, links).unwrap();
    let chain = ServiceChain {
        service_id: 0,
        functions: (0..rng.random_range(1..=3))
            .map(|_| FunctionSpec {
                demand_factor: [0.5, 1.0, 2.0][rng.random_range(0..3)],
                processing_delay: quarter(rng, 1, 24),
            })
            .collect(),
    };
    let mask = ActionMask::new(n, chain.len(), 4);
    let mut raw = ActionTensor::zeros(chain.len(), 4);
    for f in mask.valid_indices().collect::<Vec<_>>() {
        raw.as_mut_slice()[f] = if rng.random_bool(0.15) { 0.0 } else { rng.random::<f64>() };
    }
    let x = post_process(&raw, &mask, 0.1).unwrap();
    let count = rng.random_range(0..=10usize);
    let mut times: Vec<f64> = (0..count).map(|_| quarter(rng, 0, (horizon * 4.0) as u32 - 1)).collect();
    times.sort_by(f64::total_cmp);
    let flows = times
        .into_iter()
        .enumerate()
        .map(|(id, t)| {
            let src = rng.random_range(0..n);
            Flow {
                flow_id: id as u64,
                service_id: 0,
                src,
                rate: quarter(rng, 1, 8),
                arrival_time: t,
                duration: quarter(rng, 1, 60),
                current_function: 0,
                current_node: src,
                accumulated_delay: 0.0,
            }
        })
        .collect();
    SmallScenario {
        topology,
        chain,
        x,
        flows,
        seed: rng.random(),
        horizon,
    }
}
