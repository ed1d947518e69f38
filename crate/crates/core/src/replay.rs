//! Experience replay over graph observations, and block-diagonal batching of
//! variable-size graphs.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::environment::{Observation, EDGE_FEATURES, NODE_FEATURES};
use crate::simulator::SchedulingTensor;
use crate::topology::ActionMask;

pub const DEFAULT_BUFFER_CAPACITY: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ReplayError {
    #[error("buffer holds {available} transitions, cannot sample {requested}")]
    Insufficient { available: usize, requested: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub obs: Observation,
    pub action: SchedulingTensor,
    pub reward: f64,
    pub next_obs: Observation,
    pub done: bool,
}

/// Fixed-capacity ring; the oldest transition is overwritten first.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    capacity: usize,
    items: Vec<Transition>,
    cursor: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "replay capacity must be positive");
        Self {
            capacity,
            items: Vec::new(),
            cursor: 0,
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn store(&mut self, t: Transition) {
        if self.items.len() < self.capacity {
            self.items.push(t);
        } else {
            self.items[self.cursor] = t;
        }
        self.cursor = (self.cursor + 1) % self.capacity;
    }

    /// Oldest first.
    pub fn iter(&self) -> impl Iterator<Item = &Transition> {
        let (newer, older) = self.items.split_at(if self.items.len() < self.capacity { 0 } else { self.cursor });
        older.iter().chain(newer)
    }

    pub fn get(&self, index: usize) -> Option<&Transition> {
        self.items.get(index)
    }

    /// Distinct storage indices drawn uniformly.
    pub fn sample_indices<R: Rng + ?Sized>(&self, batch_size: usize, rng: &mut R) -> Result<Vec<usize>, ReplayError> {
        if batch_size > self.items.len() {
            return Err(ReplayError::Insufficient {
                available: self.items.len(),
                requested: batch_size,
            });
        }
        Ok(rand::seq::index::sample(rng, self.items.len(), batch_size).into_vec())
    }

    pub fn sample<R: Rng + ?Sized>(&self, batch_size: usize, rng: &mut R) -> Result<Vec<&Transition>, ReplayError> {
        Ok(self
            .sample_indices(batch_size, rng)?
            .into_iter()
            .map(|i| &self.items[i])
            .collect())
    }
}

/// Several graphs stacked into one disconnected graph.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphBatch {
    /// `N x 3` row-major over all nodes.
    pub node_features: Vec<f64>,
    /// `E x 2` row-major over all directed edges.
    pub edge_features: Vec<f64>,
    pub edge_src: Vec<usize>,
    pub edge_dst: Vec<usize>,
    /// Graph index of each node.
    pub membership: Vec<usize>,
    /// Node offset of each graph; `node_offsets[g + 1] - node_offsets[g]` is its size.
    pub node_offsets: Vec<usize>,
    pub edge_offsets: Vec<usize>,
    pub masks: Vec<ActionMask>,
}

impl GraphBatch {
    pub fn num_graphs(&self) -> usize {
        self.masks.len()
    }

    pub fn num_nodes(&self) -> usize {
        self.membership.len()
    }

    pub fn num_edges(&self) -> usize {
        self.edge_src.len()
    }

    pub fn graph_size(&self, g: usize) -> usize {
        self.node_offsets[g + 1] - self.node_offsets[g]
    }
}

pub fn collate<'a, I>(observations: I) -> GraphBatch
where
    I: IntoIterator<Item = &'a Observation>,
{
    let mut b = GraphBatch {
        node_features: Vec::new(),
        edge_features: Vec::new(),
        edge_src: Vec::new(),
        edge_dst: Vec::new(),
        membership: Vec::new(),
        node_offsets: vec![0],
        edge_offsets: vec![0],
        masks: Vec::new(),
    };
    for (g, obs) in observations.into_iter().enumerate() {
        debug_assert_eq!(obs.node_features.len() % NODE_FEATURES, 0);
        debug_assert_eq!(obs.edge_features.len(), obs.num_edges() * EDGE_FEATURES);
        let offset = b.membership.len();
        let n = obs.num_nodes();
        b.node_features.extend_from_slice(&obs.node_features);
        b.edge_features.extend_from_slice(&obs.edge_features);
        b.edge_src.extend(obs.edge_src.iter().map(|&s| s + offset));
        b.edge_dst.extend(obs.edge_dst.iter().map(|&d| d + offset));
        b.membership.extend(std::iter::repeat_n(g, n));
        b.node_offsets.push(offset + n);
        b.edge_offsets.push(b.edge_src.len());
        b.masks.push(obs.mask);
    }
    b
}

/// A sampled mini-batch with both observation sides collated.
#[derive(Debug, Clone)]
pub struct TransitionBatch<'a> {
    pub obs: GraphBatch,
    pub next_obs: GraphBatch,
    pub actions: Vec<&'a SchedulingTensor>,
    pub rewards: Vec<f64>,
    pub dones: Vec<bool>,
}

impl TransitionBatch<'_> {
    pub fn len(&self) -> usize {
        self.rewards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rewards.is_empty()
    }
}

pub fn collate_transitions<'a>(batch: &[&'a Transition]) -> TransitionBatch<'a> {
    TransitionBatch {
        obs: collate(batch.iter().map(|t| &t.obs)),
        next_obs: collate(batch.iter().map(|t| &t.next_obs)),
        actions: batch.iter().map(|t| &t.action).collect(),
        rewards: batch.iter().map(|t| t.reward).collect(),
        dones: batch.iter().map(|t| t.done).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn graph(n: usize, edges: &[(usize, usize)]) -> Observation {
        Observation {
            node_features: (0..n * 3).map(|i| i as f64 / 10.0 - 1.0).collect(),
            edge_features: vec![0.0; edges.len() * 2],
            edge_src: edges.iter().map(|e| e.0).collect(),
            edge_dst: edges.iter().map(|e| e.1).collect(),
            mask: ActionMask::new(n, 3, 64),
        }
    }

    fn transition(reward: f64) -> Transition {
        let obs = graph(1, &[]);
        let action = crate::simulator::post_process(
            &crate::simulator::ActionTensor::filled(&obs.mask, 1.0),
            &obs.mask,
            0.1,
        )
        .unwrap();
        Transition {
            obs: obs.clone(),
            action,
            reward,
            next_obs: obs,
            done: false,
        }
    }

    #[test]
    fn store_and_evict() {
        let mut b = ReplayBuffer::new(3);
        for r in 0..3 {
            b.store(transition(r as f64 / 10.0));
        }
        assert_eq!(b.len(), 3);
        b.store(transition(0.9));
        assert_eq!(b.len(), 3);
        let rewards: Vec<f64> = b.iter().map(|t| t.reward).collect();
        assert_eq!(rewards, vec![0.1, 0.2, 0.9]);
        assert_eq!(b.get(0).unwrap(), &transition(0.9));
    }

    #[test]
    fn sampling_is_without_replacement_and_seeded() {
        let mut b = ReplayBuffer::new(200);
        for _ in 0..100 {
            b.store(transition(0.0));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut idx = b.sample_indices(100, &mut rng).unwrap();
        idx.sort_unstable();
        assert_eq!(idx, (0..100).collect::<Vec<_>>());
        let a = b.sample_indices(10, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        let c = b.sample_indices(10, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        assert_eq!(a, c);
        assert_eq!(
            b.sample_indices(101, &mut rng),
            Err(ReplayError::Insufficient {
                available: 100,
                requested: 101
            })
        );
    }

    #[test]
    fn collate_offsets_edges() {
        let g1 = graph(2, &[(0, 1), (1, 0)]);
        let g2 = graph(3, &[(0, 1), (1, 2)]);
        let b = collate([&g1, &g2]);
        assert_eq!(b.num_nodes(), 5);
        assert_eq!((b.edge_src[2], b.edge_dst[2]), (2, 3));
        assert_eq!(b.membership, vec![0, 0, 1, 1, 1]);
        assert_eq!(b.node_offsets, vec![0, 2, 5]);
        assert_eq!(b.graph_size(1), 3);
        let single = collate([&g2]);
        assert_eq!(single.node_features, g2.node_features);
        assert_eq!(single.edge_src, g2.edge_src);
        assert_eq!(single.edge_dst, g2.edge_dst);
    }
}
