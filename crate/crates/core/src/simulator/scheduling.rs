//! Raw actor output, the row-stochastic scheduling tensor derived from it, and
//! the deployment indicator implied by the tensor.

use serde::{Deserialize, Serialize};

use crate::topology::ActionMask;

/// Scheduling threshold used throughout the evaluation setup.
pub const DEFAULT_SCHEDULING_THRESHOLD: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SchedulingError {
    #[error("action has shape {found:?}, expected {expected:?}")]
    Shape { expected: [usize; 3], found: [usize; 3] },
    #[error("action data has {found} values, shape needs {expected}")]
    Length { expected: usize, found: usize },
    #[error("scheduling row ({function}, {node}) violates the row constraint: {reason}")]
    InvalidRow {
        function: usize,
        node: usize,
        reason: String,
    },
}

/// Dense `chain_length x v_max x v_max` tensor as produced by an actor,
/// before thresholding and normalization. Row-major `(i, j, k)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionTensor {
    chain_length: usize,
    v_max: usize,
    data: Vec<f64>,
}

impl ActionTensor {
    pub fn zeros(chain_length: usize, v_max: usize) -> Self {
        Self {
            chain_length,
            v_max,
            data: vec![0.0; chain_length * v_max * v_max],
        }
    }

    pub fn from_vec(chain_length: usize, v_max: usize, data: Vec<f64>) -> Result<Self, SchedulingError> {
        let expected = chain_length * v_max * v_max;
        if data.len() != expected {
            return Err(SchedulingError::Length {
                expected,
                found: data.len(),
            });
        }
        Ok(Self {
            chain_length,
            v_max,
            data,
        })
    }

    /// Tensor with `value` on every valid entry of `mask` and zero elsewhere.
    pub fn filled(mask: &ActionMask, value: f64) -> Self {
        let mut t = Self::zeros(mask.chain_length(), mask.v_max());
        for f in mask.valid_indices() {
            t.data[f] = value;
        }
        t
    }

    pub fn shape(&self) -> [usize; 3] {
        [self.chain_length, self.v_max, self.v_max]
    }

    pub fn chain_length(&self) -> usize {
        self.chain_length
    }

    pub fn v_max(&self) -> usize {
        self.v_max
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        self.data[(i * self.v_max + j) * self.v_max + k]
    }

    pub fn set(&mut self, i: usize, j: usize, k: usize, value: f64) {
        self.data[(i * self.v_max + j) * self.v_max + k] = value;
    }

    pub fn check_shape(&self, mask: &ActionMask) -> Result<(), SchedulingError> {
        if self.shape() != mask.shape() {
            return Err(SchedulingError::Shape {
                expected: mask.shape(),
                found: self.shape(),
            });
        }
        Ok(())
    }

    /// Element-wise product with the mask.
    pub fn apply_mask(&mut self, mask: &ActionMask) {
        for (f, v) in self.data.iter_mut().enumerate() {
            if !mask.is_valid_flat(f) {
                *v = 0.0;
            }
        }
    }
}

/// Row-stochastic scheduling probabilities: for every function `i` and real
/// node `j`, `x[i][j][..]` is a distribution over destination nodes. Only the
/// `n x |V| x |V|` block inside the mask is stored; the rest is zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchedulingTensor {
    mask: ActionMask,
    data: Vec<f64>,
}

impl SchedulingTensor {
    /// Builds from the compact `n x |V| x |V|` block and validates every row
    /// against `threshold`.
    pub fn from_block(mask: ActionMask, data: Vec<f64>, threshold: f64) -> Result<Self, SchedulingError> {
        let v = mask.num_nodes();
        let expected = mask.chain_length() * v * v;
        if data.len() != expected {
            return Err(SchedulingError::Length {
                expected,
                found: data.len(),
            });
        }
        let t = Self { mask, data };
        t.validate(threshold)?;
        Ok(t)
    }

    /// Skips row validation; for exercising drop paths in tests.
    #[cfg(test)]
    pub(crate) fn from_block_unchecked(mask: ActionMask, data: Vec<f64>) -> Self {
        Self { mask, data }
    }

    pub fn mask(&self) -> &ActionMask {
        &self.mask
    }

    pub fn chain_length(&self) -> usize {
        self.mask.chain_length()
    }

    pub fn num_nodes(&self) -> usize {
        self.mask.num_nodes()
    }

    pub fn v_max(&self) -> usize {
        self.mask.v_max()
    }

    /// Probabilities of `x[i][j][..]` over the real nodes (`|V|` entries).
    pub fn row(&self, i: usize, j: usize) -> &[f64] {
        let v = self.num_nodes();
        let start = (i * v + j) * v;
        &self.data[start..start + v]
    }

    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        if self.mask.is_valid(i, j, k) {
            self.row(i, j)[k]
        } else {
            0.0
        }
    }

    pub fn block(&self) -> &[f64] {
        &self.data
    }

    /// Full `n x v_max x v_max` tensor, row-major.
    pub fn to_dense(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.mask.len()];
        let v = self.num_nodes();
        for i in 0..self.chain_length() {
            for j in 0..v {
                for (k, &p) in self.row(i, j).iter().enumerate() {
                    out[self.mask.flat_index(i, j, k)] = p;
                }
            }
        }
        out
    }

    pub fn to_action(&self) -> ActionTensor {
        ActionTensor::from_vec(self.chain_length(), self.v_max(), self.to_dense()).expect("shape from mask")
    }

    /// Each row sums to 1 within 1e-6 (or is entirely zero) and no nonzero
    /// entry is below `threshold`.
    pub fn validate(&self, threshold: f64) -> Result<(), SchedulingError> {
        for i in 0..self.chain_length() {
            for j in 0..self.num_nodes() {
                let row = self.row(i, j);
                let bad = |reason: String| SchedulingError::InvalidRow {
                    function: i,
                    node: j,
                    reason,
                };
                let sum: f64 = row.iter().sum();
                if sum != 0.0 && (sum - 1.0).abs() > 1e-6 {
                    return Err(bad(format!("sums to {sum}")));
                }
                if let Some(p) = row.iter().find(|&&p| !(0.0..=1.0).contains(&p) || (p > 0.0 && p < threshold)) {
                    return Err(bad(format!("entry {p} outside [threshold, 1]")));
                }
            }
        }
        Ok(())
    }
}

/// Turns one raw row (real destinations only) into probabilities.
///
/// Entries below `threshold` are dropped, the rest renormalized; survivors
/// whose normalized share would still be below `threshold` are dropped one at
/// a time, smallest first, until every share clears it. A row with some
/// positive mass but no survivor becomes one-hot at its largest raw entry
/// (lowest index on ties). A row without positive mass stays zero, so flows
/// reaching it are dropped.
pub fn threshold_row(raw: &[f64], threshold: f64, out: &mut [f64]) {
    debug_assert_eq!(raw.len(), out.len());
    out.iter_mut().for_each(|o| *o = 0.0);
    if raw.is_empty() {
        return;
    }
    let clean = |v: f64| if v.is_nan() { 0.0 } else { v.clamp(0.0, 1.0) };
    let mut survivors: Vec<usize> = (0..raw.len()).filter(|&k| clean(raw[k]) >= threshold && clean(raw[k]) > 0.0).collect();
    if survivors.is_empty() {
        if !raw.iter().any(|&v| clean(v) > 0.0) {
            return;
        }
        let mut best = 0;
        for k in 1..raw.len() {
            if clean(raw[k]) > clean(raw[best]) {
                best = k;
            }
        }
        out[best] = 1.0;
        return;
    }
    // descending by value, ascending index on ties: the tail is removed first
    survivors.sort_by(|&a, &b| clean(raw[b]).total_cmp(&clean(raw[a])).then(a.cmp(&b)));
    let mut sum: f64 = survivors.iter().map(|&k| clean(raw[k])).sum();
    while survivors.len() > 1 {
        let last = *survivors.last().expect("non-empty");
        if clean(raw[last]) / sum >= threshold {
            break;
        }
        sum -= clean(raw[last]);
        survivors.pop();
    }
    // recompute the sum from scratch so it does not carry cancellation error
    let sum: f64 = survivors.iter().map(|&k| clean(raw[k])).sum();
    for &k in &survivors {
        out[k] = clean(raw[k]) / sum;
    }
}

/// Masks, thresholds and renormalizes a raw action into a valid tensor.
pub fn post_process(
    raw: &ActionTensor,
    mask: &ActionMask,
    threshold: f64,
) -> Result<SchedulingTensor, SchedulingError> {
    raw.check_shape(mask)?;
    let v = mask.num_nodes();
    let mut data = vec![0.0; mask.chain_length() * v * v];
    let mut row = vec![0.0; v];
    for i in 0..mask.chain_length() {
        for j in 0..v {
            for (k, r) in row.iter_mut().enumerate() {
                *r = raw.get(i, j, k);
            }
            let start = (i * v + j) * v;
            threshold_row(&row, threshold, &mut data[start..start + v]);
        }
    }
    Ok(SchedulingTensor { mask: *mask, data })
}

/// Which function is deployed on which node: `y[i][k]` is set whenever some
/// source row sends function `i` traffic to `k`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DeploymentIndicator {
    functions: usize,
    nodes: usize,
    deployed: Vec<bool>,
}

impl DeploymentIndicator {
    pub fn is_deployed(&self, function: usize, node: usize) -> bool {
        self.deployed[function * self.nodes + node]
    }

    pub fn functions(&self) -> usize {
        self.functions
    }

    pub fn nodes(&self) -> usize {
        self.nodes
    }

    /// Nodes hosting an instance of `function`.
    pub fn instances(&self, function: usize) -> Vec<usize> {
        (0..self.nodes).filter(|&k| self.is_deployed(function, k)).collect()
    }
}

pub fn derive_deployment(x: &SchedulingTensor) -> DeploymentIndicator {
    let n = x.chain_length();
    let v = x.num_nodes();
    let mut deployed = vec![false; n * v];
    for i in 0..n {
        for j in 0..v {
            for (k, &p) in x.row(i, j).iter().enumerate() {
                if p > 0.0 {
                    deployed[i * v + k] = true;
                }
            }
        }
    }
    DeploymentIndicator {
        functions: n,
        nodes: v,
        deployed,
    }
}
