//! Double-precision reverse-mode autodiff, a GATv2 encode-process-decode
//! graph embedder, and the DDPG actor-critic built on them.

pub mod adam;
pub mod agent;
pub mod embedder;
pub mod gradcheck;
pub mod params;
pub mod tape;
pub mod tensor;

pub use adam::{Adam, AdamConfig};
pub use params::{Bound, ParamId, ParameterSet};
pub use tape::{DiffError, Gradients, Tape, Var};
pub use tensor::Tensor;
