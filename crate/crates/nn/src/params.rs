//! Named parameter tensors, their seeded initialization, soft updates and
//! checkpoint files.
//!
//! A checkpoint directory holds `<set>.bin` (every tensor of the set as
//! little-endian `f64`, in declaration order) and one `manifest.txt`:
//!
//! ```text
//! set actor seed 7 params 12
//! param actor encoder.w_dst 3 64
//! ...
//! meta gradient_steps 640
//! ```

use std::fs;
use std::io::{self, BufRead, Write};
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::tape::{DiffError, Gradients, Tape, Var};
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ParamId(usize);

impl ParamId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParameterSet {
    seed: u64,
    names: Vec<String>,
    tensors: Vec<Tensor>,
}

fn name_stream(name: &str) -> u64 {
    // FNV-1a
    name.bytes()
        .fold(0xcbf2_9ce4_8422_2325u64, |h, b| (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01b3))
}

impl ParameterSet {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            names: Vec::new(),
            tensors: Vec::new(),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Adds `tensor` under `name`. Panics if the name is taken.
    pub fn add(&mut self, name: impl Into<String>, tensor: Tensor) -> ParamId {
        let name = name.into();
        assert!(!self.names.contains(&name), "duplicate parameter {name}");
        self.names.push(name);
        self.tensors.push(tensor);
        ParamId(self.tensors.len() - 1)
    }

    /// Uniform in `[-1/sqrt(fan_in), 1/sqrt(fan_in)]`, drawn from a stream
    /// keyed by the set seed and the parameter name.
    pub fn add_uniform(&mut self, name: impl Into<String>, rows: usize, cols: usize, fan_in: usize) -> ParamId {
        let name = name.into();
        let bound = 1.0 / (fan_in.max(1) as f64).sqrt();
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed ^ name_stream(&name));
        let data = (0..rows * cols).map(|_| rng.random_range(-bound..=bound)).collect();
        self.add(name, Tensor::from_vec(rows, cols, data))
    }

    pub fn add_zeros(&mut self, name: impl Into<String>, rows: usize, cols: usize) -> ParamId {
        self.add(name, Tensor::zeros(rows, cols))
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn num_scalars(&self) -> usize {
        self.tensors.iter().map(Tensor::len).sum()
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.tensors.len()).map(ParamId)
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.names[id.0]
    }

    pub fn get(&self, id: ParamId) -> &Tensor {
        &self.tensors[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Tensor {
        &mut self.tensors[id.0]
    }

    pub fn find(&self, name: &str) -> Option<ParamId> {
        self.names.iter().position(|n| n == name).map(ParamId)
    }

    pub fn tensors(&self) -> &[Tensor] {
        &self.tensors
    }

    pub fn tensors_mut(&mut self) -> &mut [Tensor] {
        &mut self.tensors
    }

    /// Puts every parameter on `tape`, differentiable or constant.
    pub fn bind<'p>(&'p self, tape: &Tape<'p>, trainable: bool) -> Bound {
        Bound {
            vars: self
                .tensors
                .iter()
                .map(|t| if trainable { tape.param(t) } else { tape.constant_ref(t) })
                .collect(),
        }
    }

    /// Per-parameter gradients (zero where the loss did not reach).
    pub fn gradients(&self, bound: &Bound, grads: &mut Gradients) -> Vec<Tensor> {
        self.tensors
            .iter()
            .zip(&bound.vars)
            .map(|(t, &v)| grads.take(v).unwrap_or_else(|| Tensor::zeros(t.rows(), t.cols())))
            .collect()
    }

    /// Errors unless `other` has the same names and shapes in the same order.
    pub fn check_layout(&self, other: &ParameterSet) -> Result<(), DiffError> {
        if self.names != other.names {
            return Err(DiffError::Layout("parameter names differ".into()));
        }
        for (i, (a, b)) in self.tensors.iter().zip(&other.tensors).enumerate() {
            if a.shape() != b.shape() {
                return Err(DiffError::ShapeMismatch {
                    name: self.names[i].clone(),
                    expected: a.shape(),
                    found: b.shape(),
                });
            }
        }
        Ok(())
    }

    /// `self <- tau * online + (1 - tau) * self`, for every parameter.
    pub fn soft_update_from(&mut self, online: &ParameterSet, tau: f64) -> Result<(), DiffError> {
        self.check_layout(online)?;
        for (t, o) in self.tensors.iter_mut().zip(&online.tensors) {
            for (a, &b) in t.as_mut_slice().iter_mut().zip(o.as_slice()) {
                *a = tau * b + (1.0 - tau) * *a;
            }
        }
        Ok(())
    }
}

/// Tape variables of a bound parameter set, indexed by [`ParamId`].
#[derive(Debug, Clone)]
pub struct Bound {
    vars: Vec<Var>,
}

impl Bound {
    pub fn var(&self, id: ParamId) -> Var {
        self.vars[id.0]
    }
}

impl std::ops::Index<ParamId> for Bound {
    type Output = Var;

    fn index(&self, id: ParamId) -> &Var {
        &self.vars[id.0]
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CheckpointError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Manifest { path: PathBuf, line: usize, message: String },
    #[error("checkpoint has no parameter set {0:?}")]
    MissingSet(String),
    #[error("{set}: {message}")]
    Mismatch { set: String, message: String },
}

/// A loaded checkpoint: parameter sets plus free-form metadata.
#[derive(Debug, Clone, Default)]
pub struct Checkpoint {
    pub sets: Vec<(String, ParameterSet)>,
    pub meta: Vec<(String, String)>,
}

impl Checkpoint {
    pub fn set(&self, name: &str) -> Result<&ParameterSet, CheckpointError> {
        self.sets
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, s)| s)
            .ok_or_else(|| CheckpointError::MissingSet(name.into()))
    }

    pub fn meta(&self, key: &str) -> Option<&str> {
        self.meta.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> CheckpointError + '_ {
    move |source| CheckpointError::Io {
        path: path.to_path_buf(),
        source,
    }
}

pub fn save_checkpoint(
    dir: impl AsRef<Path>,
    sets: &[(&str, &ParameterSet)],
    meta: &[(String, String)],
) -> Result<(), CheckpointError> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let manifest_path = dir.join("manifest.txt");
    let mut manifest = String::new();
    for (name, set) in sets {
        assert!(!name.contains(char::is_whitespace), "set names are single words");
        manifest.push_str(&format!("set {name} seed {} params {}\n", set.seed, set.len()));
        let mut bytes = Vec::with_capacity(set.num_scalars() * 8);
        for (pname, t) in set.names.iter().zip(&set.tensors) {
            manifest.push_str(&format!("param {name} {pname} {} {}\n", t.rows(), t.cols()));
            for v in t.as_slice() {
                bytes.extend_from_slice(&v.to_le_bytes());
            }
        }
        let bin = dir.join(format!("{name}.bin"));
        fs::write(&bin, bytes).map_err(io_err(&bin))?;
    }
    for (k, v) in meta {
        manifest.push_str(&format!("meta {k} {v}\n"));
    }
    let mut f = fs::File::create(&manifest_path).map_err(io_err(&manifest_path))?;
    f.write_all(manifest.as_bytes()).map_err(io_err(&manifest_path))?;
    Ok(())
}

pub fn load_checkpoint(dir: impl AsRef<Path>) -> Result<Checkpoint, CheckpointError> {
    let dir = dir.as_ref();
    let manifest_path = dir.join("manifest.txt");
    let file = fs::File::open(&manifest_path).map_err(io_err(&manifest_path))?;
    let bad = |line: usize, message: String| CheckpointError::Manifest {
        path: manifest_path.clone(),
        line,
        message,
    };
    // (set name, seed, [(param, rows, cols)])
    let mut layout: Vec<(String, u64, Vec<(String, usize, usize)>)> = Vec::new();
    let mut meta = Vec::new();
    for (i, line) in io::BufReader::new(file).lines().enumerate() {
        let line = line.map_err(io_err(&manifest_path))?;
        let n = i + 1;
        let words: Vec<&str> = line.split_whitespace().collect();
        match words.as_slice() {
            [] => {}
            ["set", name, "seed", seed, "params", _] => {
                let seed = seed.parse().map_err(|_| bad(n, format!("bad seed {seed:?}")))?;
                layout.push((name.to_string(), seed, Vec::new()));
            }
            ["param", set, pname, rows, cols] => {
                let entry = layout
                    .iter_mut()
                    .find(|(s, _, _)| s == set)
                    .ok_or_else(|| bad(n, format!("param for undeclared set {set}")))?;
                let rows = rows.parse().map_err(|_| bad(n, "bad row count".into()))?;
                let cols = cols.parse().map_err(|_| bad(n, "bad column count".into()))?;
                entry.2.push((pname.to_string(), rows, cols));
            }
            ["meta", key, rest @ ..] => meta.push((key.to_string(), rest.join(" "))),
            _ => return Err(bad(n, format!("unrecognized line {line:?}"))),
        }
    }
    let mut sets = Vec::new();
    for (name, seed, params) in layout {
        let bin = dir.join(format!("{name}.bin"));
        let bytes = fs::read(&bin).map_err(io_err(&bin))?;
        let expected: usize = params.iter().map(|(_, r, c)| r * c * 8).sum();
        if bytes.len() != expected {
            return Err(CheckpointError::Mismatch {
                set: name,
                message: format!("{} bytes on disk, manifest describes {expected}", bytes.len()),
            });
        }
        let mut set = ParameterSet::new(seed);
        let mut values = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")));
        for (pname, rows, cols) in params {
            let data: Vec<f64> = values.by_ref().take(rows * cols).collect();
            set.add(pname, Tensor::from_vec(rows, cols, data));
        }
        sets.push((name, set));
    }
    Ok(Checkpoint { sets, meta })
}
