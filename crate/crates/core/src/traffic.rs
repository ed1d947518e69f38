//! Flow arrivals: fixed, Poisson, two-state Markov-modulated Poisson and
//! recorded traces, one independent stream per ingress node.

use std::collections::VecDeque;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum TrafficError {
    #[error("invalid arrival process: {0}")]
    InvalidProcess(String),
    #[error("{path}:{line}: {message}")]
    TraceFormat {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("trace {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// Returned by a trace-backed stream once every recorded arrival was used.
#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
#[error("end of trace")]
pub struct EndOfTrace;

/// One service demand travelling through the chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Flow {
    pub flow_id: u64,
    pub service_id: usize,
    pub src: usize,
    pub rate: f64,
    pub arrival_time: f64,
    pub duration: f64,
    /// Index of the next function to process; equals the chain length once done.
    pub current_function: usize,
    pub current_node: usize,
    pub accumulated_delay: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FunctionSpec {
    pub demand_factor: f64,
    pub processing_delay: f64,
}

impl Default for FunctionSpec {
    fn default() -> Self {
        Self {
            demand_factor: 1.0,
            processing_delay: 5.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ServiceChain {
    pub service_id: usize,
    pub functions: Vec<FunctionSpec>,
}

impl ServiceChain {
    /// Chain of `n` functions with demand factor 1 and processing delay 5.
    pub fn uniform(n: usize) -> Self {
        Self {
            service_id: 0,
            functions: vec![FunctionSpec::default(); n],
        }
    }

    pub fn len(&self) -> usize {
        self.functions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.functions.is_empty()
    }

    pub fn validate(&self) -> Result<(), TrafficError> {
        if self.functions.is_empty() {
            return Err(TrafficError::InvalidProcess("service chain is empty".into()));
        }
        for (i, f) in self.functions.iter().enumerate() {
            if !(f.demand_factor > 0.0) || !(f.processing_delay >= 0.0) {
                return Err(TrafficError::InvalidProcess(format!(
                    "function {i} needs demand_factor > 0 and processing_delay >= 0"
                )));
            }
        }
        Ok(())
    }
}

impl Default for ServiceChain {
    fn default() -> Self {
        Self::uniform(3)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ArrivalProcess {
    Fixed {
        interval: f64,
    },
    Poisson {
        mean_interval: f64,
    },
    /// Two-state MMPP: exponential inter-arrivals with the mean of the
    /// current state, exponentially distributed sojourns per state.
    Mmpp {
        mean_intervals: [f64; 2],
        mean_sojourns: [f64; 2],
    },
    Trace {
        path: PathBuf,
    },
}

impl ArrivalProcess {
    pub fn mmpp_default() -> Self {
        ArrivalProcess::Mmpp {
            mean_intervals: [5.0, 20.0],
            mean_sojourns: [500.0, 500.0],
        }
    }

    pub fn validate(&self) -> Result<(), TrafficError> {
        let positive = |v: f64, what: &str| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(TrafficError::InvalidProcess(format!("{what} must be positive, got {v}")))
            }
        };
        match self {
            ArrivalProcess::Fixed { interval } => positive(*interval, "interval"),
            ArrivalProcess::Poisson { mean_interval } => positive(*mean_interval, "mean_interval"),
            ArrivalProcess::Mmpp {
                mean_intervals,
                mean_sojourns,
            } => {
                for v in mean_intervals {
                    positive(*v, "mean interval")?;
                }
                for v in mean_sojourns {
                    positive(*v, "mean sojourn")?;
                }
                Ok(())
            }
            ArrivalProcess::Trace { .. } => Ok(()),
        }
    }

    /// Long-run arrival rate of the analytic processes.
    pub fn stationary_rate(&self) -> Option<f64> {
        match self {
            ArrivalProcess::Fixed { interval } => Some(1.0 / interval),
            ArrivalProcess::Poisson { mean_interval } => Some(1.0 / mean_interval),
            ArrivalProcess::Mmpp {
                mean_intervals,
                mean_sojourns,
            } => {
                let total = mean_sojourns[0] + mean_sojourns[1];
                Some(
                    mean_sojourns[0] / total / mean_intervals[0] + mean_sojourns[1] / total / mean_intervals[1],
                )
            }
            ArrivalProcess::Trace { .. } => None,
        }
    }
}

/// Arrival process plus the flow attributes it stamps on every flow.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrafficConfig {
    pub process: ArrivalProcess,
    #[serde(default = "default_rate")]
    pub rate: f64,
    #[serde(default = "default_duration")]
    pub duration: f64,
}

fn default_rate() -> f64 {
    1.0
}

fn default_duration() -> f64 {
    8.0
}

impl TrafficConfig {
    pub fn new(process: ArrivalProcess) -> Self {
        Self {
            process,
            rate: default_rate(),
            duration: default_duration(),
        }
    }

    pub fn validate(&self) -> Result<(), TrafficError> {
        self.process.validate()?;
        if !(self.rate > 0.0) || !(self.duration > 0.0) {
            return Err(TrafficError::InvalidProcess("flow rate and duration must be positive".into()));
        }
        Ok(())
    }
}

/// splitmix64 finalizer over `(master, stream)`; gives every ingress node its
/// own RNG stream so that adding or removing one never perturbs the others.
pub fn derive_seed(master: u64, stream: u64) -> u64 {
    let mut z = master ^ stream.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

// ---------------------------------------------------------------------------
// Trace files
// ---------------------------------------------------------------------------

pub const TRACE_HEADER: &str = "time,ingress,rate,duration";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub time: f64,
    pub ingress: usize,
    pub rate: f64,
    pub duration: f64,
}

pub fn read_trace(path: impl AsRef<Path>) -> Result<Vec<TraceRecord>, TrafficError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| TrafficError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_trace(&text, path)
}

pub fn parse_trace(text: &str, path: &Path) -> Result<Vec<TraceRecord>, TrafficError> {
    let err = |line: usize, message: String| TrafficError::TraceFormat {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header.trim() == TRACE_HEADER => {}
        _ => return Err(err(1, format!("expected header {TRACE_HEADER:?}"))),
    }
    let mut records = Vec::new();
    let mut last = f64::NEG_INFINITY;
    for (idx, line) in lines {
        let line_no = idx + 1;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != 4 {
            return Err(err(line_no, format!("expected 4 fields, found {}", fields.len())));
        }
        let num = |s: &str| s.parse::<f64>().map_err(|_| err(line_no, format!("{s:?} is not a number")));
        let record = TraceRecord {
            time: num(fields[0])?,
            ingress: fields[1]
                .parse()
                .map_err(|_| err(line_no, format!("{:?} is not a node id", fields[1])))?,
            rate: num(fields[2])?,
            duration: num(fields[3])?,
        };
        if record.time < last {
            return Err(err(line_no, "times must be ascending".into()));
        }
        if !(record.rate > 0.0 && record.duration > 0.0) {
            return Err(err(line_no, "rate and duration must be positive".into()));
        }
        last = record.time;
        records.push(record);
    }
    Ok(records)
}

pub fn write_trace(path: impl AsRef<Path>, records: &[TraceRecord]) -> Result<(), TrafficError> {
    let path = path.as_ref();
    let io = |source| TrafficError::Io {
        path: path.to_path_buf(),
        source,
    };
    let mut file = std::io::BufWriter::new(fs::File::create(path).map_err(io)?);
    writeln!(file, "{TRACE_HEADER}").map_err(io)?;
    for r in records {
        writeln!(file, "{},{},{},{}", r.time, r.ingress, r.rate, r.duration).map_err(io)?;
    }
    file.flush().map_err(io)
}

/// Samples an analytic process into trace records over `[0, horizon)`.
pub fn generate_trace(
    config: &TrafficConfig,
    ingress: &[usize],
    horizon: f64,
    seed: u64,
) -> Result<Vec<TraceRecord>, TrafficError> {
    if matches!(config.process, ArrivalProcess::Trace { .. }) {
        return Err(TrafficError::InvalidProcess("cannot generate a trace from a trace".into()));
    }
    let mut generator = TrafficGenerator::new(config, ingress, seed, 0.0)?;
    Ok(generator
        .spawn(0.0, horizon)
        .into_iter()
        .map(|f| TraceRecord {
            time: f.arrival_time,
            ingress: f.src,
            rate: f.rate,
            duration: f.duration,
        })
        .collect())
}

// ---------------------------------------------------------------------------
// Arrival streams
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
enum StreamState {
    Fixed(f64),
    Poisson(ChaCha8Rng, Exp<f64>),
    Mmpp {
        rng: ChaCha8Rng,
        mean_intervals: [f64; 2],
        mean_sojourns: [f64; 2],
        state: usize,
        sojourn_left: f64,
    },
    Trace {
        records: VecDeque<TraceRecord>,
        last_time: f64,
    },
}

/// Inter-arrival source for one ingress node.
#[derive(Debug, Clone)]
pub struct ArrivalStream {
    state: StreamState,
}

fn exp_draw(rng: &mut ChaCha8Rng, mean: f64) -> f64 {
    Exp::new(1.0 / mean).expect("validated positive mean").sample(rng)
}

impl ArrivalStream {
    /// Stream for an analytic process. Trace processes go through
    /// [`ArrivalStream::from_records`].
    pub fn new(process: &ArrivalProcess, seed: u64) -> Result<Self, TrafficError> {
        process.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let state = match process {
            ArrivalProcess::Fixed { interval } => StreamState::Fixed(*interval),
            ArrivalProcess::Poisson { mean_interval } => {
                StreamState::Poisson(rng, Exp::new(1.0 / mean_interval).expect("validated"))
            }
            ArrivalProcess::Mmpp {
                mean_intervals,
                mean_sojourns,
            } => {
                // start in the stationary distribution of the modulating chain
                let p0 = mean_sojourns[0] / (mean_sojourns[0] + mean_sojourns[1]);
                let state = if rng.random::<f64>() < p0 { 0 } else { 1 };
                let sojourn_left = exp_draw(&mut rng, mean_sojourns[state]);
                StreamState::Mmpp {
                    rng,
                    mean_intervals: *mean_intervals,
                    mean_sojourns: *mean_sojourns,
                    state,
                    sojourn_left,
                }
            }
            ArrivalProcess::Trace { path } => {
                let records = read_trace(path)?;
                return Ok(Self::from_records(records));
            }
        };
        Ok(Self { state })
    }

    /// Replays recorded arrivals; gaps are measured from time 0.
    pub fn from_records(records: Vec<TraceRecord>) -> Self {
        Self {
            state: StreamState::Trace {
                records: records.into(),
                last_time: 0.0,
            },
        }
    }

    /// Time until the next arrival.
    pub fn next_interarrival(&mut self) -> Result<f64, EndOfTrace> {
        match &mut self.state {
            StreamState::Fixed(interval) => Ok(*interval),
            StreamState::Poisson(rng, exp) => Ok(exp.sample(rng)),
            StreamState::Mmpp {
                rng,
                mean_intervals,
                mean_sojourns,
                state,
                sojourn_left,
            } => {
                // memorylessness lets us redraw after every state switch
                let mut elapsed = 0.0;
                loop {
                    let gap = exp_draw(rng, mean_intervals[*state]);
                    if gap < *sojourn_left {
                        *sojourn_left -= gap;
                        return Ok(elapsed + gap);
                    }
                    elapsed += *sojourn_left;
                    *state ^= 1;
                    *sojourn_left = exp_draw(rng, mean_sojourns[*state]);
                }
            }
            StreamState::Trace { records, last_time } => {
                let next = records.front().ok_or(EndOfTrace)?;
                let gap = next.time - *last_time;
                *last_time = next.time;
                Ok(gap)
            }
        }
    }

    /// Rate and duration of the record the last gap led to (trace streams only).
    fn take_record(&mut self) -> Option<TraceRecord> {
        match &mut self.state {
            StreamState::Trace { records, .. } => records.pop_front(),
            _ => None,
        }
    }
}

#[derive(Debug, Clone)]
struct IngressStream {
    node: usize,
    stream: ArrivalStream,
    next: Option<(f64, f64, f64)>, // time, rate, duration
}

impl IngressStream {
    fn advance(&mut self, from: f64, rate: f64, duration: f64) {
        self.next = match self.stream.next_interarrival() {
            Ok(gap) => match self.stream.take_record() {
                Some(rec) => Some((rec.time, rec.rate, rec.duration)),
                None => Some((from + gap, rate, duration)),
            },
            Err(EndOfTrace) => None,
        };
    }
}

/// Stateful flow source for a whole simulation: one stream per ingress node,
/// continuing across consecutive windows.
#[derive(Debug, Clone)]
pub struct TrafficGenerator {
    streams: Vec<IngressStream>,
    rate: f64,
    duration: f64,
    next_flow_id: u64,
}

impl TrafficGenerator {
    /// Streams start at `start`; the first analytic arrival falls one
    /// inter-arrival after it.
    pub fn new(config: &TrafficConfig, ingress: &[usize], seed: u64, start: f64) -> Result<Self, TrafficError> {
        config.validate()?;
        let trace = match &config.process {
            ArrivalProcess::Trace { path } => Some(read_trace(path)?),
            _ => None,
        };
        let mut nodes = ingress.to_vec();
        nodes.sort_unstable();
        nodes.dedup();
        let streams = nodes
            .into_iter()
            .map(|node| {
                let stream = match &trace {
                    Some(records) => ArrivalStream::from_records(
                        records.iter().filter(|r| r.ingress == node).copied().collect(),
                    ),
                    None => ArrivalStream::new(&config.process, derive_seed(seed, node as u64))?,
                };
                let mut s = IngressStream {
                    node,
                    stream,
                    next: None,
                };
                s.advance(start, config.rate, config.duration);
                Ok(s)
            })
            .collect::<Result<Vec<_>, TrafficError>>()?;
        Ok(Self {
            streams,
            rate: config.rate,
            duration: config.duration,
            next_flow_id: 0,
        })
    }

    /// All flows arriving in `[t0, t1)`, sorted by arrival time (ties by
    /// ingress id). Arrivals before `t0` that were never requested are skipped.
    pub fn spawn(&mut self, t0: f64, t1: f64) -> Vec<Flow> {
        let mut arrivals = Vec::new();
        for s in &mut self.streams {
            while let Some((time, rate, duration)) = s.next {
                if time >= t1 {
                    break;
                }
                if time >= t0 {
                    arrivals.push((time, s.node, rate, duration));
                }
                s.advance(time, self.rate, self.duration);
            }
        }
        arrivals.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        arrivals
            .into_iter()
            .map(|(time, node, rate, duration)| {
                let flow_id = self.next_flow_id;
                self.next_flow_id += 1;
                Flow {
                    flow_id,
                    service_id: 0,
                    src: node,
                    rate,
                    arrival_time: time,
                    duration,
                    current_function: 0,
                    current_node: node,
                    accumulated_delay: 0.0,
                }
            })
            .collect()
    }
}

/// One-shot helper: the flows of a fresh generator started at `window.0`.
pub fn spawn_flows(
    config: &TrafficConfig,
    ingress: &[usize],
    window: (f64, f64),
    seed: u64,
) -> Result<Vec<Flow>, TrafficError> {
    if ingress.is_empty() || window.1 <= window.0 {
        return Ok(Vec::new());
    }
    Ok(TrafficGenerator::new(config, ingress, seed, window.0)?.spawn(window.0, window.1))
}
