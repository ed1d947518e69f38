//! Network model, traffic, flow-level simulator, episodic environment and
//! graph replay buffer for learned service coordination.

pub mod environment;
pub mod replay;
pub mod simulator;
pub mod topology;
pub mod traffic;

pub use environment::{Environment, Observation, Scenario, ScenarioConfig, StepResult};
pub use replay::{collate, GraphBatch, ReplayBuffer, Transition};
pub use simulator::{post_process, reward, ActionTensor, MonitoringSnapshot, SchedulingTensor, Simulator};
pub use topology::{ActionMask, NetworkTopology};
pub use traffic::{ArrivalProcess, Flow, ServiceChain, TrafficConfig};
