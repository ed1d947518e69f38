//! Flow-level discrete-event simulation of one monitoring period at a time.
//!
//! Each flow visits the chain's functions in order. Before every function the
//! flow's next node is drawn from the scheduling tensor row of its current
//! node; the move reserves bandwidth on every link of the delay-shortest
//! route (each link for `duration`, starting when the flow enters it) and
//! `rate * demand_factor` of compute at the destination for `duration` from
//! arrival. If any of those reservations does not fit, the flow is dropped.
//! Processing then takes the function's processing delay, after which the
//! next hop is decided, or the flow completes successfully.
//!
//! Events at the same instant are handled in ascending flow id. Destination
//! draws come from a counter-based stream keyed by `(seed, flow_id,
//! function)`, so they do not depend on event interleaving.

pub mod ledger;
pub mod scheduling;

use std::cmp::{Ordering, Reverse};
use std::collections::{BTreeMap, BinaryHeap};
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::topology::{shortest_paths, NetworkTopology, RoutingTable};
use crate::traffic::{derive_seed, Flow, ServiceChain};

pub use ledger::{Reservation, ReservationLedger};
pub use scheduling::{
    derive_deployment, post_process, threshold_row, ActionTensor, DeploymentIndicator, SchedulingError,
    SchedulingTensor, DEFAULT_SCHEDULING_THRESHOLD,
};

#[derive(Debug, thiserror::Error)]
pub enum SimError {
    #[error("scheduling tensor covers {found_nodes} nodes and {found_functions} functions, simulation has {nodes} and {functions}")]
    TensorMismatch {
        nodes: usize,
        functions: usize,
        found_nodes: usize,
        found_functions: usize,
    },
    #[error("flow {flow_id} arrives at {time}, outside the window [{start}, {end})")]
    FlowOutsideWindow {
        flow_id: u64,
        time: f64,
        start: f64,
        end: f64,
    },
    #[error("flows must be sorted by arrival time (flow {0} is out of order)")]
    UnsortedFlows(u64),
    #[error("flow {flow_id} enters at unknown node {node}")]
    UnknownIngress { flow_id: u64, node: usize },
    #[error("flow id {0} is already in the network")]
    DuplicateFlow(u64),
    #[error("monitoring period must be positive, got {0}")]
    InvalidPeriod(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum DropReason {
    NoDestination,
    LinkSaturated,
    NodeSaturated,
}

impl DropReason {
    pub const ALL: [DropReason; 3] = [
        DropReason::NoDestination,
        DropReason::LinkSaturated,
        DropReason::NodeSaturated,
    ];

    fn index(self) -> usize {
        self as usize
    }
}

/// Cumulative statistics of one monitoring period.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonitoringSnapshot {
    pub window_start: f64,
    pub window_end: f64,
    /// Sum of the rates of flows that entered at each node.
    pub ingress_traffic: Vec<f64>,
    /// Time-averaged reserved compute over capacity, per node.
    pub load_ratio: Vec<f64>,
    /// Time-averaged reserved bandwidth over bandwidth, per link.
    pub bandwidth_ratio: Vec<f64>,
    pub succ_count: u64,
    pub drop_count: u64,
    pub drops_by_reason: [u64; 3],
    pub arrived: u64,
    pub carried_in: u64,
    pub carried_out: u64,
    /// Sum of end-to-end delays of the flows that completed in this window.
    pub total_latency: f64,
}

impl MonitoringSnapshot {
    pub fn empty(num_nodes: usize, num_links: usize, start: f64, end: f64) -> Self {
        Self {
            window_start: start,
            window_end: end,
            ingress_traffic: vec![0.0; num_nodes],
            load_ratio: vec![0.0; num_nodes],
            bandwidth_ratio: vec![0.0; num_links],
            succ_count: 0,
            drop_count: 0,
            drops_by_reason: [0; 3],
            arrived: 0,
            carried_in: 0,
            carried_out: 0,
            total_latency: 0.0,
        }
    }

    pub fn drops(&self, reason: DropReason) -> u64 {
        self.drops_by_reason[reason.index()]
    }

    /// `arrived + carried_in == succ + drop + carried_out`
    pub fn is_conserving(&self) -> bool {
        self.arrived + self.carried_in == self.succ_count + self.drop_count + self.carried_out
    }
}

/// Successful-flow objective `(succ - drop) / (succ + drop)`; zero when
/// there was no traffic to judge.
pub fn reward_from_counts(succ: u64, drop: u64) -> f64 {
    if succ + drop == 0 {
        0.0
    } else {
        (succ as f64 - drop as f64) / (succ + drop) as f64
    }
}

pub fn reward(snapshot: &MonitoringSnapshot) -> f64 {
    reward_from_counts(snapshot.succ_count, snapshot.drop_count)
}

/// Uniform draw in `[0, 1)` for the destination choice of `flow_id` before
/// function `function`.
pub fn hop_uniform(seed: u64, flow_id: u64, function: usize) -> f64 {
    let z = derive_seed(derive_seed(seed, flow_id), function as u64);
    (z >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Inverse-CDF categorical draw over `row`; `None` if the row has no mass.
pub fn sample_destination(row: &[f64], u: f64) -> Option<usize> {
    let total: f64 = row.iter().sum();
    if !(total > 0.0) {
        return None;
    }
    let target = u * total;
    let mut cum = 0.0;
    let mut last_positive = None;
    for (k, &p) in row.iter().enumerate() {
        if p > 0.0 {
            cum += p;
            last_positive = Some(k);
            if target < cum {
                return Some(k);
            }
        }
    }
    last_positive
}

/// Where a scheduled flow goes and when.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HopOutcome {
    pub destination: usize,
    /// Time the flow reaches the destination node.
    pub arrival_time: f64,
    /// Time processing of the function finishes there.
    pub ready_time: f64,
}

/// Static context a hop decision needs.
#[derive(Debug, Clone, Copy)]
pub struct Network<'a> {
    pub topology: &'a NetworkTopology,
    pub routing: &'a RoutingTable,
    pub chain: &'a ServiceChain,
}

/// Decides and reserves the next hop of `flow` at time `now` using the
/// uniform draw `u`. On success the flow advances to the destination.
pub fn schedule_hop(
    flow: &mut Flow,
    now: f64,
    x: &SchedulingTensor,
    net: Network<'_>,
    ledger: &mut ReservationLedger,
    u: f64,
) -> Result<HopOutcome, DropReason> {
    let i = flow.current_function;
    let j = flow.current_node;
    debug_assert!(i < net.chain.len());
    let k = sample_destination(x.row(i, j), u).ok_or(DropReason::NoDestination)?;
    let function = &net.chain.functions[i];

    let route = net.routing.path_links(j, k);
    let mut enter = now;
    let mut link_slots = Vec::with_capacity(route.len());
    for &l in route {
        let link = &net.topology.links()[l];
        if !ledger.link_fits(l, enter, enter + flow.duration, flow.rate, link.bandwidth) {
            return Err(DropReason::LinkSaturated);
        }
        link_slots.push((l, enter));
        enter += link.delay;
    }
    let arrival = enter;
    let demand = flow.rate * function.demand_factor;
    if !ledger.node_fits(k, arrival, arrival + flow.duration, demand, net.topology.capacity(k)) {
        return Err(DropReason::NodeSaturated);
    }
    for (l, start) in link_slots {
        ledger.reserve_link(l, start, start + flow.duration, flow.rate);
    }
    ledger.reserve_node(k, arrival, arrival + flow.duration, demand);

    let path_delay = arrival - now;
    flow.accumulated_delay += path_delay + function.processing_delay;
    flow.current_function += 1;
    flow.current_node = k;
    Ok(HopOutcome {
        destination: k,
        arrival_time: arrival,
        ready_time: arrival + function.processing_delay,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum EventKind {
    Decide,
    Complete,
}

#[derive(Debug, Clone, Copy)]
struct Event {
    time: f64,
    flow_id: u64,
    kind: EventKind,
}

impl PartialEq for Event {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Event {}

impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Event {
    fn cmp(&self, other: &Self) -> Ordering {
        self.time
            .total_cmp(&other.time)
            .then(self.flow_id.cmp(&other.flow_id))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventType {
    Arrive,
    Hop,
    Complete,
    Drop,
}

/// One row of the optional debug event log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventRecord {
    pub time: f64,
    pub flow_id: u64,
    pub event: EventType,
    /// Node the event happened at (the destination for hops).
    pub node: usize,
    pub reason: Option<DropReason>,
}

pub fn write_event_log<W: Write>(mut out: W, rows: &[EventRecord]) -> std::io::Result<()> {
    writeln!(out, "time,flow_id,event,node,reason")?;
    for r in rows {
        let event = match r.event {
            EventType::Arrive => "arrive",
            EventType::Hop => "hop",
            EventType::Complete => "complete",
            EventType::Drop => "drop",
        };
        let reason = r.reason.map(|d| format!("{d:?}")).unwrap_or_default();
        writeln!(out, "{},{},{},{},{}", r.time, r.flow_id, event, r.node, reason)?;
    }
    Ok(())
}

/// Simulation state that persists across monitoring periods: pending events,
/// in-flight flows and outstanding reservations.
#[derive(Debug, Clone)]
pub struct Simulator {
    topology: NetworkTopology,
    routing: RoutingTable,
    chain: ServiceChain,
    seed: u64,
    ledger: ReservationLedger,
    queue: BinaryHeap<Reverse<Event>>,
    in_flight: BTreeMap<u64, Flow>,
    now: f64,
    log: Option<Vec<EventRecord>>,
    audit: bool,
    audit_violations: u64,
}

impl Simulator {
    pub fn new(topology: NetworkTopology, chain: ServiceChain, seed: u64) -> Self {
        let routing = shortest_paths(&topology);
        let ledger = ReservationLedger::new(topology.num_nodes(), topology.num_links());
        Self {
            topology,
            routing,
            chain,
            seed,
            ledger,
            queue: BinaryHeap::new(),
            in_flight: BTreeMap::new(),
            now: 0.0,
            log: None,
            audit: false,
            audit_violations: 0,
        }
    }

    /// Records every arrival, hop, completion and drop.
    pub fn with_event_log(mut self) -> Self {
        self.log = Some(Vec::new());
        self
    }

    /// Checks after every event that no node or link is oversubscribed.
    pub fn with_audit(mut self) -> Self {
        self.audit = true;
        self
    }

    pub fn topology(&self) -> &NetworkTopology {
        &self.topology
    }

    pub fn routing(&self) -> &RoutingTable {
        &self.routing
    }

    pub fn chain(&self) -> &ServiceChain {
        &self.chain
    }

    pub fn ledger(&self) -> &ReservationLedger {
        &self.ledger
    }

    pub fn now(&self) -> f64 {
        self.now
    }

    pub fn in_flight(&self) -> usize {
        self.in_flight.len()
    }

    pub fn audit_violations(&self) -> u64 {
        self.audit_violations
    }

    pub fn take_event_log(&mut self) -> Vec<EventRecord> {
        self.log.as_mut().map(std::mem::take).unwrap_or_default()
    }

    fn record(&mut self, time: f64, flow_id: u64, event: EventType, node: usize, reason: Option<DropReason>) {
        if let Some(log) = &mut self.log {
            log.push(EventRecord {
                time,
                flow_id,
                event,
                node,
                reason,
            });
        }
    }

    fn oversubscribed_at(&self, t: f64) -> bool {
        let eps = 1e-9;
        (0..self.topology.num_nodes()).any(|v| self.ledger.node_usage_at(v, t) > self.topology.capacity(v) + eps)
            || self
                .topology
                .links()
                .iter()
                .enumerate()
                .any(|(l, link)| self.ledger.link_usage_at(l, t) > link.bandwidth + eps)
    }

    /// Advances the simulation by one monitoring period `[now, now + mp)`,
    /// injecting `flows` (sorted, arriving inside the window) and scheduling
    /// every hop decided in the window with `x`.
    pub fn run_window(
        &mut self,
        x: &SchedulingTensor,
        flows: Vec<Flow>,
        mp: f64,
    ) -> Result<MonitoringSnapshot, SimError> {
        if !(mp > 0.0) {
            return Err(SimError::InvalidPeriod(mp));
        }
        let n = self.topology.num_nodes();
        if x.num_nodes() != n || x.chain_length() != self.chain.len() {
            return Err(SimError::TensorMismatch {
                nodes: n,
                functions: self.chain.len(),
                found_nodes: x.num_nodes(),
                found_functions: x.chain_length(),
            });
        }
        let start = self.now;
        let end = start + mp;
        let mut last = f64::NEG_INFINITY;
        for f in &flows {
            if f.arrival_time < last {
                return Err(SimError::UnsortedFlows(f.flow_id));
            }
            last = f.arrival_time;
            if f.arrival_time < start || f.arrival_time >= end {
                return Err(SimError::FlowOutsideWindow {
                    flow_id: f.flow_id,
                    time: f.arrival_time,
                    start,
                    end,
                });
            }
            if f.src >= n {
                return Err(SimError::UnknownIngress {
                    flow_id: f.flow_id,
                    node: f.src,
                });
            }
            if self.in_flight.contains_key(&f.flow_id) {
                return Err(SimError::DuplicateFlow(f.flow_id));
            }
        }

        let mut snap = MonitoringSnapshot::empty(n, self.topology.num_links(), start, end);
        snap.carried_in = self.in_flight.len() as u64;
        snap.arrived = flows.len() as u64;
        for f in flows {
            snap.ingress_traffic[f.src] += f.rate;
            self.queue.push(Reverse(Event {
                time: f.arrival_time,
                flow_id: f.flow_id,
                kind: EventKind::Decide,
            }));
            self.record(f.arrival_time, f.flow_id, EventType::Arrive, f.src, None);
            self.in_flight.insert(f.flow_id, f);
        }

        while let Some(Reverse(ev)) = self.queue.peek().copied() {
            if ev.time >= end {
                break;
            }
            self.queue.pop();
            match ev.kind {
                EventKind::Complete => {
                    let flow = self.in_flight.remove(&ev.flow_id).expect("completing flow is in flight");
                    snap.succ_count += 1;
                    snap.total_latency += flow.accumulated_delay;
                    self.record(ev.time, ev.flow_id, EventType::Complete, flow.current_node, None);
                }
                EventKind::Decide => {
                    let mut flow = self.in_flight.remove(&ev.flow_id).expect("deciding flow is in flight");
                    let u = hop_uniform(self.seed, flow.flow_id, flow.current_function);
                    let net = Network {
                        topology: &self.topology,
                        routing: &self.routing,
                        chain: &self.chain,
                    };
                    let at = flow.current_node;
                    match schedule_hop(&mut flow, ev.time, x, net, &mut self.ledger, u) {
                        Ok(hop) => {
                            let kind = if flow.current_function < self.chain.len() {
                                EventKind::Decide
                            } else {
                                EventKind::Complete
                            };
                            self.queue.push(Reverse(Event {
                                time: hop.ready_time,
                                flow_id: flow.flow_id,
                                kind,
                            }));
                            self.record(ev.time, flow.flow_id, EventType::Hop, hop.destination, None);
                            self.in_flight.insert(flow.flow_id, flow);
                        }
                        Err(reason) => {
                            snap.drop_count += 1;
                            snap.drops_by_reason[reason.index()] += 1;
                            self.record(ev.time, flow.flow_id, EventType::Drop, at, Some(reason));
                        }
                    }
                }
            }
            if self.audit && self.oversubscribed_at(ev.time) {
                self.audit_violations += 1;
            }
        }

        for v in 0..n {
            let cap = self.topology.capacity(v);
            if cap > 0.0 {
                snap.load_ratio[v] = (self.ledger.node_usage_integral(v, start, end) / (mp * cap)).clamp(0.0, 1.0);
            }
        }
        for (l, link) in self.topology.links().iter().enumerate() {
            if link.bandwidth > 0.0 {
                snap.bandwidth_ratio[l] =
                    (self.ledger.link_usage_integral(l, start, end) / (mp * link.bandwidth)).clamp(0.0, 1.0);
            }
        }
        self.ledger.prune(end);
        self.now = end;
        snap.carried_out = self.in_flight.len() as u64;
        Ok(snap)
    }
}
