//! Interval reservations of node capacity and link bandwidth.

/// `amount` units held over the half-open interval `[start, end)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Reservation {
    pub start: f64,
    pub end: f64,
    pub amount: f64,
}

impl Reservation {
    fn overlaps(&self, start: f64, end: f64) -> bool {
        self.start < end && start < self.end
    }

    fn overlap_len(&self, start: f64, end: f64) -> f64 {
        (self.end.min(end) - self.start.max(start)).max(0.0)
    }
}

/// Slack for comparing accumulated amounts against capacities.
const EPS: f64 = 1e-9;

/// Peak concurrent amount over `[start, end)`. Usage is piecewise constant
/// and only rises at reservation starts, so checking `start` and every
/// reservation start inside the interval suffices.
fn peak(list: &[Reservation], start: f64, end: f64) -> f64 {
    let at = |t: f64| -> f64 {
        list.iter()
            .filter(|r| r.start <= t && t < r.end)
            .map(|r| r.amount)
            .sum()
    };
    let mut best = at(start);
    for r in list {
        if r.start > start && r.start < end {
            best = best.max(at(r.start));
        }
    }
    best
}

#[derive(Debug, Clone, Default)]
pub struct ReservationLedger {
    nodes: Vec<Vec<Reservation>>,
    links: Vec<Vec<Reservation>>,
}

impl ReservationLedger {
    pub fn new(num_nodes: usize, num_links: usize) -> Self {
        Self {
            nodes: vec![Vec::new(); num_nodes],
            links: vec![Vec::new(); num_links],
        }
    }

    pub fn node_peak(&self, node: usize, start: f64, end: f64) -> f64 {
        peak(&self.nodes[node], start, end)
    }

    pub fn link_peak(&self, link: usize, start: f64, end: f64) -> f64 {
        peak(&self.links[link], start, end)
    }

    /// Whether `amount` more fits under `capacity` throughout `[start, end)`.
    pub fn node_fits(&self, node: usize, start: f64, end: f64, amount: f64, capacity: f64) -> bool {
        self.node_peak(node, start, end) + amount <= capacity + EPS
    }

    pub fn link_fits(&self, link: usize, start: f64, end: f64, amount: f64, bandwidth: f64) -> bool {
        self.link_peak(link, start, end) + amount <= bandwidth + EPS
    }

    pub fn reserve_node(&mut self, node: usize, start: f64, end: f64, amount: f64) {
        self.nodes[node].push(Reservation { start, end, amount });
    }

    pub fn reserve_link(&mut self, link: usize, start: f64, end: f64, amount: f64) {
        self.links[link].push(Reservation { start, end, amount });
    }

    pub fn node_usage_at(&self, node: usize, t: f64) -> f64 {
        self.nodes[node]
            .iter()
            .filter(|r| r.start <= t && t < r.end)
            .map(|r| r.amount)
            .sum()
    }

    pub fn link_usage_at(&self, link: usize, t: f64) -> f64 {
        self.links[link]
            .iter()
            .filter(|r| r.start <= t && t < r.end)
            .map(|r| r.amount)
            .sum()
    }

    /// Integral of reserved node amount over `[start, end)`.
    pub fn node_usage_integral(&self, node: usize, start: f64, end: f64) -> f64 {
        self.nodes[node]
            .iter()
            .filter(|r| r.overlaps(start, end))
            .map(|r| r.amount * r.overlap_len(start, end))
            .sum()
    }

    pub fn link_usage_integral(&self, link: usize, start: f64, end: f64) -> f64 {
        self.links[link]
            .iter()
            .filter(|r| r.overlaps(start, end))
            .map(|r| r.amount * r.overlap_len(start, end))
            .sum()
    }

    /// Forgets reservations that ended at or before `t`.
    pub fn prune(&mut self, t: f64) {
        for list in self.nodes.iter_mut().chain(self.links.iter_mut()) {
            list.retain(|r| r.end > t);
        }
    }

    pub fn clear(&mut self) {
        for list in self.nodes.iter_mut().chain(self.links.iter_mut()) {
            list.clear();
        }
    }

    pub fn node_reservations(&self, node: usize) -> &[Reservation] {
        &self.nodes[node]
    }

    pub fn link_reservations(&self, link: usize) -> &[Reservation] {
        &self.links[link]
    }
}
