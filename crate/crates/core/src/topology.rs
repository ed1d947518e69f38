//! Network graphs: data-center nodes with compute capacity, undirected links
//! with bandwidth and delay, delay-shortest routing, and the action mask.
//!
//! Two on-disk formats are accepted. GraphML (the subset used by the
//! Internet Topology Zoo, with optional `capacity`, `bandwidth` and `delay`
//! data keys) and a TOML document:
//!
//! ```toml
//! name = "triangle"
//! [[nodes]]
//! id = 0
//! capacity = 4.0
//! ingress = true
//! [[links]]
//! a = 0
//! b = 1
//! bandwidth = 10.0
//! delay = 2.5
//! ```
//!
//! An overrides file uses the same schema with every parameter optional and is
//! merged by node id / unordered link pair. Zoo files carry no capacities, so
//! the overrides sidecar is what makes them usable.

use std::collections::{HashMap, HashSet, VecDeque};
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

/// Largest topology the fixed-size action space accommodates.
pub const DEFAULT_V_MAX: usize = 64;

#[derive(Debug, thiserror::Error)]
pub enum TopologyError {
    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("invalid topology {name:?}: {message}")]
    Validation { name: String, message: String },
    #[error("topology {name:?} has {nodes} nodes, more than the supported maximum of {v_max}")]
    Capacity {
        name: String,
        nodes: usize,
        v_max: usize,
    },
    #[error("topology {name:?}: {what} has no value in the file or the overrides")]
    MissingParameter { name: String, what: String },
    #[error("reading {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T, E = TopologyError> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeSpec {
    pub id: usize,
    pub capacity: f64,
    pub is_ingress: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkSpec {
    pub a: usize,
    pub b: usize,
    pub bandwidth: f64,
    pub delay: f64,
}

impl LinkSpec {
    pub fn connects(&self, x: usize, y: usize) -> bool {
        (self.a == x && self.b == y) || (self.a == y && self.b == x)
    }

    /// The endpoint that is not `x`.
    pub fn other(&self, x: usize) -> usize {
        if self.a == x {
            self.b
        } else {
            self.a
        }
    }
}

/// A validated, connected, undirected network with dense node ids.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkTopology {
    name: String,
    nodes: Vec<NodeSpec>,
    links: Vec<LinkSpec>,
    // link index per ordered node pair, row-major |V| x |V|
    link_index: Vec<Option<usize>>,
}

impl NetworkTopology {
    /// Validates and builds a topology. Nodes may be given in any order but
    /// their ids must be exactly `0..nodes.len()`.
    pub fn new(name: impl Into<String>, mut nodes: Vec<NodeSpec>, links: Vec<LinkSpec>) -> Result<Self> {
        let name = name.into();
        let invalid = |message: String| TopologyError::Validation {
            name: name.clone(),
            message,
        };
        if nodes.is_empty() {
            return Err(invalid("topology has no nodes".into()));
        }
        nodes.sort_by_key(|n| n.id);
        for (expected, node) in nodes.iter().enumerate() {
            if node.id != expected {
                return Err(invalid(format!(
                    "node ids must be dense 0..{}; found id {} where {} was expected",
                    nodes.len(),
                    node.id,
                    expected
                )));
            }
            if !(node.capacity >= 0.0 && node.capacity.is_finite()) {
                return Err(invalid(format!("node {} has invalid capacity {}", node.id, node.capacity)));
            }
        }
        if nodes.len() > DEFAULT_V_MAX {
            return Err(TopologyError::Capacity {
                name,
                nodes: nodes.len(),
                v_max: DEFAULT_V_MAX,
            });
        }
        let n = nodes.len();
        let mut link_index = vec![None; n * n];
        for (idx, link) in links.iter().enumerate() {
            if link.a >= n || link.b >= n {
                return Err(invalid(format!("link {}-{} references an unknown node", link.a, link.b)));
            }
            if link.a == link.b {
                return Err(invalid(format!("link {}-{} is a self loop", link.a, link.b)));
            }
            if !(link.delay > 0.0 && link.delay.is_finite()) {
                return Err(invalid(format!("link {}-{} has non-positive delay {}", link.a, link.b, link.delay)));
            }
            if !(link.bandwidth >= 0.0 && link.bandwidth.is_finite()) {
                return Err(invalid(format!(
                    "link {}-{} has invalid bandwidth {}",
                    link.a, link.b, link.bandwidth
                )));
            }
            if link_index[link.a * n + link.b].is_some() {
                return Err(invalid(format!("duplicate link {}-{}", link.a, link.b)));
            }
            link_index[link.a * n + link.b] = Some(idx);
            link_index[link.b * n + link.a] = Some(idx);
        }
        let disconnected = invalid("graph is not connected".into());
        let topo = Self {
            name,
            nodes,
            links,
            link_index,
        };
        if !topo.is_connected() {
            return Err(disconnected);
        }
        Ok(topo)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn nodes(&self) -> &[NodeSpec] {
        &self.nodes
    }

    pub fn links(&self) -> &[LinkSpec] {
        &self.links
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn num_links(&self) -> usize {
        self.links.len()
    }

    pub fn capacity(&self, node: usize) -> f64 {
        self.nodes[node].capacity
    }

    pub fn link_between(&self, a: usize, b: usize) -> Option<usize> {
        let n = self.num_nodes();
        if a >= n || b >= n {
            return None;
        }
        self.link_index[a * n + b]
    }

    /// Neighbors of `node` in ascending id order.
    pub fn neighbors(&self, node: usize) -> impl Iterator<Item = usize> + '_ {
        let n = self.num_nodes();
        (0..n).filter(move |&k| self.link_index[node * n + k].is_some())
    }

    pub fn ingress_nodes(&self) -> Vec<usize> {
        self.nodes.iter().filter(|n| n.is_ingress).map(|n| n.id).collect()
    }

    /// Symmetric adjacency matrix derived from the link list.
    pub fn adjacency_matrix(&self) -> Vec<Vec<bool>> {
        let n = self.num_nodes();
        (0..n)
            .map(|a| (0..n).map(|b| self.link_index[a * n + b].is_some()).collect())
            .collect()
    }

    /// Copy with node capacities replaced. `capacities.len()` must equal |V|.
    pub fn with_capacities(&self, capacities: &[f64]) -> Result<Self> {
        if capacities.len() != self.num_nodes() {
            return Err(TopologyError::Validation {
                name: self.name.clone(),
                message: format!(
                    "capacity set has {} entries for {} nodes",
                    capacities.len(),
                    self.num_nodes()
                ),
            });
        }
        let nodes = self
            .nodes
            .iter()
            .zip(capacities)
            .map(|(n, &c)| NodeSpec { capacity: c, ..n.clone() })
            .collect();
        Self::new(self.name.clone(), nodes, self.links.clone())
    }

    /// Copy with the ingress flags set exactly on `ingress`.
    pub fn with_ingress(&self, ingress: &[usize]) -> Result<Self> {
        if let Some(&bad) = ingress.iter().find(|&&i| i >= self.num_nodes()) {
            return Err(TopologyError::Validation {
                name: self.name.clone(),
                message: format!("ingress node {bad} does not exist"),
            });
        }
        let set: HashSet<usize> = ingress.iter().copied().collect();
        let nodes = self
            .nodes
            .iter()
            .map(|n| NodeSpec {
                is_ingress: set.contains(&n.id),
                ..n.clone()
            })
            .collect();
        Self::new(self.name.clone(), nodes, self.links.clone())
    }

    /// Relabels nodes: old node `v` becomes `perm[v]`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        let n = self.num_nodes();
        let seen: HashSet<usize> = perm.iter().copied().collect();
        if perm.len() != n || seen.len() != n || perm.iter().any(|&p| p >= n) {
            return Err(TopologyError::Validation {
                name: self.name.clone(),
                message: "node permutation is not a bijection".into(),
            });
        }
        let nodes = self
            .nodes
            .iter()
            .map(|nd| NodeSpec {
                id: perm[nd.id],
                ..nd.clone()
            })
            .collect();
        let links = self
            .links
            .iter()
            .map(|l| LinkSpec {
                a: perm[l.a],
                b: perm[l.b],
                ..l.clone()
            })
            .collect();
        Self::new(self.name.clone(), nodes, links)
    }

    fn is_connected(&self) -> bool {
        let n = self.num_nodes();
        let mut seen = vec![false; n];
        let mut queue = VecDeque::from([0usize]);
        seen[0] = true;
        while let Some(v) = queue.pop_front() {
            for w in self.neighbors(v) {
                if !seen[w] {
                    seen[w] = true;
                    queue.push_back(w);
                }
            }
        }
        seen.into_iter().all(|s| s)
    }
}

// ---------------------------------------------------------------------------
// File formats
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NodeEntry {
    id: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    capacity: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    ingress: Option<bool>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LinkEntry {
    a: usize,
    b: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    bandwidth: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    delay: Option<f64>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TopologyDocument {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    name: Option<String>,
    #[serde(default)]
    nodes: Vec<NodeEntry>,
    #[serde(default)]
    links: Vec<LinkEntry>,
}

/// Partial node/link parameters merged over a topology file by id.
#[derive(Debug, Clone, Default)]
pub struct ParameterOverrides {
    doc: TopologyDocument,
}

impl ParameterOverrides {
    pub fn none() -> Self {
        Self::default()
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = read(path)?;
        Self::parse(&text, path)
    }

    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        Ok(Self {
            doc: parse_toml_document(text, path)?,
        })
    }

    pub fn set_capacity(&mut self, id: usize, capacity: f64) {
        match self.doc.nodes.iter_mut().find(|n| n.id == id) {
            Some(n) => n.capacity = Some(capacity),
            None => self.doc.nodes.push(NodeEntry {
                id,
                capacity: Some(capacity),
                ingress: None,
            }),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.doc.nodes.is_empty() && self.doc.links.is_empty()
    }
}

/// Loads a topology file (GraphML when the extension is `.graphml` or
/// `.xml`, TOML otherwise) and fills missing parameters from `overrides`.
pub fn load_topology(path: impl AsRef<Path>, overrides: &ParameterOverrides) -> Result<NetworkTopology> {
    let path = path.as_ref();
    let text = read(path)?;
    let is_graphml = matches!(
        path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref(),
        Some("graphml" | "xml")
    );
    let doc = if is_graphml {
        parse_graphml_document(&text, path)?
    } else {
        parse_toml_document(&text, path)?
    };
    let fallback_name = path
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("topology")
        .to_string();
    resolve(doc, overrides, fallback_name)
}

/// Parses the TOML topology format from a string.
pub fn parse_topology_toml(text: &str, overrides: &ParameterOverrides) -> Result<NetworkTopology> {
    let doc = parse_toml_document(text, Path::new("<string>"))?;
    resolve(doc, overrides, "topology".into())
}

/// Parses the GraphML subset from a string.
pub fn parse_topology_graphml(text: &str, overrides: &ParameterOverrides) -> Result<NetworkTopology> {
    let doc = parse_graphml_document(text, Path::new("<string>"))?;
    resolve(doc, overrides, "topology".into())
}

/// Serializes a topology to the TOML format.
pub fn topology_to_toml(topo: &NetworkTopology) -> String {
    let doc = TopologyDocument {
        name: Some(topo.name.clone()),
        nodes: topo
            .nodes
            .iter()
            .map(|n| NodeEntry {
                id: n.id,
                capacity: Some(n.capacity),
                ingress: Some(n.is_ingress),
            })
            .collect(),
        links: topo
            .links
            .iter()
            .map(|l| LinkEntry {
                a: l.a,
                b: l.b,
                bandwidth: Some(l.bandwidth),
                delay: Some(l.delay),
            })
            .collect(),
    };
    toml::to_string(&doc).expect("topology documents always serialize")
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|source| TopologyError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].bytes().filter(|&b| b == b'\n').count() + 1
}

fn parse_toml_document(text: &str, path: &Path) -> Result<TopologyDocument> {
    toml::from_str(text).map_err(|e| TopologyError::Parse {
        path: path.to_path_buf(),
        line: e.span().map(|s| line_of(text, s.start)).unwrap_or(1),
        message: e.message().to_string(),
    })
}

fn parse_graphml_document(text: &str, path: &Path) -> Result<TopologyDocument> {
    let parse_err = |line: usize, message: String| TopologyError::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let doc = roxmltree::Document::parse(text).map_err(|e| parse_err(e.pos().row as usize, e.to_string()))?;
    let line = |node: roxmltree::Node| doc.text_pos_at(node.range().start).row as usize;

    // key id -> attribute name
    let mut keys: HashMap<&str, &str> = HashMap::new();
    for key in doc.descendants().filter(|n| n.has_tag_name("key")) {
        if let (Some(id), Some(name)) = (key.attribute("id"), key.attribute("attr.name")) {
            keys.insert(id, name);
        }
    }
    let data_of = |elem: roxmltree::Node| -> HashMap<String, (String, usize)> {
        elem.children()
            .filter(|c| c.has_tag_name("data"))
            .filter_map(|d| {
                let key = d.attribute("key")?;
                let name = keys.get(key).copied().unwrap_or(key);
                Some((name.to_ascii_lowercase(), (d.text().unwrap_or("").trim().to_string(), line(d))))
            })
            .collect()
    };
    let number = |data: &HashMap<String, (String, usize)>, key: &str| -> Result<Option<f64>> {
        match data.get(key) {
            None => Ok(None),
            Some((raw, at)) => raw
                .parse::<f64>()
                .map(Some)
                .map_err(|_| parse_err(*at, format!("{key} value {raw:?} is not a number"))),
        }
    };

    let graph = doc
        .descendants()
        .find(|n| n.has_tag_name("graph"))
        .ok_or_else(|| parse_err(1, "no <graph> element".into()))?;
    let graph_data = data_of(graph);
    let name = graph_data
        .get("label")
        .or_else(|| graph_data.get("network"))
        .map(|(v, _)| v.clone())
        .filter(|v| !v.is_empty());

    let mut raw_ids: HashMap<String, usize> = HashMap::new();
    let mut out = TopologyDocument {
        name,
        ..Default::default()
    };
    for node in graph.children().filter(|n| n.has_tag_name("node")) {
        let raw = node
            .attribute("id")
            .ok_or_else(|| parse_err(line(node), "node without id".into()))?;
        let id: usize = raw
            .trim_start_matches('n')
            .parse()
            .map_err(|_| parse_err(line(node), format!("node id {raw:?} is not an integer")))?;
        if raw_ids.insert(raw.to_string(), id).is_some() {
            return Err(parse_err(line(node), format!("duplicate node id {raw:?}")));
        }
        let data = data_of(node);
        let ingress = match data.get("ingress").or_else(|| data.get("is_ingress")) {
            None => None,
            Some((v, at)) => Some(match v.as_str() {
                "1" | "true" | "True" => true,
                "0" | "false" | "False" => false,
                other => return Err(parse_err(*at, format!("ingress flag {other:?} is not boolean"))),
            }),
        };
        out.nodes.push(NodeEntry {
            id,
            capacity: number(&data, "capacity")?,
            ingress,
        });
    }
    for edge in graph.children().filter(|n| n.has_tag_name("edge")) {
        let endpoint = |attr: &str| -> Result<usize> {
            let raw = edge
                .attribute(attr)
                .ok_or_else(|| parse_err(line(edge), format!("edge without {attr}")))?;
            raw_ids
                .get(raw)
                .copied()
                .ok_or_else(|| parse_err(line(edge), format!("edge {attr} {raw:?} is not a declared node")))
        };
        let data = data_of(edge);
        out.links.push(LinkEntry {
            a: endpoint("source")?,
            b: endpoint("target")?,
            bandwidth: number(&data, "bandwidth")?,
            delay: number(&data, "delay")?,
        });
    }
    Ok(out)
}

fn resolve(doc: TopologyDocument, overrides: &ParameterOverrides, fallback_name: String) -> Result<NetworkTopology> {
    let name = overrides.doc.name.clone().or(doc.name).unwrap_or(fallback_name);
    let node_over: HashMap<usize, &NodeEntry> = overrides.doc.nodes.iter().map(|n| (n.id, n)).collect();
    let link_key = |a: usize, b: usize| (a.min(b), a.max(b));
    let link_over: HashMap<(usize, usize), &LinkEntry> =
        overrides.doc.links.iter().map(|l| (link_key(l.a, l.b), l)).collect();

    let declared: HashSet<usize> = doc.nodes.iter().map(|n| n.id).collect();
    if let Some(id) = node_over.keys().find(|id| !declared.contains(id)) {
        return Err(TopologyError::Validation {
            name,
            message: format!("overrides reference unknown node {id}"),
        });
    }
    let declared_links: HashSet<(usize, usize)> = doc.links.iter().map(|l| link_key(l.a, l.b)).collect();
    if let Some((a, b)) = link_over.keys().find(|k| !declared_links.contains(k)) {
        return Err(TopologyError::Validation {
            name,
            message: format!("overrides reference unknown link {a}-{b}"),
        });
    }

    let mut nodes = Vec::with_capacity(doc.nodes.len());
    for entry in &doc.nodes {
        let over = node_over.get(&entry.id);
        let capacity = over
            .and_then(|o| o.capacity)
            .or(entry.capacity)
            .ok_or_else(|| TopologyError::MissingParameter {
                name: name.clone(),
                what: format!("capacity of node {}", entry.id),
            })?;
        let is_ingress = over.and_then(|o| o.ingress).or(entry.ingress).unwrap_or(false);
        nodes.push(NodeSpec {
            id: entry.id,
            capacity,
            is_ingress,
        });
    }
    let mut links = Vec::with_capacity(doc.links.len());
    for entry in &doc.links {
        let over = link_over.get(&link_key(entry.a, entry.b));
        let missing = |what: &str| TopologyError::MissingParameter {
            name: name.clone(),
            what: format!("{what} of link {}-{}", entry.a, entry.b),
        };
        links.push(LinkSpec {
            a: entry.a,
            b: entry.b,
            bandwidth: over
                .and_then(|o| o.bandwidth)
                .or(entry.bandwidth)
                .ok_or_else(|| missing("bandwidth"))?,
            delay: over.and_then(|o| o.delay).or(entry.delay).ok_or_else(|| missing("delay"))?,
        });
    }
    NetworkTopology::new(name, nodes, links)
}

// ---------------------------------------------------------------------------
// Routing
// ---------------------------------------------------------------------------

/// All-pairs delay-shortest routes.
#[derive(Debug, Clone, PartialEq)]
pub struct RoutingTable {
    n: usize,
    next_hop: Vec<Option<usize>>,
    path_delay: Vec<f64>,
    path_links: Vec<Vec<usize>>,
}

impl RoutingTable {
    pub fn num_nodes(&self) -> usize {
        self.n
    }

    /// Next node on the route from `src` to `dst`; `None` when `src == dst`.
    pub fn next_hop(&self, src: usize, dst: usize) -> Option<usize> {
        self.next_hop[src * self.n + dst]
    }

    pub fn path_delay(&self, src: usize, dst: usize) -> f64 {
        self.path_delay[src * self.n + dst]
    }

    /// Link indices traversed from `src` to `dst`, in order.
    pub fn path_links(&self, src: usize, dst: usize) -> &[usize] {
        &self.path_links[src * self.n + dst]
    }

    /// Node sequence from `src` to `dst`, both ends included.
    pub fn path_nodes(&self, src: usize, dst: usize) -> Vec<usize> {
        let mut path = vec![src];
        let mut at = src;
        while let Some(next) = self.next_hop(at, dst) {
            path.push(next);
            at = next;
        }
        path
    }
}

fn same_length(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9 * a.abs().max(b.abs()).max(1.0)
}

/// Delay-minimal routes between every ordered pair. Among equal-delay routes
/// the lowest-id next hop wins at every step, so routes are suffix-closed.
pub fn shortest_paths(topo: &NetworkTopology) -> RoutingTable {
    let n = topo.num_nodes();
    let mut dist = vec![f64::INFINITY; n * n];
    for v in 0..n {
        dist[v * n + v] = 0.0;
    }
    for l in topo.links() {
        dist[l.a * n + l.b] = dist[l.a * n + l.b].min(l.delay);
        dist[l.b * n + l.a] = dist[l.b * n + l.a].min(l.delay);
    }
    for m in 0..n {
        for i in 0..n {
            let im = dist[i * n + m];
            if !im.is_finite() {
                continue;
            }
            for j in 0..n {
                let cand = im + dist[m * n + j];
                if cand < dist[i * n + j] {
                    dist[i * n + j] = cand;
                }
            }
        }
    }

    let mut next_hop = vec![None; n * n];
    for src in 0..n {
        for dst in 0..n {
            if src == dst {
                continue;
            }
            let target = dist[src * n + dst];
            next_hop[src * n + dst] = topo.neighbors(src).find(|&w| {
                let l = topo.link_between(src, w).expect("neighbor has a link");
                same_length(topo.links()[l].delay + dist[w * n + dst], target)
            });
        }
    }

    let mut path_links = vec![Vec::new(); n * n];
    let mut path_delay = vec![0.0; n * n];
    for src in 0..n {
        for dst in 0..n {
            let mut at = src;
            let mut links = Vec::new();
            let mut delay = 0.0;
            while let Some(next) = next_hop[at * n + dst] {
                let l = topo.link_between(at, next).expect("route follows links");
                links.push(l);
                delay += topo.links()[l].delay;
                at = next;
            }
            path_links[src * n + dst] = links;
            path_delay[src * n + dst] = delay;
        }
    }
    RoutingTable {
        n,
        next_hop,
        path_delay,
        path_links,
    }
}

// ---------------------------------------------------------------------------
// Action mask
// ---------------------------------------------------------------------------

/// Boolean `chain_length x v_max x v_max` tensor marking the scheduling
/// entries that exist for the current topology. An entry `[i][j][k]` is valid
/// iff both `j` and `k` index real nodes, so the mask is fully determined by
/// |V| and is stored that way.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActionMask {
    chain_length: usize,
    v_max: usize,
    num_nodes: usize,
}

impl ActionMask {
    pub fn new(num_nodes: usize, chain_length: usize, v_max: usize) -> Self {
        assert!(num_nodes <= v_max, "{num_nodes} nodes exceed v_max {v_max}");
        Self {
            chain_length,
            v_max,
            num_nodes,
        }
    }

    pub fn chain_length(&self) -> usize {
        self.chain_length
    }

    pub fn v_max(&self) -> usize {
        self.v_max
    }

    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    /// `[chain_length, v_max, v_max]`
    pub fn shape(&self) -> [usize; 3] {
        [self.chain_length, self.v_max, self.v_max]
    }

    /// Total number of entries, valid or not.
    pub fn len(&self) -> usize {
        self.chain_length * self.v_max * self.v_max
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_valid(&self, i: usize, j: usize, k: usize) -> bool {
        i < self.chain_length && j < self.num_nodes && k < self.num_nodes
    }

    /// Row-major `(i, j, k)` flat index.
    pub fn flat_index(&self, i: usize, j: usize, k: usize) -> usize {
        (i * self.v_max + j) * self.v_max + k
    }

    pub fn is_valid_flat(&self, flat: usize) -> bool {
        let k = flat % self.v_max;
        let j = (flat / self.v_max) % self.v_max;
        let i = flat / (self.v_max * self.v_max);
        self.is_valid(i, j, k)
    }

    pub fn count_valid(&self) -> usize {
        self.chain_length * self.num_nodes * self.num_nodes
    }

    /// Flat indices of the valid entries in ascending order.
    pub fn valid_indices(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.chain_length).flat_map(move |i| {
            (0..self.num_nodes)
                .flat_map(move |j| (0..self.num_nodes).map(move |k| self.flat_index(i, j, k)))
        })
    }

    pub fn to_dense(&self) -> Vec<bool> {
        (0..self.len()).map(|f| self.is_valid_flat(f)).collect()
    }
}

/// Mask for `topo` with `chain_length` functions in a `v_max`-wide action space.
pub fn build_mask(topo: &NetworkTopology, chain_length: usize, v_max: usize) -> Result<ActionMask> {
    if topo.num_nodes() > v_max {
        return Err(TopologyError::Capacity {
            name: topo.name().to_string(),
            nodes: topo.num_nodes(),
            v_max,
        });
    }
    Ok(ActionMask::new(topo.num_nodes(), chain_length, v_max))
}
