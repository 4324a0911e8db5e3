//! Network, stream and batch data model.
//!
//! All times are integral macro ticks (1 µs). Link rates are bits per macro
//! tick, so a 1 Gbit/s link has rate 1000.

use std::collections::{HashMap, HashSet, VecDeque};
use std::fmt;

use num_rational::Ratio;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Rate of a 1 Gbit/s link in bits per macro tick.
pub const GIGABIT_RATE: u64 = 1000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(pub u32);

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "n{}", self.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct StreamId(pub u32);

impl fmt::Display for StreamId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "s{}", self.0)
    }
}

/// Index of a directed link inside its [`Network`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct LinkId(pub u32);

impl LinkId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeKind {
    Bridge,
    EndDevice,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Node {
    pub id: NodeId,
    pub kind: NodeKind,
    /// Only meaningful for bridges.
    #[serde(default)]
    pub processing_delay: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Link {
    pub from: NodeId,
    pub to: NodeId,
    /// Bits per macro tick.
    pub rate: u64,
    #[serde(default)]
    pub propagation_delay: u64,
}

#[derive(Serialize, Deserialize)]
struct NetworkDoc {
    nodes: Vec<Node>,
    links: Vec<Link>,
}

/// Directed-link topology of bridges and end devices.
///
/// Construction never fails; use [`Network::validate`] to list invariant
/// violations. Links with dangling endpoints are kept but never traversed.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(from = "NetworkDoc", into = "NetworkDoc")]
pub struct Network {
    nodes: Vec<Node>,
    links: Vec<Link>,
    index: HashMap<NodeId, usize>,
    out_links: Vec<Vec<LinkId>>,
    in_links: Vec<Vec<LinkId>>,
    by_endpoints: HashMap<(NodeId, NodeId), LinkId>,
}

impl From<NetworkDoc> for Network {
    fn from(doc: NetworkDoc) -> Self {
        Network::new(doc.nodes, doc.links)
    }
}

impl From<Network> for NetworkDoc {
    fn from(net: Network) -> Self {
        NetworkDoc { nodes: net.nodes, links: net.links }
    }
}

impl Network {
    pub fn new(nodes: Vec<Node>, links: Vec<Link>) -> Self {
        let mut index = HashMap::with_capacity(nodes.len());
        for (i, n) in nodes.iter().enumerate() {
            index.entry(n.id).or_insert(i);
        }
        let mut out_links = vec![Vec::new(); nodes.len()];
        let mut in_links = vec![Vec::new(); nodes.len()];
        let mut by_endpoints = HashMap::with_capacity(links.len());
        for (i, l) in links.iter().enumerate() {
            let id = LinkId(i as u32);
            if let (Some(&f), Some(&t)) = (index.get(&l.from), index.get(&l.to)) {
                out_links[f].push(id);
                in_links[t].push(id);
                by_endpoints.entry((l.from, l.to)).or_insert(id);
            }
        }
        Network { nodes, links, index, out_links, in_links, by_endpoints }
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn links(&self) -> &[Link] {
        &self.links
    }

    pub fn node(&self, id: NodeId) -> Option<&Node> {
        self.index.get(&id).map(|&i| &self.nodes[i])
    }

    pub fn link(&self, id: LinkId) -> &Link {
        &self.links[id.index()]
    }

    pub fn link_between(&self, from: NodeId, to: NodeId) -> Option<LinkId> {
        self.by_endpoints.get(&(from, to)).copied()
    }

    pub fn out_links(&self, id: NodeId) -> &[LinkId] {
        self.index.get(&id).map(|&i| self.out_links[i].as_slice()).unwrap_or(&[])
    }

    pub fn in_links(&self, id: NodeId) -> &[LinkId] {
        self.index.get(&id).map(|&i| self.in_links[i].as_slice()).unwrap_or(&[])
    }

    pub fn is_bridge(&self, id: NodeId) -> bool {
        matches!(self.node(id), Some(n) if n.kind == NodeKind::Bridge)
    }

    pub fn is_end_device(&self, id: NodeId) -> bool {
        matches!(self.node(id), Some(n) if n.kind == NodeKind::EndDevice)
    }

    pub fn end_devices(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.nodes.iter().filter(|n| n.kind == NodeKind::EndDevice).map(|n| n.id)
    }

    pub fn bridges(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.nodes.iter().filter(|n| n.kind == NodeKind::Bridge).map(|n| n.id)
    }

    /// Processing delay charged when a frame traverses `id`. End devices
    /// never forward, so they contribute nothing.
    pub fn processing_delay(&self, id: NodeId) -> u64 {
        match self.node(id) {
            Some(n) if n.kind == NodeKind::Bridge => n.processing_delay,
            _ => 0,
        }
    }

    /// Lists every invariant violation, or `Ok` if there is none.
    pub fn validate(&self) -> std::result::Result<(), Vec<NetworkViolation>> {
        let mut violations = Vec::new();

        let mut seen = HashSet::new();
        for n in &self.nodes {
            if !seen.insert(n.id) {
                violations.push(NetworkViolation::DuplicateNode(n.id));
            }
        }

        for (i, l) in self.links.iter().enumerate() {
            for end in [l.from, l.to] {
                if !self.index.contains_key(&end) {
                    violations.push(NetworkViolation::DanglingEndpoint { link: i, node: end });
                }
            }
            if l.from == l.to {
                violations.push(NetworkViolation::SelfLoop(i));
            }
            if l.rate == 0 {
                violations.push(NetworkViolation::NonPositiveRate(i));
            }
        }

        // Undirected connectivity of the bridge subgraph.
        let bridges: Vec<NodeId> = self.bridges().collect();
        if let Some(&start) = bridges.first() {
            let mut reached = HashSet::from([start]);
            let mut queue = VecDeque::from([start]);
            while let Some(u) = queue.pop_front() {
                let neighbors = self
                    .out_links(u)
                    .iter()
                    .map(|&l| self.link(l).to)
                    .chain(self.in_links(u).iter().map(|&l| self.link(l).from));
                for v in neighbors {
                    if self.is_bridge(v) && reached.insert(v) {
                        queue.push_back(v);
                    }
                }
            }
            if reached.len() < bridges.len() {
                violations.push(NetworkViolation::Disconnected { reached: reached.len(), bridges: bridges.len() });
            }
        }

        if violations.is_empty() {
            Ok(())
        } else {
            Err(violations)
        }
    }
}

pub fn validate_network(net: &Network) -> std::result::Result<(), Vec<NetworkViolation>> {
    net.validate()
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum NetworkViolation {
    DuplicateNode(NodeId),
    DanglingEndpoint { link: usize, node: NodeId },
    SelfLoop(usize),
    NonPositiveRate(usize),
    Disconnected { reached: usize, bridges: usize },
}

impl fmt::Display for NetworkViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NetworkViolation::DuplicateNode(n) => write!(f, "duplicate node id {n}"),
            NetworkViolation::DanglingEndpoint { link, node } => {
                write!(f, "dangling endpoint: link {link} references missing node {node}")
            }
            NetworkViolation::SelfLoop(l) => write!(f, "self loop on link {l}"),
            NetworkViolation::NonPositiveRate(l) => write!(f, "nonpositive rate on link {l}"),
            NetworkViolation::Disconnected { reached, bridges } => {
                write!(f, "disconnected: only {reached} of {bridges} bridges reachable")
            }
        }
    }
}

/// A periodic unicast time-triggered stream. The deadline always equals the
/// period.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Stream {
    pub id: StreamId,
    pub src: NodeId,
    pub dst: NodeId,
    /// Macro ticks.
    pub period: u64,
    /// Bytes.
    pub size: u64,
    /// Macro ticks; equal to `period`.
    pub deadline: u64,
}

impl Stream {
    pub fn new(id: StreamId, src: NodeId, dst: NodeId, period: u64, size: u64) -> Result<Self> {
        let s = Stream { id, src, dst, period, size, deadline: period };
        s.check()?;
        Ok(s)
    }

    /// Checks the network-independent invariants.
    pub fn check(&self) -> Result<()> {
        let fail = |reason: &str| Err(Error::InvalidStream { id: self.id, reason: reason.to_string() });
        if self.period == 0 {
            return fail("period must be positive");
        }
        if self.size == 0 {
            return fail("size must be positive");
        }
        if self.src == self.dst {
            return fail("src equals dst");
        }
        if self.deadline != self.period {
            return fail("deadline must equal period");
        }
        Ok(())
    }

    /// Checks all invariants, including that both endpoints are end devices.
    pub fn check_in(&self, net: &Network) -> Result<()> {
        self.check()?;
        if !net.is_end_device(self.src) || !net.is_end_device(self.dst) {
            return Err(Error::InvalidStream { id: self.id, reason: "src and dst must be end devices".to_string() });
        }
        Ok(())
    }
}

/// Traffic volume in bytes per macro tick, exact.
pub fn traffic_volume(stream: &Stream) -> Ratio<u64> {
    Ratio::new(stream.size, stream.period)
}

/// Least common multiple of the given periods.
///
/// Panics on an empty slice or on u64 overflow.
pub fn hypercycle(periods: &[u64]) -> u64 {
    checked_hypercycle(periods).expect("hypercycle of an empty or overflowing period set")
}

pub fn checked_hypercycle(periods: &[u64]) -> Option<u64> {
    let (&first, rest) = periods.split_first()?;
    rest.iter().try_fold(first, |acc, &p| {
        let g = num_integer::gcd(acc, p);
        (acc / g).checked_mul(p)
    })
}

/// One dynamic update: streams to admit and previously admitted streams to
/// remove.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StreamBatch {
    pub iteration: usize,
    pub add: Vec<Stream>,
    pub delete: Vec<StreamId>,
}
