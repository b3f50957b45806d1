//! Quantum data center network topologies.
//!
//! A [`NetworkTopology`] is an undirected graph of QPUs and optical switches.
//! QPUs always occupy node ids `0..qpu_count()`, followed by the switches.
//! Each node carries the quantum devices installed on it; which devices a
//! node gets is decided by its kind when the topology is built:
//!
//! * QPUs hold communication and data qubits.
//! * ToR switches hold the NIR Bell-state analysers, beam-splitter ports,
//!   entanglement sources and detectors used by intra- and inter-rack ebits.
//! * Telecom switches listed in the topology's BSM tiers hold the telecom
//!   BSMs used by inter-rack ebits. For Clos this is the core layer only.
//! * Level switches of server-centric topologies hold NIR BSMs.

mod build;
mod export;
mod paths;

pub use build::*;
pub use export::write_node_edge_list;
pub use paths::{PathKind, PathSpec, Resource};

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(pub u32);

impl NodeId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl std::fmt::Display for NodeId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeKind {
    Qpu,
    TorSwitch,
    CoreSwitch,
    AggregationSwitch,
    LevelSwitch,
}

impl NodeKind {
    pub fn as_str(self) -> &'static str {
        match self {
            NodeKind::Qpu => "qpu",
            NodeKind::TorSwitch => "tor_switch",
            NodeKind::CoreSwitch => "core_switch",
            NodeKind::AggregationSwitch => "aggregation_switch",
            NodeKind::LevelSwitch => "level_switch",
        }
    }

    pub fn is_switch(self) -> bool {
        self != NodeKind::Qpu
    }
}

/// Frequency band of a fiber bundle.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Band {
    Nir,
    Telecom,
}

impl Band {
    pub fn as_str(self) -> &'static str {
        match self {
            Band::Nir => "nir",
            Band::Telecom => "telecom",
        }
    }
}

fn default_comm() -> u32 {
    4
}
fn default_data() -> u32 {
    10
}
fn default_bsm() -> u32 {
    4
}

/// Per-node device counts applied at build time.
///
/// QPU fields apply to every QPU, switch fields to every switch that hosts
/// the corresponding device class. Beam-splitter ports default to twice the
/// BSM count so that the port and BSM constraints coincide.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResourceInventory {
    #[serde(default = "default_comm")]
    pub comm_qubits: u32,
    #[serde(default = "default_data")]
    pub data_qubits: u32,
    #[serde(default = "default_bsm")]
    pub bsm_count: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bs_ports: Option<u32>,
    #[serde(default = "default_bsm")]
    pub ent_sources: u32,
    #[serde(default = "default_bsm")]
    pub detectors: u32,
    /// BSMs on telecom-tier switches; `bsm_count` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub telecom_bsm_count: Option<u32>,
}

impl Default for ResourceInventory {
    fn default() -> Self {
        Self {
            comm_qubits: default_comm(),
            data_qubits: default_data(),
            bsm_count: default_bsm(),
            bs_ports: None,
            ent_sources: default_bsm(),
            detectors: default_bsm(),
            telecom_bsm_count: None,
        }
    }
}

impl ResourceInventory {
    /// Same count of every switch device.
    pub fn uniform(comm_qubits: u32, data_qubits: u32, per_switch: u32) -> Self {
        Self {
            comm_qubits,
            data_qubits,
            bsm_count: per_switch,
            bs_ports: None,
            ent_sources: per_switch,
            detectors: per_switch,
            telecom_bsm_count: None,
        }
    }

    pub fn with_telecom_bsms(mut self, count: u32) -> Self {
        self.telecom_bsm_count = Some(count);
        self
    }

    pub fn telecom_bsms(&self) -> u32 {
        self.telecom_bsm_count.unwrap_or(self.bsm_count)
    }

    pub fn beam_splitter_ports(&self) -> u32 {
        self.bs_ports.unwrap_or(2 * self.bsm_count)
    }
}

/// Devices installed on one node.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeResources {
    pub comm_qubits: u32,
    pub data_qubits: u32,
    pub bsm: u32,
    pub bs_ports: u32,
    pub sources: u32,
    pub detectors: u32,
}

impl NodeResources {
    pub fn capacity(&self, resource: Resource) -> u32 {
        match resource {
            Resource::CommQubit => self.comm_qubits,
            Resource::Bsm => self.bsm,
            Resource::BsPort => self.bs_ports,
            Resource::Source => self.sources,
            Resource::Detector => self.detectors,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Node {
    pub id: NodeId,
    pub kind: NodeKind,
    pub rack: Option<u32>,
    pub resources: NodeResources,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Link {
    pub a: NodeId,
    pub b: NodeId,
    pub band: Band,
}

/// One rack: its top-of-rack switch (if the kind has one) and its QPUs.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rack {
    pub tor: Option<NodeId>,
    pub qpus: Vec<NodeId>,
}

/// How [`NetworkTopology::diameter`] counts hops.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum HopMetric {
    /// Every link is one hop.
    Links,
    /// QPU-to-QPU hops; crossing a switch counts once.
    Qpu,
    /// Inter-rack hops.
    Rack,
}

#[derive(Clone, Debug)]
pub struct NetworkTopology {
    shape: TopologySpec,
    nodes: Vec<Node>,
    adjacency: Vec<Vec<NodeId>>,
    links: Vec<Link>,
    racks: Vec<Rack>,
    qpu_count: usize,
    bsm_tiers: Vec<NodeKind>,
    warnings: Vec<String>,
}

impl NetworkTopology {
    pub fn shape(&self) -> &TopologySpec {
        &self.shape
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn node(&self, id: NodeId) -> &Node {
        &self.nodes[id.index()]
    }

    pub fn links(&self) -> &[Link] {
        &self.links
    }

    pub fn neighbors(&self, id: NodeId) -> &[NodeId] {
        &self.adjacency[id.index()]
    }

    pub fn racks(&self) -> &[Rack] {
        &self.racks
    }

    pub fn qpu_count(&self) -> usize {
        self.qpu_count
    }

    pub fn qpus(&self) -> impl Iterator<Item = NodeId> {
        (0..self.qpu_count as u32).map(NodeId)
    }

    pub fn switch_count(&self) -> usize {
        self.nodes.len() - self.qpu_count
    }

    pub fn count_kind(&self, kind: NodeKind) -> usize {
        self.nodes.iter().filter(|n| n.kind == kind).count()
    }

    /// Switch kinds that host telecom BSMs for inter-rack ebits.
    pub fn bsm_tiers(&self) -> &[NodeKind] {
        &self.bsm_tiers
    }

    /// Deviations from closed-form counts noticed while building.
    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    pub fn rack_of(&self, qpu: NodeId) -> Option<u32> {
        self.nodes.get(qpu.index()).and_then(|n| n.rack)
    }

    pub fn is_server_centric(&self) -> bool {
        self.shape.is_server_centric()
    }

    /// Whether the orchestrator can route and schedule ebits end to end.
    pub fn is_schedulable(&self) -> bool {
        matches!(
            self.shape,
            TopologySpec::Clos { .. } | TopologySpec::TwoTier { .. } | TopologySpec::FatTree { .. }
        )
    }

    /// BFS hop distances from `src` to every node (`u32::MAX` if unreachable).
    pub fn bfs(&self, src: NodeId) -> Vec<u32> {
        let mut dist = vec![u32::MAX; self.nodes.len()];
        let mut queue = VecDeque::new();
        dist[src.index()] = 0;
        queue.push_back(src);
        while let Some(u) = queue.pop_front() {
            let du = dist[u.index()];
            for &v in &self.adjacency[u.index()] {
                if dist[v.index()] == u32::MAX {
                    dist[v.index()] = du + 1;
                    queue.push_back(v);
                }
            }
        }
        dist
    }

    pub fn hop_metric(&self) -> HopMetric {
        match self.shape {
            TopologySpec::BCube { .. } | TopologySpec::DCell { .. } => HopMetric::Qpu,
            TopologySpec::Linear { .. } | TopologySpec::Grid { .. } => HopMetric::Rack,
            _ => HopMetric::Links,
        }
    }

    /// Longest shortest path between QPUs, measured in the kind's natural
    /// hop metric (see [`HopMetric`]).
    pub fn diameter(&self) -> Result<u32> {
        match self.hop_metric() {
            HopMetric::Links => {
                let mut best = 0;
                for q in self.qpus() {
                    let dist = self.bfs(q);
                    for r in self.qpus() {
                        let d = dist[r.index()];
                        if d == u32::MAX {
                            return Err(Error::Disconnected);
                        }
                        best = best.max(d);
                    }
                }
                Ok(best)
            }
            HopMetric::Qpu => {
                let mut best = 0;
                for q in self.qpus() {
                    let dist = self.qpu_hops(q);
                    for d in dist {
                        if d == u32::MAX {
                            return Err(Error::Disconnected);
                        }
                        best = best.max(d);
                    }
                }
                Ok(best)
            }
            HopMetric::Rack => {
                let mut best = 0;
                for r in 0..self.racks.len() as u32 {
                    for d in self.rack_hops(r) {
                        if d == u32::MAX {
                            return Err(Error::Disconnected);
                        }
                        best = best.max(d);
                    }
                }
                Ok(best)
            }
        }
    }

    /// Hop counts between QPUs where crossing one switch is a single hop.
    pub fn qpu_hops(&self, src: NodeId) -> Vec<u32> {
        let mut dist = vec![u32::MAX; self.qpu_count];
        let mut queue = VecDeque::new();
        dist[src.index()] = 0;
        queue.push_back(src);
        while let Some(u) = queue.pop_front() {
            let du = dist[u.index()];
            for &v in &self.adjacency[u.index()] {
                let reach = |w: NodeId, dist: &mut Vec<u32>, queue: &mut VecDeque<NodeId>| {
                    if w.index() < self.qpu_count && dist[w.index()] == u32::MAX {
                        dist[w.index()] = du + 1;
                        queue.push_back(w);
                    }
                };
                if self.nodes[v.index()].kind == NodeKind::Qpu {
                    reach(v, &mut dist, &mut queue);
                } else {
                    for &w in &self.adjacency[v.index()] {
                        reach(w, &mut dist, &mut queue);
                    }
                }
            }
        }
        dist
    }

    /// Rack adjacency: racks joined by at least one inter-rack switch.
    fn rack_neighbors(&self, rack: u32) -> Vec<u32> {
        let mut out = Vec::new();
        for &q in &self.racks[rack as usize].qpus {
            for &s in self.neighbors(q) {
                if self.nodes[s.index()].kind != NodeKind::LevelSwitch {
                    continue;
                }
                for &w in self.neighbors(s) {
                    if let Some(r) = self.nodes[w.index()].rack {
                        if r != rack && !out.contains(&r) {
                            out.push(r);
                        }
                    }
                }
            }
        }
        out.sort_unstable();
        out
    }

    /// Inter-rack hop counts from `rack` to every rack.
    pub fn rack_hops(&self, rack: u32) -> Vec<u32> {
        let mut dist = vec![u32::MAX; self.racks.len()];
        let mut queue = VecDeque::new();
        dist[rack as usize] = 0;
        queue.push_back(rack);
        while let Some(r) = queue.pop_front() {
            let dr = dist[r as usize];
            for s in self.rack_neighbors(r) {
                if dist[s as usize] == u32::MAX {
                    dist[s as usize] = dr + 1;
                    queue.push_back(s);
                }
            }
        }
        dist
    }

    /// Maximum number of internally node-disjoint paths between two QPUs
    /// (unit-capacity max-flow on the node-split graph).
    pub fn disjoint_path_count(&self, a: NodeId, b: NodeId) -> usize {
        // Node v splits into in = 2v, out = 2v+1.
        let n = self.nodes.len();
        let mut cap = std::collections::HashMap::<(usize, usize), i32>::new();
        let mut adj = vec![Vec::new(); 2 * n];
        let mut add = |u: usize, v: usize, c: i32, cap: &mut std::collections::HashMap<(usize, usize), i32>| {
            *cap.entry((u, v)).or_insert(0) += c;
            cap.entry((v, u)).or_insert(0);
            adj[u].push(v);
            adj[v].push(u);
        };
        for v in 0..n {
            let c = if v == a.index() || v == b.index() { n as i32 } else { 1 };
            add(2 * v, 2 * v + 1, c, &mut cap);
        }
        for link in &self.links {
            let (x, y) = (link.a.index(), link.b.index());
            add(2 * x + 1, 2 * y, 1, &mut cap);
            add(2 * y + 1, 2 * x, 1, &mut cap);
        }
        let (s, t) = (2 * a.index() + 1, 2 * b.index());
        let mut flow = 0;
        loop {
            let mut prev = vec![usize::MAX; 2 * n];
            prev[s] = s;
            let mut queue = VecDeque::from([s]);
            while let Some(u) = queue.pop_front() {
                if u == t {
                    break;
                }
                for &v in &adj[u] {
                    if prev[v] == usize::MAX && cap[&(u, v)] > 0 {
                        prev[v] = u;
                        queue.push_back(v);
                    }
                }
            }
            if prev[t] == usize::MAX {
                return flow;
            }
            let mut v = t;
            while v != s {
                let u = prev[v];
                *cap.get_mut(&(u, v)).unwrap() -= 1;
                *cap.get_mut(&(v, u)).unwrap() += 1;
                v = u;
            }
            flow += 1;
        }
    }
}
