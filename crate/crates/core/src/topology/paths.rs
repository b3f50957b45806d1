use serde::{Deserialize, Serialize};

use super::{NetworkTopology, NodeId, NodeKind};

/// Countable device class reserved by an ebit task.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Resource {
    CommQubit,
    Bsm,
    BsPort,
    Source,
    Detector,
}

impl Resource {
    pub const ALL: [Resource; 5] = [
        Resource::CommQubit,
        Resource::Bsm,
        Resource::BsPort,
        Resource::Source,
        Resource::Detector,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Resource::CommQubit => "comm_qubit",
            Resource::Bsm => "bsm",
            Resource::BsPort => "bs_port",
            Resource::Source => "source",
            Resource::Detector => "detector",
        }
    }
}

/// Protocol family an ebit path uses.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PathKind {
    /// Both QPUs behind one NIR switch.
    Intra,
    /// Through telecom switches with a telecom BSM.
    Inter,
    /// Server-centric path relaying through other QPUs.
    Repeater,
}

impl PathKind {
    pub fn as_str(self) -> &'static str {
        match self {
            PathKind::Intra => "intra",
            PathKind::Inter => "inter",
            PathKind::Repeater => "repeater",
        }
    }
}

/// One candidate route for an ebit between two QPUs, including the devices
/// it would occupy.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PathSpec {
    pub nodes: Vec<NodeId>,
    pub bsm: NodeId,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub sources: Vec<NodeId>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub detectors: Vec<NodeId>,
    pub kind: PathKind,
}

impl PathSpec {
    pub fn endpoints(&self) -> (NodeId, NodeId) {
        (self.nodes[0], *self.nodes.last().expect("path has endpoints"))
    }

    /// Devices reserved while the path generates ebits.
    pub fn demands(&self) -> Vec<(NodeId, Resource, u32)> {
        let (a, b) = self.endpoints();
        let mut out = vec![(a, Resource::CommQubit, 1), (b, Resource::CommQubit, 1)];
        match self.kind {
            PathKind::Intra => {
                out.push((self.bsm, Resource::Bsm, 1));
                out.push((self.bsm, Resource::BsPort, 2));
            }
            PathKind::Inter | PathKind::Repeater => {
                out.push((self.bsm, Resource::Bsm, 1));
                for &s in &self.sources {
                    out.push((s, Resource::Source, 1));
                }
                for &d in &self.detectors {
                    out.push((d, Resource::Detector, 1));
                }
            }
        }
        out
    }
}

/// Every shortest path from `from` to `to` (BFS DAG walk), in lexicographic
/// node order, stopping after `limit` paths.
fn all_shortest(topo: &NetworkTopology, from: NodeId, to: NodeId, limit: usize) -> Vec<Vec<NodeId>> {
    let dist_to = topo.bfs(to);
    if dist_to[from.index()] == u32::MAX {
        return Vec::new();
    }
    let mut out = Vec::new();
    let mut stack = vec![from];
    fn walk(
        topo: &NetworkTopology,
        dist_to: &[u32],
        stack: &mut Vec<NodeId>,
        out: &mut Vec<Vec<NodeId>>,
        limit: usize,
    ) {
        if out.len() >= limit {
            return;
        }
        let u = *stack.last().unwrap();
        if dist_to[u.index()] == 0 {
            out.push(stack.clone());
            return;
        }
        for &v in topo.neighbors(u) {
            if dist_to[v.index()] + 1 == dist_to[u.index()] {
                stack.push(v);
                walk(topo, dist_to, stack, out, limit);
                stack.pop();
            }
        }
    }
    walk(topo, &dist_to, &mut stack, &mut out, limit);
    out
}

impl NetworkTopology {
    /// Minimum-hop ebit paths between two QPUs, one per feasible BSM node,
    /// sorted by node sequence and truncated to `limit`.
    ///
    /// Same-rack pairs on switch-centric kinds get the single path through
    /// their ToR. Other switch-centric pairs get the shortest simple paths
    /// that cross a switch of a BSM tier; the BSM sits on that switch and
    /// sources and detectors on both ToRs. Server-centric kinds return all
    /// shortest paths, marked as repeater paths when they relay through
    /// another QPU.
    pub fn shortest_paths(&self, a: NodeId, b: NodeId, limit: usize) -> Vec<PathSpec> {
        if a == b || a.index() >= self.qpu_count || b.index() >= self.qpu_count || limit == 0 {
            return Vec::new();
        }
        if self.is_server_centric() {
            return self.server_paths(a, b, limit);
        }
        let (ra, rb) = (self.rack_of(a), self.rack_of(b));
        if let Some(r) = ra.filter(|_| ra == rb) {
            let tor = self.racks[r as usize].tor.expect("switch-centric rack has a ToR");
            return vec![PathSpec {
                nodes: vec![a, tor, b],
                bsm: tor,
                sources: Vec::new(),
                detectors: Vec::new(),
                kind: PathKind::Intra,
            }];
        }
        let tor_a = self.racks[ra.unwrap() as usize].tor.unwrap();
        let tor_b = self.racks[rb.unwrap() as usize].tor.unwrap();
        let da = self.bfs(a);
        let db = self.bfs(b);
        let mut tiers: Vec<(u32, NodeId)> = self
            .nodes
            .iter()
            .filter(|n| self.bsm_tiers.contains(&n.kind) && n.resources.bsm > 0)
            .filter(|n| da[n.id.index()] != u32::MAX && db[n.id.index()] != u32::MAX)
            .map(|n| (da[n.id.index()] + db[n.id.index()], n.id))
            .collect();
        tiers.sort_unstable();
        let mut best = u32::MAX;
        let mut out = Vec::new();
        for (len, c) in tiers {
            if len > best {
                break;
            }
            let firsts = all_shortest(self, a, c, usize::MAX);
            let seconds = all_shortest(self, c, b, usize::MAX);
            let mut found: Option<Vec<NodeId>> = None;
            for p in &firsts {
                for q in &seconds {
                    if q[1..].iter().any(|v| p.contains(v)) {
                        continue;
                    }
                    let mut nodes = p.clone();
                    nodes.extend_from_slice(&q[1..]);
                    if found.as_ref().is_none_or(|f| nodes < *f) {
                        found = Some(nodes);
                    }
                }
            }
            if let Some(nodes) = found {
                best = len;
                out.push(PathSpec {
                    nodes,
                    bsm: c,
                    sources: vec![tor_a, tor_b],
                    detectors: vec![tor_a, tor_b],
                    kind: PathKind::Inter,
                });
            }
        }
        out.sort_by(|x, y| x.nodes.cmp(&y.nodes).then(x.bsm.cmp(&y.bsm)));
        out.truncate(limit);
        out
    }

    fn server_paths(&self, a: NodeId, b: NodeId, limit: usize) -> Vec<PathSpec> {
        all_shortest(self, a, b, limit)
            .into_iter()
            .map(|nodes| {
                let inner = &nodes[1..nodes.len() - 1];
                let relays = inner.iter().any(|v| self.node(*v).kind == NodeKind::Qpu);
                let bsm = inner
                    .iter()
                    .copied()
                    .find(|v| self.node(*v).kind.is_switch())
                    .unwrap_or(a);
                PathSpec {
                    kind: if relays { PathKind::Repeater } else { PathKind::Intra },
                    nodes,
                    bsm,
                    sources: Vec::new(),
                    detectors: Vec::new(),
                }
            })
            .collect()
    }
}
