use serde::{Deserialize, Serialize};

use super::{Band, Link, NetworkTopology, Node, NodeId, NodeKind, NodeResources, Rack, ResourceInventory};
use crate::error::{Error, Result};

/// Shape parameters of a topology.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TopologySpec {
    /// Three-tier Clos: `n²/4` racks, `n` aggregation and `n/2` core switches.
    Clos {
        n: usize,
        n_tor: usize,
    },
    /// ToR switches wired straight to a set of core switches.
    TwoTier {
        racks: usize,
        n_tor: usize,
        cores: usize,
    },
    FatTree {
        n: usize,
    },
    BasicTree {
        n: usize,
    },
    #[serde(rename = "hyperx")]
    HyperX {
        dims: Vec<usize>,
        terminals: usize,
        n_tor: usize,
    },
    #[serde(rename = "bcube")]
    BCube {
        n: usize,
        k: usize,
    },
    #[serde(rename = "dcell")]
    DCell {
        n: usize,
        k: usize,
    },
    Linear {
        racks: usize,
        n_tor: usize,
    },
    Grid {
        rows: usize,
        cols: usize,
        n_tor: usize,
    },
}

impl TopologySpec {
    pub fn name(&self) -> &'static str {
        match self {
            TopologySpec::Clos { .. } => "clos",
            TopologySpec::TwoTier { .. } => "two_tier",
            TopologySpec::FatTree { .. } => "fat_tree",
            TopologySpec::BasicTree { .. } => "basic_tree",
            TopologySpec::HyperX { .. } => "hyperx",
            TopologySpec::BCube { .. } => "bcube",
            TopologySpec::DCell { .. } => "dcell",
            TopologySpec::Linear { .. } => "linear",
            TopologySpec::Grid { .. } => "grid",
        }
    }

    pub fn is_server_centric(&self) -> bool {
        matches!(
            self,
            TopologySpec::BCube { .. }
                | TopologySpec::DCell { .. }
                | TopologySpec::Linear { .. }
                | TopologySpec::Grid { .. }
        )
    }

    pub fn build(&self, inv: &ResourceInventory) -> Result<NetworkTopology> {
        match self {
            TopologySpec::Clos { n, n_tor } => build_clos(*n, *n_tor, inv),
            TopologySpec::TwoTier { racks, n_tor, cores } => build_two_tier(*racks, *n_tor, *cores, inv),
            TopologySpec::FatTree { n } => build_fat_tree(*n, inv),
            TopologySpec::BasicTree { n } => build_basic_tree(*n, inv),
            TopologySpec::HyperX { dims, terminals, n_tor } => build_hyperx(dims, *terminals, *n_tor, inv),
            TopologySpec::BCube { n, k } => build_bcube(*n, *k, inv),
            TopologySpec::DCell { n, k } => build_dcell(*n, *k, inv),
            TopologySpec::Linear { racks, n_tor } => build_linear(*racks, *n_tor, inv),
            TopologySpec::Grid { rows, cols, n_tor } => build_grid2d(*rows, *cols, *n_tor, inv),
        }
    }
}

/// Topology descriptor as it appears in configuration files.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TopologyConfig {
    #[serde(flatten)]
    pub shape: TopologySpec,
    #[serde(default)]
    pub inventory: ResourceInventory,
}

impl TopologyConfig {
    pub fn build(&self) -> Result<NetworkTopology> {
        self.shape.build(&self.inventory)
    }
}

struct Builder {
    inv: ResourceInventory,
    bsm_tiers: Vec<NodeKind>,
    nodes: Vec<Node>,
    links: Vec<Link>,
    racks: Vec<Rack>,
    warnings: Vec<String>,
}

impl Builder {
    fn new(inv: &ResourceInventory, bsm_tiers: Vec<NodeKind>) -> Self {
        Self {
            inv: inv.clone(),
            bsm_tiers,
            nodes: Vec::new(),
            links: Vec::new(),
            racks: Vec::new(),
            warnings: Vec::new(),
        }
    }

    fn resources_for(&self, kind: NodeKind) -> NodeResources {
        let inv = &self.inv;
        match kind {
            NodeKind::Qpu => NodeResources {
                comm_qubits: inv.comm_qubits,
                data_qubits: inv.data_qubits,
                ..Default::default()
            },
            NodeKind::TorSwitch => NodeResources {
                bsm: inv.bsm_count,
                bs_ports: inv.beam_splitter_ports(),
                sources: inv.ent_sources,
                detectors: inv.detectors,
                ..Default::default()
            },
            NodeKind::LevelSwitch => NodeResources {
                bsm: inv.bsm_count,
                bs_ports: inv.beam_splitter_ports(),
                ..Default::default()
            },
            NodeKind::CoreSwitch | NodeKind::AggregationSwitch => {
                if self.bsm_tiers.contains(&kind) {
                    NodeResources {
                        bsm: inv.telecom_bsms(),
                        ..Default::default()
                    }
                } else {
                    NodeResources::default()
                }
            }
        }
    }

    /// Adds `count` QPUs; must be called before any switch is added.
    fn add_qpus(&mut self, count: usize) {
        debug_assert!(self.nodes.iter().all(|n| n.kind == NodeKind::Qpu));
        for _ in 0..count {
            self.add(NodeKind::Qpu, None);
        }
    }

    fn add(&mut self, kind: NodeKind, rack: Option<u32>) -> NodeId {
        let id = NodeId(self.nodes.len() as u32);
        let resources = self.resources_for(kind);
        self.nodes.push(Node {
            id,
            kind,
            rack,
            resources,
        });
        id
    }

    fn link(&mut self, a: NodeId, b: NodeId, band: Band) {
        self.links.push(Link { a, b, band });
    }

    /// Places `qpus` in a new rack behind `tor` (if any).
    fn rack(&mut self, tor: Option<NodeId>, qpus: Vec<NodeId>) -> u32 {
        let r = self.racks.len() as u32;
        if let Some(t) = tor {
            self.nodes[t.index()].rack = Some(r);
        }
        for &q in &qpus {
            self.nodes[q.index()].rack = Some(r);
            if let Some(t) = tor {
                self.link(q, t, Band::Nir);
            }
        }
        self.racks.push(Rack { tor, qpus });
        r
    }

    fn expect(&mut self, what: &str, built: usize, formula: f64) {
        if (built as f64 - formula).abs() > 1e-9 {
            self.warnings
                .push(format!("{what}: built {built}, closed form gives {formula}"));
        }
    }

    fn finish(self, shape: TopologySpec) -> NetworkTopology {
        let mut adjacency = vec![Vec::new(); self.nodes.len()];
        for link in &self.links {
            adjacency[link.a.index()].push(link.b);
            adjacency[link.b.index()].push(link.a);
        }
        for adj in &mut adjacency {
            adj.sort_unstable();
            adj.dedup();
        }
        let qpu_count = self.nodes.iter().filter(|n| n.kind == NodeKind::Qpu).count();
        NetworkTopology {
            shape,
            nodes: self.nodes,
            adjacency,
            links: self.links,
            racks: self.racks,
            qpu_count,
            bsm_tiers: self.bsm_tiers,
            warnings: self.warnings,
        }
    }
}

fn require(cond: bool, name: &'static str, reason: &str) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(Error::param(name, reason))
    }
}

/// Clos network with even port count `n` and `n_tor` QPUs per rack.
///
/// There are `n²/4` racks. The `n` aggregation switches form two halves;
/// each ToR connects to the `n/2` aggregation switches of half `rack % 2`,
/// and every aggregation switch connects to all `n/2` core switches. Core
/// switches carry the telecom BSMs, so every inter-rack path crosses
/// exactly one core switch and QPU-to-QPU distance is at most 6.
pub fn build_clos(n: usize, n_tor: usize, inv: &ResourceInventory) -> Result<NetworkTopology> {
    require(
        n >= 2 && n.is_multiple_of(2),
        "n",
        "Clos port count must be even and at least 2",
    )?;
    require(n_tor >= 1, "n_tor", "at least one QPU per rack")?;
    let racks = n * n / 4;
    let half = n / 2;
    let mut b = Builder::new(inv, vec![NodeKind::CoreSwitch]);
    b.add_qpus(racks * n_tor);
    let tors: Vec<NodeId> = (0..racks).map(|_| b.add(NodeKind::TorSwitch, None)).collect();
    let aggs: Vec<NodeId> = (0..n).map(|_| b.add(NodeKind::AggregationSwitch, None)).collect();
    let cores: Vec<NodeId> = (0..half).map(|_| b.add(NodeKind::CoreSwitch, None)).collect();
    for (r, &tor) in tors.iter().enumerate() {
        let qpus = (0..n_tor).map(|j| NodeId((r * n_tor + j) as u32)).collect();
        b.rack(Some(tor), qpus);
        let side = r % 2;
        for &agg in &aggs[side * half..(side + 1) * half] {
            b.link(tor, agg, Band::Telecom);
        }
    }
    for &agg in &aggs {
        for &core in &cores {
            b.link(agg, core, Band::Telecom);
        }
    }
    let nf = n as f64;
    b.expect("switches", b.nodes.len() - racks * n_tor, 1.5 * nf + nf * nf / 4.0);
    b.expect("qpus", racks * n_tor, nf * nf / 4.0 * n_tor as f64);
    Ok(b.finish(TopologySpec::Clos { n, n_tor }))
}

/// Racks whose ToR switches connect directly to every core switch.
pub fn build_two_tier(racks: usize, n_tor: usize, cores: usize, inv: &ResourceInventory) -> Result<NetworkTopology> {
    require(racks >= 1, "racks", "at least one rack")?;
    require(n_tor >= 1, "n_tor", "at least one QPU per rack")?;
    let mut b = Builder::new(inv, vec![NodeKind::CoreSwitch]);
    b.add_qpus(racks * n_tor);
    let tors: Vec<NodeId> = (0..racks).map(|_| b.add(NodeKind::TorSwitch, None)).collect();
    let core_ids: Vec<NodeId> = (0..cores).map(|_| b.add(NodeKind::CoreSwitch, None)).collect();
    for (r, &tor) in tors.iter().enumerate() {
        let qpus = (0..n_tor).map(|j| NodeId((r * n_tor + j) as u32)).collect();
        b.rack(Some(tor), qpus);
        for &c in &core_ids {
            b.link(tor, c, Band::Telecom);
        }
    }
    Ok(b.finish(TopologySpec::TwoTier { racks, n_tor, cores }))
}

/// k-ary fat-tree with `n`-port switches: `n` pods of `n/2` edge and `n/2`
/// aggregation switches, `(n/2)²` core switches, `n/2` QPUs per edge switch.
pub fn build_fat_tree(n: usize, inv: &ResourceInventory) -> Result<NetworkTopology> {
    require(
        n >= 2 && n.is_multiple_of(2),
        "n",
        "fat-tree port count must be even and at least 2",
    )?;
    let half = n / 2;
    let mut b = Builder::new(inv, vec![NodeKind::AggregationSwitch, NodeKind::CoreSwitch]);
    let total = n * half * half;
    b.add_qpus(total);
    let cores: Vec<NodeId> = (0..half * half).map(|_| b.add(NodeKind::CoreSwitch, None)).collect();
    let mut next_qpu = 0u32;
    for _pod in 0..n {
        let edges: Vec<NodeId> = (0..half).map(|_| b.add(NodeKind::TorSwitch, None)).collect();
        let aggs: Vec<NodeId> = (0..half).map(|_| b.add(NodeKind::AggregationSwitch, None)).collect();
        for &edge in &edges {
            let qpus = (0..half).map(|j| NodeId(next_qpu + j as u32)).collect();
            next_qpu += half as u32;
            b.rack(Some(edge), qpus);
            for &agg in &aggs {
                b.link(edge, agg, Band::Telecom);
            }
        }
        for (i, &agg) in aggs.iter().enumerate() {
            for &core in &cores[i * half..(i + 1) * half] {
                b.link(agg, core, Band::Telecom);
            }
        }
    }
    let nf = n as f64;
    let qf = nf * nf * nf / 4.0;
    b.expect("qpus", total, qf);
    b.expect("switches", b.nodes.len() - total, 5.0 * qf / nf);
    Ok(b.finish(TopologySpec::FatTree { n }))
}

/// Three-level tree: one root, `n` aggregation switches, `n²` ToR switches.
/// The `(n-1)³` QPUs fill ToR switches in order, `n-1` per ToR.
pub fn build_basic_tree(n: usize, inv: &ResourceInventory) -> Result<NetworkTopology> {
    require(n >= 2, "n", "basic tree needs n >= 2")?;
    let per_tor = n - 1;
    let total = per_tor.pow(3);
    let mut b = Builder::new(inv, vec![NodeKind::AggregationSwitch, NodeKind::CoreSwitch]);
    b.add_qpus(total);
    let root = b.add(NodeKind::CoreSwitch, None);
    let aggs: Vec<NodeId> = (0..n).map(|_| b.add(NodeKind::AggregationSwitch, None)).collect();
    for &agg in &aggs {
        b.link(root, agg, Band::Telecom);
    }
    let mut next = 0usize;
    for t in 0..n * n {
        let tor = b.add(NodeKind::TorSwitch, None);
        b.link(aggs[t / n], tor, Band::Telecom);
        let take = per_tor.min(total - next);
        let qpus = (next..next + take).map(|q| NodeId(q as u32)).collect();
        next += take;
        b.rack(Some(tor), qpus);
    }
    let nf = n as f64;
    b.expect("qpus", total, (nf - 1.0).powi(3));
    b.expect(
        "switches",
        b.nodes.len() - total,
        (nf * nf + nf + 1.0) / nf.powi(3) * total as f64,
    );
    Ok(b.finish(TopologySpec::BasicTree { n }))
}

/// HyperX: switches on an L-dimensional lattice with sizes `dims`, fully
/// connected along each dimension, each serving `terminals` ToR switches
/// of `n_tor` QPUs.
pub fn build_hyperx(
    dims: &[usize],
    terminals: usize,
    n_tor: usize,
    inv: &ResourceInventory,
) -> Result<NetworkTopology> {
    require(!dims.is_empty(), "dims", "HyperX needs at least one dimension")?;
    require(
        dims.iter().all(|&s| s >= 1),
        "dims",
        "every dimension size must be at least 1",
    )?;
    let switches: usize = dims.iter().product();
    let mut b = Builder::new(inv, vec![NodeKind::CoreSwitch]);
    b.add_qpus(switches * terminals * n_tor);
    let ids: Vec<NodeId> = (0..switches).map(|_| b.add(NodeKind::CoreSwitch, None)).collect();
    let coords = |mut idx: usize| -> Vec<usize> {
        dims.iter()
            .map(|&s| {
                let c = idx % s;
                idx /= s;
                c
            })
            .collect()
    };
    for i in 0..switches {
        let ci = coords(i);
        for j in i + 1..switches {
            let cj = coords(j);
            if ci.iter().zip(&cj).filter(|(a, b)| a != b).count() == 1 {
                b.link(ids[i], ids[j], Band::Telecom);
            }
        }
    }
    let mut next = 0u32;
    for &sw in &ids {
        for _ in 0..terminals {
            let tor = b.add(NodeKind::TorSwitch, None);
            b.link(tor, sw, Band::Telecom);
            let qpus = (0..n_tor as u32).map(|j| NodeId(next + j)).collect();
            next += n_tor as u32;
            b.rack(Some(tor), qpus);
        }
    }
    Ok(b.finish(TopologySpec::HyperX {
        dims: dims.to_vec(),
        terminals,
        n_tor,
    }))
}

/// BCube_k over `n`-port switches: `n^(k+1)` QPUs with `k+1` ports each,
/// `k+1` levels of `n^k` switches. A level-`l` switch joins the QPUs whose
/// base-`n` addresses differ only in digit `l`. Racks are the BCube_0 cells.
pub fn build_bcube(n: usize, k: usize, inv: &ResourceInventory) -> Result<NetworkTopology> {
    require(n >= 2, "n", "BCube needs n >= 2")?;
    let total = n.pow(k as u32 + 1);
    let per_level = n.pow(k as u32);
    let mut b = Builder::new(inv, Vec::new());
    b.add_qpus(total);
    for level in 0..=k {
        let stride = n.pow(level as u32);
        for s in 0..per_level {
            let sw = b.add(NodeKind::LevelSwitch, None);
            // Insert a free digit at position `level` of the switch index.
            let low = s % stride;
            let high = s / stride;
            let members: Vec<NodeId> = (0..n)
                .map(|d| NodeId((high * stride * n + d * stride + low) as u32))
                .collect();
            if level == 0 {
                b.rack(None, members.clone());
                b.nodes[sw.index()].rack = Some(b.racks.len() as u32 - 1);
            }
            for q in members {
                b.link(q, sw, Band::Nir);
            }
        }
    }
    b.expect("switches", b.nodes.len() - total, (k + 1) as f64 * per_level as f64);
    Ok(b.finish(TopologySpec::BCube { n, k }))
}

/// Number of QPUs in a DCell_k built from `n`-port DCell_0 cells.
pub fn dcell_size(n: usize, k: usize) -> usize {
    let mut t = n;
    for _ in 0..k {
        t *= t + 1;
    }
    t
}

/// DCell_k: DCell_0 is `n` QPUs on one switch; DCell_l joins `t_{l-1}+1`
/// copies of DCell_{l-1} with exactly one QPU-to-QPU link per pair.
pub fn build_dcell(n: usize, k: usize, inv: &ResourceInventory) -> Result<NetworkTopology> {
    require(n >= 2, "n", "DCell needs n >= 2")?;
    let total = dcell_size(n, k);
    let mut b = Builder::new(inv, Vec::new());
    b.add_qpus(total);
    for cell in 0..total / n {
        let sw = b.add(NodeKind::LevelSwitch, None);
        let qpus: Vec<NodeId> = (0..n).map(|j| NodeId((cell * n + j) as u32)).collect();
        for &q in &qpus {
            b.link(q, sw, Band::Nir);
        }
        b.rack(None, qpus);
        b.nodes[sw.index()].rack = Some(cell as u32);
    }
    fn join(b: &mut Builder, n: usize, offset: usize, level: usize) {
        if level == 0 {
            return;
        }
        let sub = dcell_size(n, level - 1);
        let groups = sub + 1;
        for i in 0..groups {
            join(b, n, offset + i * sub, level - 1);
        }
        for i in 0..sub {
            for j in i + 1..groups {
                let u = offset + i * sub + (j - 1);
                let v = offset + j * sub + i;
                b.link(NodeId(u as u32), NodeId(v as u32), Band::Nir);
            }
        }
    }
    join(&mut b, n, 0, k);
    b.expect("switches", b.nodes.len() - total, total as f64 / n as f64);
    Ok(b.finish(TopologySpec::DCell { n, k }))
}

fn rack_grid(
    rows: usize,
    cols: usize,
    n_tor: usize,
    inv: &ResourceInventory,
    shape: TopologySpec,
) -> Result<NetworkTopology> {
    require(rows >= 1 && cols >= 1, "racks", "at least one rack")?;
    require(n_tor >= 1, "n_tor", "at least one QPU per rack")?;
    let racks = rows * cols;
    let mut b = Builder::new(inv, Vec::new());
    b.add_qpus(racks * n_tor);
    for r in 0..racks {
        let tor = b.add(NodeKind::TorSwitch, None);
        let qpus = (0..n_tor).map(|j| NodeId((r * n_tor + j) as u32)).collect();
        b.rack(Some(tor), qpus);
    }
    let join = |b: &mut Builder, r1: usize, r2: usize| {
        let sw = b.add(NodeKind::LevelSwitch, None);
        for r in [r1, r2] {
            for j in 0..n_tor {
                b.link(NodeId((r * n_tor + j) as u32), sw, Band::Nir);
            }
        }
    };
    for row in 0..rows {
        for col in 0..cols {
            let r = row * cols + col;
            if col + 1 < cols {
                join(&mut b, r, r + 1);
            }
            if row + 1 < rows {
                join(&mut b, r, r + cols);
            }
        }
    }
    Ok(b.finish(shape))
}

/// Racks in a chain; neighbouring racks share an optical switch that every
/// QPU of both racks connects to.
pub fn build_linear(racks: usize, n_tor: usize, inv: &ResourceInventory) -> Result<NetworkTopology> {
    rack_grid(1, racks, n_tor, inv, TopologySpec::Linear { racks, n_tor })
}

/// Racks on a `rows × cols` grid with nearest-neighbour switches.
pub fn build_grid2d(rows: usize, cols: usize, n_tor: usize, inv: &ResourceInventory) -> Result<NetworkTopology> {
    rack_grid(rows, cols, n_tor, inv, TopologySpec::Grid { rows, cols, n_tor })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn inv() -> ResourceInventory {
        ResourceInventory::default()
    }

    #[test]
    fn clos_counts() {
        for (n, n_tor, switches, racks, qpus) in [(6, 4, 18, 9, 36), (2, 1, 4, 1, 1), (4, 2, 10, 4, 8)] {
            let t = build_clos(n, n_tor, &inv()).unwrap();
            assert_eq!(t.switch_count(), switches, "n={n}");
            assert_eq!(t.racks().len(), racks);
            assert_eq!(t.qpu_count(), qpus);
            assert!(t.warnings().is_empty());
        }
    }

    #[test]
    fn clos_tor_uplinks() {
        let t = build_clos(6, 4, &inv()).unwrap();
        for rack in t.racks() {
            let tor = rack.tor.unwrap();
            let up = t
                .neighbors(tor)
                .iter()
                .filter(|v| t.node(**v).kind == NodeKind::AggregationSwitch)
                .count();
            assert_eq!(up, 3);
        }
    }

    #[test]
    fn odd_ports_rejected() {
        assert!(matches!(
            build_clos(5, 4, &inv()),
            Err(Error::Parameter { name: "n", .. })
        ));
        assert!(build_fat_tree(3, &inv()).is_err());
        assert!(build_basic_tree(1, &inv()).is_err());
        assert!(build_hyperx(&[], 1, 1, &inv()).is_err());
    }

    #[test]
    fn fat_tree_counts() {
        for (n, qpus, switches) in [(4, 16, 20), (2, 2, 5), (6, 54, 45)] {
            let t = build_fat_tree(n, &inv()).unwrap();
            assert_eq!(t.qpu_count(), qpus);
            assert_eq!(t.switch_count(), switches);
            assert_eq!(t.count_kind(NodeKind::CoreSwitch), (n / 2) * (n / 2));
            assert_eq!(t.diameter().unwrap(), 6);
        }
    }

    #[test]
    fn basic_tree_counts() {
        let t = build_basic_tree(4, &inv()).unwrap();
        assert_eq!(t.qpu_count(), 27);
        assert_eq!(t.switch_count(), 21);
        // 21 switches is not what the closed form gives for n = 4.
        assert_eq!(t.warnings().len(), 1);
        assert_eq!(build_basic_tree(2, &inv()).unwrap().qpu_count(), 1);
        let t5 = build_basic_tree(5, &inv()).unwrap();
        assert_eq!(t5.qpu_count(), 64);
        assert_eq!(t5.diameter().unwrap(), 6);
    }

    #[test]
    fn hyperx_counts() {
        let t = build_hyperx(&[2, 4], 3, 1, &inv()).unwrap();
        let sw: Vec<_> = t.nodes().iter().filter(|n| n.kind == NodeKind::CoreSwitch).collect();
        assert_eq!(sw.len(), 8);
        for s in &sw {
            let links = t
                .neighbors(s.id)
                .iter()
                .filter(|v| t.node(**v).kind == NodeKind::CoreSwitch)
                .count();
            assert_eq!(links, 4);
        }
        let t = build_hyperx(&[1], 1, 1, &inv()).unwrap();
        assert_eq!(t.count_kind(NodeKind::CoreSwitch), 1);
        assert!(t
            .links()
            .iter()
            .all(|l| t.node(l.a).kind != NodeKind::CoreSwitch || t.node(l.b).kind != NodeKind::CoreSwitch));
        let t = build_hyperx(&[3, 3], 2, 1, &inv()).unwrap();
        assert_eq!(t.count_kind(NodeKind::CoreSwitch), 9);
        assert_eq!(t.count_kind(NodeKind::TorSwitch), 18);
    }

    #[test]
    fn bcube_counts() {
        for (n, k, qpus, switches) in [(4, 1, 16, 8), (2, 0, 2, 1), (3, 2, 27, 27)] {
            let t = build_bcube(n, k, &inv()).unwrap();
            assert_eq!(t.qpu_count(), qpus);
            assert_eq!(t.switch_count(), switches);
            for q in t.qpus() {
                assert_eq!(t.neighbors(q).len(), k + 1);
            }
        }
    }

    #[test]
    fn dcell_counts() {
        let t = build_dcell(4, 1, &inv()).unwrap();
        assert_eq!(t.racks().len(), 5);
        assert_eq!(t.qpu_count(), 20);
        assert_eq!(t.switch_count(), 5);
        let t = build_dcell(2, 0, &inv()).unwrap();
        assert_eq!((t.qpu_count(), t.switch_count()), (2, 1));
        assert_eq!(dcell_size(3, 1), 12);
        assert_eq!(dcell_size(3, 2), 156);
        let t = build_dcell(3, 2, &inv()).unwrap();
        assert_eq!(t.qpu_count(), 156);
    }

    #[test]
    fn dcell_one_link_per_cell_pair() {
        let t = build_dcell(4, 1, &inv()).unwrap();
        let mut count = std::collections::HashMap::new();
        for l in t.links() {
            if t.node(l.a).kind == NodeKind::Qpu && t.node(l.b).kind == NodeKind::Qpu {
                let (ra, rb) = (t.rack_of(l.a).unwrap(), t.rack_of(l.b).unwrap());
                assert_ne!(ra, rb);
                *count.entry((ra.min(rb), ra.max(rb))).or_insert(0) += 1;
            }
        }
        assert_eq!(count.len(), 10);
        assert!(count.values().all(|&c| c == 1));
    }

    #[test]
    fn linear_and_grid() {
        let t = build_linear(3, 2, &inv()).unwrap();
        assert_eq!(t.rack_hops(0)[2], 2);
        assert_eq!(t.diameter().unwrap(), 2);
        let t = build_linear(1, 2, &inv()).unwrap();
        assert_eq!(t.count_kind(NodeKind::LevelSwitch), 0);
        let t = build_grid2d(2, 2, 1, &inv()).unwrap();
        assert_eq!(t.diameter().unwrap(), 2);
    }

    #[test]
    fn config_roundtrip_json() {
        let cfg = TopologyConfig {
            shape: TopologySpec::HyperX {
                dims: vec![2, 4],
                terminals: 3,
                n_tor: 2,
            },
            inventory: ResourceInventory::default(),
        };
        let text = serde_json::to_string(&cfg).unwrap();
        assert!(text.contains("\"kind\":\"hyperx\""));
        let back: TopologyConfig = serde_json::from_str(&text).unwrap();
        assert_eq!(back, cfg);
    }
}
