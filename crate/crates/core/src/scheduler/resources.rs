use std::collections::{BTreeMap, HashMap};
use std::rc::Rc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::topology::{NetworkTopology, NodeId, PathSpec, Resource};

/// Shortest paths kept per QPU pair.
pub const PATH_LIMIT: usize = 64;

fn slot(r: Resource) -> usize {
    match r {
        Resource::CommQubit => 0,
        Resource::Bsm => 1,
        Resource::BsPort => 2,
        Resource::Source => 3,
        Resource::Detector => 4,
    }
}

/// One device count held by a round.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Reservation {
    pub node: NodeId,
    pub resource: Resource,
    pub count: u32,
}

/// A path with its device demands flattened for fast checks.
#[derive(Clone, Debug, PartialEq)]
pub struct Candidate {
    pub path: PathSpec,
    demands: Vec<(usize, usize, u32)>,
}

impl Candidate {
    pub fn new(path: PathSpec) -> Self {
        let demands = path
            .demands()
            .into_iter()
            .map(|(n, r, c)| (n.index(), slot(r), c))
            .collect();
        Self { path, demands }
    }
}

/// Per-node device usage against the topology's inventory.
#[derive(Clone, Debug)]
pub struct ResourceLedger {
    cap: Vec<[u32; 5]>,
    used: Vec<[u32; 5]>,
    touched: Vec<usize>,
}

impl ResourceLedger {
    pub fn new(topo: &NetworkTopology) -> Self {
        let cap: Vec<[u32; 5]> = topo
            .nodes()
            .iter()
            .map(|n| Resource::ALL.map(|r| n.resources.capacity(r)))
            .collect();
        let used = vec![[0; 5]; cap.len()];
        Self {
            cap,
            used,
            touched: Vec::new(),
        }
    }

    /// Reserves every demand of `c`, or nothing when one does not fit.
    pub fn try_reserve(&mut self, c: &Candidate) -> bool {
        for (i, &(n, r, k)) in c.demands.iter().enumerate() {
            if self.used[n][r] + k > self.cap[n][r] {
                for &(n, r, k) in &c.demands[..i] {
                    self.used[n][r] -= k;
                }
                return false;
            }
            self.used[n][r] += k;
            self.touched.push(n);
        }
        true
    }

    pub fn release(&mut self, c: &Candidate) {
        for &(n, r, k) in &c.demands {
            self.used[n][r] -= k;
        }
    }

    pub fn fits(&mut self, c: &Candidate) -> bool {
        let ok = self.try_reserve(c);
        if ok {
            self.release(c);
        }
        ok
    }

    pub fn clear(&mut self) {
        for &n in &self.touched {
            self.used[n] = [0; 5];
        }
        self.touched.clear();
    }

    pub fn used(&self, node: NodeId, resource: Resource) -> u32 {
        self.used[node.index()][slot(resource)]
    }

    pub fn within_capacity(&self) -> bool {
        self.used
            .iter()
            .zip(&self.cap)
            .all(|(u, c)| u.iter().zip(c).all(|(a, b)| a <= b))
    }
}

/// Totals of the demands of `paths`, sorted by node then resource.
pub fn reservations<'a>(paths: impl IntoIterator<Item = &'a PathSpec>) -> Vec<Reservation> {
    let mut acc: BTreeMap<(NodeId, Resource), u32> = BTreeMap::new();
    for p in paths {
        for (node, resource, count) in p.demands() {
            *acc.entry((node, resource)).or_default() += count;
        }
    }
    acc.into_iter()
        .map(|((node, resource), count)| Reservation { node, resource, count })
        .collect()
}

/// Memoized shortest-path candidates per unordered QPU pair.
#[derive(Default)]
pub struct PathCache {
    map: HashMap<(NodeId, NodeId), Rc<[Candidate]>>,
}

impl PathCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&mut self, topo: &NetworkTopology, a: NodeId, b: NodeId, gate: usize) -> Result<Rc<[Candidate]>> {
        let key = (a.min(b), a.max(b));
        if let Some(c) = self.map.get(&key) {
            return Ok(c.clone());
        }
        let paths = topo.shortest_paths(key.0, key.1, PATH_LIMIT);
        if paths.is_empty() {
            return Err(Error::NoPath { gate, a: a.0, b: b.0 });
        }
        let c: Rc<[Candidate]> = paths.into_iter().map(Candidate::new).collect();
        self.map.insert(key, c.clone());
        Ok(c)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::topology::{build_two_tier, ResourceInventory};

    #[test]
    fn reserve_is_atomic() {
        let t = build_two_tier(2, 2, 1, &ResourceInventory::uniform(1, 1, 1)).unwrap();
        let mut cache = PathCache::new();
        let mut ledger = ResourceLedger::new(&t);
        let inter = cache.get(&t, NodeId(0), NodeId(2), 0).unwrap();
        assert!(ledger.try_reserve(&inter[0]));
        assert_eq!(ledger.used(NodeId(0), Resource::CommQubit), 1);
        // Comm qubit on QPU 1 is free but the core BSM is not.
        let other = cache.get(&t, NodeId(1), NodeId(3), 1).unwrap();
        assert!(!ledger.try_reserve(&other[0]));
        assert_eq!(ledger.used(NodeId(1), Resource::CommQubit), 0);
        assert!(ledger.within_capacity());
        ledger.clear();
        assert!(ledger.try_reserve(&other[0]));
    }

    #[test]
    fn reservations_sum_demands() {
        let t = build_two_tier(1, 3, 0, &ResourceInventory::uniform(2, 1, 2)).unwrap();
        let p = &t.shortest_paths(NodeId(0), NodeId(1), 1)[0];
        let q = &t.shortest_paths(NodeId(0), NodeId(2), 1)[0];
        let r = reservations([p, q]);
        let tor = p.bsm;
        assert!(r.contains(&Reservation {
            node: NodeId(0),
            resource: Resource::CommQubit,
            count: 2
        }));
        assert!(r.contains(&Reservation {
            node: tor,
            resource: Resource::BsPort,
            count: 4
        }));
    }
}
