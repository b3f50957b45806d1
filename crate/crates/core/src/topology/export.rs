use std::io::Write;

use super::NetworkTopology;

/// Writes the node/edge list consumed by the plotting tools.
///
/// ```text
/// node <id> <kind> <rack|-> comm=<n> data=<n> bsm=<n> bs=<n> src=<n> det=<n>
/// edge <a> <b> <band>
/// ```
pub fn write_node_edge_list<W: Write>(topo: &NetworkTopology, mut out: W) -> std::io::Result<()> {
    for n in topo.nodes() {
        let rack = n.rack.map_or_else(|| "-".to_string(), |r| r.to_string());
        let r = &n.resources;
        writeln!(
            out,
            "node {} {} {} comm={} data={} bsm={} bs={} src={} det={}",
            n.id,
            n.kind.as_str(),
            rack,
            r.comm_qubits,
            r.data_qubits,
            r.bsm,
            r.bs_ports,
            r.sources,
            r.detectors
        )?;
    }
    for l in topo.links() {
        writeln!(out, "edge {} {} {}", l.a, l.b, l.band.as_str())?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::topology::{build_two_tier, ResourceInventory};

    #[test]
    fn lists_every_node_and_edge() {
        let t = build_two_tier(2, 3, 1, &ResourceInventory::uniform(1, 1, 1)).unwrap();
        let mut buf = Vec::new();
        write_node_edge_list(&t, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), t.nodes().len() + t.links().len());
        assert_eq!(lines[0], "node 0 qpu 0 comm=1 data=1 bsm=0 bs=0 src=0 det=0");
        assert_eq!(lines[6], "node 6 tor_switch 0 comm=0 data=0 bsm=1 bs=2 src=1 det=1");
        assert_eq!(lines[8], "node 8 core_switch - comm=0 data=0 bsm=1 bs=0 src=0 det=0");
        assert!(lines.contains(&"edge 6 8 telecom"));
        assert!(lines.contains(&"edge 0 6 nir"));
    }
}
