//! Circuit compilation: logical qubits to QPUs by graph partitioning, then
//! QPUs to racks by the exact rack-assignment program.

pub mod cost;
pub mod partition;
pub mod racks;

use std::collections::BTreeMap;
use std::io::Write;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::circuit::QuantumCircuit;
use crate::error::{Error, Result};
use crate::topology::{NetworkTopology, NodeId};

pub use cost::{approx_fidelity_cost, fidelity_cost, FidelityTable, GateCounts};
pub use partition::{cut_weight, partition_circuit, partition_graph, WeightMatrix};
pub use racks::{assign_racks_ilp, brute_force_racks, rack_objective, solve_rack_assignment, RackAssignment};

/// Where every logical qubit runs, and the resulting gate classification.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Placement {
    pub qubit_to_qpu: Vec<NodeId>,
    pub qpu_to_rack: BTreeMap<NodeId, u32>,
    pub counts: GateCounts,
    pub c_fid: f64,
    /// Value of the rack-assignment objective when it was solved.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rack_objective: Option<f64>,
}

impl Placement {
    /// Distinct QPUs in use, ascending.
    pub fn qpus(&self) -> Vec<NodeId> {
        self.qpu_to_rack.keys().copied().collect()
    }

    pub fn write_json<W: Write>(&self, out: W) -> Result<()> {
        serde_json::to_writer_pretty(out, self).map_err(|e| Error::Io(e.to_string()))
    }
}

/// Counts two-qubit gates as local, same-rack or cross-rack.
pub fn classify(circuit: &QuantumCircuit, qubit_to_qpu: &[NodeId], topo: &NetworkTopology) -> GateCounts {
    let mut c = GateCounts::default();
    for (a, b) in circuit.gates().iter().filter_map(|g| g.pair()) {
        let (qa, qb) = (qubit_to_qpu[a], qubit_to_qpu[b]);
        if qa == qb {
            c.n_loc += 1;
        } else if topo.rack_of(qa).is_some() && topo.rack_of(qa) == topo.rack_of(qb) {
            c.n_intra += 1;
        } else {
            c.n_inter += 1;
        }
    }
    c
}

/// Data-qubit capacity of the topology's QPUs.
pub fn qpu_capacity(topo: &NetworkTopology) -> usize {
    topo.qpus()
        .next()
        .map_or(0, |q| topo.node(q).resources.data_qubits as usize)
}

fn finish(
    circuit: &QuantumCircuit,
    qubit_to_qpu: Vec<NodeId>,
    topo: &NetworkTopology,
    table: &FidelityTable,
    rack_objective: Option<f64>,
) -> Result<Placement> {
    let counts = classify(circuit, &qubit_to_qpu, topo);
    let qpu_to_rack = qubit_to_qpu
        .iter()
        .map(|&q| (q, topo.rack_of(q).unwrap_or(u32::MAX)))
        .collect();
    Ok(Placement {
        c_fid: fidelity_cost(&counts, table)?,
        qubit_to_qpu,
        qpu_to_rack,
        counts,
        rack_objective,
    })
}

fn needed_qpus(circuit: &QuantumCircuit, cap: usize, free: usize) -> Result<usize> {
    if cap == 0 {
        return Err(Error::param("data_qubits", "QPUs have no data qubits"));
    }
    let k = circuit.n_qubits().div_ceil(cap);
    if k > free {
        return Err(Error::Capacity {
            needed: circuit.n_qubits(),
            available: free * cap,
        });
    }
    Ok(k)
}

/// Compiles onto any QPU of the topology.
pub fn compile<R: Rng + ?Sized>(
    circuit: &QuantumCircuit,
    topo: &NetworkTopology,
    table: &FidelityTable,
    rng: &mut R,
) -> Result<Placement> {
    let free: Vec<NodeId> = topo.qpus().collect();
    compile_on(circuit, topo, &free, table, rng)
}

/// Compiles onto the QPUs in `free`. Switch-centric topologies with racks
/// get the exact rack assignment; others take the first free QPUs.
pub fn compile_on<R: Rng + ?Sized>(
    circuit: &QuantumCircuit,
    topo: &NetworkTopology,
    free: &[NodeId],
    table: &FidelityTable,
    rng: &mut R,
) -> Result<Placement> {
    table.validate()?;
    let cap = qpu_capacity(topo);
    let k = needed_qpus(circuit, cap, free.len())?;
    let logical = partition_circuit(circuit, cap, k, rng)?;
    let mut free = free.to_vec();
    free.sort_unstable();
    if !topo.is_schedulable() || k == 0 {
        let qubit_to_qpu = logical.iter().map(|&p| free[p]).collect();
        return finish(circuit, qubit_to_qpu, topo, table, None);
    }
    let mut by_rack: BTreeMap<u32, Vec<NodeId>> = BTreeMap::new();
    for &q in &free {
        by_rack.entry(topo.rack_of(q).unwrap_or(u32::MAX)).or_default().push(q);
    }
    let racks: Vec<Vec<NodeId>> = by_rack.into_values().collect();
    let capacities: Vec<usize> = racks.iter().map(Vec::len).collect();
    let e = WeightMatrix::from_circuit(circuit).quotient(&logical, k);
    let assignment = solve_rack_assignment(
        &e,
        &capacities,
        table.intra_weight(),
        table.inter_weight(),
        racks::DEFAULT_NODE_LIMIT,
    )?;
    let mut next = vec![0usize; racks.len()];
    let mut physical = vec![NodeId(0); k];
    for (p, &r) in assignment.rack_of.iter().enumerate() {
        physical[p] = racks[r][next[r]];
        next[r] += 1;
    }
    let qubit_to_qpu = logical.iter().map(|&p| physical[p]).collect();
    finish(circuit, qubit_to_qpu, topo, table, Some(assignment.objective))
}

/// Random balanced qubit split onto randomly chosen free QPUs.
pub fn random_placement<R: Rng + ?Sized>(
    circuit: &QuantumCircuit,
    topo: &NetworkTopology,
    table: &FidelityTable,
    rng: &mut R,
) -> Result<Placement> {
    table.validate()?;
    let mut free: Vec<NodeId> = topo.qpus().collect();
    let cap = qpu_capacity(topo);
    let k = needed_qpus(circuit, cap, free.len())?;
    let n = circuit.n_qubits();
    let mut qubits: Vec<usize> = (0..n).collect();
    qubits.shuffle(rng);
    free.shuffle(rng);
    let mut qubit_to_qpu = vec![NodeId(0); n];
    let mut at = 0;
    for (p, &qpu) in free.iter().take(k).enumerate() {
        let size = n / k + usize::from(p < n % k);
        for &q in &qubits[at..at + size] {
            qubit_to_qpu[q] = qpu;
        }
        at += size;
    }
    finish(circuit, qubit_to_qpu, topo, table, None)
}
