//! Switching-round scheduling of remote gates.
//!
//! Each round reserves one path per selected remote gate; all tasks of a
//! round run in parallel and gates unlocked by a round become eligible in
//! the next one. Local gates take no time and run as soon as they are
//! ready.

pub mod dag;
pub mod ilp;
pub mod multijob;
pub mod resources;

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::topology::{NetworkTopology, NodeId, PathKind, PathSpec};

pub use dag::CircuitDag;
pub use ilp::{allocate_ilp, brute_force_allocation, Allocation, GateRequest};
pub use multijob::{
    run_multijob, run_multijob_observed, Event, EventKind, JobRequest, JobState, JobStatus, MultiJobConfig,
    MultiJobRun, PlacementPolicy, QubitMapping,
};
pub use resources::{reservations, Candidate, PathCache, Reservation, ResourceLedger};

/// Per-round path selection strategy.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Allocator {
    /// Frontier in priority order, first path that fits.
    #[default]
    Heuristic,
    /// Exact weighted selection over the whole frontier.
    Ilp,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct SchedulerOptions {
    pub allocator: Allocator,
    /// Ebits generated back to back for each remote gate.
    pub ebits_required: u32,
    pub ilp_node_limit: u64,
}

impl Default for SchedulerOptions {
    fn default() -> Self {
        Self {
            allocator: Allocator::Heuristic,
            ebits_required: 2,
            ilp_node_limit: ilp::DEFAULT_NODE_LIMIT,
        }
    }
}

impl SchedulerOptions {
    pub fn validate(&self) -> Result<()> {
        if self.ebits_required == 0 {
            return Err(Error::param("ebits_required", "must be at least 1"));
        }
        Ok(())
    }
}

/// Ebit generation for one remote gate on a reserved path.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EbitTask {
    pub job: usize,
    pub gate: usize,
    pub qpus: (NodeId, NodeId),
    pub path: PathSpec,
    pub ebits_required: u32,
}

impl EbitTask {
    pub fn kind(&self) -> PathKind {
        self.path.kind
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SwitchingRound {
    pub index: usize,
    pub tasks: Vec<EbitTask>,
    pub reserved: Vec<Reservation>,
}

/// When each gate of a job ran. Remote gates carry their round; local
/// gates carry the number of rounds completed before they ran.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct JobGates {
    pub job: usize,
    pub remote: Vec<bool>,
    pub round: Vec<usize>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    pub rounds: Vec<SwitchingRound>,
    pub jobs: Vec<JobGates>,
}

impl Schedule {
    pub fn n_rounds(&self) -> usize {
        self.rounds.len()
    }

    /// Gate ids of every round for job `job`.
    pub fn round_gates(&self, job: usize) -> Vec<Vec<usize>> {
        self.rounds
            .iter()
            .map(|r| r.tasks.iter().filter(|t| t.job == job).map(|t| t.gate).collect())
            .collect()
    }

    pub fn write_json<W: Write>(&self, out: W) -> Result<()> {
        serde_json::to_writer_pretty(out, self).map_err(|e| Error::Io(e.to_string()))
    }

    /// Checks inventory limits per round and DAG precedence per job.
    pub fn verify(&self, dags: &[&CircuitDag], topo: &NetworkTopology) -> std::result::Result<(), String> {
        let mut ledger = ResourceLedger::new(topo);
        for r in &self.rounds {
            ledger.clear();
            for t in &r.tasks {
                let (a, b) = t.path.endpoints();
                if (a, b) != t.qpus && (b, a) != t.qpus {
                    return Err(format!("round {}: gate {} path endpoints differ", r.index, t.gate));
                }
                if !ledger.try_reserve(&Candidate::new(t.path.clone())) {
                    return Err(format!("round {}: gate {} over-allocates", r.index, t.gate));
                }
            }
        }
        for jg in &self.jobs {
            let dag = dags[jg.job];
            if jg.round.contains(&usize::MAX) {
                return Err(format!("job {}: unscheduled gate", jg.job));
            }
            for (a, b) in dag.edges() {
                let (ra, rb) = (jg.round[a], jg.round[b]);
                let ok = match (jg.remote[a], jg.remote[b]) {
                    (true, _) => rb > ra,
                    (false, _) => rb >= ra,
                };
                if !ok {
                    return Err(format!("job {}: gate {b} runs before its predecessor {a}", jg.job));
                }
            }
        }
        Ok(())
    }
}

/// A job whose DAG is being executed.
pub(crate) struct LiveJob {
    pub id: usize,
    pub dag: CircuitDag,
    qpu_of: Vec<NodeId>,
    pending: Vec<u32>,
    frontier: Vec<u32>,
    remaining: usize,
    pub gates: JobGates,
    pub intra_tasks: usize,
    pub inter_tasks: usize,
}

impl LiveJob {
    pub fn new(id: usize, dag: CircuitDag, qpu_of: Vec<NodeId>, rounds_done: usize) -> Self {
        let n = dag.len();
        let pending = (0..n).map(|g| dag.in_degree(g)).collect();
        let remote = (0..n)
            .map(|g| match dag.operands(g) {
                (a, Some(b)) => qpu_of[a] != qpu_of[b],
                _ => false,
            })
            .collect();
        let start = dag.frontier();
        let mut job = Self {
            id,
            dag,
            qpu_of,
            pending,
            frontier: Vec::new(),
            remaining: n,
            gates: JobGates {
                job: id,
                remote,
                round: vec![usize::MAX; n],
            },
            intra_tasks: 0,
            inter_tasks: 0,
        };
        for g in start {
            job.ready(g as u32, rounds_done);
        }
        job
    }

    fn ready(&mut self, g: u32, rounds_done: usize) {
        let mut stack = vec![g];
        while let Some(g) = stack.pop() {
            let gi = g as usize;
            if self.gates.remote[gi] {
                self.frontier.push(g);
                continue;
            }
            self.gates.round[gi] = rounds_done;
            self.remaining -= 1;
            for &s in self.dag.successors(gi) {
                self.pending[s as usize] -= 1;
                if self.pending[s as usize] == 0 {
                    stack.push(s);
                }
            }
        }
    }

    fn complete(&mut self, g: usize, round: usize) {
        self.gates.round[g] = round;
        self.remaining -= 1;
        let succ: Vec<u32> = self.dag.successors(g).to_vec();
        for s in succ {
            self.pending[s as usize] -= 1;
            if self.pending[s as usize] == 0 {
                self.ready(s, round + 1);
            }
        }
    }

    pub fn is_done(&self) -> bool {
        self.remaining == 0
    }

    fn qpus(&self, g: usize) -> (NodeId, NodeId) {
        match self.dag.operands(g) {
            (a, Some(b)) => (self.qpu_of[a], self.qpu_of[b]),
            _ => unreachable!("remote gates have two qubits"),
        }
    }

    /// Ready remote gates, most descendants first, then by id.
    fn prioritized(&self) -> Vec<u32> {
        let mut f = self.frontier.clone();
        f.sort_by_key(|&g| (std::cmp::Reverse(self.dag.descendants(g as usize)), g));
        f
    }

    /// Marks the tasks of a finished round that belong to this job.
    pub fn finish_round(&mut self, tasks: &[EbitTask], round: usize) {
        let mine: Vec<&EbitTask> = tasks.iter().filter(|t| t.job == self.id).collect();
        self.frontier.retain(|&g| !mine.iter().any(|t| t.gate == g as usize));
        for t in mine {
            match t.kind() {
                PathKind::Intra => self.intra_tasks += 1,
                _ => self.inter_tasks += 1,
            }
            self.complete(t.gate, round);
        }
    }
}

/// Per-round selection state shared across rounds.
pub(crate) struct RoundBuilder {
    ledger: ResourceLedger,
    cache: PathCache,
}

impl RoundBuilder {
    pub fn new(topo: &NetworkTopology) -> Self {
        Self {
            ledger: ResourceLedger::new(topo),
            cache: PathCache::new(),
        }
    }

    fn task(job: &LiveJob, g: usize, c: &Candidate, opts: &SchedulerOptions) -> EbitTask {
        EbitTask {
            job: job.id,
            gate: g,
            qpus: job.qpus(g),
            path: c.path.clone(),
            ebits_required: opts.ebits_required,
        }
    }

    /// Selects the tasks of the next round. Errors when some job has ready
    /// remote gates but nothing can be placed.
    pub fn form(&mut self, topo: &NetworkTopology, jobs: &[LiveJob], opts: &SchedulerOptions) -> Result<Vec<EbitTask>> {
        self.ledger.clear();
        let lists: Vec<Vec<u32>> = jobs.iter().map(LiveJob::prioritized).collect();
        let mut tasks = Vec::new();
        match opts.allocator {
            Allocator::Heuristic => {
                // One gate per job per pass.
                let mut cursor = vec![0usize; jobs.len()];
                loop {
                    let mut progress = false;
                    for (j, job) in jobs.iter().enumerate() {
                        while cursor[j] < lists[j].len() {
                            let g = lists[j][cursor[j]] as usize;
                            cursor[j] += 1;
                            let (a, b) = job.qpus(g);
                            let cands = self.cache.get(topo, a, b, g)?;
                            if let Some(c) = cands.iter().find(|c| self.ledger.try_reserve(c)) {
                                tasks.push(Self::task(job, g, c, opts));
                                progress = true;
                                break;
                            }
                        }
                    }
                    if !progress {
                        break;
                    }
                }
            }
            Allocator::Ilp => {
                let mut owned = Vec::new();
                for (j, job) in jobs.iter().enumerate() {
                    for &g in &lists[j] {
                        let (a, b) = job.qpus(g as usize);
                        let c = self.cache.get(topo, a, b, g as usize)?;
                        owned.push((j, g as usize, 1 + u64::from(job.dag.descendants(g as usize)), c));
                    }
                }
                let reqs: Vec<GateRequest> = owned
                    .iter()
                    .map(|(_, _, w, c)| GateRequest {
                        weight: *w,
                        candidates: c,
                    })
                    .collect();
                let alloc = allocate_ilp(&reqs, &mut self.ledger, opts.ilp_node_limit);
                for ((j, g, _, c), choice) in owned.iter().zip(&alloc.choice) {
                    if let Some(k) = choice {
                        let ok = self.ledger.try_reserve(&c[*k]);
                        debug_assert!(ok);
                        tasks.push(Self::task(&jobs[*j], *g, &c[*k], opts));
                    }
                }
            }
        }
        if tasks.is_empty() {
            if let Some(&g) = lists.iter().flatten().next() {
                return Err(Error::Unschedulable { gate: g as usize });
            }
        }
        Ok(tasks)
    }
}

fn check_placement(n_qubits: usize, qubit_to_qpu: &[NodeId], topo: &NetworkTopology) -> Result<()> {
    if qubit_to_qpu.len() < n_qubits {
        return Err(Error::param("placement", "does not cover every qubit"));
    }
    if let Some(q) = qubit_to_qpu.iter().find(|q| q.index() >= topo.qpu_count()) {
        return Err(Error::NotQpu(q.0));
    }
    Ok(())
}

/// Greedy switching rounds for one circuit on an otherwise idle network.
pub fn schedule_single(
    dag: &CircuitDag,
    qubit_to_qpu: &[NodeId],
    topo: &NetworkTopology,
    opts: &SchedulerOptions,
) -> Result<Schedule> {
    opts.validate()?;
    check_placement(dag.n_qubits(), qubit_to_qpu, topo)?;
    let mut job = LiveJob::new(0, dag.clone(), qubit_to_qpu.to_vec(), 0);
    let mut builder = RoundBuilder::new(topo);
    let mut rounds = Vec::new();
    while !job.is_done() {
        let tasks = builder.form(topo, std::slice::from_ref(&job), opts)?;
        let index = rounds.len();
        job.finish_round(&tasks, index);
        rounds.push(SwitchingRound {
            index,
            reserved: reservations(tasks.iter().map(|t| &t.path)),
            tasks,
        });
    }
    Ok(Schedule {
        rounds,
        jobs: vec![job.gates],
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::{random_matching_circuit, QuantumCircuit};
    use crate::rng::stream;
    use crate::topology::{build_clos, build_two_tier, ResourceInventory};
    use proptest::prelude::*;
    use rand::Rng;

    fn six_qubit_example() -> QuantumCircuit {
        let mut c = QuantumCircuit::new(6);
        for (a, b) in [(1, 2), (4, 3), (6, 5), (1, 4), (2, 5), (3, 1)] {
            c.two(a - 1, b - 1).unwrap();
        }
        c
    }

    fn two_rack_network() -> NetworkTopology {
        let inv = ResourceInventory::uniform(1, 1, 2).with_telecom_bsms(1);
        build_two_tier(2, 3, 1, &inv).unwrap()
    }

    fn identity(n: u32) -> Vec<NodeId> {
        (0..n).map(NodeId).collect()
    }

    #[test]
    fn example_rounds() {
        let t = two_rack_network();
        let dag = CircuitDag::build(&six_qubit_example());
        for allocator in [Allocator::Heuristic, Allocator::Ilp] {
            let opts = SchedulerOptions {
                allocator,
                ebits_required: 1,
                ..Default::default()
            };
            let s = schedule_single(&dag, &identity(6), &t, &opts).unwrap();
            let mut rounds = s.round_gates(0);
            for r in &mut rounds {
                r.sort_unstable();
            }
            assert_eq!(rounds, vec![vec![0, 1, 2], vec![3], vec![4, 5]], "{allocator:?}");
            s.verify(&[&dag], &t).unwrap();
        }
    }

    #[test]
    fn all_local_no_rounds() {
        let t = two_rack_network();
        let dag = CircuitDag::build(&six_qubit_example());
        let s = schedule_single(&dag, &[NodeId(0); 6], &t, &SchedulerOptions::default()).unwrap();
        assert_eq!(s.n_rounds(), 0);
        assert!(s.jobs[0].round.iter().all(|&r| r == 0));
    }

    #[test]
    fn empty_circuit() {
        let t = two_rack_network();
        let dag = CircuitDag::build(&QuantumCircuit::new(3));
        let s = schedule_single(&dag, &identity(3), &t, &SchedulerOptions::default()).unwrap();
        assert_eq!(
            s,
            Schedule {
                rounds: vec![],
                jobs: vec![JobGates {
                    job: 0,
                    remote: vec![],
                    round: vec![]
                }]
            }
        );
    }

    #[test]
    fn core_bsm_count_sets_round_count() {
        let mut c = QuantumCircuit::new(4);
        c.two(0, 2).unwrap();
        c.two(1, 3).unwrap();
        let dag = CircuitDag::build(&c);
        for (bsms, expected) in [(1, 2), (2, 1)] {
            let inv = ResourceInventory::uniform(1, 1, 2).with_telecom_bsms(bsms);
            let t = build_two_tier(2, 2, 1, &inv).unwrap();
            let s = schedule_single(&dag, &identity(4), &t, &SchedulerOptions::default()).unwrap();
            assert_eq!(s.n_rounds(), expected, "{bsms} BSMs");
        }
    }

    #[test]
    fn local_gate_between_remote_gates() {
        let t = two_rack_network();
        let mut c = QuantumCircuit::new(3);
        c.two(0, 1).unwrap();
        c.one(1).unwrap();
        c.two(1, 2).unwrap();
        let dag = CircuitDag::build(&c);
        let s = schedule_single(&dag, &identity(3), &t, &SchedulerOptions::default()).unwrap();
        assert_eq!(s.jobs[0].round, vec![0, 1, 1]);
        assert_eq!(s.jobs[0].remote, vec![true, false, true]);
        s.verify(&[&dag], &t).unwrap();
    }

    #[test]
    fn no_comm_qubits_is_unschedulable() {
        let t = build_two_tier(1, 2, 0, &ResourceInventory::uniform(0, 1, 1)).unwrap();
        let mut c = QuantumCircuit::new(2);
        c.two(0, 1).unwrap();
        let e = schedule_single(&CircuitDag::build(&c), &identity(2), &t, &SchedulerOptions::default());
        assert_eq!(e, Err(Error::Unschedulable { gate: 0 }));
    }

    #[test]
    fn server_centric_without_path_errors() {
        let t = build_two_tier(2, 1, 0, &ResourceInventory::default()).unwrap();
        let mut c = QuantumCircuit::new(2);
        c.two(0, 1).unwrap();
        let e = schedule_single(&CircuitDag::build(&c), &identity(2), &t, &SchedulerOptions::default());
        assert_eq!(e, Err(Error::NoPath { gate: 0, a: 0, b: 1 }));
    }

    #[test]
    fn json_lists_rounds_and_paths() {
        let t = two_rack_network();
        let dag = CircuitDag::build(&six_qubit_example());
        let s = schedule_single(&dag, &identity(6), &t, &SchedulerOptions::default()).unwrap();
        let mut buf = Vec::new();
        s.write_json(&mut buf).unwrap();
        let v: serde_json::Value = serde_json::from_slice(&buf).unwrap();
        assert_eq!(v["rounds"].as_array().unwrap().len(), 3);
        assert_eq!(v["rounds"][1]["tasks"][0]["path"]["kind"], "inter");
        assert!(!v["rounds"][1]["reserved"].as_array().unwrap().is_empty());
        let back: Schedule = serde_json::from_slice(&buf).unwrap();
        assert_eq!(back, s);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]
        #[test]
        fn schedules_respect_inventory_and_order(seed in any::<u64>(), ilp in any::<bool>()) {
            let mut rng = stream(seed, "sched", 0);
            let inv = ResourceInventory {
                comm_qubits: rng.random_range(1..4),
                bsm_count: rng.random_range(1..4),
                ent_sources: rng.random_range(1..4),
                detectors: rng.random_range(1..4),
                ..ResourceInventory::default()
            };
            let t = build_clos(4, 3, &inv).unwrap();
            let n = rng.random_range(2..16);
            let c = random_matching_circuit(n, rng.random_range(1..8), &mut rng);
            let placement: Vec<NodeId> = (0..n).map(|_| NodeId(rng.random_range(0..12))).collect();
            let dag = CircuitDag::build(&c);
            let opts = SchedulerOptions {
                allocator: if ilp { Allocator::Ilp } else { Allocator::Heuristic },
                ilp_node_limit: 20_000,
                ..Default::default()
            };
            let s = schedule_single(&dag, &placement, &t, &opts).unwrap();
            prop_assert!(s.verify(&[&dag], &t).is_ok(), "{:?}", s.verify(&[&dag], &t));
            let remote = s.jobs[0].remote.iter().filter(|&&r| r).count();
            prop_assert_eq!(s.rounds.iter().map(|r| r.tasks.len()).sum::<usize>(), remote);
        }
    }
}
