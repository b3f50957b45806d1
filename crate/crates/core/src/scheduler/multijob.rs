//! Online execution of many jobs sharing one network.
//!
//! Arriving jobs start at once when enough QPUs are free, otherwise wait
//! in a bounded FIFO queue; a full queue rejects. Running jobs share each
//! switching round, one gate per job per pass. QPUs are released when a
//! job's last gate completes, after which the queue is scanned in arrival
//! order and every waiting job that fits is started.

use std::collections::VecDeque;
use std::io::Write;
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{reservations, CircuitDag, EbitTask, LiveJob, RoundBuilder, Schedule, SchedulerOptions, SwitchingRound};
use crate::circuit::QuantumCircuit;
use crate::compiler::{classify, compile_on, fidelity_cost, qpu_capacity, FidelityTable, GateCounts};
use crate::error::{Error, Result};
use crate::topology::{NetworkTopology, NodeId};

/// How an admitted job's QPUs are picked among the free ones.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlacementPolicy {
    /// Best-fit: the fullest rack that still fits the job, else as few
    /// racks as possible.
    #[default]
    Pack,
    /// One QPU per rack in turn, racks with the most free QPUs first.
    Spread,
}

/// How logical qubits are laid out on the picked QPUs.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QubitMapping {
    /// Qubit `q` goes to the `q / data_qubits`-th picked QPU.
    #[default]
    Contiguous,
    /// Partition and rack assignment by the compiler.
    Compile,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MultiJobConfig {
    pub buffer_capacity: usize,
    pub policy: PlacementPolicy,
    pub mapping: QubitMapping,
    pub scheduler: SchedulerOptions,
    pub fidelity: FidelityTable,
    /// Keep every round and gate record in the result.
    pub record_schedule: bool,
}

impl Default for MultiJobConfig {
    fn default() -> Self {
        Self {
            buffer_capacity: 4,
            policy: PlacementPolicy::Pack,
            mapping: QubitMapping::Contiguous,
            scheduler: SchedulerOptions::default(),
            fidelity: FidelityTable::default(),
            record_schedule: false,
        }
    }
}

#[derive(Clone, Debug)]
pub struct JobRequest {
    pub id: usize,
    pub class: usize,
    /// Seconds.
    pub arrival: f64,
    pub circuit: Arc<QuantumCircuit>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JobStatus {
    Buffered,
    Waiting,
    Running,
    Done,
    Rejected,
}

impl JobStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            JobStatus::Buffered => "buffered",
            JobStatus::Waiting => "waiting",
            JobStatus::Running => "running",
            JobStatus::Done => "done",
            JobStatus::Rejected => "rejected",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JobState {
    pub id: usize,
    pub class: usize,
    pub n_qubits: usize,
    pub n_qpus: usize,
    pub arrival: f64,
    pub status: JobStatus,
    pub qpus: Vec<NodeId>,
    pub start: Option<f64>,
    pub finish: Option<f64>,
    pub counts: GateCounts,
    pub c_fid: Option<f64>,
    pub intra_tasks: usize,
    pub inter_tasks: usize,
}

impl JobState {
    /// Execution time, start to finish.
    pub fn jet(&self) -> Option<f64> {
        Some(self.finish? - self.start?)
    }

    /// Completion time, arrival to finish.
    pub fn jct(&self) -> Option<f64> {
        Some(self.finish? - self.arrival)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    Arrive,
    Admit,
    Queue,
    Reject,
    Start,
    Finish,
}

impl EventKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EventKind::Arrive => "arrive",
            EventKind::Admit => "admit",
            EventKind::Queue => "queue",
            EventKind::Reject => "reject",
            EventKind::Start => "start",
            EventKind::Finish => "finish",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub time: f64,
    pub event: EventKind,
    pub job_id: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MultiJobRun {
    pub jobs: Vec<JobState>,
    pub events: Vec<Event>,
    pub rounds: usize,
    /// Time the last round ended.
    pub end_time: f64,
    pub schedule: Option<Schedule>,
}

impl MultiJobRun {
    /// Event log as CSV with columns `time, event, job_id`.
    pub fn write_events_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let io = |e: csv::Error| Error::Io(e.to_string());
        w.write_record(["time", "event", "job_id"]).map_err(io)?;
        for e in &self.events {
            w.write_record([e.time.to_string(), e.event.as_str().to_string(), e.job_id.to_string()])
                .map_err(io)?;
        }
        w.flush()?;
        Ok(())
    }
}

struct Runner<'a, R: ?Sized> {
    topo: &'a NetworkTopology,
    cfg: &'a MultiJobConfig,
    requests: &'a [JobRequest],
    rng: &'a mut R,
    cap: usize,
    free: Vec<bool>,
    queue: VecDeque<usize>,
    jobs: Vec<JobState>,
    live: Vec<LiveJob>,
    events: Vec<Event>,
    finished: Vec<super::JobGates>,
    rounds_done: usize,
    in_round: bool,
}

impl<R: Rng + ?Sized> Runner<'_, R> {
    fn log(&mut self, time: f64, event: EventKind, job_id: usize) {
        self.events.push(Event { time, event, job_id });
    }

    fn free_by_rack(&self) -> Vec<Vec<NodeId>> {
        let racks = self.topo.racks();
        if racks.is_empty() {
            return vec![self.topo.qpus().filter(|q| self.free[q.index()]).collect()];
        }
        racks
            .iter()
            .map(|r| r.qpus.iter().copied().filter(|q| self.free[q.index()]).collect())
            .collect()
    }

    fn pick_qpus(&self, k: usize) -> Option<Vec<NodeId>> {
        let mut racks = self.free_by_rack();
        if racks.iter().map(Vec::len).sum::<usize>() < k {
            return None;
        }
        let mut order: Vec<usize> = (0..racks.len()).collect();
        order.sort_by_key(|&r| (std::cmp::Reverse(racks[r].len()), r));
        let mut picked = Vec::with_capacity(k);
        match self.cfg.policy {
            PlacementPolicy::Pack => {
                if let Some(r) = (0..racks.len())
                    .filter(|&r| racks[r].len() >= k)
                    .min_by_key(|&r| (racks[r].len(), r))
                {
                    picked.extend_from_slice(&racks[r][..k]);
                } else {
                    for r in order {
                        let take = (k - picked.len()).min(racks[r].len());
                        picked.extend_from_slice(&racks[r][..take]);
                        if picked.len() == k {
                            break;
                        }
                    }
                }
            }
            PlacementPolicy::Spread => {
                for list in &mut racks {
                    list.reverse();
                }
                while picked.len() < k {
                    for &r in &order {
                        if picked.len() == k {
                            break;
                        }
                        if let Some(q) = racks[r].pop() {
                            picked.push(q);
                        }
                    }
                }
            }
        }
        Some(picked)
    }

    fn needed(&self, i: usize) -> usize {
        self.requests[i].circuit.n_qubits().div_ceil(self.cap)
    }

    /// Starts job `i` at `t` if its QPUs are available.
    fn try_start(&mut self, i: usize, t: f64) -> Result<bool> {
        let Some(qpus) = self.pick_qpus(self.needed(i)) else {
            return Ok(false);
        };
        let requests = self.requests;
        let circuit = &requests[i].circuit;
        let qubit_to_qpu: Vec<NodeId> = match self.cfg.mapping {
            QubitMapping::Contiguous => (0..circuit.n_qubits()).map(|q| qpus[q / self.cap]).collect(),
            QubitMapping::Compile => compile_on(circuit, self.topo, &qpus, &self.cfg.fidelity, self.rng)?.qubit_to_qpu,
        };
        let counts = classify(circuit, &qubit_to_qpu, self.topo);
        for q in &qpus {
            self.free[q.index()] = false;
        }
        let job = &mut self.jobs[i];
        job.status = JobStatus::Running;
        job.start = Some(t);
        job.qpus = qpus;
        job.counts = counts;
        job.c_fid = Some(fidelity_cost(&counts, &self.cfg.fidelity)?);
        self.log(t, EventKind::Start, i);
        let first_round = self.rounds_done + usize::from(self.in_round);
        let live = LiveJob::new(i, CircuitDag::build(circuit), qubit_to_qpu, first_round);
        if live.is_done() {
            self.finish(live, t);
        } else {
            self.live.push(live);
        }
        Ok(true)
    }

    fn finish(&mut self, live: LiveJob, t: f64) {
        let job = &mut self.jobs[live.id];
        job.status = JobStatus::Done;
        job.finish = Some(t);
        job.intra_tasks = live.intra_tasks;
        job.inter_tasks = live.inter_tasks;
        for q in &job.qpus {
            self.free[q.index()] = true;
        }
        self.log(t, EventKind::Finish, live.id);
        if self.cfg.record_schedule {
            self.finished.push(live.gates);
        }
    }

    /// Starts waiting jobs in arrival order, skipping those that do not fit.
    fn scan_queue(&mut self, t: f64) -> Result<()> {
        loop {
            let mut started = false;
            let mut k = 0;
            while k < self.queue.len() {
                let i = self.queue[k];
                if self.try_start(i, t)? {
                    self.queue.remove(k);
                    started = true;
                } else {
                    k += 1;
                }
            }
            // Jobs with no remote gates free their QPUs at once.
            if !started || self.queue.is_empty() {
                return Ok(());
            }
        }
    }

    fn arrive(&mut self, i: usize) -> Result<()> {
        let t = self.requests[i].arrival;
        self.log(t, EventKind::Arrive, i);
        if self.needed(i) > self.topo.qpu_count() {
            self.jobs[i].status = JobStatus::Rejected;
            self.log(t, EventKind::Reject, i);
            return Ok(());
        }
        if self.try_start_admitted(i, t)? {
            return Ok(());
        }
        if self.queue.len() < self.cfg.buffer_capacity {
            self.jobs[i].status = JobStatus::Waiting;
            self.queue.push_back(i);
            self.log(t, EventKind::Queue, i);
        } else {
            self.jobs[i].status = JobStatus::Rejected;
            self.log(t, EventKind::Reject, i);
        }
        Ok(())
    }

    fn try_start_admitted(&mut self, i: usize, t: f64) -> Result<bool> {
        if self.pick_qpus(self.needed(i)).is_none() {
            return Ok(false);
        }
        self.log(t, EventKind::Admit, i);
        let started = self.try_start(i, t)?;
        debug_assert!(started);
        if self.queue.is_empty() {
            return Ok(true);
        }
        // A job that finished on admission may have freed room.
        self.scan_queue(t)?;
        Ok(true)
    }
}

/// Runs all requests to completion. `round_time` gives the wall-clock
/// duration of a round (reconfiguration included) from its tasks.
pub fn run_multijob<F, R>(
    requests: &[JobRequest],
    topo: &NetworkTopology,
    cfg: &MultiJobConfig,
    round_time: F,
    rng: &mut R,
) -> Result<MultiJobRun>
where
    F: FnMut(&[EbitTask]) -> Result<f64>,
    R: Rng + ?Sized,
{
    run_multijob_observed(requests, requests.len(), topo, cfg, round_time, rng)
}

/// Like [`run_multijob`], but stops as soon as the first `observed`
/// requests are done or rejected. Later requests only load the network;
/// those still running at the stop keep `finish = None`.
pub fn run_multijob_observed<F, R>(
    requests: &[JobRequest],
    observed: usize,
    topo: &NetworkTopology,
    cfg: &MultiJobConfig,
    mut round_time: F,
    rng: &mut R,
) -> Result<MultiJobRun>
where
    F: FnMut(&[EbitTask]) -> Result<f64>,
    R: Rng + ?Sized,
{
    cfg.scheduler.validate()?;
    if observed > requests.len() {
        return Err(Error::param("observed", "exceeds the number of requests"));
    }
    if !topo.is_schedulable() {
        return Err(Error::param(
            "topology",
            "multi-job runs need a switch-centric topology with racks",
        ));
    }
    if requests.iter().enumerate().any(|(i, r)| r.id != i) {
        return Err(Error::param("requests", "ids must be 0, 1, 2, ... in order"));
    }
    let cap = qpu_capacity(topo);
    if cap == 0 {
        return Err(Error::param("data_qubits", "QPUs have no data qubits"));
    }
    let mut order: Vec<usize> = (0..requests.len()).collect();
    order.sort_by(|&a, &b| requests[a].arrival.total_cmp(&requests[b].arrival).then(a.cmp(&b)));
    let jobs = requests
        .iter()
        .map(|r| JobState {
            id: r.id,
            class: r.class,
            n_qubits: r.circuit.n_qubits(),
            n_qpus: r.circuit.n_qubits().div_ceil(cap),
            arrival: r.arrival,
            status: JobStatus::Buffered,
            qpus: Vec::new(),
            start: None,
            finish: None,
            counts: GateCounts::default(),
            c_fid: None,
            intra_tasks: 0,
            inter_tasks: 0,
        })
        .collect();
    let mut run = Runner {
        topo,
        cfg,
        requests,
        rng,
        cap,
        free: vec![true; topo.qpu_count()],
        queue: VecDeque::new(),
        jobs,
        live: Vec::new(),
        events: Vec::new(),
        finished: Vec::new(),
        rounds_done: 0,
        in_round: false,
    };
    let mut builder = RoundBuilder::new(topo);
    let mut rounds = Vec::new();
    let mut t = 0.0f64;
    let mut next = 0;
    let resolved = |run: &Runner<'_, R>| {
        run.jobs[..observed]
            .iter()
            .all(|j| matches!(j.status, JobStatus::Done | JobStatus::Rejected))
    };
    loop {
        if observed < requests.len() && resolved(&run) {
            break;
        }
        while next < order.len() && requests[order[next]].arrival <= t {
            run.arrive(order[next])?;
            next += 1;
        }
        if run.live.is_empty() {
            if next == order.len() {
                break;
            }
            t = t.max(requests[order[next]].arrival);
            continue;
        }
        let tasks = builder.form(topo, &run.live, &cfg.scheduler)?;
        let end = t + round_time(&tasks)?;
        run.in_round = true;
        while next < order.len() && requests[order[next]].arrival <= end {
            run.arrive(order[next])?;
            next += 1;
        }
        run.in_round = false;
        t = end;
        let index = run.rounds_done;
        for job in &mut run.live {
            job.finish_round(&tasks, index);
        }
        run.rounds_done += 1;
        let (done, live): (Vec<LiveJob>, Vec<LiveJob>) =
            std::mem::take(&mut run.live).into_iter().partition(|j| j.is_done());
        run.live = live;
        let any_done = !done.is_empty();
        for job in done {
            run.finish(job, t);
        }
        if any_done {
            run.scan_queue(t)?;
        }
        if cfg.record_schedule {
            rounds.push(SwitchingRound {
                index,
                reserved: reservations(tasks.iter().map(|t| &t.path)),
                tasks,
            });
        }
    }
    let schedule = cfg.record_schedule.then(|| {
        let mut jobs = std::mem::take(&mut run.finished);
        jobs.sort_by_key(|g| g.job);
        Schedule { rounds, jobs }
    });
    Ok(MultiJobRun {
        jobs: run.jobs,
        events: run.events,
        rounds: run.rounds_done,
        end_time: t,
        schedule,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::{random_square_circuit, QuantumCircuit};
    use crate::rng::stream;
    use crate::scheduler::schedule_single;
    use crate::topology::{build_clos, ResourceInventory};

    fn fixed_round(_: &[EbitTask]) -> Result<f64> {
        Ok(0.01)
    }

    fn table_ii() -> NetworkTopology {
        build_clos(6, 4, &ResourceInventory::default()).unwrap()
    }

    fn requests(circuits: Vec<(f64, QuantumCircuit)>) -> Vec<JobRequest> {
        circuits
            .into_iter()
            .enumerate()
            .map(|(id, (arrival, c))| JobRequest {
                id,
                class: 0,
                arrival,
                circuit: Arc::new(c),
            })
            .collect()
    }

    #[test]
    fn solo_job_has_no_wait() {
        let t = table_ii();
        let mut rng = stream(1, "circuit", 0);
        let reqs = requests(vec![(0.5, random_square_circuit(20, &mut rng))]);
        let run = run_multijob(&reqs, &t, &MultiJobConfig::default(), fixed_round, &mut rng).unwrap();
        let j = &run.jobs[0];
        assert_eq!(j.status, JobStatus::Done);
        assert_eq!(j.jct(), j.jet());
        assert!(j.jet().unwrap() > 0.0);
        // Two QPUs in one rack.
        assert_eq!(j.inter_tasks, 0);
        assert!(j.intra_tasks > 0);
        let kinds: Vec<EventKind> = run.events.iter().map(|e| e.event).collect();
        assert_eq!(
            kinds,
            vec![EventKind::Arrive, EventKind::Admit, EventKind::Start, EventKind::Finish]
        );
    }

    #[test]
    fn matches_single_job_rounds() {
        let t = table_ii();
        let mut rng = stream(2, "circuit", 0);
        let c = random_square_circuit(50, &mut rng);
        let reqs = requests(vec![(0.0, c.clone())]);
        let cfg = MultiJobConfig {
            record_schedule: true,
            ..Default::default()
        };
        let run = run_multijob(&reqs, &t, &cfg, fixed_round, &mut rng).unwrap();
        let qpus = &run.jobs[0].qpus;
        let placement: Vec<NodeId> = (0..50).map(|q| qpus[q / 10]).collect();
        let single = schedule_single(&CircuitDag::build(&c), &placement, &t, &cfg.scheduler).unwrap();
        assert_eq!(run.rounds, single.n_rounds());
        assert_eq!(run.schedule.unwrap(), single);
        assert!((run.jobs[0].jet().unwrap() - 0.01 * single.n_rounds() as f64).abs() < 1e-9);
    }

    #[test]
    fn zero_gate_job_finishes_immediately() {
        let t = table_ii();
        let mut rng = stream(1, "x", 0);
        let reqs = requests(vec![(1.0, QuantumCircuit::new(30))]);
        let run = run_multijob(&reqs, &t, &MultiJobConfig::default(), fixed_round, &mut rng).unwrap();
        assert_eq!(run.jobs[0].jet(), Some(0.0));
        assert_eq!(run.jobs[0].finish, Some(1.0));
        assert_eq!(run.rounds, 0);
    }

    #[test]
    fn full_buffer_rejects() {
        let t = table_ii();
        let mut rng = stream(3, "circuit", 0);
        let reqs = requests((0..10).map(|_| (0.0, random_square_circuit(90, &mut rng))).collect());
        let cfg = MultiJobConfig {
            policy: PlacementPolicy::Spread,
            ..Default::default()
        };
        let run = run_multijob(&reqs, &t, &cfg, fixed_round, &mut rng).unwrap();
        let rejected = run.jobs.iter().filter(|j| j.status == JobStatus::Rejected).count();
        assert_eq!(rejected, 2);
        for j in run.jobs.iter().filter(|j| j.status == JobStatus::Done) {
            assert!((j.jct().unwrap() - j.jet().unwrap() - (j.start.unwrap() - j.arrival)).abs() < 1e-12);
            // One QPU in each of the nine racks.
            let racks: std::collections::BTreeSet<_> = j.qpus.iter().map(|&q| t.rack_of(q)).collect();
            assert_eq!(racks.len(), 9);
        }
        let queued = run.events.iter().filter(|e| e.event == EventKind::Queue).count();
        assert_eq!(queued, 4);
    }

    #[test]
    fn oversized_job_rejected_on_arrival() {
        let t = table_ii();
        let mut rng = stream(1, "x", 0);
        let reqs = requests(vec![(0.0, QuantumCircuit::new(361))]);
        let run = run_multijob(&reqs, &t, &MultiJobConfig::default(), fixed_round, &mut rng).unwrap();
        assert_eq!(run.jobs[0].status, JobStatus::Rejected);
        assert_eq!(run.events[1].event, EventKind::Reject);
    }

    #[test]
    fn fifo_with_fit_lets_small_job_pass() {
        let t = table_ii();
        let mut rng = stream(4, "circuit", 0);
        // Two 20-QPU jobs fill 40 > 36, so the second waits; a 1-QPU job
        // arriving behind it still starts.
        let reqs = requests(vec![
            (0.0, random_square_circuit(200, &mut rng)),
            (0.001, random_square_circuit(200, &mut rng)),
            (0.002, random_square_circuit(10, &mut rng)),
        ]);
        let run = run_multijob(&reqs, &t, &MultiJobConfig::default(), fixed_round, &mut rng).unwrap();
        assert!(run.jobs[2].start.unwrap() < run.jobs[1].start.unwrap());
        assert_eq!(run.jobs[1].start, run.jobs[0].finish);
    }

    #[test]
    fn pack_keeps_small_jobs_in_one_rack() {
        let t = table_ii();
        let mut rng = stream(5, "circuit", 0);
        let reqs = requests(
            (0..6)
                .map(|i| (i as f64 * 0.001, random_square_circuit(30, &mut rng)))
                .collect(),
        );
        let run = run_multijob(&reqs, &t, &MultiJobConfig::default(), fixed_round, &mut rng).unwrap();
        for j in &run.jobs {
            let racks: std::collections::BTreeSet<_> = j.qpus.iter().map(|&q| t.rack_of(q)).collect();
            assert_eq!(racks.len(), 1, "{:?}", j.qpus);
            assert_eq!(j.inter_tasks, 0);
        }
    }

    #[test]
    fn deterministic_and_writes_log() {
        let t = table_ii();
        let go = || {
            let mut rng = stream(6, "circuit", 0);
            let reqs = requests(
                (0..5)
                    .map(|i| (i as f64 * 0.05, random_square_circuit(40, &mut rng)))
                    .collect(),
            );
            let mut timing = stream(6, "timing", 0);
            let cfg = MultiJobConfig {
                mapping: QubitMapping::Compile,
                ..Default::default()
            };
            run_multijob(
                &reqs,
                &t,
                &cfg,
                |tasks| Ok(0.001 + tasks.len() as f64 * timing.random::<f64>() * 1e-3),
                &mut rng,
            )
            .unwrap()
        };
        let (a, b) = (go(), go());
        assert_eq!(a, b);
        let mut buf = Vec::new();
        a.write_events_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("time,event,job_id\n0,arrive,0\n"));
    }
}
