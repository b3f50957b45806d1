//! Monte-Carlo timing of schedules, Poisson job traffic and the multi-job
//! experiment sweep.

pub mod report;

use std::sync::Arc;

use rand::Rng;
use rand_distr::{Distribution, Exp};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::circuit::random_square_circuit;
use crate::compiler::qpu_capacity;
use crate::error::{Error, Result};
use crate::protocols::ProtocolModel;
use crate::rng::stream;
use crate::scheduler::{run_multijob_observed, EbitTask, JobRequest, JobState, JobStatus, MultiJobConfig, Schedule};
use crate::topology::{NetworkTopology, PathKind};

pub use report::{SweepPoint, SweepResult};

/// Switch reconfiguration time and ebit protocols per path kind.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TimingParams {
    /// Seconds.
    pub tau_sw: f64,
    pub intra: ProtocolModel,
    pub inter: ProtocolModel,
}

impl Default for TimingParams {
    fn default() -> Self {
        Self {
            tau_sw: 1e-3,
            intra: ProtocolModel::default_intra(),
            inter: ProtocolModel::default_inter(),
        }
    }
}

impl TimingParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau_sw >= 0.0 && self.tau_sw.is_finite()) {
            return Err(Error::param("tau_sw", "must be finite and non-negative"));
        }
        self.intra.validate()?;
        self.inter.validate()
    }

    pub fn model(&self, kind: PathKind) -> Result<&ProtocolModel> {
        match kind {
            PathKind::Intra => Ok(&self.intra),
            PathKind::Inter => Ok(&self.inter),
            PathKind::Repeater => Err(Error::param("protocol", "no protocol is mapped to repeater paths")),
        }
    }
}

/// Time of one task: the sum of its ebit generation times.
pub fn task_duration<R: Rng + ?Sized>(task: &EbitTask, timing: &TimingParams, rng: &mut R) -> Result<f64> {
    let model = timing.model(task.kind())?;
    (0..task.ebits_required).map(|_| model.sample(rng)).sum()
}

/// `T_r`: the slowest task of a round. Zero for an empty round.
pub fn round_duration<R: Rng + ?Sized>(tasks: &[EbitTask], timing: &TimingParams, rng: &mut R) -> Result<f64> {
    let mut t: f64 = 0.0;
    for task in tasks {
        t = t.max(task_duration(task, timing, rng)?);
    }
    Ok(t)
}

/// `T_tot = Σ (τ_sw + T_r)` over the rounds of a schedule.
pub fn total_time<R: Rng + ?Sized>(schedule: &Schedule, timing: &TimingParams, rng: &mut R) -> Result<f64> {
    let mut t = 0.0;
    for r in &schedule.rounds {
        t += timing.tau_sw + round_duration(&r.tasks, timing, rng)?;
    }
    Ok(t)
}

/// Time-weighted QPU occupancy of the accepted jobs of one run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Usage {
    /// Occupied QPU-time over `total QPUs × busy window`.
    pub fraction: f64,
    /// Seconds with at least one job running.
    pub busy_time: f64,
    /// Entry `n`: share of busy time a rack spends with `n` occupied QPUs,
    /// averaged over racks.
    pub rack_histogram: Vec<f64>,
}

pub fn qpu_usage(jobs: &[JobState], topo: &NetworkTopology) -> Usage {
    qpu_usage_until(jobs, topo, f64::INFINITY)
}

/// Usage up to `end`; jobs still running count as busy until `end`.
pub fn qpu_usage_until(jobs: &[JobState], topo: &NetworkTopology, end: f64) -> Usage {
    let racks = topo.racks();
    let max_rack = racks.iter().map(|r| r.qpus.len()).max().unwrap_or(0);
    let mut hist = vec![0.0; max_rack + 1];
    // (time, +1 start / -1 finish, job)
    let mut marks: Vec<(f64, i32, usize)> = Vec::new();
    for (i, j) in jobs.iter().enumerate() {
        let Some(s) = j.start else { continue };
        let f = j.finish.unwrap_or(end).min(end);
        if f.is_finite() && f > s {
            marks.push((s, 1, i));
            marks.push((f, -1, i));
        }
    }
    marks.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let mut occupied = vec![0usize; racks.len()];
    let mut running = 0usize;
    let mut busy_qpus = 0usize;
    let (mut busy, mut qpu_time) = (0.0, 0.0);
    let mut last = 0.0;
    for &(t, d, i) in &marks {
        let dt = t - last;
        if running > 0 && dt > 0.0 {
            busy += dt;
            qpu_time += dt * busy_qpus as f64;
            for &n in &occupied {
                hist[n] += dt;
            }
        }
        last = t;
        running = (running as i64 + i64::from(d)) as usize;
        for q in &jobs[i].qpus {
            if let Some(r) = topo.rack_of(*q) {
                let o = &mut occupied[r as usize];
                *o = (*o as i64 + i64::from(d)) as usize;
            }
        }
        busy_qpus = (busy_qpus as i64 + i64::from(d) * jobs[i].qpus.len() as i64) as usize;
    }
    if busy > 0.0 && !racks.is_empty() {
        let norm = busy * racks.len() as f64;
        for h in &mut hist {
            *h /= norm;
        }
    }
    Usage {
        fraction: if busy > 0.0 {
            qpu_time / (busy * topo.qpu_count() as f64)
        } else {
            0.0
        },
        busy_time: busy,
        rack_histogram: hist,
    }
}

/// One job size with its share of the request rate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JobClass {
    pub qpus: usize,
    /// Arrival rate of this class is `rate_weight × γ`.
    #[serde(default = "one")]
    pub rate_weight: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrafficModel {
    pub classes: Vec<JobClass>,
}

impl TrafficModel {
    pub fn single(qpus: usize) -> Self {
        Self {
            classes: vec![JobClass { qpus, rate_weight: 1.0 }],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.classes.is_empty() {
            return Err(Error::param("classes", "at least one job class is required"));
        }
        for c in &self.classes {
            if !(c.rate_weight > 0.0 && c.rate_weight.is_finite()) {
                return Err(Error::param("rate_weight", "must be positive"));
            }
        }
        Ok(())
    }

    pub fn total_weight(&self) -> f64 {
        self.classes.iter().map(|c| c.rate_weight).sum()
    }
}

/// Poisson arrivals on `[0, duration)` for every class at rate
/// `weight × gamma`. Each job is a square random circuit as wide as its
/// QPUs hold. Ids follow arrival order.
pub fn generate_traffic<R: Rng + ?Sized>(
    model: &TrafficModel,
    gamma: f64,
    duration: f64,
    data_qubits: usize,
    rng: &mut R,
) -> Result<Vec<JobRequest>> {
    model.validate()?;
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(Error::param("gamma", "must be positive"));
    }
    if duration.is_nan() || duration <= 0.0 {
        return Err(Error::param("duration", "must be positive"));
    }
    let mut arrivals: Vec<(f64, usize)> = Vec::new();
    for (k, c) in model.classes.iter().enumerate() {
        let exp = Exp::new(gamma * c.rate_weight).map_err(|e| Error::param("gamma", e.to_string()))?;
        let mut t = exp.sample(rng);
        while t < duration {
            arrivals.push((t, k));
            t += exp.sample(rng);
        }
    }
    arrivals.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    Ok(arrivals
        .into_iter()
        .enumerate()
        .map(|(id, (arrival, class))| JobRequest {
            id,
            class,
            arrival,
            circuit: Arc::new(random_square_circuit(model.classes[class].qpus * data_qubits, rng)),
        })
        .collect())
}

/// Multi-job experiment over a list of request frequencies.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub gammas: Vec<f64>,
    #[serde(default = "default_iterations")]
    pub iterations: usize,
    /// Mean number of requests per iteration; sets the arrival window.
    #[serde(default = "default_requests")]
    pub requests: usize,
    pub traffic: TrafficModel,
    #[serde(default)]
    pub multijob: MultiJobConfig,
    #[serde(default)]
    pub timing: TimingParams,
}

fn default_iterations() -> usize {
    50
}

fn default_requests() -> usize {
    200
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        if self.gammas.is_empty() {
            return Err(Error::param("gammas", "at least one request frequency is required"));
        }
        if self.gammas.iter().any(|g| !(*g > 0.0 && g.is_finite())) {
            return Err(Error::param("gammas", "request frequencies must be positive"));
        }
        if self.iterations == 0 || self.requests == 0 {
            return Err(Error::param("iterations", "iterations and requests must be positive"));
        }
        self.traffic.validate()?;
        self.timing.validate()?;
        self.multijob.scheduler.validate()
    }
}

/// Result of one iteration at one request frequency.
#[derive(Clone, Debug, PartialEq)]
pub struct IterationOutcome {
    pub jobs: Vec<JobState>,
    pub usage: Usage,
}

/// Runs one traffic realization through the multi-job scheduler.
///
/// Statistics cover the requests arriving in `[0, requests / rate)`.
/// Arrivals continue past that window until every observed job is
/// resolved, so the last observed jobs see the same load as the rest.
pub fn run_iteration(
    cfg: &SweepConfig,
    topo: &NetworkTopology,
    gamma: f64,
    seed: u64,
    index: u64,
) -> Result<IterationOutcome> {
    let cap = qpu_capacity(topo);
    let duration = cfg.requests as f64 / (gamma * cfg.traffic.total_weight());
    let mut traffic_rng = stream(seed, "traffic", index);
    let observed = generate_traffic(&cfg.traffic, gamma, duration, cap, &mut traffic_rng)?;
    let n = observed.len();
    let mut tail_len = duration;
    for attempt in 0u64.. {
        let mut tail_rng = stream(seed, "traffic-tail", index.wrapping_mul(64).wrapping_add(attempt));
        let mut requests = observed.clone();
        for r in generate_traffic(&cfg.traffic, gamma, tail_len, cap, &mut tail_rng)? {
            requests.push(JobRequest {
                id: n + r.id,
                arrival: duration + r.arrival,
                ..r
            });
        }
        let mut timing_rng = stream(seed, "timing", index);
        let mut compile_rng = stream(seed, "compile", index);
        let timing = cfg.timing;
        let run = run_multijob_observed(
            &requests,
            n,
            topo,
            &cfg.multijob,
            |tasks| Ok(timing.tau_sw + round_duration(tasks, &timing, &mut timing_rng)?),
            &mut compile_rng,
        )?;
        let mut jobs = run.jobs;
        let last = jobs[..n].iter().filter_map(|j| j.finish).fold(0.0, f64::max);
        if last <= duration + tail_len || attempt >= MAX_TAIL_DOUBLINGS {
            let usage = qpu_usage_until(&jobs, topo, last);
            jobs.truncate(n);
            return Ok(IterationOutcome { jobs, usage });
        }
        tail_len *= 2.0;
    }
    unreachable!()
}

const MAX_TAIL_DOUBLINGS: u64 = 8;

/// Every iteration of every sweep point, in parallel. Iteration `i` of
/// point `p` uses stream index `p × iterations + i`.
pub fn experiment_sweep(cfg: &SweepConfig, topo: &NetworkTopology, seed: u64) -> Result<SweepResult> {
    cfg.validate()?;
    let tasks: Vec<(usize, usize)> = (0..cfg.gammas.len())
        .flat_map(|p| (0..cfg.iterations).map(move |i| (p, i)))
        .collect();
    let outcomes: Vec<Result<IterationOutcome>> = tasks
        .par_iter()
        .map(|&(p, i)| run_iteration(cfg, topo, cfg.gammas[p], seed, (p * cfg.iterations + i) as u64))
        .collect();
    let mut points = Vec::with_capacity(cfg.gammas.len());
    let mut iter = outcomes.into_iter();
    for &gamma in &cfg.gammas {
        let its: Vec<IterationOutcome> = iter.by_ref().take(cfg.iterations).collect::<Result<_>>()?;
        points.push(SweepPoint::aggregate(gamma, &cfg.traffic, &its));
    }
    Ok(SweepResult { seed, points })
}

/// Whether a job counts toward time statistics.
pub fn accepted(job: &JobState) -> bool {
    job.status == JobStatus::Done
}
