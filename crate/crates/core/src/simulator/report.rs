//! Aggregation of sweep iterations and the CSV/JSON files they produce.

use std::io::Write;

use serde::{Deserialize, Serialize};

use super::{IterationOutcome, TrafficModel};
use crate::error::{Error, Result};
use crate::scheduler::{JobState, JobStatus};

/// Mean and standard error over iterations.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub se: f64,
    /// Number of iterations that contributed.
    pub n: usize,
}

impl Estimate {
    pub fn from_samples(xs: &[f64]) -> Self {
        let n = xs.len();
        if n == 0 {
            return Self::default();
        }
        let mean = xs.iter().sum::<f64>() / n as f64;
        let se = if n > 1 {
            let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            (var / n as f64).sqrt()
        } else {
            0.0
        };
        Self { mean, se, n }
    }

    /// Half-width of the normal 95% interval.
    pub fn ci95(&self) -> f64 {
        1.96 * self.se
    }
}

/// Statistics of one job class at one request frequency.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassSummary {
    pub class: usize,
    pub n_qpus: usize,
    pub jct: Estimate,
    pub jet: Estimate,
    pub rejection: Estimate,
    pub accepted: usize,
    pub rejected: usize,
}

/// Aggregated result of every iteration at one request frequency.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub gamma: f64,
    pub mean_jct: f64,
    pub mean_jet: f64,
    pub rejection_rate: f64,
    pub qpu_usage: f64,
    pub rack_histogram: Vec<f64>,
    pub jct: Estimate,
    pub jet: Estimate,
    pub rejection: Estimate,
    pub usage: Estimate,
    pub classes: Vec<ClassSummary>,
    /// Jobs of every iteration.
    #[serde(skip)]
    pub runs: Vec<Vec<JobState>>,
}

fn mean_of<'a>(jobs: impl Iterator<Item = &'a JobState>, f: impl Fn(&JobState) -> Option<f64>) -> Option<f64> {
    let (mut s, mut n) = (0.0, 0usize);
    for j in jobs {
        if let Some(x) = f(j) {
            s += x;
            n += 1;
        }
    }
    (n > 0).then(|| s / n as f64)
}

fn summarize(
    runs: &[Vec<JobState>],
    keep: impl Fn(&JobState) -> bool + Copy,
) -> (Estimate, Estimate, Estimate, usize, usize) {
    let (mut jct, mut jet, mut rej) = (Vec::new(), Vec::new(), Vec::new());
    let (mut acc, mut rejected) = (0, 0);
    for run in runs {
        let done = || run.iter().filter(move |j| keep(j) && j.status == JobStatus::Done);
        if let Some(m) = mean_of(done(), JobState::jct) {
            jct.push(m);
        }
        if let Some(m) = mean_of(done(), JobState::jet) {
            jet.push(m);
        }
        let total = run.iter().filter(|j| keep(j)).count();
        let r = run
            .iter()
            .filter(|j| keep(j) && j.status == JobStatus::Rejected)
            .count();
        if total > 0 {
            rej.push(r as f64 / total as f64);
        }
        acc += done().count();
        rejected += r;
    }
    (
        Estimate::from_samples(&jct),
        Estimate::from_samples(&jet),
        Estimate::from_samples(&rej),
        acc,
        rejected,
    )
}

impl SweepPoint {
    /// Means of per-iteration means; iterations without an accepted job
    /// are left out of the time statistics.
    pub fn aggregate(gamma: f64, traffic: &TrafficModel, its: &[IterationOutcome]) -> Self {
        let runs: Vec<Vec<JobState>> = its.iter().map(|o| o.jobs.clone()).collect();
        let (jct, jet, rejection, _, _) = summarize(&runs, |_| true);
        let classes = traffic
            .classes
            .iter()
            .enumerate()
            .map(|(k, c)| {
                let (jct, jet, rejection, accepted, rejected) = summarize(&runs, |j| j.class == k);
                ClassSummary {
                    class: k,
                    n_qpus: c.qpus,
                    jct,
                    jet,
                    rejection,
                    accepted,
                    rejected,
                }
            })
            .collect();
        let usage = Estimate::from_samples(&its.iter().map(|o| o.usage.fraction).collect::<Vec<_>>());
        let bins = its.iter().map(|o| o.usage.rack_histogram.len()).max().unwrap_or(0);
        let busy: Vec<&IterationOutcome> = its.iter().filter(|o| o.usage.busy_time > 0.0).collect();
        let mut rack_histogram = vec![0.0; bins];
        for o in &busy {
            for (h, x) in rack_histogram.iter_mut().zip(&o.usage.rack_histogram) {
                *h += x / busy.len() as f64;
            }
        }
        Self {
            gamma,
            mean_jct: jct.mean,
            mean_jet: jet.mean,
            rejection_rate: rejection.mean,
            qpu_usage: usage.mean,
            rack_histogram,
            jct,
            jet,
            rejection,
            usage,
            classes,
            runs,
        }
    }

    pub fn write_json<W: Write>(&self, out: W) -> Result<()> {
        serde_json::to_writer_pretty(out, self).map_err(|e| Error::Io(e.to_string()))
    }

    /// One row per job of every iteration, prefixed with the iteration index.
    pub fn write_jobs_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(JOB_COLUMNS).map_err(csv_err)?;
        for (it, run) in self.runs.iter().enumerate() {
            for j in run {
                w.write_record(job_row(it, j)).map_err(csv_err)?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

pub const JOB_COLUMNS: [&str; 15] = [
    "iteration",
    "job_id",
    "class",
    "n_qubits",
    "n_qpus",
    "arrival_s",
    "start_s",
    "finish_s",
    "status",
    "jet_s",
    "jct_s",
    "n_loc",
    "n_intra",
    "n_inter",
    "c_fid",
];

fn opt(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

fn job_row(iteration: usize, j: &JobState) -> [String; 15] {
    [
        iteration.to_string(),
        j.id.to_string(),
        j.class.to_string(),
        j.n_qubits.to_string(),
        j.n_qpus.to_string(),
        j.arrival.to_string(),
        opt(j.start),
        opt(j.finish),
        j.status.as_str().to_string(),
        opt(j.jet()),
        opt(j.jct()),
        j.counts.n_loc.to_string(),
        j.counts.n_intra.to_string(),
        j.counts.n_inter.to_string(),
        opt(j.c_fid),
    ]
}

pub(crate) fn csv_err(e: csv::Error) -> Error {
    Error::Io(e.to_string())
}

/// Every sweep point of one experiment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub seed: u64,
    pub points: Vec<SweepPoint>,
}

pub const SWEEP_COLUMNS: [&str; 11] = [
    "gamma",
    "class",
    "n_qpus",
    "mean_jct",
    "mean_jet",
    "jct_se",
    "jet_se",
    "rejection_rate",
    "rejection_se",
    "qpu_usage",
    "iterations",
];

impl SweepResult {
    /// One `all` row per point, then one row per job class.
    pub fn write_sweep_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(SWEEP_COLUMNS).map_err(csv_err)?;
        for p in &self.points {
            let n_qpus = if p.classes.len() == 1 {
                p.classes[0].n_qpus.to_string()
            } else {
                String::new()
            };
            w.write_record([
                p.gamma.to_string(),
                "all".into(),
                n_qpus,
                p.mean_jct.to_string(),
                p.mean_jet.to_string(),
                p.jct.se.to_string(),
                p.jet.se.to_string(),
                p.rejection_rate.to_string(),
                p.rejection.se.to_string(),
                p.qpu_usage.to_string(),
                p.runs.len().to_string(),
            ])
            .map_err(csv_err)?;
            for c in &p.classes {
                w.write_record([
                    p.gamma.to_string(),
                    c.class.to_string(),
                    c.n_qpus.to_string(),
                    c.jct.mean.to_string(),
                    c.jet.mean.to_string(),
                    c.jct.se.to_string(),
                    c.jet.se.to_string(),
                    c.rejection.mean.to_string(),
                    c.rejection.se.to_string(),
                    p.qpu_usage.to_string(),
                    p.runs.len().to_string(),
                ])
                .map_err(csv_err)?;
            }
        }
        w.flush()?;
        Ok(())
    }

    /// Long format: gamma, qpus_in_use, fraction.
    pub fn write_rack_histogram_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["gamma", "qpus_in_use", "fraction"]).map_err(csv_err)?;
        for p in &self.points {
            for (n, f) in p.rack_histogram.iter().enumerate() {
                w.write_record([p.gamma.to_string(), n.to_string(), f.to_string()])
                    .map_err(csv_err)?;
            }
        }
        w.flush()?;
        Ok(())
    }
}
