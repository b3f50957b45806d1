//! One function per subcommand. Each writes its files into the run
//! directory and returns nothing else.

use std::io::Write;
use std::path::{Path, PathBuf};

use qdc_core::circuit::QuantumCircuit;
use qdc_core::compiler::{classify, compile, fidelity_cost, qpu_capacity, random_placement, Placement};
use qdc_core::protocols::scatter::{run_batch, write_success_csv, ScattererParams, SsSummary};
use qdc_core::rng::{stream, stream_id};
use qdc_core::scheduler::{schedule_single, CircuitDag, Schedule};
use qdc_core::simulator::{experiment_sweep, total_time, TimingParams};
use qdc_core::topology::{NetworkTopology, NodeId};
use serde::Serialize;

use crate::config::{PlacementMode, RunConfig};
use crate::error::{CliError, CliResult};
use crate::output::RunDir;

/// Shared state of a subcommand.
pub struct Ctx<'a> {
    pub cfg: &'a RunConfig,
    pub seed: u64,
    pub out: &'a mut RunDir,
    pub quiet: bool,
}

impl Ctx<'_> {
    fn note(&self, msg: impl AsRef<str>) {
        if !self.quiet {
            eprintln!("{}", msg.as_ref());
        }
    }
}

fn csv_io(name: &str) -> impl Fn(csv::Error) -> CliError + '_ {
    move |e| CliError::io(name, std::io::Error::other(e.to_string()))
}

#[derive(Serialize)]
struct FitSummary {
    lambda_ss: Option<f64>,
    r2: Option<f64>,
    n_success: usize,
    n_exhausted: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    fit_error: Option<String>,
}

fn summarize(outcomes: &[qdc_core::protocols::scatter::SsOutcome]) -> FitSummary {
    match SsSummary::from_outcomes(outcomes) {
        Ok(s) => FitSummary {
            lambda_ss: Some(s.lambda_ss),
            r2: Some(s.r2),
            n_success: s.n_success,
            n_exhausted: s.n_exhausted,
            fit_error: None,
        },
        Err(e) => {
            let n_success = outcomes.iter().filter(|o| o.time().is_some()).count();
            FitSummary {
                lambda_ss: None,
                r2: None,
                n_success,
                n_exhausted: outcomes.len() - n_success,
                fit_error: Some(e.to_string()),
            }
        }
    }
}

pub fn protocol_mc(ctx: &mut Ctx<'_>, iterations: Option<usize>) -> CliResult<()> {
    let block = ctx
        .cfg
        .protocol_mc
        .as_ref()
        .ok_or_else(|| CliError::config("missing block `[protocol_mc]`"))?;
    let params = block.scatterer;
    params.validate()?;
    let n = iterations.unwrap_or(block.iterations);
    if n == 0 {
        return Err(CliError::config("`protocol_mc.iterations` must be positive"));
    }
    let seed = ctx.seed;
    ctx.note(format!("scatterer-scatterer: {n} iterations"));
    let outcomes = run_batch(&params, n, seed)?;
    let name = format!("ss_success_seed{seed}.csv");
    ctx.out.write(&name, |w| Ok(write_success_csv(&outcomes, w)?))?;
    ctx.out
        .write_json(&format!("ss_summary_seed{seed}.json"), &summarize(&outcomes))?;

    let mut grid: Vec<(&str, f64, ScattererParams)> = Vec::new();
    for &tau in &block.tau_reset_grid {
        grid.push((
            "tau_reset",
            tau,
            ScattererParams {
                tau_reset: tau,
                ..params
            },
        ));
    }
    for &dw in &block.delta_omega_grid {
        grid.push((
            "delta_omega",
            dw,
            ScattererParams {
                delta_omega: dw,
                ..params
            },
        ));
    }
    if grid.is_empty() {
        return Ok(());
    }
    let name = format!("ss_grid_seed{seed}.csv");
    let mut rows = Vec::with_capacity(grid.len());
    for (k, (param, value, p)) in grid.iter().enumerate() {
        ctx.note(format!("grid {param} = {value:e}"));
        let point_seed = seed ^ stream_id("ss-grid", k as u64);
        let s = summarize(&run_batch(p, block.grid_iterations, point_seed)?);
        rows.push((param.to_string(), *value, s));
    }
    ctx.out.write(&name, |w| {
        let mut c = csv::Writer::from_writer(w);
        c.write_record(["parameter", "value", "lambda_ss", "r2", "n_success", "n_exhausted"])
            .map_err(csv_io(&name))?;
        for (param, value, s) in &rows {
            c.write_record([
                param.clone(),
                value.to_string(),
                s.lambda_ss.map(|v| v.to_string()).unwrap_or_default(),
                s.r2.map(|v| v.to_string()).unwrap_or_default(),
                s.n_success.to_string(),
                s.n_exhausted.to_string(),
            ])
            .map_err(csv_io(&name))?;
        }
        c.flush().map_err(|e| CliError::io(&name, e))
    })
}

pub fn read_circuit(path: &Path) -> CliResult<QuantumCircuit> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let parsed = if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("qasm")) {
        QuantumCircuit::parse_qasm2(&text)
    } else {
        QuantumCircuit::parse(&text)
    };
    parsed.map_err(|e| CliError::config(format!("{}: {e}", path.display())))
}

/// Qubit `q` on the `q / data_qubits`-th QPU in id order.
pub fn identity_placement(circuit: &QuantumCircuit, topo: &NetworkTopology, cfg: &RunConfig) -> CliResult<Placement> {
    let cap = qpu_capacity(topo);
    let qpus: Vec<NodeId> = topo.qpus().collect();
    let needed = circuit.n_qubits().div_ceil(cap.max(1));
    if cap == 0 || needed > qpus.len() {
        return Err(qdc_core::Error::Capacity {
            needed: circuit.n_qubits(),
            available: cap * qpus.len(),
        }
        .into());
    }
    let qubit_to_qpu: Vec<NodeId> = (0..circuit.n_qubits()).map(|q| qpus[q / cap]).collect();
    let counts = classify(circuit, &qubit_to_qpu, topo);
    let qpu_to_rack = qubit_to_qpu
        .iter()
        .map(|&q| (q, topo.rack_of(q).unwrap_or(u32::MAX)))
        .collect();
    Ok(Placement {
        qpu_to_rack,
        counts,
        c_fid: fidelity_cost(&counts, &cfg.fidelity())?,
        qubit_to_qpu,
        rack_objective: None,
    })
}

fn sample_times(schedule: &Schedule, timing: &TimingParams, reps: usize, seed: u64, index: u64) -> CliResult<Vec<f64>> {
    let mut rng = stream(seed, "timing", index);
    (0..reps).map(|_| Ok(total_time(schedule, timing, &mut rng)?)).collect()
}

fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        0.0
    } else {
        xs.iter().sum::<f64>() / xs.len() as f64
    }
}

#[derive(Serialize)]
struct SingleJobSummary {
    n_qubits: usize,
    n_rounds: usize,
    reps: usize,
    mean_t_tot_s: f64,
    std_t_tot_s: f64,
    c_fid: f64,
}

pub fn single_job(ctx: &mut Ctx<'_>, circuit: Option<PathBuf>, iterations: Option<usize>) -> CliResult<()> {
    let block = ctx.cfg.single_job.clone().unwrap_or(crate::config::SingleJobBlock {
        circuit: None,
        placement: PlacementMode::default(),
        reps: 1000,
    });
    let path = circuit
        .or(block.circuit)
        .ok_or_else(|| CliError::config("no circuit: set `single_job.circuit` or pass --circuit"))?;
    let circuit = read_circuit(&path)?;
    let topo = ctx.cfg.topology()?.build()?;
    let seed = ctx.seed;
    let placement = match block.placement {
        PlacementMode::Compile => compile(&circuit, &topo, &ctx.cfg.fidelity(), &mut stream(seed, "compile", 0))?,
        PlacementMode::Identity => identity_placement(&circuit, &topo, ctx.cfg)?,
    };
    let dag = CircuitDag::build(&circuit);
    let schedule = schedule_single(&dag, &placement.qubit_to_qpu, &topo, &ctx.cfg.scheduler())?;
    ctx.note(format!("{} switching rounds", schedule.n_rounds()));
    let reps = iterations.unwrap_or(block.reps);
    let times = sample_times(&schedule, &ctx.cfg.timing(), reps, seed, 0)?;

    ctx.out
        .write(&format!("placement_seed{seed}.json"), |w| Ok(placement.write_json(w)?))?;
    ctx.out
        .write(&format!("schedule_seed{seed}.json"), |w| Ok(schedule.write_json(w)?))?;
    let name = format!("timing_seed{seed}.csv");
    ctx.out.write(&name, |w| {
        writeln!(w, "rep,t_tot_s").map_err(|e| CliError::io(&name, e))?;
        for (i, t) in times.iter().enumerate() {
            writeln!(w, "{i},{t}").map_err(|e| CliError::io(&name, e))?;
        }
        Ok(())
    })?;
    let m = mean(&times);
    let sd = if times.len() > 1 {
        (times.iter().map(|t| (t - m).powi(2)).sum::<f64>() / (times.len() - 1) as f64).sqrt()
    } else {
        0.0
    };
    ctx.out.write_json(
        &format!("single_job_summary_seed{seed}.json"),
        &SingleJobSummary {
            n_qubits: circuit.n_qubits(),
            n_rounds: schedule.n_rounds(),
            reps,
            mean_t_tot_s: m,
            std_t_tot_s: sd,
            c_fid: placement.c_fid,
        },
    )
}

pub fn sweep(ctx: &mut Ctx<'_>, iterations: Option<usize>) -> CliResult<()> {
    let mut cfg = ctx.cfg.sweep_config()?;
    if let Some(n) = iterations {
        cfg.iterations = n;
    }
    cfg.validate()?;
    let topo = ctx.cfg.topology()?.build()?;
    let seed = ctx.seed;
    ctx.note(format!(
        "{} request frequencies x {} iterations x {} requests",
        cfg.gammas.len(),
        cfg.iterations,
        cfg.requests
    ));
    let result = experiment_sweep(&cfg, &topo, seed)?;
    for (i, p) in result.points.iter().enumerate() {
        ctx.note(format!(
            "gamma {}: JET {:.4} s, JCT {:.4} s, rejection {:.3}",
            p.gamma, p.mean_jet, p.mean_jct, p.rejection_rate
        ));
        ctx.out.write(&format!("sweep_point{i}_seed{seed}.json"), |w| {
            p.write_json(&mut *w)?;
            w.write_all(b"\n").map_err(|e| CliError::io("sweep point", e))
        })?;
        ctx.out
            .write(&format!("jobs_point{i}_seed{seed}.csv"), |w| Ok(p.write_jobs_csv(w)?))?;
    }
    ctx.out
        .write(&format!("sweep_seed{seed}.csv"), |w| Ok(result.write_sweep_csv(w)?))?;
    ctx.out.write(&format!("rack_histogram_seed{seed}.csv"), |w| {
        Ok(result.write_rack_histogram_csv(w)?)
    })
}

#[derive(Serialize)]
struct BenchSummary {
    circuits: usize,
    skipped: usize,
    skipped_files: Vec<String>,
    compiled_better_or_equal: usize,
}

pub fn compile_bench(ctx: &mut Ctx<'_>, dir: Option<PathBuf>, iterations: Option<usize>) -> CliResult<()> {
    let block = ctx
        .cfg
        .compile_bench
        .clone()
        .ok_or_else(|| CliError::config("missing block `[compile_bench]`"))?;
    let dir = dir
        .or(block.circuit_dir)
        .ok_or_else(|| CliError::config("no circuit directory: set `compile_bench.circuit_dir` or pass --circuits"))?;
    let runs = iterations.unwrap_or(block.baseline_runs);
    if runs == 0 {
        return Err(CliError::config("`compile_bench.baseline_runs` must be positive"));
    }
    let topo = ctx.cfg.topology()?.build()?;
    let table = ctx.cfg.fidelity();
    let timing = ctx.cfg.timing();
    let sched = ctx.cfg.scheduler();
    let seed = ctx.seed;
    let mut entries: Vec<PathBuf> = std::fs::read_dir(&dir)
        .map_err(|e| CliError::io(&dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file())
        .collect();
    entries.sort();

    let name = format!("compile_bench_seed{seed}.csv");
    let mut rows: Vec<[String; 12]> = Vec::new();
    let mut skipped_files = Vec::new();
    let mut better = 0;
    for (ci, path) in entries.iter().enumerate() {
        let file = path
            .file_name()
            .map(|f| f.to_string_lossy().into_owned())
            .unwrap_or_default();
        let circuit = match read_circuit(path) {
            Ok(c) => c,
            Err(e) => {
                eprintln!("warning: skipping {file}: {e}");
                skipped_files.push(file);
                continue;
            }
        };
        let ci = ci as u64;
        let time_of = |p: &Placement, index: u64| -> CliResult<f64> {
            let s = schedule_single(&CircuitDag::build(&circuit), &p.qubit_to_qpu, &topo, &sched)?;
            Ok(mean(&sample_times(&s, &timing, block.timing_reps, seed, index)?))
        };
        let compiled = compile(&circuit, &topo, &table, &mut stream(seed, "compile", ci))?;
        let compiled_time = time_of(&compiled, ci << 32)?;
        let mut base_fid = Vec::with_capacity(runs);
        let mut base_time = Vec::with_capacity(runs);
        let mut rng = stream(seed, "baseline", ci);
        for r in 0..runs {
            let p = random_placement(&circuit, &topo, &table, &mut rng)?;
            base_fid.push(p.c_fid);
            base_time.push(time_of(&p, (ci << 32) | (r as u64 + 1))?);
        }
        let (bf, bt) = (mean(&base_fid), mean(&base_time));
        if compiled.c_fid <= bf + 1e-9 {
            better += 1;
        }
        ctx.note(format!(
            "{file}: compiled C_Fid {:.3}, baseline {:.3}",
            compiled.c_fid, bf
        ));
        rows.push([
            file,
            circuit.n_qubits().to_string(),
            circuit.two_qubit_count().to_string(),
            compiled.c_fid.to_string(),
            compiled_time.to_string(),
            bf.to_string(),
            bt.to_string(),
            compiled.counts.n_loc.to_string(),
            compiled.counts.n_intra.to_string(),
            compiled.counts.n_inter.to_string(),
            compiled.qpus().len().to_string(),
            runs.to_string(),
        ]);
    }
    ctx.out.write(&name, |w| {
        let mut c = csv::Writer::from_writer(w);
        c.write_record([
            "circuit",
            "n_qubits",
            "cnot_count",
            "compiled_c_fid",
            "compiled_time_s",
            "baseline_c_fid_mean",
            "baseline_time_s_mean",
            "n_loc",
            "n_intra",
            "n_inter",
            "n_qpus",
            "baseline_runs",
        ])
        .map_err(csv_io(&name))?;
        for row in &rows {
            c.write_record(row).map_err(csv_io(&name))?;
        }
        c.flush().map_err(|e| CliError::io(&name, e))
    })?;
    ctx.out.write_json(
        &format!("compile_bench_summary_seed{seed}.json"),
        &BenchSummary {
            circuits: rows.len(),
            skipped: skipped_files.len(),
            skipped_files,
            compiled_better_or_equal: better,
        },
    )
}
