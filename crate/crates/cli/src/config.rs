//! Run configuration, read from TOML.

use std::f64::consts::TAU;
use std::path::{Path, PathBuf};

use qdc_core::compiler::FidelityTable;
use qdc_core::protocols::scatter::ScattererParams;
use qdc_core::scheduler::{MultiJobConfig, PlacementPolicy, QubitMapping, SchedulerOptions};
use qdc_core::simulator::{JobClass, SweepConfig, TimingParams, TrafficModel};
use qdc_core::topology::TopologyConfig;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    ProtocolMc,
    SingleJob,
    #[serde(alias = "sweep")]
    MultiJobSweep,
    CompileBench,
}

impl Experiment {
    pub fn as_str(self) -> &'static str {
        match self {
            Experiment::ProtocolMc => "protocol-mc",
            Experiment::SingleJob => "single-job",
            Experiment::MultiJobSweep => "sweep",
            Experiment::CompileBench => "compile-bench",
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seed: Option<u64>,
    /// Parent of the run directory.
    pub out: Option<PathBuf>,
    pub experiment: Option<Experiment>,
    pub topology: Option<TopologyConfig>,
    pub timing: Option<TimingParams>,
    pub scheduler: Option<SchedulerOptions>,
    pub fidelity: Option<FidelityTable>,
    pub protocol_mc: Option<ProtocolMcBlock>,
    pub single_job: Option<SingleJobBlock>,
    pub sweep: Option<SweepBlock>,
    pub compile_bench: Option<CompileBenchBlock>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProtocolMcBlock {
    #[serde(default = "default_ss_iterations")]
    pub iterations: usize,
    /// Iterations per grid point.
    #[serde(default = "default_grid_iterations")]
    pub grid_iterations: usize,
    /// Reset times in seconds.
    #[serde(default = "default_tau_grid")]
    pub tau_reset_grid: Vec<f64>,
    /// Linewidths in rad/s.
    #[serde(default = "default_dw_grid")]
    pub delta_omega_grid: Vec<f64>,
    pub scatterer: ScattererParams,
}

fn default_ss_iterations() -> usize {
    100_000
}

fn default_grid_iterations() -> usize {
    20_000
}

fn default_tau_grid() -> Vec<f64> {
    vec![0.5e-6, 1e-6, 2e-6, 5e-6]
}

fn default_dw_grid() -> Vec<f64> {
    [0.5e9, 1e9, 2e9, 4e9].iter().map(|f| TAU * f).collect()
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlacementMode {
    /// Partition and rack assignment.
    #[default]
    Compile,
    /// Qubit `q` on the `q / data_qubits`-th QPU.
    Identity,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SingleJobBlock {
    /// Line format, or OpenQASM 2 when the extension is `.qasm`. Relative
    /// to the config file.
    pub circuit: Option<PathBuf>,
    #[serde(default)]
    pub placement: PlacementMode,
    /// Monte-Carlo samples of the total time.
    #[serde(default = "default_reps")]
    pub reps: usize,
}

fn default_reps() -> usize {
    1000
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepBlock {
    pub gammas: Vec<f64>,
    #[serde(default = "default_sweep_iterations")]
    pub iterations: usize,
    #[serde(default = "default_requests")]
    pub requests: usize,
    #[serde(default = "default_buffer")]
    pub buffer_capacity: usize,
    #[serde(default)]
    pub policy: PlacementPolicy,
    #[serde(default)]
    pub mapping: QubitMapping,
    pub classes: Vec<JobClass>,
}

fn default_sweep_iterations() -> usize {
    50
}

fn default_requests() -> usize {
    200
}

fn default_buffer() -> usize {
    4
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompileBenchBlock {
    /// Relative to the config file.
    pub circuit_dir: Option<PathBuf>,
    #[serde(default = "default_baseline_runs")]
    pub baseline_runs: usize,
    /// Timing samples per placement.
    #[serde(default = "default_timing_reps")]
    pub timing_reps: usize,
}

fn default_baseline_runs() -> usize {
    100
}

fn default_timing_reps() -> usize {
    20
}

impl RunConfig {
    pub fn parse(text: &str) -> CliResult<Self> {
        toml::from_str(text).map_err(|e| CliError::config(e.to_string()))
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let mut cfg = Self::parse(&text).map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
        cfg.resolve_paths(path.parent().unwrap_or(Path::new(".")));
        Ok(cfg)
    }

    fn resolve_paths(&mut self, base: &Path) {
        let join = |p: &mut Option<PathBuf>| {
            if let Some(path) = p {
                if path.is_relative() {
                    *path = base.join(&*path);
                }
            }
        };
        if let Some(b) = &mut self.single_job {
            join(&mut b.circuit);
        }
        if let Some(b) = &mut self.compile_bench {
            join(&mut b.circuit_dir);
        }
    }

    pub fn to_toml(&self) -> CliResult<String> {
        toml::to_string(self).map_err(|e| CliError::config(e.to_string()))
    }

    /// SHA-256 of the serialized config, hex encoded.
    pub fn hash(&self) -> CliResult<String> {
        let digest = Sha256::digest(self.to_toml()?.as_bytes());
        Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
    }

    pub fn seed(&self) -> CliResult<u64> {
        self.seed
            .ok_or_else(|| CliError::config("missing field `seed` (set it in the config or pass --seed)"))
    }

    pub fn check_experiment(&self, wanted: Experiment) -> CliResult<()> {
        match self.experiment {
            Some(e) if e != wanted => Err(CliError::config(format!(
                "config is for `{}` but `{}` was requested",
                e.as_str(),
                wanted.as_str()
            ))),
            _ => Ok(()),
        }
    }

    pub fn topology(&self) -> CliResult<&TopologyConfig> {
        self.topology
            .as_ref()
            .ok_or_else(|| CliError::config("missing block `[topology]`"))
    }

    pub fn timing(&self) -> TimingParams {
        self.timing.unwrap_or_default()
    }

    pub fn scheduler(&self) -> SchedulerOptions {
        self.scheduler.unwrap_or_default()
    }

    pub fn fidelity(&self) -> FidelityTable {
        self.fidelity.unwrap_or_default()
    }

    pub fn sweep_config(&self) -> CliResult<SweepConfig> {
        let b = self
            .sweep
            .as_ref()
            .ok_or_else(|| CliError::config("missing block `[sweep]`"))?;
        if b.gammas.is_empty() {
            return Err(CliError::config("`sweep.gammas` is empty"));
        }
        let cfg = SweepConfig {
            gammas: b.gammas.clone(),
            iterations: b.iterations,
            requests: b.requests,
            traffic: TrafficModel {
                classes: b.classes.clone(),
            },
            multijob: MultiJobConfig {
                buffer_capacity: b.buffer_capacity,
                policy: b.policy,
                mapping: b.mapping,
                scheduler: self.scheduler(),
                fidelity: self.fidelity(),
                record_schedule: false,
            },
            timing: self.timing(),
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = r#"
seed = 7
experiment = "sweep"

[topology]
kind = "clos"
n = 6
n_tor = 4

[topology.inventory]
comm_qubits = 4
data_qubits = 10

[timing]
tau_sw = 0.001

[timing.intra]
kind = "ee_fock"
alpha = 0.05
eta_eb = 0.1
eta_det = 1.0
tau0 = 1e-6

[timing.inter]
kind = "ss"
lambda_ss = 100.0

[scheduler]
ebits_required = 1

[sweep]
gammas = [0.01, 0.1]
iterations = 2
policy = "spread"

[[sweep.classes]]
qpus = 9
"#;

    #[test]
    fn round_trip() {
        let a = RunConfig::parse(SAMPLE).unwrap();
        let text = a.to_toml().unwrap();
        let b = RunConfig::parse(&text).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.hash().unwrap(), b.hash().unwrap());
        assert_eq!(a.experiment, Some(Experiment::MultiJobSweep));
        let s = a.sweep_config().unwrap();
        assert_eq!(s.multijob.scheduler.ebits_required, 1);
        assert_eq!(s.traffic.classes[0].rate_weight, 1.0);
    }

    #[test]
    fn unknown_field_rejected() {
        let err = RunConfig::parse("seed = 1\nbogus = 2\n").unwrap_err();
        assert!(err.to_string().contains("bogus"));
    }

    #[test]
    fn missing_scatterer_field_is_named() {
        let err = RunConfig::parse(
            "seed = 1\n[protocol_mc.scatterer]\nlambda_source = 1e6\ntau_reset = 1e-6\nsim_window = 10.0\nmax_iterations = 10\n",
        )
        .unwrap_err();
        assert!(err.to_string().contains("delta_omega"), "{err}");
    }
}
