//! Ebit generation protocols at the rate/fidelity level.
//!
//! Heralded protocols repeat attempts until one succeeds, so the number of
//! attempts is geometric and the generation time is that count times the
//! attempt duration. The scatterer-scatterer protocol is instead described
//! by an exponential time with rate `lambda_ss`, estimated by the Monte
//! Carlo in [`scatter`].

pub mod scatter;

use rand::Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use scatter::{
    fit_lambda_ss, run_batch, simulate_ss_success, write_success_csv, LambdaFit, LambdaSsCache, ScattererParams,
    SsOutcome, SsSummary,
};

fn check_unit(name: &'static str, v: f64, open_top: bool) -> Result<()> {
    let ok = if open_top {
        v > 0.0 && v < 1.0
    } else {
        v > 0.0 && v <= 1.0
    };
    if ok {
        Ok(())
    } else {
        let range = if open_top { "(0, 1)" } else { "(0, 1]" };
        Err(Error::param(name, format!("{v} is outside {range}")))
    }
}

fn check_positive(name: &'static str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::param(name, format!("{v} must be positive")))
    }
}

fn one() -> f64 {
    1.0
}

/// Emitter-emitter protocol with Fock-state (presence/absence) encoding.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EeFockParams {
    pub alpha: f64,
    pub eta_eb: f64,
    pub eta_det: f64,
    /// Seconds per attempt.
    pub tau0: f64,
}

impl EeFockParams {
    pub fn validate(&self) -> Result<()> {
        check_unit("alpha", self.alpha, true)?;
        check_unit("eta_eb", self.eta_eb, false)?;
        check_unit("eta_det", self.eta_det, false)?;
        check_positive("tau0", self.tau0)
    }

    pub fn eta(&self) -> f64 {
        self.eta_eb * self.eta_det
    }
}

/// `F = 1 - α(1-η)/(1-αη)`.
pub fn ee_fock_fidelity(p: &EeFockParams) -> f64 {
    let eta = p.eta();
    1.0 - p.alpha * (1.0 - eta) / (1.0 - p.alpha * eta)
}

/// `p = 2αη(1-αη)`.
pub fn ee_fock_success_probability(p: &EeFockParams) -> f64 {
    let ae = p.alpha * p.eta();
    2.0 * ae * (1.0 - ae)
}

/// Emitter-emitter protocol with time-bin encoding.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EeTimeBinParams {
    pub eta_eb: f64,
    pub eta_det: f64,
    pub tau0: f64,
    /// Time-bin separation in seconds.
    pub tau_b: f64,
    #[serde(default = "one")]
    pub fidelity: f64,
}

impl EeTimeBinParams {
    pub fn validate(&self) -> Result<()> {
        check_unit("eta_eb", self.eta_eb, false)?;
        check_unit("eta_det", self.eta_det, false)?;
        check_positive("tau0", self.tau0)?;
        check_positive("tau_b", self.tau_b)?;
        check_unit("fidelity", self.fidelity, false)
    }

    /// Heralding probability `η_eb² η_det²`, before the ½ of the BSM.
    pub fn success_probability(&self) -> f64 {
        (self.eta_eb * self.eta_det).powi(2)
    }
}

/// `R = η_eb² η_det² / (2(τ₀+τ_b))` in Hz.
pub fn ee_timebin_rate(p: &EeTimeBinParams) -> f64 {
    p.success_probability() / (2.0 * (p.tau0 + p.tau_b))
}

/// Emitter-scatterer protocol with time-bin encoding.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EsTimeBinParams {
    pub eta_es: f64,
    pub eta_det: f64,
    pub tau0: f64,
    pub tau_b: f64,
    #[serde(default = "one")]
    pub fidelity: f64,
}

impl EsTimeBinParams {
    pub fn validate(&self) -> Result<()> {
        check_unit("eta_es", self.eta_es, false)?;
        check_unit("eta_det", self.eta_det, false)?;
        check_positive("tau0", self.tau0)?;
        check_positive("tau_b", self.tau_b)?;
        check_unit("fidelity", self.fidelity, false)
    }

    pub fn success_probability(&self) -> f64 {
        self.eta_es * self.eta_det
    }
}

/// `R = η_es η_det / (2(τ₀+τ_b))` in Hz.
pub fn es_timebin_rate(p: &EsTimeBinParams) -> f64 {
    p.success_probability() / (2.0 * (p.tau0 + p.tau_b))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProtocolKind {
    EeFock,
    EeTimebin,
    EsTimebin,
    Ss,
}

impl ProtocolKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ProtocolKind::EeFock => "ee_fock",
            ProtocolKind::EeTimebin => "ee_timebin",
            ProtocolKind::EsTimebin => "es_timebin",
            ProtocolKind::Ss => "ss",
        }
    }
}

/// Scatterer-scatterer protocol reduced to its fitted exponential rate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SsRate {
    /// Hz.
    pub lambda_ss: f64,
    #[serde(default = "one")]
    pub fidelity: f64,
}

/// One ebit protocol with everything needed to sample generation times.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProtocolModel {
    EeFock(EeFockParams),
    EeTimebin(EeTimeBinParams),
    EsTimebin(EsTimeBinParams),
    Ss(SsRate),
}

impl ProtocolModel {
    /// Same-rack default: α = 0.05, η = 0.1, τ₀ = 1 µs.
    pub fn default_intra() -> Self {
        ProtocolModel::EeFock(EeFockParams {
            alpha: 0.05,
            eta_eb: 0.1,
            eta_det: 1.0,
            tau0: 1e-6,
        })
    }

    /// Inter-rack default: exponential with mean 10 ms.
    pub fn default_inter() -> Self {
        ProtocolModel::Ss(SsRate {
            lambda_ss: 100.0,
            fidelity: 1.0,
        })
    }

    pub fn kind(&self) -> ProtocolKind {
        match self {
            ProtocolModel::EeFock(_) => ProtocolKind::EeFock,
            ProtocolModel::EeTimebin(_) => ProtocolKind::EeTimebin,
            ProtocolModel::EsTimebin(_) => ProtocolKind::EsTimebin,
            ProtocolModel::Ss(_) => ProtocolKind::Ss,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            ProtocolModel::EeFock(p) => p.validate(),
            ProtocolModel::EeTimebin(p) => p.validate(),
            ProtocolModel::EsTimebin(p) => p.validate(),
            ProtocolModel::Ss(s) => {
                check_positive("lambda_ss", s.lambda_ss)?;
                check_unit("fidelity", s.fidelity, false)
            }
        }
    }

    /// Per-attempt success probability used by the sampler, and the
    /// attempt duration. Time-bin attempts include the BSM's ½, so the
    /// mean time equals the inverse of the protocol rate.
    pub fn attempt(&self) -> Option<(f64, f64)> {
        match self {
            ProtocolModel::EeFock(p) => Some((ee_fock_success_probability(p), p.tau0)),
            ProtocolModel::EeTimebin(p) => Some((p.success_probability() / 2.0, p.tau0 + p.tau_b)),
            ProtocolModel::EsTimebin(p) => Some((p.success_probability() / 2.0, p.tau0 + p.tau_b)),
            ProtocolModel::Ss(_) => None,
        }
    }

    pub fn fidelity(&self) -> f64 {
        match self {
            ProtocolModel::EeFock(p) => ee_fock_fidelity(p),
            ProtocolModel::EeTimebin(p) => p.fidelity,
            ProtocolModel::EsTimebin(p) => p.fidelity,
            ProtocolModel::Ss(s) => s.fidelity,
        }
    }

    /// Mean ebit generation time in seconds.
    pub fn mean_time(&self) -> f64 {
        match self.attempt() {
            Some((p, tau)) => tau / p,
            None => match self {
                ProtocolModel::Ss(s) => 1.0 / s.lambda_ss,
                _ => unreachable!(),
            },
        }
    }

    /// Standard deviation of the generation time in seconds.
    pub fn std_time(&self) -> f64 {
        match self.attempt() {
            Some((p, tau)) => tau * (1.0 - p).sqrt() / p,
            None => self.mean_time(),
        }
    }

    /// Draws one ebit generation time in seconds.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<f64> {
        match self.attempt() {
            Some((p, tau)) => Ok(sample_geometric(p, rng)? as f64 * tau),
            None => match self {
                ProtocolModel::Ss(s) => {
                    let exp = Exp::new(s.lambda_ss).map_err(|e| Error::param("lambda_ss", e.to_string()))?;
                    Ok(exp.sample(rng))
                }
                _ => unreachable!(),
            },
        }
    }
}

/// Number of attempts up to and including the first success,
/// `N = ceil(ln U / ln(1-p))` with `U` uniform on (0, 1].
pub fn sample_geometric<R: Rng + ?Sized>(p: f64, rng: &mut R) -> Result<u64> {
    if p.is_nan() || p <= 0.0 {
        return Err(Error::NeverSucceeds);
    }
    if p >= 1.0 {
        return Ok(1);
    }
    let u = 1.0 - rng.random::<f64>();
    let n = (u.ln() / (-p).ln_1p()).ceil();
    Ok(if n < 1.0 { 1 } else { n as u64 })
}
