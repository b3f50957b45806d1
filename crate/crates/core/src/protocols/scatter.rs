//! Monte Carlo of the scatterer-scatterer protocol with probabilistic
//! photon-pair sources, and the exponential fit of its success times.

use std::collections::HashMap;
use std::f64::consts::TAU;
use std::io::Write;

use rand::Rng;
use rand_distr::{Distribution, Exp1};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{stream, SimRng};

/// Fits with a coefficient of determination at or below this are rejected.
pub const FIT_R2_THRESHOLD: f64 = 0.99;
/// Minimum number of success times for [`fit_lambda_ss`].
pub const MIN_FIT_SAMPLES: usize = 1000;
/// Tail probabilities at or below this are left out of the log-linear fit.
pub const FIT_TAIL_FLOOR: f64 = 1e-3;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScattererParams {
    /// Pair generation rate of each source, Hz.
    pub lambda_source: f64,
    /// Gaussian linewidth in angular frequency, rad/s.
    pub delta_omega: f64,
    /// Communication qubit reinitialization time, s.
    pub tau_reset: f64,
    /// Length of one simulated window, s.
    pub sim_window: f64,
    pub max_iterations: usize,
}

impl ScattererParams {
    /// 10⁶ pairs/s, 1 GHz linewidth, 1 µs reset.
    pub fn reference_point() -> Self {
        Self {
            lambda_source: 1e6,
            delta_omega: TAU * 1e9,
            tau_reset: 1e-6,
            sim_window: 10.0,
            max_iterations: 100_000,
        }
    }

    pub fn linewidth_to_delta_omega(linewidth_hz: f64) -> f64 {
        TAU * linewidth_hz
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("lambda_source", self.lambda_source),
            ("delta_omega", self.delta_omega),
            ("tau_reset", self.tau_reset),
            ("sim_window", self.sim_window),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::param(name, format!("{v} must be positive")));
            }
        }
        if self.max_iterations == 0 {
            return Err(Error::param("max_iterations", "must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SsOutcome {
    Success(f64),
    WindowExhausted,
}

impl SsOutcome {
    pub fn time(self) -> Option<f64> {
        match self {
            SsOutcome::Success(t) => Some(t),
            SsOutcome::WindowExhausted => None,
        }
    }
}

/// `½ exp(-½ Δω² Δt²)`.
pub fn pair_acceptance(delta_omega: f64, dt: f64) -> f64 {
    let x = delta_omega * dt;
    0.5 * (-0.5 * x * x).exp()
}

/// Merged emission events of two independent Poisson sources of rate `λ`:
/// gaps are exponential with rate `2λ` and each event picks its source
/// uniformly.
struct Emissions<'a> {
    rng: &'a mut SimRng,
    rate: f64,
    window: f64,
    t: f64,
    bits: u64,
    nbits: u32,
}

impl Emissions<'_> {
    fn next(&mut self) -> Option<(f64, usize)> {
        let gap: f64 = Exp1.sample(self.rng);
        self.t += gap / self.rate;
        if self.t > self.window {
            return None;
        }
        if self.nbits == 0 {
            self.bits = self.rng.random();
            self.nbits = 64;
        }
        let s = (self.bits & 1) as usize;
        self.bits >>= 1;
        self.nbits -= 1;
        Some((self.t, s))
    }
}

/// One run of the two-source simulation; returns the first accepted
/// coincidence time or [`SsOutcome::WindowExhausted`].
pub fn simulate_ss_success(params: &ScattererParams, rng: &mut SimRng) -> Result<SsOutcome> {
    params.validate()?;
    let tau = params.tau_reset;
    let dw = params.delta_omega;
    let mut events = Emissions {
        rng,
        rate: 2.0 * params.lambda_source,
        window: params.sim_window,
        t: 0.0,
        bits: 0,
        nbits: 0,
    };
    // Times at which each communication qubit is free again.
    let mut ready = [0.0f64; 2];
    let mut current = events.next();
    while let Some((t, s)) = current {
        let following = events.next();
        if let Some((t2, s2)) = following {
            if s2 != s && t >= ready[s] && t2 >= ready[s2] {
                let p = pair_acceptance(dw, t2 - t);
                if p > 0.0 && events.rng.random::<f64>() < p {
                    return Ok(SsOutcome::Success(t2));
                }
            }
        }
        if t >= ready[s] {
            ready[s] = t + tau;
        }
        current = following;
    }
    Ok(SsOutcome::WindowExhausted)
}

/// Runs `iterations` independent windows; iteration `i` uses stream
/// `("ss", i)` of `seed`.
pub fn run_batch(params: &ScattererParams, iterations: usize, seed: u64) -> Result<Vec<SsOutcome>> {
    params.validate()?;
    (0..iterations)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream(seed, "ss", i as u64);
            simulate_ss_success(params, &mut rng)
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LambdaFit {
    pub lambda_ss: f64,
    /// Coefficient of determination of the log-tail line.
    pub r2: f64,
    pub n: usize,
}

impl LambdaFit {
    pub fn accepted(&self) -> bool {
        self.r2 > FIT_R2_THRESHOLD
    }
}

/// Maximum-likelihood exponential rate `1/mean`, with the R² of a least
/// squares line through `ln Pr(T > t)` over the points where the empirical
/// tail exceeds [`FIT_TAIL_FLOOR`].
pub fn fit_lambda_ss(times: &[f64]) -> Result<LambdaFit> {
    if times.len() < MIN_FIT_SAMPLES {
        return Err(Error::InsufficientSamples {
            needed: MIN_FIT_SAMPLES,
            got: times.len(),
        });
    }
    let n = times.len();
    let mean = times.iter().sum::<f64>() / n as f64;
    let mut sorted = times.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && sorted[j + 1] == sorted[i] {
            j += 1;
        }
        let tail = (n - j - 1) as f64 / n as f64;
        if tail > FIT_TAIL_FLOOR {
            xs.push(sorted[i]);
            ys.push(tail.ln());
        }
        i = j + 1;
    }
    Ok(LambdaFit {
        lambda_ss: 1.0 / mean,
        r2: r_squared(&xs, &ys),
        n,
    })
}

fn r_squared(xs: &[f64], ys: &[f64]) -> f64 {
    let m = xs.len() as f64;
    if xs.len() < 3 {
        return 0.0;
    }
    let mx = xs.iter().sum::<f64>() / m;
    let my = ys.iter().sum::<f64>() / m;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    if sxx <= 0.0 || syy <= 0.0 {
        return 0.0;
    }
    let slope = sxy / sxx;
    let ss_res: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| (y - my - slope * (x - mx)).powi(2))
        .sum();
    1.0 - ss_res / syy
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SsSummary {
    pub lambda_ss: f64,
    pub r2: f64,
    pub n_success: usize,
    pub n_exhausted: usize,
}

impl SsSummary {
    pub fn from_outcomes(outcomes: &[SsOutcome]) -> Result<Self> {
        let times: Vec<f64> = outcomes.iter().filter_map(|o| o.time()).collect();
        let fit = fit_lambda_ss(&times)?;
        Ok(Self {
            lambda_ss: fit.lambda_ss,
            r2: fit.r2,
            n_success: times.len(),
            n_exhausted: outcomes.len() - times.len(),
        })
    }
}

#[derive(Serialize)]
struct SuccessRow {
    iteration: usize,
    success_time_s: Option<f64>,
    status: &'static str,
}

/// CSV with columns `iteration,success_time_s,status`.
pub fn write_success_csv<W: Write>(outcomes: &[SsOutcome], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for (iteration, o) in outcomes.iter().enumerate() {
        let row = SuccessRow {
            iteration,
            success_time_s: o.time(),
            status: match o {
                SsOutcome::Success(_) => "success",
                SsOutcome::WindowExhausted => "window_exhausted",
            },
        };
        w.serialize(row).map_err(|e| Error::Io(e.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

/// Fitted rates keyed by parameter set, iteration count and seed, so the
/// simulation runs once per configuration.
#[derive(Debug, Default)]
pub struct LambdaSsCache {
    fits: HashMap<[u64; 6], LambdaFit>,
}

impl LambdaSsCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get_or_fit(&mut self, params: &ScattererParams, iterations: usize, seed: u64) -> Result<LambdaFit> {
        let key = [
            params.lambda_source.to_bits(),
            params.delta_omega.to_bits(),
            params.tau_reset.to_bits(),
            params.sim_window.to_bits(),
            iterations as u64,
            seed,
        ];
        if let Some(fit) = self.fits.get(&key) {
            return Ok(*fit);
        }
        let outcomes = run_batch(params, iterations, seed)?;
        let times: Vec<f64> = outcomes.iter().filter_map(|o| o.time()).collect();
        let fit = fit_lambda_ss(&times)?;
        self.fits.insert(key, fit);
        Ok(fit)
    }

    pub fn len(&self) -> usize {
        self.fits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fits.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_distr::Exp;

    #[test]
    fn acceptance_limits() {
        assert_eq!(pair_acceptance(1e9, 0.0), 0.5);
        assert_eq!(pair_acceptance(f64::MAX.sqrt(), 1.0), 0.0);
        assert!((pair_acceptance(1.0, 1.0) - 0.5 * (-0.5f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn huge_linewidth_never_succeeds() {
        let p = ScattererParams {
            delta_omega: 1e30,
            sim_window: 1e-3,
            ..ScattererParams::reference_point()
        };
        let mut rng = stream(5, "ss", 0);
        assert_eq!(simulate_ss_success(&p, &mut rng).unwrap(), SsOutcome::WindowExhausted);
    }

    #[test]
    fn tiny_linewidth_succeeds_fast() {
        // With perfect overlap each cross-source pair is accepted half the time.
        let p = ScattererParams {
            delta_omega: 1e-3,
            ..ScattererParams::reference_point()
        };
        let out = run_batch(&p, 200, 9).unwrap();
        let mean = out.iter().filter_map(|o| o.time()).sum::<f64>() / out.len() as f64;
        assert!(out.iter().all(|o| o.time().is_some()));
        assert!(mean < 1e-5, "{mean}");
    }

    #[test]
    fn invalid_window_rejected() {
        let p = ScattererParams {
            sim_window: 0.0,
            ..ScattererParams::reference_point()
        };
        let mut rng = stream(5, "ss", 0);
        assert!(matches!(
            simulate_ss_success(&p, &mut rng),
            Err(Error::Parameter { name: "sim_window", .. })
        ));
    }

    #[test]
    fn batch_reproducible() {
        let p = ScattererParams {
            delta_omega: 1e7,
            ..ScattererParams::reference_point()
        };
        assert_eq!(run_batch(&p, 50, 1).unwrap(), run_batch(&p, 50, 1).unwrap());
        assert_ne!(run_batch(&p, 50, 1).unwrap(), run_batch(&p, 50, 2).unwrap());
    }

    #[test]
    fn fit_recovers_synthetic_rate() {
        let mut rng = stream(11, "fit", 0);
        let exp = Exp::new(50.0).unwrap();
        let xs: Vec<f64> = (0..100_000).map(|_| exp.sample(&mut rng)).collect();
        let fit = fit_lambda_ss(&xs).unwrap();
        assert!((fit.lambda_ss - 50.0).abs() < 1.0, "{}", fit.lambda_ss);
        assert!(fit.accepted(), "{}", fit.r2);
    }

    #[test]
    fn fit_rejects_degenerate() {
        let fit = fit_lambda_ss(&vec![0.01; 2000]).unwrap();
        assert!(!fit.accepted());
        assert_eq!(
            fit_lambda_ss(&[]),
            Err(Error::InsufficientSamples { needed: 1000, got: 0 })
        );
    }

    #[test]
    fn csv_layout() {
        let mut buf = Vec::new();
        write_success_csv(&[SsOutcome::Success(0.5), SsOutcome::WindowExhausted], &mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "iteration,success_time_s,status\n0,0.5,success\n1,,window_exhausted\n"
        );
    }

    #[test]
    fn cache_reuses_fit() {
        let p = ScattererParams {
            delta_omega: 1e6,
            lambda_source: 1e5,
            ..ScattererParams::reference_point()
        };
        let mut cache = LambdaSsCache::new();
        let a = cache.get_or_fit(&p, 1200, 3).unwrap();
        let b = cache.get_or_fit(&p, 1200, 3).unwrap();
        assert_eq!(a, b);
        assert_eq!(cache.len(), 1);
    }
}
