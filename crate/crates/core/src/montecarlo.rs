//! Trial loops, rate aggregation and parameter sweeps.
//!
//! Determinism: trial t at BS l draws from the ChaCha8 stream
//! `(t << 16) | l` of the master seed, and per-trial results are reduced
//! sequentially in trial order with compensated summation, so the output
//! does not depend on how rayon schedules the trials.

use log::{debug, info};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::analysis::{de_sinr, sum_rate_bounds, BoundForm, DeOptions, TExponent};
use crate::channel::sample_estimate;
use crate::error::{Error, Result};
use crate::receivers::{combiners, sinr_all, ReceiverKind, SinrModel};
use crate::scenario::{db_to_linear, estimation_params, EstimationStats, LargeScaleFading, ScenarioConfig};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialPlan {
    pub n_trials: usize,
    pub receivers: Vec<ReceiverKind>,
    /// Zero-based index of the reference cell.
    pub reference_cell: usize,
    pub sinr_model: SinrModel,
}

impl TrialPlan {
    pub fn new(n_trials: usize, receivers: &[ReceiverKind]) -> Self {
        TrialPlan {
            n_trials,
            receivers: receivers.to_vec(),
            reference_cell: 0,
            sinr_model: SinrModel::default(),
        }
    }

    fn validate(&self, config: &ScenarioConfig) -> Result<()> {
        if self.n_trials == 0 {
            return Err(Error::Config("need at least one trial".into()));
        }
        if self.receivers.is_empty() {
            return Err(Error::Config("no receivers requested".into()));
        }
        if self.reference_cell >= config.cells {
            return Err(Error::Index {
                what: "reference cell",
                index: self.reference_cell,
                limit: config.cells,
            });
        }
        Ok(())
    }
}

/// Substream owned by one (trial, BS) pair.
pub fn trial_rng(seed: u64, trial: usize, bs: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((trial as u64) << 16) | bs as u64);
    rng
}

/// Neumaier-compensated running sum.
#[derive(Clone, Copy, Debug, Default)]
struct Accumulator {
    sum: f64,
    comp: f64,
    sum_sq: f64,
    comp_sq: f64,
}

fn neumaier(sum: &mut f64, comp: &mut f64, x: f64) {
    let t = *sum + x;
    if sum.abs() >= x.abs() {
        *comp += (*sum - t) + x;
    } else {
        *comp += (x - t) + *sum;
    }
    *sum = t;
}

impl Accumulator {
    fn push(&mut self, x: f64) {
        neumaier(&mut self.sum, &mut self.comp, x);
        neumaier(&mut self.sum_sq, &mut self.comp_sq, x * x);
    }

    fn mean(&self, n: usize) -> f64 {
        (self.sum + self.comp) / n as f64
    }

    /// Standard error of the mean from the unbiased sample variance.
    fn stderr(&self, n: usize) -> f64 {
        if n < 2 {
            return 0.0;
        }
        let nf = n as f64;
        let mean = self.mean(n);
        let var = ((self.sum_sq + self.comp_sq) - nf * mean * mean).max(0.0) / (nf - 1.0);
        (var / nf).sqrt()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateResult {
    pub receiver: ReceiverKind,
    /// E[log₂(1 + SINR_k)] per user, bits/channel-use.
    pub rate: Vec<f64>,
    pub rate_stderr: Vec<f64>,
    /// E[SINR_k] per user.
    pub mean_sinr: Vec<f64>,
    /// Σ_k R_k and the standard error of the per-trial sum.
    pub sum_rate: f64,
    pub sum_stderr: f64,
    pub n_trials: usize,
    pub config_hash: String,
}

impl RateResult {
    /// Half-width of the 95 % normal-approximation interval on `sum_rate`.
    pub fn sum_ci95(&self) -> f64 {
        1.959_963_984_540_054 * self.sum_stderr
    }

    pub fn mean_sinr_over_users(&self) -> f64 {
        self.mean_sinr.iter().sum::<f64>() / self.mean_sinr.len() as f64
    }

    fn zero(receiver: ReceiverKind, users: usize, n_trials: usize, config_hash: String) -> Self {
        RateResult {
            receiver,
            rate: vec![0.0; users],
            rate_stderr: vec![0.0; users],
            mean_sinr: vec![0.0; users],
            sum_rate: 0.0,
            sum_stderr: 0.0,
            n_trials,
            config_hash,
        }
    }
}

/// R = (1 − τ/T)·Σ_k R_k.
pub fn sum_spectral_efficiency(result: &RateResult, tau: usize, coherence: usize) -> Result<f64> {
    if coherence <= tau {
        return Err(Error::Domain(format!("need T > τ (τ={tau}, T={coherence})")));
    }
    Ok((1.0 - tau as f64 / coherence as f64) * result.rate.iter().sum::<f64>())
}

/// SHA-256 over the JSON of everything that determines a result.
pub fn config_hash(config: &ScenarioConfig, lsf: &LargeScaleFading, plan: &TrialPlan) -> String {
    let payload = serde_json::json!({ "config": config, "fading": lsf, "plan": plan });
    let digest = Sha256::digest(payload.to_string().as_bytes());
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

/// SINRs of every requested receiver (outer) and user (inner) for one trial.
pub fn run_trial(
    stats: &EstimationStats,
    antennas: usize,
    plan: &TrialPlan,
    seed: u64,
    trial: usize,
) -> Result<Vec<Vec<f64>>> {
    let l = plan.reference_cell;
    let mut rng = trial_rng(seed, trial, l);
    let draw = sample_estimate(stats, l, antennas, &mut rng);
    plan.receivers
        .iter()
        .map(|&kind| {
            let set = combiners(kind, &draw, stats)?;
            sinr_all(&set, &draw, stats, plan.sinr_model)
        })
        .collect::<Result<Vec<_>>>()
        .map_err(|e| e.in_trial(trial))
}

/// Monte-Carlo ergodic rates of every requested receiver.
pub fn estimate_rates(config: &ScenarioConfig, stats: &EstimationStats, plan: &TrialPlan) -> Result<Vec<RateResult>> {
    plan.validate(config)?;
    let hash = config_hash(config, stats.lsf(), plan);
    let trials: Vec<Vec<Vec<f64>>> = (0..plan.n_trials)
        .into_par_iter()
        .map(|t| run_trial(stats, config.antennas, plan, config.seed, t))
        .collect::<Result<_>>()?;
    let users = config.users;
    let n = plan.n_trials;
    let results = plan
        .receivers
        .iter()
        .enumerate()
        .map(|(r, &kind)| {
            let mut rate = vec![Accumulator::default(); users];
            let mut sinr = vec![Accumulator::default(); users];
            let mut total = Accumulator::default();
            for trial in &trials {
                let mut trial_sum = 0.0;
                for (k, &s) in trial[r].iter().enumerate() {
                    let bits = (1.0 + s).log2();
                    rate[k].push(bits);
                    sinr[k].push(s);
                    trial_sum += bits;
                }
                total.push(trial_sum);
            }
            RateResult {
                receiver: kind,
                rate: rate.iter().map(|a| a.mean(n)).collect(),
                rate_stderr: rate.iter().map(|a| a.stderr(n)).collect(),
                mean_sinr: sinr.iter().map(|a| a.mean(n)).collect(),
                sum_rate: total.mean(n),
                sum_stderr: total.stderr(n),
                n_trials: n,
                config_hash: hash.clone(),
            }
        })
        .collect();
    Ok(results)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    /// Grid in dB; the pilot power keeps its ratio to the data power.
    SnrDb,
    /// Grid of normalized Doppler f_D·T_s.
    Doppler,
    /// Grid of antenna counts.
    Antennas,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepOptions {
    pub plan: TrialPlan,
    /// Attach the closed-form bounds (OLR) at every point.
    pub bounds: Option<(BoundForm, TExponent)>,
    /// Attach the deterministic equivalent at every point.
    pub de: Option<DeOptions>,
    /// Skip the Monte-Carlo part (analysis-only sweeps).
    pub analysis_only: bool,
}

impl SweepOptions {
    pub fn new(plan: TrialPlan) -> Self {
        SweepOptions {
            plan,
            bounds: Some((BoundForm::default(), TExponent::default())),
            de: Some(DeOptions::default()),
            analysis_only: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepPoint {
    pub value: f64,
    pub config: ScenarioConfig,
    pub alpha: f64,
    /// α = 0: every SINR is zero; rates are reported as 0.
    pub degenerate: bool,
    pub results: Vec<RateResult>,
    /// Σ_k log₂(1 + SINR̄_k), bits/channel-use.
    pub de_sum_rate: Option<f64>,
    /// Mean over users of SINR̄_k.
    pub de_mean_sinr: Option<f64>,
    /// (lower, upper) on Σ_k R_k for the OLR.
    pub bounds: Option<(f64, f64)>,
}

impl SweepPoint {
    pub fn result(&self, kind: ReceiverKind) -> Option<&RateResult> {
        self.results.iter().find(|r| r.receiver == kind)
    }
}

fn point_config(base: &ScenarioConfig, axis: SweepAxis, value: f64) -> Result<ScenarioConfig> {
    let mut c = base.clone();
    match axis {
        SweepAxis::SnrDb => {
            let ratio = base.pilot_power / base.power;
            c.power = db_to_linear(value);
            c.pilot_power = ratio * c.power;
        }
        SweepAxis::Doppler => c.doppler = crate::scenario::DopplerParams::Normalized(value),
        SweepAxis::Antennas => {
            if value < 1.0 || value.fract() != 0.0 {
                return Err(Error::Config(format!("antenna count must be a positive integer, got {value}")));
            }
            c.antennas = value as usize;
        }
    }
    c.validate()?;
    Ok(c)
}

/// Runs every grid point with the large-scale fading frozen.
pub fn sweep(
    base: &ScenarioConfig,
    lsf: &LargeScaleFading,
    axis: SweepAxis,
    grid: &[f64],
    opts: &SweepOptions,
) -> Result<Vec<SweepPoint>> {
    if grid.is_empty() {
        return Err(Error::Config("empty sweep grid".into()));
    }
    if grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Config("sweep grid must be strictly increasing".into()));
    }
    let l = opts.plan.reference_cell;
    let mut points = Vec::with_capacity(grid.len());
    for &value in grid {
        let config = point_config(base, axis, value)?;
        let alpha = config.alpha()?;
        let hash = config_hash(&config, lsf, &opts.plan);
        let stats = match estimation_params(lsf, alpha, config.power, config.pilot_power) {
            Ok(s) => s,
            Err(Error::DegenerateAging) => {
                info!("{axis:?} = {value}: α = 0, reporting zero rates");
                let results = opts
                    .plan
                    .receivers
                    .iter()
                    .map(|&k| RateResult::zero(k, config.users, opts.plan.n_trials, hash.clone()))
                    .collect();
                points.push(SweepPoint {
                    value,
                    config,
                    alpha,
                    degenerate: true,
                    results,
                    de_sum_rate: opts.de.map(|_| 0.0),
                    de_mean_sinr: opts.de.map(|_| 0.0),
                    bounds: opts.bounds.map(|_| (0.0, 0.0)),
                });
                continue;
            }
            Err(e) => return Err(e),
        };
        let results = if opts.analysis_only {
            Vec::new()
        } else {
            estimate_rates(&config, &stats, &opts.plan)?
        };
        let (de_sum_rate, de_mean_sinr) = match &opts.de {
            Some(de) => {
                let sinrs = (0..config.users)
                    .map(|k| de_sinr(&stats, config.antennas, l, k, de).map(|s| s.sinr))
                    .collect::<Result<Vec<_>>>()?;
                let rate = sinrs.iter().map(|s| (1.0 + s).log2()).sum();
                (Some(rate), Some(sinrs.iter().sum::<f64>() / sinrs.len() as f64))
            }
            None => (None, None),
        };
        let bounds = match opts.bounds {
            Some((form, exponent)) => Some(sum_rate_bounds(&stats, config.antennas, l, form, exponent)?),
            None => None,
        };
        debug!("{axis:?} = {value}: α = {alpha}, σ² = {}", stats.sigma2(l));
        points.push(SweepPoint {
            value,
            config,
            alpha,
            degenerate: false,
            results,
            de_sum_rate,
            de_mean_sinr,
            bounds,
        });
    }
    Ok(points)
}
