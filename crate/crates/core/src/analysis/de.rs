//! Large-antenna deterministic equivalent of the OLR SINR.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scenario::EstimationStats;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DeForm {
    /// One δ per interfering user, driven by the aggregate variance
    /// t_v = Σ_i β̂_{liv} that the interference Gram matrix actually has.
    #[default]
    Effective,
    /// One δ per (cell, user) iterated cell by cell, with the SINR read off
    /// the own cell's δ's — the literal per-cell recursion.
    PerCell,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DeOptions {
    /// Stop when the largest relative change of any δ falls below this.
    pub tol: f64,
    pub max_iter: usize,
    pub form: DeForm,
    /// Multiplies the default starting point δ⁰ = 1/σ² (perturbation studies).
    pub init_scale: f64,
}

impl Default for DeOptions {
    fn default() -> Self {
        DeOptions {
            tol: 1e-12,
            max_iter: 10_000,
            form: DeForm::Effective,
            init_scale: 1.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DeState {
    /// `Effective`: one entry per user of the reference cell.
    /// `PerCell`: flattened `[i][j]` over all cells.
    pub delta: Vec<f64>,
    pub iterations: usize,
    pub residual: f64,
    /// Residual after every sweep.
    pub history: Vec<f64>,
    pub sinr: f64,
}

fn max_rel_change(new: &[f64], old: &[f64]) -> f64 {
    new.iter()
        .zip(old)
        .map(|(a, b)| (a - b).abs() / a.abs().max(f64::MIN_POSITIVE))
        .fold(0.0, f64::max)
}

/// Iterates `step` from `start` until the relative change drops below tol.
fn fixed_point(
    start: Vec<f64>,
    opts: &DeOptions,
    mut step: impl FnMut(&[f64]) -> Vec<f64>,
) -> Result<(Vec<f64>, usize, f64, Vec<f64>)> {
    let mut delta = start;
    let mut history = Vec::new();
    for it in 1..=opts.max_iter {
        let next = step(&delta);
        let r = max_rel_change(&next, &delta);
        delta = next;
        history.push(r);
        if r < opts.tol {
            return Ok((delta, it, r, history));
        }
    }
    Err(Error::Convergence {
        what: "deterministic-equivalent fixed point",
        iterations: opts.max_iter,
        residual: history.last().copied().unwrap_or(f64::NAN),
    })
}

/// Deterministic-equivalent SINR̄ of user k at BS l with N antennas.
pub fn de_sinr(stats: &EstimationStats, antennas: usize, l: usize, k: usize, opts: &DeOptions) -> Result<DeState> {
    if !(opts.tol > 0.0) {
        return Err(Error::Domain(format!("tolerance must be positive, got {}", opts.tol)));
    }
    if stats.alpha == 0.0 {
        return Err(Error::DegenerateAging);
    }
    let (lc, kc) = (stats.cells(), stats.users());
    if l >= lc {
        return Err(Error::Index {
            what: "cell",
            index: l,
            limit: lc,
        });
    }
    if k >= kc {
        return Err(Error::Index {
            what: "user",
            index: k,
            limit: kc,
        });
    }
    let n = antennas as f64;
    let s2 = stats.sigma2(l);
    let delta0 = opts.init_scale / s2;
    match opts.form {
        DeForm::Effective => {
            let t: Vec<f64> = (0..kc)
                .map(|v| (0..lc).map(|i| stats.hat_beta(l, i, v)).sum())
                .collect();
            let resolvent = |delta: &[f64]| {
                let load: f64 = (0..kc).filter(|&j| j != k).map(|j| t[j] / (1.0 + delta[j])).sum();
                1.0 / (load + s2)
            };
            let (delta, iterations, residual, history) = fixed_point(vec![delta0; kc], opts, |d| {
                let e = resolvent(d);
                t.iter().map(|tv| n * tv * e).collect()
            })?;
            let sinr = n * stats.hat_beta(l, l, k) * resolvent(&delta);
            Ok(DeState {
                delta,
                iterations,
                residual,
                history,
                sinr,
            })
        }
        DeForm::PerCell => {
            let (delta, iterations, residual, history) =
                fixed_point(vec![delta0; lc * kc], opts, |d| {
                    let mut next = vec![0.0; lc * kc];
                    for i in 0..lc {
                        let row = &d[i * kc..(i + 1) * kc];
                        let load: f64 = (0..kc).map(|j| stats.hat_beta(l, i, j) / (1.0 + row[j])).sum();
                        for j in 0..kc {
                            next[i * kc + j] = n * stats.hat_beta(l, i, j) / (load + s2);
                        }
                    }
                    next
                })?;
            let own = &delta[l * kc..(l + 1) * kc];
            let load: f64 = (0..kc).map(|j| stats.hat_beta(l, l, j) / (1.0 + own[j])).sum();
            let sinr = n * stats.hat_beta(l, l, k) / (load + s2);
            Ok(DeState {
                delta,
                iterations,
                residual,
                history,
                sinr,
            })
        }
    }
}

/// Σ_k log₂(1 + SINR̄_k) over the users of cell l (bits/channel-use).
pub fn de_sum_rate(stats: &EstimationStats, antennas: usize, l: usize, opts: &DeOptions) -> Result<f64> {
    (0..stats.users())
        .map(|k| de_sinr(stats, antennas, l, k, opts).map(|s| (1.0 + s.sinr).log2()))
        .sum()
}
