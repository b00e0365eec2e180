//! Closed-form upper and lower bounds on the OLR ergodic rate of one user.

use rug::Float;
use serde::{Deserialize, Serialize};

use super::specfun::{digamma_int, EULER_GAMMA};
use super::wishart::BoundInputs;
use crate::error::{Error, Result};
use crate::scenario::EstimationStats;

/// Which algebraic form of the bounds to evaluate.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundForm {
    /// Signal power β̂_llk restored, N−K+1 noise-subspace terms, and the
    /// lower bound rebuilt from E[ln I₁] ≥ E[ln(signal/(λ+σ²))] with the
    /// exact mean log of a Gamma(N−K+1) variable. Guaranteed to sandwich.
    #[default]
    Corrected,
    /// Uncorrected closed forms (unit signal power, N−K−1 terms,
    /// −2γ and the K−1 prefactor). Kept for comparison; not a valid bound.
    Printed,
}

/// Which exponent the per-cell variances carry in the effective covariance.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TExponent {
    /// t_v = Σ_i β̂_{liv}: matches the spectrum of S (see the χ² test).
    #[default]
    Linear,
    /// t_v = Σ_i β̂²_{liv}.
    Squared,
}

/// Diagonal of the effective covariance of S = Σ_i Ĝ_{li[k]}Ĝᴴ_{li[k]}
/// (user k's column removed), in user order.
pub fn effective_t(stats: &EstimationStats, l: usize, k: usize, exponent: TExponent) -> Result<Vec<f64>> {
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
    Ok((0..kc)
        .filter(|&v| v != k)
        .map(|v| {
            (0..lc)
                .map(|i| {
                    let b = stats.hat_beta(l, i, v);
                    match exponent {
                        TExponent::Linear => b,
                        TExponent::Squared => b * b,
                    }
                })
                .sum()
        })
        .collect())
}

/// Bound inputs of user k at BS l.
pub fn bound_inputs(
    stats: &EstimationStats,
    antennas: usize,
    l: usize,
    k: usize,
    exponent: TExponent,
) -> Result<BoundInputs> {
    let t = effective_t(stats, l, k, exponent)?;
    BoundInputs::new(antennas, stats.users(), stats.sigma2(l), t, stats.hat_beta(l, l, k))
}

fn log2_one_plus(x: Float) -> f64 {
    let y: Float = x + 1u32;
    y.log2().to_f64()
}

/// Upper bound: Jensen on the concave log, log₂(1 + E[I₁] + E[I₂]).
pub fn rate_upper_bound(inputs: &BoundInputs, form: BoundForm) -> Result<f64> {
    let (n, k) = (inputs.antennas as f64, inputs.users as f64);
    let s2 = inputs.sigma2;
    let interference_sum = if inputs.users >= 2 {
        // (K−1)·E[1/(λ+σ²)]
        inputs.density()?.inverse_shift_sum(s2)
    } else {
        Float::with_val(64, 0)
    };
    let prec = interference_sum.prec();
    let value = match form {
        BoundForm::Corrected => {
            let noise = (n - k + 1.0) / s2;
            (interference_sum + noise) * inputs.signal
        }
        BoundForm::Printed => interference_sum + (n - k - 1.0) / s2,
    };
    debug_assert!(value.prec() >= prec);
    Ok(log2_one_plus(value))
}

/// Lower bound: log₂(1 + exp(E ln(I₁+I₂))) with I₁+I₂ ≥ 2√(I₁I₂) and the
/// independence of the two terms.
pub fn rate_lower_bound(inputs: &BoundInputs, form: BoundForm) -> Result<f64> {
    if inputs.users < 2 {
        return Err(Error::Domain("the lower bound needs K ≥ 2".into()));
    }
    let density = inputs.density()?;
    let (n, k) = (inputs.antennas, inputs.users);
    let s2 = inputs.sigma2;
    match form {
        BoundForm::Corrected => {
            // E ln I₁ ≥ ln a + ln(K−1) − E ln(λ+σ²)   (Jensen over the K−1 terms)
            // E ln I₂ = ln a + ψ(N−K+1) − ln σ²
            // bound: 1 + 2·exp((E ln I₁ + E ln I₂)/2)
            let a = inputs.signal;
            if a == 0.0 {
                return Ok(0.0);
            }
            let mean_log = density.log_shift_mp(s2);
            let prec = mean_log.prec();
            let mut expo = Float::with_val(prec, -EULER_GAMMA); // ψ(1)
            expo += digamma_int((n - k + 1) as u64) - s2.ln();
            expo -= &mean_log;
            expo /= 2u32;
            let scale = 2.0 * a * ((k - 1) as f64).sqrt();
            Ok(log2_one_plus(expo.exp() * scale))
        }
        BoundForm::Printed => {
            let sum = density.printed_log_sum(s2);
            let prec = sum.prec();
            let expo = Float::with_val(prec, -2.0 * EULER_GAMMA) - sum;
            let value = expo.exp() * (2 * (k - 1)) as u32;
            Ok(log2_one_plus(value))
        }
    }
}

/// Both bounds for every user of cell l, summed (bits/channel-use).
pub fn sum_rate_bounds(
    stats: &EstimationStats,
    antennas: usize,
    l: usize,
    form: BoundForm,
    exponent: TExponent,
) -> Result<(f64, f64)> {
    let mut lower = 0.0;
    let mut upper = 0.0;
    for k in 0..stats.users() {
        let inputs = bound_inputs(stats, antennas, l, k, exponent)?;
        upper += rate_upper_bound(&inputs, form)?;
        lower += if stats.users() >= 2 {
            rate_lower_bound(&inputs, form)?
        } else {
            // A single user has no interference term; the Gamma law alone gives
            // E ln I₂ exactly.
            let e = digamma_int(antennas as u64) - inputs.sigma2.ln();
            let v = Float::with_val(64, inputs.signal * e.exp());
            log2_one_plus(v)
        };
    }
    Ok((lower, upper))
}
