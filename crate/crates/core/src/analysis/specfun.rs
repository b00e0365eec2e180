//! Double-precision special functions: J₀, Ei and the generalized
//! exponential integrals Eₙ.

use std::f64::consts::{FRAC_PI_4, PI};

use crate::error::{Error, Result};

/// Euler–Mascheroni constant.
pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

const EPS: f64 = 1e-17;
const MAX_TERMS: usize = 10_000;

/// Bessel function of the first kind, order zero.
///
/// Power series for |x| ≤ 4, Miller's backward recurrence up to 25 and the
/// Hankel asymptotic expansion beyond.
pub fn bessel_j0(x: f64) -> f64 {
    let ax = x.abs();
    if ax <= 4.0 {
        j0_series(ax)
    } else if ax <= 25.0 {
        j0_miller(ax)
    } else {
        j0_asymptotic(ax)
    }
}

fn j0_series(x: f64) -> f64 {
    let q = -0.25 * x * x;
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..200 {
        let kf = k as f64;
        term *= q / (kf * kf);
        sum += term;
        if term.abs() < EPS * sum.abs() {
            break;
        }
    }
    sum
}

fn j0_miller(x: f64) -> f64 {
    // Start well above x so the minimal solution dominates; even index.
    let mut start = (x + 12.0 * x.cbrt() + 30.0) as usize;
    start += start % 2;
    let mut j_next = 0.0; // J_{k+1}
    let mut j_k = 1e-300; // J_k, arbitrary scale
    let mut norm = 0.0; // 2 Σ J_{2k}, k ≥ 1
    let mut j0 = 0.0;
    for k in (1..=start).rev() {
        let j_prev = 2.0 * k as f64 / x * j_k - j_next;
        j_next = j_k;
        j_k = j_prev;
        // j_k now holds J_{k-1}
        if (k - 1) % 2 == 0 && k > 1 {
            norm += 2.0 * j_k;
        }
        if k == 1 {
            j0 = j_k;
        }
        if j_k.abs() > 1e250 {
            j_k *= 1e-250;
            j_next *= 1e-250;
            norm *= 1e-250;
        }
    }
    j0 / (j0 + norm)
}

fn j0_asymptotic(x: f64) -> f64 {
    // a_k = Π_{m=1..k} (2m-1)² / (k! 8^k)
    let mut p = 1.0;
    let mut q = 0.0;
    let mut a = 1.0;
    let mut prev = f64::INFINITY;
    for k in 1..60 {
        let kf = k as f64;
        a *= (2.0 * kf - 1.0).powi(2) / (8.0 * kf * x);
        if a >= prev {
            break;
        }
        prev = a;
        // k odd -> Q, k even -> P, alternating signs within each.
        match k % 4 {
            1 => q += a,
            2 => p -= a,
            3 => q -= a,
            _ => p += a,
        }
        if a < EPS {
            break;
        }
    }
    let phase = x - FRAC_PI_4;
    (2.0 / (PI * x)).sqrt() * (p * phase.cos() + q * phase.sin())
}

/// Exponential integral Ei(x) = −∫_{−x}^∞ e^{−t}/t dt, for x < 0.
///
/// Only negative arguments are supported; there Ei(x) = −E₁(−x).
pub fn expint_ei(x: f64) -> Result<f64> {
    if !(x < 0.0) || !x.is_finite() {
        return Err(Error::Domain(format!("Ei requires a finite x < 0, got {x}")));
    }
    Ok(-expint_en(1, -x)?)
}

/// Generalized exponential integral Eₙ(z) = ∫₁^∞ e^{−zt}/tⁿ dt for n ≥ 1, z > 0.
///
/// Series (with the digamma correction) for z ≤ 1, modified-Lentz continued
/// fraction above.
pub fn expint_en(n: u32, z: f64) -> Result<f64> {
    if n == 0 {
        return Err(Error::Domain("Eₙ requires n ≥ 1".into()));
    }
    if !(z > 0.0) || !z.is_finite() {
        return Err(Error::Domain(format!("Eₙ requires a finite z > 0, got {z}")));
    }
    if z > 1.0 {
        en_continued_fraction(n, z)
    } else {
        en_series(n, z)
    }
}

fn en_continued_fraction(n: u32, z: f64) -> Result<f64> {
    const TINY: f64 = 1e-300;
    let nf = n as f64;
    let mut b = z + nf;
    let mut c = 1.0 / TINY;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..MAX_TERMS {
        let an = -(i as f64) * (nf - 1.0 + i as f64);
        b += 2.0;
        d = 1.0 / (an * d + b);
        c = b + an / c;
        let delta = c * d;
        h *= delta;
        if (delta - 1.0).abs() < 1e-16 {
            return Ok(h * (-z).exp());
        }
    }
    Err(Error::Convergence {
        what: "Eₙ continued fraction",
        iterations: MAX_TERMS,
        residual: f64::NAN,
    })
}

fn en_series(n: u32, z: f64) -> Result<f64> {
    let nm1 = n as i64 - 1;
    let mut ans = if nm1 != 0 {
        1.0 / nm1 as f64
    } else {
        -z.ln() - EULER_GAMMA
    };
    let mut fact = 1.0;
    for i in 1..MAX_TERMS as i64 {
        fact *= -z / i as f64;
        let delta = if i != nm1 {
            -fact / (i - nm1) as f64
        } else {
            fact * (-z.ln() + digamma_int(n as u64))
        };
        ans += delta;
        if delta.abs() < ans.abs() * 1e-17 {
            return Ok(ans);
        }
    }
    Err(Error::Convergence {
        what: "Eₙ series",
        iterations: MAX_TERMS,
        residual: f64::NAN,
    })
}

/// ψ(n) = −γ + Σ_{m<n} 1/m for positive integers.
pub fn digamma_int(n: u64) -> f64 {
    assert!(n >= 1, "digamma_int needs n ≥ 1");
    -EULER_GAMMA + (1..n).map(|m| 1.0 / m as f64).sum::<f64>()
}
