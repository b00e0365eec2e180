//! Unordered-eigenvalue statistics of the semi-correlated complex Wishart
//! matrix `S = H diag(t) Hᴴ` (H is N×(K−1) with i.i.d. CN(0,1) entries).
//!
//! The density and its closed-form moments are sums over the cofactors of the
//! Vandermonde-type matrix `{V}_{ij} = t_i^{j}` divided by `Π_{i<j}(t_j − t_i)`.
//! Those sums cancel catastrophically when the `t` are close (and the
//! alternating Ei/factorial expansions cancel when σ²/t is large), so all of
//! it is evaluated in MPFR with a working precision sized from the inputs.

use log::{debug, warn};
use rug::ops::Pow;
use rug::Float;
use std::sync::atomic::{AtomicBool, Ordering};

use crate::error::{Error, Result};

/// Pairwise relative gap below which two `t` values count as tied.
pub const TIE_THRESHOLD: f64 = 1e-8;
/// Multiplicative step applied to the m-th member of a tie group.
pub const TIE_JITTER: f64 = 1e-7;

static JITTER_WARNED: AtomicBool = AtomicBool::new(false);

/// Inputs shared by the closed-form rate bounds for one user.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundInputs {
    pub antennas: usize,
    pub users: usize,
    pub sigma2: f64,
    /// Effective per-column variances of S with the user's own column removed.
    pub t: Vec<f64>,
    /// Per-antenna power of the user's own estimated channel (β̂_llk).
    pub signal: f64,
    /// Whether tie-breaking jitter was applied to `t`.
    pub jittered: bool,
}

impl BoundInputs {
    pub fn new(antennas: usize, users: usize, sigma2: f64, t: Vec<f64>, signal: f64) -> Result<Self> {
        if users == 0 || antennas <= users {
            return Err(Error::Domain(format!(
                "bounds need N > K ≥ 1, got N={antennas}, K={users}"
            )));
        }
        if !(sigma2 > 0.0) || !sigma2.is_finite() {
            return Err(Error::Domain(format!("σ² must be positive and finite, got {sigma2}")));
        }
        if t.len() != users - 1 {
            return Err(Error::Domain(format!(
                "expected {} effective variances, got {}",
                users - 1,
                t.len()
            )));
        }
        if let Some(bad) = t.iter().find(|v| !(**v > 0.0) || !v.is_finite()) {
            return Err(Error::Domain(format!("effective variances must be positive, got {bad}")));
        }
        if !(signal >= 0.0) || !signal.is_finite() {
            return Err(Error::Domain(format!("signal power must be nonnegative, got {signal}")));
        }
        let mut t = t;
        let jittered = apply_tie_jitter(&mut t);
        if jittered {
            if !JITTER_WARNED.swap(true, Ordering::Relaxed) {
                warn!("tied effective variances {t:?}: applied multiplicative jitter of {TIE_JITTER:e}");
            } else {
                debug!("tie jitter applied to {t:?}");
            }
        }
        Ok(BoundInputs {
            antennas,
            users,
            sigma2,
            t,
            signal,
            jittered,
        })
    }

    pub fn density(&self) -> Result<EigenDensity> {
        EigenDensity::new(self.antennas, self.users, &self.t)
    }
}

/// Separates (near-)duplicate entries: the m-th entry tied with earlier ones
/// is multiplied by `1 + m·TIE_JITTER`. Returns whether anything moved.
pub fn apply_tie_jitter(t: &mut [f64]) -> bool {
    let original = t.to_vec();
    let mut moved = false;
    for i in 0..t.len() {
        let multiplicity = (0..i)
            .filter(|&j| relative_gap(original[i], original[j]) < TIE_THRESHOLD)
            .count();
        if multiplicity > 0 {
            t[i] = original[i] * (1.0 + multiplicity as f64 * TIE_JITTER);
            moved = true;
        }
    }
    moved
}

fn relative_gap(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs())
}

/// Bits lost to cancellation in the Vandermonde-weighted sums.
fn gap_bits(t: &[f64]) -> u32 {
    let m = t.len();
    if m < 2 {
        return 0;
    }
    let t_max = t.iter().cloned().fold(0.0, f64::max);
    let mut min_gap = f64::INFINITY;
    for i in 0..m {
        for j in 0..i {
            min_gap = min_gap.min((t[i] - t[j]).abs());
        }
    }
    let per_pair = (t_max / min_gap).log2().max(0.0);
    let pairs = (m * (m - 1) / 2) as f64;
    (pairs * per_pair).ceil() as u32
}

/// Bits lost in the alternating Ei/factorial expansions of degree ≤ `q`
/// at argument `b` (also bounds the forward Eₙ recurrence amplification).
fn alternating_bits(q: usize, b: f64) -> u32 {
    if b <= 1.0 {
        return 16;
    }
    let ln_fact: f64 = (1..=q).map(|i| (i as f64).ln()).sum();
    let bits = (q as f64 * b.ln() - ln_fact) / std::f64::consts::LN_2;
    bits.max(0.0).ceil() as u32 + 16
}

fn round_prec(bits: u32) -> u32 {
    bits.div_ceil(64) * 64
}

/// Determinant by Gaussian elimination with partial pivoting.
fn mp_det(mut a: Vec<Vec<Float>>, prec: u32) -> Float {
    let n = a.len();
    let mut det = Float::with_val(prec, 1);
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| {
                a[i][col]
                    .clone()
                    .abs()
                    .partial_cmp(&a[j][col].clone().abs())
                    .unwrap()
            })
            .unwrap();
        if a[pivot][col].is_zero() {
            return Float::with_val(prec, 0);
        }
        if pivot != col {
            a.swap(pivot, col);
            det = -det;
        }
        let p = a[col][col].clone();
        det *= &p;
        let (upper, lower) = a.split_at_mut(col + 1);
        let pivot_row = &upper[col];
        for r in lower.iter_mut() {
            let f = Float::with_val(prec, &r[col] / &p);
            for (x, y) in r[col..].iter_mut().zip(&pivot_row[col..]) {
                *x -= Float::with_val(prec, &f * y);
            }
        }
    }
    det
}

fn vandermonde_mp(t: &[Float], prec: u32) -> Vec<Vec<Float>> {
    t.iter()
        .map(|ti| {
            (0..t.len())
                .map(|j| Float::with_val(prec, Pow::pow(ti, j as u32)))
                .collect()
        })
        .collect()
}

/// Signed (v, u) cofactor of the m×m matrix with rows `(1, t_v, t_v², …)`.
fn cofactor_mp(vand: &[Vec<Float>], v: usize, u: usize, prec: u32) -> Float {
    let m = vand.len();
    if m == 1 {
        return Float::with_val(prec, 1);
    }
    let minor: Vec<Vec<Float>> = (0..m)
        .filter(|&r| r != v)
        .map(|r| (0..m).filter(|&c| c != u).map(|c| vand[r][c].clone()).collect())
        .collect();
    let d = mp_det(minor, prec);
    if (v + u).is_multiple_of(2) {
        d
    } else {
        -d
    }
}

/// Signed (v, u) cofactor (zero-based) of the Vandermonde-type matrix
/// `{V}_{ij} = t_i^{j}`.
pub fn vandermonde_cofactor(t: &[f64], v: usize, u: usize) -> Result<f64> {
    let m = t.len();
    if v >= m || u >= m {
        return Err(Error::Index {
            what: "cofactor",
            index: v.max(u),
            limit: m,
        });
    }
    let prec = round_prec(128 + gap_bits(t));
    let tm: Vec<Float> = t.iter().map(|&x| Float::with_val(prec, x)).collect();
    let vand = vandermonde_mp(&tm, prec);
    Ok(cofactor_mp(&vand, v, u, prec).to_f64())
}

/// Unordered eigenvalue law of `H diag(t) Hᴴ` restricted to its K−1
/// nonzero eigenvalues (N antennas, K users).
#[derive(Clone, Debug)]
pub struct EigenDensity {
    antennas: usize,
    users: usize,
    t: Vec<f64>,
    base_prec: u32,
    t_mp: Vec<Float>,
    cofactors: Vec<Vec<Float>>,
    vandermonde_det: Float,
}

impl EigenDensity {
    pub fn new(antennas: usize, users: usize, t: &[f64]) -> Result<Self> {
        Self::with_extra_precision(antennas, users, t, 0)
    }

    /// As [`EigenDensity::new`] with `extra` additional working bits.
    pub fn with_extra_precision(antennas: usize, users: usize, t: &[f64], extra: u32) -> Result<Self> {
        if users < 2 || antennas <= users {
            return Err(Error::Domain(format!(
                "eigenvalue density needs N > K ≥ 2, got N={antennas}, K={users}"
            )));
        }
        if t.len() != users - 1 {
            return Err(Error::Domain(format!("expected {} variances, got {}", users - 1, t.len())));
        }
        let gap = gap_bits(t);
        let m = t.len();
        for i in 0..m {
            for j in 0..i {
                if t[i] == t[j] {
                    return Err(Error::Domain(format!(
                        "effective variances must be distinct (t[{j}] = t[{i}] = {})",
                        t[i]
                    )));
                }
            }
        }
        let base_prec = round_prec(160 + gap + extra);
        let t_mp: Vec<Float> = t.iter().map(|&x| Float::with_val(base_prec, x)).collect();
        let vand = vandermonde_mp(&t_mp, base_prec);
        let cofactors = (0..m)
            .map(|v| (0..m).map(|u| cofactor_mp(&vand, v, u, base_prec)).collect())
            .collect();
        let mut vandermonde_det = Float::with_val(base_prec, 1);
        for j in 0..m {
            for i in 0..j {
                vandermonde_det *= Float::with_val(base_prec, &t_mp[j] - &t_mp[i]);
            }
        }
        Ok(EigenDensity {
            antennas,
            users,
            t: t.to_vec(),
            base_prec,
            t_mp,
            cofactors,
            vandermonde_det,
        })
    }

    pub fn t(&self) -> &[f64] {
        &self.t
    }

    /// Number of nonzero eigenvalues, K − 1.
    pub fn rank(&self) -> usize {
        self.t.len()
    }

    /// Exponent of λ carried by cofactor column `u` (zero-based): N − K + u + 1.
    fn degree(&self, u: usize) -> usize {
        self.antennas - self.users + u + 1
    }

    fn max_degree(&self) -> usize {
        self.degree(self.rank() - 1)
    }

    fn prec_for_shift(&self, s: f64) -> u32 {
        let t_min = self.t.iter().cloned().fold(f64::INFINITY, f64::min);
        round_prec(self.base_prec + alternating_bits(self.max_degree(), s / t_min))
    }

    fn lift(&self, x: &Float, prec: u32) -> Float {
        Float::with_val(prec, x)
    }

    fn factorials(&self, prec: u32) -> Vec<Float> {
        let mut out = Vec::with_capacity(self.antennas + 2);
        let mut f = Float::with_val(prec, 1);
        out.push(f.clone());
        for i in 1..=self.antennas + 1 {
            f *= i as u32;
            out.push(f.clone());
        }
        out
    }

    /// t_v^{K−N−2}
    fn t_scale(&self, v: usize, prec: u32) -> Float {
        let e = self.users as i32 - self.antennas as i32 - 2;
        Float::with_val(prec, self.lift(&self.t_mp[v], prec).pow(e))
    }

    /// Density of one unordered nonzero eigenvalue at `lambda ≥ 0`.
    pub fn pdf(&self, lambda: f64) -> f64 {
        if lambda < 0.0 {
            return 0.0;
        }
        let prec = self.base_prec;
        let fact = self.factorials(prec);
        let lam = Float::with_val(prec, lambda);
        let mut acc = Float::with_val(prec, 0);
        for v in 0..self.rank() {
            let tv = &self.t_mp[v];
            let decay = (-Float::with_val(prec, &lam / tv)).exp();
            let mut inner = Float::with_val(prec, 0);
            for u in 0..self.rank() {
                let q = self.degree(u) as u32;
                let mut term = Float::with_val(prec, Pow::pow(&lam, q));
                term *= &self.cofactors[v][u];
                term /= &fact[q as usize];
                inner += term;
            }
            acc += inner * decay * self.t_scale(v, prec);
        }
        acc /= &self.vandermonde_det;
        acc /= self.rank() as u32;
        acc.to_f64()
    }

    /// Σ_v Σ_u D_vu/Γ(q+1) · t_v^{K−N−2} · ∫₀^∞ λ^q e^{−λ/t_v}/(λ+s) dλ over the
    /// Vandermonde product, with the integral in its Ei/factorial closed form.
    /// Equals (K−1)·E[1/(λ+s)].
    pub(crate) fn inverse_shift_sum(&self, s: f64) -> Float {
        let prec = self.prec_for_shift(s);
        let fact = self.factorials(prec);
        let s_mp = Float::with_val(prec, s);
        let mut acc = Float::with_val(prec, 0);
        for v in 0..self.rank() {
            let tv = self.lift(&self.t_mp[v], prec);
            let b = Float::with_val(prec, &s_mp / &tv);
            let ei = Float::with_val(prec, -&b).eint();
            let e_ei = Float::with_val(prec, b.exp_ref()) * ei;
            let scale = self.t_scale(v, prec);
            for u in 0..self.rank() {
                let q = self.degree(u); // N − K + u in one-based u
                let mut integral = Float::with_val(prec, Pow::pow(&s_mp, q as u32)) * &e_ei;
                if q.is_multiple_of(2) {
                    // (−1)^{q−1} = −1 for even q
                    integral = -integral;
                }
                for r in 1..=q {
                    let mut term = Float::with_val(prec, &fact[r - 1]);
                    term *= Float::with_val(prec, Pow::pow(&s_mp, (q - r) as u32));
                    term *= Float::with_val(prec, Pow::pow(&tv, r as u32));
                    if (q - r) % 2 == 1 {
                        integral -= term;
                    } else {
                        integral += term;
                    }
                }
                let mut term = integral * &scale;
                term *= self.lift(&self.cofactors[v][u], prec);
                term /= &fact[q];
                acc += term;
            }
        }
        acc / self.lift(&self.vandermonde_det, prec)
    }

    /// E[1/(λ + s)] for the unordered eigenvalue.
    pub fn mean_inverse_shift(&self, s: f64) -> f64 {
        (self.inverse_shift_sum(s) / self.rank() as u32).to_f64()
    }

    /// e^b Σ_{r=0}^{q} E_{r+1}(b) for q = 0..=q_max, b = s/t.
    fn exp_en_prefix(b: &Float, q_max: usize, prec: u32) -> Vec<Float> {
        let e_minus = Float::with_val(prec, -b).exp();
        let e_plus = Float::with_val(prec, b.exp_ref());
        let mut en = -Float::with_val(prec, -b).eint(); // E₁(b)
        let mut sum = Float::with_val(prec, 0);
        let mut out = Vec::with_capacity(q_max + 1);
        for n in 1..=q_max + 1 {
            sum += &en;
            out.push(Float::with_val(prec, &sum * &e_plus));
            // E_{n+1} = (e^{−b} − b·E_n)/n
            let next = (Float::with_val(prec, &e_minus) - Float::with_val(prec, b * &en)) / n as u32;
            en = next;
        }
        out
    }

    /// E[ln(λ + s)] for the unordered eigenvalue, via
    /// ∫₀^∞ ln(λ+s) λ^q e^{−λ/t} dλ = q!·t^{q+1}·(ln s + e^b Σ_{r=0}^{q} E_{r+1}(b)).
    pub(crate) fn log_shift_mp(&self, s: f64) -> Float {
        let prec = self.prec_for_shift(s);
        let s_mp = Float::with_val(prec, s);
        let ln_s = Float::with_val(prec, s_mp.ln_ref());
        let mut acc = Float::with_val(prec, 0);
        for v in 0..self.rank() {
            let tv = self.lift(&self.t_mp[v], prec);
            let b = Float::with_val(prec, &s_mp / &tv);
            let prefix = Self::exp_en_prefix(&b, self.max_degree(), prec);
            for u in 0..self.rank() {
                let q = self.degree(u);
                let bracket = Float::with_val(prec, &ln_s + &prefix[q]);
                let mut term = Float::with_val(prec, Pow::pow(&tv, u as u32)) * bracket;
                term *= self.lift(&self.cofactors[v][u], prec);
                acc += term;
            }
        }
        acc /= self.lift(&self.vandermonde_det, prec);
        acc / self.rank() as u32
    }

    pub fn mean_log_shift(&self, s: f64) -> f64 {
        self.log_shift_mp(s).to_f64()
    }

    /// The uncorrected lower-bound exponent's double sum:
    /// 1/(2Π) Σ_v Σ_u D_vu t_v^{K−N−2} q!/Γ(q+1) (ln s·b^{q+1}e^b + Σ_{r=0}^{q} E_{r+1}(b)).
    pub(crate) fn printed_log_sum(&self, s: f64) -> Float {
        let prec = self.prec_for_shift(s);
        let s_mp = Float::with_val(prec, s);
        let ln_s = Float::with_val(prec, s_mp.ln_ref());
        let mut acc = Float::with_val(prec, 0);
        for v in 0..self.rank() {
            let tv = self.lift(&self.t_mp[v], prec);
            let b = Float::with_val(prec, &s_mp / &tv);
            let e_b = Float::with_val(prec, b.exp_ref());
            let e_minus = Float::with_val(prec, -&b).exp();
            // Σ_{r=0}^{q} E_{r+1}(b) without the e^b factor
            let prefix: Vec<Float> = Self::exp_en_prefix(&b, self.max_degree(), prec)
                .into_iter()
                .map(|x| x * &e_minus)
                .collect();
            let scale = self.t_scale(v, prec);
            for u in 0..self.rank() {
                let q = self.degree(u);
                let mut first = Float::with_val(prec, Pow::pow(&b, (q + 1) as u32));
                first *= &e_b;
                first *= &ln_s;
                let mut term = first + &prefix[q];
                term *= &scale;
                term *= self.lift(&self.cofactors[v][u], prec);
                acc += term;
            }
        }
        acc / self.lift(&self.vandermonde_det, prec) / 2u32
    }
}

/// Density of one unordered nonzero eigenvalue of `S` at `lambda`.
pub fn eigen_pdf(lambda: f64, inputs: &BoundInputs) -> Result<f64> {
    Ok(inputs.density()?.pdf(lambda))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cofactors_by_hand() {
        assert_eq!(vandermonde_cofactor(&[3.0], 0, 0).unwrap(), 1.0);
        // [[1,1],[1,2]]
        assert_eq!(vandermonde_cofactor(&[1.0, 2.0], 0, 0).unwrap(), 2.0);
        assert_eq!(vandermonde_cofactor(&[1.0, 2.0], 0, 1).unwrap(), -1.0);
        assert!(vandermonde_cofactor(&[1.0, 2.0], 2, 0).is_err());
    }

    #[test]
    fn laplace_expansion_gives_determinant() {
        let t = [0.3, 1.1, 2.0, 4.5];
        let det: f64 = {
            let mut d = 1.0;
            for j in 0..t.len() {
                for i in 0..j {
                    d *= t[j] - t[i];
                }
            }
            d
        };
        for v in 0..t.len() {
            let s: f64 = (0..t.len())
                .map(|u| vandermonde_cofactor(&t, v, u).unwrap() * t[v].powi(u as i32))
                .sum();
            assert!((s - det).abs() < 1e-12 * det.abs(), "row {v}: {s} vs {det}");
        }
    }

    #[test]
    fn jitter_separates_ties() {
        let mut t = vec![0.5, 0.5, 0.7, 0.5];
        assert!(apply_tie_jitter(&mut t));
        assert_eq!(t[0], 0.5);
        assert_eq!(t[1], 0.5 * (1.0 + 1e-7));
        assert_eq!(t[2], 0.7);
        assert_eq!(t[3], 0.5 * (1.0 + 2e-7));
        let mut distinct = vec![0.1, 0.2, 0.3];
        assert!(!apply_tie_jitter(&mut distinct));
    }

    #[test]
    fn single_variance_reduces_to_gamma() {
        // K − 1 = 1: λ^{N−1} e^{−λ/t} / (Γ(N) t^N)
        let (n, t) = (6usize, 0.8);
        let d = EigenDensity::new(n, 2, &[t]).unwrap();
        for &lam in &[0.1f64, 1.0, 3.0, 7.5] {
            let gamma_n: f64 = (1..n).map(|i| i as f64).product();
            let expect = lam.powi(n as i32 - 1) * (-lam / t).exp() / (gamma_n * t.powi(n as i32));
            assert!((d.pdf(lam) - expect).abs() < 1e-14 * expect.max(1e-300));
        }
    }

    #[test]
    fn extra_precision_does_not_move_tied_results() {
        let mut t = vec![0.875; 9];
        apply_tie_jitter(&mut t);
        let a = EigenDensity::new(50, 10, &t).unwrap();
        let b = EigenDensity::with_extra_precision(50, 10, &t, 256).unwrap();
        for &s in &[0.5, 78.0, 5000.0] {
            let (x, y) = (a.mean_inverse_shift(s), b.mean_inverse_shift(s));
            assert!((x - y).abs() < 1e-14 * y.abs(), "E[1/(λ+s)] at s={s}: {x} vs {y}");
            let (x, y) = (a.mean_log_shift(s), b.mean_log_shift(s));
            assert!((x - y).abs() < 1e-14 * y.abs(), "E[ln(λ+s)] at s={s}: {x} vs {y}");
        }
        let (x, y) = (a.pdf(40.0), b.pdf(40.0));
        assert!((x - y).abs() < 1e-14 * y);
    }

    #[test]
    fn rejects_ties_without_jitter() {
        assert!(EigenDensity::new(10, 3, &[1.0, 1.0]).is_err());
        assert!(BoundInputs::new(10, 3, 1.0, vec![1.0, 1.0], 0.5).unwrap().jittered);
    }
}
