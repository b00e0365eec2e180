//! Linear combiners (OLR, MMSE, MRC, ZF) and the per-user uplink SINR.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::channel::ChannelDraw;
use crate::error::{Error, Result};
use crate::linalg::{cholesky, hermitian_eigen, norm_sqr, CMatrix, CVector, C64};
use crate::scenario::EstimationStats;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReceiverKind {
    Olr,
    Mmse,
    Mrc,
    Zf,
}

impl ReceiverKind {
    pub const ALL: [ReceiverKind; 4] = [ReceiverKind::Olr, ReceiverKind::Mmse, ReceiverKind::Mrc, ReceiverKind::Zf];

    pub fn name(self) -> &'static str {
        match self {
            ReceiverKind::Olr => "olr",
            ReceiverKind::Mmse => "mmse",
            ReceiverKind::Mrc => "mrc",
            ReceiverKind::Zf => "zf",
        }
    }
}

impl fmt::Display for ReceiverKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ReceiverKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ReceiverKind::ALL
            .into_iter()
            .find(|k| k.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::Config(format!("unknown receiver `{s}` (expected olr, mmse, mrc or zf)")))
    }
}

/// How the copies of user k's own channel that pilot contamination plants
/// in the other cells' estimates are counted.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SinrModel {
    /// Every term of the received signal exactly: the contaminated copies
    /// α√p·Ĝ_{li}(:,k)x_{ik}, i ≠ l, are interference.
    Full,
    /// The interference Gram matrix Ξ_k with column k removed from every
    /// cell; SINR = |wᴴĝ|²/(wᴴΞ_k w). This is the quantity the eigen split,
    /// the bounds and the deterministic equivalent describe.
    #[default]
    ColumnRemoved,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CombinerSet {
    pub kind: ReceiverKind,
    /// Column k combines for user k.
    pub w: CMatrix,
}

/// Powers at the detector output for one user; `sinr()` is their ratio.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct SinrBreakdown {
    pub signal: f64,
    pub intra_cell: f64,
    pub aging_estimation: f64,
    pub inter_cell: f64,
    pub pilot_contamination: f64,
    pub noise: f64,
}

impl SinrBreakdown {
    pub fn interference(&self) -> f64 {
        self.intra_cell + self.aging_estimation + self.inter_cell + self.pilot_contamination + self.noise
    }

    pub fn sinr(&self) -> f64 {
        self.signal / self.interference()
    }
}

/// Σ_i R²_{lij} for every user j of cell l.
fn ratio_energy(stats: &EstimationStats, l: usize) -> Vec<f64> {
    let lsf = stats.lsf();
    (0..lsf.users())
        .map(|j| (0..lsf.cells()).map(|i| lsf.ratio(l, i, j).powi(2)).sum())
        .collect()
}

fn check_user(draw: &ChannelDraw, k: usize) -> Result<()> {
    if k >= draw.users() {
        return Err(Error::Index {
            what: "user",
            index: k,
            limit: draw.users(),
        });
    }
    Ok(())
}

/// S = Σ_i Ĝ_{li[k]}Ĝᴴ_{li[k]} = Ĝ_{ll[k]}·diag(Σ_i R²_{li})·Ĝᴴ_{ll[k]}.
pub fn interference_gram(draw: &ChannelDraw, stats: &EstimationStats, k: usize) -> Result<CMatrix> {
    check_user(draw, k)?;
    let energy = ratio_energy(stats, draw.bs);
    let n = draw.antennas();
    let others: Vec<usize> = (0..draw.users()).filter(|&j| j != k).collect();
    let mut a = CMatrix::zeros(n, others.len());
    for (c, &j) in others.iter().enumerate() {
        a.set_column(c, &(draw.g_hat.column(j) * C64::from(energy[j].sqrt())));
    }
    Ok(&a * a.adjoint())
}

/// Ξ_k = S + σ²I.
pub fn interference_matrix(draw: &ChannelDraw, stats: &EstimationStats, k: usize) -> Result<CMatrix> {
    let mut xi = interference_gram(draw, stats, k)?;
    let s2 = stats.sigma2(draw.bs);
    for i in 0..xi.nrows() {
        xi[(i, i)] += s2;
    }
    Ok(xi)
}

/// w = Ξ_k⁻¹ ĝ_{llk}.
pub fn olr_combiner(draw: &ChannelDraw, stats: &EstimationStats, k: usize) -> Result<CVector> {
    let xi = interference_matrix(draw, stats, k)?;
    Ok(cholesky(xi)?.solve(&draw.column(k)))
}

/// All K OLR columns from a single factorization of the full Gram matrix
/// Ξ = Ξ_k + r_k ĝ_kĝ_kᴴ (r_k = Σ_i R²_{lik}). By Sherman–Morrison
/// Ξ_k⁻¹ĝ_k = Ξ⁻¹ĝ_k / (1 − r_k ĝ_kᴴΞ⁻¹ĝ_k), so the columns are exactly those
/// of [`olr_combiner`].
pub fn olr_combiners(draw: &ChannelDraw, stats: &EstimationStats) -> Result<CMatrix> {
    let energy = ratio_energy(stats, draw.bs);
    let mut a = draw.g_hat.clone();
    for (j, mut col) in a.column_iter_mut().enumerate() {
        col *= C64::from(energy[j].sqrt());
    }
    let mut xi = &a * a.adjoint();
    let s2 = stats.sigma2(draw.bs);
    for i in 0..xi.nrows() {
        xi[(i, i)] += s2;
    }
    let mut w = cholesky(xi)?.solve(&draw.g_hat);
    for (k, mut col) in w.column_iter_mut().enumerate() {
        let quad = draw.g_hat.column(k).dotc(&col).re;
        let denom = 1.0 - energy[k] * quad;
        if !(denom > 0.0) {
            return Err(Error::Singular(format!("rank-one downdate for user {k} lost definiteness")));
        }
        col /= C64::from(denom);
    }
    Ok(w)
}

/// z_l = Σ_k(β_{llk} − α²β̂_{llk}) + Σ_{i≠l}Σ_k β_{lik}.
pub fn mmse_noise_load(stats: &EstimationStats, l: usize) -> f64 {
    let lsf = stats.lsf();
    let a2 = stats.alpha * stats.alpha;
    let mut z = 0.0;
    for i in 0..lsf.cells() {
        for k in 0..lsf.users() {
            z += if i == l {
                lsf.beta(l, l, k) - a2 * stats.hat_beta(l, l, k)
            } else {
                lsf.beta(l, i, k)
            };
        }
    }
    z
}

/// All K MMSE columns α(Ĝ_{ll}Ĝᴴ_{ll} + (z_l + 1/p)/α²·I)⁻¹Ĝ_{ll} from one factorization.
pub fn mmse_combiners(draw: &ChannelDraw, stats: &EstimationStats) -> Result<CMatrix> {
    let alpha = stats.alpha;
    let reg = (mmse_noise_load(stats, draw.bs) + 1.0 / stats.power) / (alpha * alpha);
    let mut a = &draw.g_hat * draw.g_hat.adjoint();
    for i in 0..a.nrows() {
        a[(i, i)] += reg;
    }
    Ok(cholesky(a)?.solve(&draw.g_hat) * C64::from(alpha))
}

pub fn mmse_combiner(draw: &ChannelDraw, stats: &EstimationStats, k: usize) -> Result<CVector> {
    check_user(draw, k)?;
    Ok(mmse_combiners(draw, stats)?.column(k).into_owned())
}

/// w = α·ĝ_{llk}.
pub fn mrc_combiner(draw: &ChannelDraw, alpha: f64, k: usize) -> Result<CVector> {
    check_user(draw, k)?;
    Ok(draw.column(k) * C64::from(alpha))
}

/// All K columns of Ĝ_{ll}(Ĝᴴ_{ll}Ĝ_{ll})⁻¹.
pub fn zf_combiners(draw: &ChannelDraw) -> Result<CMatrix> {
    let gram = draw.g_hat.ad_mul(&draw.g_hat);
    let chol = cholesky(gram).map_err(|e| Error::Singular(format!("ZF needs full column rank: {e}")))?;
    Ok(chol.solve(&draw.g_hat.adjoint()).adjoint())
}

pub fn zf_combiner(draw: &ChannelDraw, k: usize) -> Result<CVector> {
    check_user(draw, k)?;
    Ok(zf_combiners(draw)?.column(k).into_owned())
}

pub fn combiners(kind: ReceiverKind, draw: &ChannelDraw, stats: &EstimationStats) -> Result<CombinerSet> {
    let w = match kind {
        ReceiverKind::Olr => olr_combiners(draw, stats)?,
        ReceiverKind::Mmse => mmse_combiners(draw, stats)?,
        ReceiverKind::Mrc => &draw.g_hat * C64::from(stats.alpha),
        ReceiverKind::Zf => zf_combiners(draw)?,
    };
    Ok(CombinerSet { kind, w })
}

/// Detector-output powers of user k with combiner w.
pub fn sinr(w: &CVector, draw: &ChannelDraw, stats: &EstimationStats, k: usize, model: SinrModel) -> Result<SinrBreakdown> {
    check_user(draw, k)?;
    let w_energy = norm_sqr(w);
    if !(w_energy > 0.0) || !w_energy.is_finite() {
        return Err(Error::Domain(format!("combiner must be finite and nonzero (‖w‖² = {w_energy})")));
    }
    let l = draw.bs;
    let lsf = stats.lsf();
    let a2p = stats.alpha * stats.alpha * stats.power;
    // |wᴴĝ_{llj}|²; the cross-cell estimates are the same columns scaled by R_{lij}.
    let c: Vec<f64> = draw.g_hat.ad_mul(w).iter().map(|z| z.norm_sqr()).collect();
    let mut b = SinrBreakdown {
        signal: a2p * c[k],
        aging_estimation: stats.power * stats.error_power(l) * w_energy,
        noise: w_energy,
        ..SinrBreakdown::default()
    };
    for (j, cj) in c.iter().enumerate() {
        if j == k {
            if model == SinrModel::Full {
                for i in (0..lsf.cells()).filter(|&i| i != l) {
                    b.pilot_contamination += a2p * lsf.ratio(l, i, j).powi(2) * cj;
                }
            }
            continue;
        }
        b.intra_cell += a2p * cj;
        for i in (0..lsf.cells()).filter(|&i| i != l) {
            b.inter_cell += a2p * lsf.ratio(l, i, j).powi(2) * cj;
        }
    }
    Ok(b)
}

/// SINR of every user for a combiner set.
pub fn sinr_all(set: &CombinerSet, draw: &ChannelDraw, stats: &EstimationStats, model: SinrModel) -> Result<Vec<f64>> {
    (0..draw.users())
        .map(|k| Ok(sinr(&set.w.column(k).into_owned(), draw, stats, k, model)?.sinr()))
        .collect()
}

/// Σ_{i≠l} R²_{lik}: weight of user k's contaminated copies relative to its own channel.
pub fn contamination_weight(stats: &EstimationStats, l: usize, k: usize) -> f64 {
    let lsf = stats.lsf();
    (0..lsf.cells()).filter(|&i| i != l).map(|i| lsf.ratio(l, i, k).powi(2)).sum()
}

/// Converts a column-removed SINR s into the full-model SINR s/(1 + c·s).
pub fn full_from_column_removed(s: f64, stats: &EstimationStats, l: usize, k: usize) -> f64 {
    s / (1.0 + contamination_weight(stats, l, k) * s)
}

/// OLR SINR in closed form ĝᴴΞ_k⁻¹ĝ (column-removed model).
pub fn olr_sinr_direct(draw: &ChannelDraw, stats: &EstimationStats, k: usize) -> Result<f64> {
    let g = draw.column(k);
    let w = olr_combiner(draw, stats, k)?;
    Ok(g.dotc(&w).re)
}

#[derive(Clone, Debug, PartialEq)]
pub struct EigenSplit {
    /// Σ_{j<K−1} |ḡ_j|²/(λ_j + σ²) over the signal subspace of S.
    pub i1: f64,
    /// Σ_{j≥K−1} |ḡ_j|²/σ² over its null space.
    pub i2: f64,
    /// All N eigenvalues of S, decreasing.
    pub eigenvalues: Vec<f64>,
}

impl EigenSplit {
    pub fn sinr(&self) -> f64 {
        self.i1 + self.i2
    }
}

/// OLR SINR through the eigen-decomposition of S: rotate ĝ into the
/// eigenbasis and split into the rank-(K−1) part and the noise-only part.
pub fn olr_sinr_eigen(draw: &ChannelDraw, stats: &EstimationStats, k: usize) -> Result<EigenSplit> {
    let s = interference_gram(draw, stats, k)?;
    let (eigenvalues, u) = hermitian_eigen(s)?;
    let g_bar = u.ad_mul(&draw.column(k));
    let rank = draw.users() - 1;
    let s2 = stats.sigma2(draw.bs);
    let mut i1 = 0.0;
    let mut i2 = 0.0;
    for (j, z) in g_bar.iter().enumerate() {
        if j < rank {
            i1 += z.norm_sqr() / (eigenvalues[j] + s2);
        } else {
            i2 += z.norm_sqr();
        }
    }
    Ok(EigenSplit {
        i1,
        i2: i2 / s2,
        eigenvalues,
    })
}
