//! Small-scale fading: estimated channels, aged true channels and a
//! symbol-level transmission oracle.

use std::io::{self, Read, Write};

use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg::{complex_gaussian, gaussian_columns, CMatrix, CVector, C64};
use crate::scenario::EstimationStats;

/// Own-cell channel estimate Ĝ_{ll}[n−1] at BS `bs` (N×K).
#[derive(Clone, Debug, PartialEq)]
pub struct ChannelDraw {
    pub bs: usize,
    pub g_hat: CMatrix,
}

impl ChannelDraw {
    pub fn antennas(&self) -> usize {
        self.g_hat.nrows()
    }

    pub fn users(&self) -> usize {
        self.g_hat.ncols()
    }

    pub fn column(&self, k: usize) -> CVector {
        self.g_hat.column(k).into_owned()
    }

    /// Binary fixture: rows and cols as little-endian u64, then the entries
    /// row-major as little-endian (re, im) f64 pairs.
    pub fn write_binary<W: Write>(&self, mut out: W) -> io::Result<()> {
        let (r, c) = self.g_hat.shape();
        out.write_all(&(r as u64).to_le_bytes())?;
        out.write_all(&(c as u64).to_le_bytes())?;
        for i in 0..r {
            for j in 0..c {
                let z = self.g_hat[(i, j)];
                out.write_all(&z.re.to_le_bytes())?;
                out.write_all(&z.im.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn read_binary<R: Read>(bs: usize, mut input: R) -> io::Result<Self> {
        let mut word = [0u8; 8];
        let mut next = |input: &mut R| -> io::Result<[u8; 8]> {
            input.read_exact(&mut word)?;
            Ok(word)
        };
        let r = u64::from_le_bytes(next(&mut input)?) as usize;
        let c = u64::from_le_bytes(next(&mut input)?) as usize;
        let mut g_hat = CMatrix::zeros(r, c);
        for i in 0..r {
            for j in 0..c {
                let re = f64::from_le_bytes(next(&mut input)?);
                let im = f64::from_le_bytes(next(&mut input)?);
                g_hat[(i, j)] = C64::new(re, im);
            }
        }
        Ok(ChannelDraw { bs, g_hat })
    }
}

/// Draws Ĝ_{ll}: column k i.i.d. CN(0, β̂_{llk}).
pub fn sample_estimate<R: Rng + ?Sized>(stats: &EstimationStats, bs: usize, antennas: usize, rng: &mut R) -> ChannelDraw {
    ChannelDraw {
        bs,
        g_hat: gaussian_columns(rng, antennas, &stats.own_hat_beta(bs)),
    }
}

/// Ĝ_{li} = Ĝ_{ll}·R_{li}.
pub fn cross_cell_estimate(draw: &ChannelDraw, stats: &EstimationStats, i: usize) -> Result<CMatrix> {
    let lsf = stats.lsf();
    if i >= lsf.cells() {
        return Err(Error::Index {
            what: "cell",
            index: i,
            limit: lsf.cells(),
        });
    }
    if i == draw.bs {
        return Ok(draw.g_hat.clone());
    }
    let mut g = draw.g_hat.clone();
    for (k, mut col) in g.column_iter_mut().enumerate() {
        col *= C64::from(lsf.ratio(draw.bs, i, k));
    }
    Ok(g)
}

/// Estimates, errors and true channels of every cell as seen from one BS.
#[derive(Clone, Debug, PartialEq)]
pub struct FullState {
    pub bs: usize,
    pub alpha: f64,
    /// Ĝ_{li}[n−1] for each cell i.
    pub g_hat: Vec<CMatrix>,
    /// Ẽ_{li}[n].
    pub errors: Vec<CMatrix>,
    /// G_{li}[n] = α·Ĝ_{li}[n−1] + Ẽ_{li}[n].
    pub g_true: Vec<CMatrix>,
}

/// Ages the estimate one step: G = αĜ + Ẽ with Ẽ column variances
/// β_{lik} − α²β̂_{lik}, independent of the estimate.
pub fn sample_true_state<R: Rng + ?Sized>(draw: &ChannelDraw, stats: &EstimationStats, rng: &mut R) -> Result<FullState> {
    let alpha = stats.alpha;
    if !(alpha.abs() <= 1.0) {
        return Err(Error::Domain(format!("|α| must not exceed 1, got {alpha}")));
    }
    let lsf = stats.lsf();
    let l = draw.bs;
    let n = draw.antennas();
    let mut g_hat = Vec::with_capacity(lsf.cells());
    let mut errors = Vec::with_capacity(lsf.cells());
    let mut g_true = Vec::with_capacity(lsf.cells());
    for i in 0..lsf.cells() {
        let est = cross_cell_estimate(draw, stats, i)?;
        let var: Vec<f64> = (0..lsf.users())
            .map(|k| (lsf.beta(l, i, k) - alpha * alpha * stats.hat_beta(l, i, k)).max(0.0))
            .collect();
        let err = gaussian_columns(rng, n, &var);
        g_true.push(&est * C64::from(alpha) + &err);
        g_hat.push(est);
        errors.push(err);
    }
    Ok(FullState {
        bs: l,
        alpha,
        g_hat,
        errors,
        g_true,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct TransmissionSample {
    /// Unit-power symbols x_i of every cell.
    pub x: Vec<CVector>,
    pub z: CVector,
    /// y = √p Σ_i G_{li} x_i + z.
    pub y: CVector,
    /// r = Wᴴ y.
    pub r: CVector,
}

/// One uplink symbol through the true channels, detected with `w`.
pub fn simulate_symbol<R: Rng + ?Sized>(state: &FullState, w: &CMatrix, power: f64, rng: &mut R) -> TransmissionSample {
    let n = w.nrows();
    let amp = C64::from(power.sqrt());
    let x: Vec<CVector> = state
        .g_true
        .iter()
        .map(|g| CVector::from_fn(g.ncols(), |_, _| complex_gaussian(rng, 1.0)))
        .collect();
    let z = CVector::from_fn(n, |_, _| complex_gaussian(rng, 1.0));
    let mut y = z.clone();
    for (g, xi) in state.g_true.iter().zip(&x) {
        y += (g * xi) * amp;
    }
    let r = w.ad_mul(&y);
    TransmissionSample { x, z, y, r }
}

/// SINR of combiner `w` for user k measured over `symbols` transmissions.
///
/// The useful part of the detector output is α√p·wᴴĝ_{llk}·x_{lk} (what the
/// receiver can coherently exploit from its estimate); everything else —
/// other users, the aging/estimation error, other cells and noise — is
/// measured empirically. A fresh error/innovation realization is drawn for
/// every symbol, so the average runs over the same randomness as the
/// analytic SINR.
pub fn empirical_sinr<R: Rng + ?Sized>(
    draw: &ChannelDraw,
    stats: &EstimationStats,
    w: &CVector,
    k: usize,
    symbols: usize,
    rng: &mut R,
) -> Result<f64> {
    if symbols == 0 {
        return Err(Error::Domain("need at least one symbol".into()));
    }
    let l = draw.bs;
    let wm = CMatrix::from_column_slice(w.len(), 1, w.as_slice());
    let gain = w.dotc(&draw.column(k)) * C64::from(stats.alpha * stats.power.sqrt());
    let mut distortion = 0.0;
    for _ in 0..symbols {
        let state = sample_true_state(draw, stats, rng)?;
        let s = simulate_symbol(&state, &wm, stats.power, rng);
        distortion += (s.r[0] - gain * s.x[l][k]).norm_sqr();
    }
    Ok(gain.norm_sqr() / (distortion / symbols as f64))
}
