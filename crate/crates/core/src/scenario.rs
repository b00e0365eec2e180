//! System configuration, large-scale fading and the deterministic
//! per-scenario statistics (estimate variances, error powers, effective noise).

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::analysis::specfun::bessel_j0;
use crate::error::{Error, Result};

pub mod file;

pub const SPEED_OF_LIGHT: f64 = 3.0e8;

/// Stream reserved for large-scale fading so it never collides with the
/// per-trial small-scale streams.
pub const FADING_STREAM: u64 = u64::MAX;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DopplerParams {
    /// f_D·T_s directly.
    Normalized(f64),
    /// Relative velocity, carrier frequency and symbol period.
    Physical {
        velocity_mps: f64,
        carrier_hz: f64,
        sample_period_s: f64,
    },
}

impl DopplerParams {
    /// Canonical normalized Doppler f_D·T_s.
    pub fn normalized(&self) -> Result<f64> {
        match *self {
            DopplerParams::Normalized(x) => {
                if x >= 0.0 && x.is_finite() {
                    Ok(x)
                } else {
                    Err(Error::Domain(format!("normalized Doppler must be ≥ 0, got {x}")))
                }
            }
            DopplerParams::Physical {
                velocity_mps,
                carrier_hz,
                sample_period_s,
            } => {
                let all_positive = [velocity_mps, carrier_hz, sample_period_s]
                    .iter()
                    .all(|v| *v > 0.0 && v.is_finite());
                if !all_positive {
                    return Err(Error::Domain(format!(
                        "velocity, carrier and symbol period must be positive, got \
                         ({velocity_mps}, {carrier_hz}, {sample_period_s})"
                    )));
                }
                Ok(velocity_mps * carrier_hz / SPEED_OF_LIGHT * sample_period_s)
            }
        }
    }
}

/// α = J₀(2π f_D T_s).
pub fn aging_coefficient(doppler: &DopplerParams) -> Result<f64> {
    let x = doppler.normalized()?;
    Ok(bessel_j0(2.0 * std::f64::consts::PI * x))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub cells: usize,
    pub users: usize,
    pub antennas: usize,
    /// Uplink data power p (linear; equals the SNR since noise is unit).
    pub power: f64,
    /// Pilot power p_p (linear).
    pub pilot_power: f64,
    pub pilot_len: usize,
    pub coherence_len: usize,
    pub doppler: DopplerParams,
    pub seed: u64,
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        if self.cells == 0 || self.users == 0 {
            return fail(format!(
                "need at least one cell and one user (L={}, K={})",
                self.cells, self.users
            ));
        }
        if self.antennas <= self.users {
            return fail(format!(
                "need more antennas than users (N={}, K={})",
                self.antennas, self.users
            ));
        }
        if self.pilot_len == 0 || self.coherence_len <= self.pilot_len {
            return fail(format!(
                "need 1 ≤ τ < T (τ={}, T={})",
                self.pilot_len, self.coherence_len
            ));
        }
        if !(self.power > 0.0 && self.power.is_finite()) {
            return fail(format!("uplink power must be positive, got {}", self.power));
        }
        if !(self.pilot_power > 0.0 && self.pilot_power.is_finite()) {
            return fail(format!("pilot power must be positive, got {}", self.pilot_power));
        }
        self.doppler.normalized().map_err(|e| Error::Config(e.to_string()))?;
        Ok(())
    }

    pub fn alpha(&self) -> Result<f64> {
        aging_coefficient(&self.doppler)
    }

    /// Pilot-overhead factor 1 − τ/T.
    pub fn overhead(&self) -> f64 {
        1.0 - self.pilot_len as f64 / self.coherence_len as f64
    }

    /// The paper-reproduction setup: L=7, K=10, T=196, τ=10, p_p = p.
    pub fn reference(antennas: usize, power: f64, doppler: f64) -> Self {
        ScenarioConfig {
            cells: 7,
            users: 10,
            antennas,
            power,
            pilot_power: power,
            pilot_len: 10,
            coherence_len: 196,
            doppler: DopplerParams::Normalized(doppler),
            seed: 1,
        }
    }
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// Gains β_{lik}: BS l ← user k of cell i.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LargeScaleFading {
    cells: usize,
    users: usize,
    beta: Vec<f64>,
}

impl LargeScaleFading {
    /// `beta` is flattened as `[l][i][k]`. Own-cell gains must be positive,
    /// cross gains nonnegative.
    pub fn new(cells: usize, users: usize, beta: Vec<f64>) -> Result<Self> {
        if beta.len() != cells * cells * users {
            return Err(Error::Config(format!(
                "β tensor has {} entries, expected {}",
                beta.len(),
                cells * cells * users
            )));
        }
        let lsf = LargeScaleFading { cells, users, beta };
        for l in 0..cells {
            for i in 0..cells {
                for k in 0..users {
                    let b = lsf.beta(l, i, k);
                    let ok = b.is_finite() && if i == l { b > 0.0 } else { b >= 0.0 };
                    if !ok {
                        return Err(Error::Config(format!("invalid gain β[{l}][{i}][{k}] = {b}")));
                    }
                }
            }
        }
        Ok(lsf)
    }

    pub fn cells(&self) -> usize {
        self.cells
    }

    pub fn users(&self) -> usize {
        self.users
    }

    fn idx(&self, l: usize, i: usize, k: usize) -> usize {
        (l * self.cells + i) * self.users + k
    }

    pub fn beta(&self, l: usize, i: usize, k: usize) -> f64 {
        self.beta[self.idx(l, i, k)]
    }

    /// Diagonal of R_{li}: β_{lik}/β_{llk}.
    pub fn ratio(&self, l: usize, i: usize, k: usize) -> f64 {
        self.beta(l, i, k) / self.beta(l, l, k)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.beta
    }
}

/// Own-cell gains 1, cross gains `beta_cross` (optionally times a log-normal
/// shadowing multiplier drawn from the config's fading stream).
pub fn uniform_interference_profile(
    config: &ScenarioConfig,
    beta_cross: f64,
    shadow_db_sigma: f64,
) -> Result<LargeScaleFading> {
    if !(beta_cross >= 0.0) || !beta_cross.is_finite() {
        return Err(Error::Domain(format!("beta_cross must be ≥ 0, got {beta_cross}")));
    }
    if !(shadow_db_sigma >= 0.0) {
        return Err(Error::Domain(format!("shadowing σ must be ≥ 0, got {shadow_db_sigma}")));
    }
    let (lc, k) = (config.cells, config.users);
    let mut rng = fading_rng(config.seed);
    let mut beta = Vec::with_capacity(lc * lc * k);
    for l in 0..lc {
        for i in 0..lc {
            for _ in 0..k {
                beta.push(if i == l {
                    1.0
                } else if shadow_db_sigma > 0.0 {
                    beta_cross * shadowing(&mut rng, shadow_db_sigma)
                } else {
                    beta_cross
                });
            }
        }
    }
    LargeScaleFading::new(lc, k, beta)
}

pub fn fading_rng(seed: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(FADING_STREAM);
    rng
}

fn shadowing<R: Rng + ?Sized>(rng: &mut R, sigma_db: f64) -> f64 {
    let z: f64 = StandardNormal.sample(rng);
    db_to_linear(sigma_db * z)
}

/// Flat-top hexagonal cells of circumradius `radius`: one center cell and
/// up to two rings of neighbours.
#[derive(Clone, Debug, PartialEq)]
pub struct HexLayout {
    pub radius: f64,
    pub centers: Vec<(f64, f64)>,
}

impl HexLayout {
    pub fn new(cells: usize, radius: f64) -> Result<Self> {
        if !matches!(cells, 1 | 7 | 19) {
            return Err(Error::Layout(cells));
        }
        let mut centers = vec![(0.0, 0.0)];
        let polar = |r: f64, deg: f64| {
            let a = deg.to_radians();
            (r * a.cos(), r * a.sin())
        };
        let s3 = 3f64.sqrt();
        if cells >= 7 {
            centers.extend((0..6).map(|j| polar(s3 * radius, 30.0 + 60.0 * j as f64)));
        }
        if cells == 19 {
            for j in 0..6 {
                centers.push(polar(2.0 * s3 * radius, 30.0 + 60.0 * j as f64));
                centers.push(polar(3.0 * radius, 60.0 * j as f64));
            }
        }
        Ok(HexLayout { radius, centers })
    }

    pub fn min_distance(&self) -> f64 {
        0.1 * self.radius
    }

    /// Whether offset (x, y) from a cell center lies inside the hexagon.
    pub fn contains(&self, x: f64, y: f64) -> bool {
        let s3 = 3f64.sqrt();
        y.abs() <= 0.5 * s3 * self.radius && s3 * x.abs() + y.abs() <= s3 * self.radius
    }

    /// Uniform point in cell `cell` at least `min_distance` from its BS.
    pub fn drop_user<R: Rng + ?Sized>(&self, rng: &mut R, cell: usize) -> (f64, f64) {
        let r = self.radius;
        let half_h = 0.5 * 3f64.sqrt() * r;
        loop {
            let x = rng.random_range(-r..r);
            let y = rng.random_range(-half_h..half_h);
            if self.contains(x, y) && x.hypot(y) >= self.min_distance() {
                let (cx, cy) = self.centers[cell];
                return (cx + x, cy + y);
            }
        }
    }
}

/// Users dropped uniformly per cell; β = z·(r/R)^{−γ} with log-normal z,
/// then scaled so the median own-cell gain is 1.
pub fn hexagonal_large_scale<R: Rng + ?Sized>(
    config: &ScenarioConfig,
    cell_radius: f64,
    pathloss_exp: f64,
    shadow_db_sigma: f64,
    rng: &mut R,
) -> Result<LargeScaleFading> {
    if !(pathloss_exp > 2.0) {
        return Err(Error::Domain(format!("path-loss exponent must exceed 2, got {pathloss_exp}")));
    }
    if !(cell_radius > 0.0) || !cell_radius.is_finite() {
        return Err(Error::Domain(format!("cell radius must be positive, got {cell_radius}")));
    }
    if !(shadow_db_sigma >= 0.0) {
        return Err(Error::Domain(format!("shadowing σ must be ≥ 0, got {shadow_db_sigma}")));
    }
    let layout = HexLayout::new(config.cells, cell_radius)?;
    let (lc, k) = (config.cells, config.users);
    let positions: Vec<Vec<(f64, f64)>> = (0..lc)
        .map(|i| (0..k).map(|_| layout.drop_user(rng, i)).collect())
        .collect();
    let mut beta = Vec::with_capacity(lc * lc * k);
    for l in 0..lc {
        let (bx, by) = layout.centers[l];
        for cell in &positions {
            for &(ux, uy) in cell {
                let r = (ux - bx).hypot(uy - by).max(layout.min_distance());
                let z = if shadow_db_sigma > 0.0 {
                    shadowing(rng, shadow_db_sigma)
                } else {
                    1.0
                };
                beta.push(z * (r / cell_radius).powf(-pathloss_exp));
            }
        }
    }
    let mut own: Vec<f64> = (0..lc)
        .flat_map(|l| (0..k).map(move |kk| (l, kk)))
        .map(|(l, kk)| beta[(l * lc + l) * k + kk])
        .collect();
    let median = median(&mut own);
    beta.iter_mut().for_each(|b| *b /= median);
    LargeScaleFading::new(lc, k, beta)
}

pub(crate) fn median(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Estimate variances, error powers and effective noise for one α, p, p_p.
/// Owns a copy of the fading it was derived from.
#[derive(Clone, Debug, PartialEq)]
pub struct EstimationStats {
    pub alpha: f64,
    pub power: f64,
    pub pilot_power: f64,
    lsf: LargeScaleFading,
    hat_beta: Vec<f64>,
    e_tilde: Vec<f64>,
    sigma2: Vec<f64>,
}

impl EstimationStats {
    pub fn lsf(&self) -> &LargeScaleFading {
        &self.lsf
    }

    pub fn cells(&self) -> usize {
        self.lsf.cells
    }

    pub fn users(&self) -> usize {
        self.lsf.users
    }

    /// β̂_{lik}
    pub fn hat_beta(&self, l: usize, i: usize, k: usize) -> f64 {
        self.hat_beta[self.lsf.idx(l, i, k)]
    }

    /// ẽ_{li} = Σ_k (β_{lik} − α²β̂_{lik})
    pub fn e_tilde(&self, l: usize, i: usize) -> f64 {
        self.e_tilde[l * self.lsf.cells + i]
    }

    /// σ²_l = (Σ_i ẽ_{li} + 1/p)/α²
    pub fn sigma2(&self, l: usize) -> f64 {
        self.sigma2[l]
    }

    /// β̂_{llk} for every user of cell l.
    pub fn own_hat_beta(&self, l: usize) -> Vec<f64> {
        (0..self.users()).map(|k| self.hat_beta(l, l, k)).collect()
    }

    /// Total estimation-error-plus-aging power Σ_i ẽ_{li} seen at BS l.
    pub fn error_power(&self, l: usize) -> f64 {
        (0..self.cells()).map(|i| self.e_tilde(l, i)).sum()
    }
}

pub fn estimation_params(
    lsf: &LargeScaleFading,
    alpha: f64,
    power: f64,
    pilot_power: f64,
) -> Result<EstimationStats> {
    if alpha == 0.0 {
        return Err(Error::DegenerateAging);
    }
    if !(alpha.abs() <= 1.0) {
        return Err(Error::Domain(format!("|α| must be in (0, 1], got {alpha}")));
    }
    if !(power > 0.0) || !(pilot_power > 0.0) {
        return Err(Error::Domain(format!(
            "powers must be positive (p={power}, p_p={pilot_power})"
        )));
    }
    let (lc, k) = (lsf.cells, lsf.users);
    let a2 = alpha * alpha;
    let mut hat_beta = vec![0.0; lsf.beta.len()];
    let mut e_tilde = vec![0.0; lc * lc];
    let mut sigma2 = vec![0.0; lc];
    for l in 0..lc {
        for kk in 0..k {
            let denom: f64 = (0..lc).map(|j| lsf.beta(l, j, kk)).sum::<f64>() + 1.0 / pilot_power;
            for i in 0..lc {
                let b = lsf.beta(l, i, kk);
                hat_beta[lsf.idx(l, i, kk)] = b * b / denom;
            }
        }
        for i in 0..lc {
            e_tilde[l * lc + i] = (0..k)
                .map(|kk| lsf.beta(l, i, kk) - a2 * hat_beta[lsf.idx(l, i, kk)])
                .sum();
        }
        let e_sum: f64 = e_tilde[l * lc..(l + 1) * lc].iter().sum();
        sigma2[l] = (e_sum + 1.0 / power) / a2;
    }
    Ok(EstimationStats {
        alpha,
        power,
        pilot_power,
        lsf: lsf.clone(),
        hat_beta,
        e_tilde,
        sigma2,
    })
}

/// Derives stats straight from a validated config.
pub fn stats_for(config: &ScenarioConfig, lsf: &LargeScaleFading) -> Result<EstimationStats> {
    config.validate()?;
    if lsf.cells != config.cells || lsf.users != config.users {
        return Err(Error::Config(format!(
            "fading is {}×{} but config has L={}, K={}",
            lsf.cells, lsf.users, config.cells, config.users
        )));
    }
    estimation_params(lsf, config.alpha()?, config.power, config.pilot_power)
}
