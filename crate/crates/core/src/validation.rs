//! Independent numerical oracles and the self-check suites behind
//! `aging-mimo validate`.
//!
//! Nothing here reuses the closed forms it checks: integrals are done by
//! adaptive Gauss–Kronrod quadrature, spectra by sampling and
//! eigen-decomposition.

use std::f64::consts::PI;

use rand::Rng;
use rug::Float;

use crate::analysis::specfun::{bessel_j0, expint_ei, expint_en};
use crate::analysis::{effective_t, rate_lower_bound, rate_upper_bound, BoundForm, BoundInputs, EigenDensity, TExponent};
use crate::channel::{empirical_sinr, sample_estimate};
use crate::error::{Error, Result};
use crate::linalg::{complex_gaussian, hermitian_eigenvalues, numerical_rank, CVector};
use crate::montecarlo::trial_rng;
use crate::receivers::{combiners, interference_gram, olr_combiner, olr_sinr_direct, olr_sinr_eigen, sinr, ReceiverKind, SinrModel};
use crate::scenario::{
    db_to_linear, estimation_params, uniform_interference_profile, DopplerParams, EstimationStats, ScenarioConfig,
};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn kronrod15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = WGK[7] * fc;
    let mut g = WG[3] * fc;
    for j in 0..7 {
        let x = h * XGK[j];
        let s = f(c - x) + f(c + x);
        k += WGK[j] * s;
        if j % 2 == 1 {
            g += WG[j / 2] * s;
        }
    }
    (k * h, ((k - g) * h).abs())
}

/// Adaptive 7/15-point Gauss–Kronrod quadrature on [a, b]. Accepts a
/// panel when its error estimate is below `abs_tol` (split evenly between
/// halves) or `rel_tol·|panel|`.
pub fn integrate<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, abs_tol: f64, rel_tol: f64) -> f64 {
    fn rec<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64, rel: f64, depth: u32) -> f64 {
        let (v, e) = kronrod15(f, a, b);
        if e <= tol.max(rel * v.abs()) || depth == 0 {
            return v;
        }
        let m = 0.5 * (a + b);
        rec(f, a, m, 0.5 * tol, rel, depth - 1) + rec(f, m, b, 0.5 * tol, rel, depth - 1)
    }
    rec(f, a, b, abs_tol, rel_tol, 48)
}

/// ∫_a^∞ f through x = a + s·u/(1−u); `scale` s should match the decay length.
pub fn integrate_to_infinity<F: Fn(f64) -> f64>(f: &F, a: f64, scale: f64, abs_tol: f64, rel_tol: f64) -> f64 {
    let g = |u: f64| {
        let v = 1.0 - u;
        let x = a + scale * u / v;
        let jac = scale / (v * v);
        let y = f(x) * jac;
        if y.is_finite() {
            y
        } else {
            0.0
        }
    };
    integrate(&g, 0.0, 1.0, abs_tol, rel_tol)
}

/// Upper tail P(χ²_df > x).
pub fn chi_square_sf(x: f64, df: usize) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    let s = Float::with_val(128, df as f64 / 2.0);
    let upper = s.clone().gamma_inc(&Float::with_val(128, x / 2.0));
    (upper / s.gamma()).to_f64()
}

#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub name: String,
    pub measured: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl Check {
    /// Passes when `measured ≤ tolerance`.
    pub fn at_most(name: impl Into<String>, measured: f64, tolerance: f64) -> Self {
        Check {
            name: name.into(),
            measured,
            tolerance,
            passed: measured <= tolerance,
        }
    }

    /// Passes when `measured > threshold`.
    pub fn above(name: impl Into<String>, measured: f64, threshold: f64) -> Self {
        Check {
            name: name.into(),
            measured,
            tolerance: threshold,
            passed: measured > threshold,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SuiteReport {
    pub suite: &'static str,
    pub checks: Vec<Check>,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

pub const SUITES: [&str; 6] = ["specfun", "eigenpdf", "eigensplit", "symbol", "optimality", "ties"];

pub fn run_suite(name: &str, seed: u64) -> Result<SuiteReport> {
    let (suite, checks) = match name {
        "specfun" => ("specfun", specfun_checks()?),
        "eigenpdf" => ("eigenpdf", eigenpdf_checks(seed, 10_000)?),
        "eigensplit" => ("eigensplit", eigensplit_checks(seed, 1_000)?),
        "symbol" => ("symbol", symbol_checks(seed, 100_000)?),
        "optimality" => ("optimality", optimality_checks(seed, 1_000)?),
        "ties" => ("ties", tie_checks()?),
        other => {
            return Err(Error::Config(format!(
                "unknown suite `{other}` (expected one of {})",
                SUITES.join(", ")
            )))
        }
    };
    Ok(SuiteReport { suite, checks })
}

/// Uniform-profile stats with a directly prescribed α.
pub fn uniform_stats(
    cells: usize,
    users: usize,
    beta_cross: f64,
    shadow_db: f64,
    alpha: f64,
    snr_db: f64,
    seed: u64,
) -> Result<EstimationStats> {
    let p = db_to_linear(snr_db);
    let config = ScenarioConfig {
        cells,
        users,
        antennas: users + 1,
        power: p,
        pilot_power: p,
        pilot_len: 1,
        coherence_len: 2,
        doppler: DopplerParams::Normalized(0.0),
        seed,
    };
    let lsf = uniform_interference_profile(&config, beta_cross, shadow_db)?;
    estimation_params(&lsf, alpha, p, p)
}

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

/// Eₙ(z) = ∫₁^∞ e^{−zt}/tⁿ dt by quadrature after t = eˢ, which turns the
/// slow algebraic/exponential tail into a double-exponential one.
fn en_oracle(n: u32, z: f64) -> f64 {
    let f = |s: f64| (-z * s.exp() - (n as f64 - 1.0) * s).exp();
    let top = (80.0 / z).ln().max(1.0);
    integrate(&f, 0.0, top, 1e-300, 1e-14)
}

/// Ei, Eₙ and J₀ against quadrature of their defining integrals, plus the
/// Eₙ recurrence.
pub fn specfun_checks() -> Result<Vec<Check>> {
    let mut checks = Vec::new();
    let mut worst: f64 = 0.0;
    for &x in &[-0.01, -0.1, -0.5, -1.0, -2.0, -5.0, -10.0, -20.0, -40.0] {
        let z = -x;
        let oracle = -en_oracle(1, z);
        worst = worst.max(rel_err(expint_ei(x)?, oracle));
    }
    checks.push(Check::at_most("Ei vs quadrature (max rel. error)", worst, 1e-10));

    let mut worst: f64 = 0.0;
    for &n in &[1u32, 2, 5, 10, 30, 60] {
        for &z in &[0.01, 0.5, 1.0, 3.0, 10.0, 50.0] {
            let oracle = en_oracle(n, z);
            worst = worst.max(rel_err(expint_en(n, z)?, oracle));
        }
    }
    checks.push(Check::at_most("Eₙ vs quadrature (max rel. error)", worst, 1e-10));

    let mut worst: f64 = 0.0;
    for i in 0..=100 {
        let x = 0.5 * i as f64;
        let oracle = integrate(&|th: f64| (x * th.sin()).cos(), 0.0, PI, 1e-15, 1e-14) / PI;
        worst = worst.max((bessel_j0(x) - oracle).abs());
    }
    checks.push(Check::at_most("J₀ vs integral form on [0, 50] (max abs. error)", worst, 1e-10));

    let mut worst: f64 = 0.0;
    for n in 1..=60u32 {
        for &z in &[0.01, 0.1, 0.5, 1.0, 2.0, 5.0, 10.0, 20.0, 50.0] {
            let lhs = n as f64 * expint_en(n + 1, z)?;
            let rhs = (-z).exp() - z * expint_en(n, z)?;
            worst = worst.max((lhs - rhs).abs() / lhs.abs().max((-z).exp()));
        }
    }
    checks.push(Check::at_most("Eₙ recurrence residual (max rel.)", worst, 1e-12));
    Ok(checks)
}

/// Integration range covering the bulk of the unordered eigenvalue law.
fn eigen_support(n: usize, t: &[f64]) -> f64 {
    let t_max = t.iter().cloned().fold(0.0, f64::max);
    let nf = n as f64;
    t_max * (nf + 15.0 * nf.sqrt() + 40.0)
}

/// ∫ f(λ)·g(λ) dλ over the eigenvalue law by piecewise quadrature.
pub fn eigen_expectation<G: Fn(f64) -> f64>(d: &EigenDensity, antennas: usize, g: G) -> f64 {
    let top = eigen_support(antennas, d.t());
    let pieces = 64;
    (0..pieces)
        .map(|j| {
            let a = top * j as f64 / pieces as f64;
            let b = top * (j + 1) as f64 / pieces as f64;
            integrate(&|x: f64| d.pdf(x) * g(x), a, b, 1e-15, 1e-12)
        })
        .sum()
}

/// Pearson χ² of `samples` against the density, with `bins` cells of equal
/// analytic probability. Returns (statistic, p-value).
pub fn chi_square_fit(d: &EigenDensity, antennas: usize, samples: &[f64], bins: usize) -> (f64, f64) {
    let top = eigen_support(antennas, d.t());
    let grid = 800;
    let mut cdf = vec![0.0; grid + 1];
    for j in 0..grid {
        let a = top * j as f64 / grid as f64;
        let b = top * (j + 1) as f64 / grid as f64;
        cdf[j + 1] = cdf[j] + integrate(&|x: f64| d.pdf(x), a, b, 1e-15, 1e-12);
    }
    let mut edges = vec![0.0];
    for q in 1..bins {
        let target = q as f64 / bins as f64;
        let j = cdf.partition_point(|&c| c < target).max(1);
        let (c0, c1) = (cdf[j - 1], cdf[j]);
        let x0 = top * (j - 1) as f64 / grid as f64;
        let x1 = top * j as f64 / grid as f64;
        edges.push(x0 + (x1 - x0) * (target - c0) / (c1 - c0));
    }
    let mut probs: Vec<f64> = edges
        .windows(2)
        .map(|w| integrate(&|x: f64| d.pdf(x), w[0], w[1], 1e-15, 1e-13))
        .collect();
    probs.push(1.0 - probs.iter().sum::<f64>());
    let mut counts = vec![0usize; bins];
    for &s in samples {
        let b = edges.partition_point(|&e| e <= s).saturating_sub(1);
        counts[b.min(bins - 1)] += 1;
    }
    let n = samples.len() as f64;
    let stat: f64 = counts
        .iter()
        .zip(&probs)
        .map(|(&o, &p)| {
            let e = n * p;
            (o as f64 - e).powi(2) / e
        })
        .sum();
    (stat, chi_square_sf(stat, bins - 1))
}

/// One uniformly chosen nonzero eigenvalue of S per draw (user 0 removed).
pub fn sample_unordered_eigenvalues(stats: &EstimationStats, antennas: usize, draws: usize, seed: u64) -> Result<Vec<f64>> {
    let rank = stats.users() - 1;
    (0..draws)
        .map(|t| {
            let mut rng = trial_rng(seed, t, 0);
            let draw = sample_estimate(stats, 0, antennas, &mut rng);
            let eig = hermitian_eigenvalues(interference_gram(&draw, stats, 0)?)?;
            Ok(eig[rng.random_range(0..rank)])
        })
        .collect()
}

pub fn eigenpdf_checks(seed: u64, draws: usize) -> Result<Vec<Check>> {
    let (n, k) = (16, 5);
    let stats = uniform_stats(2, k, 0.5, 6.0, 0.9, 10.0, seed)?;
    let sigma2 = stats.sigma2(0);
    let t = effective_t(&stats, 0, 0, TExponent::Linear)?;
    let d = EigenDensity::new(n, k, &t)?;
    let mut checks = Vec::new();

    let mass = eigen_expectation(&d, n, |_| 1.0);
    checks.push(Check::at_most("∫ f = 1", (mass - 1.0).abs(), 1e-8));
    let top = eigen_support(n, &t);
    let most_negative = (0..=2000)
        .map(|j| d.pdf(top * j as f64 / 2000.0))
        .fold(0.0, f64::min);
    checks.push(Check::at_most("f ≥ 0 on grid (max negativity)", -most_negative, 1e-9));
    let inv = eigen_expectation(&d, n, |x| 1.0 / (x + sigma2));
    checks.push(Check::at_most(
        "E[1/(λ+σ²)] closed form vs quadrature",
        rel_err(d.mean_inverse_shift(sigma2), inv),
        1e-8,
    ));
    let lg = eigen_expectation(&d, n, |x| (x + sigma2).ln());
    checks.push(Check::at_most(
        "E[ln(λ+σ²)] closed form vs quadrature",
        rel_err(d.mean_log_shift(sigma2), lg),
        1e-8,
    ));

    let samples = sample_unordered_eigenvalues(&stats, n, draws, seed)?;
    let (_, p_linear) = chi_square_fit(&d, n, &samples, 20);
    checks.push(Check::above("χ² p-value, t = Σ_i β̂ (20 bins)", p_linear, 0.01));
    let t_sq = effective_t(&stats, 0, 0, TExponent::Squared)?;
    let (_, p_squared) = chi_square_fit(&EigenDensity::new(n, k, &t_sq)?, n, &samples, 20);
    checks.push(Check::at_most("χ² p-value, t = Σ_i β̂² (must be rejected)", p_squared, 0.01));
    Ok(checks)
}

pub fn eigensplit_checks(seed: u64, draws: usize) -> Result<Vec<Check>> {
    let (n, k) = (12, 4);
    let stats = uniform_stats(2, k, 0.7, 4.0, 0.8, 10.0, seed)?;
    let mut split: f64 = 0.0;
    let mut identity: f64 = 0.0;
    let mut rank_ok = 0usize;
    for t in 0..draws {
        let mut rng = trial_rng(seed, t, 0);
        let draw = sample_estimate(&stats, 0, n, &mut rng);
        for user in 0..k {
            let direct = olr_sinr_direct(&draw, &stats, user)?;
            let eig = olr_sinr_eigen(&draw, &stats, user)?;
            split = split.max(rel_err(eig.sinr(), direct));
            let w = olr_combiner(&draw, &stats, user)?;
            let via_ratio = sinr(&w, &draw, &stats, user, SinrModel::ColumnRemoved)?.sinr();
            identity = identity.max(rel_err(via_ratio, direct));
            if numerical_rank(&eig.eigenvalues, 1e-10) == k - 1 {
                rank_ok += 1;
            }
        }
    }
    Ok(vec![
        Check::at_most("ĝᴴΞ⁻¹ĝ vs eigen split I₁+I₂ (max rel.)", split, 1e-8),
        Check::at_most("SINR ratio at OLR vs ĝᴴΞ⁻¹ĝ (max rel.)", identity, 1e-10),
        Check::at_most("draws where rank S ≠ K−1", (draws * k - rank_ok) as f64, 0.0),
    ])
}

pub fn symbol_checks(seed: u64, symbols: usize) -> Result<Vec<Check>> {
    let (n, k) = (8, 2);
    let stats = uniform_stats(2, k, 0.6, 0.0, 0.9, 10.0, seed)?;
    let mut rng = trial_rng(seed, 0, 0);
    let draw = sample_estimate(&stats, 0, n, &mut rng);
    let mut checks = Vec::new();
    for kind in ReceiverKind::ALL {
        let set = combiners(kind, &draw, &stats)?;
        let mut worst: f64 = 0.0;
        for user in 0..k {
            let w = set.w.column(user).into_owned();
            let analytic = sinr(&w, &draw, &stats, user, SinrModel::Full)?.sinr();
            let mut sym_rng = trial_rng(seed ^ 0x5eed, user, 1 + kind as usize);
            let measured = empirical_sinr(&draw, &stats, &w, user, symbols, &mut sym_rng)?;
            worst = worst.max(rel_err(measured, analytic));
        }
        checks.push(Check::at_most(format!("{kind}: symbol-level SINR vs analytic (max rel.)"), worst, 0.05));
    }
    Ok(checks)
}

pub fn optimality_checks(seed: u64, draws: usize) -> Result<Vec<Check>> {
    let (n, k) = (20, 5);
    let stats = uniform_stats(3, k, 1.0, 0.0, 0.9, 10.0, seed)?;
    let mut worst = f64::NEG_INFINITY;
    for t in 0..draws {
        let mut rng = trial_rng(seed, t, 0);
        let draw = sample_estimate(&stats, 0, n, &mut rng);
        let olr = combiners(ReceiverKind::Olr, &draw, &stats)?;
        for kind in [ReceiverKind::Mmse, ReceiverKind::Mrc, ReceiverKind::Zf] {
            let other = combiners(kind, &draw, &stats)?;
            for user in 0..k {
                let best = sinr(&olr.w.column(user).into_owned(), &draw, &stats, user, SinrModel::Full)?.sinr();
                let s = sinr(&other.w.column(user).into_owned(), &draw, &stats, user, SinrModel::Full)?.sinr();
                worst = worst.max((s - best) / best);
            }
        }
    }
    // Random probes on a small system.
    let small = uniform_stats(2, 3, 1.0, 0.0, 0.9, 10.0, seed)?;
    let mut rng = trial_rng(seed, usize::MAX >> 16, 0);
    let draw = sample_estimate(&small, 0, 6, &mut rng);
    let w_opt = olr_combiner(&draw, &small, 0)?;
    let best = sinr(&w_opt, &draw, &small, 0, SinrModel::Full)?.sinr();
    let mut probe_worst = f64::NEG_INFINITY;
    for _ in 0..1000 {
        let w = CVector::from_fn(6, |_, _| complex_gaussian(&mut rng, 1.0));
        let s = sinr(&w, &draw, &small, 0, SinrModel::Full)?.sinr();
        probe_worst = probe_worst.max((s - best) / best);
    }
    Ok(vec![
        Check::at_most("max (SINR(kind) − SINR(OLR))/SINR(OLR), MMSE/MRC/ZF", worst, 1e-9),
        Check::at_most("max (SINR(probe) − SINR(OLR))/SINR(OLR), random probes", probe_worst, 1e-9),
    ])
}

pub fn tie_checks() -> Result<Vec<Check>> {
    let (n, k, s2) = (30, 5, 4.0);
    let tied = BoundInputs::new(n, k, s2, vec![0.5; k - 1], 0.4)?;
    let spread = BoundInputs::new(n, k, s2, vec![0.5, 0.5 * (1.0 + 1e-6), 0.5 * (1.0 + 2e-6), 0.5 * (1.0 + 3e-6)], 0.4)?;
    let mut checks = vec![Check::at_most("tie jitter applied", if tied.jittered { 0.0 } else { 1.0 }, 0.0)];
    for (name, f) in [
        ("upper", rate_upper_bound as fn(&BoundInputs, BoundForm) -> Result<f64>),
        ("lower", rate_lower_bound),
    ] {
        let a = f(&tied, BoundForm::Corrected)?;
        let b = f(&spread, BoundForm::Corrected)?;
        checks.push(Check::at_most(format!("{name} bound continuous through tie (rel.)"), rel_err(a, b), 1e-5));
    }
    Ok(checks)
}
