use aging_mimo::analysis::*;
use aging_mimo::channel::sample_estimate;
use aging_mimo::montecarlo::{estimate_rates, trial_rng, TrialPlan};
use aging_mimo::receivers::{interference_gram, ReceiverKind};
use aging_mimo::scenario::{estimation_params, uniform_interference_profile, DopplerParams, LargeScaleFading, ScenarioConfig};
use aging_mimo::validation::uniform_stats;
use proptest::prelude::*;

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

#[test]
fn special_function_examples() {
    assert!((expint_ei(-1.0).unwrap() + 0.219_383_934_4).abs() < 1e-10);
    assert!(rel(expint_ei(-20.0).unwrap(), -9.8355e-11) < 1e-4);
    assert!((expint_en(1, 1.0).unwrap() - 0.219_383_934_4).abs() < 1e-10);
    assert!(expint_ei(0.0).is_err());
    assert!(expint_en(0, 1.0).is_err());
    assert!(expint_en(1, 0.0).is_err());
    assert!((EULER_GAMMA - 0.577216).abs() < 1e-6);
    // Logarithmic singularity: monotone toward −∞.
    let mut prev = expint_ei(-1.0).unwrap();
    for x in [-1e-1, -1e-2, -1e-4, -1e-8, -1e-12] {
        let v = expint_ei(x).unwrap();
        assert!(v < prev);
        prev = v;
    }
    for n in [1, 3, 10] {
        for z in [5.0, 20.0, 100.0] {
            assert!(expint_en(n, z).unwrap() <= (-z).exp() / z);
        }
    }
}

fn reference_stats(cells: usize, users: usize, beta_cross: f64, doppler: f64) -> (ScenarioConfig, aging_mimo::scenario::EstimationStats) {
    let config = ScenarioConfig {
        cells,
        users,
        antennas: 20,
        power: 10.0,
        pilot_power: 10.0,
        pilot_len: users,
        coherence_len: 196,
        doppler: DopplerParams::Normalized(doppler),
        seed: 4,
    };
    let lsf = uniform_interference_profile(&config, beta_cross, 4.0).unwrap();
    let stats = estimation_params(&lsf, config.alpha().unwrap(), config.power, config.pilot_power).unwrap();
    (config, stats)
}

#[test]
fn per_user_sandwich_small_system() {
    let (config, stats) = reference_stats(2, 5, 0.6, 0.1);
    let plan = TrialPlan::new(10_000, &[ReceiverKind::Olr]);
    let mc = &estimate_rates(&config, &stats, &plan).unwrap()[0];
    for k in 0..5 {
        let inputs = bound_inputs(&stats, 20, 0, k, TExponent::Linear).unwrap();
        let hi = rate_upper_bound(&inputs, BoundForm::Corrected).unwrap();
        let lo = rate_lower_bound(&inputs, BoundForm::Corrected).unwrap();
        let (r, se) = (mc.rate[k], mc.rate_stderr[k]);
        assert!(lo - 2.0 * se <= r && r <= hi + 2.0 * se, "user {k}: {lo} ≤ {r}±{se} ≤ {hi}");
        // The uncorrected upper bound stays an upper bound.
        assert!(rate_upper_bound(&inputs, BoundForm::Printed).unwrap() >= r - 2.0 * se);
    }
}

#[test]
fn upper_bound_vanishes_with_noise() {
    let t = vec![0.3, 0.5, 0.9];
    let mut last = f64::INFINITY;
    for s2 in [1.0, 1e2, 1e4, 1e6] {
        let u = rate_upper_bound(&BoundInputs::new(30, 4, s2, t.clone(), 0.4).unwrap(), BoundForm::Corrected).unwrap();
        assert!(u < last);
        last = u;
    }
    assert!(last < 1e-4);
}

#[test]
fn effective_t_trace_and_identity() {
    let (_, stats) = reference_stats(3, 4, 0.7, 0.1);
    let t = effective_t(&stats, 0, 0, TExponent::Linear).unwrap();
    for (idx, v) in (1..4).enumerate() {
        let sum: f64 = (0..3).map(|i| stats.hat_beta(0, i, v)).sum();
        assert!(rel(t[idx], sum) < 1e-15);
    }
    let n = 24;
    let draws = 10_000;
    let mut trace = 0.0;
    for d in 0..draws {
        let draw = sample_estimate(&stats, 0, n, &mut trial_rng(7, d, 0));
        let s = interference_gram(&draw, &stats, 0).unwrap();
        trace += s.trace().re;
    }
    let expected = n as f64 * t.iter().sum::<f64>();
    assert!(rel(trace / draws as f64, expected) < 0.02);

    // L = 1 → t_v = β̂_{llv}.
    let lsf = LargeScaleFading::new(1, 3, vec![1.0, 0.5, 2.0]).unwrap();
    let single = estimation_params(&lsf, 0.9, 10.0, 10.0).unwrap();
    let t1 = effective_t(&single, 0, 1, TExponent::Linear).unwrap();
    assert_eq!(t1, vec![single.hat_beta(0, 0, 0), single.hat_beta(0, 0, 2)]);
}

#[test]
fn lower_bound_single_user() {
    let inputs = BoundInputs::new(10, 1, 2.0, vec![], 0.5).unwrap();
    assert!(rate_lower_bound(&inputs, BoundForm::Corrected).is_err());
    // Sum bounds fall back to the exact Gamma(N) mean log for K = 1.
    let lsf = LargeScaleFading::new(1, 1, vec![1.0]).unwrap();
    let stats = estimation_params(&lsf, 0.9, 10.0, 10.0).unwrap();
    let (lo, hi) = sum_rate_bounds(&stats, 10, 0, BoundForm::Corrected, TExponent::Linear).unwrap();
    let psi: f64 = -EULER_GAMMA + (1..10).map(|j| 1.0 / j as f64).sum::<f64>();
    let a = stats.hat_beta(0, 0, 0);
    assert!(rel(lo, (1.0 + a * (psi - stats.sigma2(0).ln()).exp()).log2()) < 1e-12);
    assert!(rel(hi, (1.0 + a * 10.0 / stats.sigma2(0)).log2()) < 1e-12);
}

#[test]
fn de_single_user_quadratic() {
    let lsf = LargeScaleFading::new(1, 1, vec![1.0]).unwrap();
    let stats = estimation_params(&lsf, 0.8, 3.0, 3.0).unwrap();
    let n = 16.0;
    let hb = stats.hat_beta(0, 0, 0);
    let s2 = stats.sigma2(0);
    // σ²δ² + (β̂ + σ² − Nβ̂)δ − Nβ̂ = 0
    let b = hb + s2 - n * hb;
    let root = (-b + (b * b + 4.0 * s2 * n * hb).sqrt()) / (2.0 * s2);
    let opts = DeOptions {
        form: DeForm::PerCell,
        ..DeOptions::default()
    };
    let st = de_sinr(&stats, 16, 0, 0, &opts).unwrap();
    assert!(rel(st.delta[0], root) < 1e-10);
    assert!(rel(st.sinr, root) < 1e-10);
    // Effective form: no other users, SINR̄ = Nβ̂/σ².
    let eff = de_sinr(&stats, 16, 0, 0, &DeOptions::default()).unwrap();
    assert!(rel(eff.sinr, n * hb / s2) < 1e-12);
}

#[test]
fn de_independent_of_start_and_converges() {
    let stats = uniform_stats(7, 10, 1.0, 4.0, 0.8, 10.0, 2).unwrap();
    for form in [DeForm::Effective, DeForm::PerCell] {
        let base = de_sinr(&stats, 100, 0, 3, &DeOptions { form, ..DeOptions::default() }).unwrap();
        assert!(base.residual < 1e-12);
        assert!(base.delta.iter().all(|&d| d >= 0.0));
        let tail = &base.history[base.history.len().min(3)..];
        assert!(tail.windows(2).all(|w| w[1] <= w[0]), "{form:?}: {:?}", base.history);
        for scale in [0.5, 1.5] {
            let other = de_sinr(&stats, 100, 0, 3, &DeOptions { form, init_scale: scale, ..DeOptions::default() }).unwrap();
            assert!(rel(other.sinr, base.sinr) < 1e-10);
        }
    }
    let starved = DeOptions { max_iter: 1, ..DeOptions::default() };
    assert!(matches!(de_sinr(&stats, 100, 0, 3, &starved), Err(aging_mimo::Error::Convergence { .. })));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn de_monotonicity(alpha in 0.2f64..0.95, cross in 0.1f64..2.0, n in 12usize..80) {
        let s = uniform_stats(3, 4, cross, 0.0, alpha, 10.0, 1).unwrap();
        let base = de_sinr(&s, n, 0, 0, &DeOptions::default()).unwrap().sinr;
        let more_n = de_sinr(&s, n + 4, 0, 0, &DeOptions::default()).unwrap().sinr;
        prop_assert!(more_n > base);
        let s_alpha = uniform_stats(3, 4, cross, 0.0, alpha * 1.05, 10.0, 1).unwrap();
        prop_assert!(de_sinr(&s_alpha, n, 0, 0, &DeOptions::default()).unwrap().sinr > base);
        let s_cross = uniform_stats(3, 4, cross * 1.2, 0.0, alpha, 10.0, 1).unwrap();
        prop_assert!(de_sinr(&s_cross, n, 0, 0, &DeOptions::default()).unwrap().sinr < base);
    }

    #[test]
    fn density_closed_forms_match_quadrature(t in proptest::collection::vec(0.2f64..3.0, 2..5), s2 in 0.05f64..20.0) {
        let users = t.len() + 1;
        let n = users + 6;
        let inputs = BoundInputs::new(n, users, s2, t, 1.0).unwrap();
        let d = inputs.density().unwrap();
        let mass = aging_mimo::validation::eigen_expectation(&d, n, |_| 1.0);
        prop_assert!((mass - 1.0).abs() < 1e-8);
        let inv = aging_mimo::validation::eigen_expectation(&d, n, |x| 1.0 / (x + s2));
        prop_assert!(rel(d.mean_inverse_shift(s2), inv) < 1e-8);
        let lg = aging_mimo::validation::eigen_expectation(&d, n, |x| (x + s2).ln());
        prop_assert!(rel(d.mean_log_shift(s2), lg) < 1e-8);
    }
}
