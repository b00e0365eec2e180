use aging_mimo::channel::sample_estimate;
use aging_mimo::montecarlo::*;
use aging_mimo::receivers::{combiners, sinr_all, ReceiverKind};
use aging_mimo::scenario::{stats_for, uniform_interference_profile, DopplerParams, ScenarioConfig};

fn small_config(antennas: usize) -> ScenarioConfig {
    ScenarioConfig {
        cells: 3,
        users: 4,
        antennas,
        power: 10.0,
        pilot_power: 10.0,
        pilot_len: 4,
        coherence_len: 196,
        doppler: DopplerParams::Normalized(0.1),
        seed: 5,
    }
}

fn result_for(config: &ScenarioConfig, beta_cross: f64, trials: usize, kinds: &[ReceiverKind]) -> Vec<RateResult> {
    let lsf = uniform_interference_profile(config, beta_cross, 0.0).unwrap();
    let stats = stats_for(config, &lsf).unwrap();
    estimate_rates(config, &stats, &TrialPlan::new(trials, kinds)).unwrap()
}

#[test]
fn spectral_efficiency_overhead() {
    let r = &result_for(&small_config(12), 0.5, 20, &[ReceiverKind::Olr])[0];
    let total: f64 = r.rate.iter().sum();
    assert_eq!(sum_spectral_efficiency(r, 0, 196).unwrap(), total);
    assert!((sum_spectral_efficiency(r, 98, 196).unwrap() - 0.5 * total).abs() < 1e-15);
    let f = sum_spectral_efficiency(r, 10, 196).unwrap() / total;
    assert!((f - 186.0 / 196.0).abs() < 1e-15 && (f - 0.94898).abs() < 5e-6);
    assert!(sum_spectral_efficiency(r, 196, 196).is_err());
    assert!((r.sum_rate - total).abs() < 1e-12 * total);
    assert!(r.rate.iter().all(|&x| x >= 0.0));
}

#[test]
fn deterministic_across_thread_counts() {
    let config = small_config(12);
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| result_for(&config, 0.5, 300, &ReceiverKind::ALL))
    };
    assert_eq!(run(1), run(3));
}

#[test]
fn single_trial_is_the_pipeline() {
    let config = small_config(10);
    let lsf = uniform_interference_profile(&config, 0.5, 0.0).unwrap();
    let stats = stats_for(&config, &lsf).unwrap();
    let r = estimate_rates(&config, &stats, &TrialPlan::new(1, &[ReceiverKind::Mmse])).unwrap();
    let draw = sample_estimate(&stats, 0, 10, &mut trial_rng(config.seed, 0, 0));
    let sinrs = sinr_all(&combiners(ReceiverKind::Mmse, &draw, &stats).unwrap(), &draw, &stats, Default::default()).unwrap();
    for (k, s) in sinrs.iter().enumerate() {
        assert_eq!(r[0].rate[k], (1.0 + s).log2());
        assert_eq!(r[0].mean_sinr[k], *s);
    }
}

#[test]
fn substreams_are_distinct() {
    use rand::RngCore;
    let mut seen = std::collections::HashSet::new();
    for trial in 0..200 {
        for bs in 0..3 {
            assert!(seen.insert(trial_rng(1, trial, bs).next_u64()));
        }
    }
}

#[test]
fn stderr_scales_with_trials() {
    let config = small_config(12);
    let a = &result_for(&config, 0.5, 2000, &[ReceiverKind::Olr])[0];
    let b = &result_for(&config, 0.5, 8000, &[ReceiverKind::Olr])[0];
    let ratio = b.sum_stderr / a.sum_stderr;
    assert!((ratio - 0.5).abs() < 0.05, "ratio {ratio}");
}

#[test]
fn receiver_ordering_reference() {
    let config = ScenarioConfig::reference(50, 10.0, 0.1);
    let r = result_for(&config, 1.0, 2000, &[ReceiverKind::Olr, ReceiverKind::Mmse, ReceiverKind::Mrc]);
    for pair in r.windows(2) {
        let gap = pair[0].sum_rate - pair[1].sum_rate;
        assert!(gap >= -pair[1].sum_stderr, "{} vs {}", pair[0].receiver, pair[1].receiver);
    }
}

#[test]
fn single_cell_noise_limited_regime() {
    let mut config = small_config(64);
    config.cells = 1;
    config.power = 1e-4;
    config.pilot_power = 1e-4;
    let r = result_for(&config, 0.0, 500, &ReceiverKind::ALL);
    let olr = r[0].sum_rate;
    for x in &r[1..3] {
        assert!((olr - x.sum_rate).abs() < 0.01 * olr);
    }
    // ZF keeps its (N−K+1)/N factor.
    let zf = r[3].sum_rate / r[2].sum_rate;
    assert!((zf - 61.0 / 64.0).abs() < 0.01);
}

#[test]
fn sweep_points_and_degenerate_aging() {
    let config = small_config(12);
    let lsf = uniform_interference_profile(&config, 0.5, 0.0).unwrap();
    let opts = SweepOptions::new(TrialPlan::new(50, &[ReceiverKind::Olr, ReceiverKind::Zf]));
    let zero = 2.404_825_557_695_773_f64 / (2.0 * std::f64::consts::PI);
    let grid = [0.0, 0.2, zero];
    let points = sweep(&config, &lsf, SweepAxis::Doppler, &grid, &opts).unwrap();
    assert_eq!(points[0].alpha, 1.0);
    assert!(!points[1].degenerate);
    let last = &points[2];
    if last.degenerate {
        assert!(last.results.iter().all(|r| r.sum_rate == 0.0));
    } else {
        assert!(last.result(ReceiverKind::Olr).unwrap().sum_rate < 1e-6);
    }
    let (lo, hi) = points[1].bounds.unwrap();
    assert!(lo <= hi);
    assert!(sweep(&config, &lsf, SweepAxis::Doppler, &[], &opts).is_err());
    assert!(sweep(&config, &lsf, SweepAxis::Doppler, &[0.2, 0.1], &opts).is_err());
}

#[test]
fn more_antennas_dominate_doppler_sweep() {
    let grid = [0.0, 0.1, 0.2, 0.3];
    let run = |n| {
        let config = ScenarioConfig::reference(n, 10.0, 0.0);
        let lsf = uniform_interference_profile(&config, 1.0, 0.0).unwrap();
        let mut opts = SweepOptions::new(TrialPlan::new(500, &[ReceiverKind::Olr]));
        opts.bounds = None;
        sweep(&config, &lsf, SweepAxis::Doppler, &grid, &opts).unwrap()
    };
    let (a, b) = (run(50), run(100));
    for (p50, p100) in a.iter().zip(&b) {
        let r50 = p50.result(ReceiverKind::Olr).unwrap();
        let r100 = p100.result(ReceiverKind::Olr).unwrap();
        assert!(r100.sum_rate >= r50.sum_rate - r100.sum_stderr);
    }
}

#[test]
fn de_tracks_mc_better_with_more_antennas() {
    let err = |n| {
        let config = ScenarioConfig::reference(n, 10.0, 0.1);
        let lsf = uniform_interference_profile(&config, 1.0, 0.0).unwrap();
        let mut opts = SweepOptions::new(TrialPlan::new(2000, &[ReceiverKind::Olr]));
        opts.bounds = None;
        let p = &sweep(&config, &lsf, SweepAxis::SnrDb, &[10.0], &opts).unwrap()[0];
        let mc = p.result(ReceiverKind::Olr).unwrap().mean_sinr_over_users();
        let de = p.de_mean_sinr.unwrap();
        (mc - de).abs() / de
    };
    let (e25, e100) = (err(25), err(100));
    assert!(e100 < 0.03);
    assert!(e25 < 0.03);
    assert!(e100 < e25 + 0.003, "N=25: {e25}, N=100: {e100}");
}
