use std::fmt;
use std::fs;

use aging_mimo::analysis::DeOptions;
use aging_mimo::montecarlo::{sweep, SweepAxis, SweepOptions, SweepPoint, TrialPlan};
use aging_mimo::receivers::ReceiverKind;
use aging_mimo::scenario::file::{ConfigFile, FadingSpec, Scenario};
use aging_mimo::validation::{run_suite, SUITES};
use log::info;
use serde_json::json;

use crate::args::{parse_grid, Command, Global};
use crate::output::{num, RunIdentity, Table};

pub const ENV_PREFIX: &str = "AGING_MIMO_";

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Core(aging_mimo::Error),
    Io(std::io::Error),
    /// Output was produced but a check failed.
    Failed(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Failed(_) => 1,
            CliError::Usage(_) | CliError::Io(_) => 2,
            CliError::Core(e) if e.is_numerical() => 3,
            CliError::Core(aging_mimo::Error::Trial { .. }) => 3,
            CliError::Core(_) => 2,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Failed(m) => f.write_str(m),
            CliError::Core(e) => write!(f, "{e}"),
            CliError::Io(e) => write!(f, "i/o: {e}"),
        }
    }
}

impl From<aging_mimo::Error> for CliError {
    fn from(e: aging_mimo::Error) -> Self {
        CliError::Core(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e)
    }
}

/// `AGING_MIMO_<KEY>` with dots turned into underscores.
pub fn env_var_name(key: &str) -> String {
    format!("{ENV_PREFIX}{}", key.to_uppercase().replace('.', "_"))
}

fn env_overrides() -> Vec<(String, String)> {
    ConfigFile::KEYS
        .iter()
        .filter_map(|key| std::env::var(env_var_name(key)).ok().map(|v| (key.to_string(), v)))
        .collect()
}

/// File, then environment, then `--seed`.
pub fn load_scenario(global: &Global) -> Result<(ConfigFile, Scenario), CliError> {
    let text = match &global.config {
        Some(path) => fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?,
        None => String::new(),
    };
    let mut file = ConfigFile::from_toml_with_overrides(&text, &env_overrides())?;
    if let Some(seed) = global.seed {
        file.seed = seed;
    }
    let scenario = file.resolve()?;
    Ok((file, scenario))
}

fn grid_or(global: &Global, default: &str) -> Result<Vec<f64>, CliError> {
    parse_grid(global.grid.as_deref().unwrap_or(default)).map_err(CliError::Usage)
}

fn plan(global: &Global, receivers: &[ReceiverKind]) -> Result<TrialPlan, CliError> {
    if global.trials == 0 {
        return Err(CliError::Usage("--trials must be at least 1".into()));
    }
    let mut receivers = receivers.to_vec();
    receivers.sort();
    receivers.dedup();
    let mut p = TrialPlan::new(global.trials, &receivers);
    p.sinr_model = global.sinr_model.into();
    Ok(p)
}

fn de_options(global: &Global) -> DeOptions {
    DeOptions {
        form: global.de_form.into(),
        ..DeOptions::default()
    }
}

fn identity(command: &'static str, global: &Global, file: &ConfigFile, scenario: &Scenario, parameters: serde_json::Value) -> RunIdentity {
    RunIdentity {
        tool: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        command,
        seed: scenario.config.seed,
        scenario: json!({ "file": file, "resolved": scenario }),
        parameters: json!({
            "trials": global.trials,
            "sinr_model": format!("{:?}", global.sinr_model),
            "bound_form": format!("{:?}", global.bound_form),
            "de_form": format!("{:?}", global.de_form),
            "command": parameters,
        }),
        overhead_factor: scenario.config.overhead(),
    }
}

pub fn run(command: &Command, global: &Global, workers: usize) -> Result<(), CliError> {
    match command {
        Command::SweepSnr { beta_cross } => sweep_snr(global, beta_cross, workers),
        Command::SweepDoppler { antennas } => sweep_doppler(global, antennas, workers),
        Command::Bounds => bounds(global, workers),
        Command::Validate { suite } => validate(global, suite),
    }
}

fn sweep_snr(global: &Global, betas: &[f64], workers: usize) -> Result<(), CliError> {
    let (file, scenario) = load_scenario(global)?;
    let grid = grid_or(global, "-10:40:2")?;
    let plan = plan(global, &global.receivers)?;
    let specs: Vec<FadingSpec> = if betas.is_empty() {
        vec![scenario.fading.clone()]
    } else {
        match scenario.fading {
            FadingSpec::Uniform { shadow_db, .. } => betas
                .iter()
                .map(|&beta_cross| FadingSpec::Uniform { beta_cross, shadow_db })
                .collect(),
            FadingSpec::Hexagonal { .. } => {
                return Err(CliError::Usage("--beta-cross only applies to the uniform fading mode".into()))
            }
        }
    };
    let id = identity(
        "sweep-snr",
        global,
        &file,
        &scenario,
        json!({ "grid": grid, "receivers": plan.receivers, "fading": specs }),
    );
    let mut table = Table::new(
        &["snr_db", "receiver", "beta_cross", "mean_R", "stderr", "de_R", "lower_bound_R", "upper_bound_R"],
        id.hash(),
    );
    let overhead = scenario.config.overhead();
    for spec in &specs {
        let lsf = spec.generate(&scenario.config)?;
        let mut opts = SweepOptions::new(plan.clone());
        opts.de = Some(de_options(global));
        opts.bounds = Some((global.bound_form.into(), Default::default()));
        info!("sweep-snr: {} points, fading {spec:?}", grid.len());
        let points = sweep(&scenario.config, &lsf, SweepAxis::SnrDb, &grid, &opts)?;
        for p in &points {
            for r in &p.results {
                let olr = r.receiver == ReceiverKind::Olr;
                table.row(&[
                    num(Some(p.value)),
                    r.receiver.to_string(),
                    num(spec.beta_cross()),
                    num(Some(overhead * r.sum_rate)),
                    num(Some(overhead * r.sum_stderr)),
                    num(p.de_sum_rate.filter(|_| olr).map(|x| overhead * x)),
                    num(p.bounds.filter(|_| olr).map(|b| overhead * b.0)),
                    num(p.bounds.filter(|_| olr).map(|b| overhead * b.1)),
                ]);
            }
        }
    }
    table.finish(global.out.as_deref(), &id, workers)?;
    Ok(())
}

fn sweep_doppler(global: &Global, antennas: &[usize], workers: usize) -> Result<(), CliError> {
    let (file, scenario) = load_scenario(global)?;
    let grid = grid_or(global, "0:0.45:0.01")?;
    let plan = plan(global, &global.receivers)?;
    if antennas.is_empty() {
        return Err(CliError::Usage("--antennas needs at least one value".into()));
    }
    let id = identity(
        "sweep-doppler",
        global,
        &file,
        &scenario,
        json!({ "grid": grid, "receivers": plan.receivers, "antennas": antennas }),
    );
    let mut table = Table::new(
        &["fD_Ts", "alpha", "receiver", "N", "mean_R", "stderr", "de_R", "degenerate"],
        id.hash(),
    );
    let lsf = scenario.fading.generate(&scenario.config)?;
    for &n in antennas {
        let mut config = scenario.config.clone();
        config.antennas = n;
        config.validate()?;
        let mut opts = SweepOptions::new(plan.clone());
        opts.de = Some(de_options(global));
        opts.bounds = None;
        info!("sweep-doppler: N = {n}, {} points", grid.len());
        let points = sweep(&config, &lsf, SweepAxis::Doppler, &grid, &opts)?;
        let overhead = config.overhead();
        for p in &points {
            for r in &p.results {
                let olr = r.receiver == ReceiverKind::Olr;
                table.row(&[
                    num(Some(p.value)),
                    num(Some(p.alpha)),
                    r.receiver.to_string(),
                    n.to_string(),
                    num(Some(overhead * r.sum_rate)),
                    num(Some(overhead * r.sum_stderr)),
                    num(p.de_sum_rate.filter(|_| olr).map(|x| overhead * x)),
                    p.degenerate.to_string(),
                ]);
            }
        }
    }
    table.finish(global.out.as_deref(), &id, workers)?;
    Ok(())
}

/// lower − 2σ ≤ mc ≤ upper + 2σ
pub fn sandwich_holds(point: &SweepPoint) -> bool {
    match (point.result(ReceiverKind::Olr), point.bounds) {
        (Some(r), Some((lo, hi))) => {
            let slack = 2.0 * r.sum_stderr;
            lo - slack <= r.sum_rate && r.sum_rate <= hi + slack
        }
        _ => true,
    }
}

fn bounds(global: &Global, workers: usize) -> Result<(), CliError> {
    let (file, scenario) = load_scenario(global)?;
    let grid = grid_or(global, "-10:40:2")?;
    let plan = plan(global, &[ReceiverKind::Olr])?;
    let id = identity("bounds", global, &file, &scenario, json!({ "grid": grid }));
    let mut table = Table::new(
        &["snr_db", "mc_R", "mc_stderr", "lower_R", "upper_R", "de_R", "sandwich_ok"],
        id.hash(),
    );
    let lsf = scenario.fading.generate(&scenario.config)?;
    let mut opts = SweepOptions::new(plan);
    opts.de = Some(de_options(global));
    opts.bounds = Some((global.bound_form.into(), Default::default()));
    let points = sweep(&scenario.config, &lsf, SweepAxis::SnrDb, &grid, &opts)?;
    let overhead = scenario.config.overhead();
    let mut violations = Vec::new();
    for p in &points {
        let r = p.result(ReceiverKind::Olr).expect("OLR requested");
        let ok = sandwich_holds(p);
        if !ok {
            violations.push(p.value);
        }
        table.row(&[
            num(Some(p.value)),
            num(Some(overhead * r.sum_rate)),
            num(Some(overhead * r.sum_stderr)),
            num(p.bounds.map(|b| overhead * b.0)),
            num(p.bounds.map(|b| overhead * b.1)),
            num(p.de_sum_rate.map(|x| overhead * x)),
            ok.to_string(),
        ]);
    }
    table.finish(global.out.as_deref(), &id, workers)?;
    if violations.is_empty() {
        Ok(())
    } else {
        Err(CliError::Failed(format!(
            "bounds do not sandwich the simulated rate at snr_db = {violations:?}"
        )))
    }
}

fn validate(global: &Global, suites: &[String]) -> Result<(), CliError> {
    let selected: Vec<String> = if suites.is_empty() {
        SUITES.iter().map(|s| s.to_string()).collect()
    } else {
        suites.to_vec()
    };
    for s in &selected {
        if !SUITES.contains(&s.as_str()) {
            return Err(CliError::Usage(format!("unknown suite `{s}` (expected one of {})", SUITES.join(", "))));
        }
    }
    let seed = global.seed.unwrap_or(1);
    let mut failed = Vec::new();
    for s in &selected {
        let report = run_suite(s, seed)?;
        for c in &report.checks {
            println!(
                "{} {}: {} (measured {:e}, limit {:e})",
                if c.passed { "PASS" } else { "FAIL" },
                report.suite,
                c.name,
                c.measured,
                c.tolerance
            );
        }
        if !report.passed() {
            failed.push(report.suite);
        }
    }
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::Failed(format!("validation failed: {}", failed.join(", "))))
    }
}

