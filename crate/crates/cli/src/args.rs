use std::path::PathBuf;

use aging_mimo::analysis::{BoundForm, DeForm};
use aging_mimo::receivers::{ReceiverKind, SinrModel};
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "aging-mimo", version, about = "Uplink massive-MIMO sweeps under pilot contamination and channel aging")]
pub struct Cli {
    #[command(flatten)]
    pub global: Global,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Global {
    /// Scenario file (TOML). Keys can also be set through AGING_MIMO_<KEY>
    /// environment variables, e.g. AGING_MIMO_DOPPLER_NORMALIZED=0.2.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Master RNG seed (overrides the config file).
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Monte-Carlo trials per grid point.
    #[arg(long, global = true, default_value_t = 5000)]
    pub trials: usize,

    /// Output CSV path; a `<out>.manifest.json` is written next to it.
    /// Without it the table goes to stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,

    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long, global = true)]
    pub workers: Option<usize>,

    /// Receivers to simulate.
    #[arg(long, global = true, value_delimiter = ',', value_parser = parse_receiver, default_value = "olr,mmse,mrc,zf")]
    pub receivers: Vec<ReceiverKind>,

    /// Sweep grid as start:stop:step (stop inclusive).
    #[arg(long, global = true)]
    pub grid: Option<String>,

    /// Which form of the closed-form bounds to report.
    #[arg(long, global = true, value_enum, default_value_t = BoundFormArg::Corrected)]
    pub bound_form: BoundFormArg,

    /// Which deterministic-equivalent recursion to report.
    #[arg(long, global = true, value_enum, default_value_t = DeFormArg::Effective)]
    pub de_form: DeFormArg,

    /// How pilot-contaminated copies of a user's own channel are counted.
    #[arg(long, global = true, value_enum, default_value_t = SinrModelArg::ColumnRemoved)]
    pub sinr_model: SinrModelArg,

    /// More log output (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sum spectral efficiency versus SNR.
    SweepSnr {
        /// Cross-cell gains to run (uniform profile); defaults to the config value.
        #[arg(long, value_delimiter = ',')]
        beta_cross: Vec<f64>,
    },
    /// Sum spectral efficiency versus normalized Doppler.
    SweepDoppler {
        /// Antenna counts to run.
        #[arg(long, value_delimiter = ',', default_value = "50,100")]
        antennas: Vec<usize>,
    },
    /// Bounds and deterministic equivalent against Monte-Carlo (OLR) versus SNR.
    Bounds,
    /// Run the numerical self-checks.
    Validate {
        /// Only these suites (specfun, eigenpdf, eigensplit, symbol, optimality, ties).
        #[arg(long, value_delimiter = ',')]
        suite: Vec<String>,
    },
}

fn parse_receiver(s: &str) -> Result<ReceiverKind, String> {
    s.parse().map_err(|e: aging_mimo::Error| e.to_string())
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum BoundFormArg {
    Corrected,
    Printed,
}

impl From<BoundFormArg> for BoundForm {
    fn from(a: BoundFormArg) -> Self {
        match a {
            BoundFormArg::Corrected => BoundForm::Corrected,
            BoundFormArg::Printed => BoundForm::Printed,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum DeFormArg {
    Effective,
    PerCell,
}

impl From<DeFormArg> for DeForm {
    fn from(a: DeFormArg) -> Self {
        match a {
            DeFormArg::Effective => DeForm::Effective,
            DeFormArg::PerCell => DeForm::PerCell,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum SinrModelArg {
    ColumnRemoved,
    Full,
}

impl From<SinrModelArg> for SinrModel {
    fn from(a: SinrModelArg) -> Self {
        match a {
            SinrModelArg::ColumnRemoved => SinrModel::ColumnRemoved,
            SinrModelArg::Full => SinrModel::Full,
        }
    }
}

/// Parses `start:stop:step` into an inclusive grid.
pub fn parse_grid(spec: &str) -> Result<Vec<f64>, String> {
    let parts: Vec<&str> = spec.split(':').collect();
    let [start, stop, step] = parts.as_slice() else {
        return Err(format!("grid `{spec}` is not start:stop:step"));
    };
    let num = |s: &str| s.trim().parse::<f64>().map_err(|_| format!("grid `{spec}`: `{s}` is not a number"));
    let (start, stop, step) = (num(start)?, num(stop)?, num(step)?);
    if !(step > 0.0) || !(stop >= start) || !start.is_finite() || !stop.is_finite() {
        return Err(format!("grid `{spec}` is empty (need stop ≥ start and step > 0)"));
    }
    let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
    Ok((0..count)
        .map(|i| {
            let v = start + i as f64 * step;
            (v * 1e10).round() / 1e10
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grids() {
        assert_eq!(parse_grid("-10:40:2").unwrap().len(), 26);
        let g = parse_grid("0:0.45:0.01").unwrap();
        assert_eq!(g.len(), 46);
        assert_eq!(g[30], 0.3);
        assert_eq!(parse_grid("5:5:1").unwrap(), vec![5.0]);
        assert!(parse_grid("").is_err());
        assert!(parse_grid("1:0:1").is_err());
        assert!(parse_grid("0:1:0").is_err());
        assert!(parse_grid("0:1").is_err());
    }
}
