//! TOML scenario files. Powers are written in dB here and converted to
//! linear scale exactly once, in [`ConfigFile::resolve`].

use serde::{Deserialize, Serialize};
use toml::{Table, Value};

use super::{
    db_to_linear, fading_rng, hexagonal_large_scale, uniform_interference_profile, DopplerParams,
    LargeScaleFading, ScenarioConfig,
};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConfigFile {
    pub cells: usize,
    pub users: usize,
    pub antennas: usize,
    pub snr_db: f64,
    /// Pilot SNR; defaults to `snr_db` (p_p = p).
    pub pilot_snr_db: Option<f64>,
    pub pilot_len: usize,
    pub coherence_len: usize,
    pub seed: u64,
    pub doppler: DopplerSection,
    pub fading: FadingSection,
}

#[derive(Clone, Debug, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DopplerSection {
    pub normalized: Option<f64>,
    pub velocity_mps: Option<f64>,
    pub carrier_hz: Option<f64>,
    pub ts_s: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FadingMode {
    Uniform,
    Hexagonal,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FadingSection {
    pub mode: FadingMode,
    pub beta_cross: f64,
    /// Log-normal shadowing σ in dB; 0 for `uniform`, 8 for `hexagonal` when absent.
    pub shadow_db: Option<f64>,
    pub pathloss_exp: f64,
    pub cell_radius: f64,
}

impl Default for FadingSection {
    fn default() -> Self {
        FadingSection {
            mode: FadingMode::Uniform,
            beta_cross: 1.0,
            shadow_db: None,
            pathloss_exp: 4.0,
            cell_radius: 1.0,
        }
    }
}

impl Default for ConfigFile {
    fn default() -> Self {
        ConfigFile {
            cells: 7,
            users: 10,
            antennas: 100,
            snr_db: 10.0,
            pilot_snr_db: None,
            pilot_len: 10,
            coherence_len: 196,
            seed: 1,
            doppler: DopplerSection::default(),
            fading: FadingSection::default(),
        }
    }
}

/// How the large-scale fading of a scenario is produced.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase")]
pub enum FadingSpec {
    Uniform {
        beta_cross: f64,
        shadow_db: f64,
    },
    Hexagonal {
        cell_radius: f64,
        pathloss_exp: f64,
        shadow_db: f64,
    },
}

impl FadingSpec {
    /// Deterministic in the config's seed.
    pub fn generate(&self, config: &ScenarioConfig) -> Result<LargeScaleFading> {
        match *self {
            FadingSpec::Uniform {
                beta_cross,
                shadow_db,
            } => uniform_interference_profile(config, beta_cross, shadow_db),
            FadingSpec::Hexagonal {
                cell_radius,
                pathloss_exp,
                shadow_db,
            } => hexagonal_large_scale(
                config,
                cell_radius,
                pathloss_exp,
                shadow_db,
                &mut fading_rng(config.seed),
            ),
        }
    }

    pub fn beta_cross(&self) -> Option<f64> {
        match *self {
            FadingSpec::Uniform { beta_cross, .. } => Some(beta_cross),
            FadingSpec::Hexagonal { .. } => None,
        }
    }
}

/// A resolved scenario: linear-scale config plus fading recipe.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub config: ScenarioConfig,
    pub fading: FadingSpec,
}

impl ConfigFile {
    /// Every settable key, dotted for nested sections.
    pub const KEYS: &'static [&'static str] = &[
        "cells",
        "users",
        "antennas",
        "snr_db",
        "pilot_snr_db",
        "pilot_len",
        "coherence_len",
        "seed",
        "doppler.normalized",
        "doppler.velocity_mps",
        "doppler.carrier_hz",
        "doppler.ts_s",
        "fading.mode",
        "fading.beta_cross",
        "fading.shadow_db",
        "fading.pathloss_exp",
        "fading.cell_radius",
    ];

    pub fn from_toml(text: &str) -> Result<Self> {
        Self::from_toml_with_overrides(text, &[])
    }

    /// Parses `text`, then applies `key = value` overrides (values given as
    /// strings, typed by inspection) before validation.
    pub fn from_toml_with_overrides(text: &str, overrides: &[(String, String)]) -> Result<Self> {
        let mut table: Table = text
            .parse()
            .map_err(|e: toml::de::Error| Error::ConfigFile(e.to_string()))?;
        for (key, raw) in overrides {
            set_key(&mut table, key, raw)?;
        }
        table
            .try_into()
            .map_err(|e: toml::de::Error| Error::ConfigFile(e.to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is always serializable")
    }

    pub fn doppler(&self) -> Result<DopplerParams> {
        let d = &self.doppler;
        let physical = [d.velocity_mps, d.carrier_hz, d.ts_s];
        let any_physical = physical.iter().any(Option::is_some);
        match (d.normalized, any_physical) {
            (Some(_), true) => Err(Error::ConfigFile(
                "give either doppler.normalized or the velocity/carrier/ts triple, not both".into(),
            )),
            (Some(x), false) => Ok(DopplerParams::Normalized(x)),
            (None, true) => match physical {
                [Some(v), Some(fc), Some(ts)] => Ok(DopplerParams::Physical {
                    velocity_mps: v,
                    carrier_hz: fc,
                    sample_period_s: ts,
                }),
                _ => Err(Error::ConfigFile(
                    "doppler.velocity_mps, doppler.carrier_hz and doppler.ts_s must be given together"
                        .into(),
                )),
            },
            (None, false) => Ok(DopplerParams::Normalized(0.1)),
        }
    }

    pub fn resolve(&self) -> Result<Scenario> {
        let power = db_to_linear(self.snr_db);
        let config = ScenarioConfig {
            cells: self.cells,
            users: self.users,
            antennas: self.antennas,
            power,
            pilot_power: self.pilot_snr_db.map_or(power, db_to_linear),
            pilot_len: self.pilot_len,
            coherence_len: self.coherence_len,
            doppler: self.doppler()?,
            seed: self.seed,
        };
        config.validate()?;
        let f = &self.fading;
        let fading = match f.mode {
            FadingMode::Uniform => FadingSpec::Uniform {
                beta_cross: f.beta_cross,
                shadow_db: f.shadow_db.unwrap_or(0.0),
            },
            FadingMode::Hexagonal => FadingSpec::Hexagonal {
                cell_radius: f.cell_radius,
                pathloss_exp: f.pathloss_exp,
                shadow_db: f.shadow_db.unwrap_or(8.0),
            },
        };
        Ok(Scenario { config, fading })
    }
}

fn typed_value(raw: &str) -> Value {
    let raw = raw.trim();
    if let Ok(i) = raw.parse::<i64>() {
        Value::Integer(i)
    } else if let Ok(x) = raw.parse::<f64>() {
        Value::Float(x)
    } else if let Ok(b) = raw.parse::<bool>() {
        Value::Boolean(b)
    } else {
        Value::String(raw.to_string())
    }
}

/// Sets a dotted key. Setting one Doppler form clears the other so an
/// override always wins over the file.
pub fn set_key(table: &mut Table, key: &str, raw: &str) -> Result<()> {
    if !ConfigFile::KEYS.contains(&key) {
        return Err(Error::ConfigFile(format!("unknown key `{key}`")));
    }
    let value = typed_value(raw);
    match key.split_once('.') {
        None => {
            table.insert(key.to_string(), value);
        }
        Some((section, field)) => {
            let entry = table
                .entry(section.to_string())
                .or_insert_with(|| Value::Table(Table::new()));
            let sub = entry
                .as_table_mut()
                .ok_or_else(|| Error::ConfigFile(format!("`{section}` is not a table")))?;
            if section == "doppler" {
                if field == "normalized" {
                    for k in ["velocity_mps", "carrier_hz", "ts_s"] {
                        sub.remove(k);
                    }
                } else {
                    sub.remove("normalized");
                }
            }
            sub.insert(field.to_string(), value);
        }
    }
    Ok(())
}
