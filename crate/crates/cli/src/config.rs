//! JSON experiment configuration and its `--set` / `ANC_SEED` overrides.

use std::fs;
use std::path::{Path, PathBuf};

use anc_core::acoustics::{ArrayGeometry, Dimension, Medium, Position, Regularization};
use anc_core::algorithms::{Algorithm, MutedUpdate};
use anc_core::harness::{AmplitudeSwitch, GammaRule, RingLayout, Scenario};
use anc_core::Complex64;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::CliError;

pub const SEED_ENV: &str = "ANC_SEED";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AlgorithmChoice {
    Nlms,
    Penalty,
    Riemannian,
    #[default]
    All,
}

impl AlgorithmChoice {
    pub fn single(self) -> Option<Algorithm> {
        match self {
            AlgorithmChoice::Nlms => Some(Algorithm::Nlms),
            AlgorithmChoice::Penalty => Some(Algorithm::Penalty),
            AlgorithmChoice::Riemannian => Some(Algorithm::Riemannian),
            AlgorithmChoice::All => None,
        }
    }
}

/// Amplitude as a number or `[re, im]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Amplitude {
    Real(f64),
    Complex([f64; 2]),
}

impl From<Amplitude> for Complex64 {
    fn from(a: Amplitude) -> Self {
        match a {
            Amplitude::Real(re) => Complex64::new(re, 0.0),
            Amplitude::Complex([re, im]) => Complex64::new(re, im),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SwitchConfig {
    pub iteration: usize,
    pub amplitudes: Vec<Amplitude>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    /// Frequency for `run` and `calibrate`, Hz.
    #[serde(default = "defaults::frequency")]
    pub frequency_hz: f64,
    /// Frequencies for `sweep`, Hz.
    #[serde(default)]
    pub frequencies_hz: Option<Vec<f64>>,
    #[serde(default)]
    pub algorithm: AlgorithmChoice,
    #[serde(default = "defaults::seed")]
    pub seed: u64,
    #[serde(default = "defaults::iterations")]
    pub n_iterations: usize,
    /// `null` disables sensor noise.
    #[serde(default = "defaults::snr")]
    pub snr_db: Option<f64>,
    #[serde(default = "defaults::amplitudes")]
    pub source_amplitudes: Vec<Amplitude>,
    #[serde(default)]
    pub switch: Option<SwitchConfig>,
    #[serde(default = "defaults::mu0")]
    pub mu0: f64,
    /// `gamma` as a multiple of `lambda_max(G^H G)`.
    #[serde(default)]
    pub gamma_relative: Option<f64>,
    /// Absolute `gamma`; exclusive with `gamma_relative`.
    #[serde(default)]
    pub gamma: Option<f64>,
    /// Penalty weight; calibrated when absent.
    #[serde(default)]
    pub lambda: Option<f64>,
    /// Radiation target; calibrated when absent.
    #[serde(default, rename = "C")]
    pub c_target: Option<f64>,
    #[serde(default = "defaults::ratio")]
    pub target_ratio: f64,
    #[serde(default = "defaults::window")]
    pub moving_average_window: usize,
    #[serde(default = "defaults::yes")]
    pub safeguard: bool,
    #[serde(default)]
    pub muted_update: MutedUpdate,
    #[serde(default)]
    pub regularization: Regularization,
    #[serde(default)]
    pub medium: Medium,
    #[serde(default = "defaults::dimension")]
    pub dimension: Dimension,
    #[serde(default)]
    pub primary_positions: Option<Vec<Position>>,
    #[serde(default)]
    pub error_positions: Option<Vec<Position>>,
    /// Explicit loudspeaker positions; exclusive with `layout`.
    #[serde(default)]
    pub secondary_positions: Option<Vec<Position>>,
    #[serde(default)]
    pub layout: Option<RingLayout>,
    #[serde(default = "defaults::out_dir")]
    pub out_dir: PathBuf,
}

mod defaults {
    use super::*;

    pub fn frequency() -> f64 {
        500.0
    }
    pub fn seed() -> u64 {
        1
    }
    pub fn iterations() -> usize {
        50_000
    }
    pub fn snr() -> Option<f64> {
        Some(40.0)
    }
    pub fn amplitudes() -> Vec<Amplitude> {
        vec![Amplitude::Real(10.0), Amplitude::Real(5.0)]
    }
    pub fn mu0() -> f64 {
        1.0
    }
    pub fn ratio() -> f64 {
        0.5
    }
    pub fn window() -> usize {
        100
    }
    pub fn yes() -> bool {
        true
    }
    pub fn dimension() -> Dimension {
        Dimension::Two
    }
    pub fn out_dir() -> PathBuf {
        PathBuf::from("out")
    }
}

/// Reads the config, applies `ANC_SEED` and then `--set` overrides, and
/// validates it. Returns the effective JSON document as well.
pub fn load(path: &Path, overrides: &[String], env_seed: Option<String>) -> Result<(ConfigFile, Value), CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
    let mut doc: Value =
        serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: invalid JSON: {e}", path.display())))?;
    if !doc.is_object() {
        return Err(CliError::Config(format!("{}: top level must be an object", path.display())));
    }
    if let Some(seed) = env_seed {
        let seed: u64 = seed
            .trim()
            .parse()
            .map_err(|_| CliError::Config(format!("{SEED_ENV}={seed:?} is not an unsigned integer")))?;
        doc["seed"] = Value::from(seed);
    }
    for o in overrides {
        apply_override(&mut doc, o)?;
    }
    let cfg: ConfigFile =
        serde_json::from_value(doc.clone()).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    Ok((cfg, doc))
}

/// `KEY=VALUE`, with dotted keys for nested objects. The value is parsed as
/// JSON when possible and taken as a string otherwise.
pub fn apply_override(doc: &mut Value, text: &str) -> Result<(), CliError> {
    let (key, raw) =
        text.split_once('=').ok_or_else(|| CliError::Config(format!("--set expects KEY=VALUE, got {text:?}")))?;
    if key.is_empty() || key.split('.').any(str::is_empty) {
        return Err(CliError::Config(format!("--set has an empty key in {text:?}")));
    }
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let mut parts: Vec<&str> = key.split('.').collect();
    let last = parts.pop().expect("split yields at least one part");
    let mut node = doc;
    for p in parts {
        if !node[p].is_object() {
            node[p] = Value::Object(Default::default());
        }
        node = node.get_mut(p).expect("just inserted");
    }
    node[last] = value;
    Ok(())
}

impl ConfigFile {
    /// The scenario at `frequency`; `lambda` and `C` stay unset when they
    /// are to be calibrated.
    pub fn scenario(&self, frequency: f64) -> Result<Scenario, CliError> {
        let defaults = anc_core::harness::default_geometry();
        let secondary = match (&self.secondary_positions, &self.layout) {
            (Some(_), Some(_)) => {
                return Err(CliError::Config("give either secondary_positions or layout, not both".into()))
            }
            (Some(p), None) => p.clone(),
            (None, Some(layout)) => layout.positions().map_err(config_error)?,
            (None, None) => defaults.secondary_positions,
        };
        let primary = self.primary_positions.clone().unwrap_or(defaults.primary_positions);
        let gamma = match (self.gamma_relative, self.gamma) {
            (Some(_), Some(_)) => return Err(CliError::Config("give either gamma or gamma_relative, not both".into())),
            (Some(r), None) => GammaRule::Relative(r),
            (None, Some(g)) => GammaRule::Absolute(g),
            (None, None) => GammaRule::default(),
        };
        if !(self.target_ratio > 0.0 && self.target_ratio <= 1.0) {
            return Err(CliError::Config(format!("target_ratio must lie in (0, 1], got {}", self.target_ratio)));
        }
        let s = Scenario {
            geometry: ArrayGeometry {
                dimension: self.dimension,
                reference_count: primary.len(),
                primary_positions: primary,
                secondary_positions: secondary,
                error_positions: self.error_positions.clone().unwrap_or(defaults.error_positions),
            },
            medium: self.medium,
            frequency,
            source_amplitudes: self.source_amplitudes.iter().map(|&a| a.into()).collect(),
            snr_db: self.snr_db,
            seed: self.seed,
            n_iterations: self.n_iterations,
            switch: self.switch.as_ref().map(|sw| AmplitudeSwitch {
                iteration: sw.iteration,
                amplitudes: sw.amplitudes.iter().map(|&a| a.into()).collect(),
            }),
            algorithm: self.algorithm.single().unwrap_or(Algorithm::Nlms),
            gamma,
            mu0: self.mu0,
            lambda: self.lambda.unwrap_or(0.0),
            c_target: self.c_target,
            moving_average_window: self.moving_average_window,
            safeguard: self.safeguard,
            muted_update: self.muted_update,
            regularization: self.regularization,
        };
        s.validate().map_err(config_error)?;
        Ok(s)
    }

    pub fn sweep_frequencies(&self) -> Result<&[f64], CliError> {
        match &self.frequencies_hz {
            Some(f) if !f.is_empty() => Ok(f),
            _ => Err(CliError::Config("sweep needs a non-empty frequencies_hz list".into())),
        }
    }
}

fn config_error(e: anc_core::Error) -> CliError {
    CliError::Config(e.to_string())
}

#[cfg(test)]
mod tests {
    use super::*;
    use anc_core::harness::build_default_scenario;

    fn parse(v: Value) -> Result<ConfigFile, serde_json::Error> {
        serde_json::from_value(v)
    }

    #[test]
    fn empty_object_gives_defaults() {
        let cfg = parse(serde_json::json!({})).unwrap();
        let s = cfg.scenario(cfg.frequency_hz).unwrap();
        assert_eq!(s, {
            let mut d = build_default_scenario(500.0).unwrap();
            d.algorithm = Algorithm::Nlms;
            d
        });
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(parse(serde_json::json!({"frequncy_hz": 500})).is_err());
        assert!(parse(serde_json::json!({"medium": {"c": 343, "rho": 1.3, "t": 20}})).is_err());
    }

    #[test]
    fn null_snr_means_noiseless() {
        let cfg = parse(serde_json::json!({"snr_db": null})).unwrap();
        assert_eq!(cfg.snr_db, None);
    }

    #[test]
    fn overrides() {
        let mut doc = serde_json::json!({"seed": 1, "medium": {"c": 343.0, "rho": 1.3}});
        apply_override(&mut doc, "seed=7").unwrap();
        apply_override(&mut doc, "algorithm=riemannian").unwrap();
        apply_override(&mut doc, "medium.c=340").unwrap();
        apply_override(&mut doc, "switch.iteration=10").unwrap();
        apply_override(&mut doc, "frequencies_hz=[100,200]").unwrap();
        assert_eq!(doc["seed"], 7);
        assert_eq!(doc["algorithm"], "riemannian");
        assert_eq!(doc["medium"]["c"], 340);
        assert_eq!(doc["switch"]["iteration"], 10);
        assert_eq!(doc["frequencies_hz"][1], 200);
        assert!(apply_override(&mut doc, "noequals").is_err());
        assert!(apply_override(&mut doc, "a..b=1").is_err());
    }

    #[test]
    fn exclusive_fields() {
        let cfg = parse(serde_json::json!({"gamma": 1e-6, "gamma_relative": 1e-4})).unwrap();
        assert!(cfg.scenario(500.0).is_err());
        let cfg = parse(serde_json::json!({"layout": {"radii": [1.0], "split": [12], "offsets_deg": [0.0]},
            "secondary_positions": [[1.0, 0.0]]}))
        .unwrap();
        assert!(cfg.scenario(500.0).is_err());
    }

    #[test]
    fn complex_amplitudes() {
        let cfg = parse(serde_json::json!({"source_amplitudes": [10.0, [0.0, 5.0]]})).unwrap();
        let s = cfg.scenario(500.0).unwrap();
        assert_eq!(s.source_amplitudes[1], Complex64::new(0.0, 5.0));
    }
}
