//! Scenario configuration and its flat `key = value` text format.
//!
//! ```text
//! # comments start with '#'
//! preset = paper-iv
//! m_users = 3
//! snr_db = -10, -10, -10
//! trials = 100
//! seed = 1
//! ```
//!
//! Lists are comma separated and may be wrapped in brackets. Unknown keys
//! are rejected. A `preset` line is applied first regardless of position;
//! explicit keys override it.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::fusion::{HardRule, MlpParams, NlmsParams, Split};
use crate::reporting::{ReportMode, ReportingChannel};
use crate::signal::SignalKind;

/// Fusion rule selected for a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FuserSpec {
    Hard(HardRule),
    Nlms,
    Mlp,
}

impl FuserSpec {
    pub fn is_adaptive(&self) -> bool {
        matches!(self, FuserSpec::Nlms | FuserSpec::Mlp)
    }

    /// Name usable in file names (`k_of_m_3` rather than `k_of_m:3`).
    pub fn file_stem(&self) -> String {
        self.to_string().replace(':', "_")
    }
}

impl fmt::Display for FuserSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FuserSpec::Hard(HardRule::And) => f.write_str("and"),
            FuserSpec::Hard(HardRule::Or) => f.write_str("or"),
            FuserSpec::Hard(HardRule::Majority) => f.write_str("majority"),
            FuserSpec::Hard(HardRule::KOfM(k)) => write!(f, "k_of_m:{k}"),
            FuserSpec::Nlms => f.write_str("nlms"),
            FuserSpec::Mlp => f.write_str("mlp"),
        }
    }
}

impl FromStr for FuserSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        Ok(match s {
            "and" => FuserSpec::Hard(HardRule::And),
            "or" => FuserSpec::Hard(HardRule::Or),
            "majority" => FuserSpec::Hard(HardRule::Majority),
            "nlms" => FuserSpec::Nlms,
            "mlp" => FuserSpec::Mlp,
            _ => {
                let k = s
                    .strip_prefix("k_of_m:")
                    .and_then(|k| k.parse::<usize>().ok())
                    .ok_or_else(|| {
                        Error::Config(format!(
                            "`fuser`: unknown fuser `{s}` (expected and, or, majority, k_of_m:K, nlms, mlp)"
                        ))
                    })?;
                FuserSpec::Hard(HardRule::KOfM(k))
            }
        })
    }
}

impl Serialize for FuserSpec {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for FuserSpec {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

pub fn parse_fuser_list(s: &str) -> Result<Vec<FuserSpec>> {
    let list = split_list(s)
        .into_iter()
        .map(str::parse)
        .collect::<Result<Vec<FuserSpec>>>()?;
    if list.is_empty() {
        return Err(Error::Config("`fuser`: at least one fuser is required".into()));
    }
    let mut seen = Vec::new();
    for f in &list {
        if seen.contains(f) {
            return Err(Error::Config(format!("`fuser`: `{f}` listed twice")));
        }
        seen.push(*f);
    }
    Ok(list)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub preset: Option<String>,
    pub m_users: usize,
    /// Real degrees of freedom per sensing window, `N = 2BT`.
    pub n_samples: usize,
    pub snr_db: Vec<f64>,
    /// Complex noise power `sigma^2` at each secondary user.
    pub noise_variance: f64,
    pub target_pfa: f64,
    pub signal: SignalKind,
    pub report_mode: ReportMode,
    pub reporting_fading_variance: f64,
    pub reporting_noise_variance: f64,
    pub csi_known: bool,
    pub max_doppler_hz: f64,
    pub sample_interval_s: f64,
    /// Block-fade the sensing channels with the Doppler process.
    pub sensing_fading: bool,
    pub fuser: Vec<FuserSpec>,
    pub trials: usize,
    pub seed: u64,
    pub train_fraction: f64,
    pub nlms_step_size: f64,
    pub nlms_epochs: usize,
    pub mlp_hidden_units: usize,
    pub mlp_learning_rate: f64,
    pub mlp_max_epochs: usize,
    pub mlp_patience: usize,
    pub mlp_split: Split,
}

pub const KNOWN_PRESETS: [&str; 2] = ["paper-iv", "fusion-comparison"];

/// Report SNR of 5 dB relative to unit fading power.
pub const FIVE_DB_REPORT_NOISE: f64 = 0.316_227_766_016_837_94;

impl ScenarioConfig {
    /// Defaults for everything except the user count and their SNRs.
    pub fn new(snr_db: Vec<f64>, trials: usize, seed: u64) -> Self {
        Self {
            preset: None,
            m_users: snr_db.len(),
            n_samples: 1000,
            snr_db,
            noise_variance: 1.0,
            target_pfa: 0.1,
            signal: SignalKind::Qam4,
            report_mode: ReportMode::Hard,
            reporting_fading_variance: 1.0,
            reporting_noise_variance: FIVE_DB_REPORT_NOISE,
            csi_known: true,
            max_doppler_hz: 100.0,
            sample_interval_s: 1e-5,
            sensing_fading: false,
            fuser: vec![
                FuserSpec::Hard(HardRule::And),
                FuserSpec::Hard(HardRule::Or),
                FuserSpec::Hard(HardRule::Majority),
                FuserSpec::Nlms,
                FuserSpec::Mlp,
            ],
            trials,
            seed,
            train_fraction: 0.5,
            nlms_step_size: 0.05,
            nlms_epochs: 1,
            mlp_hidden_units: 10,
            mlp_learning_rate: MlpParams::default().learning_rate,
            mlp_max_epochs: 1000,
            mlp_patience: 6,
            mlp_split: Split::default(),
        }
    }

    /// Named parameter sets. `paper-iv` sets 100 Hz Doppler, 1e-5 s
    /// sampling, 4-QAM and 10 hidden units, and leaves users, SNRs and
    /// trials to the caller. `fusion-comparison` adds the
    /// five-user heterogeneous scenario used to compare adaptive fusion with
    /// the majority rule.
    pub fn preset(name: &str) -> Result<Self> {
        let base = Self::new(Vec::new(), 0, 0);
        match name {
            "paper-iv" => Ok(Self {
                preset: Some(name.into()),
                m_users: 0,
                ..base
            }),
            "fusion-comparison" => Ok(Self {
                preset: Some(name.into()),
                ..Self::new(vec![-5.0, -8.0, -10.0, -12.0, -15.0], 20_000, 0)
            }),
            _ => Err(Error::Config(format!(
                "`preset`: unknown preset `{name}` (known: {})",
                KNOWN_PRESETS.join(", ")
            ))),
        }
    }

    pub fn fusion_comparison(seed: u64) -> Self {
        Self {
            seed,
            ..Self::preset("fusion-comparison").expect("known preset")
        }
    }

    pub fn reporting_channel(&self) -> Result<ReportingChannel> {
        ReportingChannel::new(self.reporting_fading_variance, self.reporting_noise_variance, self.csi_known)
    }

    pub fn nlms_params(&self) -> NlmsParams {
        NlmsParams {
            step_size: self.nlms_step_size,
            epochs: self.nlms_epochs,
            ..NlmsParams::default()
        }
    }

    pub fn mlp_params(&self) -> MlpParams {
        MlpParams {
            hidden_units: self.mlp_hidden_units,
            split: self.mlp_split,
            max_epochs: self.mlp_max_epochs,
            learning_rate: self.mlp_learning_rate,
            patience: self.mlp_patience,
            seed: self.seed,
            threshold: 0.5,
        }
    }

    /// Number of leading trials used for training adaptive fusers.
    pub fn train_trials(&self) -> usize {
        if self.fuser.iter().any(FuserSpec::is_adaptive) {
            (self.train_fraction * self.trials as f64).floor() as usize
        } else {
            0
        }
    }

    pub fn validate(&self) -> Result<()> {
        let err = |key: &str, msg: String| Err(Error::Config(format!("`{key}`: {msg}")));
        if self.m_users == 0 {
            return err("m_users", "must be at least 1".into());
        }
        if self.snr_db.len() != self.m_users {
            return err(
                "snr_db",
                format!(
                    "expected {} values (one per user, m_users = {}), got {}",
                    self.m_users,
                    self.m_users,
                    self.snr_db.len()
                ),
            );
        }
        if let Some(v) = self.snr_db.iter().find(|v| !v.is_finite() && **v != f64::NEG_INFINITY) {
            return err("snr_db", format!("{v} is not a valid SNR in dB"));
        }
        if self.n_samples < 2 || !self.n_samples.is_multiple_of(2) {
            return err(
                "n_samples",
                format!("{} must be an even count >= 2 (N = 2BT real samples)", self.n_samples),
            );
        }
        if !(self.noise_variance > 0.0 && self.noise_variance.is_finite()) {
            return err("noise_variance", format!("{} outside legal range (0, inf)", self.noise_variance));
        }
        if !(self.target_pfa > 0.0 && self.target_pfa < 1.0) {
            return err("target_pfa", format!("{} outside legal interval (0, 1)", self.target_pfa));
        }
        if !(self.reporting_fading_variance > 0.0 && self.reporting_fading_variance.is_finite()) {
            return err(
                "reporting_fading_variance",
                format!("{} outside legal range (0, inf)", self.reporting_fading_variance),
            );
        }
        if !(self.reporting_noise_variance >= 0.0 && self.reporting_noise_variance.is_finite()) {
            return err(
                "reporting_noise_variance",
                format!("{} outside legal range [0, inf)", self.reporting_noise_variance),
            );
        }
        if !(self.max_doppler_hz > 0.0 && self.max_doppler_hz.is_finite()) {
            return err("max_doppler_hz", format!("{} outside legal range (0, inf)", self.max_doppler_hz));
        }
        if !(self.sample_interval_s > 0.0 && self.sample_interval_s.is_finite()) {
            return err(
                "sample_interval_s",
                format!("{} outside legal range (0, inf)", self.sample_interval_s),
            );
        }
        if !(self.max_doppler_hz * self.sample_interval_s < 0.5) {
            return err(
                "sample_interval_s",
                format!(
                    "max_doppler_hz * sample_interval_s = {} must be < 0.5",
                    self.max_doppler_hz * self.sample_interval_s
                ),
            );
        }
        if self.fuser.is_empty() {
            return err("fuser", "at least one fuser is required".into());
        }
        for f in &self.fuser {
            if let FuserSpec::Hard(HardRule::KOfM(k)) = f {
                if *k == 0 || *k > self.m_users {
                    return err("fuser", format!("k_of_m:{k} needs k in [1, {}]", self.m_users));
                }
            }
        }
        if self.trials == 0 {
            return err("trials", "must be at least 1".into());
        }
        if !(self.train_fraction >= 0.0 && self.train_fraction < 1.0) {
            return err("train_fraction", format!("{} outside legal interval [0, 1)", self.train_fraction));
        }
        if !(self.nlms_step_size > 0.0 && self.nlms_step_size < 2.0) {
            return err("nlms_step_size", format!("{} outside legal interval (0, 2)", self.nlms_step_size));
        }
        if self.nlms_epochs == 0 {
            return err("nlms_epochs", "must be at least 1".into());
        }
        if self.mlp_hidden_units == 0 {
            return err("mlp_hidden_units", "must be at least 1".into());
        }
        if !(self.mlp_learning_rate > 0.0 && self.mlp_learning_rate.is_finite()) {
            return err("mlp_learning_rate", format!("{} outside legal range (0, inf)", self.mlp_learning_rate));
        }
        if self.mlp_patience == 0 {
            return err("mlp_patience", "must be at least 1".into());
        }
        self.mlp_split
            .validate()
            .map_err(|e| Error::Config(format!("`mlp_split`: {e}")))?;
        Ok(())
    }

    /// Parses the key-value text format, applies defaults and validates.
    pub fn from_text(text: &str) -> Result<Self> {
        let mut entries: BTreeMap<String, (usize, String)> = BTreeMap::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!("line {}: expected `key = value`, got `{line}`", lineno + 1))
            })?;
            let key = key.trim().to_string();
            if entries.insert(key.clone(), (lineno + 1, value.trim().to_string())).is_some() {
                return Err(Error::Config(format!("line {}: `{key}` given twice", lineno + 1)));
            }
        }

        let mut cfg = match entries.remove("preset") {
            Some((_, name)) => Self::preset(&name)?,
            None => Self::new(Vec::new(), 0, 0),
        };
        for required in ["m_users", "snr_db", "trials"] {
            let provided_by_preset = match required {
                "m_users" => cfg.m_users > 0,
                "snr_db" => !cfg.snr_db.is_empty(),
                _ => cfg.trials > 0,
            };
            if !provided_by_preset && !entries.contains_key(required) {
                return Err(Error::Config(format!("`{required}`: required key is missing")));
            }
        }
        for (key, (_, value)) in &entries {
            cfg.set(key, value)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_text(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "m_users" => self.m_users = parse(key, value)?,
            "n_samples" => self.n_samples = parse(key, value)?,
            "snr_db" => self.snr_db = parse_list(key, value)?,
            "noise_variance" => self.noise_variance = parse(key, value)?,
            "target_pfa" => self.target_pfa = parse(key, value)?,
            "signal" => {
                self.signal = match value {
                    "qam4" | "4qam" => SignalKind::Qam4,
                    "gaussian" => SignalKind::Gaussian,
                    _ => return Err(bad(key, value, "qam4 or gaussian")),
                }
            }
            "report_mode" => {
                self.report_mode = match value {
                    "soft" => ReportMode::Soft,
                    "hard" => ReportMode::Hard,
                    _ => return Err(bad(key, value, "soft or hard")),
                }
            }
            "reporting_fading_variance" => self.reporting_fading_variance = parse(key, value)?,
            "reporting_noise_variance" => self.reporting_noise_variance = parse(key, value)?,
            "csi_known" => self.csi_known = parse_bool(key, value)?,
            "max_doppler_hz" => self.max_doppler_hz = parse(key, value)?,
            "sample_interval_s" => self.sample_interval_s = parse(key, value)?,
            "sensing_fading" => self.sensing_fading = parse_bool(key, value)?,
            "fuser" => self.fuser = parse_fuser_list(value)?,
            "trials" => self.trials = parse(key, value)?,
            "seed" => self.seed = parse(key, value)?,
            "train_fraction" => self.train_fraction = parse(key, value)?,
            "nlms_step_size" => self.nlms_step_size = parse(key, value)?,
            "nlms_epochs" => self.nlms_epochs = parse(key, value)?,
            "mlp_hidden_units" => self.mlp_hidden_units = parse(key, value)?,
            "mlp_learning_rate" => self.mlp_learning_rate = parse(key, value)?,
            "mlp_max_epochs" => self.mlp_max_epochs = parse(key, value)?,
            "mlp_patience" => self.mlp_patience = parse(key, value)?,
            "mlp_split" => {
                let parts: Vec<f64> = parse_list(key, value)?;
                if parts.len() != 3 {
                    return Err(bad(key, value, "three fractions: train, validation, test"));
                }
                self.mlp_split = Split {
                    train: parts[0],
                    validation: parts[1],
                    test: parts[2],
                };
            }
            _ => return Err(Error::Config(format!("`{key}`: unknown key"))),
        }
        Ok(())
    }
}

fn bad(key: &str, value: &str, expected: &str) -> Error {
    Error::Config(format!("`{key}`: cannot use `{value}`, expected {expected}"))
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| bad(key, value, std::any::type_name::<T>()))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(bad(key, value, "true or false")),
    }
}

fn split_list(value: &str) -> Vec<&str> {
    let inner = value.trim().trim_start_matches('[').trim_end_matches(']');
    inner.split(',').map(str::trim).filter(|s| !s.is_empty()).collect()
}

fn parse_list<T: FromStr>(key: &str, value: &str) -> Result<Vec<T>> {
    split_list(value).into_iter().map(|v| parse(key, v)).collect()
}
