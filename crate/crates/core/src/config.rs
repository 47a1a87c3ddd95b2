//! Plain-text `key = value` configuration for mapping and calibration.
//!
//! Blank lines and lines starting with `#` are ignored. Recognized keys:
//!
//! | key                | meaning                                   | default |
//! |--------------------|-------------------------------------------|---------|
//! | `finger_gain`      | finger-group gain on own grip             | 1.0     |
//! | `palm_gain`        | palm-group gain on opponent grip          | 1.0     |
//! | `contact_on`       | clasp start threshold                     | 0.2     |
//! | `contact_off`      | clasp end threshold                       | 0.1     |
//! | `thumb_base_group` | `finger` or `palm`                        | finger  |
//! | `thumb_open_deg`   | thumb IP angle with the hand open         | 0       |
//! | `thumb_closed_deg` | thumb IP angle at full flexion            | 60      |
//! | `middle_open_deg`  | middle PIP angle with the hand open       | 0       |
//! | `middle_closed_deg`| middle PIP angle at full flexion          | 90      |
//! | `thumb_weight`     | thumb share of the blended grip           | 0.5     |
//! | `hold_ms`          | remote hold window before fading          | 150     |
//! | `fade_ms`          | staleness at which remote grip reaches 0  | 500     |
//! | `clusters`         | emotion map cluster count                 | 8       |

use std::fmt::Write as _;
use std::path::Path;

use thiserror::Error;

use crate::model::{GripCalibration, MappingParams, ModelError};
use crate::protocol::LossPolicy;

/// Environment variable naming a config file to load when none is given.
pub const CONFIG_ENV: &str = "HANDSHAKE_CONFIG";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("line {line}: {reason}")]
    Syntax { line: usize, reason: String },
    #[error("line {line}: unknown key {key:?}")]
    UnknownKey { line: usize, key: String },
    #[error(transparent)]
    Invalid(#[from] ModelError),
    #[error("reading config: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EngineConfig {
    pub mapping: MappingParams,
    pub calibration: GripCalibration,
    pub loss: LossPolicy,
    pub clusters: usize,
}

impl Default for EngineConfig {
    fn default() -> Self {
        Self {
            mapping: MappingParams::default(),
            calibration: GripCalibration::default(),
            loss: LossPolicy::default(),
            clusters: crate::analysis::MapConfig::default().k,
        }
    }
}

impl EngineConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = EngineConfig::default();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let trimmed = raw.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let (key, value) = trimmed.split_once('=').ok_or_else(|| ConfigError::Syntax {
                line,
                reason: "expected key = value".into(),
            })?;
            let key = key.trim();
            let value = value.trim();
            let num = || -> Result<f64, ConfigError> {
                value.parse::<f64>().map_err(|_| ConfigError::Syntax {
                    line,
                    reason: format!("{key}: not a number: {value:?}"),
                })
            };
            let int = || -> Result<u64, ConfigError> {
                value.parse::<u64>().map_err(|_| ConfigError::Syntax {
                    line,
                    reason: format!("{key}: not an unsigned integer: {value:?}"),
                })
            };
            match key {
                "finger_gain" => cfg.mapping.finger_gain = num()?,
                "palm_gain" => cfg.mapping.palm_gain = num()?,
                "contact_on" => cfg.mapping.contact_on = num()?,
                "contact_off" => cfg.mapping.contact_off = num()?,
                "thumb_base_group" => cfg.mapping.thumb_base_group = value.parse()?,
                "thumb_open_deg" => cfg.calibration.thumb_open_deg = num()?,
                "thumb_closed_deg" => cfg.calibration.thumb_closed_deg = num()?,
                "middle_open_deg" => cfg.calibration.middle_open_deg = num()?,
                "middle_closed_deg" => cfg.calibration.middle_closed_deg = num()?,
                "thumb_weight" => cfg.calibration.thumb_weight = num()?,
                "hold_ms" => cfg.loss.hold_us = int()? * 1000,
                "fade_ms" => cfg.loss.fade_us = int()? * 1000,
                "clusters" => {
                    cfg.clusters = int()? as usize;
                    if cfg.clusters == 0 {
                        return Err(ConfigError::Syntax {
                            line,
                            reason: "clusters must be positive".into(),
                        });
                    }
                }
                _ => {
                    return Err(ConfigError::UnknownKey {
                        line,
                        key: key.to_string(),
                    })
                }
            }
        }
        cfg.mapping.validate()?;
        cfg.calibration.validate()?;
        cfg.loss.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    /// Canonical text form; `parse(to_text())` is the identity.
    pub fn to_text(&self) -> String {
        let m = &self.mapping;
        let c = &self.calibration;
        let mut out = String::new();
        let _ = writeln!(out, "finger_gain = {}", m.finger_gain);
        let _ = writeln!(out, "palm_gain = {}", m.palm_gain);
        let _ = writeln!(out, "contact_on = {}", m.contact_on);
        let _ = writeln!(out, "contact_off = {}", m.contact_off);
        let _ = writeln!(out, "thumb_base_group = {}", m.thumb_base_group);
        let _ = writeln!(out, "thumb_open_deg = {}", c.thumb_open_deg);
        let _ = writeln!(out, "thumb_closed_deg = {}", c.thumb_closed_deg);
        let _ = writeln!(out, "middle_open_deg = {}", c.middle_open_deg);
        let _ = writeln!(out, "middle_closed_deg = {}", c.middle_closed_deg);
        let _ = writeln!(out, "thumb_weight = {}", c.thumb_weight);
        let _ = writeln!(out, "hold_ms = {}", self.loss.hold_us / 1000);
        let _ = writeln!(out, "fade_ms = {}", self.loss.fade_us / 1000);
        let _ = writeln!(out, "clusters = {}", self.clusters);
        out
    }
}
