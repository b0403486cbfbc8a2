//! Run configuration: one TOML file holding every physical parameter.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::{
    ChannelCalibration, ChannelSet, Device, SimOptions, NV_RABI_MW1_HZ, NV_RABI_MW2_HZ,
};
use crate::pulse::Channel;
use crate::rdj::all_programs;
use crate::readout::{calibrate_equal_rates, ReadoutConfig, ReadoutError};
use crate::spin::{LevelStructure, ZfsParams};

/// Mean RDJ visibility the default dephasing rates are calibrated to.
pub const DEFAULT_TARGET_VISIBILITY: f64 = 0.596;
/// Largest carrier offset from the line still treated as resonant, Hz.
pub const RESONANCE_TOLERANCE_HZ: f64 = 1.0;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("invalid configuration: {0}")]
    Toml(#[from] toml::de::Error),
    #[error("invalid configuration: {0}")]
    Invalid(String),
    #[error(transparent)]
    Readout(#[from] ReadoutError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelConfig {
    pub carrier_hz: f64,
    pub rabi_hz: f64,
    pub dephasing_rate_per_s: f64,
}

impl ChannelConfig {
    fn calibration(&self, channel: Channel) -> ChannelCalibration {
        ChannelCalibration::new(
            channel,
            self.carrier_hz,
            self.rabi_hz,
            self.dephasing_rate_per_s,
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    /// Permit carriers away from the transition frequencies.
    pub allow_detuning: bool,
    pub zfs: ZfsParams,
    pub mw1: ChannelConfig,
    pub mw2: ChannelConfig,
    pub sim: SimOptions,
    pub readout: ReadoutConfig,
}

impl Default for RunConfig {
    /// Sample parameters, resonant carriers, and a common dephasing rate
    /// for which the mean predicted visibility of the four RDJ programs is
    /// [`DEFAULT_TARGET_VISIBILITY`].
    fn default() -> Self {
        let zfs = ZfsParams::nv_sample();
        let device = Device::resonant(&zfs, NV_RABI_MW1_HZ, NV_RABI_MW2_HZ);
        let rate =
            calibrate_equal_rates(&all_programs(), &device.channels, DEFAULT_TARGET_VISIBILITY)
                .expect("default target is reachable");
        let channel = |c: &ChannelCalibration| ChannelConfig {
            carrier_hz: c.carrier_hz,
            rabi_hz: c.rabi_hz,
            dephasing_rate_per_s: rate,
        };
        Self {
            seed: 0,
            allow_detuning: false,
            zfs,
            mw1: channel(&device.channels.mw1),
            mw2: channel(&device.channels.mw2),
            sim: SimOptions::default(),
            readout: ReadoutConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let cfg: RunConfig = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is always representable")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let levels = LevelStructure::from_zfs(&self.zfs);
        for (channel, c) in [(Channel::Mw1, &self.mw1), (Channel::Mw2, &self.mw2)] {
            if !c.calibration(channel).is_valid() {
                return Err(ConfigError::Invalid(format!(
                    "{channel}: rabi_hz must be positive and dephasing_rate_per_s non-negative"
                )));
            }
            let line = levels.transition_to(channel.target());
            if !self.allow_detuning && (c.carrier_hz - line).abs() > RESONANCE_TOLERANCE_HZ {
                return Err(ConfigError::Invalid(format!(
                    "{channel} carrier {} Hz is off its transition at {line} Hz \
                     (set allow_detuning = true to permit this)",
                    c.carrier_hz
                )));
            }
        }
        let s = &self.sim;
        if !(s.time_step_s > 0.0 && s.time_step_s.is_finite()) {
            return Err(ConfigError::Invalid(
                "sim.time_step_s must be positive".into(),
            ));
        }
        if s.quasistatic_samples == 0 {
            return Err(ConfigError::Invalid(
                "sim.quasistatic_samples must be at least 1".into(),
            ));
        }
        if !(s.quasistatic_sigma_hz >= 0.0 && s.idle_dephasing_rate_per_s >= 0.0) {
            return Err(ConfigError::Invalid(
                "sim.quasistatic_sigma_hz and sim.idle_dephasing_rate_per_s must be non-negative"
                    .into(),
            ));
        }
        self.readout.validate()?;
        Ok(())
    }

    pub fn channels(&self) -> ChannelSet {
        ChannelSet {
            mw1: self.mw1.calibration(Channel::Mw1),
            mw2: self.mw2.calibration(Channel::Mw2),
        }
    }

    pub fn to_device(&self) -> Device {
        Device {
            levels: LevelStructure::from_zfs(&self.zfs),
            channels: self.channels(),
        }
    }
}
