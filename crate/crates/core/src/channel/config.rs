use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Protocol {
    Bb84,
    Sarg04,
    Dps,
    Bbm92,
}

impl std::fmt::Display for Protocol {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Protocol::Bb84 => "bb84",
            Protocol::Sarg04 => "sarg04",
            Protocol::Dps => "dps",
            Protocol::Bbm92 => "bbm92",
        };
        f.write_str(s)
    }
}

/// One pulse intensity of a (decoy) source. `mean_photons` is the Poisson
/// mean per pulse; for the pair source it is the mean pair number per
/// coincidence window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntensityClass {
    pub label: String,
    pub mean_photons: f64,
    pub send_prob: f64,
}

/// Class 0 is the signal class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceConfig {
    pub classes: Vec<IntensityClass>,
}

impl SourceConfig {
    pub fn single(mean_photons: f64) -> Self {
        SourceConfig {
            classes: vec![IntensityClass {
                label: "signal".into(),
                mean_photons,
                send_prob: 1.0,
            }],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.classes.is_empty() {
            return Err(Error::invalid("source has no intensity classes"));
        }
        if self.classes.len() > 8 {
            return Err(Error::invalid("at most 8 intensity classes are supported"));
        }
        let mut total = 0.0;
        for c in &self.classes {
            if !(c.mean_photons >= 0.0) || !c.mean_photons.is_finite() {
                return Err(Error::invalid(format!("class {}: mean_photons < 0", c.label)));
            }
            if !(0.0..=1.0).contains(&c.send_prob) {
                return Err(Error::invalid(format!("class {}: send_prob outside [0,1]", c.label)));
            }
            total += c.send_prob;
        }
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::invalid(format!("send_prob sums to {total}, expected 1")));
        }
        Ok(())
    }

    pub fn class_index(&self, label: &str) -> Option<usize> {
        self.classes.iter().position(|c| c.label == label)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelConfig {
    pub distance_km: f64,
    /// Total channel loss in dB.
    pub loss_db: f64,
    /// Crosstalk / stray-light click rate seen at the receiver, counts/s.
    #[serde(default)]
    pub background_cps: f64,
}

impl ChannelConfig {
    pub fn from_rate(distance_km: f64, db_per_km: f64, background_cps: f64) -> Self {
        ChannelConfig {
            distance_km,
            loss_db: distance_km * db_per_km,
            background_cps,
        }
    }

    pub fn ideal() -> Self {
        ChannelConfig {
            distance_km: 0.0,
            loss_db: 0.0,
            background_cps: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectorConfig {
    pub efficiency: f64,
    /// Dark-click probability per gate, per detector.
    pub dark_prob_per_gate: f64,
    #[serde(default)]
    pub afterpulse_prob: f64,
    /// Receiver optics loss in front of the detectors.
    #[serde(default)]
    pub insertion_loss_db: f64,
    pub num_detectors: u32,
}

impl DetectorConfig {
    pub fn ideal() -> Self {
        DetectorConfig {
            efficiency: 1.0,
            dark_prob_per_gate: 0.0,
            afterpulse_prob: 0.0,
            insertion_loss_db: 0.0,
            num_detectors: 2,
        }
    }
}

/// Convert a click rate in counts/s into a per-gate probability. The gate
/// window is `1/clock_hz` scaled by the active-window duty factor.
pub fn cps_to_gate_prob(cps: f64, clock_hz: f64, duty: f64) -> f64 {
    (cps * duty / clock_hz).clamp(0.0, 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum EveMode {
    #[default]
    None,
    InterceptResend,
    TapInject,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EveConfig {
    pub mode: EveMode,
    #[serde(default)]
    pub start_s: f64,
    #[serde(default = "f64_inf")]
    pub stop_s: f64,
    #[serde(default)]
    pub tap_fraction: f64,
    /// Injected click rate at the receiver, counts/s.
    #[serde(default)]
    pub inject_click_rate: f64,
}

fn f64_inf() -> f64 {
    f64::INFINITY
}

impl Default for EveConfig {
    fn default() -> Self {
        EveConfig::none()
    }
}

impl EveConfig {
    pub fn none() -> Self {
        EveConfig {
            mode: EveMode::None,
            start_s: 0.0,
            stop_s: f64::INFINITY,
            tap_fraction: 0.0,
            inject_click_rate: 0.0,
        }
    }

    pub fn intercept_resend() -> Self {
        EveConfig {
            mode: EveMode::InterceptResend,
            ..EveConfig::none()
        }
    }

    pub fn tap_inject(tap_fraction: f64, inject_click_rate: f64) -> Self {
        EveConfig {
            mode: EveMode::TapInject,
            tap_fraction,
            inject_click_rate,
            ..EveConfig::none()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.mode == EveMode::None {
            return Ok(());
        }
        if self.start_s > self.stop_s {
            return Err(Error::invalid("eve start_s > stop_s"));
        }
        if !(0.0..=1.0).contains(&self.tap_fraction) {
            return Err(Error::invalid("eve tap_fraction outside [0,1]"));
        }
        if self.inject_click_rate < 0.0 {
            return Err(Error::invalid("eve inject_click_rate < 0"));
        }
        Ok(())
    }

    pub fn active_at(&self, t_s: f64) -> bool {
        self.mode != EveMode::None && t_s >= self.start_s && t_s < self.stop_s
    }
}

/// Physical description of one QKD link.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkConfig {
    pub protocol: Protocol,
    pub clock_hz: f64,
    pub source: SourceConfig,
    pub channel: ChannelConfig,
    pub detector: DetectorConfig,
    /// Intrinsic optical error probability of a signal click in the
    /// matching basis (visibility error for the pair source).
    pub misalignment: f64,
    /// Active-window duty factor applied to cps to per-gate conversion.
    #[serde(default = "one")]
    pub duty_factor: f64,
    /// Pair source only: probability a coincidence window holds two or more
    /// pairs. Half of those windows give Alice a double click, which is
    /// squashed to a random bit.
    #[serde(default)]
    pub double_pair_prob: f64,
}

fn one() -> f64 {
    1.0
}

impl LinkConfig {
    pub fn validate(&self) -> Result<()> {
        self.source.validate()?;
        let d = &self.detector;
        for (name, p) in [
            ("efficiency", d.efficiency),
            ("dark_prob_per_gate", d.dark_prob_per_gate),
            ("afterpulse_prob", d.afterpulse_prob),
            ("misalignment", self.misalignment),
            ("double_pair_prob", self.double_pair_prob),
            ("duty_factor", self.duty_factor),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::invalid(format!("{name} = {p} outside [0,1]")));
            }
        }
        if d.num_detectors < 1 {
            return Err(Error::invalid("num_detectors must be >= 1"));
        }
        if self.channel.loss_db < 0.0 || d.insertion_loss_db < 0.0 {
            return Err(Error::invalid("loss must be >= 0 dB"));
        }
        if self.channel.background_cps < 0.0 {
            return Err(Error::invalid("background_cps < 0"));
        }
        if !(self.clock_hz > 0.0) {
            return Err(Error::invalid("clock_hz must be > 0"));
        }
        Ok(())
    }

    /// Ideal test link: no loss, no noise, perfect detectors.
    pub fn ideal(protocol: Protocol, mean_photons: f64) -> Self {
        LinkConfig {
            protocol,
            clock_hz: 1e9,
            source: SourceConfig::single(mean_photons),
            channel: ChannelConfig::ideal(),
            detector: DetectorConfig::ideal(),
            misalignment: 0.0,
            duty_factor: 1.0,
            double_pair_prob: 0.0,
        }
    }
}
