//! Link presets for the six field systems, shipped as JSON data files.
//!
//! Each file records the published source, channel and detector figures.
//! The intrinsic optical error (`misalignment`) and receiver insertion loss
//! are not published; they are backed out of the reported average QBER and
//! sifted rate, and each file says so in its `calibration` block.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::{
    cps_to_gate_prob, ChannelConfig, DetectorConfig, LinkConfig, Protocol, SourceConfig,
};
use crate::distill::PostProcessing;
use crate::error::{Error, Result};

pub const NAMES: [&str; 7] = [
    "nec",
    "trel",
    "ntt",
    "mitsubishi",
    "idq",
    "idq_nofilter",
    "vienna",
];

const EMBEDDED: [(&str, &str); 7] = [
    ("nec", include_str!("../../data/presets/nec.json")),
    ("trel", include_str!("../../data/presets/trel.json")),
    ("ntt", include_str!("../../data/presets/ntt.json")),
    ("mitsubishi", include_str!("../../data/presets/mitsubishi.json")),
    ("idq", include_str!("../../data/presets/idq.json")),
    ("idq_nofilter", include_str!("../../data/presets/idq_nofilter.json")),
    ("vienna", include_str!("../../data/presets/vienna.json")),
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PresetDetector {
    pub efficiency: f64,
    /// Dark count rate per detector in counts/s; converted with the gate
    /// window and duty factor.
    #[serde(default)]
    pub dark_cps: Option<f64>,
    #[serde(default)]
    pub dark_prob_per_gate: Option<f64>,
    #[serde(default)]
    pub afterpulse_prob: f64,
    #[serde(default)]
    pub insertion_loss_db: f64,
    pub num_detectors: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub target_qber: f64,
    #[serde(default)]
    pub target_sifted_bps: Option<f64>,
    #[serde(default)]
    pub target_secure_bps: Option<f64>,
    pub note: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Preset {
    pub name: String,
    pub description: String,
    pub protocol: Protocol,
    pub clock_hz: f64,
    #[serde(default = "one")]
    pub duty_factor: f64,
    pub source: SourceConfig,
    pub channel: ChannelConfig,
    pub detector: PresetDetector,
    pub misalignment: f64,
    #[serde(default)]
    pub double_pair_prob: f64,
    pub calibration: Calibration,
    pub postprocessing: PostProcessing,
}

fn one() -> f64 {
    1.0
}

impl Preset {
    pub fn builtin(name: &str) -> Result<Preset> {
        let (_, text) = EMBEDDED
            .iter()
            .find(|(n, _)| *n == name)
            .ok_or_else(|| Error::invalid(format!("unknown preset {name}")))?;
        Self::from_json(text)
    }

    pub fn from_json(text: &str) -> Result<Preset> {
        let p: Preset = serde_json::from_str(text)?;
        p.link()?;
        Ok(p)
    }

    pub fn from_path(path: &Path) -> Result<Preset> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn all() -> Vec<Preset> {
        NAMES
            .iter()
            .map(|n| Preset::builtin(n).expect("embedded preset parses"))
            .collect()
    }

    pub fn link(&self) -> Result<LinkConfig> {
        let d = &self.detector;
        let dark = match (d.dark_prob_per_gate, d.dark_cps) {
            (Some(p), _) => p,
            (None, Some(cps)) => cps_to_gate_prob(cps, self.clock_hz, self.duty_factor),
            (None, None) => 0.0,
        };
        let link = LinkConfig {
            protocol: self.protocol,
            clock_hz: self.clock_hz,
            source: self.source.clone(),
            channel: self.channel.clone(),
            detector: DetectorConfig {
                efficiency: d.efficiency,
                dark_prob_per_gate: dark,
                afterpulse_prob: d.afterpulse_prob,
                insertion_loss_db: d.insertion_loss_db,
                num_detectors: d.num_detectors,
            },
            misalignment: self.misalignment,
            duty_factor: self.duty_factor,
            double_pair_prob: self.double_pair_prob,
        };
        link.validate()?;
        Ok(link)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{click_model, expected_sifted_qber};

    #[test]
    fn every_preset_parses_and_hits_its_qber() {
        for p in Preset::all() {
            let link = p.link().unwrap();
            let m = click_model(&link).unwrap();
            let q = expected_sifted_qber(link.protocol, &m).unwrap();
            assert!(
                (q - p.calibration.target_qber).abs() < 5e-4,
                "{}: model qber {q} vs target {}",
                p.name,
                p.calibration.target_qber
            );
        }
    }

    #[test]
    fn nec_dark_counts_convert_through_the_gate_window() {
        let link = Preset::builtin("nec").unwrap().link().unwrap();
        assert!((link.detector.dark_prob_per_gate - 25.0 / 1.25e9).abs() < 1e-18);
    }
}
