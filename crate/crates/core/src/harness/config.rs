//! Topology and scenario files.

use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::channel::{EveMode, Preset};
use crate::distill::DistillationConfig;
use crate::error::{Error, Result};
use crate::kms::{Demand, DetectionRules, RoutePolicy};

const TOKYO: &str = include_str!("../../data/topologies/tokyo.json");
const ATTACK_REPLAY: &str = include_str!("../../data/scenarios/attack_replay.json");

pub const DEFAULT_PULSE_DIVISOR: f64 = 1e4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeSpec {
    pub id: String,
    #[serde(default)]
    pub site: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkSpec {
    pub id: String,
    pub a: String,
    pub b: String,
    pub distance_km: f64,
    /// Built-in preset name.
    pub preset: String,
    /// Fiber loss override; the preset's calibrated loss otherwise.
    #[serde(default)]
    pub loss_db: Option<f64>,
    /// Simulated pulses per tick are `clock_hz * tick_s / divisor`. Values
    /// below one simulate more pulses than the device would send, which
    /// keeps slow links statistically usable per tick.
    #[serde(default)]
    pub pulse_divisor: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopologyConfig {
    pub name: String,
    pub nodes: Vec<NodeSpec>,
    pub links: Vec<LinkSpec>,
    pub kms_node: String,
    #[serde(default = "static_priority")]
    pub policy: RoutePolicy,
    #[serde(default)]
    pub demands: Vec<Demand>,
    #[serde(default)]
    pub rules: DetectionRules,
    #[serde(default = "default_divisor")]
    pub pulse_divisor: f64,
    /// KMA storage block size in bytes.
    #[serde(default = "default_chunk")]
    pub chunk_bytes: usize,
    /// Key preloaded into both ends of every link, in bytes.
    #[serde(default)]
    pub prefill_bytes: usize,
    #[serde(default = "harness_distill")]
    pub distill: DistillationConfig,
    /// Classical message latency per hop, seconds.
    #[serde(default = "default_latency")]
    pub hop_latency_s: f64,
}

fn static_priority() -> RoutePolicy {
    RoutePolicy::StaticPriority
}

fn default_divisor() -> f64 {
    DEFAULT_PULSE_DIVISOR
}

fn default_chunk() -> usize {
    4096
}

fn default_latency() -> f64 {
    1e-3
}

/// Distillation sized for one-second epochs at desk scale.
pub fn harness_distill() -> DistillationConfig {
    DistillationConfig {
        sifted_block_bits: 16_384,
        min_pa_block_bits: 10_000,
        ..DistillationConfig::default()
    }
}

impl TopologyConfig {
    pub fn builtin(name: &str) -> Result<Self> {
        match name {
            "tokyo" => Self::from_json(TOKYO),
            _ => Err(Error::invalid(format!("no built-in topology {name}"))),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let t: TopologyConfig = serde_json::from_str(text)?;
        t.validate()?;
        Ok(t)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    /// Collects every violated invariant.
    pub fn validate(&self) -> Result<()> {
        let mut errs = Vec::new();
        let mut nodes = BTreeSet::new();
        for n in &self.nodes {
            if !nodes.insert(n.id.as_str()) {
                errs.push(format!("duplicate node id {}", n.id));
            }
        }
        if !nodes.contains(self.kms_node.as_str()) {
            errs.push(format!("kms node {} is not a node", self.kms_node));
        }
        let mut links = BTreeSet::new();
        for l in &self.links {
            if !links.insert(l.id.as_str()) {
                errs.push(format!("duplicate link id {}", l.id));
            }
            for end in [&l.a, &l.b] {
                if !nodes.contains(end.as_str()) {
                    errs.push(format!("link {} references unknown node {end}", l.id));
                }
            }
            if l.a == l.b {
                errs.push(format!("link {} joins {} to itself", l.id, l.a));
            }
            if !(l.distance_km >= 0.0) {
                errs.push(format!("link {} has negative distance", l.id));
            }
            if let Err(e) = Preset::builtin(&l.preset) {
                errs.push(format!("link {}: {e}", l.id));
            }
            if l.loss_db.is_some_and(|x| !(x >= 0.0)) {
                errs.push(format!("link {} has negative loss", l.id));
            }
            if l.pulse_divisor.is_some_and(|d| !(d > 0.0)) {
                errs.push(format!("link {} pulse divisor must be positive", l.id));
            }
        }
        for d in &self.demands {
            for end in [&d.src, &d.dst] {
                if !nodes.contains(end.as_str()) {
                    errs.push(format!("demand {} references unknown node {end}", d.id));
                }
            }
        }
        if !(self.pulse_divisor > 0.0) {
            errs.push("pulse divisor must be positive".into());
        }
        if self.chunk_bytes == 0 {
            errs.push("chunk_bytes must be positive".into());
        }
        if let Err(e) = self.rules.validate() {
            errs.push(e.to_string());
        }
        if let Err(e) = self.distill.validate() {
            errs.push(e.to_string());
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(errs))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EventKind {
    AttackOn {
        link: String,
        #[serde(default = "tap_inject")]
        mode: EveMode,
        #[serde(default = "half")]
        tap_fraction: f64,
        /// Injected clicks per second; by default the signal click rate the
        /// tap removes, so the receiver's count rate does not drop.
        #[serde(default)]
        inject_click_rate: Option<f64>,
    },
    AttackOff { link: String },
    LinkDown { link: String },
    LinkUp { link: String },
    SessionStart {
        id: String,
        src: String,
        dst: String,
        #[serde(default = "default_rate")]
        rate_bps: f64,
        #[serde(default)]
        bidirectional: bool,
        /// End-to-end key kept in reserve, in seconds of traffic.
        #[serde(default = "default_buffer")]
        buffer_s: f64,
    },
    SessionStop { id: String },
    ClearAlarm { link: String },
}

fn tap_inject() -> EveMode {
    EveMode::TapInject
}

fn half() -> f64 {
    0.5
}

fn default_rate() -> f64 {
    crate::applayer::DEFAULT_SESSION_RATE_BPS
}

fn default_buffer() -> f64 {
    30.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioEvent {
    pub t_s: f64,
    #[serde(flatten)]
    pub kind: EventKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub name: String,
    #[serde(default)]
    pub duration_s: Option<f64>,
    #[serde(default = "one")]
    pub tick_s: f64,
    #[serde(default)]
    pub events: Vec<ScenarioEvent>,
}

fn one() -> f64 {
    1.0
}

impl ScenarioConfig {
    pub fn empty(name: &str) -> Self {
        ScenarioConfig { name: name.to_string(), duration_s: None, tick_s: 1.0, events: Vec::new() }
    }

    pub fn builtin(name: &str) -> Result<Self> {
        match name {
            "attack_replay" => Self::from_json(ATTACK_REPLAY),
            "empty" => Ok(Self::empty("empty")),
            _ => Err(Error::invalid(format!("no built-in scenario {name}"))),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let s: ScenarioConfig = serde_json::from_str(text)?;
        s.validate()?;
        Ok(s)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        let mut errs = Vec::new();
        if !(self.tick_s > 0.0) {
            errs.push("tick_s must be positive".to_string());
        }
        for (i, e) in self.events.iter().enumerate() {
            if !(e.t_s >= 0.0) {
                errs.push(format!("event {i} has negative time"));
            }
            if i > 0 && e.t_s < self.events[i - 1].t_s {
                errs.push(format!("event {i} at {} is out of order", e.t_s));
            }
            if let EventKind::AttackOn { tap_fraction, .. } = &e.kind {
                if !(0.0..=1.0).contains(tap_fraction) {
                    errs.push(format!("event {i} tap_fraction outside [0,1]"));
                }
            }
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(errs))
        }
    }

    /// Adds an event, keeping time order; ties go after existing events.
    pub fn insert(&mut self, event: ScenarioEvent) {
        let pos = self.events.partition_point(|e| e.t_s <= event.t_s);
        self.events.insert(pos, event);
    }
}
