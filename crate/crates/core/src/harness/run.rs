//! Batch runs and the end-of-run key hygiene audit.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::config::{ScenarioConfig, TopologyConfig};
use super::metrics::{metrics_csv, MetricsRow};
use super::network::{Network, RelayStats};
use crate::applayer::SessionTelemetry;
use crate::error::{Error, Result};
use crate::keymgmt::AuditEntry;
use crate::kms::{Alarm, KmsAction};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditChecks {
    /// available + reserved + consumed = ingested for every pool of every
    /// KMA.
    pub conservation: bool,
    /// No byte of any pool was served by two draws.
    pub no_double_serve: bool,
    /// Every served byte reads back as zero in storage.
    pub consumed_zeroized: bool,
    /// Every relay wire message unmasked with its hop pad to the relayed
    /// key, and the destination recovered it.
    pub relay_wire: bool,
    /// Every session's receiver recovered its sender's plaintext.
    pub session_fidelity: bool,
    pub failures: Vec<String>,
}

impl AuditChecks {
    pub fn all_pass(&self) -> bool {
        self.conservation && self.no_double_serve && self.consumed_zeroized && self.relay_wire && self.session_fidelity
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RouteSwitch {
    pub t_s: f64,
    pub demand: String,
    pub from: Option<Vec<String>>,
    pub to: Vec<String>,
    pub to_distance_km: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub scenario: String,
    pub seed: u64,
    pub duration_s: f64,
    pub ticks: u64,
    pub alarms: Vec<Alarm>,
    pub route_switches: Vec<RouteSwitch>,
    pub sessions: BTreeMap<String, SessionTelemetry>,
    pub relay: RelayStats,
    pub checks: AuditChecks,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub metrics: Vec<MetricsRow>,
    pub audit: Vec<Value>,
    pub draws: Vec<AuditEntry>,
    pub summary: RunSummary,
}

fn jsonl<T: Serialize>(items: &[T]) -> String {
    let mut out = String::new();
    for i in items {
        out.push_str(&serde_json::to_string(i).expect("audit records serialize"));
        out.push('\n');
    }
    out
}

impl RunOutput {
    pub fn metrics_csv(&self) -> String {
        metrics_csv(&self.metrics)
    }

    pub fn audit_jsonl(&self) -> String {
        jsonl(&self.audit)
    }

    pub fn draws_jsonl(&self) -> String {
        jsonl(&self.draws)
    }

    /// Writes `metrics.csv`, `audit.jsonl`, `draws.jsonl` and
    /// `summary.json` into `dir`.
    pub fn write_to(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("metrics.csv"), self.metrics_csv())?;
        std::fs::write(dir.join("audit.jsonl"), self.audit_jsonl())?;
        std::fs::write(dir.join("draws.jsonl"), self.draws_jsonl())?;
        std::fs::write(dir.join("summary.json"), serde_json::to_string_pretty(&self.summary)?)?;
        Ok(())
    }
}

/// Fires every event due at or before the network's current time.
pub(crate) fn fire_due(net: &mut Network, scenario: &ScenarioConfig, next: &mut usize) -> Result<()> {
    while let Some(e) = scenario.events.get(*next) {
        if e.t_s > net.t_s() + 1e-9 {
            break;
        }
        net.apply_event(&e.kind)?;
        *next += 1;
    }
    Ok(())
}

/// Runs `scenario` on `topology` in simulated time. Events take effect at
/// the first tick boundary at or after their timestamp.
pub fn run_scenario(
    topology: &TopologyConfig,
    scenario: &ScenarioConfig,
    seed: u64,
    duration_s: Option<f64>,
) -> Result<RunOutput> {
    scenario.validate()?;
    let duration = duration_s
        .or(scenario.duration_s)
        .ok_or_else(|| Error::invalid("no duration given and the scenario sets none"))?;
    if !(duration >= 0.0) {
        return Err(Error::invalid("duration must be non-negative"));
    }
    let mut net = Network::new(topology.clone(), seed, scenario.tick_s)?;
    let ticks = (duration / scenario.tick_s).round() as u64;
    let mut next = 0;
    for _ in 0..ticks {
        fire_due(&mut net, scenario, &mut next)?;
        net.tick()?;
    }
    Ok(finish(&net, &scenario.name, seed, ticks))
}

pub(crate) fn finish(net: &Network, scenario: &str, seed: u64, ticks: u64) -> RunOutput {
    let draws: Vec<AuditEntry> = net.kmas().values().flat_map(|k| k.audit().iter().cloned()).collect();
    let checks = audit_network(net);
    let route_switches = net
        .kms()
        .action_log()
        .iter()
        .filter_map(|(t, a)| match a {
            KmsAction::SwitchRoute { demand, from, to } => Some(RouteSwitch {
                t_s: *t,
                demand: demand.clone(),
                from: from.as_ref().map(|r| r.nodes.clone()),
                to: to.nodes.clone(),
                to_distance_km: to.total_distance_km,
            }),
            _ => None,
        })
        .collect();
    RunOutput {
        metrics: net.metrics().to_vec(),
        audit: net.audit().to_vec(),
        draws,
        summary: RunSummary {
            scenario: scenario.to_string(),
            seed,
            duration_s: net.t_s(),
            ticks,
            alarms: net.kms().alarm_log().to_vec(),
            route_switches,
            sessions: net.session_telemetry(),
            relay: net.relay_stats().clone(),
            checks,
        },
    }
}

/// Key hygiene checks over the network's current state.
pub fn audit_network(net: &Network) -> AuditChecks {
    let mut failures = Vec::new();
    let mut conservation = true;
    let mut no_double_serve = true;
    let mut consumed_zeroized = true;
    for (node, kma) in net.kmas() {
        for peer in kma.store().peers() {
            let c = kma.counters(peer);
            if !c.balanced() {
                conservation = false;
                failures.push(format!("{node}/{peer}: counters do not balance: {c:?}"));
            }
        }
        let mut by_block: BTreeMap<(&str, u64), Vec<(usize, usize)>> = BTreeMap::new();
        for e in kma.audit() {
            by_block.entry((e.peer.as_str(), e.block)).or_default().push((e.offset, e.offset + e.len));
            let zero = kma
                .store()
                .block_bytes(&e.peer, e.block)
                .and_then(|b| b.get(e.offset..e.offset + e.len))
                .is_some_and(|r| r.iter().all(|&x| x == 0));
            if !zero {
                consumed_zeroized = false;
                failures.push(format!("{node}/{} block {} offset {} not zeroized", e.peer, e.block, e.offset));
            }
        }
        for ((peer, block), mut ranges) in by_block {
            ranges.sort_unstable();
            if ranges.windows(2).any(|w| w[1].0 < w[0].1) {
                no_double_serve = false;
                failures.push(format!("{node}/{peer} block {block} served twice"));
            }
        }
    }
    let relay = net.relay_stats();
    let relay_wire = relay.wire_verified && relay.delivered_mismatches == 0;
    if !relay_wire {
        failures.push("relay wire check failed".into());
    }
    let session_fidelity = net.session_telemetry().values().all(|t| t.mismatched_chunks == 0);
    if !session_fidelity {
        failures.push("session plaintext mismatch".into());
    }
    AuditChecks { conservation, no_double_serve, consumed_zeroized, relay_wire, session_fidelity, failures }
}
