//! The simulated network: links with their distillers, one KMA per node,
//! the KMS and running sessions, advanced one tick at a time.

use std::collections::BTreeMap;

use rand::RngCore;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::config::{EventKind, LinkSpec, TopologyConfig};
use super::metrics::MetricsRow;
use crate::applayer::{Session, SessionState, SessionTelemetry};
use crate::channel::{
    click_model, click_model_with_eve, simulate_pulses, EveConfig, EveMode, LinkConfig, Preset,
};
use crate::distill::{DistillEvent, Distiller};
use crate::error::{Error, Result};
use crate::keymgmt::{relay_key, DeviceTelemetry, KeyMaterialPush, Kma, StatsReport};
use crate::kms::{Kms, KmsAction, KmsCommand, KmsConfig, LinkInfo, LinkStatus};
use crate::protocols::sift;
use crate::rng;

/// Pool-name prefix for end-to-end key held for sessions.
pub const E2E_POOL_PREFIX: &str = "e2e:";

struct LinkRuntime {
    spec: LinkSpec,
    config: LinkConfig,
    distiller: Distiller,
    divisor: f64,
    eve: EveConfig,
    /// Halted by the KMS after an alarm.
    stopped: bool,
    down: bool,
    epoch: u64,
    push_seq: u64,
    last_report: Option<StatsReport>,
}

struct SessionRuntime {
    session: Session,
    demand: String,
    /// The demand runs dst -> src relative to the session.
    reversed: bool,
    buffer_s: f64,
    last_bytes: u64,
}

/// Outcome counters the end-of-run audit reads.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RelayStats {
    pub relays: u64,
    pub bytes: u64,
    pub wire_verified: bool,
    pub delivered_mismatches: u64,
    pub aborted: u64,
}

pub struct Network {
    topology: TopologyConfig,
    links: BTreeMap<String, LinkRuntime>,
    kmas: BTreeMap<String, Kma>,
    kms: Kms,
    sessions: BTreeMap<String, SessionRuntime>,
    ended_sessions: BTreeMap<String, SessionTelemetry>,
    seed: u64,
    tick_s: f64,
    t_s: f64,
    relay: RelayStats,
    audit: Vec<Value>,
    metrics: Vec<MetricsRow>,
}

impl Network {
    pub fn new(topology: TopologyConfig, seed: u64, tick_s: f64) -> Result<Self> {
        topology.validate()?;
        if !(tick_s > 0.0) {
            return Err(Error::invalid("tick must be positive"));
        }
        let mut kmas = BTreeMap::new();
        for n in &topology.nodes {
            kmas.insert(n.id.clone(), Kma::new(&n.id, topology.chunk_bytes)?);
        }
        let mut links = BTreeMap::new();
        for spec in &topology.links {
            let preset = Preset::builtin(&spec.preset)?;
            let mut config = preset.link()?;
            config.channel.distance_km = spec.distance_km;
            if let Some(loss) = spec.loss_db {
                config.channel.loss_db = loss;
            }
            let mut distill = topology.distill.clone();
            distill.ec_mode = preset.postprocessing.ec_mode;
            let distiller = Distiller::new(
                &spec.id,
                &config.source,
                preset.postprocessing.clone(),
                distill,
                rng::derive(seed, &format!("distill:{}", spec.id)),
            )?;
            kmas.get_mut(&spec.a).expect("validated").attach_link(&spec.id, &spec.b);
            kmas.get_mut(&spec.b).expect("validated").attach_link(&spec.id, &spec.a);
            if topology.prefill_bytes > 0 {
                let mut key = vec![0u8; topology.prefill_bytes];
                rng::stream(seed, &format!("prefill:{}", spec.id)).fill_bytes(&mut key);
                kmas.get_mut(&spec.a).expect("validated").deposit(&spec.b, &key)?;
                kmas.get_mut(&spec.b).expect("validated").deposit(&spec.a, &key)?;
            }
            links.insert(
                spec.id.clone(),
                LinkRuntime {
                    spec: spec.clone(),
                    config,
                    distiller,
                    divisor: spec.pulse_divisor.unwrap_or(topology.pulse_divisor),
                    eve: EveConfig::none(),
                    stopped: false,
                    down: false,
                    epoch: 0,
                    push_seq: 0,
                    last_report: None,
                },
            );
        }
        let infos = topology
            .links
            .iter()
            .map(|l| LinkInfo { id: l.id.clone(), a: l.a.clone(), b: l.b.clone(), distance_km: l.distance_km })
            .collect();
        let kms_config = KmsConfig { rules: topology.rules, policy: topology.policy, ..KmsConfig::default() };
        let kms = Kms::new(infos, topology.demands.clone(), kms_config)?;
        Ok(Network {
            topology,
            links,
            kmas,
            kms,
            sessions: BTreeMap::new(),
            ended_sessions: BTreeMap::new(),
            seed,
            tick_s,
            t_s: 0.0,
            relay: RelayStats { wire_verified: true, ..RelayStats::default() },
            audit: Vec::new(),
            metrics: Vec::new(),
        })
    }

    pub fn t_s(&self) -> f64 {
        self.t_s
    }

    pub fn tick_s(&self) -> f64 {
        self.tick_s
    }

    pub fn topology(&self) -> &TopologyConfig {
        &self.topology
    }

    pub fn kms(&self) -> &Kms {
        &self.kms
    }

    pub fn kmas(&self) -> &BTreeMap<String, Kma> {
        &self.kmas
    }

    pub fn metrics(&self) -> &[MetricsRow] {
        &self.metrics
    }

    pub fn audit(&self) -> &[Value] {
        &self.audit
    }

    pub fn relay_stats(&self) -> &RelayStats {
        &self.relay
    }

    /// Telemetry of every session, running or ended.
    pub fn session_telemetry(&self) -> BTreeMap<String, SessionTelemetry> {
        let mut out = self.ended_sessions.clone();
        for (id, s) in &self.sessions {
            out.insert(id.clone(), s.session.telemetry().clone());
        }
        out
    }

    fn log(&mut self, kind: &str, mut body: Value) {
        body["t_s"] = json!(self.t_s);
        body["kind"] = json!(kind);
        self.audit.push(body);
    }

    fn link_mut(&mut self, id: &str) -> Result<&mut LinkRuntime> {
        self.links.get_mut(id).ok_or_else(|| Error::UnknownLink(id.to_string()))
    }

    /// Applies a scenario event at the current time.
    pub fn apply_event(&mut self, event: &EventKind) -> Result<()> {
        let body = serde_json::to_value(event)?;
        match event {
            EventKind::AttackOn { link, mode, tap_fraction, inject_click_rate } => {
                let l = self.link_mut(link)?;
                let eve = match mode {
                    EveMode::None => EveConfig::none(),
                    EveMode::InterceptResend => EveConfig::intercept_resend(),
                    EveMode::TapInject => {
                        let rate = match inject_click_rate {
                            Some(r) => *r,
                            None => matching_inject_rate(&l.config, *tap_fraction)?,
                        };
                        EveConfig::tap_inject(*tap_fraction, rate)
                    }
                };
                eve.validate()?;
                l.eve = eve;
            }
            EventKind::AttackOff { link } => self.link_mut(link)?.eve = EveConfig::none(),
            EventKind::LinkDown { link } | EventKind::LinkUp { link } => {
                let up = matches!(event, EventKind::LinkUp { .. });
                self.link_mut(link)?.down = !up;
                let actions = self.kms.set_link_up(link, up, self.t_s)?;
                self.apply_actions(actions);
            }
            EventKind::SessionStart { id, src, dst, rate_bps, bidirectional, buffer_s } => {
                if self.sessions.contains_key(id) || self.ended_sessions.contains_key(id) {
                    return Err(Error::invalid(format!("session {id} already exists")));
                }
                let (demand, reversed) = self
                    .topology
                    .demands
                    .iter()
                    .find_map(|d| {
                        if &d.src == src && &d.dst == dst {
                            Some((d.id.clone(), false))
                        } else if &d.src == dst && &d.dst == src {
                            Some((d.id.clone(), true))
                        } else {
                            None
                        }
                    })
                    .ok_or_else(|| Error::invalid(format!("no demand joins {src} and {dst}")))?;
                if !(*buffer_s >= 0.0) {
                    return Err(Error::invalid("buffer_s must be non-negative"));
                }
                let session = Session::new(id, src, dst, *rate_bps, *bidirectional, rng::derive(self.seed, "sessions"))?
                    .with_pool_prefix(E2E_POOL_PREFIX);
                self.sessions.insert(
                    id.clone(),
                    SessionRuntime { session, demand, reversed, buffer_s: *buffer_s, last_bytes: 0 },
                );
            }
            EventKind::SessionStop { id } => {
                let mut s = self
                    .sessions
                    .remove(id)
                    .ok_or_else(|| Error::invalid(format!("no running session {id}")))?;
                s.session.end(self.t_s);
                self.ended_sessions.insert(id.clone(), s.session.telemetry().clone());
            }
            EventKind::ClearAlarm { link } => {
                let actions = self.kms.apply(&KmsCommand::ClearAlarm { link_id: link.clone() }, self.t_s)?;
                self.apply_actions(actions);
            }
        }
        self.log("event", body);
        Ok(())
    }

    /// Applies an operator command to the KMS.
    pub fn command(&mut self, cmd: &KmsCommand) -> Result<Vec<KmsAction>> {
        let actions = self.kms.apply(cmd, self.t_s)?;
        self.log("command", serde_json::to_value(cmd)?);
        self.apply_actions(actions.clone());
        Ok(actions)
    }

    fn apply_actions(&mut self, actions: Vec<KmsAction>) {
        for a in actions {
            match &a {
                KmsAction::StopLink { link_id } => {
                    if let Some(l) = self.links.get_mut(link_id) {
                        l.stopped = true;
                    }
                }
                KmsAction::ResumeLink { link_id } => {
                    if let Some(l) = self.links.get_mut(link_id) {
                        l.stopped = false;
                    }
                }
                _ => {}
            }
            let body = serde_json::to_value(&a).unwrap_or(Value::Null);
            self.log("kms_action", body);
        }
    }

    /// Advances one tick.
    pub fn tick(&mut self) -> Result<()> {
        let t1 = self.t_s + self.tick_s;
        let ids: Vec<String> = self.links.keys().cloned().collect();
        for id in &ids {
            self.run_link_epoch(id, t1)?;
        }
        let mut reports = Vec::new();
        for id in &ids {
            let a = self.links[id].spec.a.clone();
            let report = self.kmas.get_mut(&a).expect("link endpoint").report_stats(id, t1)?;
            reports.push(report);
        }
        self.t_s = t1;
        for r in reports {
            self.links.get_mut(&r.link_id).expect("known").last_report = Some(r.clone());
            let actions = self.kms.ingest_stats(r)?;
            self.apply_actions(actions);
        }
        let sids: Vec<String> = self.sessions.keys().cloned().collect();
        for sid in &sids {
            self.top_up(sid)?;
            self.step_session(sid)?;
        }
        self.record_metrics();
        Ok(())
    }

    fn run_link_epoch(&mut self, id: &str, t1: f64) -> Result<()> {
        let tick = self.tick_s;
        let seed = self.seed;
        let l = self.links.get_mut(id).expect("known link");
        if l.stopped || l.down {
            return Ok(());
        }
        let n = (l.config.clock_hz * tick / l.divisor).round() as u64;
        let epoch_seed = rng::derive_n(rng::derive(seed, &format!("link:{id}")), l.epoch);
        l.epoch += 1;
        let log = simulate_pulses(&l.config, n, &l.eve, epoch_seed)?;
        let mut pair = sift(l.config.protocol, &log)?;
        pair.link_id = id.to_string();
        let tel = l.distiller.push_epoch(&pair, t1)?;
        let (a, b) = (l.spec.a.clone(), l.spec.b.clone());
        let mut pushes = Vec::new();
        for e in &tel.events {
            if let DistillEvent::Key { alice, bob } = e {
                if alice.bit_length == 0 {
                    continue;
                }
                l.push_seq += 1;
                pushes.push((KeyMaterialPush::from_block(alice, l.push_seq), KeyMaterialPush::from_block(bob, l.push_seq)));
            }
        }
        let dev = DeviceTelemetry {
            link_id: id.to_string(),
            timestamp_s: t1,
            sifted_bits: tel.sifted_bits as u64,
            qber: tel.estimate.map(|e| e.rate),
        };
        for (pa, pb) in pushes {
            self.kmas.get_mut(&a).expect("endpoint").ingest_key_material(&pa)?;
            self.kmas.get_mut(&b).expect("endpoint").ingest_key_material(&pb)?;
        }
        self.kmas.get_mut(&a).expect("endpoint").record_telemetry(&dev)?;
        self.kmas.get_mut(&b).expect("endpoint").record_telemetry(&dev)?;
        if tel.aborted {
            self.log("epoch_aborted", json!({ "link": id, "qber": dev.qber }));
        }
        Ok(())
    }

    /// Relays enough end-to-end key for the session to keep `buffer_s`
    /// seconds in reserve after this tick's draw, as far as the hops allow.
    fn top_up(&mut self, sid: &str) -> Result<()> {
        let s = &self.sessions[sid];
        let Some(route) = self.kms.route(&s.demand).cloned() else {
            return Ok(());
        };
        let mut nodes = route.nodes.clone();
        if s.reversed {
            nodes.reverse();
        }
        let (src, dst) = (s.session.src.clone(), s.session.dst.clone());
        let dirs = if s.session.bidirectional() { 2.0 } else { 1.0 };
        let per_tick = s.session.bytes_for(self.tick_s) as f64 * dirs;
        let target = (s.session.rate_bps * s.buffer_s / 8.0 * dirs + per_tick).ceil() as usize;
        let have = self.kmas[&src].store().available_bytes(&format!("{E2E_POOL_PREFIX}{dst}"));
        let need = target.saturating_sub(have);
        let hop_limit = nodes
            .windows(2)
            .map(|w| {
                self.kmas[&w[0]].store().available_bytes(&w[1]).min(self.kmas[&w[1]].store().available_bytes(&w[0]))
            })
            .min()
            .unwrap_or(0);
        let n = need.min(hop_limit);
        if n == 0 {
            return Ok(());
        }
        let idx = self.relay.relays;
        let purpose = format!("relay:{sid}:{idx}");
        let out = relay_key(&mut self.kmas, &nodes, n, &purpose, rng::derive_n(rng::derive(self.seed, "relay"), idx));
        self.relay.relays += 1;
        self.relay.wire_verified &= out.wire_verified;
        if let Some(e) = &out.error {
            self.relay.aborted += 1;
            self.log("relay_aborted", json!({ "session": sid, "error": e.to_string() }));
            return Ok(());
        }
        let (Some(k_src), Some(k_dst)) = (out.source_key, out.delivered) else {
            return Ok(());
        };
        if k_src != k_dst {
            self.relay.delivered_mismatches += 1;
        }
        self.relay.bytes += n as u64;
        self.kmas.get_mut(&src).expect("node").deposit(&format!("{E2E_POOL_PREFIX}{dst}"), &k_src)?;
        self.kmas.get_mut(&dst).expect("node").deposit(&format!("{E2E_POOL_PREFIX}{src}"), &k_dst)?;
        self.log("relay", json!({ "session": sid, "route": nodes, "bytes": n }));
        Ok(())
    }

    fn step_session(&mut self, sid: &str) -> Result<()> {
        let tick = self.tick_s;
        let now = self.t_s;
        let s = self.sessions.get_mut(sid).expect("known session");
        let before = s.session.state;
        let state = s.session.step(&mut self.kmas, tick, now)?;
        if state != before {
            let body = json!({ "session": sid, "from": before, "to": state });
            self.log("session_state", body);
        }
        Ok(())
    }

    fn record_metrics(&mut self) {
        let alarms_open = self.kms.open_alarms().count();
        let t = self.t_s;
        for (id, l) in &self.links {
            let r = l.last_report.as_ref();
            self.metrics.push(MetricsRow {
                t_s: t,
                link_id: id.clone(),
                qber: r.map_or(0.0, |r| r.qber),
                sifted_bps: r.map_or(0.0, |r| r.sifted_bps),
                secure_bps: r.map_or(0.0, |r| r.secure_bps),
                buffer_bits: r.map_or(0, |r| r.buffer_bits),
                status: match (l.down, self.kms.status(id)) {
                    (true, _) => "down".into(),
                    (_, Some(LinkStatus::Alarm)) => "alarm".into(),
                    (_, Some(LinkStatus::Down)) => "down".into(),
                    _ => "up".into(),
                },
                alarms_open,
            });
        }
        for (id, s) in &mut self.sessions {
            let tel = s.session.telemetry();
            let sent = tel.bytes_enciphered - s.last_bytes;
            s.last_bytes = tel.bytes_enciphered;
            let buffer = self.kmas[&s.session.src]
                .counters(&format!("{E2E_POOL_PREFIX}{}", s.session.dst))
                .available_bits;
            self.metrics.push(MetricsRow {
                t_s: t,
                link_id: format!("session:{id}"),
                qber: 0.0,
                sifted_bps: 0.0,
                secure_bps: sent as f64 * 8.0 / self.tick_s,
                buffer_bits: buffer,
                status: match s.session.state {
                    SessionState::Running => "running".into(),
                    SessionState::Stalled => "stalled".into(),
                    SessionState::Ended => "ended".into(),
                },
                alarms_open,
            });
        }
    }

    /// The `/state` document: KMS view plus sessions and node buffers.
    pub fn state_json(&self) -> Value {
        let mut state = self.kms.state_json();
        state["t_s"] = json!(self.t_s);
        let sessions: Vec<Value> = self
            .sessions
            .iter()
            .map(|(id, s)| {
                json!({
                    "id": id,
                    "src": s.session.src,
                    "dst": s.session.dst,
                    "rate_bps": s.session.rate_bps,
                    "state": s.session.state,
                    "telemetry": s.session.telemetry(),
                })
            })
            .collect();
        state["sessions"] = json!(sessions);
        let attacks: Vec<&String> = self.links.iter().filter(|(_, l)| l.eve.mode != EveMode::None).map(|(id, _)| id).collect();
        state["attacks"] = json!(attacks);
        let buffers: BTreeMap<String, BTreeMap<String, u64>> = self
            .kmas
            .iter()
            .map(|(n, k)| {
                let peers = k.store().peers().map(|p| (p.to_string(), k.counters(p).available_bits)).collect();
                (n.clone(), peers)
            })
            .collect();
        state["buffers"] = json!(buffers);
        state
    }
}

/// Click rate an eavesdropper must inject to hide a tap of `tap_fraction`.
pub fn matching_inject_rate(link: &LinkConfig, tap_fraction: f64) -> Result<f64> {
    let clean = click_model(link)?;
    let tapped = click_model_with_eve(link, &EveConfig::tap_inject(tap_fraction, 0.0))?;
    let lost = (clean.mean_gain - tapped.mean_gain).max(0.0);
    Ok(lost * link.clock_hz / link.duty_factor.max(1e-12))
}
