use std::collections::{BTreeMap, VecDeque};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::detect::{detect_attack, Alarm, DetectionRules};
use super::routing::{select_route, Graph, LinkInfo, LinkStatus, Route, RoutePolicy};
use crate::error::{Error, Result};
use crate::keymgmt::StatsReport;

pub const DEFAULT_HISTORY_CAPACITY: usize = 3600;

/// A standing need for key between two nodes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Demand {
    pub id: String,
    pub src: String,
    pub dst: String,
    /// Candidate node paths, most preferred first.
    #[serde(default)]
    pub priority: Vec<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KmsConfig {
    pub rules: DetectionRules,
    #[serde(default)]
    pub link_rules: BTreeMap<String, DetectionRules>,
    pub policy: RoutePolicy,
    pub history_capacity: usize,
}

impl Default for KmsConfig {
    fn default() -> Self {
        KmsConfig {
            rules: DetectionRules::default(),
            link_rules: BTreeMap::new(),
            policy: RoutePolicy::StaticPriority,
            history_capacity: DEFAULT_HISTORY_CAPACITY,
        }
    }
}

/// Something the KMS tells the rest of the network to do.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "action", rename_all = "snake_case")]
pub enum KmsAction {
    RaiseAlarm(Alarm),
    /// Halt the QKD process at both ends of the link.
    StopLink { link_id: String },
    ResumeLink { link_id: String },
    SwitchRoute { demand: String, from: Option<Route>, to: Route },
    /// No all-up route remains for the demand.
    Degraded { demand: String },
}

/// Operator commands accepted by the control endpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum KmsCommand {
    ClearAlarm { link_id: String },
    SetPolicy { policy: RoutePolicy },
    ForceRoute { demand: String, nodes: Vec<String> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatusChange {
    pub t_s: f64,
    pub link_id: String,
    pub from: LinkStatus,
    pub to: LinkStatus,
}

/// Telemetry history, link states and active routes.
#[derive(Debug, Clone)]
pub struct NetworkView {
    pub history: BTreeMap<String, VecDeque<StatsReport>>,
    pub status: BTreeMap<String, LinkStatus>,
    pub routes: BTreeMap<String, Option<Route>>,
    pub transitions: Vec<StatusChange>,
}

#[derive(Debug, Clone)]
pub struct Kms {
    graph: Graph,
    demands: Vec<Demand>,
    config: KmsConfig,
    view: NetworkView,
    open_alarms: BTreeMap<String, Alarm>,
    alarm_log: Vec<Alarm>,
    action_log: Vec<(f64, KmsAction)>,
    now_s: f64,
}

impl Kms {
    pub fn new(links: Vec<LinkInfo>, demands: Vec<Demand>, config: KmsConfig) -> Result<Self> {
        config.rules.validate()?;
        for r in config.link_rules.values() {
            r.validate()?;
        }
        if config.history_capacity == 0 {
            return Err(Error::invalid("history capacity must be positive"));
        }
        let graph = Graph::new(links)?;
        let mut view = NetworkView {
            history: BTreeMap::new(),
            status: BTreeMap::new(),
            routes: BTreeMap::new(),
            transitions: Vec::new(),
        };
        for l in graph.links() {
            view.history.insert(l.id.clone(), VecDeque::new());
            view.status.insert(l.id.clone(), LinkStatus::Up);
        }
        let mut kms = Kms {
            graph,
            demands,
            config,
            view,
            open_alarms: BTreeMap::new(),
            alarm_log: Vec::new(),
            action_log: Vec::new(),
            now_s: 0.0,
        };
        for d in kms.demands.clone() {
            for p in &d.priority {
                kms.graph.route(p)?;
            }
            let r = kms.pick(&d).ok();
            if let Some(to) = &r {
                let initial = KmsAction::SwitchRoute { demand: d.id.clone(), from: None, to: to.clone() };
                kms.record(&[initial]);
            }
            kms.view.routes.insert(d.id.clone(), r);
        }
        Ok(kms)
    }

    pub fn graph(&self) -> &Graph {
        &self.graph
    }

    pub fn view(&self) -> &NetworkView {
        &self.view
    }

    pub fn policy(&self) -> RoutePolicy {
        self.config.policy
    }

    pub fn status(&self, link: &str) -> Option<LinkStatus> {
        self.view.status.get(link).copied()
    }

    pub fn route(&self, demand: &str) -> Option<&Route> {
        self.view.routes.get(demand).and_then(Option::as_ref)
    }

    pub fn open_alarms(&self) -> impl Iterator<Item = &Alarm> {
        self.open_alarms.values()
    }

    pub fn alarm_log(&self) -> &[Alarm] {
        &self.alarm_log
    }

    pub fn action_log(&self) -> &[(f64, KmsAction)] {
        &self.action_log
    }

    fn rules_for(&self, link: &str) -> &DetectionRules {
        self.config.link_rules.get(link).unwrap_or(&self.config.rules)
    }

    fn buffers(&self) -> BTreeMap<String, u64> {
        self.view
            .history
            .iter()
            .map(|(l, h)| (l.clone(), h.back().map_or(0, |r| r.buffer_bits)))
            .collect()
    }

    fn pick(&self, d: &Demand) -> Result<Route> {
        select_route(&self.graph, &self.view.status, &self.buffers(), &d.src, &d.dst, &d.priority, self.config.policy)
    }

    fn set_status(&mut self, link: &str, to: LinkStatus) {
        let from = self.view.status.insert(link.to_string(), to).unwrap_or(LinkStatus::Up);
        if from != to {
            self.view.transitions.push(StatusChange { t_s: self.now_s, link_id: link.to_string(), from, to });
        }
    }

    fn record(&mut self, actions: &[KmsAction]) {
        for a in actions {
            self.action_log.push((self.now_s, a.clone()));
        }
    }

    /// Re-evaluates routes. With `only_link`, just the demands currently
    /// routed over that link (or without a route) are touched.
    fn reroute(&mut self, only_link: Option<&str>) -> Vec<KmsAction> {
        let mut actions = Vec::new();
        for d in self.demands.clone() {
            let current = self.view.routes.get(&d.id).cloned().flatten();
            if let (Some(link), Some(r)) = (only_link, &current) {
                if !r.links.iter().any(|l| l == link) {
                    continue;
                }
            }
            match self.pick(&d) {
                Ok(r) => {
                    if current.as_ref() != Some(&r) {
                        actions.push(KmsAction::SwitchRoute { demand: d.id.clone(), from: current, to: r.clone() });
                        self.view.routes.insert(d.id.clone(), Some(r));
                    }
                }
                Err(_) => {
                    if current.is_some() {
                        actions.push(KmsAction::Degraded { demand: d.id.clone() });
                    }
                    self.view.routes.insert(d.id.clone(), None);
                }
            }
        }
        actions
    }

    /// Appends a report and runs detection on it.
    pub fn ingest_stats(&mut self, report: StatsReport) -> Result<Vec<KmsAction>> {
        let cap = self.config.history_capacity;
        let hist = self
            .view
            .history
            .get_mut(&report.link_id)
            .ok_or_else(|| Error::UnknownLink(report.link_id.clone()))?;
        if hist.back().is_some_and(|r| r.timestamp_s > report.timestamp_s) {
            return Err(Error::invalid(format!(
                "report for {} at {} precedes history",
                report.link_id, report.timestamp_s
            )));
        }
        if report.qber < 0.0 || report.sifted_bps < 0.0 || report.secure_bps < 0.0 {
            return Err(Error::invalid("negative rate in stats report"));
        }
        self.now_s = self.now_s.max(report.timestamp_s);
        let link = report.link_id.clone();
        hist.push_back(report);
        if hist.len() > cap {
            hist.pop_front();
        }
        if self.status(&link) != Some(LinkStatus::Up) || self.open_alarms.contains_key(&link) {
            return Ok(Vec::new());
        }
        let rules = *self.rules_for(&link);
        match detect_attack(&self.view.history[&link], &rules) {
            Some(alarm) => Ok(self.handle_alarm(alarm)),
            None => Ok(Vec::new()),
        }
    }

    /// Puts the link in alarm, stops it and moves every demand routed over
    /// it. A second alarm on a link with one open is ignored.
    pub fn handle_alarm(&mut self, alarm: Alarm) -> Vec<KmsAction> {
        if self.open_alarms.contains_key(&alarm.link_id) {
            return Vec::new();
        }
        self.now_s = self.now_s.max(alarm.raised_at_s);
        let link = alarm.link_id.clone();
        self.open_alarms.insert(link.clone(), alarm.clone());
        self.alarm_log.push(alarm.clone());
        self.set_status(&link, LinkStatus::Alarm);
        let mut actions = vec![KmsAction::RaiseAlarm(alarm), KmsAction::StopLink { link_id: link.clone() }];
        actions.extend(self.reroute(Some(&link)));
        self.record(&actions);
        actions
    }

    /// Marks a link down or back up (fiber cut and repair). Alarmed links
    /// stay in alarm until cleared.
    pub fn set_link_up(&mut self, link: &str, up: bool, now_s: f64) -> Result<Vec<KmsAction>> {
        let current = self.status(link).ok_or_else(|| Error::UnknownLink(link.to_string()))?;
        self.now_s = self.now_s.max(now_s);
        let target = match (up, current) {
            (_, LinkStatus::Alarm) => return Ok(Vec::new()),
            (true, _) => LinkStatus::Up,
            (false, _) => LinkStatus::Down,
        };
        if target == current {
            return Ok(Vec::new());
        }
        self.set_status(link, target);
        let actions = if up { self.reroute(None) } else { self.reroute(Some(link)) };
        self.record(&actions);
        Ok(actions)
    }

    pub fn apply(&mut self, cmd: &KmsCommand, now_s: f64) -> Result<Vec<KmsAction>> {
        self.now_s = self.now_s.max(now_s);
        let actions = match cmd {
            KmsCommand::ClearAlarm { link_id } => {
                self.status(link_id).ok_or_else(|| Error::UnknownLink(link_id.clone()))?;
                if self.open_alarms.remove(link_id).is_none() {
                    return Err(Error::invalid(format!("no open alarm on {link_id}")));
                }
                self.set_status(link_id, LinkStatus::Up);
                let mut a = vec![KmsAction::ResumeLink { link_id: link_id.clone() }];
                a.extend(self.reroute(None));
                a
            }
            KmsCommand::SetPolicy { policy } => {
                self.config.policy = *policy;
                self.reroute(None)
            }
            KmsCommand::ForceRoute { demand, nodes } => {
                let d = self
                    .demands
                    .iter()
                    .find(|d| &d.id == demand)
                    .ok_or_else(|| Error::invalid(format!("unknown demand {demand}")))?;
                if nodes.first() != Some(&d.src) || nodes.last() != Some(&d.dst) {
                    return Err(Error::invalid("forced route must join the demand's endpoints"));
                }
                let r = self.graph.route(nodes)?;
                if let Some(bad) = r.links.iter().find(|l| self.status(l) != Some(LinkStatus::Up)) {
                    return Err(Error::invalid(format!("link {bad} is not up")));
                }
                let from = self.view.routes.insert(demand.clone(), Some(r.clone())).flatten();
                if from.as_ref() == Some(&r) {
                    Vec::new()
                } else {
                    vec![KmsAction::SwitchRoute { demand: demand.clone(), from, to: r }]
                }
            }
        };
        self.record(&actions);
        Ok(actions)
    }

    /// The `/state` document.
    pub fn state_json(&self) -> Value {
        let links: Vec<Value> = self
            .graph
            .links()
            .map(|l| {
                let last = self.view.history[&l.id].back();
                json!({
                    "id": l.id,
                    "a": l.a,
                    "b": l.b,
                    "distance_km": l.distance_km,
                    "status": self.view.status[&l.id],
                    "qber": last.map(|r| r.qber),
                    "sifted_bps": last.map(|r| r.sifted_bps),
                    "secure_bps": last.map(|r| r.secure_bps),
                    "buffer_bits": last.map(|r| r.buffer_bits),
                })
            })
            .collect();
        let routes: Vec<Value> = self
            .demands
            .iter()
            .map(|d| json!({ "demand": d.id, "src": d.src, "dst": d.dst, "route": self.view.routes.get(&d.id) }))
            .collect();
        json!({
            "t_s": self.now_s,
            "policy": self.config.policy,
            "links": links,
            "routes": routes,
            "alarms_open": self.open_alarms.len(),
        })
    }

    /// The `/links/{id}/history` document, newest `limit` rows.
    pub fn history_json(&self, link: &str, limit: Option<usize>) -> Result<Value> {
        let h = self.view.history.get(link).ok_or_else(|| Error::UnknownLink(link.to_string()))?;
        let skip = limit.map_or(0, |n| h.len().saturating_sub(n));
        let rows: Vec<&StatsReport> = h.iter().skip(skip).collect();
        Ok(json!({ "link_id": link, "history": rows }))
    }

    /// The `/alarms` document.
    pub fn alarms_json(&self) -> Value {
        json!({
            "open": self.open_alarms.values().collect::<Vec<_>>(),
            "log": self.alarm_log,
        })
    }
}
