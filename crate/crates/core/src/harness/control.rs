//! Transport-agnostic control endpoint: `(method, path, body)` in, status
//! and JSON document out. The CLI mounts it on HTTP; tests call it
//! directly.

use serde_json::{json, Value};

use super::config::{EventKind, ScenarioConfig};
use super::network::Network;
use super::run::fire_due;
use crate::error::{Error, Result};
use crate::kms::KmsCommand;

#[derive(Debug, Clone, PartialEq)]
pub struct ControlResponse {
    pub status: u16,
    pub body: Value,
}

impl ControlResponse {
    fn ok(body: Value) -> Self {
        ControlResponse { status: 200, body }
    }

    fn error(status: u16, code: &str, message: impl Into<String>) -> Self {
        ControlResponse { status, body: json!({ "error": { "code": code, "message": message.into() } }) }
    }

    fn from_error(e: &Error) -> Self {
        let code = match e {
            Error::UnknownLink(_) | Error::UnknownNode(_) => return Self::error(404, "not_found", e.to_string()),
            Error::InvalidArgument(_) => "invalid_argument",
            Error::Validation(_) => "validation",
            _ => "rejected",
        };
        Self::error(400, code, e.to_string())
    }
}

/// A network driven tick by tick with a scenario and live commands.
pub struct Controller {
    net: Network,
    scenario: ScenarioConfig,
    next_event: usize,
}

impl Controller {
    pub fn new(net: Network, scenario: ScenarioConfig) -> Result<Self> {
        scenario.validate()?;
        Ok(Controller { net, scenario, next_event: 0 })
    }

    pub fn network(&self) -> &Network {
        &self.net
    }

    /// Advances one tick and returns the delta pushed to subscribers.
    pub fn tick(&mut self) -> Result<Value> {
        fire_due(&mut self.net, &self.scenario, &mut self.next_event)?;
        self.net.tick()?;
        Ok(self.delta())
    }

    /// Rows of the latest tick plus alarm and route state.
    pub fn delta(&self) -> Value {
        let t = self.net.t_s();
        let rows: Vec<_> = self.net.metrics().iter().rev().take_while(|r| r.t_s == t).collect();
        let rows: Vec<_> = rows.into_iter().rev().collect();
        let state = self.net.kms().state_json();
        json!({
            "t_s": t,
            "rows": rows,
            "alarms_open": state["alarms_open"],
            "routes": state["routes"],
        })
    }

    pub fn handle(&mut self, method: &str, path: &str, body: &str) -> ControlResponse {
        let (path, query) = path.split_once('?').unwrap_or((path, ""));
        let parts: Vec<&str> = path.trim_matches('/').split('/').collect();
        match (method, parts.as_slice()) {
            ("GET", ["state"]) => ControlResponse::ok(self.net.state_json()),
            ("GET", ["alarms"]) => ControlResponse::ok(self.net.kms().alarms_json()),
            ("GET", ["links", id, "history"]) => {
                let limit = query
                    .split('&')
                    .find_map(|kv| kv.strip_prefix("limit="))
                    .map(str::parse::<usize>);
                let limit = match limit.transpose() {
                    Ok(l) => l,
                    Err(_) => return ControlResponse::error(400, "invalid_argument", "limit must be an integer"),
                };
                match self.net.kms().history_json(id, limit) {
                    Ok(v) => ControlResponse::ok(v),
                    Err(e) => ControlResponse::from_error(&e),
                }
            }
            ("POST", ["commands"]) => self.command(body),
            (_, ["state"] | ["alarms"] | ["links", _, "history"] | ["commands"]) => {
                ControlResponse::error(405, "method_not_allowed", format!("{method} not allowed on /{path}", path = path.trim_matches('/')))
            }
            _ => ControlResponse::error(404, "not_found", format!("no route {path}")),
        }
    }

    /// Accepts KMS commands (`clear_alarm`, `set_policy`, `force_route`)
    /// and scenario-style injections (`attack_on`, `link_down`, ...),
    /// applied at the current simulated time.
    fn command(&mut self, body: &str) -> ControlResponse {
        let v: Value = match serde_json::from_str(body) {
            Ok(v) => v,
            Err(e) => return ControlResponse::error(400, "malformed_json", e.to_string()),
        };
        let kind = v.get("kind").and_then(Value::as_str).unwrap_or("");
        let result = match kind {
            "set_policy" | "force_route" | "clear_alarm" if v.get("link").is_none() => {
                match serde_json::from_value::<KmsCommand>(v.clone()) {
                    Ok(cmd) => self.net.command(&cmd).map(|a| json!({ "accepted": true, "actions": a })),
                    Err(e) => Err(Error::invalid(e.to_string())),
                }
            }
            _ => match serde_json::from_value::<EventKind>(v.clone()) {
                Ok(ev) => self.net.apply_event(&ev).map(|_| json!({ "accepted": true })),
                Err(e) => Err(Error::invalid(format!("unrecognized command: {e}"))),
            },
        };
        match result {
            Ok(body) => ControlResponse::ok(body),
            Err(e) => ControlResponse::from_error(&e),
        }
    }
}
