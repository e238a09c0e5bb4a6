//! Central key management server: link telemetry, eavesdropping detection
//! from QBER rules, link lifecycle and relay route selection.

mod detect;
mod routing;
mod server;

pub use detect::{detect_attack, Alarm, AlarmCause, DetectionRules};
pub use routing::{select_route, Graph, LinkInfo, LinkStatus, Route, RoutePolicy};
pub use server::{
    Demand, Kms, KmsAction, KmsCommand, KmsConfig, NetworkView, StatusChange, DEFAULT_HISTORY_CAPACITY,
};
