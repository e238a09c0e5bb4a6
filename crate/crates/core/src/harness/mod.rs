//! Deterministic simulation driver: topology and scenario files, the tick
//! loop over links, KMAs, KMS and sessions, metrics and audit output, and
//! the control endpoint.

mod config;
mod control;
mod metrics;
mod network;
mod run;

pub use config::{
    harness_distill, EventKind, LinkSpec, NodeSpec, ScenarioConfig, ScenarioEvent, TopologyConfig,
    DEFAULT_PULSE_DIVISOR,
};
pub use control::{ControlResponse, Controller};
pub use metrics::{metrics_csv, MetricsRow, METRICS_HEADER};
pub use network::{matching_inject_rate, Network, RelayStats, E2E_POOL_PREFIX};
pub use run::{audit_network, run_scenario, AuditChecks, RouteSwitch, RunOutput, RunSummary};
