//! Key Management Agents: per-node key pools fed by QKD devices, pad
//! draws for applications, hop-by-hop key relay and link statistics.

mod api;
mod kma;
mod relay;
mod store;

pub use api::{AuditEntry, DeviceTelemetry, KeyMaterialPush, PushMetadata, StatsReport};
pub use kma::{Kma, KmaReply, KmaRequest, DEFAULT_STATS_WINDOW_S};
pub use relay::{relay_key, HopState, HopStatus, RelayOutcome, WireMessage};
pub use store::{BlockState, Counters, KeyStore, Reservation, Segment, DEFAULT_CHUNK_BYTES};
