use std::collections::{BTreeMap, VecDeque};

use serde::{Deserialize, Serialize};

use super::api::{AuditEntry, DeviceTelemetry, KeyMaterialPush, StatsReport};
use super::store::{Counters, KeyStore, Reservation};
use crate::error::{Error, Result};

pub const DEFAULT_STATS_WINDOW_S: f64 = 1.0;

#[derive(Debug, Clone, Default)]
struct LinkWindow {
    /// `(timestamp, sifted bits, secure bits, qber)` samples.
    samples: VecDeque<(f64, u64, u64, Option<f64>)>,
    last_qber: f64,
}

/// Messages a KMA accepts. All state changes go through [`Kma::handle`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum KmaRequest {
    Push(KeyMaterialPush),
    Telemetry(DeviceTelemetry),
    Draw { peer: String, n_bytes: usize, purpose: String },
    Report { link_id: String, now_s: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum KmaReply {
    Stored { block_ids: Vec<u64> },
    Ack,
    Pad { bytes: Vec<u8> },
    Report(StatsReport),
}

/// Key Management Agent of one node.
#[derive(Debug, Clone)]
pub struct Kma {
    node: String,
    store: KeyStore,
    /// Link id to the node at its far end.
    links: BTreeMap<String, String>,
    last_seq: BTreeMap<String, u64>,
    windows: BTreeMap<String, LinkWindow>,
    window_s: f64,
    audit: Vec<AuditEntry>,
}

impl Kma {
    pub fn new(node: &str, chunk_bytes: usize) -> Result<Self> {
        Ok(Kma {
            node: node.to_string(),
            store: KeyStore::new(chunk_bytes)?,
            links: BTreeMap::new(),
            last_seq: BTreeMap::new(),
            windows: BTreeMap::new(),
            window_s: DEFAULT_STATS_WINDOW_S,
            audit: Vec::new(),
        })
    }

    pub fn node(&self) -> &str {
        &self.node
    }

    pub fn set_stats_window(&mut self, window_s: f64) -> Result<()> {
        if !(window_s > 0.0) {
            return Err(Error::invalid("stats window must be positive"));
        }
        self.window_s = window_s;
        Ok(())
    }

    /// Declares a QKD link terminating here, shared with `peer`.
    pub fn attach_link(&mut self, link_id: &str, peer: &str) {
        self.links.insert(link_id.to_string(), peer.to_string());
        self.windows.entry(link_id.to_string()).or_default();
    }

    pub fn peer_of(&self, link_id: &str) -> Result<&str> {
        self.links.get(link_id).map(String::as_str).ok_or(Error::UnknownLink(link_id.to_string()))
    }

    pub fn store(&self) -> &KeyStore {
        &self.store
    }

    pub fn audit(&self) -> &[AuditEntry] {
        &self.audit
    }

    pub fn counters(&self, peer: &str) -> Counters {
        self.store.counters(peer)
    }

    pub fn handle(&mut self, req: KmaRequest) -> Result<KmaReply> {
        match req {
            KmaRequest::Push(p) => Ok(KmaReply::Stored { block_ids: self.ingest_key_material(&p)? }),
            KmaRequest::Telemetry(t) => {
                self.record_telemetry(&t)?;
                Ok(KmaReply::Ack)
            }
            KmaRequest::Draw { peer, n_bytes, purpose } => {
                Ok(KmaReply::Pad { bytes: self.reserve_and_consume(&peer, n_bytes, &purpose)? })
            }
            KmaRequest::Report { link_id, now_s } => Ok(KmaReply::Report(self.report_stats(&link_id, now_s)?)),
        }
    }

    /// Stores pushed key for the link's peer. Sequence numbers must grow
    /// strictly per link; a replay leaves the pool untouched.
    pub fn ingest_key_material(&mut self, push: &KeyMaterialPush) -> Result<Vec<u64>> {
        let peer = self.peer_of(&push.link_id)?.to_string();
        if let Some(&last) = self.last_seq.get(&push.link_id) {
            if push.seq <= last {
                return Err(Error::Replay { link: push.link_id.clone(), seq: push.seq });
            }
        }
        let ids = self.store.ingest(&peer, &push.bits, push.bit_length)?;
        self.last_seq.insert(push.link_id.clone(), push.seq);
        let w = self.windows.entry(push.link_id.clone()).or_default();
        w.samples.push_back((push.metadata.timestamp_s, 0, push.bit_length as u64, None));
        Ok(ids)
    }

    /// Stores key that did not come from a local QKD link, such as relayed
    /// end-to-end key, in the pool shared with `peer`.
    pub fn deposit(&mut self, peer: &str, bytes: &[u8]) -> Result<Vec<u64>> {
        self.store.ingest(peer, bytes, bytes.len() * 8)
    }

    pub fn record_telemetry(&mut self, t: &DeviceTelemetry) -> Result<()> {
        self.peer_of(&t.link_id)?;
        let w = self.windows.entry(t.link_id.clone()).or_default();
        w.samples.push_back((t.timestamp_s, t.sifted_bits, 0, t.qber));
        Ok(())
    }

    pub fn reserve(&mut self, peer: &str, n_bytes: usize, purpose: &str) -> Result<Reservation> {
        self.store.reserve(peer, n_bytes, purpose)
    }

    pub fn consume(&mut self, r: &Reservation) -> Result<Vec<u8>> {
        let pad = self.store.consume(r)?;
        for s in &r.segments {
            self.audit.push(AuditEntry {
                kma: self.node.clone(),
                peer: r.peer.clone(),
                block: s.block,
                offset: s.offset,
                len: s.len,
                purpose: r.purpose.clone(),
            });
        }
        Ok(pad)
    }

    pub fn reserve_and_consume(&mut self, peer: &str, n_bytes: usize, purpose: &str) -> Result<Vec<u8>> {
        let r = self.reserve(peer, n_bytes, purpose)?;
        self.consume(&r)
    }

    /// Rates over the trailing window ending at `now_s` and the current
    /// buffer of the link's pool.
    pub fn report_stats(&mut self, link_id: &str, now_s: f64) -> Result<StatsReport> {
        let peer = self.peer_of(link_id)?.to_string();
        let window = self.window_s;
        let w = self.windows.entry(link_id.to_string()).or_default();
        while w.samples.front().is_some_and(|s| s.0 <= now_s - window) {
            w.samples.pop_front();
        }
        let mut sifted = 0;
        let mut secure = 0;
        let mut qber = None;
        for &(t, s, k, q) in &w.samples {
            if t <= now_s {
                sifted += s;
                secure += k;
                if q.is_some() {
                    qber = q;
                }
            }
        }
        if let Some(q) = qber {
            w.last_qber = q;
        }
        Ok(StatsReport {
            link_id: link_id.to_string(),
            timestamp_s: now_s,
            qber: if sifted > 0 { w.last_qber } else { 0.0 },
            sifted_bps: sifted as f64 / window,
            secure_bps: secure as f64 / window,
            buffer_bits: self.store.counters(&peer).available_bits,
        })
    }
}
