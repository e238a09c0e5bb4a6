//! Live one-time-pad streams between two nodes.

use std::collections::BTreeMap;

use rand::RngCore;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::otp::otp_apply;
use crate::error::{Error, Result};
use crate::keymgmt::Kma;
use crate::rng;

pub const DEFAULT_SESSION_RATE_BPS: f64 = 128_000.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SessionMode {
    /// Pads come from end-to-end key kept topped up by relay.
    LiveStream,
    /// Pads come from key already stored at both endpoints.
    StoredKey,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SessionState {
    Running,
    Stalled,
    Ended,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionTelemetry {
    /// Plaintext bytes carried, per direction.
    pub bytes_enciphered: u64,
    pub pad_bytes_consumed: u64,
    pub stall_s: f64,
    pub stall_intervals: Vec<(f64, f64)>,
    /// Chunks whose decryption did not reproduce the plaintext.
    pub mismatched_chunks: u64,
}

#[derive(Debug, Clone)]
struct Direction {
    from: String,
    to: String,
    tag: &'static str,
    stream: ChaCha8Rng,
}

#[derive(Debug, Clone)]
pub struct Session {
    pub id: String,
    pub src: String,
    pub dst: String,
    pub rate_bps: f64,
    pub mode: SessionMode,
    pub state: SessionState,
    directions: Vec<Direction>,
    pool_prefix: String,
    owed_bytes: f64,
    chunk: u64,
    stall_started: Option<f64>,
    telemetry: SessionTelemetry,
}

impl Session {
    /// A session carrying `rate_bps` in each direction; one pad per
    /// direction.
    pub fn new(id: &str, src: &str, dst: &str, rate_bps: f64, bidirectional: bool, seed: u64) -> Result<Self> {
        if !(rate_bps > 0.0 && rate_bps.is_finite()) {
            return Err(Error::invalid(format!("session rate {rate_bps} must be positive")));
        }
        if src == dst {
            return Err(Error::invalid("session endpoints must differ"));
        }
        let mk = |from: &str, to: &str, tag: &'static str| Direction {
            from: from.to_string(),
            to: to.to_string(),
            tag,
            stream: rng::stream(rng::derive(seed, id), tag),
        };
        let mut directions = vec![mk(src, dst, "fwd")];
        if bidirectional {
            directions.push(mk(dst, src, "rev"));
        }
        Ok(Session {
            id: id.to_string(),
            src: src.to_string(),
            dst: dst.to_string(),
            rate_bps,
            mode: SessionMode::LiveStream,
            state: SessionState::Running,
            directions,
            pool_prefix: String::new(),
            owed_bytes: 0.0,
            chunk: 0,
            stall_started: None,
            telemetry: SessionTelemetry {
                bytes_enciphered: 0,
                pad_bytes_consumed: 0,
                stall_s: 0.0,
                stall_intervals: Vec::new(),
                mismatched_chunks: 0,
            },
        })
    }

    pub fn with_mode(mut self, mode: SessionMode) -> Self {
        self.mode = mode;
        self
    }

    /// Draws from pools named `prefix + peer` instead of `peer`, keeping
    /// end-to-end key apart from link key.
    pub fn with_pool_prefix(mut self, prefix: &str) -> Self {
        self.pool_prefix = prefix.to_string();
        self
    }

    pub fn pool_for(&self, peer: &str) -> String {
        format!("{}{peer}", self.pool_prefix)
    }

    pub fn bidirectional(&self) -> bool {
        self.directions.len() == 2
    }

    pub fn telemetry(&self) -> &SessionTelemetry {
        &self.telemetry
    }

    /// Pad bytes one step of `dt_s` needs in each direction.
    pub fn bytes_for(&self, dt_s: f64) -> usize {
        (self.owed_bytes + self.rate_bps * dt_s / 8.0).floor() as usize
    }

    /// Advances the stream by `dt_s` ending at `now_s`. Each direction draws
    /// its pad at both endpoints from the pools they share for this
    /// session, enciphers fresh plaintext and decrypts it at the far end.
    /// Without enough key the session stalls for the step and resumes once
    /// key is back.
    pub fn step(&mut self, kmas: &mut BTreeMap<String, Kma>, dt_s: f64, now_s: f64) -> Result<SessionState> {
        if self.state == SessionState::Ended {
            return Ok(self.state);
        }
        self.owed_bytes += self.rate_bps * dt_s / 8.0;
        let n = self.owed_bytes.floor() as usize;
        if n == 0 {
            return Ok(self.state);
        }
        // Both directions draw from the same pair of pools.
        let need = n * self.directions.len();
        let enough = kmas.get(&self.src).is_some_and(|k| k.store().available_bytes(&self.pool_for(&self.dst)) >= need)
            && kmas.get(&self.dst).is_some_and(|k| k.store().available_bytes(&self.pool_for(&self.src)) >= need);
        if !enough {
            // Stalled time is not owed afterwards; the stream simply pauses.
            self.owed_bytes -= n as f64;
            if self.stall_started.is_none() {
                self.stall_started = Some(now_s - dt_s);
            }
            self.state = SessionState::Stalled;
            self.telemetry.stall_s += dt_s;
            return Ok(self.state);
        }
        if let Some(start) = self.stall_started.take() {
            self.telemetry.stall_intervals.push((start, now_s - dt_s));
        }
        self.owed_bytes -= n as f64;
        let chunk = self.chunk;
        self.chunk += 1;
        let prefix = self.pool_prefix.clone();
        for d in &mut self.directions {
            let purpose = format!("session:{}:{}:{chunk}", self.id, d.tag);
            let pad_tx = kmas
                .get_mut(&d.from)
                .ok_or(Error::UnknownNode(d.from.clone()))?
                .reserve_and_consume(&format!("{prefix}{}", d.to), n, &purpose)?;
            let pad_rx = kmas
                .get_mut(&d.to)
                .ok_or(Error::UnknownNode(d.to.clone()))?
                .reserve_and_consume(&format!("{prefix}{}", d.from), n, &purpose)?;
            let mut plain = vec![0u8; n];
            d.stream.fill_bytes(&mut plain);
            let cipher = otp_apply(&plain, &pad_tx)?;
            let received = otp_apply(&cipher, &pad_rx)?;
            if received != plain {
                self.telemetry.mismatched_chunks += 1;
            }
            self.telemetry.pad_bytes_consumed += 2 * n as u64;
        }
        self.telemetry.bytes_enciphered += n as u64;
        self.state = SessionState::Running;
        Ok(self.state)
    }

    pub fn end(&mut self, now_s: f64) {
        if let Some(start) = self.stall_started.take() {
            self.telemetry.stall_intervals.push((start, now_s));
        }
        self.state = SessionState::Ended;
    }
}

/// Runs a session for `duration_s` in steps of `tick_s` against fixed
/// pools, with no key arriving meanwhile.
pub fn run_session(
    session: &mut Session,
    kmas: &mut BTreeMap<String, Kma>,
    duration_s: f64,
    tick_s: f64,
) -> Result<SessionTelemetry> {
    if !(tick_s > 0.0) {
        return Err(Error::invalid("tick must be positive"));
    }
    let steps = (duration_s / tick_s).round() as u64;
    for i in 1..=steps {
        session.step(kmas, tick_s, i as f64 * tick_s)?;
    }
    session.end(steps as f64 * tick_s);
    Ok(session.telemetry.clone())
}
