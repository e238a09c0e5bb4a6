//! Hop-by-hop one-time-pad key relay through trusted nodes.

use std::collections::BTreeMap;

use rand::RngCore;
use serde::{Deserialize, Serialize};

use super::kma::Kma;
use crate::applayer::otp_apply;
use crate::error::{Error, Result};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HopState {
    Delivered,
    Exhausted,
    NotAttempted,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HopStatus {
    pub from: String,
    pub to: String,
    pub state: HopState,
}

/// What crossed the classical channel on one hop: `K xor P_i`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WireMessage {
    pub hop: usize,
    pub from: String,
    pub to: String,
    pub bytes: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RelayOutcome {
    /// Key as generated at the source.
    pub source_key: Option<Vec<u8>>,
    /// Key as recovered at the destination.
    pub delivered: Option<Vec<u8>>,
    pub hops: Vec<HopStatus>,
    pub wire: Vec<WireMessage>,
    /// Every wire message, unmasked with its hop pad, gave back the key.
    pub wire_verified: bool,
    pub error: Option<Error>,
}

impl RelayOutcome {
    pub fn into_result(self) -> Result<Vec<u8>> {
        match (self.error, self.delivered) {
            (None, Some(k)) => Ok(k),
            (Some(e), _) => Err(e),
            (None, None) => Err(Error::invalid("relay produced no key")),
        }
    }
}

fn hop_purpose(purpose: &str, hop: usize) -> String {
    format!("{purpose}/hop{hop}")
}

/// Relays `n_bytes` of fresh key from `route[0]` to its last node. Hop `i`
/// draws pad `P_i` at both of its ends from the pools they share and sends
/// `K xor P_i`. A one-hop route degenerates to the shared pad itself.
///
/// If a hop runs dry the relay stops there; pads already drawn at earlier
/// hops stay consumed.
pub fn relay_key(
    kmas: &mut BTreeMap<String, Kma>,
    route: &[String],
    n_bytes: usize,
    purpose: &str,
    seed: u64,
) -> RelayOutcome {
    let mut out = RelayOutcome { source_key: None, delivered: None, hops: Vec::new(), wire: Vec::new(), wire_verified: true, error: None };
    if route.len() < 2 {
        out.error = Some(Error::invalid("route needs at least two nodes"));
        return out;
    }
    if let Some(missing) = route.iter().find(|n| !kmas.contains_key(*n)) {
        out.error = Some(Error::UnknownNode(missing.clone()));
        return out;
    }
    out.hops = route
        .windows(2)
        .map(|w| HopStatus { from: w[0].clone(), to: w[1].clone(), state: HopState::NotAttempted })
        .collect();

    let mut key: Option<Vec<u8>> = None;
    for (i, pair) in route.windows(2).enumerate() {
        let (u, v) = (&pair[0], &pair[1]);
        let tag = hop_purpose(purpose, i);
        let pad_u = kmas.get_mut(u).expect("checked").reserve_and_consume(v, n_bytes, &tag);
        let pad_u = match pad_u {
            Ok(p) => p,
            Err(e) => {
                out.hops[i].state = HopState::Exhausted;
                out.error = Some(Error::RelayAborted { hop: i, reason: e.to_string() });
                return out;
            }
        };
        let pad_v = match kmas.get_mut(v).expect("checked").reserve_and_consume(u, n_bytes, &tag) {
            Ok(p) => p,
            Err(e) => {
                out.hops[i].state = HopState::Exhausted;
                out.error = Some(Error::RelayAborted { hop: i, reason: e.to_string() });
                return out;
            }
        };
        if route.len() == 2 {
            out.source_key = Some(pad_u);
            out.delivered = Some(pad_v);
            out.hops[i].state = HopState::Delivered;
            return out;
        }
        let k = key.get_or_insert_with(|| {
            let mut k = vec![0u8; n_bytes];
            rng::stream(seed, "relay-key").fill_bytes(&mut k);
            out.source_key = Some(k.clone());
            k
        });
        let msg = otp_apply(k, &pad_u).expect("pads have the requested length");
        let recovered = otp_apply(&msg, &pad_v).expect("pads have the requested length");
        out.wire_verified &= otp_apply(&msg, &pad_u).as_deref() == Ok(k.as_slice()) && recovered == *k;
        out.wire.push(WireMessage { hop: i, from: u.clone(), to: v.clone(), bytes: msg });
        *k = recovered;
        out.hops[i].state = HopState::Delivered;
    }
    out.delivered = key;
    out
}
