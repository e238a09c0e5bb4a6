//! JSON message forms exchanged with QKD devices and the KMS.

use serde::{Deserialize, Serialize};

use crate::bits;
use crate::distill::SecretKeyBlock;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PushMetadata {
    pub qber: f64,
    pub secure_fraction: f64,
    pub timestamp_s: f64,
}

/// Key material pushed by a QKD device to its node's KMA.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KeyMaterialPush {
    pub link_id: String,
    pub seq: u64,
    /// Key bits packed MSB first.
    pub bits: Vec<u8>,
    pub bit_length: usize,
    pub metadata: PushMetadata,
}

impl KeyMaterialPush {
    pub fn from_block(block: &SecretKeyBlock, seq: u64) -> Self {
        KeyMaterialPush {
            link_id: block.link_id.clone(),
            seq,
            bits: block.bytes.clone(),
            bit_length: block.bit_length,
            metadata: PushMetadata {
                qber: block.provenance.qber,
                secure_fraction: block.provenance.secure_fraction,
                timestamp_s: block.created_s,
            },
        }
    }

    pub fn from_bits(link_id: &str, seq: u64, key_bits: &[u8], timestamp_s: f64) -> Self {
        KeyMaterialPush {
            link_id: link_id.to_string(),
            seq,
            bits: bits::pack(key_bits),
            bit_length: key_bits.len(),
            metadata: PushMetadata { qber: 0.0, secure_fraction: 0.0, timestamp_s },
        }
    }
}

/// Per-epoch device telemetry: sifted volume and the monitored QBER.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviceTelemetry {
    pub link_id: String,
    pub timestamp_s: f64,
    pub sifted_bits: u64,
    pub qber: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatsReport {
    pub link_id: String,
    pub timestamp_s: f64,
    pub qber: f64,
    pub sifted_bps: f64,
    pub secure_bps: f64,
    pub buffer_bits: u64,
}

/// One served draw: which bytes of which block went to which purpose.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditEntry {
    pub kma: String,
    pub peer: String,
    pub block: u64,
    pub offset: usize,
    pub len: usize,
    pub purpose: String,
}
