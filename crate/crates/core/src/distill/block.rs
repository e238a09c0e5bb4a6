//! Secret key blocks and their binary layout.
//!
//! Layout (little-endian): `"QKB1"`, block id `u64`, link id as a `u16`
//! length plus UTF-8 bytes, bit length `u64`, epoch `u64`, QBER in ppm
//! `u32`, status `u8`, then `ceil(bits / 8)` key bytes, MSB first.

use serde::{Deserialize, Serialize};
use zeroize::Zeroize;

use crate::bits;
use crate::codec::Reader;
use crate::error::{Error, Result};

pub const KEY_BLOCK_MAGIC: &[u8; 4] = b"QKB1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KeyStatus {
    Available,
    Reserved,
    Consumed,
}

impl KeyStatus {
    fn code(self) -> u8 {
        match self {
            KeyStatus::Available => 0,
            KeyStatus::Reserved => 1,
            KeyStatus::Consumed => 2,
        }
    }

    fn from_code(c: u8) -> Result<Self> {
        Ok(match c {
            0 => KeyStatus::Available,
            1 => KeyStatus::Reserved,
            2 => KeyStatus::Consumed,
            _ => return Err(Error::Format(format!("unknown key status {c}"))),
        })
    }
}

/// How a block was produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub qber: f64,
    pub input_bits: usize,
    pub leakage_bits: usize,
    pub secure_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SecretKeyBlock {
    pub id: u64,
    pub link_id: String,
    pub epoch: u64,
    pub created_s: f64,
    pub bit_length: usize,
    /// Key bits packed MSB first.
    pub bytes: Vec<u8>,
    pub status: KeyStatus,
    pub provenance: Provenance,
}

impl SecretKeyBlock {
    pub fn from_bits(
        id: u64,
        link_id: &str,
        epoch: u64,
        created_s: f64,
        key_bits: &[u8],
        provenance: Provenance,
    ) -> Self {
        SecretKeyBlock {
            id,
            link_id: link_id.to_string(),
            epoch,
            created_s,
            bit_length: key_bits.len(),
            bytes: bits::pack(key_bits),
            status: KeyStatus::Available,
            provenance,
        }
    }

    pub fn reserve(&mut self) -> Result<()> {
        match self.status {
            KeyStatus::Available => {
                self.status = KeyStatus::Reserved;
                Ok(())
            }
            s => Err(Error::invalid(format!("cannot reserve a {s:?} block"))),
        }
    }

    /// Marks the block consumed and wipes its key bytes.
    pub fn consume(&mut self) -> Result<()> {
        match self.status {
            KeyStatus::Consumed => Err(Error::invalid("block already consumed")),
            _ => {
                self.bytes.zeroize();
                self.status = KeyStatus::Consumed;
                Ok(())
            }
        }
    }

    pub fn encode(&self) -> Vec<u8> {
        let link = self.link_id.as_bytes();
        let mut out = Vec::with_capacity(35 + link.len() + self.bytes.len());
        out.extend_from_slice(KEY_BLOCK_MAGIC);
        out.extend_from_slice(&self.id.to_le_bytes());
        out.extend_from_slice(&(link.len() as u16).to_le_bytes());
        out.extend_from_slice(link);
        out.extend_from_slice(&(self.bit_length as u64).to_le_bytes());
        out.extend_from_slice(&self.epoch.to_le_bytes());
        let ppm = (self.provenance.qber * 1e6).round().clamp(0.0, u32::MAX as f64) as u32;
        out.extend_from_slice(&ppm.to_le_bytes());
        out.push(self.status.code());
        out.extend_from_slice(&self.bytes);
        out
    }

    /// Decodes a block. Fields not carried by the layout (creation time,
    /// leakage, secure fraction) come back zeroed.
    pub fn decode(buf: &[u8]) -> Result<Self> {
        let mut r = Reader { buf, pos: 0 };
        if r.take(4)? != KEY_BLOCK_MAGIC {
            return Err(Error::Format("bad key block magic".into()));
        }
        let id = r.u64()?;
        let link_len = r.u16()? as usize;
        let link_id = String::from_utf8(r.take(link_len)?.to_vec())
            .map_err(|_| Error::Format("link id is not utf-8".into()))?;
        let bit_length = r.u64()? as usize;
        let epoch = r.u64()?;
        let qber = f64::from(r.u32()?) / 1e6;
        let status = KeyStatus::from_code(r.take(1)?[0])?;
        let bytes = r.take(bit_length.div_ceil(8))?.to_vec();
        if r.pos != buf.len() {
            return Err(Error::Format("trailing bytes after key block".into()));
        }
        Ok(SecretKeyBlock {
            id,
            link_id,
            epoch,
            created_s: 0.0,
            bit_length,
            bytes,
            status,
            provenance: Provenance { qber, input_bits: 0, leakage_bits: 0, secure_fraction: 0.0 },
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> SecretKeyBlock {
        let prov = Provenance { qber: 0.027, input_bits: 100, leakage_bits: 30, secure_fraction: 0.3 };
        SecretKeyBlock::from_bits(7, "L2", 3, 1.5, &[1, 0, 1, 1, 0, 0, 0, 1, 1, 1], prov)
    }

    #[test]
    fn round_trip() {
        let b = sample();
        let enc = b.encode();
        assert_eq!(&enc[..4], b"QKB1");
        let d = SecretKeyBlock::decode(&enc).unwrap();
        assert_eq!(d.id, 7);
        assert_eq!(d.link_id, "L2");
        assert_eq!(d.bit_length, 10);
        assert_eq!(d.bytes, b.bytes);
        assert_eq!(d.provenance.qber, 0.027);
        assert_eq!(d.status, KeyStatus::Available);
    }

    #[test]
    fn truncation_and_magic_are_checked() {
        let enc = sample().encode();
        assert!(SecretKeyBlock::decode(&enc[..enc.len() - 1]).is_err());
        let mut bad = enc.clone();
        bad[0] = b'X';
        assert!(SecretKeyBlock::decode(&bad).is_err());
    }

    #[test]
    fn lifecycle_zeroizes() {
        let mut b = sample();
        b.reserve().unwrap();
        assert!(b.reserve().is_err());
        b.consume().unwrap();
        assert!(b.bytes.iter().all(|&x| x == 0));
        assert!(b.consume().is_err());
    }
}
