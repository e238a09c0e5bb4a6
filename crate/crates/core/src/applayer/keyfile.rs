//! Stored-key files for offline devices.
//!
//! Layout (little-endian): `"QKF1"`, node A and node B as `u16` length plus
//! UTF-8, total bytes `u64`, block size `u32`, block count `u32`, then per
//! block: id `u64`, used flag `u8`, length `u32`, bytes.

use serde::{Deserialize, Serialize};
use zeroize::Zeroize;

use crate::codec::Reader;
use crate::error::{Error, Result};
use crate::keymgmt::Kma;

pub const KEY_FILE_MAGIC: &[u8; 4] = b"QKF1";
/// One second of 1 kB/s voice.
pub const DEFAULT_FILE_BLOCK_BYTES: usize = 1024;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KeyFileBlock {
    pub id: u64,
    pub used: bool,
    pub bytes: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KeyFile {
    pub node_a: String,
    pub node_b: String,
    pub total_bytes: u64,
    pub block_size: u32,
    pub blocks: Vec<KeyFileBlock>,
}

/// Moves `n_bytes` of key shared by `kma` and `peer` into a file. The bytes
/// count as consumed in the pool.
pub fn export_key_file(
    kma: &mut Kma,
    peer: &str,
    n_bytes: usize,
    block_size: usize,
    purpose: &str,
) -> Result<KeyFile> {
    if block_size == 0 || block_size > u32::MAX as usize {
        return Err(Error::invalid("key file block size out of range"));
    }
    let mut key = kma.reserve_and_consume(peer, n_bytes, purpose)?;
    let blocks = key
        .chunks(block_size)
        .enumerate()
        .map(|(i, c)| KeyFileBlock { id: i as u64, used: false, bytes: c.to_vec() })
        .collect();
    key.zeroize();
    Ok(KeyFile {
        node_a: kma.node().to_string(),
        node_b: peer.to_string(),
        total_bytes: n_bytes as u64,
        block_size: block_size as u32,
        blocks,
    })
}

impl KeyFile {
    pub fn unused_bytes(&self) -> usize {
        self.blocks.iter().filter(|b| !b.used).map(|b| b.bytes.len()).sum()
    }

    /// Takes one whole block and wipes it in place.
    pub fn consume_block(&mut self, id: u64) -> Result<Vec<u8>> {
        let b = self
            .blocks
            .iter_mut()
            .find(|b| b.id == id)
            .ok_or_else(|| Error::invalid(format!("no block {id} in key file")))?;
        if b.used {
            return Err(Error::BlockUsed(id as usize));
        }
        let out = b.bytes.clone();
        b.bytes.zeroize();
        b.used = true;
        Ok(out)
    }

    /// Takes `n_bytes` from the first unused blocks. A partly needed last
    /// block is still spent whole.
    pub fn consume(&mut self, n_bytes: usize) -> Result<Vec<u8>> {
        let available = self.unused_bytes();
        if n_bytes > available {
            return Err(Error::KeyExhausted {
                peer: self.node_b.clone(),
                requested: n_bytes,
                available,
            });
        }
        let mut out = Vec::with_capacity(n_bytes);
        let ids: Vec<u64> = self.blocks.iter().filter(|b| !b.used).map(|b| b.id).collect();
        for id in ids {
            if out.len() >= n_bytes {
                break;
            }
            out.extend(self.consume_block(id)?);
        }
        out[n_bytes..].zeroize();
        out.truncate(n_bytes);
        Ok(out)
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(KEY_FILE_MAGIC);
        for name in [&self.node_a, &self.node_b] {
            out.extend_from_slice(&(name.len() as u16).to_le_bytes());
            out.extend_from_slice(name.as_bytes());
        }
        out.extend_from_slice(&self.total_bytes.to_le_bytes());
        out.extend_from_slice(&self.block_size.to_le_bytes());
        out.extend_from_slice(&(self.blocks.len() as u32).to_le_bytes());
        for b in &self.blocks {
            out.extend_from_slice(&b.id.to_le_bytes());
            out.push(u8::from(b.used));
            out.extend_from_slice(&(b.bytes.len() as u32).to_le_bytes());
            out.extend_from_slice(&b.bytes);
        }
        out
    }

    pub fn decode(buf: &[u8]) -> Result<Self> {
        let mut r = Reader { buf, pos: 0 };
        if r.take(4)? != KEY_FILE_MAGIC {
            return Err(Error::Format("bad key file magic".into()));
        }
        let mut name = || -> Result<String> {
            let len = r.u16()? as usize;
            String::from_utf8(r.take(len)?.to_vec()).map_err(|_| Error::Format("node name is not utf-8".into()))
        };
        let node_a = name()?;
        let node_b = name()?;
        let total_bytes = r.u64()?;
        let block_size = r.u32()?;
        let count = r.u32()? as usize;
        let mut blocks = Vec::with_capacity(count.min(1 << 20));
        for _ in 0..count {
            let id = r.u64()?;
            let used = match r.take(1)?[0] {
                0 => false,
                1 => true,
                f => return Err(Error::Format(format!("bad used flag {f}"))),
            };
            let len = r.u32()? as usize;
            blocks.push(KeyFileBlock { id, used, bytes: r.take(len)?.to_vec() });
        }
        if r.pos != buf.len() {
            return Err(Error::Format("trailing bytes after key file".into()));
        }
        Ok(KeyFile { node_a, node_b, total_bytes, block_size, blocks })
    }
}

/// Key bytes used by a call of `duration_s` at `bytes_per_s` per direction.
pub fn voice_key_bytes(duration_s: f64, bytes_per_s: f64, directions: u32) -> f64 {
    duration_s * bytes_per_s * f64::from(directions)
}

/// Seconds of talk a file of `file_bytes` sustains.
pub fn key_file_endurance_s(file_bytes: f64, bytes_per_s: f64, directions: u32) -> f64 {
    file_bytes / (bytes_per_s * f64::from(directions))
}
