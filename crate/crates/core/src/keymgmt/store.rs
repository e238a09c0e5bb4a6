//! Per-peer key pools.
//!
//! Pushed key bits are appended to a per-peer carry and committed in
//! fixed-size storage blocks. Draws take bytes from the front of the pool
//! in block order, so two stores that ingested the same material and serve
//! the same sequence of draws hand out identical pads.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use zeroize::Zeroize;

use crate::error::{Error, Result};

pub const DEFAULT_CHUNK_BYTES: usize = 32_768;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BlockState {
    Fresh,
    Reserved,
    Consumed,
}

/// One contiguous piece of a draw.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Segment {
    pub block: u64,
    pub offset: usize,
    pub len: usize,
}

/// Bytes set aside for `purpose`, not yet handed out.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Reservation {
    pub peer: String,
    pub purpose: String,
    pub segments: Vec<Segment>,
}

impl Reservation {
    pub fn len(&self) -> usize {
        self.segments.iter().map(|s| s.len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Counters {
    pub ingested_bits: u64,
    pub available_bits: u64,
    pub reserved_bits: u64,
    pub consumed_bits: u64,
    /// Pushed bits still waiting in the carry for a full block.
    pub carry_bits: u64,
}

impl Counters {
    pub fn balanced(&self) -> bool {
        self.available_bits + self.reserved_bits + self.consumed_bits == self.ingested_bits
    }
}

#[derive(Debug, Clone)]
struct StoredBlock {
    id: u64,
    bytes: Vec<u8>,
    /// Bytes of this block already reserved or consumed, from the front.
    drawn: usize,
    consumed: usize,
}

#[derive(Debug, Clone, Default)]
struct Pool {
    blocks: Vec<StoredBlock>,
    /// First block with undrawn bytes.
    head: usize,
    next_id: u64,
    carry: Vec<u8>,
    carry_bits: usize,
    purposes: BTreeSet<String>,
    /// Purposes reserved but not yet consumed.
    open: BTreeSet<String>,
    counters: Counters,
}

impl Pool {
    fn append_bits(&mut self, bytes: &[u8], bit_len: usize) {
        if self.carry_bits.is_multiple_of(8) {
            self.carry.extend_from_slice(&bytes[..bit_len.div_ceil(8)]);
            if !bit_len.is_multiple_of(8) {
                let last = self.carry.len() - 1;
                self.carry[last] &= 0xFFu8 << (8 - bit_len % 8);
            }
        } else {
            for i in 0..bit_len {
                let bit = (bytes[i / 8] >> (7 - i % 8)) & 1;
                let pos = self.carry_bits + i;
                if pos.is_multiple_of(8) {
                    self.carry.push(0);
                }
                let last = self.carry.len() - 1;
                self.carry[last] |= bit << (7 - pos % 8);
            }
        }
        self.carry_bits += bit_len;
    }

    fn commit(&mut self, chunk: usize) -> Vec<u64> {
        let full = self.carry_bits / (8 * chunk);
        let mut ids = Vec::with_capacity(full);
        if full == 0 {
            self.counters.carry_bits = self.carry_bits as u64;
            return ids;
        }
        let take = full * chunk;
        let mut rest = self.carry.split_off(take);
        std::mem::swap(&mut rest, &mut self.carry);
        let mut committed = rest;
        for piece in committed.chunks(chunk) {
            let id = self.next_id;
            self.next_id += 1;
            self.blocks.push(StoredBlock { id, bytes: piece.to_vec(), drawn: 0, consumed: 0 });
            ids.push(id);
        }
        committed.zeroize();
        self.carry_bits -= take * 8;
        let bits = (take * 8) as u64;
        self.counters.ingested_bits += bits;
        self.counters.available_bits += bits;
        self.counters.carry_bits = self.carry_bits as u64;
        ids
    }

    fn index_of(&self, id: u64) -> Option<usize> {
        self.blocks.binary_search_by_key(&id, |b| b.id).ok()
    }
}

#[derive(Debug, Clone)]
pub struct KeyStore {
    chunk_bytes: usize,
    pools: BTreeMap<String, Pool>,
}

impl Default for KeyStore {
    fn default() -> Self {
        KeyStore::new(DEFAULT_CHUNK_BYTES).expect("default chunk size is valid")
    }
}

impl KeyStore {
    pub fn new(chunk_bytes: usize) -> Result<Self> {
        if chunk_bytes == 0 {
            return Err(Error::invalid("chunk size must be positive"));
        }
        Ok(KeyStore { chunk_bytes, pools: BTreeMap::new() })
    }

    pub fn chunk_bytes(&self) -> usize {
        self.chunk_bytes
    }

    pub fn peers(&self) -> impl Iterator<Item = &str> {
        self.pools.keys().map(String::as_str)
    }

    /// Appends `bit_len` bits (MSB first) for `peer` and commits every full
    /// storage block. Returns the new block ids.
    pub fn ingest(&mut self, peer: &str, bytes: &[u8], bit_len: usize) -> Result<Vec<u64>> {
        if bit_len > bytes.len() * 8 {
            return Err(Error::invalid(format!(
                "bit length {bit_len} exceeds {} supplied bytes",
                bytes.len()
            )));
        }
        let chunk = self.chunk_bytes;
        let pool = self.pools.entry(peer.to_string()).or_default();
        pool.append_bits(bytes, bit_len);
        Ok(pool.commit(chunk))
    }

    pub fn counters(&self, peer: &str) -> Counters {
        self.pools.get(peer).map(|p| p.counters).unwrap_or_default()
    }

    pub fn available_bytes(&self, peer: &str) -> usize {
        (self.counters(peer).available_bits / 8) as usize
    }

    /// Sets aside the next `n_bytes` of the pool for `purpose`. Purpose ids
    /// are single-use per pool. On error the pool is unchanged.
    pub fn reserve(&mut self, peer: &str, n_bytes: usize, purpose: &str) -> Result<Reservation> {
        let pool = self.pools.get_mut(peer).ok_or_else(|| Error::KeyExhausted {
            peer: peer.to_string(),
            requested: n_bytes,
            available: 0,
        })?;
        if pool.purposes.contains(purpose) {
            return Err(Error::PurposeReused(purpose.to_string()));
        }
        let available = (pool.counters.available_bits / 8) as usize;
        if n_bytes > available {
            return Err(Error::KeyExhausted { peer: peer.to_string(), requested: n_bytes, available });
        }
        pool.purposes.insert(purpose.to_string());
        pool.open.insert(purpose.to_string());
        let mut segments = Vec::new();
        let mut need = n_bytes;
        while need > 0 {
            let b = &mut pool.blocks[pool.head];
            let len = need.min(b.bytes.len() - b.drawn);
            segments.push(Segment { block: b.id, offset: b.drawn, len });
            b.drawn += len;
            need -= len;
            if b.drawn == b.bytes.len() {
                pool.head += 1;
            }
        }
        let bits = n_bytes as u64 * 8;
        pool.counters.available_bits -= bits;
        pool.counters.reserved_bits += bits;
        Ok(Reservation { peer: peer.to_string(), purpose: purpose.to_string(), segments })
    }

    /// Hands out a reservation's bytes and zeroizes them in storage.
    pub fn consume(&mut self, reservation: &Reservation) -> Result<Vec<u8>> {
        let pool = self
            .pools
            .get_mut(&reservation.peer)
            .ok_or_else(|| Error::invalid(format!("no pool for {}", reservation.peer)))?;
        if !pool.open.remove(&reservation.purpose) {
            let block = reservation.segments.first().map_or(0, |s| s.block as usize);
            return Err(Error::BlockUsed(block));
        }
        let mut out = Vec::with_capacity(reservation.len());
        for s in &reservation.segments {
            let i = pool.index_of(s.block).expect("checked above");
            let b = &mut pool.blocks[i];
            let region = &mut b.bytes[s.offset..s.offset + s.len];
            out.extend_from_slice(region);
            region.zeroize();
            b.consumed += s.len;
        }
        let bits = reservation.len() as u64 * 8;
        pool.counters.reserved_bits -= bits;
        pool.counters.consumed_bits += bits;
        Ok(out)
    }

    pub fn reserve_and_consume(&mut self, peer: &str, n_bytes: usize, purpose: &str) -> Result<(Vec<u8>, Reservation)> {
        let r = self.reserve(peer, n_bytes, purpose)?;
        let pad = self.consume(&r)?;
        Ok((pad, r))
    }

    pub fn block_state(&self, peer: &str, id: u64) -> Option<BlockState> {
        let pool = self.pools.get(peer)?;
        let b = &pool.blocks[pool.index_of(id)?];
        Some(if b.consumed == b.bytes.len() {
            BlockState::Consumed
        } else if b.drawn > 0 {
            BlockState::Reserved
        } else {
            BlockState::Fresh
        })
    }

    /// Raw storage of a block, for audits.
    pub fn block_bytes(&self, peer: &str, id: u64) -> Option<&[u8]> {
        let pool = self.pools.get(peer)?;
        Some(&pool.blocks[pool.index_of(id)?].bytes)
    }

    pub fn block_ids(&self, peer: &str) -> Vec<u64> {
        self.pools.get(peer).map(|p| p.blocks.iter().map(|b| b.id).collect()).unwrap_or_default()
    }
}
