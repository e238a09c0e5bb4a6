//! Discrete-event simulator and key-management stack for a metropolitan
//! trusted-node QKD network.
//!
//! The crate is organised by network layer:
//!
//! * [`channel`]: parametric source/fiber/detector/eavesdropper models and a
//!   Monte Carlo pulse simulator with a matching closed-form click model.
//! * [`protocols`]: BB84, SARG04, DPS and BBM92 sifting plus sampled QBER
//!   estimation.
//! * [`distill`]: error-correction rate table, Cascade, secure-fraction
//!   bounds, Toeplitz privacy amplification (naive and NTT paths) and the
//!   per-link distillation pipeline.
//! * [`keymgmt`]: key management agents that pool, serve and relay keys.
//! * [`kms`]: the central key management server (telemetry, attack
//!   detection, routing).
//! * [`applayer`]: one-time-pad sessions and stored key files.
//! * [`harness`]: topology/scenario loading, the batch event loop, metrics
//!   and the control-plane request router.

pub mod applayer;
pub mod bits;
pub mod channel;
mod codec;
pub mod distill;
pub mod error;
pub mod harness;
pub mod keymgmt;
pub mod kms;
pub mod protocols;
pub mod rng;

pub use error::{Error, Result};
