//! Key distillation: error-correction rate selection, Cascade
//! reconciliation, secure-fraction bounds, Toeplitz privacy amplification
//! and the per-link pipeline that strings them together.

mod block;
mod bounds;
mod cascade;
mod config;
mod ec_rate;
pub mod ntt;
mod pa;
mod pipeline;
mod toeplitz;

pub use block::{KeyStatus, Provenance, SecretKeyBlock, KEY_BLOCK_MAGIC};
pub use bounds::{
    decoy_bounds, decoy_secure_fraction, dps_secure_fraction, dps_secure_fraction_at,
    DecoyBounds, DecoyStats, DPS_DEFAULT_MEAN_PHOTONS,
};
pub use cascade::{cascade_reconcile, CascadeOutcome, CascadeParams, Round, RoundKind, Transcript};
pub use config::{DistillationConfig, EcMode, PostProcessing, SecureBound};
pub use ec_rate::{binary_entropy, pa_input_bits, select_ec_rate, EC_RATE_TABLE};
pub use ntt::{ntt_convolve, NTT_PRIME};
pub use pa::{privacy_amplify, PaInput};
pub use pipeline::{DistillEvent, Distiller, EpochTelemetry};
pub use toeplitz::{expand_diagonal, toeplitz_hash, toeplitz_hash_with_diagonal, HashPath};
