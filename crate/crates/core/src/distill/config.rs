use serde::{Deserialize, Serialize};

use super::ntt::NTT_PRIME;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EcMode {
    /// Executable Cascade reconciliation.
    Cascade,
    /// Leakage charged from the coding-rate table, `(1 - rate) * n`; errors
    /// are assumed corrected.
    RateTable,
}

/// Which secure-fraction bound a link's pipeline applies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SecureBound {
    /// Asymptotic decoy-state bound over named intensity classes.
    Decoy {
        signal: String,
        decoy: String,
        #[serde(default)]
        vacuum: Option<String>,
    },
    /// DPS individual-attack bound at the given mean photon number.
    Dps { mean_photons: f64 },
    /// Entanglement-based BB84 bound, `1 - H2(e)`.
    Entanglement,
    /// Fixed trusted single-photon share: `share * (1 - H2(e))`.
    Fixed { single_photon_share: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PostProcessing {
    pub ec_mode: EcMode,
    pub bound: SecureBound,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistillationConfig {
    pub sifted_block_bits: usize,
    pub ec_mode: EcMode,
    pub cascade_passes: usize,
    /// Asymptotic-regime allowance subtracted from every PA output. Not a
    /// finite-key bound.
    pub pa_security_margin_bits: usize,
    pub min_pa_block_bits: usize,
    pub disclose_fraction: f64,
    /// Bits disclosed by the post-reconciliation equality check.
    pub confirm_bits: usize,
}

impl Default for DistillationConfig {
    fn default() -> Self {
        DistillationConfig {
            sifted_block_bits: 1 << 20,
            ec_mode: EcMode::Cascade,
            cascade_passes: 4,
            pa_security_margin_bits: 100,
            min_pa_block_bits: 300_000,
            disclose_fraction: 0.10,
            confirm_bits: 64,
        }
    }
}

impl DistillationConfig {
    pub fn ntt_prime(&self) -> u64 {
        NTT_PRIME
    }

    pub fn validate(&self) -> Result<()> {
        if self.sifted_block_bits == 0 || self.sifted_block_bits as u64 > NTT_PRIME - 1 {
            return Err(Error::invalid("sifted_block_bits must be in [1, p-1]"));
        }
        if !(self.disclose_fraction > 0.0 && self.disclose_fraction < 1.0) {
            return Err(Error::invalid("disclose_fraction must be in (0,1)"));
        }
        if self.cascade_passes == 0 {
            return Err(Error::invalid("cascade_passes must be >= 1"));
        }
        if self.confirm_bits > 64 {
            return Err(Error::invalid("confirm_bits must be <= 64"));
        }
        Ok(())
    }
}
