use super::config::DistillationConfig;
use super::toeplitz::{toeplitz_hash, HashPath};
use crate::error::{Error, Result};

/// A reconciled block ready for privacy amplification.
#[derive(Debug, Clone, Copy)]
pub struct PaInput<'a> {
    pub bits: &'a [u8],
    /// Everything disclosed about `bits` during reconciliation and
    /// confirmation.
    pub leakage_bits: usize,
    /// Secure fraction with the leakage already subtracted.
    pub secure_fraction: f64,
}

/// Output length: `floor(fraction * n) - margin`, and never more than the
/// bits left after removing leakage and margin.
pub fn output_length(input: &PaInput<'_>, margin: usize) -> usize {
    let n = input.bits.len();
    let by_fraction = ((input.secure_fraction * n as f64).floor() as usize).saturating_sub(margin);
    let by_leakage = n.saturating_sub(input.leakage_bits).saturating_sub(margin);
    by_fraction.min(by_leakage)
}

/// Compresses a reconciled block with a Toeplitz hash seeded by `seed`.
/// Blocks shorter than `min_pa_block_bits` are deferred so the caller can
/// accumulate more key.
pub fn privacy_amplify(
    input: &PaInput<'_>,
    cfg: &DistillationConfig,
    seed: u64,
    path: HashPath,
) -> Result<Vec<u8>> {
    let n = input.bits.len();
    if n < cfg.min_pa_block_bits {
        return Err(Error::Deferred { have: n, need: cfg.min_pa_block_bits });
    }
    if !(0.0..=1.0).contains(&input.secure_fraction) {
        return Err(Error::invalid(format!(
            "secure fraction {} outside [0,1]",
            input.secure_fraction
        )));
    }
    let m = output_length(input, cfg.pa_security_margin_bits);
    if m == 0 {
        return Ok(Vec::new());
    }
    toeplitz_hash(input.bits, seed, m, path)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(min: usize) -> DistillationConfig {
        DistillationConfig { min_pa_block_bits: min, ..DistillationConfig::default() }
    }

    #[test]
    fn length_rule() {
        let bits = vec![1u8; 10_000];
        let inp = PaInput { bits: &bits, leakage_bits: 3_000, secure_fraction: 0.3 };
        assert_eq!(output_length(&inp, 100), 2_900);
        let greedy = PaInput { bits: &bits, leakage_bits: 9_950, secure_fraction: 0.9 };
        assert_eq!(output_length(&greedy, 100), 0);
    }

    #[test]
    fn short_blocks_are_deferred() {
        let bits = vec![0u8; 1_000];
        let inp = PaInput { bits: &bits, leakage_bits: 0, secure_fraction: 0.5 };
        assert!(matches!(
            privacy_amplify(&inp, &cfg(2_000), 1, HashPath::Ntt),
            Err(Error::Deferred { have: 1_000, need: 2_000 })
        ));
        let out = privacy_amplify(&inp, &cfg(500), 1, HashPath::Ntt).unwrap();
        assert_eq!(out.len(), 400);
    }

    #[test]
    fn zero_fraction_gives_empty_key() {
        let bits = vec![0u8; 1_000];
        let inp = PaInput { bits: &bits, leakage_bits: 0, secure_fraction: 0.0 };
        assert!(privacy_amplify(&inp, &cfg(10), 1, HashPath::Ntt).unwrap().is_empty());
    }
}
