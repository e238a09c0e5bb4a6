use crate::error::{Error, Result};

/// Coding rates by QBER band: `(upper QBER bound, rate)`.
pub const EC_RATE_TABLE: [(f64, f64); 3] = [(0.035, 0.75), (0.055, 0.65), (0.075, 0.55)];

/// Error-correction coding rate for a block at `qber`. Above the last band
/// the block is aborted.
pub fn select_ec_rate(qber: f64) -> Result<f64> {
    if !(0.0..=0.5).contains(&qber) {
        return Err(Error::invalid(format!("qber {qber} outside [0, 0.5]")));
    }
    EC_RATE_TABLE
        .iter()
        .find(|(bound, _)| qber < *bound)
        .map(|&(_, rate)| rate)
        .ok_or(Error::BlockAbort { qber })
}

/// Privacy-amplification input length after correcting a sifted block at
/// the given coding rate.
pub fn pa_input_bits(rate: f64, sifted_block_bits: usize) -> usize {
    (rate * sifted_block_bits as f64).round() as usize
}

/// Binary entropy in bits, with `0 log 0 = 0`.
pub fn binary_entropy(e: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&e) {
        return Err(Error::invalid(format!("binary entropy argument {e} outside [0,1]")));
    }
    Ok(h2(e))
}

pub(crate) fn h2(e: f64) -> f64 {
    let term = |p: f64| if p <= 0.0 { 0.0 } else { -p * p.log2() };
    term(e) + term(1.0 - e)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn rate_bands() {
        assert_eq!(select_ec_rate(0.027).unwrap(), 0.75);
        assert_eq!(select_ec_rate(0.050).unwrap(), 0.65);
        assert_eq!(select_ec_rate(0.070).unwrap(), 0.55);
        assert_eq!(select_ec_rate(0.0).unwrap(), 0.75);
        assert_eq!(select_ec_rate(0.035).unwrap(), 0.65);
        assert!(matches!(select_ec_rate(0.075), Err(Error::BlockAbort { .. })));
        assert!(matches!(select_ec_rate(0.08), Err(Error::BlockAbort { .. })));
        assert!(matches!(select_ec_rate(-0.1), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn entropy_values() {
        assert_eq!(binary_entropy(0.0).unwrap(), 0.0);
        assert_eq!(binary_entropy(1.0).unwrap(), 0.0);
        assert_abs_diff_eq!(binary_entropy(0.5).unwrap(), 1.0, epsilon = 1e-15);
        // -0.027 log2 0.027 - 0.973 log2 0.973 = 0.14067 + 0.03840
        assert_abs_diff_eq!(binary_entropy(0.027).unwrap(), 0.1791, epsilon = 5e-4);
        assert!(binary_entropy(1.5).is_err());
    }
}
