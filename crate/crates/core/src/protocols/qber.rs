use rand::seq::index;
use serde::{Deserialize, Serialize};

use super::SiftedPair;
use crate::error::{Error, Result};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QberEstimate {
    pub sample_size: usize,
    pub error_count: usize,
    pub rate: f64,
    pub timestamp_s: f64,
}

/// Disclose a seeded uniform sample of `ceil(fraction * len)` positions,
/// compare them, and remove them from both strings.
pub fn estimate_qber(
    pair: &SiftedPair,
    disclose_fraction: f64,
    seed: u64,
) -> Result<(QberEstimate, SiftedPair)> {
    if pair.is_empty() {
        return Err(Error::invalid("cannot estimate qber of an empty pair"));
    }
    if !(disclose_fraction > 0.0 && disclose_fraction < 1.0) {
        return Err(Error::invalid("disclose_fraction must be in (0,1)"));
    }
    let len = pair.len();
    let k = ((disclose_fraction * len as f64).ceil() as usize).clamp(1, len);
    let mut r = rng::stream(seed, "qber-sample");
    let mut keep = vec![true; len];
    let mut errors = 0;
    for pos in index::sample(&mut r, len, k) {
        keep[pos] = false;
        errors += usize::from(pair.alice_bits[pos] != pair.bob_bits[pos]);
    }
    let mut reduced = pair.clone();
    reduced.retain_positions(&keep);
    let est = QberEstimate {
        sample_size: k,
        error_count: errors,
        rate: errors as f64 / k as f64,
        timestamp_s: pair.elapsed_s,
    };
    Ok((est, reduced))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pair_from(alice: Vec<u8>, bob: Vec<u8>) -> SiftedPair {
        let n = alice.len();
        SiftedPair {
            alice_bits: alice,
            bob_bits: bob,
            classes: vec![0; n],
            slots: (0..n as u64).collect(),
            ..SiftedPair::empty("t")
        }
    }

    #[test]
    fn error_free_pair() {
        let bits: Vec<u8> = (0..1000).map(|i| (i % 3 == 0) as u8).collect();
        let p = pair_from(bits.clone(), bits);
        let (est, reduced) = estimate_qber(&p, 0.1, 9).unwrap();
        assert_eq!(est.rate, 0.0);
        assert_eq!(est.sample_size, 100);
        assert_eq!(reduced.len(), 900);
        assert_eq!(reduced.alice_bits, reduced.bob_bits);
    }

    #[test]
    fn half_of_four_removes_two() {
        let p = pair_from(vec![0, 1, 0, 1], vec![0, 1, 1, 1]);
        let (est, reduced) = estimate_qber(&p, 0.5, 1).unwrap();
        assert_eq!(est.sample_size, 2);
        assert_eq!(reduced.len(), 2);
        assert_eq!(reduced.slots.len(), 2);
    }

    #[test]
    fn empty_pair_is_rejected() {
        let p = pair_from(vec![], vec![]);
        assert!(matches!(estimate_qber(&p, 0.1, 1), Err(Error::InvalidArgument(_))));
    }
}
