use serde::{Deserialize, Serialize};

use crate::channel::{Detection, Protocol, RawEventLog};
use crate::error::{Error, Result};
use crate::rng::{derive_n, splitmix64};

/// Detection statistics per intensity class, used by the decoy analysis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct ClassTally {
    /// Expected pulses sent in the class, `n * send_prob`.
    pub pulses: f64,
    /// Slots of the class with at least one detection.
    pub detections: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SiftedPair {
    pub link_id: String,
    pub block_seq: u64,
    pub alice_bits: Vec<u8>,
    pub bob_bits: Vec<u8>,
    /// Intensity class of each sifted bit.
    pub classes: Vec<u8>,
    /// Originating slot of each sifted bit.
    pub slots: Vec<u64>,
    pub source_pulse_count: u64,
    pub elapsed_s: f64,
    pub class_tally: Vec<ClassTally>,
}

impl SiftedPair {
    pub fn empty(link_id: &str) -> Self {
        SiftedPair {
            link_id: link_id.to_string(),
            block_seq: 0,
            alice_bits: Vec::new(),
            bob_bits: Vec::new(),
            classes: Vec::new(),
            slots: Vec::new(),
            source_pulse_count: 0,
            elapsed_s: 0.0,
            class_tally: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.alice_bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.alice_bits.is_empty()
    }

    pub fn errors(&self) -> usize {
        crate::bits::hamming(&self.alice_bits, &self.bob_bits)
    }

    /// Keep only positions where `keep` is true.
    pub fn retain_positions(&mut self, keep: &[bool]) {
        let filter = |v: &mut Vec<u8>| {
            let mut it = keep.iter();
            v.retain(|_| *it.next().unwrap());
        };
        filter(&mut self.alice_bits);
        filter(&mut self.bob_bits);
        filter(&mut self.classes);
        let mut it = keep.iter();
        self.slots.retain(|_| *it.next().unwrap());
    }

    fn push(&mut self, slot: u64, class: u8, alice: u8, bob: u8) {
        self.slots.push(slot);
        self.classes.push(class);
        self.alice_bits.push(alice);
        self.bob_bits.push(bob);
    }
}

/// Reduce a slot's detections to one outcome. A double click is squashed
/// to a random bit, drawn from a hash of the slot so sifting stays a pure
/// function of the log.
fn squash(dets: &[Detection], salt: u64) -> Detection {
    let mut d = dets[0];
    if dets.len() > 1 {
        d.bit = (splitmix64(salt ^ d.slot) & 1) as u8;
    }
    d
}

/// Sift a raw log under `protocol`.
///
/// * BB84 / BBM92: keep detections whose basis matches Alice's.
/// * SARG04: Alice announces her state together with a random state of the
///   other basis; Bob keeps the event only if his outcome is orthogonal to
///   exactly one announced state, and takes the other state's basis as the
///   bit.
/// * DPS: every single click is kept; Alice's bit is the phase difference
///   of the two interfering pulses. Double-clicked slots are discarded.
pub fn sift(protocol: Protocol, log: &RawEventLog) -> Result<SiftedPair> {
    if log.protocol != protocol {
        return Err(Error::invalid(format!(
            "log carries {} events, sift requested {protocol}",
            log.protocol
        )));
    }
    let n_classes = log.alice.class_cdf.len();
    let mut tally: Vec<ClassTally> = log
        .expected_class_pulses()
        .into_iter()
        .map(|pulses| ClassTally {
            pulses,
            detections: 0,
        })
        .collect();
    tally.resize(n_classes, ClassTally::default());

    let mut out = SiftedPair::empty("");
    out.source_pulse_count = log.n_slots();
    out.elapsed_s = log.elapsed_s;
    let salt = derive_n(log.alice.seed, 0x5A5A);

    let dets = &log.detections;
    let mut i = 0;
    while i < dets.len() {
        let slot = dets[i].slot;
        let mut j = i + 1;
        while j < dets.len() && dets[j].slot == slot {
            j += 1;
        }
        let group = &dets[i..j];
        i = j;

        let a = log.alice.slot(slot);
        tally[a.class as usize].detections += 1;

        match protocol {
            Protocol::Bb84 | Protocol::Bbm92 => {
                let d = squash(group, salt);
                if d.basis == a.basis {
                    out.push(slot, a.class, a.bit, d.bit);
                }
            }
            Protocol::Sarg04 => {
                let d = squash(group, salt);
                // Announced pair: (a.basis, a.bit) and (1 - a.basis, a.aux).
                // An outcome excludes a state of its own basis with the
                // opposite sign.
                let excludes_alice = d.basis == a.basis && d.bit != a.bit;
                let excludes_other = d.basis != a.basis && d.bit != a.aux;
                match (excludes_alice, excludes_other) {
                    (false, true) => out.push(slot, a.class, a.basis, a.basis),
                    (true, false) => out.push(slot, a.class, a.basis, 1 - a.basis),
                    _ => {}
                }
            }
            Protocol::Dps => {
                if group.len() == 1 {
                    out.push(slot, a.class, log.alice.dps_bit(slot), group[0].bit);
                }
            }
        }
    }
    out.class_tally = tally;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{simulate_pulses, EveConfig, LinkConfig};

    #[test]
    fn protocol_mismatch_is_rejected() {
        let link = LinkConfig::ideal(Protocol::Bb84, 0.5);
        let log = simulate_pulses(&link, 1000, &EveConfig::none(), 1).unwrap();
        assert!(matches!(sift(Protocol::Dps, &log), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn no_detections_gives_empty_pair() {
        let mut link = LinkConfig::ideal(Protocol::Bb84, 0.0);
        link.detector.dark_prob_per_gate = 0.0;
        let log = simulate_pulses(&link, 1000, &EveConfig::none(), 1).unwrap();
        let pair = sift(Protocol::Bb84, &log).unwrap();
        assert!(pair.is_empty());
    }

    #[test]
    fn dps_keeps_every_single_click() {
        let mut link = LinkConfig::ideal(Protocol::Dps, 0.2);
        link.channel.loss_db = 10.0;
        let log = simulate_pulses(&link, 200_000, &EveConfig::none(), 3).unwrap();
        let pair = sift(Protocol::Dps, &log).unwrap();
        assert_eq!(pair.len(), log.detections.len());
        assert_eq!(pair.alice_bits, pair.bob_bits);
    }

    #[test]
    fn dps_double_clicks_are_discarded() {
        let mut link = LinkConfig::ideal(Protocol::Dps, 1.0);
        link.detector.dark_prob_per_gate = 0.5;
        let log = simulate_pulses(&link, 20_000, &EveConfig::none(), 3).unwrap();
        let pair = sift(Protocol::Dps, &log).unwrap();
        let mut singles = 0;
        let mut k = 0;
        while k < log.detections.len() {
            let s = log.detections[k].slot;
            let n = log.detections[k..].iter().take_while(|d| d.slot == s).count();
            singles += usize::from(n == 1);
            k += n;
        }
        assert!(singles < log.detections.len());
        assert_eq!(pair.len(), singles);
    }
}
