use rand::RngCore;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::{cps_to_gate_prob, EveConfig, EveMode, LinkConfig, Protocol};
use super::model::{signal_error, transmittance};
use crate::error::Result;
use crate::rng::{self, splitmix64, unit_f64};

/// Transmitter choices for one slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AliceSlot {
    pub class: u8,
    /// Bit value (BB84/BBM92), state sign (SARG04) or pulse phase (DPS).
    pub bit: u8,
    /// Preparation/measurement basis. Unused by DPS.
    pub basis: u8,
    /// SARG04: sign of the opposite-basis state in the announced pair.
    pub aux: u8,
}

/// Alice's complete per-slot record. Choices are a counter-based function
/// of `(seed, slot)`, so the record covers every slot in O(1) memory and a
/// lookup is a pure function.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AliceTape {
    pub seed: u64,
    pub n_slots: u64,
    /// Cumulative send probabilities of the intensity classes.
    pub class_cdf: Vec<f64>,
}

impl AliceTape {
    pub fn new(seed: u64, n_slots: u64, send_probs: &[f64]) -> Self {
        let mut acc = 0.0;
        let mut class_cdf: Vec<f64> = send_probs
            .iter()
            .map(|p| {
                acc += p;
                acc
            })
            .collect();
        if let Some(last) = class_cdf.last_mut() {
            *last = 1.0;
        }
        AliceTape {
            seed,
            n_slots,
            class_cdf,
        }
    }

    pub fn slot(&self, index: u64) -> AliceSlot {
        let w = rng::derive_n(self.seed, index);
        let u = unit_f64(splitmix64(w));
        let class = self.class_cdf.iter().position(|&c| u < c).unwrap_or(0) as u8;
        AliceSlot {
            class,
            bit: (w & 1) as u8,
            basis: ((w >> 1) & 1) as u8,
            aux: ((w >> 2) & 1) as u8,
        }
    }

    /// DPS key bit: phase difference between this pulse and the previous
    /// one. Slot 0 is referenced to phase 0.
    pub fn dps_bit(&self, index: u64) -> u8 {
        let prev = if index == 0 { 0 } else { self.slot(index - 1).bit };
        self.slot(index).bit ^ prev
    }

    pub fn len(&self) -> u64 {
        self.n_slots
    }

    pub fn is_empty(&self) -> bool {
        self.n_slots == 0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Detection {
    pub slot: u64,
    pub detector: u8,
    pub bit: u8,
    pub basis: u8,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawEventLog {
    pub protocol: Protocol,
    pub clock_hz: f64,
    pub elapsed_s: f64,
    pub num_detectors: u32,
    pub alice: AliceTape,
    /// Sorted by slot; a double click produces two entries for one slot.
    pub detections: Vec<Detection>,
}

impl RawEventLog {
    pub fn n_slots(&self) -> u64 {
        self.alice.n_slots
    }

    /// Expected pulse count per intensity class, `n * send_prob`.
    pub fn expected_class_pulses(&self) -> Vec<f64> {
        let n = self.alice.n_slots as f64;
        let mut prev = 0.0;
        self.alice
            .class_cdf
            .iter()
            .map(|&c| {
                let p = c - prev;
                prev = c;
                n * p
            })
            .collect()
    }
}

struct Draw<'a>(&'a mut ChaCha8Rng);

impl Draw<'_> {
    fn unit(&mut self) -> f64 {
        unit_f64(self.0.next_u64())
    }
    fn bit(&mut self) -> u8 {
        (self.0.next_u64() >> 63) as u8
    }
    fn bern(&mut self, p: f64) -> bool {
        p > 0.0 && self.unit() < p
    }
}

/// Monte Carlo realisation of `n_pulses` slots on `link`.
///
/// Slots without a click are skipped with geometric gaps drawn against the
/// largest per-slot click probability; each candidate slot is accepted with
/// the ratio of its own click probability to that envelope. The gate after
/// each detection is evaluated explicitly with its afterpulse probability.
/// Cost is proportional to the number of candidate clicks, not pulses.
pub fn simulate_pulses(
    link: &LinkConfig,
    n_pulses: u64,
    eve: &EveConfig,
    seed: u64,
) -> Result<RawEventLog> {
    link.validate()?;
    eve.validate()?;
    let det = &link.detector;
    let eta = transmittance(link.channel.loss_db + det.insertion_loss_db)? * det.efficiency;
    let send: Vec<f64> = link.source.classes.iter().map(|c| c.send_prob).collect();
    let tape = AliceTape::new(rng::derive(seed, "alice"), n_pulses, &send);

    let p_dark = 1.0 - (1.0 - det.dark_prob_per_gate).powi(det.num_detectors as i32);
    let p_bg = cps_to_gate_prob(link.channel.background_cps, link.clock_hz, link.duty_factor);
    let p_base = 1.0 - (1.0 - p_dark) * (1.0 - p_bg);
    let (p_base_eve, mu_scale_eve) = match eve.mode {
        EveMode::TapInject => {
            let p_inj = cps_to_gate_prob(eve.inject_click_rate, link.clock_hz, link.duty_factor);
            (1.0 - (1.0 - p_base) * (1.0 - p_inj), 1.0 - eve.tap_fraction)
        }
        _ => (p_base, 1.0),
    };
    let sig_no_eve: Vec<f64> = link
        .source
        .classes
        .iter()
        .map(|c| 1.0 - (-c.mean_photons * eta).exp())
        .collect();
    let sig_eve: Vec<f64> = link
        .source
        .classes
        .iter()
        .map(|c| 1.0 - (-c.mean_photons * mu_scale_eve * eta).exp())
        .collect();
    let click = |p_s: f64, p_n: f64| 1.0 - (1.0 - p_s) * (1.0 - p_n);
    let mut envelope = sig_no_eve
        .iter()
        .map(|&s| click(s, p_base))
        .fold(0.0, f64::max);
    if eve.mode != EveMode::None {
        envelope = sig_eve
            .iter()
            .map(|&s| click(s, p_base_eve))
            .fold(envelope, f64::max);
    }

    let e_sig = signal_error(link, false);
    let squash = if link.protocol == Protocol::Bbm92 {
        link.double_pair_prob / 2.0
    } else {
        0.0
    };
    let afterpulse = det.afterpulse_prob;
    let ndet = det.num_detectors.min(255) as u8;

    let mut bob_rng = rng::stream(seed, "bob");
    let mut eve_rng = rng::stream(seed, "eve");
    let mut r = Draw(&mut bob_rng);
    let mut er = Draw(&mut eve_rng);
    let ln_miss = (1.0 - envelope).ln();

    let mut detections = Vec::new();
    let mut next: u64 = 0;
    let mut armed: Option<u64> = None;
    while next < n_pulses {
        let forced = armed == Some(next);
        armed = None;
        let slot = if forced {
            next
        } else {
            if envelope <= 0.0 {
                break;
            }
            let gap = if envelope >= 1.0 {
                0.0
            } else {
                ((1.0 - r.unit()).ln() / ln_miss).floor()
            };
            if gap >= (n_pulses - next) as f64 {
                break;
            }
            next + gap as u64
        };
        next = slot + 1;

        let a = tape.slot(slot);
        let t = slot as f64 / link.clock_hz;
        let eve_on = eve.active_at(t);
        let cls = a.class as usize;
        let (p_s, mut p_n) = if eve_on {
            (sig_eve[cls], p_base_eve)
        } else {
            (sig_no_eve[cls], p_base)
        };
        if forced {
            p_n = 1.0 - (1.0 - p_n) * (1.0 - afterpulse);
        }
        let q = click(p_s, p_n);
        let accept = if forced { q } else { q / envelope };
        if !r.bern(accept) {
            continue;
        }

        // Composition of the click, conditioned on at least one click.
        let u = r.unit() * q;
        let signal_only = p_s * (1.0 - p_n);
        let noise_only = p_n * (1.0 - p_s);
        let (signal, noise) = if u < signal_only {
            (true, false)
        } else if u < signal_only + noise_only {
            (false, true)
        } else {
            (true, true)
        };

        let bob_basis = r.bit();
        if noise {
            let bit = r.bit();
            if signal && r.bit() == 1 {
                // Noise and signal on different detectors: double click.
                for b in [0u8, 1] {
                    detections.push(Detection {
                        slot,
                        detector: detector_index(bob_basis, b, ndet),
                        bit: b,
                        basis: bob_basis,
                    });
                }
            } else {
                detections.push(Detection {
                    slot,
                    detector: detector_index(bob_basis, bit, ndet),
                    bit,
                    basis: bob_basis,
                });
            }
        } else {
            let intercept = eve_on && eve.mode == EveMode::InterceptResend;
            let bit = match link.protocol {
                Protocol::Dps => {
                    if intercept && er.bit() == 1 {
                        r.bit()
                    } else {
                        tape.dps_bit(slot) ^ u8::from(r.bern(e_sig))
                    }
                }
                Protocol::Bb84 | Protocol::Sarg04 | Protocol::Bbm92 => {
                    let (basis, value) = if intercept {
                        let eb = er.bit();
                        let ev = if eb == a.basis { a.bit } else { er.bit() };
                        (eb, ev)
                    } else {
                        (a.basis, a.bit)
                    };
                    if bob_basis != basis || r.bern(squash) {
                        r.bit()
                    } else {
                        value ^ u8::from(r.bern(link.misalignment))
                    }
                }
            };
            detections.push(Detection {
                slot,
                detector: detector_index(bob_basis, bit, ndet),
                bit,
                basis: if link.protocol == Protocol::Dps { 0 } else { bob_basis },
            });
        }
        if afterpulse > 0.0 {
            armed = Some(slot + 1);
        }
    }

    Ok(RawEventLog {
        protocol: link.protocol,
        clock_hz: link.clock_hz,
        elapsed_s: n_pulses as f64 / link.clock_hz,
        num_detectors: det.num_detectors,
        alice: tape,
        detections,
    })
}

fn detector_index(basis: u8, bit: u8, ndet: u8) -> u8 {
    (basis * 2 + bit) % ndet.max(1)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_log() {
        let mut link = LinkConfig::ideal(Protocol::Bb84, 0.5);
        link.channel.loss_db = 10.0;
        link.detector.dark_prob_per_gate = 1e-4;
        link.detector.afterpulse_prob = 0.05;
        let a = simulate_pulses(&link, 200_000, &EveConfig::none(), 7).unwrap();
        let b = simulate_pulses(&link, 200_000, &EveConfig::none(), 7).unwrap();
        assert_eq!(a, b);
        let c = simulate_pulses(&link, 200_000, &EveConfig::none(), 8).unwrap();
        assert_ne!(a.detections, c.detections);
    }

    #[test]
    fn log_invariants_hold() {
        let mut link = LinkConfig::ideal(Protocol::Bbm92, 1.0);
        link.detector.dark_prob_per_gate = 0.01;
        link.double_pair_prob = 0.1;
        let log = simulate_pulses(&link, 50_000, &EveConfig::none(), 1).unwrap();
        assert!(log.detections.windows(2).all(|w| w[0].slot <= w[1].slot));
        assert!(log.detections.iter().all(|d| d.slot < log.n_slots()));
        assert!(log.detections.len() as u64 <= log.n_slots() * u64::from(log.num_detectors));
    }

    #[test]
    fn tape_is_pure() {
        let tape = AliceTape::new(3, 100, &[0.5, 0.5]);
        assert_eq!(tape.slot(42), tape.slot(42));
        let ones = (0..10_000).filter(|&i| tape.slot(i).class == 1).count();
        assert!((4_700..5_300).contains(&ones));
    }
}
