//! Per-link distillation: epoch-level QBER monitoring, block assembly,
//! reconciliation, confirmation and privacy amplification.

use serde::{Deserialize, Serialize};

use super::block::{Provenance, SecretKeyBlock};
use super::bounds::{decoy_secure_fraction, dps_secure_fraction_at, DecoyStats};
use super::cascade::{cascade_reconcile, CascadeParams};
use super::config::{DistillationConfig, EcMode, PostProcessing, SecureBound};
use super::ec_rate::{h2, pa_input_bits, select_ec_rate};
use super::pa::{privacy_amplify, PaInput};
use super::toeplitz::{toeplitz_hash, HashPath};
use crate::channel::SourceConfig;
use crate::error::{Error, Result};
use crate::protocols::{estimate_qber, QberEstimate, SiftedPair};
use crate::rng;

// Key events are consumed immediately, so boxing the blocks buys nothing.
#[allow(clippy::large_enum_variant)]
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum DistillEvent {
    /// Matching keys at both ends of the link.
    Key { alice: SecretKeyBlock, bob: SecretKeyBlock },
    /// Block dropped because its QBER is beyond the correctable range.
    Aborted { qber: f64, bits: usize },
    /// Reconciled strings still differed after error correction.
    ConfirmFailed { bits: usize },
    /// Reconciled key held back until enough has accumulated for PA.
    Deferred { have: usize, need: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochTelemetry {
    pub epoch: u64,
    /// Signal-class sifted bits before disclosure.
    pub sifted_bits: usize,
    pub estimate: Option<QberEstimate>,
    /// True when the epoch's monitored QBER was beyond the abort threshold
    /// and its bits were discarded.
    pub aborted: bool,
    pub secure_bits: usize,
    pub events: Vec<DistillEvent>,
}

#[derive(Debug, Clone, Copy, Default)]
struct ClassAcc {
    pulses: f64,
    detections: u64,
    sifted: u64,
    sifted_errors: u64,
}

#[derive(Debug, Default)]
struct Pending {
    alice: Vec<u8>,
    bob: Vec<u8>,
    leakage: usize,
    secure_bits: f64,
    weighted_qber: f64,
}

pub struct Distiller {
    link_id: String,
    post: PostProcessing,
    cfg: DistillationConfig,
    seed: u64,
    labels: Vec<String>,
    mean_photons: Vec<f64>,
    signal: usize,
    buf_alice: Vec<u8>,
    buf_bob: Vec<u8>,
    sample: usize,
    sample_errors: usize,
    acc: Vec<ClassAcc>,
    pending: Pending,
    epoch: u64,
    blocks: u64,
    next_id: u64,
    now_s: f64,
}

impl Distiller {
    pub fn new(
        link_id: &str,
        source: &SourceConfig,
        post: PostProcessing,
        cfg: DistillationConfig,
        seed: u64,
    ) -> Result<Self> {
        source.validate()?;
        cfg.validate()?;
        let labels: Vec<String> = source.classes.iter().map(|c| c.label.clone()).collect();
        let find = |l: &str| {
            source
                .class_index(l)
                .ok_or_else(|| Error::invalid(format!("unknown intensity class {l}")))
        };
        let signal = match &post.bound {
            SecureBound::Decoy { signal, decoy, vacuum } => {
                find(decoy)?;
                if let Some(v) = vacuum {
                    find(v)?;
                }
                find(signal)?
            }
            _ => 0,
        };
        Ok(Distiller {
            link_id: link_id.to_string(),
            mean_photons: source.classes.iter().map(|c| c.mean_photons).collect(),
            acc: vec![ClassAcc::default(); labels.len()],
            labels,
            post,
            cfg,
            seed,
            signal,
            buf_alice: Vec::new(),
            buf_bob: Vec::new(),
            sample: 0,
            sample_errors: 0,
            pending: Pending::default(),
            epoch: 0,
            blocks: 0,
            next_id: 0,
            now_s: 0.0,
        })
    }

    pub fn config(&self) -> &DistillationConfig {
        &self.cfg
    }

    /// Reduced bits assembled into one reconciliation block.
    pub fn block_bits(&self) -> usize {
        let disclosed = (self.cfg.disclose_fraction * self.cfg.sifted_block_bits as f64).ceil() as usize;
        self.cfg.sifted_block_bits - disclosed
    }

    pub fn buffered_bits(&self) -> usize {
        self.buf_alice.len()
    }

    /// Processes one epoch of sifted key ending at `now_s`.
    pub fn push_epoch(&mut self, pair: &SiftedPair, now_s: f64) -> Result<EpochTelemetry> {
        self.now_s = now_s;
        let epoch = self.epoch;
        self.epoch += 1;
        let mut tel = EpochTelemetry {
            epoch,
            sifted_bits: 0,
            estimate: None,
            aborted: false,
            secure_bits: 0,
            events: Vec::new(),
        };
        let mut signal = SiftedPair::empty(&pair.link_id);
        let mut epoch_acc = vec![ClassAcc::default(); self.labels.len()];
        for (c, t) in pair.class_tally.iter().enumerate().take(self.labels.len()) {
            epoch_acc[c].pulses += t.pulses;
            epoch_acc[c].detections += t.detections;
        }
        for i in 0..pair.len() {
            let c = pair.classes[i] as usize;
            let (a, b) = (pair.alice_bits[i], pair.bob_bits[i]);
            if c == self.signal {
                signal.alice_bits.push(a);
                signal.bob_bits.push(b);
                signal.classes.push(pair.classes[i]);
                signal.slots.push(pair.slots[i]);
            } else if c < epoch_acc.len() {
                // Decoy and vacuum bits are disclosed in full.
                epoch_acc[c].sifted += 1;
                epoch_acc[c].sifted_errors += u64::from(a != b);
            }
        }
        tel.sifted_bits = signal.len();
        if signal.is_empty() {
            self.merge(&epoch_acc, 0, 0);
            return Ok(tel);
        }
        signal.elapsed_s = now_s;
        let seed = rng::derive_n(rng::derive(self.seed, "disclose"), epoch);
        let (est, reduced) = estimate_qber(&signal, self.cfg.disclose_fraction, seed)?;
        tel.estimate = Some(est);
        if select_ec_rate(est.rate).is_err() {
            tel.aborted = true;
            tel.events.push(DistillEvent::Aborted { qber: est.rate, bits: signal.len() });
            return Ok(tel);
        }
        self.merge(&epoch_acc, est.sample_size, est.error_count);
        self.buf_alice.extend_from_slice(&reduced.alice_bits);
        self.buf_bob.extend_from_slice(&reduced.bob_bits);

        let block = self.block_bits();
        while self.buf_alice.len() >= block {
            let alice: Vec<u8> = self.buf_alice.drain(..block).collect();
            let bob: Vec<u8> = self.buf_bob.drain(..block).collect();
            let events = self.process_block(alice, bob)?;
            for e in &events {
                if let DistillEvent::Key { alice, .. } = e {
                    tel.secure_bits += alice.bit_length;
                }
            }
            tel.events.extend(events);
        }
        Ok(tel)
    }

    fn merge(&mut self, epoch_acc: &[ClassAcc], sample: usize, errors: usize) {
        for (a, e) in self.acc.iter_mut().zip(epoch_acc) {
            a.pulses += e.pulses;
            a.detections += e.detections;
            a.sifted += e.sifted;
            a.sifted_errors += e.sifted_errors;
        }
        self.sample += sample;
        self.sample_errors += errors;
    }

    fn process_block(&mut self, alice: Vec<u8>, bob: Vec<u8>) -> Result<Vec<DistillEvent>> {
        let idx = self.blocks;
        self.blocks += 1;
        let n = alice.len();
        let qber = if self.sample == 0 {
            0.0
        } else {
            self.sample_errors as f64 / self.sample as f64
        };
        let acc = std::mem::replace(&mut self.acc, vec![ClassAcc::default(); self.labels.len()]);
        self.sample = 0;
        self.sample_errors = 0;

        let rate = match select_ec_rate(qber) {
            Ok(r) => r,
            Err(Error::BlockAbort { qber }) => return Ok(vec![DistillEvent::Aborted { qber, bits: n }]),
            Err(e) => return Err(e),
        };
        let (corrected, mut leakage) = match self.post.ec_mode {
            EcMode::RateTable => (alice.clone(), n - pa_input_bits(rate, n)),
            EcMode::Cascade => {
                let params = CascadeParams {
                    passes: self.cfg.cascade_passes,
                    seed: rng::derive_n(rng::derive(self.seed, "cascade"), idx),
                };
                let out = cascade_reconcile(&alice, &bob, qber.max(1e-3), &params)?;
                (out.corrected, out.leakage_bits)
            }
        };
        let confirm_seed = rng::derive_n(rng::derive(self.seed, "confirm"), idx);
        let m = self.cfg.confirm_bits.min(n);
        let tag_a = toeplitz_hash(&alice, confirm_seed, m, HashPath::Naive)?;
        let tag_b = toeplitz_hash(&corrected, confirm_seed, m, HashPath::Naive)?;
        leakage += m;
        if tag_a != tag_b {
            return Ok(vec![DistillEvent::ConfirmFailed { bits: n }]);
        }
        let leak_fraction = (leakage as f64 / n as f64).min(1.0);
        let fraction = self.secure_fraction(qber, leak_fraction, &acc)?;

        self.pending.alice.extend_from_slice(&alice);
        self.pending.bob.extend_from_slice(&corrected);
        self.pending.leakage += leakage;
        self.pending.secure_bits += fraction * n as f64;
        self.pending.weighted_qber += qber * n as f64;
        let have = self.pending.alice.len();
        if have < self.cfg.min_pa_block_bits {
            return Ok(vec![DistillEvent::Deferred { have, need: self.cfg.min_pa_block_bits }]);
        }
        let pending = std::mem::take(&mut self.pending);
        let fraction = (pending.secure_bits / have as f64).clamp(0.0, 1.0);
        let pa_seed = rng::derive_n(rng::derive(self.seed, "pa"), idx);
        let key_a = privacy_amplify(
            &PaInput { bits: &pending.alice, leakage_bits: pending.leakage, secure_fraction: fraction },
            &self.cfg,
            pa_seed,
            HashPath::Ntt,
        )?;
        let key_b = if pending.bob == pending.alice {
            key_a.clone()
        } else {
            privacy_amplify(
                &PaInput { bits: &pending.bob, leakage_bits: pending.leakage, secure_fraction: fraction },
                &self.cfg,
                pa_seed,
                HashPath::Ntt,
            )?
        };
        let provenance = Provenance {
            qber: pending.weighted_qber / have as f64,
            input_bits: have,
            leakage_bits: pending.leakage,
            secure_fraction: fraction,
        };
        let id = self.next_id;
        self.next_id += 1;
        let alice = SecretKeyBlock::from_bits(id, &self.link_id, idx, self.now_s, &key_a, provenance.clone());
        let bob = SecretKeyBlock::from_bits(id, &self.link_id, idx, self.now_s, &key_b, provenance);
        Ok(vec![DistillEvent::Key { alice, bob }])
    }

    fn secure_fraction(&self, qber: f64, leak: f64, acc: &[ClassAcc]) -> Result<f64> {
        match &self.post.bound {
            SecureBound::Entanglement => Ok((1.0 - h2(qber) - leak).max(0.0)),
            SecureBound::Fixed { single_photon_share } => {
                Ok((single_photon_share * (1.0 - h2(qber)) - leak).max(0.0))
            }
            SecureBound::Dps { mean_photons } => dps_secure_fraction_at(*mean_photons, qber, leak),
            SecureBound::Decoy { decoy, vacuum, .. } => {
                let gain = |c: usize| {
                    if acc[c].pulses > 0.0 {
                        (acc[c].detections as f64 / acc[c].pulses).min(1.0)
                    } else {
                        0.0
                    }
                };
                let d = self.labels.iter().position(|l| l == decoy).expect("checked in new");
                if acc[d].sifted == 0 || acc[self.signal].pulses <= 0.0 {
                    return Ok(0.0);
                }
                let vacuum_gain = vacuum
                    .as_ref()
                    .map(|v| gain(self.labels.iter().position(|l| l == v).expect("checked in new")));
                let stats = DecoyStats {
                    mu: self.mean_photons[self.signal],
                    nu: self.mean_photons[d],
                    gain_mu: gain(self.signal),
                    gain_nu: gain(d),
                    error_mu: qber,
                    error_nu: acc[d].sifted_errors as f64 / acc[d].sifted as f64,
                    vacuum_gain,
                };
                decoy_secure_fraction(&stats, leak)
            }
        }
    }
}
