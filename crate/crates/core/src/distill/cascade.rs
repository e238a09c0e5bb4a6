//! Cascade reconciliation with batched parity rounds.
//!
//! Alice and Bob are kept separate: Bob's side only learns Alice's data
//! through `AliceOracle::answer`, one batch of parity queries per round,
//! and every answered parity is charged as leakage.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CascadeParams {
    pub passes: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RoundKind {
    /// Parities of every top-level block of a pass.
    TopParities,
    /// One bisection step on every open block.
    Bisect,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Round {
    pub pass: usize,
    pub kind: RoundKind,
    pub parities: Vec<u8>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transcript {
    pub rounds: Vec<Round>,
}

impl Transcript {
    pub fn parity_count(&self) -> usize {
        self.rounds.iter().map(|r| r.parities.len()).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CascadeOutcome {
    pub corrected: Vec<u8>,
    pub leakage_bits: usize,
    pub passes_run: usize,
    pub transcript: Transcript,
}

/// A parity request over positions `lo..hi` of a pass's permuted order.
#[derive(Debug, Clone, Copy)]
struct Query {
    pass: usize,
    lo: usize,
    hi: usize,
}

struct Layout {
    block: Vec<usize>,
    /// `order[p][pos]` is the key index at permuted position `pos`.
    order: Vec<Vec<u32>>,
    /// `where_[p][idx]` is the permuted position of key index `idx`.
    where_: Vec<Vec<u32>>,
}

impl Layout {
    fn new(n: usize, k1: usize, passes: usize, seed: u64) -> Self {
        let mut block = Vec::new();
        let mut order = Vec::new();
        let mut where_ = Vec::new();
        for p in 0..passes {
            block.push((k1 << p.min(40)).min(n));
            let mut perm: Vec<u32> = (0..n as u32).collect();
            if p > 0 {
                perm.shuffle(&mut rng::stream(rng::derive_n(seed, p as u64), "cascade-perm"));
            }
            let mut inv = vec![0u32; n];
            for (pos, &idx) in perm.iter().enumerate() {
                inv[idx as usize] = pos as u32;
            }
            order.push(perm);
            where_.push(inv);
        }
        Layout { block, order, where_ }
    }

    fn parity(&self, bits: &[u8], q: Query) -> u8 {
        self.order[q.pass][q.lo..q.hi]
            .iter()
            .fold(0, |acc, &i| acc ^ bits[i as usize])
    }

    fn blocks(&self, n: usize, pass: usize) -> usize {
        n.div_ceil(self.block[pass])
    }

    fn block_range(&self, n: usize, pass: usize, b: usize) -> (usize, usize) {
        let k = self.block[pass];
        (b * k, ((b + 1) * k).min(n))
    }
}

struct AliceOracle<'a> {
    bits: &'a [u8],
    layout: &'a Layout,
}

impl AliceOracle<'_> {
    fn answer(&self, batch: &[Query]) -> Vec<u8> {
        batch.iter().map(|&q| self.layout.parity(self.bits, q)).collect()
    }
}

struct OpenBlock {
    pass: usize,
    block: usize,
    lo: usize,
    hi: usize,
    alice_parity: u8,
}

/// Reconciles `bob` towards `alice`. The first block size is
/// `ceil(0.73 / qber_est)`, doubling every pass. When the first pass finds
/// no odd block the remaining passes are skipped.
pub fn cascade_reconcile(
    alice: &[u8],
    bob: &[u8],
    qber_est: f64,
    params: &CascadeParams,
) -> Result<CascadeOutcome> {
    let n = alice.len();
    if n != bob.len() {
        return Err(Error::invalid("alice and bob blocks differ in length"));
    }
    if n == 0 {
        return Err(Error::invalid("empty block"));
    }
    if !(qber_est > 0.0 && qber_est < 0.5) {
        return Err(Error::invalid(format!("qber estimate {qber_est} outside (0, 0.5)")));
    }
    if params.passes == 0 {
        return Err(Error::invalid("cascade needs at least one pass"));
    }
    let k1 = ((0.73 / qber_est).ceil() as usize).clamp(1, n);
    let layout = Layout::new(n, k1, params.passes, params.seed);
    let oracle = AliceOracle { bits: alice, layout: &layout };
    let mut bits = bob.to_vec();
    let mut transcript = Transcript::default();

    let mut top_parity: Vec<Vec<u8>> = Vec::new();
    let mut odd: Vec<Vec<bool>> = Vec::new();
    let mut in_flight: Vec<Vec<bool>> = Vec::new();
    let mut passes_run = 0;

    for pass in 0..params.passes {
        passes_run += 1;
        let nb = layout.blocks(n, pass);
        let queries: Vec<Query> = (0..nb)
            .map(|b| {
                let (lo, hi) = layout.block_range(n, pass, b);
                Query { pass, lo, hi }
            })
            .collect();
        let answers = oracle.answer(&queries);
        let flags: Vec<bool> = queries
            .iter()
            .zip(&answers)
            .map(|(&q, &a)| layout.parity(&bits, q) != a)
            .collect();
        transcript.rounds.push(Round { pass, kind: RoundKind::TopParities, parities: answers.clone() });
        let any_odd = flags.iter().any(|&f| f);
        top_parity.push(answers);
        odd.push(flags);
        in_flight.push(vec![false; nb]);
        if pass == 0 && !any_odd {
            break;
        }

        let mut pending: Vec<(usize, usize)> = (0..nb).filter(|&b| odd[pass][b]).map(|b| (pass, b)).collect();
        let mut open: Vec<OpenBlock> = Vec::new();
        while !pending.is_empty() || !open.is_empty() {
            for (p, b) in pending.drain(..) {
                if odd[p][b] && !in_flight[p][b] {
                    in_flight[p][b] = true;
                    let (lo, hi) = layout.block_range(n, p, b);
                    open.push(OpenBlock { pass: p, block: b, lo, hi, alice_parity: top_parity[p][b] });
                }
            }
            // Settle ranges that are down to one bit or no longer disagree.
            let mut still_open = Vec::with_capacity(open.len());
            for ob in open.drain(..) {
                let q = Query { pass: ob.pass, lo: ob.lo, hi: ob.hi };
                let differs = layout.parity(&bits, q) != ob.alice_parity;
                if differs && ob.hi - ob.lo == 1 {
                    let idx = layout.order[ob.pass][ob.lo] as usize;
                    bits[idx] ^= 1;
                    for (p, flags) in odd.iter_mut().enumerate() {
                        let b = layout.where_[p][idx] as usize / layout.block[p];
                        flags[b] = !flags[b];
                        if flags[b] && p != ob.pass {
                            pending.push((p, b));
                        }
                    }
                }
                if differs && ob.hi - ob.lo > 1 {
                    still_open.push(ob);
                } else {
                    in_flight[ob.pass][ob.block] = false;
                    if odd[ob.pass][ob.block] {
                        pending.push((ob.pass, ob.block));
                    }
                }
            }
            open = still_open;
            if open.is_empty() {
                continue;
            }
            let queries: Vec<Query> = open
                .iter()
                .map(|ob| Query { pass: ob.pass, lo: ob.lo, hi: ob.lo + (ob.hi - ob.lo) / 2 })
                .collect();
            let answers = oracle.answer(&queries);
            for ((ob, q), &a) in open.iter_mut().zip(&queries).zip(&answers) {
                if layout.parity(&bits, *q) != a {
                    ob.hi = q.hi;
                    ob.alice_parity = a;
                } else {
                    ob.lo = q.hi;
                    ob.alice_parity ^= a;
                }
            }
            transcript.rounds.push(Round { pass, kind: RoundKind::Bisect, parities: answers });
        }
    }

    Ok(CascadeOutcome {
        corrected: bits,
        leakage_bits: transcript.parity_count(),
        passes_run,
        transcript,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distill::binary_entropy;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn planted(n: usize, flips: &[usize], seed: u64) -> (Vec<u8>, Vec<u8>) {
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        let alice: Vec<u8> = (0..n).map(|_| r.gen_range(0..2)).collect();
        let mut bob = alice.clone();
        for &f in flips {
            bob[f] ^= 1;
        }
        (alice, bob)
    }

    #[test]
    fn single_error_costs_top_parities_plus_bisection() {
        // k1 = ceil(0.73 / 0.000713) = 1024: one block, one error, ten halvings.
        let (a, b) = planted(1024, &[700], 1);
        let params = CascadeParams { passes: 1, seed: 5 };
        let out = cascade_reconcile(&a, &b, 0.73 / 1024.0, &params).unwrap();
        assert_eq!(out.corrected, a);
        assert_eq!(out.leakage_bits, 1 + 10);
    }

    #[test]
    fn clean_first_pass_skips_the_rest() {
        let (a, b) = planted(10_000, &[], 2);
        let params = CascadeParams { passes: 4, seed: 5 };
        let out = cascade_reconcile(&a, &b, 0.02, &params).unwrap();
        assert_eq!(out.passes_run, 1);
        assert_eq!(out.leakage_bits, 10_000usize.div_ceil(37));
        assert_eq!(out.corrected, a);
    }

    #[test]
    fn corrects_random_errors_near_shannon() {
        let n = 20_000;
        let mut r = ChaCha8Rng::seed_from_u64(3);
        let flips: Vec<usize> = (0..n).filter(|_| r.gen_bool(0.03)).collect();
        let (a, b) = planted(n, &flips, 4);
        let out = cascade_reconcile(&a, &b, 0.03, &CascadeParams { passes: 4, seed: 9 }).unwrap();
        assert_eq!(out.corrected, a);
        let bound = 1.35 * n as f64 * binary_entropy(0.03).unwrap();
        assert!((out.leakage_bits as f64) < bound, "{} vs {bound}", out.leakage_bits);
    }

    #[test]
    fn rejects_bad_inputs() {
        let p = CascadeParams { passes: 4, seed: 0 };
        assert!(cascade_reconcile(&[0, 1], &[0], 0.1, &p).is_err());
        assert!(cascade_reconcile(&[], &[], 0.1, &p).is_err());
        assert!(cascade_reconcile(&[0], &[0], 0.0, &p).is_err());
        assert!(cascade_reconcile(&[0], &[0], 0.1, &CascadeParams { passes: 0, seed: 0 }).is_err());
    }
}
