//! Number-theoretic transform over the prime field `p = 13 * 2^20 + 1`.
//!
//! `p - 1 = 2^20 * 13`, so power-of-two transforms up to length `2^20`
//! exist. Values are kept in `u32`; products fit in `u64`.

use std::sync::OnceLock;

use crate::error::{Error, Result};

pub const NTT_PRIME: u64 = 13 * (1 << 20) + 1;
pub const MAX_NTT_LEN: usize = 1 << 20;
/// Primitive root of the multiplicative group mod `NTT_PRIME`.
pub const GENERATOR: u64 = 15;

pub fn pow_mod(mut base: u64, mut exp: u64) -> u64 {
    let mut acc = 1u64;
    base %= NTT_PRIME;
    while exp > 0 {
        if exp & 1 == 1 {
            acc = acc * base % NTT_PRIME;
        }
        base = base * base % NTT_PRIME;
        exp >>= 1;
    }
    acc
}

fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    let mut d = 2;
    while d * d <= n {
        if n.is_multiple_of(d) {
            return false;
        }
        d += 1;
    }
    true
}

/// Checks the field parameters: `p` is prime, `2^20` divides `p - 1`, and
/// `GENERATOR` has full order. Panics otherwise; run once on first use.
pub fn assert_field() {
    assert_eq!(NTT_PRIME, 13_631_489);
    assert!(is_prime(NTT_PRIME), "ntt modulus is not prime");
    assert_eq!((NTT_PRIME - 1) % MAX_NTT_LEN as u64, 0, "2^20 does not divide p-1");
    for q in [2, 13] {
        assert_ne!(pow_mod(GENERATOR, (NTT_PRIME - 1) / q), 1, "generator order");
    }
}

struct Tables {
    /// `w^k` for `k < MAX_NTT_LEN / 2`, `w` a primitive `2^20`-th root.
    roots: Vec<u32>,
    inv_roots: Vec<u32>,
}

fn tables() -> &'static Tables {
    static TABLES: OnceLock<Tables> = OnceLock::new();
    TABLES.get_or_init(|| {
        assert_field();
        let w = pow_mod(GENERATOR, (NTT_PRIME - 1) / MAX_NTT_LEN as u64);
        let w_inv = pow_mod(w, NTT_PRIME - 2);
        let half = MAX_NTT_LEN / 2;
        let mut roots = Vec::with_capacity(half);
        let mut inv_roots = Vec::with_capacity(half);
        let (mut a, mut b) = (1u64, 1u64);
        for _ in 0..half {
            roots.push(a as u32);
            inv_roots.push(b as u32);
            a = a * w % NTT_PRIME;
            b = b * w_inv % NTT_PRIME;
        }
        Tables { roots, inv_roots }
    })
}

fn transform(a: &mut [u32], roots: &[u32]) {
    let n = a.len();
    assert!(n.is_power_of_two() && n <= MAX_NTT_LEN, "bad ntt length {n}");
    let p = NTT_PRIME;
    let mut j = 0;
    for i in 1..n {
        let mut bit = n >> 1;
        while j & bit != 0 {
            j ^= bit;
            bit >>= 1;
        }
        j |= bit;
        if i < j {
            a.swap(i, j);
        }
    }
    let mut len = 2;
    while len <= n {
        let half = len / 2;
        let stride = MAX_NTT_LEN / len;
        for chunk in a.chunks_exact_mut(len) {
            let (lo, hi) = chunk.split_at_mut(half);
            for k in 0..half {
                let w = u64::from(roots[k * stride]);
                let u = u64::from(lo[k]);
                let v = u64::from(hi[k]) * w % p;
                lo[k] = ((u + v) % p) as u32;
                hi[k] = ((u + p - v) % p) as u32;
            }
        }
        len <<= 1;
    }
}

/// In-place forward transform; `a.len()` must be a power of two `<= 2^20`.
pub fn forward(a: &mut [u32]) {
    transform(a, &tables().roots);
}

/// In-place inverse transform, including the `1/n` scaling.
pub fn inverse(a: &mut [u32]) {
    transform(a, &tables().inv_roots);
    let n_inv = pow_mod(a.len() as u64, NTT_PRIME - 2);
    for x in a.iter_mut() {
        *x = (u64::from(*x) * n_inv % NTT_PRIME) as u32;
    }
}

/// Linear convolution of `a` and `b` modulo `p`, through a zero-padded
/// cyclic transform.
pub fn ntt_convolve(a: &[u32], b: &[u32]) -> Result<Vec<u32>> {
    if a.is_empty() || b.is_empty() {
        return Ok(Vec::new());
    }
    let out_len = a.len() + b.len() - 1;
    if out_len > MAX_NTT_LEN {
        return Err(Error::invalid(format!(
            "convolution length {out_len} exceeds 2^20"
        )));
    }
    if a.iter().chain(b).any(|&x| u64::from(x) >= NTT_PRIME) {
        return Err(Error::invalid("convolution input not reduced mod p"));
    }
    let n = out_len.next_power_of_two();
    let mut fa = a.to_vec();
    fa.resize(n, 0);
    let mut fb = b.to_vec();
    fb.resize(n, 0);
    forward(&mut fa);
    forward(&mut fb);
    for (x, y) in fa.iter_mut().zip(&fb) {
        *x = (u64::from(*x) * u64::from(*y) % NTT_PRIME) as u32;
    }
    inverse(&mut fa);
    fa.truncate(out_len);
    Ok(fa)
}
