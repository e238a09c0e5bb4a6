//! Toeplitz hashing over GF(2).
//!
//! An `m x n` Toeplitz matrix is described by `n + m - 1` diagonal bits:
//! `d[0..n)` is the first row and `d[n..n+m-1)` the first column below the
//! corner, so `T[i][0] = d[n + i - 1]` for `i >= 1`.

use rand::RngCore;

use super::ntt::{forward, inverse, MAX_NTT_LEN, NTT_PRIME};
use crate::bits::to_words;
use crate::error::{Error, Result};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum HashPath {
    /// Word-packed inner products, `O(m n / 64)`.
    Naive,
    /// Chunked NTT correlation.
    #[default]
    Ntt,
}

/// Expands `seed` into the `n + m - 1` diagonal bits (ChaCha8, LSB first).
pub fn expand_diagonal(seed: u64, n: usize, m: usize) -> Vec<u8> {
    let len = n + m - 1;
    let mut rng = rng::stream(seed, "toeplitz");
    let mut out = Vec::with_capacity(len);
    while out.len() < len {
        let w = rng.next_u64();
        for b in 0..64 {
            if out.len() == len {
                break;
            }
            out.push(((w >> b) & 1) as u8);
        }
    }
    out
}

/// Hashes `bits` (length `n`) to `m` output bits with the matrix seeded by
/// `seed`.
pub fn toeplitz_hash(bits: &[u8], seed: u64, m: usize, path: HashPath) -> Result<Vec<u8>> {
    if bits.is_empty() {
        return Err(Error::invalid("toeplitz input is empty"));
    }
    if m == 0 {
        return Ok(Vec::new());
    }
    let diag = expand_diagonal(seed, bits.len(), m);
    toeplitz_hash_with_diagonal(bits, &diag, m, path)
}

/// Hashes with an explicit diagonal of length `n + m - 1`.
pub fn toeplitz_hash_with_diagonal(
    bits: &[u8],
    diag: &[u8],
    m: usize,
    path: HashPath,
) -> Result<Vec<u8>> {
    let n = bits.len();
    if n == 0 {
        return Err(Error::invalid("toeplitz input is empty"));
    }
    if m == 0 {
        return Ok(Vec::new());
    }
    if m > n {
        return Err(Error::invalid(format!("output length {m} exceeds input {n}")));
    }
    if diag.len() != n + m - 1 {
        return Err(Error::invalid(format!(
            "diagonal has {} bits, expected {}",
            diag.len(),
            n + m - 1
        )));
    }
    if bits.iter().chain(diag).any(|&b| b > 1) {
        return Err(Error::invalid("toeplitz inputs must be 0/1"));
    }
    let f = full_diagonal(diag, n, m);
    // y_i = sum_j f[j + (m-1-i)] x_j; compute z_k = sum_j f[k + j] x_j and
    // read y_i = z_{m-1-i}.
    let z = match path {
        HashPath::Naive => correlate_naive(&f, bits, m),
        // Integer counts must stay below the modulus to survive reduction.
        HashPath::Ntt if (n as u64) < NTT_PRIME => correlate_ntt(&f, bits, m),
        HashPath::Ntt => correlate_naive(&f, bits, m),
    };
    Ok((0..m).map(|i| z[m - 1 - i]).collect())
}

/// Diagonal values indexed by `k = j - i + m - 1`.
fn full_diagonal(d: &[u8], n: usize, m: usize) -> Vec<u8> {
    (0..n + m - 1)
        .map(|k| {
            if k >= m - 1 {
                d[k - (m - 1)]
            } else {
                d[n + m - 2 - k]
            }
        })
        .collect()
}

fn correlate_naive(f: &[u8], x: &[u8], m: usize) -> Vec<u8> {
    let n = x.len();
    let xw = to_words(x);
    let fw = to_words(f);
    let words = xw.len();
    let tail_mask = if n.is_multiple_of(64) { u64::MAX } else { (1u64 << (n % 64)) - 1 };
    let mut out = Vec::with_capacity(m);
    for k in 0..m {
        let (base, shift) = (k / 64, k % 64);
        let mut acc = 0u64;
        for w in 0..words {
            let lo = fw[base + w] >> shift;
            let hi = if shift == 0 {
                0
            } else {
                fw.get(base + w + 1).map_or(0, |v| v << (64 - shift))
            };
            let mut win = lo | hi;
            if w == words - 1 {
                win &= tail_mask;
            }
            acc ^= win & xw[w];
        }
        out.push((acc.count_ones() & 1) as u8);
    }
    out
}

fn correlate_ntt(f: &[u8], x: &[u8], m: usize) -> Vec<u8> {
    let n = x.len();
    let r = m.min(MAX_NTT_LEN / 2);
    let len = (n + r - 1).next_power_of_two().min(MAX_NTT_LEN);
    let c = n.min(len - r + 1);
    // Reversed input chunks, transformed once and reused for every output
    // chunk.
    let x_chunks: Vec<(usize, usize, Vec<u32>)> = (0..n)
        .step_by(c)
        .map(|s| {
            let cl = c.min(n - s);
            let mut a = vec![0u32; len];
            for (t, &bit) in x[s..s + cl].iter().rev().enumerate() {
                a[t] = u32::from(bit);
            }
            forward(&mut a);
            (s, cl, a)
        })
        .collect();
    let mut z = Vec::with_capacity(m);
    for o in (0..m).step_by(r) {
        let rl = r.min(m - o);
        let mut acc = vec![0u64; len];
        for (s, cl, xa) in &x_chunks {
            // Align every chunk so its valid outputs land at index c-1+i.
            let shift = c - cl;
            let mut b = vec![0u32; len];
            for (t, &bit) in f[o + s..o + s + rl + cl - 1].iter().enumerate() {
                b[t + shift] = u32::from(bit);
            }
            forward(&mut b);
            for ((a, &u), &v) in acc.iter_mut().zip(xa).zip(&b) {
                *a = (*a + u64::from(u) * u64::from(v)) % NTT_PRIME;
            }
        }
        let mut acc: Vec<u32> = acc.into_iter().map(|v| v as u32).collect();
        inverse(&mut acc);
        z.extend(acc[c - 1..c - 1 + rl].iter().map(|&v| (v & 1) as u8));
    }
    z
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn dense(diag: &[u8], n: usize, m: usize) -> Vec<Vec<u8>> {
        (0..m)
            .map(|i| {
                (0..n)
                    .map(|j| if j >= i { diag[j - i] } else { diag[n + (i - j) - 1] })
                    .collect()
            })
            .collect()
    }

    fn matvec(t: &[Vec<u8>], x: &[u8]) -> Vec<u8> {
        t.iter()
            .map(|row| row.iter().zip(x).fold(0, |a, (r, v)| a ^ (r & v)))
            .collect()
    }

    fn random_bits(r: &mut ChaCha8Rng, n: usize) -> Vec<u8> {
        (0..n).map(|_| r.gen_range(0..2u8)).collect()
    }

    #[test]
    fn unit_diagonal_selects_prefix() {
        let n = 50;
        let m = 10;
        let mut d = vec![0u8; n + m - 1];
        d[0] = 1;
        let mut r = ChaCha8Rng::seed_from_u64(9);
        let x = random_bits(&mut r, n);
        for path in [HashPath::Naive, HashPath::Ntt] {
            let y = toeplitz_hash_with_diagonal(&x, &d, m, path).unwrap();
            assert_eq!(y, x[..m]);
        }
    }

    #[test]
    fn both_paths_match_dense_matrix() {
        let mut r = ChaCha8Rng::seed_from_u64(4);
        for &(n, m) in &[(1, 1), (7, 3), (64, 64), (130, 65), (1000, 333), (4097, 129)] {
            let x = random_bits(&mut r, n);
            let d = random_bits(&mut r, n + m - 1);
            let want = matvec(&dense(&d, n, m), &x);
            for path in [HashPath::Naive, HashPath::Ntt] {
                let got = toeplitz_hash_with_diagonal(&x, &d, m, path).unwrap();
                assert_eq!(got, want, "n={n} m={m} {path:?}");
            }
        }
    }

    #[test]
    fn seeded_hash_is_deterministic() {
        let x = vec![1u8; 500];
        let a = toeplitz_hash(&x, 17, 100, HashPath::Ntt).unwrap();
        let b = toeplitz_hash(&x, 17, 100, HashPath::Naive).unwrap();
        let c = toeplitz_hash(&x, 18, 100, HashPath::Ntt).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn rejects_bad_shapes() {
        let x = vec![0u8; 10];
        assert!(toeplitz_hash(&[], 1, 1, HashPath::Ntt).is_err());
        assert!(toeplitz_hash(&x, 1, 11, HashPath::Ntt).is_err());
        assert!(toeplitz_hash_with_diagonal(&x, &[0; 5], 3, HashPath::Ntt).is_err());
        assert!(toeplitz_hash(&x, 1, 0, HashPath::Ntt).unwrap().is_empty());
    }
}
