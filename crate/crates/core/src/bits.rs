//! Bit-string helpers. Working bit strings are `Vec<u8>` holding 0/1 per
//! element; stored key material is packed MSB-first into bytes.

pub fn pack(bits: &[u8]) -> Vec<u8> {
    let mut out = vec![0u8; bits.len().div_ceil(8)];
    for (i, &b) in bits.iter().enumerate() {
        if b & 1 == 1 {
            out[i / 8] |= 0x80 >> (i % 8);
        }
    }
    out
}

pub fn unpack(bytes: &[u8], bit_len: usize) -> Vec<u8> {
    (0..bit_len)
        .map(|i| (bytes[i / 8] >> (7 - i % 8)) & 1)
        .collect()
}

pub fn hamming(a: &[u8], b: &[u8]) -> usize {
    a.iter().zip(b).filter(|(x, y)| x != y).count()
}

pub fn parity(bits: &[u8]) -> u8 {
    bits.iter().fold(0, |acc, b| acc ^ b)
}

/// Pack 0/1 bits into u64 words, LSB-first within each word.
pub fn to_words(bits: &[u8]) -> Vec<u64> {
    let mut words = vec![0u64; bits.len().div_ceil(64)];
    for (i, &b) in bits.iter().enumerate() {
        words[i / 64] |= u64::from(b & 1) << (i % 64);
    }
    words
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pack_is_msb_first() {
        assert_eq!(pack(&[1, 0, 0, 0, 0, 0, 0, 1, 1]), vec![0x81, 0x80]);
        assert_eq!(unpack(&[0x81, 0x80], 9), vec![1, 0, 0, 0, 0, 0, 0, 1, 1]);
    }

    #[test]
    fn words_are_lsb_first() {
        let mut bits = vec![0u8; 70];
        bits[0] = 1;
        bits[65] = 1;
        assert_eq!(to_words(&bits), vec![1, 2]);
    }
}
