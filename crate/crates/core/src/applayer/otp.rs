use crate::error::{Error, Result};

/// Byte-wise XOR of `data` with an equally long pad. Applying it twice with
/// the same pad returns the input.
pub fn otp_apply(data: &[u8], pad: &[u8]) -> Result<Vec<u8>> {
    if data.len() != pad.len() {
        return Err(Error::invalid(format!(
            "pad length {} does not match data length {}",
            pad.len(),
            data.len()
        )));
    }
    Ok(data.iter().zip(pad).map(|(d, p)| d ^ p).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn complement_vector() {
        let data: Vec<u8> = (0..16).collect();
        let out = otp_apply(&data, &[0xFF; 16]).unwrap();
        let want: Vec<u8> = (0..16).map(|b: u8| 0xFF - b).collect();
        assert_eq!(out, want);
        assert_eq!(out[0], 0xFF);
        assert_eq!(out[15], 0xF0);
    }

    #[test]
    fn involution_and_zero_pad() {
        let d = b"attack at dawn".to_vec();
        let p = b"0123456789abcd".to_vec();
        assert_eq!(otp_apply(&otp_apply(&d, &p).unwrap(), &p).unwrap(), d);
        // A zero pad leaves the plaintext exposed.
        assert_eq!(otp_apply(&d, &vec![0; d.len()]).unwrap(), d);
    }

    #[test]
    fn length_mismatch() {
        assert!(matches!(otp_apply(&[1, 2], &[1]), Err(Error::InvalidArgument(_))));
    }
}
