//! Sifting of raw detection logs into matched bit strings, and sampled
//! QBER estimation by public disclosure.

mod qber;
mod sift;

pub use qber::{estimate_qber, QberEstimate};
pub use sift::{sift, ClassTally, SiftedPair};
