//! Key-consuming applications: one-time-pad streams and stored key files.

mod keyfile;
mod otp;
mod session;

pub use keyfile::{
    export_key_file, key_file_endurance_s, voice_key_bytes, KeyFile, KeyFileBlock,
    DEFAULT_FILE_BLOCK_BYTES, KEY_FILE_MAGIC,
};
pub use otp::otp_apply;
pub use session::{
    run_session, Session, SessionMode, SessionState, SessionTelemetry, DEFAULT_SESSION_RATE_BPS,
};
