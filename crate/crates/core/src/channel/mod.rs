//! Quantum-layer models: link configuration, the closed-form click model
//! and the Monte Carlo pulse simulator.

mod config;
mod model;
pub mod presets;
mod sim;

pub use config::{
    cps_to_gate_prob, ChannelConfig, DetectorConfig, EveConfig, EveMode, IntensityClass,
    LinkConfig, Protocol, SourceConfig,
};
pub use model::{
    click_model, click_model_with_eve, expected_sifted_qber, transmittance, ClassResponse,
    ClickModel,
};
pub use presets::Preset;
pub use sim::{simulate_pulses, AliceSlot, AliceTape, Detection, RawEventLog};
