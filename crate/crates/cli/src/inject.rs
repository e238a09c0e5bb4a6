use std::path::PathBuf;

use anyhow::{bail, Result};
use clap::{Args, ValueEnum};
use qkdnet_core::harness::{EventKind, ScenarioConfig, ScenarioEvent};

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    AttackOn,
    AttackOff,
    LinkDown,
    LinkUp,
    ClearAlarm,
}

#[derive(Args)]
pub struct InjectArgs {
    /// Scenario file to edit. Created empty if it does not exist.
    #[arg(long)]
    scenario: PathBuf,
    #[arg(long)]
    link: String,
    #[arg(long, value_enum)]
    kind: Kind,
    /// Simulated time of the event, seconds.
    #[arg(long)]
    at: f64,
    /// Fraction of photons tapped, for attack_on.
    #[arg(long, default_value_t = 0.5)]
    tap_fraction: f64,
}

pub fn inject(a: InjectArgs) -> Result<()> {
    if !(a.at >= 0.0) {
        bail!("--at must be a non-negative time");
    }
    let mut scenario = if a.scenario.exists() {
        ScenarioConfig::load(&a.scenario)?
    } else {
        let name = a.scenario.file_stem().and_then(|s| s.to_str()).unwrap_or("scenario");
        ScenarioConfig::empty(name)
    };
    let link = a.link.clone();
    let kind = match a.kind {
        Kind::AttackOn => EventKind::AttackOn {
            link,
            mode: qkdnet_core::channel::EveMode::TapInject,
            tap_fraction: a.tap_fraction,
            inject_click_rate: None,
        },
        Kind::AttackOff => EventKind::AttackOff { link },
        Kind::LinkDown => EventKind::LinkDown { link },
        Kind::LinkUp => EventKind::LinkUp { link },
        Kind::ClearAlarm => EventKind::ClearAlarm { link },
    };
    scenario.insert(ScenarioEvent { t_s: a.at, kind });
    scenario.validate()?;
    std::fs::write(&a.scenario, serde_json::to_string_pretty(&scenario)? + "\n")?;
    println!("{}: {} events", a.scenario.display(), scenario.events.len());
    Ok(())
}
