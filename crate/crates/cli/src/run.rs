use std::path::PathBuf;

use anyhow::Result;
use clap::Args;
use qkdnet_core::harness::run_scenario;

#[derive(Args)]
pub struct RunArgs {
    /// Topology JSON file or built-in name.
    #[arg(long, default_value = "tokyo")]
    topology: String,
    /// Scenario JSON file or built-in name.
    #[arg(long, default_value = "attack_replay")]
    scenario: String,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Simulated seconds; overrides the scenario's duration.
    #[arg(long)]
    duration: Option<f64>,
    #[arg(long, default_value_os_t = crate::default_out())]
    out: PathBuf,
}

pub fn run(a: RunArgs) -> Result<()> {
    let topology = crate::load_topology(&a.topology)?;
    let scenario = crate::load_scenario(&a.scenario)?;
    let out = run_scenario(&topology, &scenario, a.seed, a.duration)?;
    out.write_to(&a.out)?;
    let s = &out.summary;
    println!(
        "{}: {} s simulated, {} ticks, seed {}",
        s.scenario, s.duration_s, s.ticks, s.seed
    );
    println!("alarms {}, route switches {}, relays {}", s.alarms.len(), s.route_switches.len(), s.relay.relays);
    println!("audit {}", if s.checks.all_pass() { "pass" } else { "FAIL" });
    for f in &s.checks.failures {
        println!("  {f}");
    }
    println!("wrote {}", a.out.display());
    if !s.checks.all_pass() {
        anyhow::bail!("key hygiene audit failed");
    }
    Ok(())
}
