use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::Args;
use qkdnet_core::harness::RunSummary;
use serde_json::Value;

#[derive(Args)]
pub struct StatusArgs {
    /// Output directory of a finished `run`.
    #[arg(long, default_value_os_t = crate::default_out(), conflicts_with = "server")]
    out: PathBuf,
    /// Base URL of a running `serve`, e.g. http://127.0.0.1:8080.
    #[arg(long)]
    server: Option<String>,
}

pub fn status(a: StatusArgs) -> Result<()> {
    match &a.server {
        Some(url) => live(url),
        None => finished(&a.out),
    }
}

fn opt(v: &Value, digits: usize) -> String {
    v.as_f64().map_or_else(|| "-".to_string(), |x| format!("{x:.digits$}"))
}

fn live(url: &str) -> Result<()> {
    let state: Value = ureq::get(&format!("{}/state", url.trim_end_matches('/')))
        .call()
        .with_context(|| format!("querying {url}"))?
        .into_json()?;
    println!(
        "t = {} s, policy {}, open alarms {}",
        state["t_s"],
        state["policy"].as_str().unwrap_or("?"),
        state["alarms_open"]
    );
    println!("{:<6} {:<24} {:>8} {:>8} {:>12} {:>12}", "link", "endpoints", "status", "qber", "sifted_bps", "secure_bps");
    for l in state["links"].as_array().into_iter().flatten() {
        let ends = format!("{}-{}", l["a"].as_str().unwrap_or("?"), l["b"].as_str().unwrap_or("?"));
        println!(
            "{:<6} {:<24} {:>8} {:>8} {:>12} {:>12}",
            l["id"].as_str().unwrap_or("?"),
            ends,
            l["status"].as_str().unwrap_or("?"),
            opt(&l["qber"], 4),
            opt(&l["sifted_bps"], 0),
            opt(&l["secure_bps"], 0),
        );
    }
    for r in state["routes"].as_array().into_iter().flatten() {
        println!("route {}: {}", r["demand"].as_str().unwrap_or("?"), r["route"]["nodes"]);
    }
    Ok(())
}

fn finished(dir: &std::path::Path) -> Result<()> {
    let summary_path = dir.join("summary.json");
    if !summary_path.exists() {
        bail!("{} has no summary.json; run `qkdnet run --out {}` first", dir.display(), dir.display());
    }
    let summary: RunSummary = serde_json::from_str(&std::fs::read_to_string(&summary_path)?)
        .with_context(|| format!("parsing {}", summary_path.display()))?;
    println!("{}: seed {}, {} s simulated", summary.scenario, summary.seed, summary.duration_s);

    let csv = std::fs::read_to_string(dir.join("metrics.csv")).context("reading metrics.csv")?;
    let rows: Vec<Vec<&str>> = csv.lines().skip(1).map(|l| l.split(',').collect()).collect();
    if let Some(last_t) = rows.last().map(|r| r[0]) {
        println!("final tick t = {last_t} s");
        println!("{:<22} {:>9} {:>12} {:>12} {:>12} {:>8}", "id", "qber", "sifted_bps", "secure_bps", "buffer_bits", "status");
        for r in rows.iter().filter(|r| r[0] == last_t && r.len() >= 7) {
            println!("{:<22} {:>9} {:>12} {:>12} {:>12} {:>8}", r[1], r[2], r[3], r[4], r[5], r[6]);
        }
    }
    for al in &summary.alarms {
        println!("alarm {} at {} s: {:?} ({:.3})", al.link_id, al.raised_at_s, al.cause, al.value);
    }
    for sw in &summary.route_switches {
        println!("route {} at {} s -> {} ({} km)", sw.demand, sw.t_s, sw.to.join(" > "), sw.to_distance_km);
    }
    for (id, t) in &summary.sessions {
        println!(
            "session {id}: {} bytes, stall {} s, {} mismatched chunks",
            t.bytes_enciphered, t.stall_s, t.mismatched_chunks
        );
    }
    println!("audit {}", if summary.checks.all_pass() { "pass" } else { "FAIL" });
    Ok(())
}
