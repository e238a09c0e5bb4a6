use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

pub const METRICS_HEADER: &str = "t_s,link_id,qber,sifted_bps,secure_bps,buffer_bits,status,alarms_open";

/// One row per link (or session) per tick. Rates are simulated bits per
/// simulated second; multiply link rates by the link's pulse divisor for
/// device-scale figures.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub t_s: f64,
    pub link_id: String,
    pub qber: f64,
    pub sifted_bps: f64,
    pub secure_bps: f64,
    pub buffer_bits: u64,
    pub status: String,
    /// Open alarms across the whole network.
    pub alarms_open: usize,
}

impl MetricsRow {
    pub fn csv_line(&self) -> String {
        format!(
            "{:.3},{},{:.6},{:.3},{:.3},{},{},{}",
            self.t_s,
            self.link_id,
            self.qber,
            self.sifted_bps,
            self.secure_bps,
            self.buffer_bits,
            self.status,
            self.alarms_open
        )
    }
}

pub fn metrics_csv(rows: &[MetricsRow]) -> String {
    let mut out = String::with_capacity(64 * (rows.len() + 1));
    out.push_str(METRICS_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(out, "{}", r.csv_line());
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixed_format() {
        let r = MetricsRow {
            t_s: 61.0,
            link_id: "L3".into(),
            qber: 0.25,
            sifted_bps: 9100.5,
            secure_bps: 0.0,
            buffer_bits: 42,
            status: "alarm".into(),
            alarms_open: 1,
        };
        assert_eq!(r.csv_line(), "61.000,L3,0.250000,9100.500,0.000,42,alarm,1");
        let csv = metrics_csv(&[r]);
        assert!(csv.starts_with("t_s,link_id,qber,sifted_bps,secure_bps,buffer_bits,status,alarms_open\n"));
    }
}
