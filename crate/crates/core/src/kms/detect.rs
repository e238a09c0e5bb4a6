use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::keymgmt::StatsReport;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectionRules {
    /// Alarm when a report's QBER exceeds this.
    pub absolute_threshold: f64,
    /// Alarm when a report's QBER exceeds the trailing mean by this much.
    pub jump_threshold: f64,
    /// Number of earlier reports in the trailing mean.
    pub window: usize,
    /// Consecutive reports without sifted key that count as link loss.
    pub loss_reports: usize,
}

impl Default for DetectionRules {
    fn default() -> Self {
        DetectionRules { absolute_threshold: 0.12, jump_threshold: 0.05, window: 10, loss_reports: 5 }
    }
}

impl DetectionRules {
    pub fn validate(&self) -> Result<()> {
        if !(self.absolute_threshold > 0.0 && self.absolute_threshold <= 0.5) {
            return Err(Error::invalid("absolute_threshold must be in (0, 0.5]"));
        }
        if !(self.jump_threshold > 0.0) || self.window == 0 || self.loss_reports == 0 {
            return Err(Error::invalid("jump_threshold, window and loss_reports must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlarmCause {
    QberJump,
    QberAbsolute,
    LinkLoss,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Alarm {
    pub link_id: String,
    pub raised_at_s: f64,
    pub cause: AlarmCause,
    /// QBER for the QBER rules, silent report count for link loss.
    pub value: f64,
}

/// Applies the rules to the newest report of `history` (oldest first).
/// Reports with no sifted key carry no QBER and only feed the loss rule.
pub fn detect_attack<'a, I>(history: I, rules: &DetectionRules) -> Option<Alarm>
where
    I: IntoIterator<Item = &'a StatsReport>,
    I::IntoIter: DoubleEndedIterator + ExactSizeIterator,
{
    let rows = history.into_iter();
    if rows.len() < 2 {
        return None;
    }
    let mut rev = rows.rev();
    let last = rev.next()?;
    if last.sifted_bps <= 0.0 {
        let silent = 1 + rev.take_while(|r| r.sifted_bps <= 0.0).count();
        return (silent >= rules.loss_reports).then(|| Alarm {
            link_id: last.link_id.clone(),
            raised_at_s: last.timestamp_s,
            cause: AlarmCause::LinkLoss,
            value: silent as f64,
        });
    }
    let alarm = |cause| Alarm { link_id: last.link_id.clone(), raised_at_s: last.timestamp_s, cause, value: last.qber };
    let trailing: Vec<f64> = rev.filter(|r| r.sifted_bps > 0.0).take(rules.window).map(|r| r.qber).collect();
    if !trailing.is_empty() {
        let mean = trailing.iter().sum::<f64>() / trailing.len() as f64;
        if last.qber - mean > rules.jump_threshold {
            return Some(alarm(AlarmCause::QberJump));
        }
    }
    (last.qber > rules.absolute_threshold).then(|| alarm(AlarmCause::QberAbsolute))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rows(qbers: &[f64]) -> Vec<StatsReport> {
        qbers
            .iter()
            .enumerate()
            .map(|(i, &q)| StatsReport {
                link_id: "L3".into(),
                timestamp_s: i as f64,
                qber: q,
                sifted_bps: if q.is_nan() { 0.0 } else { 1e4 },
                secure_bps: 0.0,
                buffer_bits: 0,
            })
            .map(|mut r| {
                if r.qber.is_nan() {
                    r.qber = 0.0;
                }
                r
            })
            .collect()
    }

    #[test]
    fn steady_baseline_is_quiet() {
        let r = DetectionRules::default();
        let h = rows(&[0.022, 0.019, 0.025, 0.021, 0.024, 0.020, 0.022, 0.025, 0.019, 0.023]);
        for n in 2..=h.len() {
            assert!(detect_attack(&h[..n], &r).is_none());
        }
    }

    #[test]
    fn onset_alarms_on_first_report() {
        let r = DetectionRules::default();
        let h = rows(&[0.022, 0.022, 0.022, 0.25]);
        let a = detect_attack(&h, &r).unwrap();
        assert_eq!(a.cause, AlarmCause::QberJump);
        assert_eq!(a.raised_at_s, 3.0);
    }

    #[test]
    fn slow_drift_below_threshold_is_quiet() {
        let r = DetectionRules::default();
        let q: Vec<f64> = (0..40).map(|i| 0.05 + 0.02 * (i as f64 / 39.0)).collect();
        let h = rows(&q);
        for n in 2..=h.len() {
            assert!(detect_attack(&h[..n], &r).is_none());
        }
    }

    #[test]
    fn absolute_rule_and_minimum_history() {
        let r = DetectionRules { jump_threshold: 0.5, ..DetectionRules::default() };
        assert!(detect_attack(&rows(&[0.2])[..], &r).is_none());
        let a = detect_attack(&rows(&[0.11, 0.13]), &r).unwrap();
        assert_eq!(a.cause, AlarmCause::QberAbsolute);
    }

    #[test]
    fn silent_link_raises_loss() {
        let r = DetectionRules::default();
        let h = rows(&[0.02, f64::NAN, f64::NAN, f64::NAN, f64::NAN]);
        assert!(detect_attack(&h, &r).is_none());
        let h = rows(&[0.02, f64::NAN, f64::NAN, f64::NAN, f64::NAN, f64::NAN]);
        assert_eq!(detect_attack(&h, &r).unwrap().cause, AlarmCause::LinkLoss);
    }
}
