use serde::{Deserialize, Serialize};

use super::config::{cps_to_gate_prob, EveConfig, EveMode, LinkConfig, Protocol};
use crate::error::{Error, Result};

/// Power transmittance of a loss given in dB: `10^(-loss_db/10)`.
pub fn transmittance(loss_db: f64) -> Result<f64> {
    if !(loss_db >= 0.0) {
        return Err(Error::invalid(format!("loss_db must be >= 0, got {loss_db}")));
    }
    Ok(10f64.powf(-loss_db / 10.0))
}

/// Analytic response of one intensity class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassResponse {
    pub label: String,
    pub mean_photons: f64,
    pub send_prob: f64,
    /// Probability that a pulse of this class yields a detection (gain Q).
    pub gain: f64,
    /// Bit error rate of detections decoded in the matching basis. `None`
    /// when the class never clicks.
    pub error_rate: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClickModel {
    pub classes: Vec<ClassResponse>,
    /// End-to-end photon detection probability `eta_tot`.
    pub eta_total: f64,
    /// Per-gate noise click probability, all sources combined.
    pub p_noise: f64,
    /// Per-gate dark + background + injected click probability, without
    /// afterpulses.
    pub p_noise_base: f64,
    /// Stationary click probability averaged over classes.
    pub mean_gain: f64,
    /// Error probability of a signal click in the matching basis.
    pub signal_error: f64,
}

/// Closed-form gain and error per intensity class.
///
/// Noise aggregation, all per gate:
///
/// * dark: `p_d = 1 - (1 - dark_prob_per_gate)^num_detectors`
/// * background and injected light: `cps * duty / clock_hz` each
/// * base: `p_b = 1 - (1-p_d)(1-p_bg)(1-p_inj)`
/// * afterpulses: a detection arms the next gate with probability `a`, so
///   the stationary afterpulse probability is `a * Qbar` where `Qbar`, the
///   mean click probability, solves `Qbar = 1 - (1-p_b)(1-a*Qbar) S` with
///   `S = sum_c w_c exp(-mu_c eta)`. It is linear in `Qbar`.
/// * total: `p_noise = 1 - (1-p_b)(1 - a*Qbar)`
///
/// Then `Q_c = 1 - (1-p_noise) exp(-mu_c eta)` and
/// `E_c = (e_sig (Q_c - p_noise) + p_noise/2) / Q_c`: a click that coincides
/// with any noise click carries a random bit.
pub fn click_model(link: &LinkConfig) -> Result<ClickModel> {
    click_model_with_eve(link, &EveConfig::none())
}

/// Click model with an eavesdropper active for the whole exposure.
pub fn click_model_with_eve(link: &LinkConfig, eve: &EveConfig) -> Result<ClickModel> {
    link.validate()?;
    eve.validate()?;
    let det = &link.detector;
    let eta = transmittance(link.channel.loss_db + det.insertion_loss_db)? * det.efficiency;

    let (mu_scale, inject_cps, intercept) = match eve.mode {
        EveMode::None => (1.0, 0.0, false),
        EveMode::InterceptResend => (1.0, 0.0, true),
        EveMode::TapInject => (1.0 - eve.tap_fraction, eve.inject_click_rate, false),
    };

    let p_dark = 1.0 - (1.0 - det.dark_prob_per_gate).powi(det.num_detectors as i32);
    let p_bg = cps_to_gate_prob(link.channel.background_cps, link.clock_hz, link.duty_factor);
    let p_inj = cps_to_gate_prob(inject_cps, link.clock_hz, link.duty_factor);
    let p_base = 1.0 - (1.0 - p_dark) * (1.0 - p_bg) * (1.0 - p_inj);

    let survive: f64 = link
        .source
        .classes
        .iter()
        .map(|c| c.send_prob * (-c.mean_photons * mu_scale * eta).exp())
        .sum();
    let a = det.afterpulse_prob;
    let mean_gain = (1.0 - (1.0 - p_base) * survive) / (1.0 - a * (1.0 - p_base) * survive);
    let p_noise = 1.0 - (1.0 - p_base) * (1.0 - a * mean_gain);

    let signal_error = signal_error(link, intercept);

    let classes = link
        .source
        .classes
        .iter()
        .map(|c| {
            let gain = 1.0 - (1.0 - p_noise) * (-c.mean_photons * mu_scale * eta).exp();
            let error_rate = if gain > 0.0 {
                let e = (signal_error * (gain - p_noise) + 0.5 * p_noise) / gain;
                Some(e.clamp(0.0, 0.5))
            } else {
                None
            };
            ClassResponse {
                label: c.label.clone(),
                mean_photons: c.mean_photons,
                send_prob: c.send_prob,
                gain,
                error_rate,
            }
        })
        .collect();

    Ok(ClickModel {
        classes,
        eta_total: eta,
        p_noise,
        p_noise_base: p_base,
        mean_gain,
        signal_error,
    })
}

/// Error of a signal click decoded in the matching basis. Intercept-resend
/// in a random basis randomizes half of the signal clicks.
pub(crate) fn signal_error(link: &LinkConfig, intercept: bool) -> f64 {
    let squash = match link.protocol {
        Protocol::Bbm92 => link.double_pair_prob / 2.0,
        _ => 0.0,
    };
    let base = (1.0 - squash) * link.misalignment + squash * 0.5;
    if intercept {
        0.25 + 0.5 * base
    } else {
        base
    }
}

/// Expected QBER of the sifted key over all classes, given the protocol's
/// sifting rule.
///
/// BB84, BBM92 and DPS keep detections whose decoded bit is compared
/// directly, so the sifted error is the gain-weighted error rate. SARG04
/// keeps conclusive events only: same-basis detections are conclusive
/// exactly when they are wrong (probability `E`, kept with weight 1/2),
/// opposite-basis detections are conclusive half the time and always
/// right, so per class the sifted QBER is `2E / (1 + 2E)`.
pub fn expected_sifted_qber(protocol: Protocol, model: &ClickModel) -> Option<f64> {
    let mut kept = 0.0;
    let mut wrong = 0.0;
    for c in &model.classes {
        let Some(e) = c.error_rate else { continue };
        let w = c.send_prob * c.gain;
        match protocol {
            Protocol::Sarg04 => {
                kept += w * (0.5 * e + 0.25);
                wrong += w * 0.5 * e;
            }
            _ => {
                kept += w;
                wrong += w * e;
            }
        }
    }
    (kept > 0.0).then(|| wrong / kept)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{ChannelConfig, DetectorConfig, SourceConfig};
    use approx::assert_abs_diff_eq;

    #[test]
    fn transmittance_examples() {
        assert_eq!(transmittance(0.0).unwrap(), 1.0);
        assert_abs_diff_eq!(transmittance(14.5).unwrap(), 0.03548, epsilon = 1e-5);
        assert_abs_diff_eq!(transmittance(27.0).unwrap(), 0.0019953, epsilon = 1e-7);
        assert!(matches!(transmittance(-1.0), Err(Error::InvalidArgument(_))));
    }

    fn vacuum_link(dark: f64) -> LinkConfig {
        LinkConfig {
            protocol: Protocol::Bb84,
            clock_hz: 1e9,
            source: SourceConfig::single(0.0),
            channel: ChannelConfig::ideal(),
            detector: DetectorConfig {
                dark_prob_per_gate: dark,
                num_detectors: 1,
                ..DetectorConfig::ideal()
            },
            misalignment: 0.01,
            duty_factor: 1.0,
            double_pair_prob: 0.0,
        }
    }

    #[test]
    fn vacuum_without_noise_never_clicks() {
        let m = click_model(&vacuum_link(0.0)).unwrap();
        assert_eq!(m.classes[0].gain, 0.0);
        assert_eq!(m.classes[0].error_rate, None);
    }

    #[test]
    fn noise_only_clicks_are_random() {
        let m = click_model(&vacuum_link(1e-4)).unwrap();
        assert_abs_diff_eq!(m.classes[0].gain, 1e-4, epsilon = 1e-15);
        assert_abs_diff_eq!(m.classes[0].error_rate.unwrap(), 0.5, epsilon = 1e-12);
    }

    #[test]
    fn intercept_resend_drives_ideal_qber_to_quarter() {
        let link = LinkConfig::ideal(Protocol::Bb84, 0.5);
        let m = click_model_with_eve(&link, &EveConfig::intercept_resend()).unwrap();
        assert_abs_diff_eq!(m.classes[0].error_rate.unwrap(), 0.25, epsilon = 1e-12);
    }

    #[test]
    fn afterpulse_fixed_point_is_consistent() {
        let mut link = LinkConfig::ideal(Protocol::Bb84, 0.5);
        link.channel.loss_db = 20.0;
        link.detector.afterpulse_prob = 0.1;
        link.detector.dark_prob_per_gate = 1e-5;
        let m = click_model(&link).unwrap();
        let avg: f64 = m.classes.iter().map(|c| c.send_prob * c.gain).sum();
        assert_abs_diff_eq!(avg, m.mean_gain, epsilon = 1e-15);
    }
}
