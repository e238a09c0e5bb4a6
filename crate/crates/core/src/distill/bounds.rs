//! Asymptotic secure-fraction bounds. Each returns the fraction of sifted
//! bits that survives privacy amplification, clamped at zero, given the
//! error-correction leakage as a fraction of the block.

use serde::{Deserialize, Serialize};

use super::ec_rate::h2;
use crate::error::{Error, Result};

pub const DPS_DEFAULT_MEAN_PHOTONS: f64 = 0.2;

/// Observed gains and error rates of the signal (`mu`) and decoy (`nu`)
/// classes, with the vacuum gain when a vacuum class is sent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecoyStats {
    pub mu: f64,
    pub nu: f64,
    pub gain_mu: f64,
    pub gain_nu: f64,
    pub error_mu: f64,
    pub error_nu: f64,
    pub vacuum_gain: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecoyBounds {
    pub y0_upper: f64,
    pub y0_lower: f64,
    pub y1_lower: f64,
    pub q1_lower: f64,
    pub e1_upper: f64,
}

fn check_rate(name: &str, v: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&v) || v.is_nan() {
        return Err(Error::invalid(format!("{name} = {v} outside [0,1]")));
    }
    Ok(())
}

/// Two-intensity (weak decoy plus optional vacuum) bounds on the
/// single-photon yield and error rate.
pub fn decoy_bounds(s: &DecoyStats) -> Result<DecoyBounds> {
    if !(s.mu > 0.0 && s.nu > 0.0 && s.nu < s.mu) {
        return Err(Error::invalid(format!(
            "decoy intensities need 0 < nu < mu, got mu={} nu={}",
            s.mu, s.nu
        )));
    }
    check_rate("gain_mu", s.gain_mu)?;
    check_rate("gain_nu", s.gain_nu)?;
    check_rate("error_mu", s.error_mu)?;
    check_rate("error_nu", s.error_nu)?;
    if let Some(v) = s.vacuum_gain {
        check_rate("vacuum_gain", v)?;
    }
    let (mu, nu) = (s.mu, s.nu);
    let qmu = s.gain_mu * mu.exp();
    let qnu = s.gain_nu * nu.exp();
    // Vacuum events err half the time, so each class bounds Y0 from above.
    let y0_upper = s
        .vacuum_gain
        .unwrap_or_else(|| (2.0 * s.error_mu * qmu).min(2.0 * s.error_nu * qnu));
    let y0_lower = s
        .vacuum_gain
        .unwrap_or_else(|| ((nu * qmu - mu * qnu) / (nu - mu)).max(0.0));
    let y1_lower = (mu / (mu * nu - nu * nu)
        * (qnu - qmu * nu * nu / (mu * mu) - (mu * mu - nu * nu) / (mu * mu) * y0_upper))
        .max(0.0);
    let q1_lower = y1_lower * mu * (-mu).exp();
    let e1_upper = if y1_lower > 0.0 {
        ((s.error_nu * qnu - 0.5 * y0_lower) / (y1_lower * nu)).clamp(0.0, 0.5)
    } else {
        0.5
    };
    Ok(DecoyBounds { y0_upper, y0_lower, y1_lower, q1_lower, e1_upper })
}

pub fn decoy_secure_fraction(s: &DecoyStats, leak_fraction: f64) -> Result<f64> {
    check_rate("leak_fraction", leak_fraction)?;
    let b = decoy_bounds(s)?;
    if s.gain_mu <= 0.0 {
        return Ok(0.0);
    }
    let privacy = (b.q1_lower / s.gain_mu).min(1.0) * (1.0 - h2(b.e1_upper));
    Ok((privacy - leak_fraction).max(0.0))
}

/// DPS bound against general individual attacks at the default mean photon
/// number.
pub fn dps_secure_fraction(qber: f64, leak_fraction: f64) -> Result<f64> {
    dps_secure_fraction_at(DPS_DEFAULT_MEAN_PHOTONS, qber, leak_fraction)
}

/// `(1 - 2 mu) * (-log2 Pc) - leak`, with collision probability
/// `Pc = 1 - e^2 - (1 - 6e)^2 / 2`. `e` is clamped to `3/19`, beyond which
/// `Pc` turns back down and the bound would grow with the error rate.
pub fn dps_secure_fraction_at(mu: f64, qber: f64, leak_fraction: f64) -> Result<f64> {
    if !(mu > 0.0 && mu < 0.5) {
        return Err(Error::invalid(format!("dps mean photon number {mu} outside (0, 0.5)")));
    }
    check_rate("qber", qber)?;
    check_rate("leak_fraction", leak_fraction)?;
    let e = qber.min(3.0 / 19.0);
    let pc = 1.0 - e * e - (1.0 - 6.0 * e).powi(2) / 2.0;
    Ok(((1.0 - 2.0 * mu) * -pc.log2() - leak_fraction).max(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn pure_loss(eta: f64, mu: f64, nu: f64) -> DecoyStats {
        DecoyStats {
            mu,
            nu,
            gain_mu: 1.0 - (-mu * eta).exp(),
            gain_nu: 1.0 - (-nu * eta).exp(),
            error_mu: 0.0,
            error_nu: 0.0,
            vacuum_gain: None,
        }
    }

    #[test]
    fn pure_loss_single_photon_yield_is_tight() {
        for eta in [1e-2, 1e-3, 1e-4] {
            let b = decoy_bounds(&pure_loss(eta, 0.5, 0.1)).unwrap();
            assert!(b.y1_lower <= eta * (1.0 + 1e-9));
            assert!(b.y1_lower > 0.9 * eta, "eta {eta}: {}", b.y1_lower);
            assert_eq!(b.e1_upper, 0.0);
        }
    }

    #[test]
    fn pure_loss_fraction_is_single_photon_share() {
        let s = pure_loss(1e-3, 0.5, 0.1);
        let f = decoy_secure_fraction(&s, 0.0).unwrap();
        // Q1 / Q_mu -> e^{-mu} for small eta.
        assert!(f <= (-0.5f64).exp() + 1e-3 && f > 0.9 * (-0.5f64).exp());
    }

    #[test]
    fn vacuum_class_is_used_directly() {
        let mut s = pure_loss(1e-3, 0.5, 0.1);
        s.vacuum_gain = Some(1e-5);
        let b = decoy_bounds(&s).unwrap();
        assert_eq!(b.y0_upper, 1e-5);
        assert_eq!(b.y0_lower, 1e-5);
    }

    #[test]
    fn decoy_rejects_bad_intensities() {
        let mut s = pure_loss(1e-3, 0.5, 0.1);
        s.nu = 0.6;
        assert!(decoy_bounds(&s).is_err());
        s.nu = 0.1;
        s.error_mu = 1.5;
        assert!(decoy_bounds(&s).is_err());
    }

    #[test]
    fn dps_values() {
        // e = 0: Pc = 1/2, fraction = 1 - 2 mu.
        assert_abs_diff_eq!(dps_secure_fraction(0.0, 0.0).unwrap(), 0.6, epsilon = 1e-12);
        let f = dps_secure_fraction(0.023, 0.0).unwrap();
        let pc: f64 = 1.0 - 0.023f64.powi(2) - (1.0f64 - 0.138).powi(2) / 2.0;
        assert_abs_diff_eq!(f, 0.6 * -pc.log2(), epsilon = 1e-12);
        assert!(f < 0.6);
        assert_eq!(dps_secure_fraction(0.02, 0.9).unwrap(), 0.0);
        assert!(dps_secure_fraction_at(0.6, 0.02, 0.0).is_err());
    }

    #[test]
    fn dps_is_monotone_in_error() {
        let mut prev = f64::INFINITY;
        for i in 0..=50 {
            let f = dps_secure_fraction(i as f64 * 0.005, 0.0).unwrap();
            assert!(f <= prev + 1e-12);
            prev = f;
        }
    }
}
