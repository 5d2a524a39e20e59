//! Closed-form link-quality chain.
//!
//! RSSI is converted to RSRP by removing the per-resource-element share of
//! the wideband power, SINR compares RSRP against thermal noise plus the
//! received interference, and CQI is an affine map of SINR quantized to the
//! 4-bit CQI index range.
//!
//! All functions are pure. Powers in dBm are converted to milliwatts
//! whenever a ratio or a sum of powers is required.

use alloc::format;
use alloc::vec::Vec;

use crate::{Error, Result};

/// Thermal noise power spectral density at room temperature (dBm/Hz).
pub const THERMAL_NOISE_DBM_PER_HZ: f64 = -174.0;

/// Slope of the SINR → CQI map.
pub const CQI_SLOPE: f64 = 0.5223;

/// Intercept of the SINR → CQI map (CQI at 0 dB SINR).
pub const CQI_INTERCEPT: f64 = 4.6176;

/// Largest reportable CQI index.
pub const CQI_MAX: u8 = 15;

/// Sub-carriers per resource block.
pub const SUBCARRIERS_PER_RB: f64 = 12.0;

/// Resource blocks in a 20 MHz channel.
pub const DEFAULT_NUM_RBS: u32 = 100;

/// Channel bandwidth used throughout the reference experiments (Hz).
pub const DEFAULT_BANDWIDTH_HZ: f64 = 20.0e6;

#[inline]
pub fn dbm_to_mw(dbm: f64) -> f64 {
    libm::pow(10.0, dbm / 10.0)
}

#[inline]
pub fn mw_to_dbm(mw: f64) -> f64 {
    10.0 * libm::log10(mw)
}

/// Thermal noise floor over `bandwidth_hz`: `-174 + 10·log10(W)` dBm.
pub fn noise_power_dbm(bandwidth_hz: f64) -> Result<f64> {
    if !(bandwidth_hz > 0.0) || !bandwidth_hz.is_finite() {
        return Err(Error::Domain(format!(
            "bandwidth must be positive and finite, got {bandwidth_hz} Hz"
        )));
    }
    Ok(THERMAL_NOISE_DBM_PER_HZ + 10.0 * libm::log10(bandwidth_hz))
}

fn check_rbs(num_rbs: u32) -> Result<()> {
    if num_rbs < 1 {
        return Err(Error::Domain("number of resource blocks must be at least 1".into()));
    }
    Ok(())
}

/// RSRP from wideband RSSI: `rssi − 10·log10(12·J)`.
pub fn rsrp_from_rssi(rssi_dbm: f64, num_rbs: u32) -> Result<f64> {
    check_rbs(num_rbs)?;
    Ok(rssi_dbm - 10.0 * libm::log10(SUBCARRIERS_PER_RB * f64::from(num_rbs)))
}

/// How RSRQ combines RSSI and RSRP.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RsrqMode {
    /// `10·log10(J · rsrp_mw / rssi_mw)`, the 3GPP definition.
    #[default]
    LinearDomain,
    /// `J · rssi_dbm / rsrp_dbm`, dB values used directly in the ratio.
    LiteralDb,
}

/// Reference signal received quality.
///
/// `rssi_dbm` is the total wideband power the RSRQ is measured against.
pub fn rsrq(rssi_dbm: f64, rsrp_dbm: f64, num_rbs: u32, mode: RsrqMode) -> Result<f64> {
    check_rbs(num_rbs)?;
    let j = f64::from(num_rbs);
    match mode {
        RsrqMode::LinearDomain => {
            let rssi_mw = dbm_to_mw(rssi_dbm);
            if !(rssi_mw > 0.0) {
                return Err(Error::Domain(format!(
                    "RSSI {rssi_dbm} dBm has no positive linear power"
                )));
            }
            Ok(mw_to_dbm(j * dbm_to_mw(rsrp_dbm) / rssi_mw))
        }
        RsrqMode::LiteralDb => {
            if rsrp_dbm == 0.0 {
                return Err(Error::Domain("RSRP of 0 dBm divides by zero in literal mode".into()));
            }
            Ok(j * (rssi_dbm / rsrp_dbm))
        }
    }
}

/// SINR in dB of a signal at `rsrp_dbm` against noise plus interferers.
pub fn sinr(rsrp_dbm: f64, noise_dbm: f64, interference_mw: &[f64]) -> Result<f64> {
    if !noise_dbm.is_finite() {
        return Err(Error::NonFinite("noise power"));
    }
    if let Some(bad) = interference_mw.iter().find(|p| !(**p >= 0.0)) {
        return Err(Error::Domain(format!("interference power {bad} mW is negative")));
    }
    // With no interferers the dB difference is exact; the linear round trip
    // would lose a few ulps.
    if interference_mw.iter().all(|p| *p == 0.0) {
        return Ok(rsrp_dbm - noise_dbm);
    }
    let denom = dbm_to_mw(noise_dbm) + interference_mw.iter().sum::<f64>();
    if !(denom > 0.0) {
        return Err(Error::Domain("noise plus interference underflowed to zero".into()));
    }
    Ok(mw_to_dbm(dbm_to_mw(rsrp_dbm) / denom))
}

/// CQI before and after quantization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cqi {
    pub raw: f64,
    pub index: u8,
}

/// Clamp-and-round a real CQI to the reportable index range.
///
/// Ties round away from zero (4.5 → 5).
pub fn quantize_cqi(raw: f64) -> u8 {
    let rounded = libm::round(raw);
    if rounded <= 0.0 {
        0
    } else if rounded >= f64::from(CQI_MAX) {
        CQI_MAX
    } else {
        rounded as u8
    }
}

pub fn cqi_from_sinr(sinr_db: f64) -> Result<Cqi> {
    if !sinr_db.is_finite() {
        return Err(Error::NonFinite("SINR"));
    }
    let raw = CQI_SLOPE * sinr_db + CQI_INTERCEPT;
    Ok(Cqi { raw, index: quantize_cqi(raw) })
}

/// Inputs of one user-to-gNB link.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkBudget {
    pub rssi_dbm: f64,
    pub num_rbs: u32,
    pub bandwidth_hz: f64,
    /// Received per-resource-element power of each interfering gNB (mW).
    pub interference_mw: Vec<f64>,
    /// Measured noise floor; derived from the bandwidth when `None`.
    pub noise_dbm: Option<f64>,
}

impl LinkBudget {
    pub fn new(rssi_dbm: f64) -> Self {
        Self {
            rssi_dbm,
            num_rbs: DEFAULT_NUM_RBS,
            bandwidth_hz: DEFAULT_BANDWIDTH_HZ,
            interference_mw: Vec::new(),
            noise_dbm: None,
        }
    }

    pub fn with_interference(mut self, interference_mw: Vec<f64>) -> Self {
        self.interference_mw = interference_mw;
        self
    }

    pub fn validate(&self) -> Result<()> {
        check_rbs(self.num_rbs)?;
        if !(self.bandwidth_hz > 0.0) {
            return Err(Error::Domain("bandwidth must be positive".into()));
        }
        if !self.rssi_dbm.is_finite() {
            return Err(Error::NonFinite("RSSI"));
        }
        if self.interference_mw.iter().any(|p| !(*p >= 0.0)) {
            return Err(Error::Domain("interference powers must be non-negative".into()));
        }
        Ok(())
    }

    pub fn noise_dbm(&self) -> Result<f64> {
        match self.noise_dbm {
            Some(n) => Ok(n),
            None => noise_power_dbm(self.bandwidth_hz),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkMetrics {
    pub rsrp_dbm: f64,
    pub rsrq_db: f64,
    pub sinr_db: f64,
    pub cqi_raw: f64,
    pub cqi: u8,
}

/// The composed quality model: RSSI → RSRP → SINR → CQI, with RSRQ
/// computed alongside.
///
/// RSRQ is measured against the wideband power of the serving signal plus
/// every interferer scaled from per-resource-element to full-band power
/// (`12·J` resource elements).
pub fn quality_model(link: &LinkBudget) -> Result<LinkMetrics> {
    link.validate()?;
    let rsrp_dbm = rsrp_from_rssi(link.rssi_dbm, link.num_rbs)?;
    let noise = link.noise_dbm()?;
    let sinr_db = sinr(rsrp_dbm, noise, &link.interference_mw)?;
    let cqi = cqi_from_sinr(sinr_db)?;

    let res = SUBCARRIERS_PER_RB * f64::from(link.num_rbs);
    let interference: f64 = link.interference_mw.iter().sum();
    let wideband_dbm = if interference == 0.0 {
        link.rssi_dbm
    } else {
        mw_to_dbm(dbm_to_mw(link.rssi_dbm) + res * interference)
    };
    let rsrq_db = rsrq(wideband_dbm, rsrp_dbm, link.num_rbs, RsrqMode::LinearDomain)?;

    Ok(LinkMetrics { rsrp_dbm, rsrq_db, sinr_db, cqi_raw: cqi.raw, cqi: cqi.index })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use proptest::prelude::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn noise_floor() {
        assert!(close(noise_power_dbm(20e6).unwrap(), -100.9897, 1e-4));
        assert_eq!(noise_power_dbm(1.0).unwrap(), -174.0);
        assert!(close(noise_power_dbm(1e6).unwrap(), -114.0, 1e-12));
        assert!(noise_power_dbm(0.0).is_err());
        assert!(noise_power_dbm(-5.0).is_err());
    }

    #[test]
    fn rsrp_examples() {
        assert!(close(rsrp_from_rssi(-70.0, 100).unwrap(), -100.7918, 1e-4));
        assert!(close(rsrp_from_rssi(0.0, 100).unwrap(), -30.7918, 1e-4));
        assert!(close(rsrp_from_rssi(-42.0, 1).unwrap(), -42.0 - 10.7918, 1e-4));
        assert!(rsrp_from_rssi(-70.0, 0).is_err());
    }

    #[test]
    fn rsrq_modes() {
        let lin = rsrq(-70.0, -90.79, 100, RsrqMode::LinearDomain).unwrap();
        assert!(close(lin, -0.79, 0.01));

        // rsrp_mw · J == rssi_mw
        let rsrp = -70.0 - 20.0;
        assert!(close(rsrq(-70.0, rsrp, 100, RsrqMode::LinearDomain).unwrap(), 0.0, 1e-12));

        let lit = rsrq(-70.0, -100.79, 100, RsrqMode::LiteralDb).unwrap();
        assert!(close(lit, 69.45, 0.01));
        assert!(rsrq(-70.0, 0.0, 100, RsrqMode::LiteralDb).is_err());
        assert!(rsrq(f64::NEG_INFINITY, -90.0, 100, RsrqMode::LinearDomain).is_err());
    }

    #[test]
    fn sinr_examples() {
        assert_eq!(sinr(-100.0, -100.0, &[]).unwrap(), 0.0);
        let n = noise_power_dbm(20e6).unwrap();
        assert!(close(sinr(-90.0, n, &[]).unwrap(), 10.9897, 1e-3));
        let one = sinr(-90.0, n, &[dbm_to_mw(n)]).unwrap();
        assert!(close(one, 7.979, 1e-3));
        assert!(sinr(-90.0, n, &[-1.0]).is_err());
        assert!(sinr(-90.0, f64::NAN, &[]).is_err());
    }

    #[test]
    fn cqi_examples() {
        let c0 = cqi_from_sinr(0.0).unwrap();
        assert_eq!(c0.raw, 4.6176);
        assert_eq!(c0.index, 5);
        let c10 = cqi_from_sinr(10.0).unwrap();
        assert!(close(c10.raw, 9.8406, 1e-4));
        assert_eq!(c10.index, 10);
        let c40 = cqi_from_sinr(40.0).unwrap();
        assert!(close(c40.raw, 25.5096, 1e-4));
        assert_eq!(c40.index, 15);
        assert_eq!(cqi_from_sinr(-40.0).unwrap().index, 0);
        assert!(cqi_from_sinr(f64::INFINITY).is_err());
    }

    #[test]
    fn rounding_ties_go_away_from_zero() {
        assert_eq!(quantize_cqi(4.5), 5);
        assert_eq!(quantize_cqi(4.4999), 4);
        assert_eq!(quantize_cqi(-0.5), 0);
        assert_eq!(quantize_cqi(14.5), 15);
    }

    #[test]
    fn quality_model_examples() {
        let m = quality_model(&LinkBudget::new(-70.0)).unwrap();
        assert!(close(m.rsrp_dbm, -100.7918, 1e-4));
        assert!(close(m.sinr_db, 0.198, 1e-3));
        assert!(close(m.cqi_raw, 4.721, 1e-3));
        assert_eq!(m.cqi, 5);

        // rsrp_mw = noise_mw + ΣI gives 0 dB SINR
        let noise = noise_power_dbm(20e6).unwrap();
        let i = dbm_to_mw(noise);
        let rsrp_mw = dbm_to_mw(noise) + i;
        let rssi = mw_to_dbm(rsrp_mw) + 10.0 * libm::log10(1200.0);
        let m = quality_model(&LinkBudget::new(rssi).with_interference(vec![i])).unwrap();
        assert!(close(m.cqi_raw, 4.6176, 1e-9));

        let mut bad = LinkBudget::new(-70.0);
        bad.num_rbs = 0;
        assert!(quality_model(&bad).is_err());
    }

    #[test]
    fn measured_noise_overrides_bandwidth() {
        let mut link = LinkBudget::new(-70.0);
        link.noise_dbm = Some(-110.0);
        let m = quality_model(&link).unwrap();
        assert!(close(m.sinr_db, -100.79181246047625 + 110.0, 1e-9));
    }

    #[test]
    fn rsrq_without_interference_is_one_twelfth() {
        let m = quality_model(&LinkBudget::new(-60.0)).unwrap();
        assert!(close(m.rsrq_db, -10.0 * libm::log10(12.0), 1e-9));
    }

    proptest! {
        #[test]
        fn composition_is_bit_identical(
            rssi in -140.0f64..-20.0,
            j in 1u32..300,
            interf in proptest::collection::vec(0.0f64..1e-9, 0..8),
        ) {
            let mut link = LinkBudget::new(rssi).with_interference(interf.clone());
            link.num_rbs = j;
            let m = quality_model(&link).unwrap();
            let rsrp = rsrp_from_rssi(rssi, j).unwrap();
            let s = sinr(rsrp, noise_power_dbm(20e6).unwrap(), &interf).unwrap();
            let c = cqi_from_sinr(s).unwrap();
            prop_assert_eq!(m.cqi_raw.to_bits(), c.raw.to_bits());
            prop_assert!(m.cqi <= CQI_MAX);
        }

        #[test]
        fn sinr_monotone(rsrp in -130.0f64..-40.0, d in 0.01f64..20.0, i in 1e-13f64..1e-9) {
            let n = -100.0;
            let lo = sinr(rsrp, n, &[i]).unwrap();
            let hi = sinr(rsrp + d, n, &[i]).unwrap();
            prop_assert!(hi > lo);
            let more = sinr(rsrp, n, &[i * 2.0]).unwrap();
            prop_assert!(more < lo);
        }

        #[test]
        fn cqi_monotone(s in -30.0f64..40.0, d in 1e-6f64..10.0) {
            prop_assert!(cqi_from_sinr(s + d).unwrap().raw > cqi_from_sinr(s).unwrap().raw);
        }

        #[test]
        fn empty_interference_is_db_difference(rsrp in -150.0f64..0.0, n in -130.0f64..-80.0) {
            prop_assert!((sinr(rsrp, n, &[]).unwrap() - (rsrp - n)).abs() <= 1e-9);
        }
    }
}
