//! Opto-electronic front-end model.
//!
//! A balanced detector pair converts local-oscillator (or source-laser) light
//! into a photocurrent difference whose fluctuations are shot noise, amplified
//! by a transimpedance amplifier (TIA) that adds its own electrical noise.
//! The ratio of total to electrical-only noise power is the *clearance*.
//!
//! All PSDs are one-sided. Voltages refer to the TIA output, which is also
//! the ADC input.

mod capture;
mod psd;
mod simulate;

pub use capture::{read_capture, write_capture, CAPTURE_HEADER_LEN, CAPTURE_MAGIC, CAPTURE_VERSION};
pub use psd::{psd_estimate, welch, PsdEstimate};
pub use simulate::{
    default_full_scale, expected_noise_variance, quantize, simulate_block, AdcConfig, SampleBlock, SideChannel,
    SidechannelConfig, CLIP_WARNING_FRACTION,
};

use crate::dsp::{db_to_lin, dbm_to_w, lin_to_db, Biquad};
use crate::error::{domain, Error, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// Elementary charge (C).
pub const ELEMENTARY_CHARGE: f64 = 1.602_176_634e-19;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Coherent receiver: the LO is the entropy source.
    Receiver,
    /// I/Q modulator transmitter: monitor photodiodes sample the source laser.
    Transmitter,
}

/// Common-mode rejection, either flat or a table of `[freq_hz, db]` points
/// interpolated linearly in (log f, dB) and held constant outside the table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Cmrr {
    Scalar(f64),
    Table(Vec<[f64; 2]>),
}

impl Cmrr {
    pub fn db_at(&self, freq_hz: f64) -> f64 {
        match self {
            Cmrr::Scalar(db) => *db,
            Cmrr::Table(points) => {
                let first = points[0];
                let last = points[points.len() - 1];
                if freq_hz <= first[0] {
                    return first[1];
                }
                if freq_hz >= last[0] {
                    return last[1];
                }
                let i = points.partition_point(|p| p[0] <= freq_hz);
                let (lo, hi) = (points[i - 1], points[i]);
                let t = (freq_hz.ln() - lo[0].ln()) / (hi[0].ln() - lo[0].ln());
                lo[1] + t * (hi[1] - lo[1])
            }
        }
    }

    pub fn is_flat(&self) -> bool {
        match self {
            Cmrr::Scalar(_) => true,
            Cmrr::Table(points) => points.windows(2).all(|w| w[0][1] == w[1][1]),
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            Cmrr::Scalar(db) if db.is_finite() && *db >= 0.0 => Ok(()),
            Cmrr::Scalar(db) => Err(domain(format!("cmrr_db must be finite and >= 0, got {db}"))),
            Cmrr::Table(points) => {
                if points.is_empty() {
                    return Err(domain("cmrr_db table is empty"));
                }
                for p in points {
                    if !(p[0] > 0.0 && p[0].is_finite()) {
                        return Err(domain(format!("cmrr table frequency must be positive, got {}", p[0])));
                    }
                    if !(p[1] >= 0.0 && p[1].is_finite()) {
                        return Err(domain(format!("cmrr table value must be >= 0 dB, got {}", p[1])));
                    }
                }
                if points.windows(2).any(|w| w[1][0] <= w[0][0]) {
                    return Err(domain("cmrr table frequencies must be strictly increasing"));
                }
                Ok(())
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrontendConfig {
    pub mode: Mode,
    pub source_power_dbm: f64,
    /// A/W
    pub responsivity: f64,
    pub transimpedance_dbohm: f64,
    pub detector_bandwidth_hz: f64,
    /// Source to photodiode pair, including modulator insertion loss and tap ratio.
    pub optical_path_loss_db: f64,
    pub cmrr_db: Cmrr,
    /// One-sided electrical noise PSD at the TIA output (V²/Hz).
    pub electrical_noise_psd: f64,
}

impl FrontendConfig {
    /// Coherent receiver with an 18 dBm LO, 0.8 A/W, 51.5 dBΩ and 14.8 GHz.
    /// The electrical floor is calibrated so the clearance stays at 2 dB up
    /// to 11.8 GHz.
    pub fn receiver_2020() -> Self {
        let mut fe = Self {
            mode: Mode::Receiver,
            source_power_dbm: 18.0,
            responsivity: 0.8,
            transimpedance_dbohm: 51.5,
            detector_bandwidth_hz: 14.8e9,
            optical_path_loss_db: 7.0,
            cmrr_db: Cmrr::Scalar(9.5),
            electrical_noise_psd: 1.0,
        };
        fe.electrical_noise_psd = calibrate_electrical_noise_at(2.0, &fe, 11.8e9).expect("valid preset");
        fe
    }

    /// Modulator-based transmitter: 18 dBm source, 66 dBΩ monitor TIA and a
    /// 150 MHz clearance band, calibrated to 2.1 dB band clearance at
    /// `sample_rate_hz`.
    pub fn transmitter_2020(sample_rate_hz: f64) -> Self {
        let mut fe = Self {
            mode: Mode::Transmitter,
            source_power_dbm: 18.0,
            responsivity: 0.8,
            transimpedance_dbohm: 66.0,
            detector_bandwidth_hz: 150e6,
            optical_path_loss_db: 16.0,
            cmrr_db: Cmrr::Scalar(34.0),
            electrical_noise_psd: 1.0,
        };
        fe.electrical_noise_psd = calibrate_band(2.1, &fe, sample_rate_hz).expect("valid preset");
        fe
    }

    pub fn validate(&self) -> Result<()> {
        if !self.source_power_dbm.is_finite() {
            return Err(domain("source_power_dbm must be finite"));
        }
        if !(self.responsivity > 0.0 && self.responsivity <= 2.0) {
            return Err(domain(format!(
                "responsivity must be in (0, 2] A/W, got {}",
                self.responsivity
            )));
        }
        if !(self.transimpedance_dbohm > 0.0 && self.transimpedance_dbohm.is_finite()) {
            return Err(domain("transimpedance_dbohm must be > 0"));
        }
        if !(self.detector_bandwidth_hz > 0.0 && self.detector_bandwidth_hz.is_finite()) {
            return Err(domain("detector_bandwidth_hz must be > 0"));
        }
        if !self.optical_path_loss_db.is_finite() {
            return Err(domain("optical_path_loss_db must be finite"));
        }
        if !(self.electrical_noise_psd > 0.0 && self.electrical_noise_psd.is_finite()) {
            return Err(domain("electrical_noise_psd must be > 0"));
        }
        self.cmrr_db.validate()
    }

    pub fn transimpedance_ohm(&self) -> f64 {
        10f64.powf(self.transimpedance_dbohm / 20.0)
    }

    /// Optical power reaching the detector pair (W).
    pub fn received_power_w(&self) -> f64 {
        dbm_to_w(self.source_power_dbm) * db_to_lin(-self.optical_path_loss_db)
    }

    /// Shot-noise voltage PSD at the TIA output before band limiting (V²/Hz).
    pub fn quantum_voltage_psd(&self) -> f64 {
        let g = self.transimpedance_ohm();
        2.0 * ELEMENTARY_CHARGE * self.responsivity * self.received_power_w() * g * g
    }

    /// |H(f)|² of the analog second-order Butterworth detector response.
    pub fn detector_power_response(&self, freq_hz: f64) -> f64 {
        1.0 / (1.0 + (freq_hz / self.detector_bandwidth_hz).powi(4))
    }

    /// Digital detector filter used by the simulator at `sample_rate_hz`.
    pub fn detector_filter(&self, sample_rate_hz: f64) -> Biquad {
        Biquad::butterworth_lowpass(self.detector_bandwidth_hz, sample_rate_hz)
    }

    /// Short identifier: mode plus a digest of the full parameter set.
    pub fn tag(&self) -> String {
        let text = toml::to_string(self).unwrap_or_default();
        let digest = Sha256::digest(text.as_bytes());
        let mode = match self.mode {
            Mode::Receiver => "receiver",
            Mode::Transmitter => "transmitter",
        };
        format!("{mode}-{}", &hex::encode(digest)[..12])
    }
}

/// One-sided shot-noise current PSD 2qRP (A²/Hz).
pub fn shot_noise_current_psd(optical_power_w: f64, responsivity: f64) -> Result<f64> {
    if optical_power_w.is_nan() || optical_power_w < 0.0 {
        return Err(domain(format!("optical power must be >= 0 W, got {optical_power_w}")));
    }
    Ok(2.0 * ELEMENTARY_CHARGE * responsivity * optical_power_w)
}

/// Electrical PSD giving `target_clearance_db` at DC, where |H| = 1.
pub fn calibrate_electrical_noise(target_clearance_db: f64, frontend: &FrontendConfig) -> Result<f64> {
    calibrate_electrical_noise_at(target_clearance_db, frontend, 0.0)
}

/// Electrical PSD giving `target_clearance_db` at `freq_hz`.
pub fn calibrate_electrical_noise_at(target_clearance_db: f64, frontend: &FrontendConfig, freq_hz: f64) -> Result<f64> {
    if !(target_clearance_db > 0.0 && target_clearance_db.is_finite()) {
        return Err(domain(format!(
            "target clearance must be > 0 dB, got {target_clearance_db}"
        )));
    }
    if freq_hz < 0.0 {
        return Err(domain("frequency must be >= 0"));
    }
    let s_q = frontend.quantum_voltage_psd() * frontend.detector_power_response(freq_hz);
    if s_q <= 0.0 {
        return Err(domain(
            "no optical power reaches the detector; clearance cannot be calibrated",
        ));
    }
    Ok(s_q / (db_to_lin(target_clearance_db) - 1.0))
}

/// Spectral clearance 10·log10((S_q|H(f)|² + S_e)/S_e).
pub fn clearance_db(frontend: &FrontendConfig, freq_hz: f64) -> Result<f64> {
    if freq_hz.is_nan() || freq_hz < 0.0 {
        return Err(domain(format!("frequency must be >= 0, got {freq_hz}")));
    }
    frontend.validate()?;
    let s_q = frontend.quantum_voltage_psd() * frontend.detector_power_response(freq_hz);
    Ok(lin_to_db(1.0 + s_q / frontend.electrical_noise_psd))
}

/// Variance-level clearance of simulated blocks at `sample_rate_hz`: the
/// band-limited quantum variance over the electrical variance, which is white
/// over the whole Nyquist band.
pub fn band_clearance_db(frontend: &FrontendConfig, sample_rate_hz: f64) -> Result<f64> {
    frontend.validate()?;
    let gain = frontend.detector_filter(sample_rate_hz).noise_gain();
    Ok(lin_to_db(
        1.0 + frontend.quantum_voltage_psd() * gain / frontend.electrical_noise_psd,
    ))
}

/// Electrical PSD giving a variance-level clearance of `target_clearance_db`.
pub fn calibrate_band(target_clearance_db: f64, frontend: &FrontendConfig, sample_rate_hz: f64) -> Result<f64> {
    if !(target_clearance_db > 0.0 && target_clearance_db.is_finite()) {
        return Err(domain(format!(
            "target clearance must be > 0 dB, got {target_clearance_db}"
        )));
    }
    if !(sample_rate_hz > 0.0) {
        return Err(domain("sample rate must be > 0"));
    }
    let gain = frontend.detector_filter(sample_rate_hz).noise_gain();
    let s_q = frontend.quantum_voltage_psd() * gain;
    if s_q <= 0.0 {
        return Err(domain(
            "no optical power reaches the detector; clearance cannot be calibrated",
        ));
    }
    Ok(s_q / (db_to_lin(target_clearance_db) - 1.0))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BandClearance {
    pub min_db: f64,
    pub mean_db: f64,
}

/// Minimum and mean spectral clearance over [0, `upper_hz`].
pub fn clearance_over_band(frontend: &FrontendConfig, upper_hz: f64) -> Result<BandClearance> {
    if !(upper_hz > 0.0) {
        return Err(domain("band edge must be > 0"));
    }
    const POINTS: usize = 4096;
    let mut min_db = f64::INFINITY;
    let mut sum = 0.0;
    for i in 0..=POINTS {
        let c = clearance_db(frontend, upper_hz * i as f64 / POINTS as f64)?;
        min_db = min_db.min(c);
        // trapezoid weights
        sum += if i == 0 || i == POINTS { 0.5 * c } else { c };
    }
    Ok(BandClearance {
        min_db,
        mean_db: sum / POINTS as f64,
    })
}

/// Highest frequency at which the spectral clearance still reaches
/// `threshold_db` (0 if it never does).
pub fn bandwidth_above(frontend: &FrontendConfig, threshold_db: f64) -> Result<f64> {
    if !(threshold_db > 0.0) {
        return Err(Error::Domain("threshold must be > 0 dB".into()));
    }
    frontend.validate()?;
    let h2 = (db_to_lin(threshold_db) - 1.0) * frontend.electrical_noise_psd / frontend.quantum_voltage_psd();
    if h2 > 1.0 || !h2.is_finite() {
        return Ok(0.0);
    }
    Ok(frontend.detector_bandwidth_hz * (1.0 / h2 - 1.0).powf(0.25))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    #[test]
    fn shot_noise_examples() {
        assert_eq!(shot_noise_current_psd(0.0, 0.8).unwrap(), 0.0);
        let p = dbm_to_w(18.0);
        assert!(rel(p, 63.1e-3) < 1e-3);
        assert!(rel(shot_noise_current_psd(p, 0.8).unwrap(), 1.617e-20) < 1e-3);
        assert!(shot_noise_current_psd(-1e-3, 0.8).is_err());
    }

    #[test]
    fn calibration_factor_two() {
        let fe = FrontendConfig::receiver_2020();
        let s_e = calibrate_electrical_noise(3.0103, &fe).unwrap();
        assert!(rel(s_e, fe.quantum_voltage_psd()) < 1e-4);
    }

    #[test]
    fn calibration_ratio_for_2_1_db() {
        let fe = FrontendConfig::transmitter_2020(614.4e6);
        let s_e = calibrate_electrical_noise(2.1, &fe).unwrap();
        let ratio = s_e / fe.quantum_voltage_psd();
        assert!((ratio - 1.0 / (10f64.powf(0.21) - 1.0)).abs() < 1e-12);
        assert!((ratio - 1.6082).abs() < 1e-3);
    }

    #[test]
    fn calibration_round_trip() {
        let mut fe = FrontendConfig::receiver_2020();
        fe.electrical_noise_psd = calibrate_electrical_noise(2.0, &fe).unwrap();
        assert!((clearance_db(&fe, 0.0).unwrap() - 2.0).abs() < 1e-9);
        assert!(calibrate_electrical_noise(0.0, &fe).is_err());
        assert!(calibrate_electrical_noise(-1.0, &fe).is_err());
    }

    #[test]
    fn clearance_at_half_power_point() {
        let mut fe = FrontendConfig::receiver_2020();
        fe.electrical_noise_psd = calibrate_electrical_noise(2.3, &fe).unwrap();
        let c = clearance_db(&fe, fe.detector_bandwidth_hz).unwrap();
        let expected = 10.0 * (1.0 + 0.5 * (10f64.powf(0.23) - 1.0)).log10();
        assert!((c - expected).abs() < 1e-12);
        assert!((c - 1.3005).abs() < 1e-3);
    }

    #[test]
    fn dark_source_has_zero_clearance() {
        let mut fe = FrontendConfig::receiver_2020();
        fe.source_power_dbm = -400.0;
        assert!(clearance_db(&fe, 1e9).unwrap() < 1e-12);
    }

    #[test]
    fn receiver_preset_holds_2_db_to_11_8_ghz() {
        let fe = FrontendConfig::receiver_2020();
        assert!((clearance_db(&fe, 11.8e9).unwrap() - 2.0).abs() < 1e-9);
        assert!((bandwidth_above(&fe, 2.0).unwrap() - 11.8e9).abs() < 1.0);
        let band = clearance_over_band(&fe, 11.8e9).unwrap();
        assert!((band.min_db - 2.0).abs() < 1e-9);
        assert!(band.mean_db > band.min_db);
    }

    #[test]
    fn transmitter_preset_band_clearance() {
        let fs = 614.4e6;
        let fe = FrontendConfig::transmitter_2020(fs);
        assert!((band_clearance_db(&fe, fs).unwrap() - 2.1).abs() < 1e-9);
    }

    #[test]
    fn cmrr_table_interpolates_in_log_frequency() {
        let t = Cmrr::Table(vec![[1e9, 40.0], [1e10, 20.0]]);
        assert_eq!(t.db_at(1e8), 40.0);
        assert_eq!(t.db_at(1e11), 20.0);
        assert!((t.db_at(10f64.powf(9.5)) - 30.0).abs() < 1e-9);
        let mut fe = FrontendConfig::receiver_2020();
        fe.cmrr_db = Cmrr::Table(vec![[1e9, 40.0], [1e9, 20.0]]);
        assert!(fe.validate().is_err());
        fe.cmrr_db = Cmrr::Table(vec![[1e9, -1.0]]);
        assert!(fe.validate().is_err());
    }

    proptest! {
        #[test]
        fn shot_noise_is_linear(p in 0.0f64..1.0, r in 0.01f64..2.0) {
            let a = shot_noise_current_psd(p, r).unwrap();
            let b = shot_noise_current_psd(2.0 * p, r).unwrap();
            prop_assert!((b - 2.0 * a).abs() <= 1e-12 * b.abs().max(1e-300));
        }

        #[test]
        fn clearance_non_increasing_in_frequency(f1 in 0.0f64..50e9, f2 in 0.0f64..50e9) {
            let fe = FrontendConfig::receiver_2020();
            let (lo, hi) = if f1 < f2 { (f1, f2) } else { (f2, f1) };
            let c_lo = clearance_db(&fe, lo).unwrap();
            let c_hi = clearance_db(&fe, hi).unwrap();
            prop_assert!(c_hi <= c_lo + 1e-12);
            prop_assert!(c_hi >= 0.0);
        }

        #[test]
        fn clearance_increases_with_power(p1 in -10.0f64..25.0, dp in 0.1f64..5.0) {
            let mut fe = FrontendConfig::receiver_2020();
            fe.source_power_dbm = p1;
            let a = clearance_db(&fe, 1e9).unwrap();
            fe.source_power_dbm = p1 + dp;
            let b = clearance_db(&fe, 1e9).unwrap();
            prop_assert!(b > a);
        }
    }
}
