//! PM-I/Q modulator as a QRNG front-end: MZM transfer, bias-tone harmonics,
//! and the time-division frame that shares the transmitter between data and
//! random-number slots.

use crate::dsp::raised_cosine;
use crate::error::{config, domain, Error, Result};
use crate::frontend::{quantize, simulate_block, AdcConfig, FrontendConfig, Mode, SidechannelConfig};
use crate::qpsk::map_symbol;
use crate::rng::{stream, streams};
use num_complex::Complex64;
use rand::RngCore;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::fmt::Write as _;

/// Largest bias-tone amplitude accepted, as a fraction of Vπ.
pub const MAX_TONE_FRACTION: f64 = 0.1;
/// Harmonics reported by [`bias_tone_spectrum`].
pub const HARMONICS: usize = 5;
/// Floor applied to harmonic powers that vanish by symmetry.
pub const HARMONIC_FLOOR_DBC: f64 = -300.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModulatorConfig {
    pub v_pi: f64,
    pub bias_points_qrng: Vec<f64>,
    pub bias_points_data: Vec<f64>,
    pub rf_dc_crosstalk_db: f64,
    pub bias_shift_v: f64,
    pub bias_tolerance_vpi: f64,
    pub dc_lpf_hz: f64,
    pub native_dc_bw_hz: f64,
}

impl ModulatorConfig {
    /// Transmitter of the 2020 field trial: 1.56 V shift at 0.42 Vπ, 22 kHz
    /// bias filter. Data biases sit at null, QRNG biases at peak transmission.
    pub fn pmiq_2020() -> Self {
        let v_pi = 1.56 / 0.42;
        Self {
            v_pi,
            bias_points_qrng: vec![0.0; 4],
            bias_points_data: vec![v_pi; 4],
            rf_dc_crosstalk_db: -7.6,
            bias_shift_v: 1.56,
            bias_tolerance_vpi: 0.05,
            dc_lpf_hz: 22e3,
            native_dc_bw_hz: 700e3,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.v_pi > 0.0 && self.v_pi.is_finite()) {
            return Err(domain(format!("v_pi must be positive, got {}", self.v_pi)));
        }
        if !(self.dc_lpf_hz > 0.0 && self.dc_lpf_hz < self.native_dc_bw_hz) {
            return Err(domain(format!(
                "dc_lpf_hz ({}) must be positive and below native_dc_bw_hz ({})",
                self.dc_lpf_hz, self.native_dc_bw_hz
            )));
        }
        if !(self.bias_tolerance_vpi > 0.0 && self.bias_tolerance_vpi < 0.5) {
            return Err(domain(format!(
                "bias_tolerance_vpi must be in (0, 0.5), got {}",
                self.bias_tolerance_vpi
            )));
        }
        if self.bias_points_data.is_empty() || self.bias_points_data.len() != self.bias_points_qrng.len() {
            return Err(domain("bias point sets must be non-empty and of equal length"));
        }
        if !self.rf_dc_crosstalk_db.is_finite() || self.rf_dc_crosstalk_db > 0.0 {
            return Err(domain(format!(
                "rf_dc_crosstalk_db must be <= 0, got {}",
                self.rf_dc_crosstalk_db
            )));
        }
        if let Some(v) = self.bias_points_data.iter().find(|&&v| !self.near_null(v)) {
            return Err(domain(format!(
                "data bias {v} V is more than {} Vπ from a transfer null",
                self.bias_tolerance_vpi
            )));
        }
        Ok(())
    }

    /// True when `v` lies within the bias tolerance of an odd multiple of Vπ.
    pub fn near_null(&self, v: f64) -> bool {
        let x = (v / self.v_pi - 1.0).rem_euclid(2.0);
        x.min(2.0 - x) <= self.bias_tolerance_vpi
    }

    /// First-order time constant of the bias line, 1/(2π·f_c).
    pub fn tau_s(&self) -> f64 {
        1.0 / (2.0 * PI * self.dc_lpf_hz)
    }

    pub fn settle_time_s(&self, settle_fraction: f64) -> Result<f64> {
        if !(settle_fraction > 0.0 && settle_fraction < 1.0) {
            return Err(domain(format!(
                "settle_fraction must be in (0, 1), got {settle_fraction}"
            )));
        }
        Ok(self.tau_s() * (1.0 / settle_fraction).ln())
    }
}

/// p_in·cos²(π·v/(2·Vπ)).
pub fn mzm_power_transfer(v_total: f64, v_pi: f64, p_in_w: f64) -> f64 {
    p_in_w * (PI * v_total / (2.0 * v_pi)).cos().powi(2)
}

#[derive(Clone, Debug, PartialEq)]
pub struct Harmonic {
    pub k: usize,
    pub freq_hz: f64,
    pub power_dbc: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct HarmonicTable {
    pub entries: Vec<Harmonic>,
}

impl HarmonicTable {
    pub fn power_dbc(&self, k: usize) -> Option<f64> {
        self.entries.iter().find(|h| h.k == k).map(|h| h.power_dbc)
    }

    /// Harmonic index of the 0 dBc line.
    pub fn dominant(&self) -> usize {
        self.entries
            .iter()
            .max_by(|a, b| a.power_dbc.total_cmp(&b.power_dbc))
            .map(|h| h.k)
            .unwrap_or(0)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("harmonic,freq_hz,power_dbc\n");
        for h in &self.entries {
            let _ = writeln!(out, "{},{},{:.6}", h.k, h.freq_hz, h.power_dbc);
        }
        out
    }
}

/// Output-power harmonics at k·f_T (k = 1..5) for a tone on the null bias,
/// optionally displaced by the RF-induced shift.
pub fn bias_tone_spectrum(cfg: &ModulatorConfig, tone_amp_v: f64, f_t_hz: f64, rf_on: bool) -> Result<HarmonicTable> {
    cfg.validate()?;
    if !(f_t_hz > 0.0 && f_t_hz.is_finite()) {
        return Err(domain(format!("tone frequency must be positive, got {f_t_hz}")));
    }
    if !(tone_amp_v > 0.0 && tone_amp_v <= MAX_TONE_FRACTION * cfg.v_pi) {
        return Err(domain(format!(
            "tone amplitude {tone_amp_v} V outside the small-signal range (0, {} V]",
            MAX_TONE_FRACTION * cfg.v_pi
        )));
    }
    let shift = if rf_on { cfg.bias_shift_v } else { 0.0 };
    const PER_PERIOD: usize = 256;
    const PERIODS: usize = 4;
    let n = PER_PERIOD * PERIODS;
    let p: Vec<f64> = (0..n)
        .map(|i| {
            let theta = 2.0 * PI * i as f64 / PER_PERIOD as f64;
            mzm_power_transfer(cfg.v_pi + shift + tone_amp_v * theta.sin(), cfg.v_pi, 1.0)
        })
        .collect();
    let powers: Vec<f64> = (1..=HARMONICS)
        .map(|k| {
            let bin = k * PERIODS;
            let x: Complex64 = p
                .iter()
                .enumerate()
                .map(|(i, &v)| v * Complex64::from_polar(1.0, -2.0 * PI * (bin * i) as f64 / n as f64))
                .sum();
            x.norm_sqr()
        })
        .collect();
    let top = powers.iter().cloned().fold(0.0, f64::max);
    let entries = powers
        .iter()
        .enumerate()
        .map(|(i, &pw)| Harmonic {
            k: i + 1,
            freq_hz: (i + 1) as f64 * f_t_hz,
            power_dbc: (10.0 * (pw / top).log10()).max(HARMONIC_FLOOR_DBC),
        })
        .collect();
    Ok(HarmonicTable { entries })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TdmFrame {
    pub period_s: f64,
    pub data_duty: f64,
    pub guard_s: f64,
    pub sample_rate_hz: f64,
}

impl TdmFrame {
    /// 10 ms frames at 70% data duty, 100 µs guard, sampled at 614.4 MSa/s.
    pub fn paper_2020() -> Self {
        Self {
            period_s: 10e-3,
            data_duty: 0.7,
            guard_s: 100e-6,
            sample_rate_hz: 614.4e6,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.period_s > 0.0 && self.sample_rate_hz > 0.0) {
            return Err(domain("period and sample rate must be positive"));
        }
        if !(self.data_duty > 0.0 && self.data_duty < 1.0) {
            return Err(domain(format!("data_duty must be in (0, 1), got {}", self.data_duty)));
        }
        if !(self.guard_s >= 0.0 && 2.0 * self.guard_s < self.qrng_len_s()) {
            return Err(domain(format!(
                "guard {} s must satisfy 2·guard < qrng slot {} s",
                self.guard_s,
                self.qrng_len_s()
            )));
        }
        Ok(())
    }

    pub fn qrng_start_s(&self) -> f64 {
        self.data_duty * self.period_s
    }

    pub fn qrng_len_s(&self) -> f64 {
        (1.0 - self.data_duty) * self.period_s
    }

    /// Index of the first sample at or after time `t`.
    pub fn sample_index(&self, t: f64) -> usize {
        // tolerate representation error in t·fs so exact products stay exact
        let x = t * self.sample_rate_hz;
        let r = x.round();
        if (x - r).abs() < 1e-6 * r.max(1.0) {
            r as usize
        } else {
            x.ceil() as usize
        }
    }

    pub fn samples_per_period(&self) -> usize {
        self.sample_index(self.period_s)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SlotKind {
    Data,
    Qrng,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Slot {
    pub kind: SlotKind,
    pub start_s: f64,
    pub end_s: f64,
}

/// Data slot [0, duty·T) followed by the QRNG slot [duty·T, T).
pub fn tdm_schedule(frame: &TdmFrame) -> Result<Vec<Slot>> {
    frame.validate()?;
    let split = frame.qrng_start_s();
    Ok(vec![
        Slot {
            kind: SlotKind::Data,
            start_s: 0.0,
            end_s: split,
        },
        Slot {
            kind: SlotKind::Qrng,
            start_s: split,
            end_s: frame.period_s,
        },
    ])
}

/// Valid-sample window of one period: indices `[start, end)`.
#[derive(Clone, Debug, PartialEq)]
pub struct SettleMask {
    pub tau_s: f64,
    pub t_settle_s: f64,
    pub samples_per_period: usize,
    pub qrng_start: usize,
    pub start: usize,
    pub end: usize,
}

impl SettleMask {
    pub fn valid_count(&self) -> usize {
        self.end - self.start
    }

    pub fn is_valid(&self, i: usize) -> bool {
        (self.start..self.end).contains(&i)
    }

    pub fn to_bools(&self) -> Vec<bool> {
        (0..self.samples_per_period).map(|i| self.is_valid(i)).collect()
    }

    /// Fraction of the period that yields valid samples (the duty input of the key rate).
    pub fn valid_fraction(&self) -> f64 {
        self.valid_count() as f64 / self.samples_per_period as f64
    }
}

/// Samples are valid from t_settle = τ·ln(1/settle_fraction) after the QRNG
/// slot opens until guard_s before it closes.
pub fn settle_mask(frame: &TdmFrame, cfg: &ModulatorConfig, settle_fraction: f64) -> Result<SettleMask> {
    frame.validate()?;
    cfg.validate()?;
    let t_settle = cfg.settle_time_s(settle_fraction)?;
    let slot = frame.qrng_len_s();
    if t_settle + frame.guard_s >= slot {
        return Err(Error::EmptyMask {
            settle_s: t_settle,
            guard_s: frame.guard_s,
            slot_s: slot,
        });
    }
    let qrng_start = frame.sample_index(frame.qrng_start_s());
    let start = qrng_start + frame.sample_index(t_settle);
    let end = qrng_start + frame.sample_index(slot - frame.guard_s);
    Ok(SettleMask {
        tau_s: cfg.tau_s(),
        t_settle_s: t_settle,
        samples_per_period: frame.samples_per_period(),
        qrng_start,
        start,
        end,
    })
}

/// Data-slot and saturation settings of the frame simulation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TxFrameOptions {
    pub data_symbol_rate_hz: f64,
    pub rolloff: f64,
    pub settle_fraction: f64,
    /// Peak data-slot swing at the TIA output, as a fraction of half the full scale.
    pub data_swing_fs: f64,
}

impl Default for TxFrameOptions {
    fn default() -> Self {
        Self {
            data_symbol_rate_hz: 102.4e6,
            rolloff: 0.2,
            settle_fraction: 0.01,
            data_swing_fs: 0.5,
        }
    }
}

#[derive(Clone, Debug)]
pub struct TxFrame {
    pub sample_rate_hz: f64,
    /// Monitor photodiode power (W).
    pub monitor: Vec<f64>,
    /// TIA output after the ADC (V).
    pub tia: Vec<f64>,
    pub mask: SettleMask,
    pub clip_v: f64,
    pub lit: bool,
}

impl TxFrame {
    pub fn valid_tia(&self) -> &[f64] {
        &self.tia[self.mask.start..self.mask.end]
    }

    /// CSV rows `time_s,monitor,tia,valid_flag`, every `stride`-th sample.
    pub fn to_csv(&self, stride: usize) -> String {
        let stride = stride.max(1);
        let mut out = String::from("time_s,monitor,tia,valid_flag\n");
        for i in (0..self.tia.len()).step_by(stride) {
            let _ = writeln!(
                out,
                "{:e},{:e},{:e},{}",
                i as f64 / self.sample_rate_hz,
                self.monitor[i],
                self.tia[i],
                u8::from(self.mask.is_valid(i))
            );
        }
        out
    }
}

/// Intensity |s(t)|² of a raised-cosine QPSK drive, normalized to unit mean.
fn data_intensity(n: usize, fs: f64, opts: &TxFrameOptions, seed: u64) -> Vec<f64> {
    const SPAN: i64 = 8;
    let ts = 1.0 / opts.data_symbol_rate_hz;
    let n_sym = (n as f64 / fs / ts).ceil() as usize + 1;
    let mut rng = stream(seed, streams::DATA_DRIVE);
    let symbols: Vec<Complex64> = (0..n_sym)
        .map(|_| {
            let r = rng.next_u32();
            map_symbol((r & 1) as u8, (r >> 1 & 1) as u8)
        })
        .collect();
    let mut out: Vec<f64> = (0..n)
        .map(|i| {
            let t = i as f64 / fs / ts;
            let centre = t.round() as i64;
            let s: Complex64 = (centre - SPAN..=centre + SPAN)
                .filter(|&k| k >= 0 && (k as usize) < n_sym)
                .map(|k| symbols[k as usize] * raised_cosine(t - k as f64, opts.rolloff))
                .sum();
            s.norm_sqr()
        })
        .collect();
    let mean = out.iter().sum::<f64>() / n.max(1) as f64;
    if mean > 0.0 {
        out.iter_mut().for_each(|v| *v /= mean);
    }
    out
}

/// One TDM period. The bias follows a first-order step response that starts
/// settled from the previous QRNG slot. While the residual imbalance exceeds
/// the settle fraction the lit TIA is saturated and the output is pinned at
/// the positive rail.
pub fn simulate_tx_frame(
    frontend: &FrontendConfig,
    cfg: &ModulatorConfig,
    frame: &TdmFrame,
    adc: &AdcConfig,
    opts: &TxFrameOptions,
    lit: bool,
    seed: u64,
) -> Result<TxFrame> {
    if frontend.mode != Mode::Transmitter {
        return Err(config("frame simulation needs a transmitter-mode front-end"));
    }
    if (adc.sample_rate_hz - frame.sample_rate_hz).abs() > 1e-9 * frame.sample_rate_hz {
        return Err(config(format!(
            "ADC rate {} Hz differs from the frame rate {} Hz",
            adc.sample_rate_hz, frame.sample_rate_hz
        )));
    }
    if !(opts.data_symbol_rate_hz > 0.0 && (0.0..=1.0).contains(&opts.rolloff) && opts.data_swing_fs >= 0.0) {
        return Err(domain("invalid data-slot options"));
    }
    let mask = settle_mask(frame, cfg, opts.settle_fraction)?;
    let n = mask.samples_per_period;
    let fs = frame.sample_rate_hz;
    let block = simulate_block(frontend, &SidechannelConfig::disabled(), adc, n, lit, seed)?;
    let noise = block.volts();
    let intensity = data_intensity(n, fs, opts, seed);
    let clip_v = f64::from(adc.code_max()) * adc.lsb();
    let coupling = if lit {
        1.0
    } else {
        10f64.powf(cfg.rf_dc_crosstalk_db / 20.0)
    };
    let swing = opts.data_swing_fs * adc.full_scale_v / 2.0 * coupling;
    let alpha = 1.0 - (-1.0 / (fs * cfg.tau_s())).exp();
    let p_rx = frontend.received_power_w();

    // x is the bias position: 0 at the data set, 1 at the QRNG set. The
    // state is not advanced on the sample where the target steps.
    let mut x = 1.0;
    let mut monitor = Vec::with_capacity(n);
    let mut tia = Vec::with_capacity(n);
    for i in 0..n {
        let in_data = i < mask.qrng_start;
        let target = if in_data { 0.0 } else { 1.0 };
        if i > 0 && i != mask.qrng_start {
            x += alpha * (target - x);
        }
        let residual: f64 = (target - x).abs();
        let drive = if in_data { intensity[i] } else { 0.0 };
        monitor.push(p_rx * (x + (1.0 - x) * drive));
        let v = if lit && residual > opts.settle_fraction {
            clip_v
        } else if in_data {
            f64::from(quantize(noise[i] + swing * (intensity[i] - 1.0), adc)) * adc.lsb()
        } else {
            noise[i]
        };
        tia.push(v);
    }
    Ok(TxFrame {
        sample_rate_hz: fs,
        monitor,
        tia,
        mask,
        clip_v,
        lit,
    })
}
