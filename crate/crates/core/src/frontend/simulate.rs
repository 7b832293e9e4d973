use super::{Cmrr, FrontendConfig};
use crate::dsp::{db_to_lin, dbm_to_w, fft_forward, fft_inverse, raised_cosine};
use crate::error::{domain, Result};
use crate::rng::{stream, streams};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_1_SQRT_2, PI};

/// Clip fraction above which a block carries a warning.
pub const CLIP_WARNING_FRACTION: f64 = 0.01;

/// Samples discarded at the start of the detector filter so its state is stationary.
const FILTER_WARMUP: usize = 256;

/// Pulse truncation, in symbols on each side of the peak.
const PULSE_SPAN: i64 = 8;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdcConfig {
    pub sample_rate_hz: f64,
    pub bits: u32,
    /// Peak-to-peak input range (V).
    pub full_scale_v: f64,
    /// Spur at `sample_rate_hz / 4` relative to the in-band noise power;
    /// `-inf` disables it.
    pub interleave_spur_dbc: f64,
}

impl AdcConfig {
    pub fn validate(&self) -> Result<()> {
        if !(2..=16).contains(&self.bits) {
            return Err(domain(format!("ADC bits must be in [2, 16], got {}", self.bits)));
        }
        if !(self.sample_rate_hz > 0.0 && self.sample_rate_hz.is_finite()) {
            return Err(domain("sample_rate_hz must be > 0"));
        }
        if !(self.full_scale_v > 0.0 && self.full_scale_v.is_finite()) {
            return Err(domain("full_scale_v must be > 0"));
        }
        if self.interleave_spur_dbc.is_nan() || self.interleave_spur_dbc == f64::INFINITY {
            return Err(domain("interleave_spur_dbc must be finite or -inf"));
        }
        Ok(())
    }

    pub fn lsb(&self) -> f64 {
        self.full_scale_v / f64::from(1u32 << self.bits)
    }

    pub fn code_min(&self) -> i32 {
        -(1 << (self.bits - 1))
    }

    pub fn code_max(&self) -> i32 {
        (1 << (self.bits - 1)) - 1
    }

    pub fn spur_frequency_hz(&self) -> f64 {
        self.sample_rate_hz / 4.0
    }

    pub fn spur_enabled(&self) -> bool {
        self.interleave_spur_dbc.is_finite()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SideChannel {
    pub power_dbm: f64,
    pub symbol_rate_hz: f64,
    pub rolloff: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SidechannelConfig {
    pub enabled: bool,
    #[serde(default)]
    pub channels: Vec<SideChannel>,
}

impl SidechannelConfig {
    pub fn disabled() -> Self {
        Self::default()
    }

    /// One 10 Gbaud neighbour at -15.4 dBm.
    pub fn receiver_2020() -> Self {
        Self {
            enabled: true,
            channels: vec![SideChannel {
                power_dbm: -15.4,
                symbol_rate_hz: 10e9,
                rolloff: 0.2,
            }],
        }
    }

    pub fn validate(&self) -> Result<()> {
        for ch in &self.channels {
            if !(ch.symbol_rate_hz > 0.0 && ch.symbol_rate_hz.is_finite()) {
                return Err(domain("side-channel symbol_rate_hz must be > 0"));
            }
            if !(0.0..=1.0).contains(&ch.rolloff) {
                return Err(domain("side-channel rolloff must be in [0, 1]"));
            }
            if !ch.power_dbm.is_finite() {
                return Err(domain("side-channel power_dbm must be finite"));
            }
        }
        Ok(())
    }
}

/// A run of quantized samples with its acquisition metadata.
#[derive(Clone, Debug, PartialEq)]
pub struct SampleBlock {
    samples: Vec<i16>,
    adc: AdcConfig,
    frontend_tag: String,
    lit: bool,
    rng_seed_used: u64,
    clip_fraction: f64,
}

impl SampleBlock {
    pub fn new(
        samples: Vec<i16>,
        adc: AdcConfig,
        frontend_tag: impl Into<String>,
        lit: bool,
        rng_seed_used: u64,
    ) -> Result<Self> {
        adc.validate()?;
        if samples.is_empty() {
            return Err(domain("a sample block cannot be empty"));
        }
        let (lo, hi) = (adc.code_min(), adc.code_max());
        if let Some((i, s)) = samples
            .iter()
            .enumerate()
            .find(|(_, &s)| !(lo..=hi).contains(&i32::from(s)))
        {
            return Err(domain(format!(
                "sample {i} = {s} outside [{lo}, {hi}] for {}-bit ADC",
                adc.bits
            )));
        }
        Ok(Self {
            samples,
            adc,
            frontend_tag: frontend_tag.into(),
            lit,
            rng_seed_used,
            clip_fraction: 0.0,
        })
    }

    pub fn samples(&self) -> &[i16] {
        &self.samples
    }

    pub fn adc(&self) -> &AdcConfig {
        &self.adc
    }

    pub fn frontend_tag(&self) -> &str {
        &self.frontend_tag
    }

    pub fn lit(&self) -> bool {
        self.lit
    }

    pub fn rng_seed_used(&self) -> u64 {
        self.rng_seed_used
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Fraction of pre-quantization values that hit a rail (0 for ingested blocks).
    pub fn clip_fraction(&self) -> f64 {
        self.clip_fraction
    }

    pub fn clip_warning(&self) -> bool {
        self.clip_fraction > CLIP_WARNING_FRACTION
    }

    /// Samples converted back to volts.
    pub fn volts(&self) -> Vec<f64> {
        let lsb = self.adc.lsb();
        self.samples.iter().map(|&s| f64::from(s) * lsb).collect()
    }

    /// Unbiased sample variance in V².
    pub fn variance_v2(&self) -> f64 {
        let n = self.samples.len() as f64;
        let (mut s1, mut s2) = (0.0f64, 0.0f64);
        for &s in &self.samples {
            let v = f64::from(s);
            s1 += v;
            s2 += v * v;
        }
        let var = (s2 - s1 * s1 / n) / (n - 1.0);
        var * self.adc.lsb() * self.adc.lsb()
    }
}

/// Mid-tread quantizer with saturation.
pub fn quantize(value_v: f64, adc: &AdcConfig) -> i32 {
    quantize_flagged(value_v, adc).0
}

fn quantize_flagged(value_v: f64, adc: &AdcConfig) -> (i32, bool) {
    let code = (value_v / adc.lsb()).round();
    let (lo, hi) = (f64::from(adc.code_min()), f64::from(adc.code_max()));
    if code > hi {
        (adc.code_max(), true)
    } else if code < lo {
        (adc.code_min(), true)
    } else {
        (code as i32, false)
    }
}

/// Expected noise variance at the ADC input (V²), without side channels or spur.
pub fn expected_noise_variance(frontend: &FrontendConfig, sample_rate_hz: f64, lit: bool) -> f64 {
    let nyquist = sample_rate_hz / 2.0;
    let mut var = frontend.electrical_noise_psd * nyquist;
    if lit {
        var += frontend.quantum_voltage_psd() * frontend.detector_filter(sample_rate_hz).noise_gain() * nyquist;
    }
    var
}

/// Full scale of 16 lit-noise standard deviations (±8σ).
pub fn default_full_scale(frontend: &FrontendConfig, sample_rate_hz: f64) -> f64 {
    16.0 * expected_noise_variance(frontend, sample_rate_hz, true).sqrt()
}

/// Mean-free intensity of one pulse-shaped QPSK stream, normalized to unit mean
/// before the mean is removed.
fn side_channel_intensity(ch: &super::simulate::SideChannel, fs: f64, n: usize, seed: u64, index: usize) -> Vec<f64> {
    let mut rng = stream(seed, streams::SIDE_CHANNEL_BASE + index as u64);
    let sps = fs / ch.symbol_rate_hz;
    let n_sym = (n as f64 / sps).ceil() as usize + 2 * PULSE_SPAN as usize + 2;
    let symbols: Vec<Complex64> = (0..n_sym)
        .map(|_| {
            let b: u8 = rng.random_range(0..4);
            let re = if b & 1 == 0 { 1.0 } else { -1.0 };
            let im = if b & 2 == 0 { 1.0 } else { -1.0 };
            Complex64::new(re, im) * FRAC_1_SQRT_2
        })
        .collect();
    // Symbol k sits at time (k - PULSE_SPAN) / Rs.
    let offset = PULSE_SPAN;
    let rounded = sps.round();
    let mut field = vec![Complex64::new(0.0, 0.0); n];
    if (sps - rounded).abs() < 1e-9 && rounded >= 1.0 {
        let sps = rounded as usize;
        let taps: Vec<Vec<f64>> = (0..sps)
            .map(|phase| {
                (-PULSE_SPAN..=PULSE_SPAN)
                    .map(|j| raised_cosine(phase as f64 / sps as f64 - j as f64, ch.rolloff))
                    .collect()
            })
            .collect();
        for (i, out) in field.iter_mut().enumerate() {
            let (kc, phase) = (i / sps, i % sps);
            let mut acc = Complex64::new(0.0, 0.0);
            for (t, &h) in taps[phase].iter().enumerate() {
                // j = t - PULSE_SPAN, symbol index kc + j + offset
                acc += symbols[kc + t] * h;
            }
            *out = acc;
        }
    } else {
        for (i, out) in field.iter_mut().enumerate() {
            let t = i as f64 / sps;
            let kc = t.floor() as i64;
            let mut acc = Complex64::new(0.0, 0.0);
            for k in (kc - PULSE_SPAN)..=(kc + PULSE_SPAN) {
                let idx = (k + offset) as usize;
                acc += symbols[idx] * raised_cosine(t - k as f64, ch.rolloff);
            }
            *out = acc;
        }
    }
    let intensity: Vec<f64> = field.iter().map(|z| z.norm_sqr()).collect();
    let mean = intensity.iter().sum::<f64>() / n as f64;
    intensity.iter().map(|v| v / mean - 1.0).collect()
}

fn apply_cmrr(signal: &mut [f64], cmrr: &Cmrr, fs: f64) {
    if cmrr.is_flat() {
        let g = 10f64.powf(-cmrr.db_at(1.0) / 20.0);
        signal.iter_mut().for_each(|v| *v *= g);
        return;
    }
    let n = signal.len();
    let mut buf: Vec<Complex64> = signal.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    fft_forward(&mut buf);
    for (k, z) in buf.iter_mut().enumerate() {
        let bin = k.min(n - k);
        let f = bin as f64 * fs / n as f64;
        *z *= 10f64.powf(-cmrr.db_at(f) / 20.0);
    }
    fft_inverse(&mut buf);
    for (v, z) in signal.iter_mut().zip(&buf) {
        *v = z.re / n as f64;
    }
}

/// Simulates `n_samples` ADC samples of the front-end.
///
/// Quantum noise (lit only) and side-channel leakage pass through the
/// detector response; electrical noise and the interleave spur are added at
/// the ADC input. The result is a pure function of the arguments.
pub fn simulate_block(
    frontend: &FrontendConfig,
    side: &SidechannelConfig,
    adc: &AdcConfig,
    n_samples: usize,
    lit: bool,
    rng_seed: u64,
) -> Result<SampleBlock> {
    frontend.validate()?;
    side.validate()?;
    adc.validate()?;
    if n_samples < 2 {
        return Err(domain(format!("n_samples must be >= 2, got {n_samples}")));
    }
    let fs = adc.sample_rate_hz;
    let nyquist = fs / 2.0;
    let total = n_samples + FILTER_WARMUP;

    let mut optical = vec![0.0; total];
    if lit {
        let sigma_q = (frontend.quantum_voltage_psd() * nyquist).sqrt();
        let mut rng = stream(rng_seed, streams::QUANTUM);
        for v in optical.iter_mut() {
            let z: f64 = rng.sample(StandardNormal);
            *v = sigma_q * z;
        }
    }
    if side.enabled {
        let g = frontend.transimpedance_ohm();
        for (i, ch) in side.channels.iter().enumerate() {
            let mut leak = side_channel_intensity(ch, fs, total, rng_seed, i);
            apply_cmrr(&mut leak, &frontend.cmrr_db, fs);
            let scale = frontend.responsivity * dbm_to_w(ch.power_dbm) * g;
            for (o, l) in optical.iter_mut().zip(&leak) {
                *o += scale * l;
            }
        }
    }
    let filtered = frontend.detector_filter(fs).filter(&optical);
    let mut analog = filtered[FILTER_WARMUP..].to_vec();

    let sigma_e = (frontend.electrical_noise_psd * nyquist).sqrt();
    let mut rng = stream(rng_seed, streams::ELECTRICAL);
    for v in analog.iter_mut() {
        let z: f64 = rng.sample(StandardNormal);
        *v += sigma_e * z;
    }

    if adc.spur_enabled() {
        let power = expected_noise_variance(frontend, fs, lit) * db_to_lin(adc.interleave_spur_dbc);
        let amp = (2.0 * power).sqrt();
        let phase = stream(rng_seed, streams::SPUR).random_range(0.0..2.0 * PI);
        for (i, v) in analog.iter_mut().enumerate() {
            *v += amp * (PI / 2.0 * (i % 4) as f64 + phase).cos();
        }
    }

    let mut clipped = 0usize;
    let samples: Vec<i16> = analog
        .iter()
        .map(|&v| {
            let (code, clip) = quantize_flagged(v, adc);
            clipped += usize::from(clip);
            code as i16
        })
        .collect();
    let mut block = SampleBlock::new(samples, adc.clone(), frontend.tag(), lit, rng_seed)?;
    block.clip_fraction = clipped as f64 / n_samples as f64;
    Ok(block)
}
