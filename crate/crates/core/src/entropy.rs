//! Variance decomposition, min-entropy of the quantized quantum noise,
//! extractable length and key rates.

use crate::error::{domain, Error, Result};
use crate::frontend::{AdcConfig, SampleBlock};
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;
use std::f64::consts::SQRT_2;

/// Shortest block accepted by [`variance_decompose`].
pub const MIN_DECOMPOSE_LEN: usize = 1 << 16;

/// Offsets per LSB on the worst-case grid.
pub const WORST_CASE_GRID: usize = 64;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct VarianceDecomposition {
    pub sigma2_total: f64,
    pub sigma2_electrical: f64,
    pub sigma2_quantum: f64,
    pub clearance_db: f64,
}

impl VarianceDecomposition {
    pub fn new(sigma2_total: f64, sigma2_electrical: f64) -> Result<Self> {
        if !(sigma2_electrical > 0.0) {
            return Err(Error::Estimation(format!(
                "electrical variance must be positive, got {sigma2_electrical}"
            )));
        }
        let sigma2_quantum = sigma2_total - sigma2_electrical;
        if sigma2_quantum < 0.0 {
            return Err(Error::Estimation(format!(
                "lit variance {sigma2_total:e} V² is below dark variance {sigma2_electrical:e} V²"
            )));
        }
        Ok(Self {
            sigma2_total,
            sigma2_electrical,
            sigma2_quantum,
            clearance_db: 10.0 * (sigma2_total / sigma2_electrical).log10(),
        })
    }
}

/// Splits the lit variance into electrical (dark) and quantum parts.
pub fn variance_decompose(dark: &SampleBlock, lit: &SampleBlock) -> Result<VarianceDecomposition> {
    if dark.lit() {
        return Err(domain("dark block is flagged lit"));
    }
    if !lit.lit() {
        return Err(domain("lit block is flagged dark"));
    }
    for b in [dark, lit] {
        if b.len() < MIN_DECOMPOSE_LEN {
            return Err(Error::TooShort {
                needed: MIN_DECOMPOSE_LEN,
                got: b.len(),
            });
        }
    }
    let (a, b) = (dark.adc(), lit.adc());
    if a.bits != b.bits || a.sample_rate_hz != b.sample_rate_hz || a.full_scale_v != b.full_scale_v {
        return Err(domain("dark and lit blocks come from different ADC settings"));
    }
    if dark.frontend_tag() != lit.frontend_tag() {
        return Err(domain(format!(
            "dark and lit blocks come from different front-ends ({} vs {})",
            dark.frontend_tag(),
            lit.frontend_tag()
        )));
    }
    VarianceDecomposition::new(lit.variance_v2(), dark.variance_v2())
}

/// P(a < X < b) for X ~ N(mu, sigma²), evaluated on the tail nearer to the
/// interval to keep relative accuracy far from the mean.
fn gaussian_interval(a: f64, b: f64, mu: f64, sigma: f64) -> f64 {
    let za = (a - mu) / (sigma * SQRT_2);
    let zb = (b - mu) / (sigma * SQRT_2);
    let p = if za >= 0.0 {
        0.5 * (erfc(za) - erfc(zb))
    } else if zb <= 0.0 {
        0.5 * (erfc(-zb) - erfc(-za))
    } else {
        1.0 - 0.5 * (erfc(-za) + erfc(zb))
    };
    p.max(0.0)
}

/// Probabilities of every ADC code for a Gaussian input; the end codes
/// collect the tails beyond the rails.
pub fn bin_probabilities(mu: f64, sigma: f64, adc: &AdcConfig) -> Vec<f64> {
    let lsb = adc.lsb();
    let (lo, hi) = (adc.code_min(), adc.code_max());
    (lo..=hi)
        .map(|c| {
            let a = if c == lo {
                f64::NEG_INFINITY
            } else {
                (f64::from(c) - 0.5) * lsb
            };
            let b = if c == hi {
                f64::INFINITY
            } else {
                (f64::from(c) + 0.5) * lsb
            };
            gaussian_interval(a, b, mu, sigma)
        })
        .collect()
}

/// -log2 of the largest probability.
pub fn min_entropy_of(probs: &[f64]) -> f64 {
    let p = probs.iter().copied().fold(0.0, f64::max);
    -p.log2()
}

fn max_bin_probability(mu: f64, sigma: f64, adc: &AdcConfig) -> f64 {
    // For a unimodal density the maximum is the bin holding the mean, a
    // neighbour of it, or a rail bin collecting tail mass.
    let lsb = adc.lsb();
    let (lo, hi) = (adc.code_min(), adc.code_max());
    let centre = ((mu / lsb).round() as i64).clamp(i64::from(lo), i64::from(hi)) as i32;
    let mut best = 0.0f64;
    for c in [lo, hi].into_iter().chain((centre - 1).max(lo)..=(centre + 1).min(hi)) {
        let a = if c == lo {
            f64::NEG_INFINITY
        } else {
            (f64::from(c) - 0.5) * lsb
        };
        let b = if c == hi {
            f64::INFINITY
        } else {
            (f64::from(c) + 0.5) * lsb
        };
        best = best.max(gaussian_interval(a, b, mu, sigma));
    }
    best
}

/// Min-entropy (bits) of the quantized N(μ, σ²) quantum component.
///
/// With `worst_case_offset`, μ ranges over 64 offsets spanning one LSB plus
/// ±FS/2, where an adversary-controlled classical offset pushes the signal
/// into a saturation bin; the minimum is returned. Otherwise μ = 0.
pub fn min_entropy_per_sample(sigma_quantum_v: f64, adc: &AdcConfig, worst_case_offset: bool) -> Result<f64> {
    if !(sigma_quantum_v > 0.0 && sigma_quantum_v.is_finite()) {
        return Err(domain(format!("sigma must be > 0, got {sigma_quantum_v}")));
    }
    adc.validate()?;
    let lsb = adc.lsb();
    let mut p_max = max_bin_probability(0.0, sigma_quantum_v, adc);
    if worst_case_offset {
        for j in 1..WORST_CASE_GRID {
            let mu = j as f64 * lsb / WORST_CASE_GRID as f64;
            p_max = p_max.max(max_bin_probability(mu, sigma_quantum_v, adc));
        }
        for mu in [adc.full_scale_v / 2.0, -adc.full_scale_v / 2.0] {
            p_max = p_max.max(max_bin_probability(mu, sigma_quantum_v, adc));
        }
    }
    Ok(-p_max.min(1.0).log2())
}

/// Whether the leftover-hash security deduction applies.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LengthMode {
    /// floor(n·h − 2·log2(1/ε))
    Secure,
    /// floor(n·h), reproducing published block sizes without a security margin.
    Paper,
}

/// Leftover-hash output length in bits.
pub fn extractable_length(n_samples: u64, hmin_per_sample: f64, epsilon: f64, mode: LengthMode) -> Result<u64> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(domain(format!("epsilon must be in (0, 1), got {epsilon}")));
    }
    if !(hmin_per_sample >= 0.0 && hmin_per_sample.is_finite()) {
        return Err(domain(format!("min-entropy must be >= 0, got {hmin_per_sample}")));
    }
    let mut bits = n_samples as f64 * hmin_per_sample;
    if mode == LengthMode::Secure {
        bits -= 2.0 * (1.0 / epsilon).log2();
    }
    let len = bits.floor();
    if len <= 0.0 {
        return Err(Error::InsufficientEntropy(format!(
            "{n_samples} samples at {hmin_per_sample} bits each leave {len} extractable bits"
        )));
    }
    Ok(len as u64)
}

/// Whether the min-entropy figure counts per ADC sample or per serialized raw bit.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EntropyConvention {
    PerSample,
    PerRawBit,
}

/// Geometry and budget of one extraction.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExtractionPlan {
    pub n_samples: u64,
    pub bits_per_sample_raw: u32,
    /// Min-entropy per sample, whatever convention the input figure used.
    pub hmin_per_sample: f64,
    pub epsilon: f64,
    pub mode: LengthMode,
    pub m_out: u64,
}

impl ExtractionPlan {
    /// Builds a plan with the largest admissible output. `hmin` is read
    /// according to `convention`.
    pub fn new(
        n_samples: u64,
        bits_per_sample_raw: u32,
        hmin: f64,
        convention: EntropyConvention,
        epsilon: f64,
        mode: LengthMode,
    ) -> Result<Self> {
        if !(1..=16).contains(&bits_per_sample_raw) {
            return Err(domain(format!(
                "raw bits per sample must be in [1, 16], got {bits_per_sample_raw}"
            )));
        }
        let hmin_per_sample = match convention {
            EntropyConvention::PerSample => hmin,
            EntropyConvention::PerRawBit => hmin * f64::from(bits_per_sample_raw),
        };
        if hmin_per_sample > f64::from(bits_per_sample_raw) {
            return Err(domain(format!(
                "min-entropy {hmin_per_sample} exceeds {bits_per_sample_raw} raw bits per sample"
            )));
        }
        let m_out = extractable_length(n_samples, hmin_per_sample, epsilon, mode)?;
        Ok(Self {
            n_samples,
            bits_per_sample_raw,
            hmin_per_sample,
            epsilon,
            mode,
            m_out,
        })
    }

    /// Serialized input length n = n_samples × bits.
    pub fn input_bits(&self) -> u64 {
        self.n_samples * u64::from(self.bits_per_sample_raw)
    }

    /// Checks `m_out` against the leftover-hash bound.
    pub fn validate(&self) -> Result<()> {
        let bound = extractable_length(self.n_samples, self.hmin_per_sample, self.epsilon, self.mode)?;
        if self.m_out == 0 || self.m_out > bound {
            return Err(domain(format!("m_out {} outside [1, {bound}]", self.m_out)));
        }
        if self.m_out > self.input_bits() {
            return Err(domain("m_out exceeds the input length"));
        }
        Ok(())
    }
}

/// Keys per second: duty · f_s · h / L.
pub fn key_rate(sample_rate_hz: f64, hmin_per_sample: f64, key_len_bits: u32, duty: f64) -> Result<f64> {
    if key_len_bits == 0 {
        return Err(domain("key length must be > 0"));
    }
    if !(0.0..=1.0).contains(&duty) {
        return Err(domain(format!("duty must be in [0, 1], got {duty}")));
    }
    Ok(duty * sample_rate_hz * hmin_per_sample / f64::from(key_len_bits))
}

/// Sample rate needed for `keys_per_s` (the inverse of [`key_rate`]).
pub fn sample_rate_for_key_rate(keys_per_s: f64, hmin_per_sample: f64, key_len_bits: u32, duty: f64) -> Result<f64> {
    if !(duty > 0.0 && duty <= 1.0) || !(hmin_per_sample > 0.0) {
        return Err(domain("duty and min-entropy must be positive"));
    }
    Ok(keys_per_s * f64::from(key_len_bits) / (duty * hmin_per_sample))
}
