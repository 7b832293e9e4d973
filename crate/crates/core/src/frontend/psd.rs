use super::SampleBlock;
use crate::error::{domain, Result};
use num_complex::Complex64;
use rustfft::FftPlanner;
use std::f64::consts::PI;

/// One-sided power spectral density (V²/Hz) on a uniform grid from DC to Nyquist.
#[derive(Clone, Debug, PartialEq)]
pub struct PsdEstimate {
    pub freqs_hz: Vec<f64>,
    pub psd: Vec<f64>,
    pub segment_len: usize,
    pub n_segments: usize,
}

impl PsdEstimate {
    pub fn resolution_hz(&self) -> f64 {
        self.freqs_hz[1] - self.freqs_hz[0]
    }

    /// Σ psd · Δf, the variance the estimate accounts for.
    pub fn integrated_power(&self) -> f64 {
        self.psd.iter().sum::<f64>() * self.resolution_hz()
    }

    /// Power in the bins `[center - half_width, center + half_width]`.
    pub fn band_power(&self, center: usize, half_width: usize) -> f64 {
        let lo = center.saturating_sub(half_width);
        let hi = (center + half_width).min(self.psd.len() - 1);
        self.psd[lo..=hi].iter().sum::<f64>() * self.resolution_hz()
    }

    pub fn peak_bin(&self) -> usize {
        self.psd
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .map(|(i, _)| i)
            .unwrap_or(0)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("freq_hz,psd_v2_per_hz\n");
        for (f, p) in self.freqs_hz.iter().zip(&self.psd) {
            out.push_str(&format!("{f},{p:e}\n"));
        }
        out
    }
}

/// Welch estimate: Hann window, 50% overlap, per-segment mean removal.
pub fn welch(samples: &[f64], sample_rate_hz: f64, segment_len: usize) -> Result<PsdEstimate> {
    if segment_len < 2 || !segment_len.is_power_of_two() {
        return Err(domain(format!(
            "segment_len must be a power of two >= 2, got {segment_len}"
        )));
    }
    if segment_len > samples.len() {
        return Err(domain(format!(
            "segment_len {segment_len} exceeds block length {}",
            samples.len()
        )));
    }
    let step = segment_len / 2;
    let n_segments = (samples.len() - segment_len) / step + 1;
    let window: Vec<f64> = (0..segment_len)
        .map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / segment_len as f64).cos())
        .collect();
    let w2: f64 = window.iter().map(|w| w * w).sum();
    let fft = FftPlanner::new().plan_fft_forward(segment_len);
    let n_bins = segment_len / 2 + 1;
    let mut acc = vec![0.0; n_bins];
    let mut buf = vec![Complex64::new(0.0, 0.0); segment_len];
    for s in 0..n_segments {
        let seg = &samples[s * step..s * step + segment_len];
        let mean = seg.iter().sum::<f64>() / segment_len as f64;
        for ((b, &x), &w) in buf.iter_mut().zip(seg).zip(&window) {
            *b = Complex64::new((x - mean) * w, 0.0);
        }
        fft.process(&mut buf);
        for (a, z) in acc.iter_mut().zip(&buf) {
            *a += z.norm_sqr();
        }
    }
    let scale = 1.0 / (sample_rate_hz * w2 * n_segments as f64);
    let psd: Vec<f64> = acc
        .iter()
        .enumerate()
        .map(|(k, &p)| {
            let one_sided = if k == 0 || k == n_bins - 1 { 1.0 } else { 2.0 };
            p * scale * one_sided
        })
        .collect();
    let freqs_hz = (0..n_bins)
        .map(|k| k as f64 * sample_rate_hz / segment_len as f64)
        .collect();
    Ok(PsdEstimate {
        freqs_hz,
        psd,
        segment_len,
        n_segments,
    })
}

/// PSD of a block in volts.
pub fn psd_estimate(block: &SampleBlock, segment_len: usize) -> Result<PsdEstimate> {
    welch(&block.volts(), block.adc().sample_rate_hz, segment_len)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::{default_full_scale, simulate_block, AdcConfig, FrontendConfig, SidechannelConfig};
    use crate::rng::stream;
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn white(n: usize, sigma: f64, seed: u64) -> Vec<f64> {
        let mut rng = stream(seed, 0);
        (0..n).map(|_| sigma * rng.sample::<f64, _>(StandardNormal)).collect()
    }

    #[test]
    fn white_noise_level_and_parseval() {
        let fs = 1e6;
        let sigma2: f64 = 4.0;
        let x = white(1 << 17, sigma2.sqrt(), 1);
        let est = welch(&x, fs, 512).unwrap();
        assert!(est.n_segments >= 256);
        let interior = &est.psd[1..est.psd.len() - 1];
        let level = interior.iter().sum::<f64>() / interior.len() as f64;
        assert!((level / (sigma2 / (fs / 2.0)) - 1.0).abs() < 0.03);
        assert!((est.integrated_power() / sigma2 - 1.0).abs() < 0.05);
    }

    #[test]
    fn tone_power() {
        let fs = 1024.0;
        let a = 3.0;
        let x: Vec<f64> = (0..1 << 16)
            .map(|i| a * (2.0 * PI * 100.25 * i as f64 / fs).sin())
            .collect();
        let est = welch(&x, fs, 1024).unwrap();
        let peak = est.peak_bin();
        assert!((est.freqs_hz[peak] - 100.0).abs() <= 1.0);
        let p = est.band_power(peak, 4);
        assert!((p / (a * a / 2.0) - 1.0).abs() < 0.02);
    }

    #[test]
    fn rejects_bad_segments() {
        let x = vec![0.0; 100];
        assert!(welch(&x, 1.0, 128).is_err());
        assert!(welch(&x, 1.0, 48).is_err());
    }

    #[test]
    fn spur_shows_at_quarter_rate() {
        let fe = FrontendConfig::receiver_2020();
        let adc = AdcConfig {
            sample_rate_hz: 40e9,
            bits: 8,
            full_scale_v: default_full_scale(&fe, 40e9),
            interleave_spur_dbc: -20.0,
        };
        let block = simulate_block(&fe, &SidechannelConfig::disabled(), &adc, 1 << 18, true, 3).unwrap();
        let est = psd_estimate(&block, 1024).unwrap();
        assert_eq!(est.freqs_hz[est.peak_bin()], 10e9);
    }

    #[test]
    fn side_channel_leakage_depends_on_cmrr() {
        use crate::frontend::Cmrr;
        let mut fe = FrontendConfig::receiver_2020();
        let adc = AdcConfig {
            sample_rate_hz: 40e9,
            bits: 8,
            full_scale_v: default_full_scale(&fe, 40e9),
            interleave_spur_dbc: f64::NEG_INFINITY,
        };
        let n = 1 << 19;
        let floor = psd_estimate(
            &simulate_block(&fe, &SidechannelConfig::disabled(), &adc, n, false, 8).unwrap(),
            1024,
        )
        .unwrap();
        let side = SidechannelConfig::receiver_2020();
        let worst_ratio = |fe: &FrontendConfig| {
            let leaky = psd_estimate(&simulate_block(fe, &side, &adc, n, false, 8).unwrap(), 1024).unwrap();
            leaky
                .psd
                .iter()
                .zip(&floor.psd)
                .skip(1)
                .map(|(l, f)| 10.0 * (l / f).log10())
                .fold(f64::NEG_INFINITY, f64::max)
        };
        fe.cmrr_db = Cmrr::Scalar(9.5);
        let degraded = worst_ratio(&fe);
        fe.cmrr_db = Cmrr::Scalar(34.0);
        let nominal = worst_ratio(&fe);
        assert!(degraded > 1.0, "9.5 dB CMRR leakage only {degraded} dB above floor");
        assert!(nominal < 1.0, "34 dB CMRR leakage {nominal} dB above floor");
    }
}
