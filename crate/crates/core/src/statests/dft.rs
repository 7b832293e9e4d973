use super::{check_nonempty, erfc};
use crate::error::Result;
use num_complex::Complex64;
use rustfft::FftPlanner;
use std::f64::consts::SQRT_2;

/// Spectral test: fraction of DFT peaks below the 95% threshold, with the
/// corrected variance n·0.95·0.05/4.
pub fn dft(bits: &[u8]) -> Result<f64> {
    check_nonempty(bits)?;
    let n = bits.len();
    let mut buf: Vec<Complex64> = bits
        .iter()
        .map(|&b| Complex64::new(if b == 1 { 1.0 } else { -1.0 }, 0.0))
        .collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let nf = n as f64;
    let t = ((1.0f64 / 0.05).ln() * nf).sqrt();
    let n0 = 0.95 * nf / 2.0;
    let n1 = buf[..n / 2].iter().filter(|z| z.norm() < t).count() as f64;
    let d = (n1 - n0) / (nf * 0.95 * 0.05 / 4.0).sqrt();
    Ok(erfc(d.abs() / SQRT_2))
}
