//! Small signal-processing building blocks shared by the simulators.

use num_complex::Complex64;
use rustfft::FftPlanner;
use std::f64::consts::PI;

/// Second-order Butterworth low-pass, bilinear transform with the cutoff
/// prewarped so the digital response is exactly -3 dB at `fc`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Biquad {
    b: [f64; 3],
    a: [f64; 2],
    passthrough: bool,
}

impl Biquad {
    /// A cutoff at or above Nyquist leaves the band unfiltered.
    pub fn butterworth_lowpass(fc: f64, fs: f64) -> Self {
        if fc >= fs / 2.0 {
            return Self {
                b: [1.0, 0.0, 0.0],
                a: [0.0, 0.0],
                passthrough: true,
            };
        }
        let k = (PI * fc / fs).tan();
        let sq2 = std::f64::consts::SQRT_2;
        let norm = 1.0 / (1.0 + sq2 * k + k * k);
        let b0 = k * k * norm;
        Self {
            b: [b0, 2.0 * b0, b0],
            a: [2.0 * (k * k - 1.0) * norm, (1.0 - sq2 * k + k * k) * norm],
            passthrough: false,
        }
    }

    pub fn is_passthrough(&self) -> bool {
        self.passthrough
    }

    /// Direct form II transposed, zero initial state.
    pub fn filter(&self, x: &[f64]) -> Vec<f64> {
        if self.passthrough {
            return x.to_vec();
        }
        let [b0, b1, b2] = self.b;
        let [a1, a2] = self.a;
        let (mut z1, mut z2) = (0.0, 0.0);
        x.iter()
            .map(|&v| {
                let y = b0 * v + z1;
                z1 = b1 * v - a1 * y + z2;
                z2 = b2 * v - a2 * y;
                y
            })
            .collect()
    }

    /// Power response at frequency `f` for sample rate `fs`.
    pub fn power_response(&self, f: f64, fs: f64) -> f64 {
        if self.passthrough {
            return 1.0;
        }
        let z1 = Complex64::from_polar(1.0, -2.0 * PI * f / fs);
        let z2 = z1 * z1;
        let num = self.b[0] + self.b[1] * z1 + self.b[2] * z2;
        let den = 1.0 + self.a[0] * z1 + self.a[1] * z2;
        (num / den).norm_sqr()
    }

    /// Sum of the squared impulse response: the variance gain for white input.
    pub fn noise_gain(&self) -> f64 {
        if self.passthrough {
            return 1.0;
        }
        let [b0, b1, b2] = self.b;
        let [a1, a2] = self.a;
        let (mut z1, mut z2) = (0.0, 0.0);
        let mut acc = 0.0;
        for i in 0..1_000_000 {
            let v = if i == 0 { 1.0 } else { 0.0 };
            let y = b0 * v + z1;
            z1 = b1 * v - a1 * y + z2;
            z2 = b2 * v - a2 * y;
            acc += y * y;
            if i > 16 && y * y < 1e-20 * acc && z1.abs() + z2.abs() < 1e-12 {
                break;
            }
        }
        acc
    }
}

/// Raised-cosine pulse with symbol period 1 evaluated at `t` symbols.
pub fn raised_cosine(t: f64, rolloff: f64) -> f64 {
    let sinc = |x: f64| {
        if x.abs() < 1e-12 {
            1.0
        } else {
            (PI * x).sin() / (PI * x)
        }
    };
    if rolloff <= 0.0 {
        return sinc(t);
    }
    let d = 2.0 * rolloff * t;
    if (d.abs() - 1.0).abs() < 1e-9 {
        return PI / 4.0 * sinc(1.0 / (2.0 * rolloff));
    }
    sinc(t) * (PI * rolloff * t).cos() / (1.0 - d * d)
}

pub fn fft_forward(buf: &mut [Complex64]) {
    FftPlanner::new().plan_fft_forward(buf.len()).process(buf);
}

/// Unnormalized inverse transform.
pub fn fft_inverse(buf: &mut [Complex64]) {
    FftPlanner::new().plan_fft_inverse(buf.len()).process(buf);
}

pub fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Unbiased sample variance.
pub fn variance(x: &[f64]) -> f64 {
    let m = mean(x);
    x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (x.len() as f64 - 1.0)
}

pub fn db_to_lin(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn lin_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

pub fn dbm_to_w(dbm: f64) -> f64 {
    1e-3 * db_to_lin(dbm)
}
