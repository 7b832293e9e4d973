//! Desk-scale PM-QPSK link: Gray mapping, AWGN plus laser impairments,
//! fourth-power frequency-offset estimation, Viterbi-Viterbi carrier-phase
//! recovery and hard decisions.

use crate::dsp::fft_forward;
use crate::error::{domain, Error, Result};
use crate::rng::{stream, streams};
use num_complex::Complex64;
use rand::{Rng, RngCore};
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2, PI};
use std::fmt::Write as _;

pub const MIN_TRAINING: usize = 16;
pub const MIN_OFFSET_SYMBOLS: usize = 1 << 14;
pub const MIN_BER_BITS: usize = 100_000;
/// Expected error count below which a BER target is refused.
pub const MIN_EXPECTED_ERRORS: f64 = 10.0;
/// Hard-decision FEC threshold.
pub const FEC_THRESHOLD: f64 = 3.8e-3;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LinkConfig {
    pub symbol_rate_hz: f64,
    pub n_pols: usize,
    pub esn0_db: f64,
    pub freq_offset_hz: f64,
    pub linewidth_hz: f64,
    pub cpr_window: usize,
    pub training_len: usize,
}

impl Default for LinkConfig {
    fn default() -> Self {
        Self {
            symbol_rate_hz: 10e9,
            n_pols: 2,
            esn0_db: 10.0,
            freq_offset_hz: 0.0,
            linewidth_hz: 0.0,
            cpr_window: 33,
            training_len: 64,
        }
    }
}

impl LinkConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.symbol_rate_hz > 0.0 && self.symbol_rate_hz.is_finite()) {
            return Err(domain(format!(
                "symbol rate must be positive, got {}",
                self.symbol_rate_hz
            )));
        }
        if !(1..=2).contains(&self.n_pols) {
            return Err(domain(format!("n_pols must be 1 or 2, got {}", self.n_pols)));
        }
        if self.esn0_db.is_nan() || self.linewidth_hz < 0.0 || !self.linewidth_hz.is_finite() {
            return Err(domain(
                "esn0_db must be a number and linewidth_hz finite and non-negative",
            ));
        }
        if self.freq_offset_hz.abs() >= self.symbol_rate_hz / 8.0 {
            return Err(Error::Ambiguity(format!(
                "frequency offset {} Hz outside the fourth-power range ±{} Hz",
                self.freq_offset_hz,
                self.symbol_rate_hz / 8.0
            )));
        }
        if self.cpr_window < 3 || self.cpr_window % 2 == 0 {
            return Err(domain(format!(
                "cpr_window must be odd and >= 3, got {}",
                self.cpr_window
            )));
        }
        if self.training_len < MIN_TRAINING {
            return Err(domain(format!(
                "training_len must be >= {MIN_TRAINING}, got {}",
                self.training_len
            )));
        }
        Ok(())
    }

    pub fn symbol_period_s(&self) -> f64 {
        1.0 / self.symbol_rate_hz
    }

    /// Sets Es/N0 from Eb/N0 (two bits per symbol).
    pub fn with_ebn0_db(mut self, ebn0_db: f64) -> Self {
        self.esn0_db = ebn0_to_esn0_db(ebn0_db);
        self
    }
}

/// Affine map from received optical power to Es/N0; the receiver noise
/// figure that fixes it is user-supplied.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PowerMap {
    pub esn0_db_at_0dbm: f64,
    pub slope_db_per_db: f64,
}

impl PowerMap {
    pub fn esn0_db(&self, power_dbm: f64) -> f64 {
        self.esn0_db_at_0dbm + self.slope_db_per_db * power_dbm
    }

    pub fn power_dbm(&self, esn0_db: f64) -> Result<f64> {
        if self.slope_db_per_db == 0.0 || !self.slope_db_per_db.is_finite() {
            return Err(domain("power map slope must be finite and nonzero"));
        }
        Ok((esn0_db - self.esn0_db_at_0dbm) / self.slope_db_per_db)
    }
}

pub fn ebn0_to_esn0_db(ebn0_db: f64) -> f64 {
    ebn0_db + 10.0 * 2f64.log10()
}

pub fn esn0_to_ebn0_db(esn0_db: f64) -> f64 {
    esn0_db - 10.0 * 2f64.log10()
}

/// Gray mapping: bits (b0, b1) → ((1 − 2·b0) + j(1 − 2·b1))/√2.
pub fn map_symbol(b0: u8, b1: u8) -> Complex64 {
    Complex64::new(1.0 - 2.0 * f64::from(b0), 1.0 - 2.0 * f64::from(b1)) * FRAC_1_SQRT_2
}

/// Maps bits (one byte per bit) to symbols. The bit sequence is split into
/// `n_pols` equal contiguous parts, one per polarization.
pub fn qpsk_modulate(bits: &[u8], n_pols: usize) -> Result<Vec<Vec<Complex64>>> {
    if n_pols == 0 {
        return Err(domain("n_pols must be positive"));
    }
    if bits.len() % (2 * n_pols) != 0 {
        return Err(domain(format!(
            "{} bits do not split into whole symbols over {n_pols} polarization(s)",
            bits.len()
        )));
    }
    let per_pol = bits.len() / n_pols;
    Ok(bits
        .chunks(per_pol.max(1))
        .take(n_pols)
        .map(|part| part.chunks_exact(2).map(|p| map_symbol(p[0], p[1])).collect())
        .collect())
}

/// Hard decision back to bits.
pub fn qpsk_demodulate(symbols: &[Complex64]) -> Vec<u8> {
    symbols
        .iter()
        .flat_map(|s| [u8::from(s.re < 0.0), u8::from(s.im < 0.0)])
        .collect()
}

fn pol_stream(seed: u64, base: u64, pol: usize) -> crate::rng::SimRng {
    stream(seed, base + streams::POLARIZATION_BASE * (pol as u64 + 1))
}

/// Applies frequency offset, Wiener phase noise and complex AWGN at the
/// configured Es/N0 (unit symbol energy assumed).
pub fn channel_apply(symbols: &[Complex64], cfg: &LinkConfig, pol: usize, seed: u64) -> Vec<Complex64> {
    let t = cfg.symbol_period_s();
    let n0 = 10f64.powf(-cfg.esn0_db / 10.0);
    let sigma = (n0 / 2.0).sqrt();
    let walk_sigma = (2.0 * PI * cfg.linewidth_hz * t).sqrt();
    let mut noise = pol_stream(seed, streams::LINK_NOISE, pol);
    let mut phase_rng = pol_stream(seed, streams::LINK_PHASE, pol);
    let mut walk = 0.0;
    symbols
        .iter()
        .enumerate()
        .map(|(k, &s)| {
            if k > 0 && walk_sigma > 0.0 {
                walk += walk_sigma * phase_rng.sample::<f64, _>(StandardNormal);
            }
            let theta = 2.0 * PI * cfg.freq_offset_hz * t * k as f64 + walk;
            let mut r = s * Complex64::from_polar(1.0, theta);
            if sigma > 0.0 {
                r += Complex64::new(
                    sigma * noise.sample::<f64, _>(StandardNormal),
                    sigma * noise.sample::<f64, _>(StandardNormal),
                );
            }
            r
        })
        .collect()
}

/// Frequency offset from the spectral peak of the fourth-power signal.
pub fn freq_offset_estimate(received: &[Complex64], symbol_rate_hz: f64) -> Result<f64> {
    if received.len() < MIN_OFFSET_SYMBOLS {
        return Err(Error::TooShort {
            needed: MIN_OFFSET_SYMBOLS,
            got: received.len(),
        });
    }
    // zero-pad to four times the next power of two for a finer grid
    let n = received.len().next_power_of_two() * 4;
    let mut buf = vec![Complex64::new(0.0, 0.0); n];
    for (b, s) in buf.iter_mut().zip(received) {
        *b = s.powi(4);
    }
    fft_forward(&mut buf);
    let peak = buf
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.norm_sqr().total_cmp(&b.1.norm_sqr()))
        .map(|(i, _)| i)
        .unwrap_or(0);
    let signed = if peak > n / 2 {
        peak as f64 - n as f64
    } else {
        peak as f64
    };
    Ok(signed * symbol_rate_hz / n as f64 / 4.0)
}

/// Removes a frequency offset of `offset_hz`.
pub fn freq_offset_compensate(received: &[Complex64], offset_hz: f64, symbol_rate_hz: f64) -> Vec<Complex64> {
    let step = -2.0 * PI * offset_hz / symbol_rate_hz;
    received
        .iter()
        .enumerate()
        .map(|(k, &s)| s * Complex64::from_polar(1.0, step * k as f64))
        .collect()
}

/// Viterbi-Viterbi phase recovery. `training` holds the known first symbols
/// and resolves the four-fold ambiguity.
pub fn viterbi_viterbi_cpr(received: &[Complex64], window: usize, training: &[Complex64]) -> Result<Vec<Complex64>> {
    if window < 3 || window % 2 == 0 {
        return Err(domain(format!("window must be odd and >= 3, got {window}")));
    }
    if training.len() < MIN_TRAINING {
        return Err(Error::TooShort {
            needed: MIN_TRAINING,
            got: training.len(),
        });
    }
    if received.len() < training.len() {
        return Err(Error::TooShort {
            needed: training.len(),
            got: received.len(),
        });
    }
    let n = received.len();
    let half = window / 2;
    let mut prefix = Vec::with_capacity(n + 1);
    prefix.push(Complex64::new(0.0, 0.0));
    for s in received {
        let last = *prefix.last().expect("non-empty");
        prefix.push(last + s.powi(4));
    }
    let mut phases = Vec::with_capacity(n);
    let mut prev = 0.0;
    for k in 0..n {
        let lo = k.saturating_sub(half);
        let hi = (k + half + 1).min(n);
        // QPSK symbols raised to the fourth power sit at -1
        let avg = -(prefix[hi] - prefix[lo]);
        let mut phi = avg.arg() / 4.0;
        if k > 0 {
            phi += FRAC_PI_2 * ((prev - phi) / FRAC_PI_2).round();
        }
        phases.push(phi);
        prev = phi;
    }
    let corrected: Vec<Complex64> = received
        .iter()
        .zip(&phases)
        .map(|(&s, &phi)| s * Complex64::from_polar(1.0, -phi))
        .collect();
    let corr: Complex64 = corrected.iter().zip(training).map(|(y, t)| y * t.conj()).sum();
    let quarter = (corr.arg() / FRAC_PI_2).round();
    let fix = Complex64::from_polar(1.0, -quarter * FRAC_PI_2);
    Ok(corrected.into_iter().map(|s| s * fix).collect())
}

/// 0.5·erfc(√(Eb/N0)).
pub fn ber_theory_qpsk(ebn0_db: f64) -> f64 {
    if ebn0_db == f64::INFINITY {
        return 0.0;
    }
    0.5 * statrs::function::erf::erfc(10f64.powf(ebn0_db / 10.0).sqrt())
}

/// Eb/N0 (dB) at which the closed-form BER equals `target`.
pub fn ebn0_for_ber(target: f64) -> Result<f64> {
    if !(target > 0.0 && target < 0.5) {
        return Err(domain(format!("target BER must be in (0, 0.5), got {target}")));
    }
    let (mut lo, mut hi) = (-20.0, 30.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if ber_theory_qpsk(mid) > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

#[derive(Clone, Debug, PartialEq)]
pub struct PolBer {
    pub n_bits: usize,
    pub n_errors: usize,
}

impl PolBer {
    pub fn ber(&self) -> f64 {
        self.n_errors as f64 / self.n_bits as f64
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BerReport {
    pub n_bits: usize,
    pub n_errors: usize,
    pub ber: f64,
    pub esn0_db: f64,
    pub per_pol: Vec<PolBer>,
}

impl BerReport {
    pub fn ebn0_db(&self) -> f64 {
        esn0_to_ebn0_db(self.esn0_db)
    }

    /// Binomial standard deviation of the estimate at probability `p`.
    pub fn binomial_sigma(&self, p: f64) -> f64 {
        (p * (1.0 - p) / self.n_bits as f64).sqrt()
    }
}

/// Runs the chain over one polarization and returns the recovered payload symbols.
fn recover_pol(bits: &[u8], cfg: &LinkConfig, pol: usize, seed: u64) -> Result<Vec<Complex64>> {
    let mut rng = pol_stream(seed, streams::LINK_BITS, pol);
    let training_bits: Vec<u8> = (0..2 * cfg.training_len).map(|_| (rng.next_u32() & 1) as u8).collect();
    let tx: Vec<Complex64> = training_bits
        .chunks_exact(2)
        .chain(bits.chunks_exact(2))
        .map(|p| map_symbol(p[0], p[1]))
        .collect();
    let rx = channel_apply(&tx, cfg, pol, seed);
    let offset = if rx.len() >= MIN_OFFSET_SYMBOLS {
        freq_offset_estimate(&rx, cfg.symbol_rate_hz)?
    } else {
        0.0
    };
    let rx = freq_offset_compensate(&rx, offset, cfg.symbol_rate_hz);
    let out = viterbi_viterbi_cpr(&rx, cfg.cpr_window, &tx[..cfg.training_len])?;
    Ok(out[cfg.training_len..].to_vec())
}

fn run_pol(bits: &[u8], cfg: &LinkConfig, pol: usize, seed: u64) -> Result<Vec<u8>> {
    Ok(qpsk_demodulate(&recover_pol(bits, cfg, pol, seed)?))
}

/// Recovered payload symbols per polarization, for constellation plots.
pub fn constellation(cfg: &LinkConfig, n_symbols: usize, seed: u64) -> Result<Vec<Vec<Complex64>>> {
    cfg.validate()?;
    (0..cfg.n_pols)
        .into_par_iter()
        .map(|pol| {
            let mut rng = pol_stream(seed, streams::DATA_DRIVE, pol);
            let bits: Vec<u8> = (0..2 * n_symbols).map(|_| (rng.next_u32() & 1) as u8).collect();
            recover_pol(&bits, cfg, pol, seed)
        })
        .collect()
}

/// CSV with columns pol, re, im.
pub fn constellation_csv(points: &[Vec<Complex64>]) -> String {
    let mut out = String::from("pol,re,im\n");
    for (pol, pts) in points.iter().enumerate() {
        for z in pts {
            let _ = writeln!(out, "{pol},{:.6},{:.6}", z.re, z.im);
        }
    }
    out
}

/// Modulate, impair, recover and count bit errors on `n_bits` payload bits.
pub fn ber_measure(cfg: &LinkConfig, n_bits: usize, seed: u64) -> Result<BerReport> {
    cfg.validate()?;
    if n_bits < MIN_BER_BITS {
        return Err(Error::TooShort {
            needed: MIN_BER_BITS,
            got: n_bits,
        });
    }
    let per_pol = n_bits.div_ceil(2 * cfg.n_pols) * 2;
    let per_pol: Vec<PolBer> = (0..cfg.n_pols)
        .into_par_iter()
        .map(|pol| {
            let mut rng = pol_stream(seed, streams::DATA_DRIVE, pol);
            let bits: Vec<u8> = (0..per_pol).map(|_| (rng.next_u32() & 1) as u8).collect();
            let decided = run_pol(&bits, cfg, pol, seed)?;
            let n_errors = bits.iter().zip(&decided).filter(|(a, b)| a != b).count();
            Ok(PolBer {
                n_bits: per_pol,
                n_errors,
            })
        })
        .collect::<Result<_>>()?;
    let n_bits: usize = per_pol.iter().map(|p| p.n_bits).sum();
    let n_errors: usize = per_pol.iter().map(|p| p.n_errors).sum();
    Ok(BerReport {
        n_bits,
        n_errors,
        ber: n_errors as f64 / n_bits as f64,
        esn0_db: cfg.esn0_db,
        per_pol,
    })
}

/// Bisects Eb/N0 until the measured BER brackets `target_ber` within 0.01 dB.
/// The same seed is used at every step.
pub fn threshold_search(target_ber: f64, base: &LinkConfig, n_bits: usize, seed: u64) -> Result<f64> {
    if !(target_ber > 0.0 && target_ber < 0.5) {
        return Err(domain(format!("target BER must be in (0, 0.5), got {target_ber}")));
    }
    if n_bits as f64 * target_ber < MIN_EXPECTED_ERRORS {
        return Err(Error::TooShort {
            needed: (MIN_EXPECTED_ERRORS / target_ber).ceil() as usize,
            got: n_bits,
        });
    }
    let (mut lo, mut hi) = (0.0, 14.0);
    let measure = |ebn0: f64| ber_measure(&base.clone().with_ebn0_db(ebn0), n_bits, seed).map(|r| r.ber);
    if measure(lo)? <= target_ber || measure(hi)? > target_ber {
        return Err(Error::Estimation(format!(
            "target BER {target_ber} not bracketed by Eb/N0 in [{lo}, {hi}] dB"
        )));
    }
    while hi - lo > 0.01 {
        let mid = 0.5 * (lo + hi);
        if measure(mid)? > target_ber {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Measured BER over a grid of Eb/N0 values.
pub fn ber_curve(base: &LinkConfig, ebn0_grid_db: &[f64], n_bits: usize, seed: u64) -> Result<Vec<BerReport>> {
    ebn0_grid_db
        .iter()
        .map(|&e| ber_measure(&base.clone().with_ebn0_db(e), n_bits, seed))
        .collect()
}

/// CSV with columns ebn0_db, ber, n_bits, ber_theory.
pub fn ber_csv(reports: &[BerReport]) -> String {
    let mut out = String::from("ebn0_db,ber,n_bits,ber_theory\n");
    for r in reports {
        let e = r.ebn0_db();
        let _ = writeln!(out, "{e:.4},{:e},{},{:e}", r.ber, r.n_bits, ber_theory_qpsk(e));
    }
    out
}
