use super::{check_nonempty, erfc};
use crate::error::Result;

/// Runs test. Returns 0 when the frequency prerequisite fails.
pub fn runs(bits: &[u8]) -> Result<f64> {
    check_nonempty(bits)?;
    let n = bits.len() as f64;
    let pi = bits.iter().filter(|&&b| b == 1).count() as f64 / n;
    if (pi - 0.5).abs() >= 2.0 / n.sqrt() {
        return Ok(0.0);
    }
    let v = 1 + bits.windows(2).filter(|w| w[0] != w[1]).count();
    let num = (v as f64 - 2.0 * n * pi * (1.0 - pi)).abs();
    let den = 2.0 * (2.0 * n).sqrt() * pi * (1.0 - pi);
    Ok(erfc(num / den))
}

/// Longest run of ones within blocks; block size follows the sequence length.
pub fn longest_run(bits: &[u8]) -> Result<f64> {
    check_nonempty(bits)?;
    let n = bits.len();
    let (m, lo, hi, pi): (usize, usize, usize, &[f64]) = if n < 6272 {
        (8, 1, 4, &[0.2148, 0.3672, 0.2305, 0.1875])
    } else if n < 750_000 {
        (128, 4, 9, &[0.1174, 0.2430, 0.2493, 0.1752, 0.1027, 0.1124])
    } else {
        (
            10_000,
            10,
            16,
            &[0.0882, 0.2092, 0.2483, 0.1933, 0.1208, 0.0675, 0.0727],
        )
    };
    let nb = n / m;
    if nb == 0 {
        return Err(crate::error::Error::TooShort { needed: m, got: n });
    }
    let mut counts = vec![0usize; pi.len()];
    for blk in bits.chunks_exact(m) {
        let (mut best, mut cur) = (0usize, 0usize);
        for &b in blk {
            cur = if b == 1 { cur + 1 } else { 0 };
            best = best.max(cur);
        }
        counts[best.clamp(lo, hi) - lo] += 1;
    }
    let nbf = nb as f64;
    let chi: f64 = counts
        .iter()
        .zip(pi)
        .map(|(&c, &p)| (c as f64 - nbf * p).powi(2) / (nbf * p))
        .sum();
    Ok(super::igamc((pi.len() - 1) as f64 / 2.0, chi / 2.0))
}
