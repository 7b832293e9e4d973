use super::{check_nonempty, erfc};
use crate::error::Result;
use std::f64::consts::SQRT_2;

/// Monobit test: balance of ones and zeros over the whole sequence.
pub fn frequency(bits: &[u8]) -> Result<f64> {
    check_nonempty(bits)?;
    let n = bits.len() as f64;
    let ones = bits.iter().filter(|&&b| b == 1).count() as f64;
    let s = 2.0 * ones - n;
    Ok(erfc(s.abs() / n.sqrt() / SQRT_2))
}

/// Balance of ones within non-overlapping blocks of `block_len` bits.
pub fn block_frequency(bits: &[u8], block_len: usize) -> Result<f64> {
    check_nonempty(bits)?;
    let nb = bits.len() / block_len.max(1);
    if block_len == 0 || nb == 0 {
        return Err(crate::error::domain("block length must be in [1, n]"));
    }
    let m = block_len as f64;
    let chi: f64 = bits
        .chunks_exact(block_len)
        .map(|blk| {
            let pi = blk.iter().filter(|&&b| b == 1).count() as f64 / m;
            (pi - 0.5) * (pi - 0.5)
        })
        .sum::<f64>()
        * 4.0
        * m;
    Ok(super::igamc(nb as f64 / 2.0, chi / 2.0))
}
