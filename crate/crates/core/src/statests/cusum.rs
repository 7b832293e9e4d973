use super::{check_nonempty, normal_cdf};
use crate::error::Result;

/// Cumulative-sums test; `reverse` walks the sequence from the end.
pub fn cumulative_sums(bits: &[u8], reverse: bool) -> Result<f64> {
    check_nonempty(bits)?;
    let n = bits.len() as f64;
    let mut s: i64 = 0;
    let mut z: i64 = 0;
    let mut step = |b: u8| {
        s += if b == 1 { 1 } else { -1 };
        z = z.max(s.abs());
    };
    if reverse {
        bits.iter().rev().for_each(|&b| step(b));
    } else {
        bits.iter().for_each(|&b| step(b));
    }
    let z = z as f64;
    let sq = n.sqrt();
    let mut sum1 = 0.0;
    let mut k = ((-n / z + 1.0) / 4.0).floor() as i64;
    while k <= ((n / z - 1.0) / 4.0).floor() as i64 {
        let kf = k as f64;
        sum1 += normal_cdf((4.0 * kf + 1.0) * z / sq) - normal_cdf((4.0 * kf - 1.0) * z / sq);
        k += 1;
    }
    let mut sum2 = 0.0;
    let mut k = ((-n / z - 3.0) / 4.0).floor() as i64;
    while k <= ((n / z - 1.0) / 4.0).floor() as i64 {
        let kf = k as f64;
        sum2 += normal_cdf((4.0 * kf + 3.0) * z / sq) - normal_cdf((4.0 * kf + 1.0) * z / sq);
        k += 1;
    }
    Ok((1.0 - sum1 + sum2).clamp(0.0, 1.0))
}
