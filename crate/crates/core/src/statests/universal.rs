use super::{check_nonempty, erfc};
use crate::error::{Error, Result};
use std::f64::consts::SQRT_2;

const EXPECTED: [f64; 17] = [
    0.0, 0.7326495, 1.5374383, 2.4016068, 3.3112247, 4.2534266, 5.2177052, 6.1962507, 7.1836656, 8.1764248, 9.1723243,
    10.170032, 11.168765, 12.168070, 13.167693, 14.167488, 15.167379,
];
const VARIANCE: [f64; 17] = [
    0.0, 0.690, 1.338, 1.901, 2.358, 2.705, 2.954, 3.125, 3.238, 3.311, 3.356, 3.384, 3.401, 3.410, 3.416, 3.419, 3.421,
];

/// Maurer's universal statistic with `l`-bit words and `q` initialisation words.
pub fn universal(bits: &[u8], l: usize, q: usize) -> Result<f64> {
    check_nonempty(bits)?;
    if !(1..=16).contains(&l) {
        return Err(crate::error::domain(format!("word length {l} outside 1..=16")));
    }
    let words = bits.len() / l;
    if words <= q {
        return Err(Error::TooShort {
            needed: (q + 1) * l,
            got: bits.len(),
        });
    }
    let k = words - q;
    let word = |i: usize| {
        bits[i * l..(i + 1) * l]
            .iter()
            .fold(0usize, |acc, &b| acc << 1 | b as usize)
    };
    let mut table = vec![0usize; 1 << l];
    for i in 1..=q {
        table[word(i - 1)] = i;
    }
    let mut total = 0.0;
    for i in q + 1..=q + k {
        let w = word(i - 1);
        total += ((i - table[w]) as f64).log2();
        table[w] = i;
    }
    let lf = l as f64;
    let kf = k as f64;
    let f_n = total / kf;
    let c = 0.7 - 0.8 / lf + (4.0 + 32.0 / lf) * kf.powf(-3.0 / lf) / 15.0;
    let sigma = c * (VARIANCE[l] / kf).sqrt();
    Ok(erfc((f_n - EXPECTED[l]).abs() / (SQRT_2 * sigma)))
}
