use super::{check_nonempty, igamc};
use crate::error::{Error, Result};

const PI: [f64; 7] = [
    1.0 / 96.0,
    1.0 / 32.0,
    1.0 / 8.0,
    1.0 / 2.0,
    1.0 / 4.0,
    1.0 / 16.0,
    1.0 / 48.0,
];

/// Length of the shortest LFSR generating `s`.
pub fn berlekamp_massey(s: &[u8]) -> usize {
    let n = s.len();
    let mut b = vec![0u8; n + 1];
    let mut c = vec![0u8; n + 1];
    b[0] = 1;
    c[0] = 1;
    let (mut l, mut m) = (0usize, -1isize);
    for i in 0..n {
        let mut d = s[i];
        for j in 1..=l {
            d ^= c[j] & s[i - j];
        }
        if d == 1 {
            let t = c.clone();
            let shift = (i as isize - m) as usize;
            for j in 0..=n - shift {
                c[shift + j] ^= b[j];
            }
            if l <= i / 2 {
                l = i + 1 - l;
                m = i as isize;
                b = t;
            }
        }
    }
    l
}

/// Linear-complexity test over blocks of `block_len` bits.
pub fn linear_complexity(bits: &[u8], block_len: usize) -> Result<f64> {
    check_nonempty(bits)?;
    let nb = bits.len() / block_len.max(1);
    if block_len == 0 || nb == 0 {
        return Err(Error::TooShort {
            needed: block_len.max(1),
            got: bits.len(),
        });
    }
    let mf = block_len as f64;
    let sign = if block_len % 2 == 0 { 1.0 } else { -1.0 };
    let mu = mf / 2.0 + (9.0 - sign) / 36.0 - (mf / 3.0 + 2.0 / 9.0) / 2f64.powf(mf);
    let nu = {
        use rayon::prelude::*;
        bits.par_chunks_exact(block_len)
            .map(|blk| {
                let t = sign * (berlekamp_massey(blk) as f64 - mu) + 2.0 / 9.0;
                let k = [-2.5, -1.5, -0.5, 0.5, 1.5, 2.5]
                    .iter()
                    .take_while(|&&edge| t > edge)
                    .count();
                let mut nu = [0usize; 7];
                nu[k] += 1;
                nu
            })
            .reduce(|| [0; 7], |a, b| std::array::from_fn(|i| a[i] + b[i]))
    };
    let nbf = nb as f64;
    let chi: f64 = nu
        .iter()
        .zip(&PI)
        .map(|(&v, &p)| (v as f64 - nbf * p).powi(2) / (nbf * p))
        .sum();
    Ok(igamc(3.0, chi / 2.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::statests::parse_bits;

    #[test]
    fn berlekamp_massey_examples() {
        assert_eq!(berlekamp_massey(&parse_bits("1101011110001")), 4);
        assert_eq!(berlekamp_massey(&[0, 0, 0, 0]), 0);
        assert_eq!(berlekamp_massey(&[0, 0, 0, 1]), 4);
        assert_eq!(berlekamp_massey(&[1, 1, 1, 1, 1]), 1);
    }
}
