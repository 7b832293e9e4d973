use super::{check_nonempty, igamc};
use crate::error::{domain, Error, Result};

/// All aperiodic templates of length `m` in ascending order. A template is
/// aperiodic when no proper shift of it overlaps itself.
pub fn aperiodic_templates(m: usize) -> Vec<Vec<u8>> {
    assert!((2..=16).contains(&m), "template length out of range");
    (0u32..1 << m)
        .map(|v| (0..m).map(|i| (v >> (m - 1 - i) & 1) as u8).collect::<Vec<u8>>())
        .filter(|t| (1..m).all(|k| t[k..] != t[..m - k]))
        .collect()
}

/// Window values `w[i] = bits[i..i+m]` read MSB first.
fn windows(bits: &[u8], m: usize) -> Vec<u32> {
    let mask = (1u32 << m) - 1;
    let mut acc = 0u32;
    let mut out = Vec::with_capacity(bits.len().saturating_sub(m - 1));
    for (i, &b) in bits.iter().enumerate() {
        acc = (acc << 1 | u32::from(b)) & mask;
        if i + 1 >= m {
            out.push(acc);
        }
    }
    out
}

fn template_value(template: &[u8]) -> u32 {
    template.iter().fold(0u32, |acc, &b| acc << 1 | u32::from(b))
}

/// Non-overlapping template matching over `n_blocks` blocks; the scan skips
/// `m` bits after every match.
pub fn non_overlapping(bits: &[u8], template: &[u8], n_blocks: usize) -> Result<f64> {
    check_nonempty(bits)?;
    let w = windows(bits, template.len());
    non_overlapping_windows(&w, bits.len(), template, n_blocks)
}

pub(crate) fn non_overlapping_windows(w: &[u32], n: usize, template: &[u8], n_blocks: usize) -> Result<f64> {
    let m = template.len();
    if m == 0 || n_blocks == 0 {
        return Err(domain("template and block count must be non-empty"));
    }
    let big_m = n / n_blocks;
    if big_m < m {
        return Err(Error::TooShort {
            needed: m * n_blocks,
            got: n,
        });
    }
    let target = template_value(template);
    let mf = m as f64;
    let mu = (big_m - m + 1) as f64 / 2f64.powf(mf);
    let var = big_m as f64 * (1.0 / 2f64.powf(mf) - (2.0 * mf - 1.0) / 2f64.powf(2.0 * mf));
    let mut chi = 0.0;
    for j in 0..n_blocks {
        let base = j * big_m;
        let mut hits = 0usize;
        let mut i = 0;
        while i + m <= big_m {
            if w[base + i] == target {
                hits += 1;
                i += m;
            } else {
                i += 1;
            }
        }
        chi += (hits as f64 - mu).powi(2) / var;
    }
    Ok(igamc(n_blocks as f64 / 2.0, chi / 2.0))
}

/// Window values for the suite's template scan, shared across all templates.
pub(crate) fn suite_windows(bits: &[u8], m: usize) -> Vec<u32> {
    windows(bits, m)
}

fn overlapping_probabilities(m: usize, big_m: usize) -> [f64; 6] {
    let lambda = (big_m - m + 1) as f64 / 2f64.powi(m as i32);
    let eta = lambda / 2.0;
    let ln_gamma = statrs::function::gamma::ln_gamma;
    let mut pi = [0.0; 6];
    pi[0] = (-eta).exp();
    for (u, slot) in pi.iter_mut().enumerate().take(5).skip(1) {
        *slot = (1..=u)
            .map(|l| {
                let (uf, lf) = (u as f64, l as f64);
                (-eta - uf * 2f64.ln() + lf * eta.ln() - ln_gamma(lf + 1.0) + ln_gamma(uf)
                    - ln_gamma(lf)
                    - ln_gamma(uf - lf + 1.0))
                .exp()
            })
            .sum();
    }
    pi[5] = 1.0 - pi[..5].iter().sum::<f64>();
    pi
}

/// Overlapping matches of the all-ones template of length `m` in blocks of `block_len`.
pub fn overlapping(bits: &[u8], m: usize, block_len: usize) -> Result<f64> {
    check_nonempty(bits)?;
    let nb = bits.len() / block_len.max(1);
    if block_len < m || nb == 0 {
        return Err(Error::TooShort {
            needed: block_len.max(m),
            got: bits.len(),
        });
    }
    let pi = overlapping_probabilities(m, block_len);
    let mut nu = [0usize; 6];
    for blk in bits.chunks_exact(block_len) {
        let (mut count, mut run) = (0usize, 0usize);
        for &b in blk {
            run = if b == 1 { run + 1 } else { 0 };
            if run >= m {
                count += 1;
            }
        }
        nu[count.min(5)] += 1;
    }
    let nbf = nb as f64;
    let chi: f64 = nu
        .iter()
        .zip(&pi)
        .map(|(&v, &p)| (v as f64 - nbf * p).powi(2) / (nbf * p))
        .sum();
    Ok(igamc(2.5, chi / 2.0))
}
