use super::{check_nonempty, igamc};
use crate::error::{domain, Result};

/// Counts of every `m`-bit pattern with the sequence wrapped around.
fn pattern_counts(bits: &[u8], m: usize) -> Vec<u64> {
    let n = bits.len();
    if m == 0 {
        return vec![n as u64];
    }
    let mask = (1usize << m) - 1;
    let mut counts = vec![0u64; 1 << m];
    let mut acc = 0usize;
    for i in 0..n + m - 1 {
        acc = (acc << 1 | bits[i % n] as usize) & mask;
        if i + 1 >= m {
            counts[acc] += 1;
        }
    }
    counts
}

/// Approximate entropy with block length `m`.
pub fn approximate_entropy(bits: &[u8], m: usize) -> Result<f64> {
    check_nonempty(bits)?;
    if m == 0 || m > 24 {
        return Err(domain(format!("block length {m} outside 1..=24")));
    }
    let n = bits.len() as f64;
    let phi = |mm: usize| -> f64 {
        pattern_counts(bits, mm)
            .into_iter()
            .filter(|&c| c > 0)
            .map(|c| {
                let p = c as f64 / n;
                p * p.ln()
            })
            .sum()
    };
    let apen = phi(m) - phi(m + 1);
    let chi = 2.0 * n * (2f64.ln() - apen);
    Ok(igamc(2f64.powi(m as i32 - 1), chi / 2.0))
}

/// Serial test; returns the two p-values (∇ψ² and ∇²ψ²).
pub fn serial(bits: &[u8], m: usize) -> Result<(f64, f64)> {
    check_nonempty(bits)?;
    if !(2..=24).contains(&m) {
        return Err(domain(format!("block length {m} outside 2..=24")));
    }
    let n = bits.len() as f64;
    let psi = |mm: usize| -> f64 {
        if mm == 0 {
            return 0.0;
        }
        let sq: f64 = pattern_counts(bits, mm)
            .into_iter()
            .map(|c| (c as f64) * (c as f64))
            .sum();
        2f64.powi(mm as i32) / n * sq - n
    };
    let (p0, p1, p2) = (psi(m), psi(m - 1), psi(m - 2));
    let d1 = p0 - p1;
    let d2 = p0 - 2.0 * p1 + p2;
    Ok((
        igamc(2f64.powi(m as i32 - 2), d1 / 2.0),
        igamc(2f64.powi(m as i32 - 3), d2 / 2.0),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wrapped_counts_cover_every_position() {
        let bits = [0, 1, 1, 0, 1];
        let c = pattern_counts(&bits, 3);
        assert_eq!(c.iter().sum::<u64>(), 5);
        // 011 110 101 010 101 read with wraparound
        assert_eq!(c, vec![0, 0, 1, 1, 0, 2, 1, 0]);
    }
}
