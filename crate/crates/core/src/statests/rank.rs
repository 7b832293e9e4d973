use super::check_nonempty;
use crate::error::{Error, Result};

const DIM: usize = 32;

/// Rank of a square GF(2) matrix given as row bit masks.
fn gf2_rank(rows: &mut [u32]) -> usize {
    let mut rank = 0;
    for col in (0..DIM).rev() {
        let Some(pivot) = (rank..rows.len()).find(|&i| rows[i] >> col & 1 == 1) else {
            continue;
        };
        rows.swap(rank, pivot);
        for i in 0..rows.len() {
            if i != rank && rows[i] >> col & 1 == 1 {
                rows[i] ^= rows[rank];
            }
        }
        rank += 1;
    }
    rank
}

/// Probability that a uniformly random m×q GF(2) matrix has rank r.
fn rank_probability(r: usize, m: usize, q: usize) -> f64 {
    if r == 0 {
        return 2f64.powi(-((m * q) as i32));
    }
    let mut p = 2f64.powi((r * (q + m - r)) as i32 - (m * q) as i32);
    for i in 0..r as i32 {
        p *= (1.0 - 2f64.powi(i - q as i32)) * (1.0 - 2f64.powi(i - m as i32)) / (1.0 - 2f64.powi(i - r as i32));
    }
    p
}

/// Binary matrix rank test on disjoint 32×32 matrices.
pub fn rank(bits: &[u8]) -> Result<f64> {
    check_nonempty(bits)?;
    let nm = bits.len() / (DIM * DIM);
    if nm == 0 {
        return Err(Error::TooShort {
            needed: DIM * DIM,
            got: bits.len(),
        });
    }
    let (mut f32, mut f31) = (0usize, 0usize);
    for blk in bits.chunks_exact(DIM * DIM) {
        let mut rows: Vec<u32> = blk
            .chunks_exact(DIM)
            .map(|r| r.iter().fold(0u32, |acc, &b| acc << 1 | u32::from(b)))
            .collect();
        match gf2_rank(&mut rows) {
            32 => f32 += 1,
            31 => f31 += 1,
            _ => {}
        }
    }
    let p32 = rank_probability(32, DIM, DIM);
    let p31 = rank_probability(31, DIM, DIM);
    let p30 = 1.0 - p32 - p31;
    let n = nm as f64;
    let f30 = (nm - f32 - f31) as f64;
    let chi = (f32 as f64 - p32 * n).powi(2) / (p32 * n)
        + (f31 as f64 - p31 * n).powi(2) / (p31 * n)
        + (f30 - p30 * n).powi(2) / (p30 * n);
    Ok((-chi / 2.0).exp())
}
