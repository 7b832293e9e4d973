//! Toeplitz hashing over GF(2).
//!
//! The m×n matrix is diagonal-constant with `T[i][j] = seed[n-1+i-j]`: the
//! first row is seed bits n-1 down to 0 and the first column is seed bits
//! n-1 up to n+m-2. Output bit i is the parity of the AND of row i with the
//! input.
//!
//! Three interchangeable strategies compute the product; they are
//! bit-identical and differ only in speed.

mod files;

pub use files::{read_seed, write_seed, KeyManifest, SEED_MAGIC, SEED_VERSION};

use crate::bits::Bitstream;
use crate::entropy::ExtractionPlan;
use crate::error::{domain, Error, Result};
use crate::frontend::SampleBlock;
use crate::rng::{stream, streams};
use num_complex::Complex64;
use rand::RngCore;
use rayon::prelude::*;
use rustfft::FftPlanner;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ToeplitzSeed {
    bits: Bitstream,
    n: usize,
    m: usize,
}

impl ToeplitzSeed {
    pub fn from_bits(bits: Bitstream, n: usize, m: usize) -> Result<Self> {
        if m == 0 || m > n {
            return Err(domain(format!("Toeplitz shape needs n >= m >= 1, got n={n}, m={m}")));
        }
        if bits.len() != n + m - 1 {
            return Err(Error::LengthMismatch {
                expected: n + m - 1,
                actual: bits.len(),
            });
        }
        Ok(Self { bits, n, m })
    }

    pub fn bits(&self) -> &Bitstream {
        &self.bits
    }

    /// Input length.
    pub fn n(&self) -> usize {
        self.n
    }

    /// Output length.
    pub fn m(&self) -> usize {
        self.m
    }

    /// `T[i][j]`.
    pub fn entry(&self, i: usize, j: usize) -> bool {
        self.bits.get(self.n - 1 + i - j)
    }
}

/// Draws n+m-1 seed bits from the ChaCha stream reserved for seeds.
pub fn seed_new(n: usize, m: usize, rng_seed: u64) -> Result<ToeplitzSeed> {
    if m == 0 || m > n {
        return Err(domain(format!("Toeplitz shape needs n >= m >= 1, got n={n}, m={m}")));
    }
    let len = n + m - 1;
    let mut rng = stream(rng_seed, streams::TOEPLITZ_SEED);
    let words: Vec<u64> = (0..len.div_ceil(64)).map(|_| rng.next_u64()).collect();
    ToeplitzSeed::from_bits(Bitstream::from_words(&words, len), n, m)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Strategy {
    /// Explicit O(n·m) bit loops; the reference.
    Naive,
    /// 64-bit word AND/popcount against pre-shifted seed copies.
    Packed,
    /// Chunked FFT convolution with exact rounding back to integers.
    Fft,
    /// Packed for small products, FFT otherwise.
    Auto,
}

fn check_input(seed: &ToeplitzSeed, input: &Bitstream) -> Result<()> {
    if input.len() != seed.n {
        return Err(Error::LengthMismatch {
            expected: seed.n,
            actual: input.len(),
        });
    }
    Ok(())
}

pub fn toeplitz_extract(seed: &ToeplitzSeed, input: &Bitstream) -> Result<Bitstream> {
    toeplitz_extract_with(seed, input, Strategy::Auto)
}

pub fn toeplitz_extract_naive(seed: &ToeplitzSeed, input: &Bitstream) -> Result<Bitstream> {
    toeplitz_extract_with(seed, input, Strategy::Naive)
}

pub fn toeplitz_extract_with(seed: &ToeplitzSeed, input: &Bitstream, strategy: Strategy) -> Result<Bitstream> {
    check_input(seed, input)?;
    let strategy = match strategy {
        Strategy::Auto if (seed.n as f64) * (seed.m as f64) <= 2f64.powi(34) => Strategy::Packed,
        Strategy::Auto => Strategy::Fft,
        s => s,
    };
    Ok(match strategy {
        Strategy::Naive => naive(seed, input),
        Strategy::Packed => packed(seed, input),
        Strategy::Fft => fft(seed, input),
        Strategy::Auto => unreachable!(),
    })
}

fn naive(seed: &ToeplitzSeed, x: &Bitstream) -> Bitstream {
    (0..seed.m)
        .map(|i| {
            let mut acc = false;
            for j in 0..seed.n {
                acc ^= seed.entry(i, j) & x.get(j);
            }
            acc
        })
        .collect()
}

/// Words of `bits` starting at bit `offset`, `count` words long, zero past the end.
fn shifted_words(words: &[u64], offset: usize, count: usize) -> Vec<u64> {
    let (w0, b) = (offset / 64, offset % 64);
    let at = |k: usize| words.get(k).copied().unwrap_or(0);
    (0..count)
        .map(|k| {
            if b == 0 {
                at(w0 + k)
            } else {
                at(w0 + k) >> b | at(w0 + k + 1) << (64 - b)
            }
        })
        .collect()
}

fn packed(seed: &ToeplitzSeed, x: &Bitstream) -> Bitstream {
    // y_i = parity(seed[i .. i+n] & r) with r the reversed input.
    let (n, m) = (seed.n, seed.m);
    let r = Bitstream::from_bools((0..n).rev().map(|j| x.get(j))).to_words();
    let nw = r.len();
    let seed_words = seed.bits.to_words();
    let span = (n + m - 1).div_ceil(64) + 1;
    let shifts: Vec<Vec<u64>> = (0..64.min(m)).map(|b| shifted_words(&seed_words, b, span)).collect();
    let out: Vec<bool> = (0..m)
        .into_par_iter()
        .map(|i| {
            let s = &shifts[i % 64][i / 64..i / 64 + nw];
            let acc = s.iter().zip(&r).fold(0u64, |acc, (a, b)| acc ^ (a & b));
            acc.count_ones() & 1 == 1
        })
        .collect();
    Bitstream::from_bools(out)
}

/// Writes bits `start .. start + out.len()` of `bits` as 0.0/1.0; positions
/// outside the stream read as zero.
fn expand_bits(bits: &Bitstream, start: i64, out: &mut [f64]) {
    let bytes = bits.as_bytes();
    let len = bits.len() as i64;
    let first = start.max(0);
    let last = (start + out.len() as i64).min(len);
    out.iter_mut().for_each(|o| *o = 0.0);
    let mut k = first;
    while k < last {
        let byte = bytes[(k >> 3) as usize];
        if byte == 0 && k & 7 == 0 {
            k += 8;
            continue;
        }
        if byte >> (k & 7) & 1 == 1 {
            out[(k - start) as usize] = 1.0;
        }
        k += 1;
    }
}

fn fft(seed: &ToeplitzSeed, x: &Bitstream) -> Bitstream {
    // Chunk c of the input (length b) meets the seed segment starting at
    // a_c = n - c·b - b of length b+m-1; its partial result is
    // conv(seg, x_c)[i + b - 1]. Products accumulate in the frequency domain.
    let (n, m) = (seed.n, seed.m);
    let b = m.next_power_of_two().max(1 << 12).min(n.next_power_of_two());
    let size = (b + m - 1).next_power_of_two();
    let chunks = n.div_ceil(b);
    let mut planner = FftPlanner::<f64>::new();
    let forward = planner.plan_fft_forward(size);
    let inverse = planner.plan_fft_inverse(size);

    let zero = Complex64::new(0.0, 0.0);
    let (accumulated, _, _) = (0..chunks)
        .into_par_iter()
        .fold(
            || (vec![zero; size], vec![zero; size], vec![0.0; size]),
            |(mut acc, mut z, mut scratch), c| {
                // seed segment in the real part, input chunk in the imaginary part
                let a_c = n as i64 - (c * b) as i64 - b as i64;
                expand_bits(&seed.bits, a_c, &mut scratch[..b + m - 1]);
                scratch[b + m - 1..].iter_mut().for_each(|v| *v = 0.0);
                for (zk, &s) in z.iter_mut().zip(&scratch) {
                    *zk = Complex64::new(s, 0.0);
                }
                expand_bits(x, (c * b) as i64, &mut scratch[..b]);
                for (zk, &v) in z.iter_mut().zip(&scratch[..b]) {
                    zk.im = v;
                }
                forward.process(&mut z);
                acc[0] += Complex64::new(z[0].re * z[0].im, 0.0);
                for k in 1..size {
                    let zk = z[k];
                    let zr = z[size - k].conj();
                    let s_k = (zk + zr) * 0.5;
                    let x_k = (zk - zr) * Complex64::new(0.0, -0.5);
                    acc[k] += s_k * x_k;
                }
                (acc, z, scratch)
            },
        )
        .reduce(
            || (vec![zero; size], Vec::new(), Vec::new()),
            |(mut a, z, s), (b, _, _)| {
                a.iter_mut().zip(&b).for_each(|(u, v)| *u += v);
                (a, z, s)
            },
        );
    let mut y = accumulated;
    inverse.process(&mut y);
    let scale = 1.0 / size as f64;
    let mut worst = 0.0f64;
    let out = Bitstream::from_bools((0..m).map(|i| {
        let v = y[i + b - 1].re * scale;
        let r = v.round();
        worst = worst.max((v - r).abs());
        (r as i64) & 1 == 1
    }));
    assert!(
        worst < 0.25,
        "FFT rounding deviation {worst} too large for an exact GF(2) result"
    );
    out
}

/// Serializes samples as the low `bits` bits of their two's complement,
/// least significant bit first.
pub fn serialize_samples(samples: &[i16], bits: u32) -> Bitstream {
    if bits == 8 {
        return Bitstream::from_byte_vec(samples.iter().map(|&s| s as u8).collect());
    }
    let mut out = Bitstream::with_capacity(samples.len() * bits as usize);
    for &s in samples {
        out.push_bits(u64::from(s as u16), bits);
    }
    out
}

pub fn serialize_block(block: &SampleBlock) -> Bitstream {
    serialize_samples(block.samples(), block.adc().bits)
}

/// Extracts every block with the same seed and concatenates the outputs.
pub fn extract_stream(blocks: &[SampleBlock], plan: &ExtractionPlan, seed: &ToeplitzSeed) -> Result<Bitstream> {
    if seed.n as u64 != plan.input_bits() {
        return Err(Error::LengthMismatch {
            expected: plan.input_bits() as usize,
            actual: seed.n,
        });
    }
    if seed.m as u64 != plan.m_out {
        return Err(Error::LengthMismatch {
            expected: plan.m_out as usize,
            actual: seed.m,
        });
    }
    let mut out = Bitstream::with_capacity(blocks.len() * seed.m);
    for block in blocks {
        if block.adc().bits != plan.bits_per_sample_raw {
            return Err(domain(format!(
                "block has {}-bit samples, plan expects {}",
                block.adc().bits,
                plan.bits_per_sample_raw
            )));
        }
        let n = plan.n_samples as usize;
        if block.len() < n {
            return Err(Error::TooShort {
                needed: n,
                got: block.len(),
            });
        }
        if block.len() > n {
            return Err(Error::LengthMismatch {
                expected: n,
                actual: block.len(),
            });
        }
        out.extend_from(&toeplitz_extract(seed, &serialize_block(block))?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::Strategy;
    use super::*;
    use crate::entropy::{EntropyConvention, LengthMode};
    use crate::frontend::AdcConfig;
    use proptest::prelude::{any, prop_assert_eq, proptest};

    fn bs(s: &str) -> Bitstream {
        Bitstream::from_ascii(s).unwrap()
    }

    #[test]
    fn seed_lengths_and_determinism() {
        assert_eq!(seed_new(1, 1, 0).unwrap().bits().len(), 1);
        assert_eq!(seed_new(8, 4, 0).unwrap().bits().len(), 11);
        assert_eq!(seed_new(100, 30, 7).unwrap(), seed_new(100, 30, 7).unwrap());
        assert_ne!(seed_new(100, 30, 7).unwrap(), seed_new(100, 30, 8).unwrap());
        assert!(seed_new(4, 5, 0).is_err());
        assert!(seed_new(4, 0, 0).is_err());
    }

    #[test]
    fn hand_computed_product() {
        let seed = ToeplitzSeed::from_bits(bs("1011"), 3, 2).unwrap();
        let rows: Vec<String> = (0..2)
            .map(|i| (0..3).map(|j| if seed.entry(i, j) { '1' } else { '0' }).collect())
            .collect();
        assert_eq!(rows, ["101", "110"]);
        for s in [Strategy::Naive, Strategy::Packed, Strategy::Fft] {
            assert_eq!(toeplitz_extract_with(&seed, &bs("110"), s).unwrap().to_ascii(), "10");
        }
    }

    #[test]
    fn zero_seed_gives_zero_output() {
        let seed = ToeplitzSeed::from_bits(Bitstream::zeros(95), 64, 32).unwrap();
        let x = Bitstream::from_words(&[0xdead_beef_cafe_f00d], 64);
        assert_eq!(toeplitz_extract(&seed, &x).unwrap(), Bitstream::zeros(32));
    }

    #[test]
    fn unit_cases() {
        let seed = ToeplitzSeed::from_bits(bs("1"), 1, 1).unwrap();
        assert_eq!(toeplitz_extract(&seed, &bs("1")).unwrap().to_ascii(), "1");
        // a single 1 at position n-1 makes row 0 pick x_0
        let seed = ToeplitzSeed::from_bits(bs("0001000"), 4, 4).unwrap();
        let y = toeplitz_extract(&seed, &bs("1000")).unwrap();
        assert!(y.get(0));
        let y = toeplitz_extract(&seed, &bs("0111")).unwrap();
        assert!(!y.get(0));
    }

    #[test]
    fn length_mismatch_rejected() {
        let seed = seed_new(10, 4, 1).unwrap();
        assert!(matches!(
            toeplitz_extract(&seed, &Bitstream::zeros(9)),
            Err(Error::LengthMismatch {
                expected: 10,
                actual: 9
            })
        ));
    }

    #[test]
    fn serialization_is_lsb_first_twos_complement() {
        assert_eq!(serialize_samples(&[1, -1], 8).to_ascii(), "1000000011111111");
        assert_eq!(serialize_samples(&[-2, 3], 4).to_ascii(), "01111100");
        assert_eq!(serialize_samples(&[-2, 3], 12).len(), 24);
    }

    fn block(samples: Vec<i16>) -> SampleBlock {
        let adc = AdcConfig {
            sample_rate_hz: 1.0,
            bits: 8,
            full_scale_v: 1.0,
            interleave_spur_dbc: f64::NEG_INFINITY,
        };
        SampleBlock::new(samples, adc, "t", true, 0).unwrap()
    }

    #[test]
    fn stream_reuses_seed_and_rejects_short_blocks() {
        let plan = ExtractionPlan::new(64, 8, 1.0, EntropyConvention::PerSample, 0.5, LengthMode::Paper).unwrap();
        assert_eq!(plan.m_out, 64);
        let seed = seed_new(512, 64, 3).unwrap();
        let samples: Vec<i16> = (0..64).map(|i| (i * 37 % 256 - 128) as i16).collect();
        let one = extract_stream(&[block(samples.clone())], &plan, &seed).unwrap();
        let two = extract_stream(&[block(samples.clone()), block(samples.clone())], &plan, &seed).unwrap();
        let mut expected = one.clone();
        expected.extend_from(&one);
        assert_eq!(two, expected);
        assert!(matches!(
            extract_stream(&[block(samples), block(vec![0; 63])], &plan, &seed),
            Err(Error::TooShort { needed: 64, got: 63 })
        ));
    }

    proptest! {
        #[test]
        fn gf2_linearity(seed_val in any::<u64>(), a in any::<u64>(), b in any::<u64>()) {
            let seed = seed_new(64, 32, seed_val).unwrap();
            let x = Bitstream::from_words(&[a], 64);
            let z = Bitstream::from_words(&[b], 64);
            let lhs = toeplitz_extract(&seed, &x.xor(&z).unwrap()).unwrap();
            let rhs = toeplitz_extract(&seed, &x).unwrap().xor(&toeplitz_extract(&seed, &z).unwrap()).unwrap();
            prop_assert_eq!(lhs, rhs);
        }

        #[test]
        fn unit_vectors_read_the_seed(seed_val in any::<u64>(), n in 1usize..200, frac in 0.0f64..1.0, j_frac in 0.0f64..1.0) {
            let m = ((n as f64 * frac) as usize).clamp(1, n);
            let seed = seed_new(n, m, seed_val).unwrap();
            let j = ((n as f64 * j_frac) as usize).min(n - 1);
            let mut e = Bitstream::zeros(n);
            e.set(j, true);
            for s in [Strategy::Packed, Strategy::Fft] {
                let y = toeplitz_extract_with(&seed, &e, s).unwrap();
                prop_assert_eq!(y.len(), m);
                for i in 0..m {
                    prop_assert_eq!(y.get(i), seed.bits().get(n - 1 + i - j));
                }
            }
        }

        #[test]
        fn strategies_agree(seed_val in any::<u64>(), n in 1usize..400, frac in 0.0f64..1.0, x_seed in any::<u64>()) {
            let m = ((n as f64 * frac) as usize).clamp(1, n);
            let seed = seed_new(n, m, seed_val).unwrap();
            let mut rng = stream(x_seed, 0);
            let words: Vec<u64> = (0..n.div_ceil(64)).map(|_| rng.next_u64()).collect();
            let x = Bitstream::from_words(&words, n);
            let reference = toeplitz_extract_naive(&seed, &x).unwrap();
            prop_assert_eq!(&toeplitz_extract_with(&seed, &x, Strategy::Packed).unwrap(), &reference);
            prop_assert_eq!(&toeplitz_extract_with(&seed, &x, Strategy::Fft).unwrap(), &reference);
        }
    }
}
