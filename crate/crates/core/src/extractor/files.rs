//! Seed files and key manifests.
//!
//! Seed file: magic "TSEE", u32 LE version, u64 LE n, u64 LE m, then the
//! n+m-1 seed bits packed little-endian within bytes.

use super::ToeplitzSeed;
use crate::bits::Bitstream;
use crate::entropy::{ExtractionPlan, LengthMode};
use crate::error::{Error, Result};
use sha2::{Digest, Sha256};
use std::io::{Read, Write};

pub const SEED_MAGIC: &[u8; 4] = b"TSEE";
pub const SEED_VERSION: u32 = 1;
const SEED_HEADER_LEN: usize = 24;

pub fn write_seed<W: Write>(mut w: W, seed: &ToeplitzSeed) -> Result<()> {
    w.write_all(SEED_MAGIC)?;
    w.write_all(&SEED_VERSION.to_le_bytes())?;
    w.write_all(&(seed.n() as u64).to_le_bytes())?;
    w.write_all(&(seed.m() as u64).to_le_bytes())?;
    w.write_all(seed.bits().as_bytes())?;
    w.flush()?;
    Ok(())
}

pub fn read_seed<R: Read>(mut r: R) -> Result<ToeplitzSeed> {
    let mut data = Vec::new();
    r.read_to_end(&mut data)?;
    if data.len() < SEED_HEADER_LEN {
        return Err(Error::Truncated {
            expected: SEED_HEADER_LEN,
            found: data.len(),
        });
    }
    if &data[..4] != SEED_MAGIC {
        return Err(Error::Format(format!(
            "bad seed magic {:?}, expected \"TSEE\"",
            &data[..4]
        )));
    }
    let version = u32::from_le_bytes(data[4..8].try_into().expect("4 bytes"));
    if version != SEED_VERSION {
        return Err(Error::Format(format!("unsupported seed version {version}")));
    }
    let n = u64::from_le_bytes(data[8..16].try_into().expect("8 bytes"));
    let m = u64::from_le_bytes(data[16..24].try_into().expect("8 bytes"));
    if m == 0 || m > n {
        return Err(Error::Format(format!("invalid seed shape n={n}, m={m}")));
    }
    let (n, m) = (n as usize, m as usize);
    let len = n + m - 1;
    let expected = SEED_HEADER_LEN + len.div_ceil(8);
    if data.len() < expected {
        return Err(Error::Truncated {
            expected,
            found: data.len(),
        });
    }
    if data.len() > expected {
        return Err(Error::Format(format!(
            "{} trailing bytes in seed file",
            data.len() - expected
        )));
    }
    let bits = Bitstream::from_bytes(data[SEED_HEADER_LEN..].to_vec(), len)?;
    ToeplitzSeed::from_bits(bits, n, m)
}

/// Sidecar manifest written next to a key file.
#[derive(Clone, Debug, PartialEq)]
pub struct KeyManifest {
    pub plan: ExtractionPlan,
    pub n_blocks: usize,
    pub seed_sha256: String,
    pub input_sha256: String,
    pub output_bits: usize,
    pub output_sha256: String,
}

impl KeyManifest {
    pub fn new(plan: &ExtractionPlan, seed: &ToeplitzSeed, inputs: &[Bitstream], output: &Bitstream) -> Self {
        let mut seed_bytes = Vec::new();
        write_seed(&mut seed_bytes, seed).expect("writing to memory");
        let mut input_hash = Sha256::new();
        for b in inputs {
            input_hash.update(b.as_bytes());
        }
        Self {
            plan: plan.clone(),
            n_blocks: inputs.len(),
            seed_sha256: hex::encode(Sha256::digest(&seed_bytes)),
            input_sha256: hex::encode(input_hash.finalize()),
            output_bits: output.len(),
            output_sha256: hex::encode(Sha256::digest(output.as_bytes())),
        }
    }

    pub fn to_text(&self) -> String {
        let mode = match self.plan.mode {
            LengthMode::Secure => "secure",
            LengthMode::Paper => "paper",
        };
        format!(
            "n_samples = {}\nbits_per_sample = {}\ninput_bits = {}\nhmin_per_sample = {}\nepsilon = {:e}\n\
             length_mode = {mode}\nm_out = {}\nblocks = {}\noutput_bits = {}\nseed_sha256 = {}\n\
             input_sha256 = {}\noutput_sha256 = {}\n",
            self.plan.n_samples,
            self.plan.bits_per_sample_raw,
            self.plan.input_bits(),
            self.plan.hmin_per_sample,
            self.plan.epsilon,
            self.plan.m_out,
            self.n_blocks,
            self.output_bits,
            self.seed_sha256,
            self.input_sha256,
            self.output_sha256,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::extractor::seed_new;

    #[test]
    fn seed_round_trip() {
        let seed = seed_new(1000, 123, 9).unwrap();
        let mut buf = Vec::new();
        write_seed(&mut buf, &seed).unwrap();
        assert_eq!(buf.len(), 24 + 1122usize.div_ceil(8));
        assert_eq!(read_seed(&buf[..]).unwrap(), seed);
    }

    #[test]
    fn seed_file_errors() {
        let seed = seed_new(64, 8, 1).unwrap();
        let mut buf = Vec::new();
        write_seed(&mut buf, &seed).unwrap();
        assert!(matches!(read_seed(&buf[..buf.len() - 1]), Err(Error::Truncated { .. })));
        let mut bad = buf.clone();
        bad[1] = b'X';
        assert!(matches!(read_seed(&bad[..]), Err(Error::Format(_))));
        let mut bad = buf.clone();
        bad[16..24].copy_from_slice(&100u64.to_le_bytes());
        assert!(matches!(read_seed(&bad[..]), Err(Error::Format(_))));
    }
}
