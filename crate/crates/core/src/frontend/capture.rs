//! Raw capture files.
//!
//! ```text
//! offset  size  field
//!      0     4  magic "VQRN"
//!      4     2  format version, u16 LE
//!      6     1  ADC bits
//!      7     1  flags (bit 0: lit)
//!      8     8  sample rate (Hz), f64 LE
//!     16     8  sample count, u64 LE
//!     24     8  reserved, zero
//!     32        samples: i8 for bits <= 8, i16 LE for 9..=16
//! ```
//!
//! The header carries no full-scale voltage, so ingestion takes it from the
//! caller.

use super::{AdcConfig, SampleBlock};
use crate::error::{Error, Result};
use std::io::{Read, Write};

pub const CAPTURE_MAGIC: &[u8; 4] = b"VQRN";
pub const CAPTURE_VERSION: u16 = 1;
pub const CAPTURE_HEADER_LEN: usize = 32;

pub fn write_capture<W: Write>(mut w: W, block: &SampleBlock) -> Result<()> {
    let adc = block.adc();
    let mut header = [0u8; CAPTURE_HEADER_LEN];
    header[..4].copy_from_slice(CAPTURE_MAGIC);
    header[4..6].copy_from_slice(&CAPTURE_VERSION.to_le_bytes());
    header[6] = adc.bits as u8;
    header[7] = u8::from(block.lit());
    header[8..16].copy_from_slice(&adc.sample_rate_hz.to_le_bytes());
    header[16..24].copy_from_slice(&(block.len() as u64).to_le_bytes());
    w.write_all(&header)?;
    let payload: Vec<u8> = if adc.bits <= 8 {
        block.samples().iter().map(|&s| s as i8 as u8).collect()
    } else {
        block.samples().iter().flat_map(|s| s.to_le_bytes()).collect()
    };
    w.write_all(&payload)?;
    w.flush()?;
    Ok(())
}

/// Parses a capture. `full_scale_v` and `interleave_spur_dbc` complete the
/// ADC description; `frontend_tag` labels the resulting block.
pub fn read_capture<R: Read>(mut r: R, full_scale_v: f64, frontend_tag: &str) -> Result<SampleBlock> {
    let mut data = Vec::new();
    r.read_to_end(&mut data)?;
    if data.len() < CAPTURE_HEADER_LEN {
        return Err(Error::Truncated {
            expected: CAPTURE_HEADER_LEN,
            found: data.len(),
        });
    }
    if &data[..4] != CAPTURE_MAGIC {
        return Err(Error::Format(format!("bad magic {:?}, expected \"VQRN\"", &data[..4])));
    }
    let version = u16::from_le_bytes([data[4], data[5]]);
    if version != CAPTURE_VERSION {
        return Err(Error::Format(format!("unsupported capture version {version}")));
    }
    let bits = u32::from(data[6]);
    if !(2..=16).contains(&bits) {
        return Err(Error::Format(format!("ADC bits {bits} outside [2, 16]")));
    }
    let flags = data[7];
    if flags & !1 != 0 {
        return Err(Error::Format(format!("unknown flag bits {flags:#04x}")));
    }
    let fs = f64::from_le_bytes(data[8..16].try_into().expect("8 bytes"));
    if !(fs > 0.0 && fs.is_finite()) {
        return Err(Error::Format(format!("invalid sample rate {fs}")));
    }
    let n = u64::from_le_bytes(data[16..24].try_into().expect("8 bytes"));
    if n == 0 {
        return Err(Error::Format("capture holds no samples".into()));
    }
    let width = if bits <= 8 { 1 } else { 2 };
    let expected = usize::try_from(n)
        .ok()
        .and_then(|n| n.checked_mul(width))
        .and_then(|b| b.checked_add(CAPTURE_HEADER_LEN))
        .ok_or_else(|| Error::Format(format!("sample count {n} too large")))?;
    if data.len() < expected {
        return Err(Error::Truncated {
            expected,
            found: data.len(),
        });
    }
    if data.len() > expected {
        return Err(Error::Format(format!(
            "{} trailing bytes after {n} samples",
            data.len() - expected
        )));
    }
    let payload = &data[CAPTURE_HEADER_LEN..];
    let samples: Vec<i16> = if width == 1 {
        payload.iter().map(|&b| i16::from(b as i8)).collect()
    } else {
        payload
            .chunks_exact(2)
            .map(|c| i16::from_le_bytes([c[0], c[1]]))
            .collect()
    };
    let adc = AdcConfig {
        sample_rate_hz: fs,
        bits,
        full_scale_v,
        interleave_spur_dbc: f64::NEG_INFINITY,
    };
    SampleBlock::new(samples, adc, frontend_tag, flags & 1 == 1, 0).map_err(|e| match e {
        Error::Domain(msg) => Error::Format(msg),
        other => other,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn block(bits: u32, samples: Vec<i16>, lit: bool) -> SampleBlock {
        let adc = AdcConfig {
            sample_rate_hz: 40e9,
            bits,
            full_scale_v: 0.5,
            interleave_spur_dbc: f64::NEG_INFINITY,
        };
        SampleBlock::new(samples, adc, "t", lit, 0).unwrap()
    }

    fn bytes(b: &SampleBlock) -> Vec<u8> {
        let mut out = Vec::new();
        write_capture(&mut out, b).unwrap();
        out
    }

    #[test]
    fn round_trip_8_and_12_bit() {
        for (bits, samples) in [(8, vec![-128, 127, 0, -1, 5]), (12, vec![-2048, 2047, 0, -300])] {
            let b = block(bits, samples, true);
            let data = bytes(&b);
            let width = if bits <= 8 { 1 } else { 2 };
            assert_eq!(data.len(), 32 + width * b.len());
            let back = read_capture(&data[..], 0.5, "t").unwrap();
            assert_eq!(back.samples(), b.samples());
            assert!(back.lit());
            assert_eq!(back.adc().bits, bits);
        }
    }

    #[test]
    fn dark_flag_is_zero() {
        let data = bytes(&block(8, vec![1, 2], false));
        assert_eq!(data[7], 0);
    }

    #[test]
    fn truncated_payload() {
        let data = bytes(&block(8, vec![1, 2, 3], false));
        match read_capture(&data[..34], 0.5, "t") {
            Err(Error::Truncated {
                expected: 35,
                found: 34,
            }) => {}
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(
            read_capture(&data[..10], 0.5, "t"),
            Err(Error::Truncated { .. })
        ));
    }

    #[test]
    fn wrong_magic_and_trailing_bytes() {
        let mut data = bytes(&block(8, vec![1, 2, 3], false));
        let mut bad = data.clone();
        bad[0] = b'X';
        assert!(matches!(read_capture(&bad[..], 0.5, "t"), Err(Error::Format(_))));
        data.push(0);
        assert!(matches!(read_capture(&data[..], 0.5, "t"), Err(Error::Format(_))));
    }

    #[test]
    fn out_of_range_samples_rejected() {
        // 4-bit capture holding the value 100
        let mut data = bytes(&block(4, vec![1, 2], false));
        data[6] = 4;
        data[32] = 100;
        assert!(matches!(read_capture(&data[..], 0.5, "t"), Err(Error::Format(_))));
    }
}
