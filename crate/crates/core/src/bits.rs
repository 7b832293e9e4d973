//! Packed bit sequences.
//!
//! Bits are packed little-endian within bytes: bit 0 of byte 0 is the first
//! bit of the stream. Padding bits of the last byte are always zero, so two
//! streams compare equal exactly when their bit sequences do.

use crate::error::{Error, Result};

#[derive(Clone, Default, PartialEq, Eq, Hash)]
pub struct Bitstream {
    bytes: Vec<u8>,
    len: usize,
}

impl std::fmt::Debug for Bitstream {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        const SHOWN: usize = 64;
        let head: String = self.iter().take(SHOWN).map(|b| if b { '1' } else { '0' }).collect();
        let ellipsis = if self.len > SHOWN { "…" } else { "" };
        write!(f, "Bitstream({} bits: {head}{ellipsis})", self.len)
    }
}

impl Bitstream {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_capacity(bits: usize) -> Self {
        Self {
            bytes: Vec::with_capacity(bits.div_ceil(8)),
            len: 0,
        }
    }

    pub fn zeros(len: usize) -> Self {
        Self {
            bytes: vec![0; len.div_ceil(8)],
            len,
        }
    }

    /// Wraps packed bytes holding `len` bits. Fails if the byte count does not
    /// match `len` or if padding bits are set.
    pub fn from_bytes(bytes: Vec<u8>, len: usize) -> Result<Self> {
        if bytes.len() != len.div_ceil(8) {
            return Err(Error::LengthMismatch {
                expected: len.div_ceil(8),
                actual: bytes.len(),
            });
        }
        let s = Self { bytes, len };
        if let Some(&last) = s.bytes.last() {
            let used = len - 8 * (s.bytes.len() - 1);
            if used < 8 && last >> used != 0 {
                return Err(Error::Format("padding bits of the last byte are not zero".into()));
            }
        }
        Ok(s)
    }

    /// Whole bytes, every bit significant.
    pub fn from_byte_vec(bytes: Vec<u8>) -> Self {
        let len = bytes.len() * 8;
        Self { bytes, len }
    }

    pub fn from_bools<I: IntoIterator<Item = bool>>(bits: I) -> Self {
        let iter = bits.into_iter();
        let mut s = Self::with_capacity(iter.size_hint().0);
        for b in iter {
            s.push(b);
        }
        s
    }

    /// Parses a string of `'0'`/`'1'` characters; whitespace is ignored.
    pub fn from_ascii(text: &str) -> Result<Self> {
        let mut s = Self::with_capacity(text.len());
        for c in text.chars() {
            match c {
                '0' => s.push(false),
                '1' => s.push(true),
                c if c.is_whitespace() => {}
                other => return Err(Error::Format(format!("unexpected character {other:?} in bit string"))),
            }
        }
        Ok(s)
    }

    pub fn to_ascii(&self) -> String {
        self.iter().map(|b| if b { '1' } else { '0' }).collect()
    }

    /// Builds a stream from 64-bit words (bit `i` at word `i / 64`, position `i % 64`).
    pub fn from_words(words: &[u64], len: usize) -> Self {
        assert!(len <= words.len() * 64, "word buffer too short for {len} bits");
        let mut bytes: Vec<u8> = words.iter().flat_map(|w| w.to_le_bytes()).collect();
        bytes.truncate(len.div_ceil(8));
        let mut s = Self { bytes, len };
        s.clear_padding();
        s
    }

    pub fn to_words(&self) -> Vec<u64> {
        self.bytes
            .chunks(8)
            .map(|chunk| {
                let mut buf = [0u8; 8];
                buf[..chunk.len()].copy_from_slice(chunk);
                u64::from_le_bytes(buf)
            })
            .collect()
    }

    /// One byte per bit, each 0 or 1.
    pub fn to_unpacked(&self) -> Vec<u8> {
        self.iter().map(u8::from).collect()
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.bytes
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.bytes
    }

    #[inline]
    pub fn get(&self, i: usize) -> bool {
        assert!(i < self.len, "bit index {i} out of range for length {}", self.len);
        self.bytes[i >> 3] >> (i & 7) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, i: usize, value: bool) {
        assert!(i < self.len, "bit index {i} out of range for length {}", self.len);
        let mask = 1u8 << (i & 7);
        if value {
            self.bytes[i >> 3] |= mask;
        } else {
            self.bytes[i >> 3] &= !mask;
        }
    }

    #[inline]
    pub fn push(&mut self, value: bool) {
        if self.len % 8 == 0 {
            self.bytes.push(0);
        }
        if value {
            self.bytes[self.len >> 3] |= 1 << (self.len & 7);
        }
        self.len += 1;
    }

    /// Appends the low `count` bits of `value`, least significant first.
    pub fn push_bits(&mut self, value: u64, count: u32) {
        for k in 0..count {
            self.push(value >> k & 1 == 1);
        }
    }

    pub fn extend_from(&mut self, other: &Bitstream) {
        if self.len % 8 == 0 {
            self.bytes.extend_from_slice(&other.bytes);
            self.len += other.len;
        } else {
            for b in other.iter() {
                self.push(b);
            }
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = bool> + '_ {
        (0..self.len).map(move |i| self.bytes[i >> 3] >> (i & 7) & 1 == 1)
    }

    pub fn count_ones(&self) -> usize {
        self.bytes.iter().map(|b| b.count_ones() as usize).sum()
    }

    /// The first `len` bits.
    pub fn prefix(&self, len: usize) -> Bitstream {
        let len = len.min(self.len);
        let mut bytes = self.bytes[..len.div_ceil(8)].to_vec();
        let used = len % 8;
        if used != 0 {
            if let Some(last) = bytes.last_mut() {
                *last &= (1u8 << used) - 1;
            }
        }
        Bitstream { bytes, len }
    }

    pub fn xor(&self, other: &Bitstream) -> Result<Bitstream> {
        if self.len != other.len {
            return Err(Error::LengthMismatch {
                expected: self.len,
                actual: other.len,
            });
        }
        let bytes = self.bytes.iter().zip(&other.bytes).map(|(a, b)| a ^ b).collect();
        Ok(Bitstream { bytes, len: self.len })
    }

    fn clear_padding(&mut self) {
        let used = self.len % 8;
        if used != 0 {
            if let Some(last) = self.bytes.last_mut() {
                *last &= (1u8 << used) - 1;
            }
        }
    }
}

impl FromIterator<bool> for Bitstream {
    fn from_iter<I: IntoIterator<Item = bool>>(iter: I) -> Self {
        Self::from_bools(iter)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn packing_is_little_endian_within_bytes() {
        let s = Bitstream::from_ascii("1000 0000 01").unwrap();
        assert_eq!(s.as_bytes(), &[0x01, 0x02]);
        assert_eq!(s.len(), 10);
    }

    #[test]
    fn rejects_dirty_padding() {
        assert!(Bitstream::from_bytes(vec![0xff], 4).is_err());
        assert!(Bitstream::from_bytes(vec![0x0f], 4).is_ok());
        assert!(Bitstream::from_bytes(vec![0x0f, 0], 4).is_err());
    }

    #[test]
    fn prefix_clears_trailing_bits() {
        let s = Bitstream::from_byte_vec(vec![0xff, 0xff]);
        let p = s.prefix(11);
        assert_eq!(p.len(), 11);
        assert_eq!(p.as_bytes(), &[0xff, 0x07]);
    }

    #[test]
    fn extend_handles_unaligned_tail() {
        let mut a = Bitstream::from_ascii("101").unwrap();
        a.extend_from(&Bitstream::from_ascii("0011").unwrap());
        assert_eq!(a.to_ascii(), "1010011");
    }

    proptest! {
        #[test]
        fn words_and_bools_agree(bits in proptest::collection::vec(any::<bool>(), 0..300)) {
            let s = Bitstream::from_bools(bits.iter().copied());
            prop_assert_eq!(s.len(), bits.len());
            prop_assert!(s.len() <= 8 * s.as_bytes().len() && 8 * s.as_bytes().len() < s.len() + 8);
            let back = Bitstream::from_words(&s.to_words(), s.len());
            prop_assert_eq!(&back, &s);
            prop_assert_eq!(s.iter().collect::<Vec<_>>(), bits);
        }
    }
}
