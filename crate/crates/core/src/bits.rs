//! Bit strings with the FIPS 202 bit ordering.
//!
//! Bit `i` of a string lives in byte `i / 8` at position `i % 8`, least
//! significant bit first. This matches how SHA-3 implementations fold byte
//! streams and domain-separation suffixes into the sponge, so a framed node
//! can be handed to the inner function without any re-ordering.

/// A bit string of arbitrary length.
///
/// Unused high bits of the last byte are kept at zero, so equality and
/// hashing on the raw storage are canonical.
#[derive(Clone, Default, PartialEq, Eq, Hash)]
pub struct BitString {
    bytes: Vec<u8>,
    bit_len: usize,
}

impl BitString {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_capacity(bits: usize) -> Self {
        Self {
            bytes: Vec::with_capacity(bits.div_ceil(8)),
            bit_len: 0,
        }
    }

    /// Whole bytes, eight bits per byte.
    pub fn from_bytes(bytes: &[u8]) -> Self {
        Self {
            bytes: bytes.to_vec(),
            bit_len: bytes.len() * 8,
        }
    }

    /// The first `bit_len` bits of `bytes`; surplus bits of the last byte
    /// are masked off.
    pub fn from_bits(bytes: &[u8], bit_len: usize) -> Self {
        assert!(bit_len <= bytes.len() * 8, "bit length exceeds storage");
        let mut bytes = bytes[..bit_len.div_ceil(8)].to_vec();
        if !bit_len.is_multiple_of(8) {
            if let Some(last) = bytes.last_mut() {
                *last &= (1u8 << (bit_len % 8)) - 1;
            }
        }
        Self { bytes, bit_len }
    }

    pub fn len(&self) -> usize {
        self.bit_len
    }

    pub fn is_empty(&self) -> bool {
        self.bit_len == 0
    }

    /// Backing bytes; the last byte may be partially used.
    pub fn as_bytes(&self) -> &[u8] {
        &self.bytes
    }

    pub fn bit(&self, i: usize) -> bool {
        assert!(i < self.bit_len, "bit index out of range");
        self.bytes[i / 8] >> (i % 8) & 1 == 1
    }

    pub fn push_bit(&mut self, bit: bool) {
        if self.bit_len.is_multiple_of(8) {
            self.bytes.push(0);
        }
        if bit {
            self.bytes[self.bit_len / 8] |= 1 << (self.bit_len % 8);
        }
        self.bit_len += 1;
    }

    /// Appends `count` zero bits.
    pub fn push_zeros(&mut self, count: usize) {
        let new_len = self.bit_len + count;
        self.bytes.resize(new_len.div_ceil(8), 0);
        self.bit_len = new_len;
    }

    /// Appends eight bits per byte.
    pub fn push_bytes(&mut self, bytes: &[u8]) {
        if self.bit_len.is_multiple_of(8) {
            self.bytes.extend_from_slice(bytes);
            self.bit_len += bytes.len() * 8;
        } else {
            for &b in bytes {
                self.push_low_bits(b, 8);
            }
        }
    }

    /// Appends the `count` low bits of `byte`, LSB first.
    pub fn push_low_bits(&mut self, byte: u8, count: usize) {
        debug_assert!(count <= 8);
        for i in 0..count {
            self.push_bit(byte >> i & 1 == 1);
        }
    }

    pub fn extend(&mut self, other: &BitString) {
        if self.bit_len.is_multiple_of(8) {
            self.bytes.extend_from_slice(&other.bytes);
            self.bit_len += other.bit_len;
        } else {
            for i in 0..other.bit_len {
                self.push_bit(other.bit(i));
            }
        }
    }

    /// The bits in `range`, as a new string.
    pub fn slice(&self, range: std::ops::Range<usize>) -> BitString {
        assert!(range.end <= self.bit_len && range.start <= range.end);
        if range.start.is_multiple_of(8) {
            return BitString::from_bits(
                &self.bytes[range.start / 8..range.end.div_ceil(8)],
                range.end - range.start,
            );
        }
        let mut out = BitString::with_capacity(range.end - range.start);
        for i in range {
            out.push_bit(self.bit(i));
        }
        out
    }
}

impl std::fmt::Debug for BitString {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "BitString[{} bits;", self.bit_len)?;
        for b in &self.bytes {
            write!(f, " {b:02x}")?;
        }
        write!(f, "]")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bit_order_is_lsb_first() {
        let mut bs = BitString::new();
        bs.push_bit(true);
        bs.push_bit(true);
        bs.push_bit(false);
        bs.push_bit(true);
        // bits 1,1,0,1 -> 0b1011 = 0x0b
        assert_eq!(bs.as_bytes(), &[0x0b]);
        assert_eq!(bs.len(), 4);
        assert!(bs.bit(0) && bs.bit(1) && !bs.bit(2) && bs.bit(3));
    }

    #[test]
    fn push_bytes_after_bits_keeps_order() {
        let mut a = BitString::new();
        a.push_bit(true);
        a.push_bytes(&[0xa5]);
        let mut b = BitString::new();
        b.push_bit(true);
        for i in 0..8 {
            b.push_bit(0xa5u8 >> i & 1 == 1);
        }
        assert_eq!(a, b);
    }

    #[test]
    fn from_bits_masks_tail() {
        let bs = BitString::from_bits(&[0xff, 0xff], 10);
        assert_eq!(bs.as_bytes(), &[0xff, 0x03]);
        assert_eq!(bs.len(), 10);
    }

    #[test]
    fn slice_unaligned() {
        let bs = BitString::from_bytes(&[0b1100_1010, 0b0101_0011]);
        let s = bs.slice(3..12);
        assert_eq!(s.len(), 9);
        for i in 0..9 {
            assert_eq!(s.bit(i), bs.bit(i + 3));
        }
    }
}
