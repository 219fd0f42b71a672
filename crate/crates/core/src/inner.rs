//! The inner function `f`: RawSHAKE256 with a 512-bit image, built on
//! Keccak-f\[1600\].
//!
//! The sponge runs at rate 1088 / capacity 512 as specified by FIPS 202 for
//! the SHAKE256 family. Node contents are absorbed incrementally, at bit
//! granularity, so a tree node can be consumed piecewise as its payload
//! arrives. Finalizing appends the RawSHAKE domain suffix `11` and pad10*1,
//! and hands back a [`Squeezer`] so the root node can emit arbitrary-length
//! output.

use crate::bits::BitString;

/// Sponge rate in bits (1600 - 512 capacity).
pub const RATE_BITS: usize = 1088;
/// Sponge rate in bytes.
pub const RATE_BYTES: usize = RATE_BITS / 8;
/// Width of a chaining value in bits; equal to the capacity.
pub const CV_BITS: usize = 512;
/// Width of a chaining value in bytes.
pub const CV_BYTES: usize = CV_BITS / 8;

const ROUND_CONSTANTS: [u64; 24] = [
    0x0000000000000001,
    0x0000000000008082,
    0x800000000000808a,
    0x8000000080008000,
    0x000000000000808b,
    0x0000000080000001,
    0x8000000080008081,
    0x8000000000008009,
    0x000000000000008a,
    0x0000000000000088,
    0x0000000080008009,
    0x000000008000000a,
    0x000000008000808b,
    0x800000000000008b,
    0x8000000000008089,
    0x8000000000008003,
    0x8000000000008002,
    0x8000000000000080,
    0x000000000000800a,
    0x800000008000000a,
    0x8000000080008081,
    0x8000000000008080,
    0x0000000080000001,
    0x8000000080008008,
];

const ROTATIONS: [u32; 24] = [
    1, 3, 6, 10, 15, 21, 28, 36, 45, 55, 2, 14, 27, 41, 56, 8, 25, 43, 62, 18, 39, 61, 20, 44,
];

const PI_LANES: [usize; 24] = [
    10, 7, 11, 17, 18, 3, 5, 16, 8, 21, 24, 4, 15, 23, 19, 13, 12, 2, 20, 14, 22, 9, 6, 1,
];

/// Applies the 24-round Keccak-f\[1600\] permutation in place.
///
/// Lane `(x, y)` is `state[x + 5 * y]`, bytes little-endian within a lane,
/// as standardized in FIPS 202.
pub fn keccak_f1600(state: &mut [u64; 25]) {
    for &rc in &ROUND_CONSTANTS {
        // theta
        let mut parity = [0u64; 5];
        for x in 0..5 {
            parity[x] =
                state[x] ^ state[x + 5] ^ state[x + 10] ^ state[x + 15] ^ state[x + 20];
        }
        for x in 0..5 {
            let d = parity[(x + 4) % 5] ^ parity[(x + 1) % 5].rotate_left(1);
            for y in 0..5 {
                state[x + 5 * y] ^= d;
            }
        }
        // rho and pi combined
        let mut carry = state[1];
        for i in 0..24 {
            let lane = PI_LANES[i];
            let tmp = state[lane];
            state[lane] = carry.rotate_left(ROTATIONS[i]);
            carry = tmp;
        }
        // chi
        for y in 0..5 {
            let row: [u64; 5] = std::array::from_fn(|x| state[5 * y + x]);
            for x in 0..5 {
                state[5 * y + x] = row[x] ^ (!row[(x + 1) % 5] & row[(x + 2) % 5]);
            }
        }
        // iota
        state[0] ^= rc;
    }
}

/// A 512-bit image of the inner function.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct ChainingValue(pub [u8; CV_BYTES]);

impl ChainingValue {
    pub fn as_bytes(&self) -> &[u8; CV_BYTES] {
        &self.0
    }
}

impl std::fmt::Debug for ChainingValue {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "ChainingValue(")?;
        for b in &self.0[..8] {
            write!(f, "{b:02x}")?;
        }
        write!(f, "..)")
    }
}

/// An absorbing RawSHAKE256 sponge.
///
/// Chunks may arrive in any mix of byte- and bit-granular pieces; absorbing
/// `c1`, .., `ck` then finalizing is equivalent to one-shot evaluation on the
/// concatenation. Finalizing consumes the sponge, so use-after-finalize is
/// unrepresentable.
#[derive(Clone)]
pub struct Sponge {
    lanes: [u64; 25],
    block: [u8; RATE_BYTES],
    block_bits: usize,
    permutation_calls: u64,
}

impl Default for Sponge {
    fn default() -> Self {
        Self::new()
    }
}

impl Sponge {
    pub fn new() -> Self {
        Self {
            lanes: [0; 25],
            block: [0; RATE_BYTES],
            block_bits: 0,
            permutation_calls: 0,
        }
    }

    /// Bit offset within the current rate block.
    pub fn absorb_offset(&self) -> usize {
        self.block_bits
    }

    /// Permutation calls made so far.
    pub fn permutation_calls(&self) -> u64 {
        self.permutation_calls
    }

    fn fold_block(&mut self) {
        debug_assert_eq!(self.block_bits, RATE_BITS);
        for (lane, chunk) in self.lanes[..RATE_BYTES / 8]
            .iter_mut()
            .zip(self.block.chunks_exact(8))
        {
            *lane ^= u64::from_le_bytes(chunk.try_into().unwrap());
        }
        keccak_f1600(&mut self.lanes);
        self.permutation_calls += 1;
        self.block = [0; RATE_BYTES];
        self.block_bits = 0;
    }

    pub fn absorb_bytes(&mut self, mut data: &[u8]) {
        if self.block_bits.is_multiple_of(8) {
            while !data.is_empty() {
                let pos = self.block_bits / 8;
                let take = (RATE_BYTES - pos).min(data.len());
                for (dst, src) in self.block[pos..pos + take].iter_mut().zip(&data[..take]) {
                    *dst ^= *src;
                }
                self.block_bits += take * 8;
                data = &data[take..];
                if self.block_bits == RATE_BITS {
                    self.fold_block();
                }
            }
        } else {
            for &b in data {
                self.absorb_low_bits(b, 8);
            }
        }
    }

    /// Absorbs the `count` low bits of `byte`, LSB first.
    pub fn absorb_low_bits(&mut self, byte: u8, count: usize) {
        debug_assert!(count <= 8);
        let shift = self.block_bits % 8;
        let pos = self.block_bits / 8;
        let bits = byte & if count == 8 { 0xff } else { (1 << count) - 1 };
        self.block[pos] ^= bits << shift;
        if shift + count > 8 && pos + 1 < RATE_BYTES {
            self.block[pos + 1] ^= bits >> (8 - shift);
        }
        self.block_bits += count;
        if self.block_bits > RATE_BITS {
            // The straddled tail bits landed past the rate; re-absorb them.
            let over = self.block_bits - RATE_BITS;
            self.block_bits = RATE_BITS;
            let tail = bits >> (count - over);
            self.fold_block();
            self.absorb_low_bits(tail, over);
        } else if self.block_bits == RATE_BITS {
            self.fold_block();
        }
    }

    /// Absorbs zero-valued bits, advancing the position only.
    pub fn absorb_zero_bits(&mut self, mut count: u64) {
        while count > 0 {
            let room = (RATE_BITS - self.block_bits) as u64;
            let take = room.min(count);
            self.block_bits += take as usize;
            count -= take;
            if self.block_bits == RATE_BITS {
                self.fold_block();
            }
        }
    }

    pub fn absorb_bits(&mut self, bits: &BitString) {
        let whole = bits.len() / 8;
        self.absorb_bytes(&bits.as_bytes()[..whole]);
        if !bits.len().is_multiple_of(8) {
            self.absorb_low_bits(bits.as_bytes()[whole], bits.len() % 8);
        }
    }

    /// Appends the RawSHAKE suffix `11` and pad10*1, runs the final
    /// permutation, and switches to squeezing.
    pub fn finalize(mut self) -> Squeezer {
        self.absorb_low_bits(0b11, 2);
        // pad10*1
        self.absorb_low_bits(1, 1);
        let zeros = (RATE_BITS - 1 - self.block_bits) % RATE_BITS;
        self.absorb_zero_bits(zeros as u64);
        self.absorb_low_bits(1, 1);
        debug_assert_eq!(self.block_bits, 0);
        Squeezer {
            lanes: self.lanes,
            offset: 0,
            permutation_calls: self.permutation_calls,
        }
    }
}

/// Squeezing phase of a finalized sponge.
///
/// Cloning gives an independent output stream, which is how the root node
/// re-reads its prefix when an extended digest is requested.
#[derive(Clone)]
pub struct Squeezer {
    lanes: [u64; 25],
    offset: usize,
    permutation_calls: u64,
}

impl Squeezer {
    /// Permutation calls spent in the absorbing phase.
    pub fn absorb_permutation_calls(&self) -> u64 {
        self.permutation_calls
    }

    pub fn read(&mut self, out: &mut [u8]) {
        for b in out.iter_mut() {
            if self.offset == RATE_BYTES {
                keccak_f1600(&mut self.lanes);
                self.offset = 0;
            }
            *b = self.lanes[self.offset / 8].to_le_bytes()[self.offset % 8];
            self.offset += 1;
        }
    }

    /// The 512-bit image, without advancing this squeezer.
    pub fn chaining_value(&self) -> ChainingValue {
        let mut cv = [0u8; CV_BYTES];
        self.clone().read(&mut cv);
        ChainingValue(cv)
    }
}

/// One-shot inner function on a bit string.
pub fn f(node_bits: &BitString) -> ChainingValue {
    let mut sponge = Sponge::new();
    sponge.absorb_bits(node_bits);
    sponge.finalize().chaining_value()
}

/// Plain SHAKE256 over bytes, used as an independent route in tests and for
/// the single-node digest identity.
pub fn shake256(message: &[u8], out: &mut [u8]) {
    let mut sponge = Sponge::new();
    sponge.absorb_bytes(message);
    // SHAKE suffix 1111; equivalent to RawSHAKE of message || 11.
    sponge.absorb_low_bits(0b11, 2);
    sponge.finalize().read(out);
}
