//! Sakura node coding: the bit-exact serialization of tree nodes into
//! inner-function inputs, and its inverse.
//!
//! Four framing cases exist, distinguished by suffix bits that are parsed
//! from the end of the input:
//!
//! ```text
//! leaf,  non-root:  payload || 1 1 0* 0
//! leaf,  root:      payload || 1 1
//! inner, non-root:  payload || enc(arity) || {I} || 0 1 0* 0
//! inner, root:      payload || enc(arity) || {I} || 0 1
//! ```
//!
//! `0*` is the minimal zero run aligning the total length to the word size
//! (root nodes get none). `enc` is a minimal big-endian integer followed by
//! its own byte length. `{I}` is the two-byte interleaving code, mantissa
//! then exponent, `0xff 0xff` meaning "no interleaving"; when a node does
//! interleave, one extra byte carries the sibling group size, so the code
//! is three bytes total and stays parseable from the rear because the
//! exponent byte is capped below `0xff`. The wire format is normative and
//! documented in `docs/format.md`.

use crate::bits::BitString;
use crate::error::{Error, Result};
use crate::inner::CV_BITS;

/// Frame-level constants: word size for alignment padding.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct FrameConfig {
    pub word_bits: u32,
}

impl Default for FrameConfig {
    fn default() -> Self {
        FrameConfig { word_bits: 64 }
    }
}

impl FrameConfig {
    pub fn new(word_bits: u32) -> Result<Self> {
        if word_bits == 32 || word_bits == 64 {
            Ok(FrameConfig { word_bits })
        } else {
            Err(Error::config("word size must be 32 or 64 bits"))
        }
    }
}

/// Marker byte pair for "no interleaving".
pub const NO_INTERLEAVE_CODE: [u8; 2] = [0xff, 0xff];

/// What a node is, as far as the wire format cares.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct NodeKind {
    pub class: NodeClass,
    pub is_root: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum NodeClass {
    /// Payload is message bits; no arity coding.
    Leaf,
    /// Payload is `arity` chaining values; carries arity and interleave
    /// coding.
    Inner {
        arity: u64,
        /// Interleaving block size in bits and sibling group size, or
        /// `None` for `{I_infinity}`.
        interleave: Option<(u64, u64)>,
    },
}

impl NodeKind {
    pub fn leaf(is_root: bool) -> Self {
        NodeKind {
            class: NodeClass::Leaf,
            is_root,
        }
    }

    pub fn inner(arity: u64, is_root: bool) -> Self {
        NodeKind {
            class: NodeClass::Inner {
                arity,
                interleave: None,
            },
            is_root,
        }
    }

    pub fn inner_interleaved(arity: u64, is_root: bool, block_bits: u64, group: u64) -> Self {
        NodeKind {
            class: NodeClass::Inner {
                arity,
                interleave: Some((block_bits, group)),
            },
            is_root,
        }
    }
}

/// Big-endian fixed-length integer encoding (I2OSP from PKCS#1).
pub fn i2osp(x: u64, len: usize) -> Result<Vec<u8>> {
    if len < 8 && x >= 1u64 << (8 * len) {
        return Err(Error::frame(format!("{x} does not fit in {len} bytes")));
    }
    let mut out = vec![0u8; len];
    let be = x.to_be_bytes();
    if len >= 8 {
        out[len - 8..].copy_from_slice(&be);
    } else {
        out.copy_from_slice(&be[8 - len..]);
    }
    Ok(out)
}

/// Arity encoding: minimal-length I2OSP followed by one length byte.
pub fn enc(x: u64) -> Result<Vec<u8>> {
    if x == 0 {
        return Err(Error::frame("arity 0 cannot be encoded"));
    }
    let len = (64 - x.leading_zeros()).div_ceil(8) as usize;
    let mut out = i2osp(x, len)?;
    out.push(len as u8);
    Ok(out)
}

/// Two-byte floating-point code for an interleaving block size: mantissa
/// then exponent, value `m * 2^e`, with the minimal exponent and both bytes
/// capped at 254 (`0xff 0xff` is reserved for "none").
pub fn interleave_code(block_bits: u64) -> Result<[u8; 2]> {
    if block_bits == 0 {
        return Err(Error::frame("interleaving block size must be positive"));
    }
    let mut m = block_bits;
    let mut e = 0u32;
    while m > 254 {
        if !m.is_multiple_of(2) {
            return Err(Error::frame(format!(
                "interleaving block size {block_bits} has no mantissa*2^exponent code"
            )));
        }
        m /= 2;
        e += 1;
    }
    if e > 254 {
        return Err(Error::frame("interleaving exponent out of range"));
    }
    Ok([m as u8, e as u8])
}

/// Encodes an interleaving block size (or its absence) with an optional
/// trailing group-size byte.
pub fn encode_interleave(block_bits: Option<u64>, group: Option<u64>) -> Result<Vec<u8>> {
    let mut out = match block_bits {
        None => NO_INTERLEAVE_CODE.to_vec(),
        Some(bits) => interleave_code(bits)?.to_vec(),
    };
    if let Some(g) = group {
        if block_bits.is_none() {
            return Err(Error::frame("group size without an interleaving block size"));
        }
        if !(1..=255).contains(&g) {
            return Err(Error::frame("group size must lie in 1..=255"));
        }
        out.push(g as u8);
    }
    Ok(out)
}

fn decode_interleave_code(m: u8, e: u8) -> Result<u64> {
    if m == 0xff || e == 0xff {
        return Err(Error::frame("reserved interleave byte in coded value"));
    }
    u64::from(m)
        .checked_shl(u32::from(e))
        .filter(|v| *v >> e == u64::from(m))
        .ok_or_else(|| Error::frame("interleave code overflows"))
}

/// Suffix bits appended after a node's payload, including arity/interleave
/// coding for inner nodes and the alignment run for non-root nodes.
///
/// `pad_to_bits` stretches the zero run so the framed input reaches exactly
/// that length — used to give the short last node of a fixed-arity level
/// the same f-input length as its siblings. Root nodes take no alignment
/// and cannot be stretched.
pub fn frame_suffix(
    payload_bits: u64,
    kind: &NodeKind,
    config: &FrameConfig,
    pad_to_bits: Option<u64>,
) -> Result<BitString> {
    let mut suffix = BitString::new();
    match &kind.class {
        NodeClass::Leaf => {
            suffix.push_bit(true);
            suffix.push_bit(true);
        }
        NodeClass::Inner { arity, interleave } => {
            if payload_bits != arity * CV_BITS as u64 {
                return Err(Error::frame(format!(
                    "inner node of arity {arity} needs a {}-bit payload, got {payload_bits}",
                    arity * CV_BITS as u64
                )));
            }
            suffix.push_bytes(&enc(*arity)?);
            match interleave {
                None => suffix.push_bytes(&NO_INTERLEAVE_CODE),
                Some((bits, group)) => {
                    suffix.push_bytes(&encode_interleave(Some(*bits), Some(*group))?)
                }
            }
            suffix.push_bit(false);
            suffix.push_bit(true);
        }
    }
    if kind.is_root {
        if pad_to_bits.is_some() {
            return Err(Error::frame("root nodes take no alignment padding"));
        }
        return Ok(suffix);
    }
    let word = u64::from(config.word_bits);
    let before_run = payload_bits + suffix.len() as u64;
    let min_total = (before_run + 1).div_ceil(word) * word;
    let total = match pad_to_bits {
        None => min_total,
        Some(target) => {
            if target < min_total || target % word != 0 {
                return Err(Error::frame(format!(
                    "cannot pad a {before_run}-bit frame to {target} bits"
                )));
            }
            target
        }
    };
    suffix.push_zeros((total - before_run - 1) as usize);
    suffix.push_bit(false);
    Ok(suffix)
}

/// Serializes a whole node: payload followed by its frame suffix.
pub fn frame_node(
    payload: &BitString,
    kind: &NodeKind,
    config: &FrameConfig,
    pad_to_bits: Option<u64>,
) -> Result<BitString> {
    let suffix = frame_suffix(payload.len() as u64, kind, config, pad_to_bits)?;
    let mut out = BitString::with_capacity(payload.len() + suffix.len());
    out.extend(payload);
    out.extend(&suffix);
    Ok(out)
}

/// Parses an f-input produced by [`frame_node`] back into its kind and
/// payload. Inputs are read from the end: the last bit separates root from
/// non-root, the preceding marker separates leaf from inner.
pub fn decode_node(input: &BitString, config: &FrameConfig) -> Result<(NodeKind, BitString)> {
    let len = input.len();
    if len < 2 {
        return Err(Error::decode(0, "input shorter than any frame"));
    }
    let is_root = input.bit(len - 1);
    let body_end;
    let leaf;
    if is_root {
        leaf = input.bit(len - 2);
        body_end = len - 2;
    } else {
        if !(len as u64).is_multiple_of(u64::from(config.word_bits)) {
            return Err(Error::decode(
                len as u64,
                format!("non-root input length {len} is not word aligned"),
            ));
        }
        // Skip the trailing zero of "0* 0", then the zero run, landing on a
        // guaranteed marker bit.
        let mut pos = len - 1;
        while pos > 0 && !input.bit(pos - 1) {
            pos -= 1;
        }
        if pos == 0 {
            return Err(Error::decode(0, "no marker bit found before the zero run"));
        }
        if pos < 2 {
            return Err(Error::decode(pos as u64, "marker bit has no class bit"));
        }
        leaf = input.bit(pos - 2);
        body_end = pos - 2;
    }
    if leaf {
        return Ok((NodeKind::leaf(is_root), input.slice(0..body_end)));
    }

    // Inner node: class bit 0; before it, byte-aligned {I} and enc fields.
    if body_end % 8 != 0 {
        return Err(Error::decode(
            body_end as u64,
            "inner-node coding region is not byte aligned",
        ));
    }
    let bytes = body_end / 8;
    let byte_at = |i: usize| input.as_bytes()[i];
    if bytes < 2 {
        return Err(Error::decode(body_end as u64, "inner node too short for {I}"));
    }
    let (interleave, after_i) =
        if byte_at(bytes - 2) == 0xff && byte_at(bytes - 1) == 0xff {
            (None, bytes - 2)
        } else {
            if bytes < 3 {
                return Err(Error::decode(
                    body_end as u64,
                    "interleaved node too short for {I} plus group size",
                ));
            }
            let block_bits = decode_interleave_code(byte_at(bytes - 3), byte_at(bytes - 2))
                .map_err(|e| Error::decode(8 * (bytes as u64 - 3), e.to_string()))?;
            let group = u64::from(byte_at(bytes - 1));
            if group == 0 {
                return Err(Error::decode(8 * (bytes as u64 - 1), "group size 0"));
            }
            (Some((block_bits, group)), bytes - 3)
        };
    if after_i < 1 {
        return Err(Error::decode(8 * after_i as u64, "missing arity coding"));
    }
    let enc_len = usize::from(byte_at(after_i - 1));
    if enc_len == 0 || enc_len > 8 || after_i < enc_len + 1 {
        return Err(Error::decode(
            8 * (after_i as u64 - 1),
            format!("bad arity length byte {enc_len}"),
        ));
    }
    let enc_start = after_i - 1 - enc_len;
    let mut arity = 0u64;
    for i in 0..enc_len {
        arity = arity << 8 | u64::from(byte_at(enc_start + i));
    }
    if arity == 0 {
        return Err(Error::decode(8 * enc_start as u64, "arity 0"));
    }
    if enc_len > 1 && byte_at(enc_start) == 0 {
        return Err(Error::decode(
            8 * enc_start as u64,
            "arity coding is not minimal",
        ));
    }
    let payload_bits = arity
        .checked_mul(CV_BITS as u64)
        .filter(|p| *p == enc_start as u64 * 8)
        .ok_or_else(|| {
            Error::decode(
                8 * enc_start as u64,
                format!(
                    "arity {arity} does not match a {}-bit payload",
                    enc_start * 8
                ),
            )
        })?;
    let kind = NodeKind {
        class: NodeClass::Inner { arity, interleave },
        is_root,
    };
    Ok((kind, input.slice(0..payload_bits as usize)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn i2osp_examples() {
        assert_eq!(i2osp(5, 1).unwrap(), vec![0x05]);
        assert_eq!(i2osp(300, 2).unwrap(), vec![0x01, 0x2c]);
        assert_eq!(i2osp(0, 2).unwrap(), vec![0x00, 0x00]);
        assert!(i2osp(300, 1).is_err());
    }

    #[test]
    fn enc_examples() {
        assert_eq!(enc(5).unwrap(), vec![0x05, 0x01]);
        assert_eq!(enc(255).unwrap(), vec![0xff, 0x01]);
        assert_eq!(enc(256).unwrap(), vec![0x01, 0x00, 0x02]);
        assert!(enc(0).is_err());
    }

    #[test]
    fn interleave_codes() {
        assert_eq!(encode_interleave(None, None).unwrap(), vec![0xff, 0xff]);
        assert_eq!(encode_interleave(Some(64), None).unwrap(), vec![0x40, 0x00]);
        assert_eq!(
            encode_interleave(Some(64), Some(4)).unwrap(),
            vec![0x40, 0x00, 0x04]
        );
        // 512 = 128 * 2^2 with the minimal in-range exponent.
        assert_eq!(encode_interleave(Some(512), None).unwrap(), vec![0x80, 0x02]);
        // 255 is odd and exceeds the mantissa range.
        assert!(encode_interleave(Some(255), None).is_err());
        assert!(encode_interleave(None, Some(4)).is_err());
    }

    #[test]
    fn leaf_root_frame_is_payload_plus_11() {
        let payload = BitString::from_bytes(&[0x00]);
        let framed = frame_node(&payload, &NodeKind::leaf(true), &FrameConfig::default(), None)
            .unwrap();
        assert_eq!(framed.len(), 10);
        // 8 zero bits then 1 1.
        assert_eq!(framed.as_bytes(), &[0x00, 0x03]);
    }

    #[test]
    fn leaf_nonroot_padding_arithmetic() {
        // 512-bit payload: 512 + 2 + z + 1 = 0 mod 64 gives z = 61, 576 total.
        let payload = BitString::from_bytes(&[0xaa; 64]);
        let framed = frame_node(
            &payload,
            &NodeKind::leaf(false),
            &FrameConfig::default(),
            None,
        )
        .unwrap();
        assert_eq!(framed.len(), 576);
    }

    #[test]
    fn inner_nonroot_padding_arithmetic() {
        // Arity 4, 2048-bit payload: 2048 + 16 (enc) + 16 ({I}) + 2 + z + 1
        // aligns at 2112 bits with the minimal run z = 29.
        let payload = BitString::from_bytes(&[0x55; 256]);
        let framed = frame_node(
            &payload,
            &NodeKind::inner(4, false),
            &FrameConfig::default(),
            None,
        )
        .unwrap();
        assert_eq!(framed.len(), 2112);
        assert_eq!(framed.len() % 64, 0);
    }

    #[test]
    fn equal_length_padding_stretches_the_zero_run() {
        let short = BitString::from_bytes(&[0x11; 64]);
        let framed = frame_node(
            &short,
            &NodeKind::leaf(false),
            &FrameConfig::default(),
            Some(2112),
        )
        .unwrap();
        assert_eq!(framed.len(), 2112);
        let (kind, payload) = decode_node(&framed, &FrameConfig::default()).unwrap();
        assert_eq!(kind, NodeKind::leaf(false));
        assert_eq!(payload, short);
    }

    #[test]
    fn decode_examples() {
        let cfg = FrameConfig::default();
        let framed = frame_node(
            &BitString::from_bytes(&[0x00]),
            &NodeKind::leaf(true),
            &cfg,
            None,
        )
        .unwrap();
        let (kind, payload) = decode_node(&framed, &cfg).unwrap();
        assert_eq!(kind, NodeKind::leaf(true));
        assert_eq!(payload.as_bytes(), &[0x00]);

        // An all-zero word has no marker bit.
        let zeros = BitString::from_bytes(&[0u8; 8]);
        assert!(decode_node(&zeros, &cfg).is_err());
    }

    #[test]
    fn decode_rejects_arity_payload_mismatch() {
        let cfg = FrameConfig::default();
        let payload = BitString::from_bytes(&[0x77; 128]); // two chaining values
        let framed = frame_node(&payload, &NodeKind::inner(2, false), &cfg, None).unwrap();
        // Corrupt: reframe claiming arity 3 fails already at framing.
        assert!(frame_node(&payload, &NodeKind::inner(3, false), &cfg, None).is_err());
        let (kind, _) = decode_node(&framed, &cfg).unwrap();
        assert_eq!(kind, NodeKind::inner(2, false));
    }

    #[test]
    fn round_trips_all_kinds() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let cfg = FrameConfig::default();
        for case in 0..500 {
            let is_root = rng.gen();
            let (kind, payload) = if rng.gen() {
                let bits = rng.gen_range(0..2048);
                let mut p = BitString::new();
                for _ in 0..bits {
                    p.push_bit(rng.gen());
                }
                (NodeKind::leaf(is_root), p)
            } else {
                let arity = rng.gen_range(1..=300u64);
                let data: Vec<u8> = (0..arity * 64).map(|_| rng.gen()).collect();
                let kind = if rng.gen_ratio(1, 4) {
                    NodeKind::inner_interleaved(arity, is_root, 64, rng.gen_range(1..=255))
                } else {
                    NodeKind::inner(arity, is_root)
                };
                (kind, BitString::from_bytes(&data))
            };
            let framed = frame_node(&payload, &kind, &cfg, None).unwrap();
            let (back_kind, back_payload) = decode_node(&framed, &cfg).unwrap();
            assert_eq!(back_kind, kind, "case {case}");
            assert_eq!(back_payload, payload, "case {case}");
        }
    }

    #[test]
    fn word32_alignment() {
        let cfg = FrameConfig::new(32).unwrap();
        let payload = BitString::from_bytes(&[0xcc; 64]);
        let framed = frame_node(&payload, &NodeKind::leaf(false), &cfg, None).unwrap();
        assert_eq!(framed.len() % 32, 0);
        assert_eq!(framed.len(), 544);
        assert!(FrameConfig::new(48).is_err());
    }

    proptest::proptest! {
        #[test]
        fn decode_never_panics_on_arbitrary_input(bytes in proptest::collection::vec(0u8.., 0..256), drop_bits in 0usize..8) {
            let total = bytes.len() * 8;
            let bits = BitString::from_bits(&bytes, total.saturating_sub(drop_bits));
            // Arbitrary garbage must either decode or error, never panic.
            let _ = decode_node(&bits, &FrameConfig::default());
        }

        #[test]
        fn frame_decode_round_trip(
            arity in 1u64..300,
            is_root: bool,
            leaf_bits in 0usize..1024,
            seed: u64,
        ) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let cfg = FrameConfig::default();
            let (kind, payload) = if seed % 2 == 0 {
                let mut p = BitString::new();
                for _ in 0..leaf_bits {
                    p.push_bit(rng.gen());
                }
                (NodeKind::leaf(is_root), p)
            } else {
                let data: Vec<u8> = (0..arity * 64).map(|_| rng.gen()).collect();
                (NodeKind::inner(arity, is_root), BitString::from_bytes(&data))
            };
            let framed = frame_node(&payload, &kind, &cfg, None).unwrap();
            if !is_root {
                proptest::prop_assert_eq!(framed.len() % 64, 0);
            }
            let (k2, p2) = decode_node(&framed, &cfg).unwrap();
            proptest::prop_assert_eq!(k2, kind);
            proptest::prop_assert_eq!(p2, payload);
        }
    }
}
