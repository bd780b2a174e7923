//! LEB128 variable-length integer codecs.
//!
//! Readers accept non-minimal (padded) encodings up to the 64-bit width
//! limit; writers always emit the minimal form.

use super::DecodeError;

/// Decodes an unsigned LEB128 value starting at `pos`.
///
/// Returns the value and the index just past its last byte.
pub fn read_uleb128(bytes: &[u8], pos: usize) -> Result<(u64, usize), DecodeError> {
    let mut result: u64 = 0;
    let mut shift: u32 = 0;
    let mut at = pos;
    loop {
        let byte = *bytes.get(at).ok_or(DecodeError::UnexpectedEof(at))?;
        at += 1;
        if shift == 63 && byte & 0x7E != 0 {
            // 10th byte may only contribute the single remaining bit
            return Err(DecodeError::IntTooWide(pos, 64));
        }
        if shift > 63 {
            return Err(DecodeError::IntTooWide(pos, 64));
        }
        result |= u64::from(byte & 0x7F) << shift;
        if byte & 0x80 == 0 {
            return Ok((result, at));
        }
        shift += 7;
    }
}

/// Decodes a signed LEB128 value starting at `pos`.
pub fn read_sleb128(bytes: &[u8], pos: usize) -> Result<(i64, usize), DecodeError> {
    let mut result: i64 = 0;
    let mut shift: u32 = 0;
    let mut at = pos;
    loop {
        let byte = *bytes.get(at).ok_or(DecodeError::UnexpectedEof(at))?;
        at += 1;
        if shift == 63 {
            // 10th byte: all bits above bit 63 must match the sign extension
            let low = byte & 0x7F;
            if low != 0 && low != 0x7F {
                return Err(DecodeError::IntTooWide(pos, 64));
            }
        }
        if shift > 63 {
            return Err(DecodeError::IntTooWide(pos, 64));
        }
        result |= i64::from(byte & 0x7F) << shift;
        shift += 7;
        if byte & 0x80 == 0 {
            if shift < 64 && byte & 0x40 != 0 {
                result |= -1i64 << shift;
            }
            return Ok((result, at));
        }
    }
}

/// Encodes `value` as minimal unsigned LEB128.
pub fn write_uleb128(value: u64) -> Vec<u8> {
    let mut out = Vec::new();
    push_uleb128(&mut out, value);
    out
}

/// Encodes `value` as minimal signed LEB128.
pub fn write_sleb128(value: i64) -> Vec<u8> {
    let mut out = Vec::new();
    push_sleb128(&mut out, value);
    out
}

pub(crate) fn push_uleb128(out: &mut Vec<u8>, mut value: u64) {
    loop {
        let byte = (value & 0x7F) as u8;
        value >>= 7;
        if value == 0 {
            out.push(byte);
            return;
        }
        out.push(byte | 0x80);
    }
}

pub(crate) fn push_sleb128(out: &mut Vec<u8>, mut value: i64) {
    loop {
        let byte = (value & 0x7F) as u8;
        value >>= 7;
        let done = (value == 0 && byte & 0x40 == 0) || (value == -1 && byte & 0x40 != 0);
        if done {
            out.push(byte);
            return;
        }
        out.push(byte | 0x80);
    }
}

/// Reads a u32-range unsigned LEB128 (used for indices, counts, sizes).
pub(crate) fn read_u32(bytes: &[u8], pos: usize) -> Result<(u32, usize), DecodeError> {
    let (v, next) = read_uleb128(bytes, pos)?;
    if v > u64::from(u32::MAX) {
        return Err(DecodeError::IntTooWide(pos, 32));
    }
    Ok((v as u32, next))
}

/// Reads an i32-range signed LEB128 (i32.const immediates).
pub(crate) fn read_i32(bytes: &[u8], pos: usize) -> Result<(i32, usize), DecodeError> {
    let (v, next) = read_sleb128(bytes, pos)?;
    if v < i64::from(i32::MIN) || v > i64::from(i32::MAX) {
        return Err(DecodeError::IntTooWide(pos, 32));
    }
    Ok((v as i32, next))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Independent base-128 little-endian encoder over a big accumulator,
    /// used only to cross-check the production codec.
    fn oracle_uleb(value: u64) -> Vec<u8> {
        let mut digits = Vec::new();
        let mut v = value as u128;
        loop {
            digits.push((v % 128) as u8);
            v /= 128;
            if v == 0 {
                break;
            }
        }
        let last = digits.len() - 1;
        for d in digits.iter_mut().take(last) {
            *d |= 0x80;
        }
        digits
    }

    #[test]
    fn uleb_zero() {
        assert_eq!(read_uleb128(&[0x00], 0).unwrap(), (0, 1));
        assert_eq!(write_uleb128(0), vec![0x00]);
    }

    #[test]
    fn uleb_single_byte_max() {
        assert_eq!(read_uleb128(&[0x7F], 0).unwrap(), (127, 1));
    }

    #[test]
    fn uleb_multibyte_against_oracle() {
        // 624485 is the classic worked example; frozen from the oracle.
        assert_eq!(oracle_uleb(624485), vec![0xE5, 0x8E, 0x26]);
        assert_eq!(read_uleb128(&[0xE5, 0x8E, 0x26], 0).unwrap(), (624485, 3));
        assert_eq!(write_uleb128(624485), vec![0xE5, 0x8E, 0x26]);
    }

    #[test]
    fn sleb_minus_one() {
        assert_eq!(write_sleb128(-1), vec![0x7F]);
        assert_eq!(read_sleb128(&[0x7F], 0).unwrap(), (-1, 1));
    }

    #[test]
    fn uleb_padded_accepted() {
        // Non-minimal zero padding decodes but re-encodes minimally.
        assert_eq!(read_uleb128(&[0x8C, 0x80, 0x80, 0x80, 0x00], 0).unwrap(), (12, 5));
        assert_eq!(write_uleb128(12), vec![0x0C]);
    }

    #[test]
    fn uleb_truncated() {
        assert_eq!(read_uleb128(&[0x80], 0), Err(DecodeError::UnexpectedEof(1)));
    }

    #[test]
    fn uleb_too_wide() {
        let bytes = [0xFF, 0xFF, 0xFF, 0xFF, 0xFF, 0xFF, 0xFF, 0xFF, 0xFF, 0x7F];
        assert!(matches!(read_uleb128(&bytes, 0), Err(DecodeError::IntTooWide(0, 64))));
    }

    #[test]
    fn uleb_u64_max() {
        let enc = write_uleb128(u64::MAX);
        assert_eq!(enc.len(), 10);
        assert_eq!(read_uleb128(&enc, 0).unwrap(), (u64::MAX, 10));
    }

    #[test]
    fn sleb_i64_extremes() {
        for v in [i64::MIN, i64::MAX, i64::MIN + 1, -2, 2] {
            let enc = write_sleb128(v);
            assert_eq!(read_sleb128(&enc, 0).unwrap(), (v, enc.len()));
        }
    }

    fn bits(v: u64) -> u32 {
        if v == 0 {
            1
        } else {
            64 - v.leading_zeros()
        }
    }

    proptest! {
        #[test]
        fn uleb_roundtrip_and_minimal(v: u64) {
            let enc = write_uleb128(v);
            prop_assert_eq!(enc.clone(), oracle_uleb(v));
            prop_assert_eq!(read_uleb128(&enc, 0).unwrap(), (v, enc.len()));
            prop_assert_eq!(enc.len() as u32, bits(v).div_ceil(7));
        }

        #[test]
        fn sleb_roundtrip(v: i64) {
            let enc = write_sleb128(v);
            prop_assert_eq!(read_sleb128(&enc, 0).unwrap(), (v, enc.len()));
        }
    }
}
