//! Codec for the `name` custom section.
//!
//! Only the function-name subsection (id 1) is parsed into entries; any
//! other subsections (module name, local names, ...) are carried as opaque
//! prefix/suffix bytes so that re-encoding is byte-exact.

use super::leb128::{push_uleb128, read_u32};
use super::DecodeError;

/// One function-name association.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NameEntry {
    pub idx: u32,
    pub name: Vec<u8>,
}

/// Parsed `name` section content.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct NameData {
    /// Raw subsections preceding the function-name subsection.
    pub prefix: Vec<u8>,
    /// Entries of the function-name subsection, when present.
    pub func_names: Option<Vec<NameEntry>>,
    /// Raw subsections following the function-name subsection.
    pub suffix: Vec<u8>,
}

impl NameData {
    /// Number of function-name entries.
    pub fn count(&self) -> u32 {
        self.func_names.as_ref().map_or(0, |e| e.len() as u32)
    }

    /// Byte length of the function-name subsection content as it will be
    /// encoded.
    pub fn section_len(&self) -> u32 {
        match &self.func_names {
            None => 0,
            Some(entries) => encode_func_names(entries).len() as u32,
        }
    }
}

/// Parses the raw content of a `name` custom section (the bytes after the
/// section's own name field).
pub fn parse_name_section(raw: &[u8]) -> Result<NameData, DecodeError> {
    let mut nd = NameData::default();
    let mut pos = 0usize;
    while pos < raw.len() {
        let start = pos;
        let id = raw[pos];
        pos += 1;
        let (size, next) = read_u32(raw, pos)?;
        pos = next;
        let end = pos
            .checked_add(size as usize)
            .filter(|&e| e <= raw.len())
            .ok_or(DecodeError::BadNameSection("subsection truncated"))?;
        if id == 1 {
            if nd.func_names.is_some() {
                return Err(DecodeError::BadNameSection(
                    "duplicate function-name subsection",
                ));
            }
            nd.func_names = Some(parse_func_names(&raw[pos..end])?);
        } else {
            let dest = if nd.func_names.is_none() {
                &mut nd.prefix
            } else {
                &mut nd.suffix
            };
            dest.extend_from_slice(&raw[start..end]);
        }
        pos = end;
    }
    Ok(nd)
}

fn parse_func_names(content: &[u8]) -> Result<Vec<NameEntry>, DecodeError> {
    let mut pos = 0usize;
    let (count, next) = read_u32(content, pos)?;
    pos = next;
    let mut entries = Vec::with_capacity(count as usize);
    let mut last_idx: Option<u32> = None;
    for _ in 0..count {
        let (idx, next) = read_u32(content, pos)?;
        pos = next;
        let (len, next) = read_u32(content, pos)?;
        pos = next;
        let end = pos
            .checked_add(len as usize)
            .filter(|&e| e <= content.len())
            .ok_or(DecodeError::BadNameSection("name truncated"))?;
        if let Some(last) = last_idx {
            if idx <= last {
                return Err(DecodeError::BadNameSection("entries not sorted by index"));
            }
        }
        last_idx = Some(idx);
        entries.push(NameEntry {
            idx,
            name: content[pos..end].to_vec(),
        });
        pos = end;
    }
    if pos != content.len() {
        return Err(DecodeError::BadNameSection(
            "declared subsection length inconsistent with content",
        ));
    }
    Ok(entries)
}

fn encode_func_names(entries: &[NameEntry]) -> Vec<u8> {
    let mut out = Vec::new();
    push_uleb128(&mut out, entries.len() as u64);
    for e in entries {
        push_uleb128(&mut out, u64::from(e.idx));
        push_uleb128(&mut out, e.name.len() as u64);
        out.extend_from_slice(&e.name);
    }
    out
}

/// Encodes [`NameData`] back into `name` section content; exact inverse of
/// [`parse_name_section`].
pub fn encode_name_section(nd: &NameData) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(&nd.prefix);
    if let Some(entries) = &nd.func_names {
        let content = encode_func_names(entries);
        out.push(0x01);
        push_uleb128(&mut out, content.len() as u64);
        out.extend_from_slice(&content);
    }
    out.extend_from_slice(&nd.suffix);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn single_entry_main() {
        // Hand-encoded per the grammar: subsection 1, 7 content bytes,
        // count 1, idx 0, len 4, "main".
        let raw = [0x01, 0x07, 0x01, 0x00, 0x04, b'm', b'a', b'i', b'n'];
        let nd = parse_name_section(&raw).unwrap();
        assert_eq!(nd.count(), 1);
        let entries = nd.func_names.as_ref().unwrap();
        assert_eq!(entries[0].idx, 0);
        assert_eq!(entries[0].name, b"main");
        assert_eq!(nd.section_len(), 7);
        assert_eq!(encode_name_section(&nd), raw);
    }

    #[test]
    fn empty_subsection() {
        let raw = [0x01, 0x01, 0x00];
        let nd = parse_name_section(&raw).unwrap();
        assert_eq!(nd.count(), 0);
        assert_eq!(nd.func_names, Some(vec![]));
        assert_eq!(encode_name_section(&nd), raw);
    }

    #[test]
    fn prefix_and_suffix_preserved() {
        // module-name subsection (id 0), then functions, then locals (id 2).
        let raw = [
            0x00, 0x02, 0x01, b'm', // module name "m"
            0x01, 0x04, 0x01, 0x02, 0x01, b'f', // func 2 named "f"
            0x02, 0x01, 0x00, // empty local-names subsection
        ];
        let nd = parse_name_section(&raw).unwrap();
        assert_eq!(nd.prefix, &raw[0..4]);
        assert_eq!(nd.suffix, &raw[10..13]);
        assert_eq!(nd.count(), 1);
        assert_eq!(encode_name_section(&nd), raw);
    }

    #[test]
    fn unsorted_entries_rejected() {
        let raw = [0x01, 0x07, 0x02, 0x05, 0x01, b'a', 0x03, 0x01, b'b'];
        assert!(parse_name_section(&raw).is_err());
    }

    #[test]
    fn inconsistent_length_rejected() {
        // Declared 9 content bytes but entries only consume 7.
        let raw = [0x01, 0x09, 0x01, 0x00, 0x04, b'm', b'a', b'i', b'n', 0x00, 0x00];
        assert!(parse_name_section(&raw).is_err());
    }

    proptest! {
        #[test]
        fn roundtrip_random_entries(names in proptest::collection::vec(".{0,12}", 0..20)) {
            let entries: Vec<NameEntry> = names
                .iter()
                .enumerate()
                .map(|(i, n)| NameEntry { idx: i as u32 * 2, name: n.as_bytes().to_vec() })
                .collect();
            let nd = NameData { prefix: vec![], func_names: Some(entries), suffix: vec![] };
            let bytes = encode_name_section(&nd);
            prop_assert_eq!(parse_name_section(&bytes).unwrap(), nd);
        }
    }
}
