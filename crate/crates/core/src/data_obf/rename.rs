//! Identifier renaming: function names in the `name` custom section and
//! export/import names, replaced with random strings.
//!
//! Function names keep their exact byte length so the encoded binary size is
//! unchanged; export/import renames are recorded in a [`RenameMap`] so host
//! code can be updated out of band.

use crate::binfmt::names::{encode_name_section, parse_name_section};
use crate::binfmt::{DecodeError, Module};
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NameSpace {
    Export,
    Import,
    FuncName,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RenameEntry {
    pub space: NameSpace,
    /// Export/import entry position, or function index for `func_name`.
    pub index: u32,
    pub original: String,
    pub renamed: String,
}

/// Original→obfuscated identifier pairs, emitted for host-side updating.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct RenameMap {
    pub entries: Vec<RenameEntry>,
}

impl RenameMap {
    pub fn merge(&mut self, other: RenameMap) {
        self.entries.extend(other.entries);
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.entries).expect("rename map serializes")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RenameError {
    #[error("malformed name section: {0}")]
    MalformedNameSection(#[from] DecodeError),
    #[error("could not find a fresh name after {0} attempts")]
    RetriesExhausted(u32),
}

const MAX_RETRIES: u32 = 100;
const ALNUM: &[u8] = b"ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789";

fn random_alnum(rng: &mut impl Rng, len: usize) -> String {
    (0..len)
        .map(|_| ALNUM[rng.random_range(0..ALNUM.len())] as char)
        .collect()
}

/// Export names that keep working host-side without a rename map.
pub fn default_allowlist() -> BTreeSet<String> {
    ["memory", "_start"].iter().map(|s| s.to_string()).collect()
}

/// Import modules whose names are never touched.
pub fn default_protected_modules() -> BTreeSet<String> {
    ["wasi_snapshot_preview1", "wasi_unstable"]
        .iter()
        .map(|s| s.to_string())
        .collect()
}

/// Replaces every function name in the `name` section with a fresh random
/// alphanumeric string of identical byte length. All indices, counts, and
/// declared lengths are unchanged, so the re-encoded binary has exactly the
/// same size. A module without a name section is returned unchanged.
pub fn obfuscate_function_names(
    m: &mut Module,
    rng: &mut impl Rng,
) -> Result<RenameMap, RenameError> {
    let mut map = RenameMap::default();
    let Some(custom) = m.custom("name") else {
        return Ok(map);
    };
    let mut nd = parse_name_section(&custom.data)?;
    let Some(entries) = &mut nd.func_names else {
        return Ok(map);
    };

    let mut used: BTreeSet<Vec<u8>> = BTreeSet::new();
    for e in entries.iter_mut() {
        if e.name.is_empty() {
            continue;
        }
        let fresh = fresh_name(rng, e.name.len(), |cand| {
            cand.as_bytes() != e.name.as_slice() && !used.contains(cand.as_bytes())
        })?;
        used.insert(fresh.as_bytes().to_vec());
        map.entries.push(RenameEntry {
            space: NameSpace::FuncName,
            index: e.idx,
            original: String::from_utf8_lossy(&e.name).into_owned(),
            renamed: fresh.clone(),
        });
        e.name = fresh.into_bytes();
    }

    let data = encode_name_section(&nd);
    m.custom_mut("name").expect("checked above").data = data;
    Ok(map)
}

/// Replaces export names outside the allowlist with fresh random strings
/// (length 8–16), keeping all names unique.
pub fn obfuscate_exports(
    m: &mut Module,
    rng: &mut impl Rng,
    allowlist: &BTreeSet<String>,
) -> Result<RenameMap, RenameError> {
    let mut map = RenameMap::default();
    let mut used: BTreeSet<String> = m.exports.iter().map(|e| e.name.clone()).collect();

    for (pos, e) in m.exports.iter_mut().enumerate() {
        if allowlist.contains(&e.name) {
            continue;
        }
        let len = rng.random_range(8..=16usize);
        let fresh = fresh_name(rng, len, |cand| !used.contains(cand))?;
        used.insert(fresh.clone());
        map.entries.push(RenameEntry {
            space: NameSpace::Export,
            index: pos as u32,
            original: std::mem::replace(&mut e.name, fresh.clone()),
            renamed: fresh,
        });
    }
    Ok(map)
}

/// Opt-in: replaces import field names for modules outside the protected
/// set. The rename map is required to relink the host side.
pub fn obfuscate_imports(
    m: &mut Module,
    rng: &mut impl Rng,
    protected_modules: &BTreeSet<String>,
) -> Result<RenameMap, RenameError> {
    let mut map = RenameMap::default();
    let mut used: BTreeSet<(String, String)> = m
        .imports
        .iter()
        .map(|i| (i.module.clone(), i.name.clone()))
        .collect();

    for (pos, imp) in m.imports.iter_mut().enumerate() {
        if protected_modules.contains(&imp.module) {
            continue;
        }
        let len = rng.random_range(8..=16usize);
        let module = imp.module.clone();
        let fresh = fresh_name(rng, len, |cand| {
            !used.contains(&(module.clone(), cand.clone()))
        })?;
        used.insert((imp.module.clone(), fresh.clone()));
        map.entries.push(RenameEntry {
            space: NameSpace::Import,
            index: pos as u32,
            original: std::mem::replace(&mut imp.name, fresh.clone()),
            renamed: fresh,
        });
    }
    Ok(map)
}

fn fresh_name(
    rng: &mut impl Rng,
    len: usize,
    ok: impl Fn(&String) -> bool,
) -> Result<String, RenameError> {
    for _ in 0..MAX_RETRIES {
        let cand = random_alnum(rng, len);
        if ok(&cand) {
            return Ok(cand);
        }
    }
    Err(RenameError::RetriesExhausted(MAX_RETRIES))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::binfmt::encode_module;
    use crate::corpus::fixture;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn function_names_same_length_and_size() {
        let mut m = fixture("named_funcs").module;
        let before = encode_module(&m).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let map = obfuscate_function_names(&mut m, &mut rng).unwrap();
        let after = encode_module(&m).unwrap();

        assert_eq!(before.len(), after.len());
        assert_ne!(before, after);
        assert_eq!(map.entries.len(), 3);
        for e in &map.entries {
            assert_eq!(e.original.len(), e.renamed.len());
            assert_ne!(e.original, e.renamed);
        }

        // indices and structure preserved
        let nd = parse_name_section(&m.custom("name").unwrap().data).unwrap();
        let entries = nd.func_names.unwrap();
        assert_eq!(
            entries.iter().map(|e| e.idx).collect::<Vec<_>>(),
            vec![0, 1, 2]
        );
        assert_eq!(nd.prefix, vec![0x00, 0x04, 0x03, b'f', b'i', b'x']);
    }

    #[test]
    fn module_without_name_section_unchanged() {
        let mut m = fixture("add").module;
        let orig = m.clone();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let map = obfuscate_function_names(&mut m, &mut rng).unwrap();
        assert_eq!(m, orig);
        assert!(map.entries.is_empty());
    }

    #[test]
    fn exports_renamed_and_mapped() {
        let mut m = fixture("named_funcs").module;
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let map = obfuscate_exports(&mut m, &mut rng, &default_allowlist()).unwrap();
        assert_eq!(map.entries.len(), 2);
        for (e, exp) in map.entries.iter().zip(&m.exports) {
            assert_eq!(e.renamed, exp.name);
            assert!((8..=16).contains(&exp.name.len()));
        }
        // every non-allowlisted export name appears as a renamed value
        for exp in &m.exports {
            assert!(map.entries.iter().any(|e| e.renamed == exp.name));
        }
        crate::analysis::validate_module(&m).unwrap();
    }

    #[test]
    fn allowlisted_exports_kept() {
        let mut m = fixture("add").module;
        m.exports[0].name = "_start".into();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let map = obfuscate_exports(&mut m, &mut rng, &default_allowlist()).unwrap();
        assert!(map.entries.is_empty());
        assert_eq!(m.exports[0].name, "_start");
    }

    #[test]
    fn protected_import_modules_kept() {
        let mut m = fixture("emit_stream").module;
        m.imports[0].module = "wasi_snapshot_preview1".into();
        let orig_name = m.imports[0].name.clone();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let map = obfuscate_imports(&mut m, &mut rng, &default_protected_modules()).unwrap();
        assert!(map.entries.is_empty());
        assert_eq!(m.imports[0].name, orig_name);

        // unprotected module gets renamed
        let mut m = fixture("emit_stream").module;
        let map = obfuscate_imports(&mut m, &mut rng, &default_protected_modules()).unwrap();
        assert_eq!(map.entries.len(), 1);
        assert_ne!(m.imports[0].name, "emit");
    }

    #[test]
    fn rename_map_roundtrips_json() {
        let mut m = fixture("named_funcs").module;
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let map = obfuscate_exports(&mut m, &mut rng, &default_allowlist()).unwrap();
        let json = map.to_json();
        let back: Vec<RenameEntry> = serde_json::from_str(&json).unwrap();
        assert_eq!(back, map.entries);
    }
}
