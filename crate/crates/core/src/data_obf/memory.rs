//! Memory obfuscation: static data segments are XOR-encrypted with a
//! position-keyed byte stream, every load/store is rewritten to call an
//! injected helper that decrypts/encrypts on demand at runtime, and zero
//! regions are key-filled so reads of never-written memory stay correct.
//!
//! The keystream is positional — `key_byte(addr) = keystream[addr % 8]` — so
//! overlapping accesses of different widths decrypt consistently. Helpers
//! compute addresses in 64 bits and reproduce out-of-bounds traps with a
//! probing access before any partial write.

use crate::binfmt::instr::{Instr, MemAccess, MemAccessKind, MemArg};
use crate::binfmt::module::*;
use rand::{Rng, SeedableRng};
use std::collections::{BTreeMap, BTreeSet};
use thiserror::Error;

const PAGE: u64 = 65536;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MemObfError {
    #[error("data segment has a non-constant offset")]
    NonConstantOffset,
    #[error("data segments overlap; runtime decryption would be ambiguous")]
    OverlappingSegments,
    #[error("module has more than one memory")]
    MultipleMemories,
    #[error("module imports its memory; initial contents are unknown")]
    ImportedMemory,
    #[error("keystream must not be all zero")]
    DegenerateKey,
    #[error("initial memory too large to key-fill")]
    MemoryTooLarge,
}

/// Positional XOR keystream. `key_byte(addr) = keystream[addr mod 8]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MemKey {
    keystream: [u8; 8],
}

impl MemKey {
    /// Derives an 8-byte keystream from a seed; never all-zero.
    pub fn from_seed(seed: u64) -> MemKey {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut keystream = [0u8; 8];
        rng.fill(&mut keystream);
        if keystream.iter().all(|b| *b == 0) {
            keystream[0] = 0xA5;
        }
        MemKey { keystream }
    }

    pub fn from_bytes(keystream: [u8; 8]) -> Result<MemKey, MemObfError> {
        if keystream.iter().all(|b| *b == 0) {
            return Err(MemObfError::DegenerateKey);
        }
        Ok(MemKey { keystream })
    }

    pub fn key_byte(&self, addr: u64) -> u8 {
        self.keystream[(addr % 8) as usize]
    }

    /// The keystream packed little-endian, so byte `j` sits at bit `8 j`.
    /// Helpers extract `key_byte(a)` as `(K >> ((a & 7) * 8)) & 0xFF`.
    fn as_i64(&self) -> i64 {
        i64::from_le_bytes(self.keystream)
    }
}

/// Injected helper functions, keyed by the original memory opcode.
#[derive(Debug, Clone, Default)]
pub struct HelperTable {
    pub by_opcode: BTreeMap<u8, u32>,
    pub grow: Option<u32>,
    pub init: Option<u32>,
    /// First helper index; functions at or above this are never rewritten.
    pub first_helper: u32,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct MemObfReport {
    pub helpers_added: u32,
    pub sites_rewritten: u64,
    pub segments_encrypted: usize,
    pub zero_fill_bytes: u64,
}

/// XORs every data segment byte with the key byte of its absolute address.
/// Applying the pass twice with the same key restores the original bytes.
pub fn encrypt_data_segments(m: &mut Module, key: &MemKey) -> Result<usize, MemObfError> {
    let mut ranges: Vec<(u64, u64)> = Vec::new();
    for d in &m.data {
        let off = d.offset.as_i32().ok_or(MemObfError::NonConstantOffset)? as u32 as u64;
        ranges.push((off, off + d.bytes.len() as u64));
    }
    ranges.sort_unstable();
    for w in ranges.windows(2) {
        if w[0].1 > w[1].0 {
            return Err(MemObfError::OverlappingSegments);
        }
    }
    for d in &mut m.data {
        let off = d.offset.as_i32().expect("checked above") as u32 as u64;
        for (i, b) in d.bytes.iter_mut().enumerate() {
            *b ^= key.key_byte(off + i as u64);
        }
    }
    Ok(m.data.len())
}

/// The whole pass: encrypt segments, inject helpers, rewrite accesses, and
/// wire up zero-region initialization. A module without memory instructions
/// is returned unchanged.
pub fn memory_obfuscate(
    m: &mut Module,
    key: &MemKey,
    exclude: &BTreeSet<u32>,
) -> Result<(MemObfReport, HelperTable), MemObfError> {
    if m.num_memories() == 0 {
        return Ok((MemObfReport::default(), HelperTable::default()));
    }
    if m.num_memories() > 1 {
        return Err(MemObfError::MultipleMemories);
    }
    if m.num_imported_memories() > 0 {
        return Err(MemObfError::ImportedMemory);
    }
    if u64::from(m.memories[0].limits.min) >= 65536 {
        return Err(MemObfError::MemoryTooLarge);
    }
    if !present_mem_opcodes(m, exclude).0 {
        return Ok((MemObfReport::default(), HelperTable::default()));
    }

    let segments_encrypted = encrypt_data_segments(m, key)?;
    let helpers = synthesize_mem_helpers(m, key, exclude)?;
    let sites_rewritten = rewrite_mem_instructions(m, &helpers, exclude)?;

    let mem_bytes = u64::from(m.memories[0].limits.min) * PAGE;
    let covered: u64 = m.data.iter().map(|d| d.bytes.len() as u64).sum();
    let report = MemObfReport {
        helpers_added: m.num_funcs() - helpers.first_helper,
        sites_rewritten,
        segments_encrypted,
        zero_fill_bytes: mem_bytes.saturating_sub(covered),
    };
    Ok((report, helpers))
}

/// Scans for memory instructions outside `exclude`; returns (any present,
/// distinct load/store opcodes, grow present).
fn present_mem_opcodes(m: &Module, exclude: &BTreeSet<u32>) -> (bool, BTreeSet<u8>, bool) {
    let n_imports = m.num_imported_funcs();
    let mut ops = BTreeSet::new();
    let mut grow = false;
    for (i, body) in m.code.iter().enumerate() {
        if exclude.contains(&(n_imports + i as u32)) {
            continue;
        }
        scan_instrs(&body.instrs, &mut ops, &mut grow);
    }
    (!ops.is_empty() || grow, ops, grow)
}

fn scan_instrs(instrs: &[Instr], ops: &mut BTreeSet<u8>, grow: &mut bool) {
    for i in instrs {
        match i {
            Instr::Block(_, body) | Instr::Loop(_, body) => scan_instrs(body, ops, grow),
            Instr::If(_, a, b) => {
                scan_instrs(a, ops, grow);
                scan_instrs(b, ops, grow);
            }
            Instr::MemoryGrow => *grow = true,
            other => {
                if let Some(op) = crate::binfmt::instr::mem_opcode(other) {
                    ops.insert(op);
                }
            }
        }
    }
}

/// Emits `(K >> (((addr_local + i) & 7) * 8))` with the key byte in the low
/// 8 bits. High bits carry shifted key material; callers mask or rely on
/// `store8` truncation.
fn keybyte_expr(key: &MemKey, addr_local: u32, byte_index: u32) -> Vec<Instr> {
    let mut e = vec![Instr::I64Const(key.as_i64()), Instr::LocalGet(addr_local)];
    if byte_index > 0 {
        e.push(Instr::I64Const(i64::from(byte_index)));
        e.push(Instr::I64Add);
    }
    e.extend([
        Instr::I64Const(7),
        Instr::I64And,
        Instr::I64Const(3),
        Instr::I64Shl,
        Instr::I64ShrU,
    ]);
    e
}

/// `addr64 + width > memory.size * 64Ki` → force the out-of-bounds trap the
/// original instruction would have produced.
fn bounds_check(addr_local: u32, width: u32) -> Vec<Instr> {
    vec![
        Instr::LocalGet(addr_local),
        Instr::I64Const(i64::from(width)),
        Instr::I64Add,
        Instr::MemorySize,
        Instr::I64ExtendI32U,
        Instr::I64Const(16),
        Instr::I64Shl,
        Instr::I64GtU,
        Instr::If(
            None,
            vec![
                Instr::I32Const(-1),
                Instr::I32Load8U(MemArg::offset(0)),
                Instr::Drop,
            ],
            vec![],
        ),
    ]
}

fn dec_load_body(key: &MemKey, acc_shape: &MemAccess) -> (FuncType, FuncBody) {
    let w = acc_shape.width;
    // params: base, offset; locals: 2 = addr (i64), 3 = accumulator (i64)
    let addr = 2u32;
    let acc = 3u32;
    let mut body = vec![
        Instr::LocalGet(0),
        Instr::I64ExtendI32U,
        Instr::LocalGet(1),
        Instr::I64ExtendI32U,
        Instr::I64Add,
        Instr::LocalSet(addr),
    ];
    body.extend(bounds_check(addr, w));
    for i in 0..w {
        body.extend([
            Instr::LocalGet(addr),
            Instr::I32WrapI64,
            Instr::I32Load8U(MemArg { align: 0, offset: i }),
            Instr::I64ExtendI32U,
        ]);
        body.extend(keybyte_expr(key, addr, i));
        body.extend([Instr::I64Const(0xFF), Instr::I64And, Instr::I64Xor]);
        if i > 0 {
            body.extend([Instr::I64Const(i64::from(8 * i)), Instr::I64Shl]);
            body.extend([Instr::LocalGet(acc), Instr::I64Or]);
        }
        body.push(Instr::LocalSet(acc));
    }
    // extension / reinterpretation to the result type
    match (acc_shape.ty, w, acc_shape.signed) {
        (ValType::I32, 4, _) => body.extend([Instr::LocalGet(acc), Instr::I32WrapI64]),
        (ValType::I32, _, false) => body.extend([Instr::LocalGet(acc), Instr::I32WrapI64]),
        (ValType::I32, _, true) => {
            let shift = 32 - 8 * w as i32;
            body.extend([
                Instr::LocalGet(acc),
                Instr::I32WrapI64,
                Instr::I32Const(shift),
                Instr::I32Shl,
                Instr::I32Const(shift),
                Instr::I32ShrS,
            ]);
        }
        (ValType::I64, 8, _) | (ValType::I64, _, false) => body.push(Instr::LocalGet(acc)),
        (ValType::I64, _, true) => {
            let shift = 64 - 8 * i64::from(w);
            body.extend([
                Instr::LocalGet(acc),
                Instr::I64Const(shift),
                Instr::I64Shl,
                Instr::I64Const(shift),
                Instr::I64ShrS,
            ]);
        }
        (ValType::F32, _, _) => body.extend([
            Instr::LocalGet(acc),
            Instr::I32WrapI64,
            Instr::F32ReinterpretI32,
        ]),
        (ValType::F64, _, _) => body.extend([Instr::LocalGet(acc), Instr::F64ReinterpretI64]),
    }
    (
        FuncType::new(vec![ValType::I32, ValType::I32], vec![acc_shape.ty]),
        FuncBody {
            locals: vec![ValType::I64, ValType::I64],
            instrs: body,
        },
    )
}

fn enc_store_body(key: &MemKey, acc_shape: &MemAccess) -> (FuncType, FuncBody) {
    let w = acc_shape.width;
    // params: base, value, offset; locals: 3 = addr (i64), 4 = raw (i64)
    let addr = 3u32;
    let raw = 4u32;
    let mut body = vec![
        Instr::LocalGet(0),
        Instr::I64ExtendI32U,
        Instr::LocalGet(2),
        Instr::I64ExtendI32U,
        Instr::I64Add,
        Instr::LocalSet(addr),
    ];
    body.extend(bounds_check(addr, w));
    body.push(Instr::LocalGet(1));
    match acc_shape.ty {
        ValType::I32 => body.push(Instr::I64ExtendI32U),
        ValType::I64 => {}
        ValType::F32 => body.extend([Instr::I32ReinterpretF32, Instr::I64ExtendI32U]),
        ValType::F64 => body.push(Instr::I64ReinterpretF64),
    }
    body.push(Instr::LocalSet(raw));
    for i in 0..w {
        body.extend([Instr::LocalGet(addr), Instr::I32WrapI64, Instr::LocalGet(raw)]);
        if i > 0 {
            body.extend([Instr::I64Const(i64::from(8 * i)), Instr::I64ShrU]);
        }
        body.extend(keybyte_expr(key, addr, i));
        body.extend([
            Instr::I64Xor,
            Instr::I32WrapI64,
            Instr::I32Store8(MemArg { align: 0, offset: i }),
        ]);
    }
    (
        FuncType::new(
            vec![ValType::I32, acc_shape.ty, ValType::I32],
            vec![],
        ),
        FuncBody {
            locals: vec![ValType::I64, ValType::I64],
            instrs: body,
        },
    )
}

/// Key-fill loop over `[start, end)` writing `key_byte(a)` to every address
/// — the encrypted image of zero.
fn fill_loop(key: &MemKey, a_local: u32, start: u64, end: u64) -> Vec<Instr> {
    let mut body = vec![Instr::I32Const(start as u32 as i32), Instr::LocalSet(a_local)];
    body.push(Instr::Block(
        None,
        vec![Instr::Loop(
            None,
            [
                vec![
                    Instr::LocalGet(a_local),
                    Instr::I32Const(end as u32 as i32),
                    Instr::I32GeU,
                    Instr::BrIf(1),
                    Instr::LocalGet(a_local),
                    // key byte from a 32-bit address
                    Instr::I64Const(key.as_i64()),
                    Instr::LocalGet(a_local),
                    Instr::I64ExtendI32U,
                    Instr::I64Const(7),
                    Instr::I64And,
                    Instr::I64Const(3),
                    Instr::I64Shl,
                    Instr::I64ShrU,
                    Instr::I32WrapI64,
                    Instr::I32Store8(MemArg::offset(0)),
                    Instr::LocalGet(a_local),
                    Instr::I32Const(1),
                    Instr::I32Add,
                    Instr::LocalSet(a_local),
                    Instr::Br(0),
                ],
            ]
            .concat(),
        )],
    ));
    body
}

/// Adds one helper per distinct memory opcode present, a zero-region init
/// routine wired into the start function, and a `memory.grow` wrapper that
/// key-fills fresh pages. Helper indices are appended, so existing function
/// indices stay valid.
pub fn synthesize_mem_helpers(
    m: &mut Module,
    key: &MemKey,
    exclude: &BTreeSet<u32>,
) -> Result<HelperTable, MemObfError> {
    let (_, opcodes, grow_present) = present_mem_opcodes(m, exclude);
    let mut table = HelperTable {
        first_helper: m.num_funcs(),
        ..HelperTable::default()
    };

    for op in opcodes {
        let shape = crate::binfmt::instr::mem_op_for_opcode(op).expect("opcode scanned")(
            MemArg::offset(0),
        )
        .mem_access()
        .expect("memory opcode");
        let (ft, body) = match shape.kind {
            MemAccessKind::Load => dec_load_body(key, &shape),
            MemAccessKind::Store => enc_store_body(key, &shape),
        };
        let ty = m.find_or_add_type(ft);
        let idx = m.push_function(ty, body);
        table.by_opcode.insert(op, idx);
    }

    if grow_present {
        table.grow = Some(push_grow_wrapper(m, key));
    }

    // Zero regions: everything inside the initial memory not covered by a
    // data segment holds zeroes that dec_load will XOR with key bytes, so
    // fill them with the encrypted image of zero at startup.
    let mem_bytes = u64::from(m.memories[0].limits.min) * PAGE;
    let mut covered: Vec<(u64, u64)> = m
        .data
        .iter()
        .map(|d| {
            let off = d.offset.as_i32().expect("validated by encrypt") as u32 as u64;
            (off, (off + d.bytes.len() as u64).min(mem_bytes))
        })
        .collect();
    covered.sort_unstable();
    let mut gaps: Vec<(u64, u64)> = Vec::new();
    let mut at = 0u64;
    for (s, e) in covered {
        if s > at {
            gaps.push((at, s.min(mem_bytes)));
        }
        at = at.max(e);
    }
    if at < mem_bytes {
        gaps.push((at, mem_bytes));
    }

    if !gaps.is_empty() || m.start.is_some() {
        let mut body = Vec::new();
        for (s, e) in gaps {
            body.extend(fill_loop(key, 0, s, e));
        }
        if let Some(old_start) = m.start {
            body.push(Instr::Call(old_start));
        }
        let ty = m.find_or_add_type(FuncType::new(vec![], vec![]));
        let init = m.push_function(
            ty,
            FuncBody {
                locals: vec![ValType::I32],
                instrs: body,
            },
        );
        m.start = Some(init);
        table.init = Some(init);
    }

    Ok(table)
}

fn push_grow_wrapper(m: &mut Module, key: &MemKey) -> u32 {
    // params: delta; locals: 1 = old pages (i32), 2 = addr (i64), 3 = end (i64)
    let body = vec![
        Instr::LocalGet(0),
        Instr::MemoryGrow,
        Instr::LocalSet(1),
        Instr::LocalGet(1),
        Instr::I32Const(-1),
        Instr::I32Ne,
        Instr::If(
            None,
            [
                vec![
                    Instr::LocalGet(1),
                    Instr::I64ExtendI32U,
                    Instr::I64Const(16),
                    Instr::I64Shl,
                    Instr::LocalSet(2),
                    Instr::MemorySize,
                    Instr::I64ExtendI32U,
                    Instr::I64Const(16),
                    Instr::I64Shl,
                    Instr::LocalSet(3),
                    Instr::Block(
                        None,
                        vec![Instr::Loop(
                            None,
                            [
                                vec![
                                    Instr::LocalGet(2),
                                    Instr::LocalGet(3),
                                    Instr::I64GeU,
                                    Instr::BrIf(1),
                                    Instr::LocalGet(2),
                                    Instr::I32WrapI64,
                                ],
                                keybyte_expr(key, 2, 0),
                                vec![
                                    Instr::I32WrapI64,
                                    Instr::I32Store8(MemArg::offset(0)),
                                    Instr::LocalGet(2),
                                    Instr::I64Const(1),
                                    Instr::I64Add,
                                    Instr::LocalSet(2),
                                    Instr::Br(0),
                                ],
                            ]
                            .concat(),
                        )],
                    ),
                ],
            ]
            .concat(),
            vec![],
        ),
        Instr::LocalGet(1),
    ];
    let ty = m.find_or_add_type(FuncType::new(vec![ValType::I32], vec![ValType::I32]));
    m.push_function(
        ty,
        FuncBody {
            locals: vec![ValType::I32, ValType::I64, ValType::I64],
            instrs: body,
        },
    )
}

/// Replaces every load/store with `i32.const offset; call helper` and every
/// `memory.grow` with a call to the grow wrapper. The stack effect of each
/// replacement equals the original opcode's.
pub fn rewrite_mem_instructions(
    m: &mut Module,
    helpers: &HelperTable,
    exclude: &BTreeSet<u32>,
) -> Result<u64, MemObfError> {
    let n_imports = m.num_imported_funcs();
    let mut rewritten = 0u64;
    for (i, body) in m.code.iter_mut().enumerate() {
        let func = n_imports + i as u32;
        if func >= helpers.first_helper || exclude.contains(&func) {
            continue;
        }
        let instrs = std::mem::take(&mut body.instrs);
        body.instrs = rewrite_seq(instrs, helpers, &mut rewritten);
    }
    Ok(rewritten)
}

fn rewrite_seq(instrs: Vec<Instr>, helpers: &HelperTable, rewritten: &mut u64) -> Vec<Instr> {
    let mut out = Vec::with_capacity(instrs.len());
    for i in instrs {
        match i {
            Instr::Block(bt, body) => {
                out.push(Instr::Block(bt, rewrite_seq(body, helpers, rewritten)));
            }
            Instr::Loop(bt, body) => {
                out.push(Instr::Loop(bt, rewrite_seq(body, helpers, rewritten)));
            }
            Instr::If(bt, a, b) => out.push(Instr::If(
                bt,
                rewrite_seq(a, helpers, rewritten),
                rewrite_seq(b, helpers, rewritten),
            )),
            Instr::MemoryGrow => {
                if let Some(g) = helpers.grow {
                    out.push(Instr::Call(g));
                    *rewritten += 1;
                } else {
                    out.push(Instr::MemoryGrow);
                }
            }
            other => match crate::binfmt::instr::mem_opcode(&other) {
                Some(op) => {
                    let helper = helpers.by_opcode[&op];
                    let acc = other.mem_access().expect("memory opcode");
                    out.push(Instr::I32Const(acc.arg.offset as i32));
                    out.push(Instr::Call(helper));
                    *rewritten += 1;
                }
                None => out.push(other),
            },
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::validate_module;
    use crate::corpus::{fixture, fixtures};
    use crate::interp::{differential_check, gen_arg_vectors, Instance, StubSpec, Verdict};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn obfuscated(name: &str) -> (Module, Module) {
        let fx = fixture(name);
        let mut obf = fx.module.clone();
        let key = MemKey::from_seed(0xDEAD_BEEF);
        memory_obfuscate(&mut obf, &key, &BTreeSet::new()).unwrap();
        (fx.module, obf)
    }

    #[test]
    fn xor_arithmetic_basics() {
        let key = MemKey::from_bytes([0x5A, 1, 2, 3, 4, 5, 6, 7]).unwrap();
        assert_eq!(0x41 ^ key.key_byte(0), 0x1B);

        let all_ff = MemKey::from_bytes([0xFF; 8]).unwrap();
        let mut m = Module::default();
        m.memories.push(MemoryType {
            limits: Limits { min: 1, max: None },
        });
        m.data.push(DataSegment {
            memory: 0,
            offset: ConstExpr::I32(0),
            bytes: b"AB".to_vec(),
        });
        encrypt_data_segments(&mut m, &all_ff).unwrap();
        assert_eq!(m.data[0].bytes, vec![0xBE, 0xBD]);
    }

    #[test]
    fn encryption_is_an_involution() {
        let mut m = fixture("data_hash").module;
        let orig = m.data[0].bytes.clone();
        let key = MemKey::from_seed(99);
        encrypt_data_segments(&mut m, &key).unwrap();
        assert_ne!(m.data[0].bytes, orig);
        encrypt_data_segments(&mut m, &key).unwrap();
        assert_eq!(m.data[0].bytes, orig);
    }

    #[test]
    fn overlapping_segments_refused() {
        let mut m = fixture("data_hash").module;
        m.data.push(DataSegment {
            memory: 0,
            offset: ConstExpr::I32(1030),
            bytes: vec![0; 8],
        });
        let key = MemKey::from_seed(1);
        assert_eq!(
            encrypt_data_segments(&mut m, &key),
            Err(MemObfError::OverlappingSegments)
        );
    }

    #[test]
    fn all_zero_key_rejected() {
        assert_eq!(MemKey::from_bytes([0; 8]), Err(MemObfError::DegenerateKey));
        // seeded keys are never degenerate
        for seed in 0..50 {
            let k = MemKey::from_seed(seed);
            assert!((0..8).any(|i| k.key_byte(i) != 0));
        }
    }

    #[test]
    fn no_memory_instructions_is_a_noop() {
        let fx = fixture("add");
        let mut m = fx.module.clone();
        let key = MemKey::from_seed(3);
        let (report, _) = memory_obfuscate(&mut m, &key, &BTreeSet::new()).unwrap();
        assert_eq!(report, MemObfReport::default());
        assert_eq!(m, fx.module);
    }

    #[test]
    fn obfuscated_modules_validate() {
        for name in [
            "mem_rw",
            "data_hash",
            "zero_read",
            "grow_rw",
            "oob_trap",
            "start_mem",
        ] {
            let (_, obf) = obfuscated(name);
            if let Err(errs) = validate_module(&obf) {
                panic!("memory-obfuscated {name} invalid: {errs:?}");
            }
        }
    }

    #[test]
    fn no_raw_memory_ops_left_outside_helpers() {
        let (_, obf) = obfuscated("mem_rw");
        let key = MemKey::from_seed(0xDEAD_BEEF);
        let mut probe = fixture("mem_rw").module;
        let helpers = {
            let mut tmp = probe.clone();
            encrypt_data_segments(&mut probe, &key).ok();
            synthesize_mem_helpers(&mut tmp, &key, &BTreeSet::new()).unwrap()
        };
        let n_imports = obf.num_imported_funcs();
        for (i, body) in obf.code.iter().enumerate() {
            let func = n_imports + i as u32;
            if func >= helpers.first_helper {
                continue;
            }
            let mut ops = BTreeSet::new();
            let mut grow = false;
            scan_instrs(&body.instrs, &mut ops, &mut grow);
            assert!(ops.is_empty(), "function {func} still has raw memory ops");
            assert!(!grow);
        }
    }

    #[test]
    fn memory_bytes_differ_but_loads_agree() {
        let (orig, obf) = obfuscated("data_hash");
        let inst_orig = Instance::instantiate(&orig, &StubSpec::default(), 1 << 26).unwrap();
        let inst_obf = Instance::instantiate(&obf, &StubSpec::default(), 1 << 26).unwrap();
        // plaintext is in the original memory image, not the obfuscated one
        let plain = &inst_orig.memory()[1024..1056];
        let cipher = &inst_obf.memory()[1024..1056];
        assert_eq!(plain, crate::corpus::HASH_TEXT);
        assert_ne!(plain, cipher);
    }

    #[test]
    fn differential_over_memory_fixtures() {
        let mut rng = ChaCha8Rng::seed_from_u64(0x515);
        for fx in fixtures() {
            let mut obf = fx.module.clone();
            let key = MemKey::from_seed(0x1234_5678_9ABC_DEF0);
            memory_obfuscate(&mut obf, &key, &BTreeSet::new()).unwrap();
            validate_module(&obf)
                .unwrap_or_else(|e| panic!("{} invalid after memory pass: {e:?}", fx.name));

            let entry_ft = {
                let e = fx.module.exports.iter().find(|e| e.name == fx.entry).unwrap();
                fx.module.func_type(e.index).unwrap().clone()
            };
            let vectors = gen_arg_vectors(&entry_ft, 40, &mut rng);
            let out = differential_check(
                &fx.module,
                &obf,
                fx.entry,
                &vectors,
                &StubSpec::capturing(),
                1 << 26,
            );
            assert_eq!(
                out.verdict,
                Verdict::Equal,
                "memory pass diverged on {}",
                fx.name
            );
        }
    }
}
