//! Binary-to-IR decoder for core modules.

use super::instr::{mem_op_for_opcode, simple_for_opcode, BlockType, Instr, MemArg};
use super::leb128::{read_i32, read_sleb128, read_u32};
use super::module::*;
use super::DecodeError;

const MAGIC: [u8; 4] = [0x00, 0x61, 0x73, 0x6D];
const VERSION: [u8; 4] = [0x01, 0x00, 0x00, 0x00];

/// Hard cap on expanded locals per function, guarding against decompression
/// bombs in the run-length encoded local declarations.
const MAX_LOCALS: u64 = 100_000;

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn new(bytes: &'a [u8]) -> Self {
        Reader { bytes, pos: 0 }
    }

    fn done(&self) -> bool {
        self.pos >= self.bytes.len()
    }

    fn byte(&mut self) -> Result<u8, DecodeError> {
        let b = *self
            .bytes
            .get(self.pos)
            .ok_or(DecodeError::UnexpectedEof(self.pos))?;
        self.pos += 1;
        Ok(b)
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8], DecodeError> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or(DecodeError::UnexpectedEof(self.bytes.len()))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32, DecodeError> {
        let (v, next) = read_u32(self.bytes, self.pos)?;
        self.pos = next;
        Ok(v)
    }

    fn i32(&mut self) -> Result<i32, DecodeError> {
        let (v, next) = read_i32(self.bytes, self.pos)?;
        self.pos = next;
        Ok(v)
    }

    fn i64(&mut self) -> Result<i64, DecodeError> {
        let (v, next) = read_sleb128(self.bytes, self.pos)?;
        self.pos = next;
        Ok(v)
    }

    fn f32_bits(&mut self) -> Result<u32, DecodeError> {
        let b = self.take(4)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }

    fn f64_bits(&mut self) -> Result<u64, DecodeError> {
        let b = self.take(8)?;
        Ok(u64::from_le_bytes([
            b[0], b[1], b[2], b[3], b[4], b[5], b[6], b[7],
        ]))
    }

    fn name(&mut self) -> Result<String, DecodeError> {
        let len = self.u32()? as usize;
        let bytes = self.take(len)?;
        String::from_utf8(bytes.to_vec()).map_err(|_| DecodeError::BadUtf8)
    }

    fn valtype(&mut self) -> Result<ValType, DecodeError> {
        let b = self.byte()?;
        ValType::from_code(b).ok_or(DecodeError::BadValType(b))
    }

    fn blocktype(&mut self) -> Result<BlockType, DecodeError> {
        let b = self.byte()?;
        if b == 0x40 {
            return Ok(None);
        }
        ValType::from_code(b)
            .map(Some)
            .ok_or(DecodeError::BadBlockType(b))
    }

    fn limits(&mut self) -> Result<Limits, DecodeError> {
        let flag = self.byte()?;
        let min = self.u32()?;
        match flag {
            0x00 => Ok(Limits { min, max: None }),
            0x01 => {
                let max = self.u32()?;
                Ok(Limits {
                    min,
                    max: Some(max),
                })
            }
            other => Err(DecodeError::BadLimits(other)),
        }
    }

    fn tabletype(&mut self) -> Result<TableType, DecodeError> {
        let elem = self.byte()?;
        if elem != 0x70 {
            return Err(DecodeError::BadElemType(elem));
        }
        Ok(TableType {
            limits: self.limits()?,
        })
    }

    fn globaltype(&mut self) -> Result<GlobalType, DecodeError> {
        let ty = self.valtype()?;
        let mutable = match self.byte()? {
            0x00 => false,
            0x01 => true,
            other => return Err(DecodeError::BadMutability(other)),
        };
        Ok(GlobalType { ty, mutable })
    }

    fn memarg(&mut self) -> Result<MemArg, DecodeError> {
        let align = self.u32()?;
        let offset = self.u32()?;
        Ok(MemArg { align, offset })
    }

    fn const_expr(&mut self) -> Result<ConstExpr, DecodeError> {
        let op = self.byte()?;
        let expr = match op {
            0x41 => ConstExpr::I32(self.i32()?),
            0x42 => ConstExpr::I64(self.i64()?),
            0x43 => ConstExpr::F32(self.f32_bits()?),
            0x44 => ConstExpr::F64(self.f64_bits()?),
            0x23 => ConstExpr::GlobalGet(self.u32()?),
            _ => return Err(DecodeError::BadConstExpr),
        };
        if self.byte()? != 0x0B {
            return Err(DecodeError::BadConstExpr);
        }
        Ok(expr)
    }
}

/// Decodes a `.wasm` byte stream into a [`Module`].
///
/// Any post-MVP opcode or section is rejected; unknown custom sections are
/// preserved verbatim.
pub fn decode_module(bytes: &[u8]) -> Result<Module, DecodeError> {
    let mut r = Reader::new(bytes);
    if r.take(4).map_err(|_| DecodeError::BadMagic)? != MAGIC {
        return Err(DecodeError::BadMagic);
    }
    if r.take(4).map_err(|_| DecodeError::BadVersion)? != VERSION {
        return Err(DecodeError::BadVersion);
    }

    let mut m = Module::default();
    let mut last_section = 0u8;
    let mut seen_code = false;

    while !r.done() {
        let id = r.byte()?;
        let size = r.u32()? as usize;
        let body = r.take(size)?;
        let mut s = Reader::new(body);

        if id == 0 {
            let name = s.name()?;
            let data = s.bytes[s.pos..].to_vec();
            m.customs.push(CustomSection {
                name,
                data,
                after: last_section,
            });
            continue;
        }
        if id > 11 {
            return Err(DecodeError::UnknownSection(id));
        }
        if id <= last_section {
            return Err(DecodeError::SectionOrder(id));
        }
        last_section = id;

        match id {
            1 => {
                for _ in 0..s.u32()? {
                    if s.byte()? != 0x60 {
                        return Err(DecodeError::BadValType(0x60));
                    }
                    let mut params = Vec::new();
                    for _ in 0..s.u32()? {
                        params.push(s.valtype()?);
                    }
                    let mut results = Vec::new();
                    for _ in 0..s.u32()? {
                        results.push(s.valtype()?);
                    }
                    m.types.push(FuncType { params, results });
                }
            }
            2 => {
                for _ in 0..s.u32()? {
                    let module = s.name()?;
                    let name = s.name()?;
                    let desc = match s.byte()? {
                        0x00 => ImportDesc::Func(s.u32()?),
                        0x01 => ImportDesc::Table(s.tabletype()?),
                        0x02 => ImportDesc::Memory(MemoryType {
                            limits: s.limits()?,
                        }),
                        0x03 => ImportDesc::Global(s.globaltype()?),
                        other => return Err(DecodeError::BadKind(other)),
                    };
                    m.imports.push(Import { module, name, desc });
                }
            }
            3 => {
                for _ in 0..s.u32()? {
                    m.functions.push(s.u32()?);
                }
            }
            4 => {
                for _ in 0..s.u32()? {
                    m.tables.push(s.tabletype()?);
                }
            }
            5 => {
                for _ in 0..s.u32()? {
                    m.memories.push(MemoryType {
                        limits: s.limits()?,
                    });
                }
            }
            6 => {
                for _ in 0..s.u32()? {
                    let ty = s.globaltype()?;
                    let init = s.const_expr()?;
                    m.globals.push(Global { ty, init });
                }
            }
            7 => {
                for _ in 0..s.u32()? {
                    let name = s.name()?;
                    let kind = match s.byte()? {
                        0x00 => ExportKind::Func,
                        0x01 => ExportKind::Table,
                        0x02 => ExportKind::Memory,
                        0x03 => ExportKind::Global,
                        other => return Err(DecodeError::BadKind(other)),
                    };
                    let index = s.u32()?;
                    m.exports.push(Export { name, kind, index });
                }
            }
            8 => {
                m.start = Some(s.u32()?);
            }
            9 => {
                for _ in 0..s.u32()? {
                    let table = s.u32()?;
                    let offset = s.const_expr()?;
                    let mut funcs = Vec::new();
                    for _ in 0..s.u32()? {
                        funcs.push(s.u32()?);
                    }
                    m.elems.push(ElemSegment {
                        table,
                        offset,
                        funcs,
                    });
                }
            }
            10 => {
                seen_code = true;
                let count = s.u32()? as usize;
                for fidx in 0..count {
                    let body_size = s.u32()? as usize;
                    let body_bytes = s.take(body_size)?;
                    let body = decode_func_body(body_bytes, fidx as u32)?;
                    m.code.push(body);
                }
            }
            11 => {
                for _ in 0..s.u32()? {
                    let memory = s.u32()?;
                    let offset = s.const_expr()?;
                    let len = s.u32()? as usize;
                    let bytes = s.take(len)?.to_vec();
                    m.data.push(DataSegment {
                        memory,
                        offset,
                        bytes,
                    });
                }
            }
            _ => unreachable!(),
        }

        if !s.done() {
            return Err(DecodeError::SectionSize {
                declared: size,
                consumed: s.pos,
            });
        }
    }

    if m.functions.len() != m.code.len() {
        // A missing code section with declared functions (or vice versa).
        let _ = seen_code;
        return Err(DecodeError::FuncCodeMismatch {
            functions: m.functions.len(),
            code: m.code.len(),
        });
    }
    Ok(m)
}

fn decode_func_body(bytes: &[u8], func: u32) -> Result<FuncBody, DecodeError> {
    let mut r = Reader::new(bytes);
    let mut locals = Vec::new();
    let mut total: u64 = 0;
    for _ in 0..r.u32()? {
        let count = r.u32()?;
        let ty = r.valtype()?;
        total += u64::from(count);
        if total > MAX_LOCALS {
            return Err(DecodeError::TooManyLocals(total));
        }
        locals.extend(std::iter::repeat_n(ty, count as usize));
    }
    let instrs = decode_expr(&mut r, func)?;
    if !r.done() {
        return Err(DecodeError::SectionSize {
            declared: bytes.len(),
            consumed: r.pos,
        });
    }
    Ok(FuncBody { locals, instrs })
}

/// Terminator of a nested instruction sequence.
enum SeqEnd {
    End,
    Else,
}

/// Decodes an instruction sequence terminated by `end`.
fn decode_expr(r: &mut Reader, func: u32) -> Result<Vec<Instr>, DecodeError> {
    let (instrs, end) = decode_seq(r, func, false)?;
    match end {
        SeqEnd::End => Ok(instrs),
        SeqEnd::Else => Err(DecodeError::UnsupportedOpcode {
            opcode: 0x05,
            func: Some(func),
        }),
    }
}

fn decode_seq(
    r: &mut Reader,
    func: u32,
    allow_else: bool,
) -> Result<(Vec<Instr>, SeqEnd), DecodeError> {
    let mut out = Vec::new();
    loop {
        let op = r.byte()?;
        let instr = match op {
            0x0B => return Ok((out, SeqEnd::End)),
            0x05 if allow_else => return Ok((out, SeqEnd::Else)),
            0x00 => Instr::Unreachable,
            0x01 => Instr::Nop,
            0x02 => {
                let bt = r.blocktype()?;
                let body = decode_expr(r, func)?;
                Instr::Block(bt, body)
            }
            0x03 => {
                let bt = r.blocktype()?;
                let body = decode_expr(r, func)?;
                Instr::Loop(bt, body)
            }
            0x04 => {
                let bt = r.blocktype()?;
                let (then, end) = decode_seq(r, func, true)?;
                let els = match end {
                    SeqEnd::Else => decode_expr(r, func)?,
                    SeqEnd::End => Vec::new(),
                };
                Instr::If(bt, then, els)
            }
            0x0C => Instr::Br(r.u32()?),
            0x0D => Instr::BrIf(r.u32()?),
            0x0E => {
                let mut targets = Vec::new();
                for _ in 0..r.u32()? {
                    targets.push(r.u32()?);
                }
                let default = r.u32()?;
                Instr::BrTable { targets, default }
            }
            0x0F => Instr::Return,
            0x10 => Instr::Call(r.u32()?),
            0x11 => {
                let ty = r.u32()?;
                let reserved = r.byte()?;
                if reserved != 0 {
                    return Err(DecodeError::BadReserved(0x11));
                }
                Instr::CallIndirect(ty)
            }
            0x1A => Instr::Drop,
            0x1B => Instr::Select,
            0x20 => Instr::LocalGet(r.u32()?),
            0x21 => Instr::LocalSet(r.u32()?),
            0x22 => Instr::LocalTee(r.u32()?),
            0x23 => Instr::GlobalGet(r.u32()?),
            0x24 => Instr::GlobalSet(r.u32()?),
            0x3F => {
                if r.byte()? != 0 {
                    return Err(DecodeError::BadReserved(0x3F));
                }
                Instr::MemorySize
            }
            0x40 => {
                if r.byte()? != 0 {
                    return Err(DecodeError::BadReserved(0x40));
                }
                Instr::MemoryGrow
            }
            0x41 => Instr::I32Const(r.i32()?),
            0x42 => Instr::I64Const(r.i64()?),
            0x43 => Instr::F32Const(r.f32_bits()?),
            0x44 => Instr::F64Const(r.f64_bits()?),
            0x28..=0x3E => {
                let ctor = mem_op_for_opcode(op).expect("range covers all memory opcodes");
                ctor(r.memarg()?)
            }
            _ => {
                // Post-MVP proposals (sign extension, saturating trunc
                // prefix 0xFC, SIMD 0xFD, atomics 0xFE, ...) land here.
                simple_for_opcode(op).ok_or(DecodeError::UnsupportedOpcode {
                    opcode: op,
                    func: Some(func),
                })?
            }
        };
        out.push(instr);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_only_is_empty_module() {
        let bytes = [0x00, 0x61, 0x73, 0x6D, 0x01, 0x00, 0x00, 0x00];
        let m = decode_module(&bytes).unwrap();
        assert_eq!(m, Module::default());
    }

    #[test]
    fn reversed_magic_rejected() {
        let bytes = [0x6D, 0x73, 0x61, 0x00, 0x01, 0x00, 0x00, 0x00];
        assert_eq!(decode_module(&bytes), Err(DecodeError::BadMagic));
    }

    #[test]
    fn bad_version_rejected() {
        let bytes = [0x00, 0x61, 0x73, 0x6D, 0x02, 0x00, 0x00, 0x00];
        assert_eq!(decode_module(&bytes), Err(DecodeError::BadVersion));
    }

    #[test]
    fn truncated_header_rejected() {
        assert_eq!(decode_module(&[0x00, 0x61]), Err(DecodeError::BadMagic));
    }

    #[test]
    fn post_mvp_opcode_rejected() {
        // (module (func)) with body [i32.const 0; i32.extend8_s(0xC0); drop; end]
        let bytes = [
            0x00, 0x61, 0x73, 0x6D, 0x01, 0x00, 0x00, 0x00, // header
            0x01, 0x04, 0x01, 0x60, 0x00, 0x00, // type ()->()
            0x03, 0x02, 0x01, 0x00, // function section
            0x0A, 0x08, 0x01, 0x06, 0x00, 0x41, 0x00, 0xC0, 0x1A, 0x0B, // code
        ];
        assert_eq!(
            decode_module(&bytes),
            Err(DecodeError::UnsupportedOpcode {
                opcode: 0xC0,
                func: Some(0),
            })
        );
    }

    #[test]
    fn out_of_order_sections_rejected() {
        let bytes = [
            0x00, 0x61, 0x73, 0x6D, 0x01, 0x00, 0x00, 0x00, // header
            0x03, 0x02, 0x01, 0x00, // function section first
            0x01, 0x04, 0x01, 0x60, 0x00, 0x00, // then type section
        ];
        assert_eq!(decode_module(&bytes), Err(DecodeError::SectionOrder(1)));
    }

    #[test]
    fn func_code_count_mismatch_rejected() {
        let bytes = [
            0x00, 0x61, 0x73, 0x6D, 0x01, 0x00, 0x00, 0x00, // header
            0x01, 0x04, 0x01, 0x60, 0x00, 0x00, // type
            0x03, 0x02, 0x01, 0x00, // one function, no code section
        ];
        assert!(matches!(
            decode_module(&bytes),
            Err(DecodeError::FuncCodeMismatch { .. })
        ));
    }

    #[test]
    fn custom_section_anchoring() {
        let bytes = [
            0x00, 0x61, 0x73, 0x6D, 0x01, 0x00, 0x00, 0x00, // header
            0x00, 0x03, 0x01, 0x61, 0xFF, // custom "a" at file start
            0x01, 0x04, 0x01, 0x60, 0x00, 0x00, // type section
            0x00, 0x03, 0x01, 0x62, 0xEE, // custom "b" after type
        ];
        let m = decode_module(&bytes).unwrap();
        assert_eq!(m.customs.len(), 2);
        assert_eq!(m.customs[0].name, "a");
        assert_eq!(m.customs[0].after, 0);
        assert_eq!(m.customs[0].data, vec![0xFF]);
        assert_eq!(m.customs[1].name, "b");
        assert_eq!(m.customs[1].after, 1);
    }
}
