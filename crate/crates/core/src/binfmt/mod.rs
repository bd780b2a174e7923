//! Lossless codec between WebAssembly binary bytes (core spec v1, MVP
//! opcodes plus the `name` custom section) and the [`Module`] IR.
//!
//! The decoder is permissive about non-minimal LEB128 paddings; the encoder
//! always emits minimal encodings, so `encode(decode(b)) == b` holds for
//! canonical `b` and `decode(encode(m)) == m` holds for every well-formed
//! module value.

pub mod decode;
pub mod encode;
pub mod instr;
pub mod leb128;
pub mod module;
pub mod names;

pub use decode::decode_module;
pub use encode::encode_module;
pub use instr::{BlockType, Instr, MemArg};
pub use module::{
    ConstExpr, CustomSection, DataSegment, ElemSegment, Export, ExportKind, FuncBody, FuncType,
    Global, GlobalType, Import, ImportDesc, Limits, MemoryType, Module, TableType, ValType,
};
pub use names::{encode_name_section, parse_name_section, NameData, NameEntry};

use thiserror::Error;

/// Errors produced while decoding a binary into the IR.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DecodeError {
    #[error("unexpected end of input at offset {0}")]
    UnexpectedEof(usize),
    #[error("bad magic bytes (expected \\0asm)")]
    BadMagic,
    #[error("unsupported binary version (expected 1)")]
    BadVersion,
    #[error("LEB128 encoding at offset {0} does not fit in {1} bits")]
    IntTooWide(usize, u32),
    #[error("malformed LEB128 terminator at offset {0}")]
    BadLeb(usize),
    #[error("unknown section id {0}")]
    UnknownSection(u8),
    #[error("section id {0} out of order or duplicated")]
    SectionOrder(u8),
    #[error("section size mismatch: declared {declared}, consumed {consumed}")]
    SectionSize { declared: usize, consumed: usize },
    #[error("unsupported opcode 0x{opcode:02X}{}", match .func { Some(f) => format!(" in function {f}"), None => String::new() })]
    UnsupportedOpcode { opcode: u8, func: Option<u32> },
    #[error("invalid value type 0x{0:02X}")]
    BadValType(u8),
    #[error("invalid block type 0x{0:02X}")]
    BadBlockType(u8),
    #[error("invalid element type 0x{0:02X}")]
    BadElemType(u8),
    #[error("invalid limits flag 0x{0:02X}")]
    BadLimits(u8),
    #[error("invalid mutability flag 0x{0:02X}")]
    BadMutability(u8),
    #[error("invalid import/export kind 0x{0:02X}")]
    BadKind(u8),
    #[error("non-zero reserved byte after opcode 0x{0:02X}")]
    BadReserved(u8),
    #[error("unsupported constant expression")]
    BadConstExpr,
    #[error("function and code section counts differ ({functions} vs {code})")]
    FuncCodeMismatch { functions: usize, code: usize },
    #[error("name is not valid UTF-8")]
    BadUtf8,
    #[error("too many locals declared ({0})")]
    TooManyLocals(u64),
    #[error("malformed name section: {0}")]
    BadNameSection(&'static str),
    #[error("trailing bytes after final section")]
    TrailingBytes,
}

/// Errors produced while encoding the IR back to bytes.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EncodeError {
    #[error("function count ({functions}) does not match code count ({code})")]
    FuncCodeMismatch { functions: usize, code: usize },
    #[error("{space} index {index} out of range")]
    IndexOutOfRange { space: &'static str, index: u32 },
}
