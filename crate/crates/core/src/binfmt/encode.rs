//! IR-to-binary encoder. Emits minimal LEB128 and omits empty sections.

use super::instr::{mem_opcode, Instr};
use super::leb128::{push_sleb128, push_uleb128};
use super::module::*;
use super::EncodeError;

struct Writer {
    out: Vec<u8>,
}

impl Writer {
    fn new() -> Self {
        Writer { out: Vec::new() }
    }

    fn byte(&mut self, b: u8) {
        self.out.push(b);
    }

    fn u32(&mut self, v: u32) {
        push_uleb128(&mut self.out, u64::from(v));
    }

    fn i32(&mut self, v: i32) {
        push_sleb128(&mut self.out, i64::from(v));
    }

    fn i64(&mut self, v: i64) {
        push_sleb128(&mut self.out, v);
    }

    fn bytes(&mut self, b: &[u8]) {
        self.out.extend_from_slice(b);
    }

    fn name(&mut self, s: &str) {
        self.u32(s.len() as u32);
        self.bytes(s.as_bytes());
    }

    fn valtype(&mut self, t: ValType) {
        self.byte(t.code());
    }

    fn blocktype(&mut self, bt: Option<ValType>) {
        match bt {
            None => self.byte(0x40),
            Some(t) => self.valtype(t),
        }
    }

    fn limits(&mut self, l: Limits) {
        match l.max {
            None => {
                self.byte(0x00);
                self.u32(l.min);
            }
            Some(max) => {
                self.byte(0x01);
                self.u32(l.min);
                self.u32(max);
            }
        }
    }

    fn tabletype(&mut self, t: TableType) {
        self.byte(0x70);
        self.limits(t.limits);
    }

    fn globaltype(&mut self, g: GlobalType) {
        self.valtype(g.ty);
        self.byte(if g.mutable { 0x01 } else { 0x00 });
    }

    fn const_expr(&mut self, e: ConstExpr) {
        match e {
            ConstExpr::I32(v) => {
                self.byte(0x41);
                self.i32(v);
            }
            ConstExpr::I64(v) => {
                self.byte(0x42);
                self.i64(v);
            }
            ConstExpr::F32(bits) => {
                self.byte(0x43);
                self.bytes(&bits.to_le_bytes());
            }
            ConstExpr::F64(bits) => {
                self.byte(0x44);
                self.bytes(&bits.to_le_bytes());
            }
            ConstExpr::GlobalGet(idx) => {
                self.byte(0x23);
                self.u32(idx);
            }
        }
        self.byte(0x0B);
    }
}

/// Encodes a [`Module`] into `.wasm` bytes.
pub fn encode_module(m: &Module) -> Result<Vec<u8>, EncodeError> {
    check_indices(m)?;

    let mut w = Writer::new();
    w.bytes(&[0x00, 0x61, 0x73, 0x6D, 0x01, 0x00, 0x00, 0x00]);

    emit_customs(&mut w, m, 0);

    // type
    if !m.types.is_empty() {
        let mut s = Writer::new();
        s.u32(m.types.len() as u32);
        for t in &m.types {
            s.byte(0x60);
            s.u32(t.params.len() as u32);
            for p in &t.params {
                s.valtype(*p);
            }
            s.u32(t.results.len() as u32);
            for r in &t.results {
                s.valtype(*r);
            }
        }
        section(&mut w, 1, s);
    }
    emit_customs(&mut w, m, 1);

    // import
    if !m.imports.is_empty() {
        let mut s = Writer::new();
        s.u32(m.imports.len() as u32);
        for i in &m.imports {
            s.name(&i.module);
            s.name(&i.name);
            match &i.desc {
                ImportDesc::Func(t) => {
                    s.byte(0x00);
                    s.u32(*t);
                }
                ImportDesc::Table(t) => {
                    s.byte(0x01);
                    s.tabletype(*t);
                }
                ImportDesc::Memory(t) => {
                    s.byte(0x02);
                    s.limits(t.limits);
                }
                ImportDesc::Global(g) => {
                    s.byte(0x03);
                    s.globaltype(*g);
                }
            }
        }
        section(&mut w, 2, s);
    }
    emit_customs(&mut w, m, 2);

    // function
    if !m.functions.is_empty() {
        let mut s = Writer::new();
        s.u32(m.functions.len() as u32);
        for t in &m.functions {
            s.u32(*t);
        }
        section(&mut w, 3, s);
    }
    emit_customs(&mut w, m, 3);

    // table
    if !m.tables.is_empty() {
        let mut s = Writer::new();
        s.u32(m.tables.len() as u32);
        for t in &m.tables {
            s.tabletype(*t);
        }
        section(&mut w, 4, s);
    }
    emit_customs(&mut w, m, 4);

    // memory
    if !m.memories.is_empty() {
        let mut s = Writer::new();
        s.u32(m.memories.len() as u32);
        for mem in &m.memories {
            s.limits(mem.limits);
        }
        section(&mut w, 5, s);
    }
    emit_customs(&mut w, m, 5);

    // global
    if !m.globals.is_empty() {
        let mut s = Writer::new();
        s.u32(m.globals.len() as u32);
        for g in &m.globals {
            s.globaltype(g.ty);
            s.const_expr(g.init);
        }
        section(&mut w, 6, s);
    }
    emit_customs(&mut w, m, 6);

    // export
    if !m.exports.is_empty() {
        let mut s = Writer::new();
        s.u32(m.exports.len() as u32);
        for e in &m.exports {
            s.name(&e.name);
            s.byte(e.kind.code());
            s.u32(e.index);
        }
        section(&mut w, 7, s);
    }
    emit_customs(&mut w, m, 7);

    // start
    if let Some(start) = m.start {
        let mut s = Writer::new();
        s.u32(start);
        section(&mut w, 8, s);
    }
    emit_customs(&mut w, m, 8);

    // elem
    if !m.elems.is_empty() {
        let mut s = Writer::new();
        s.u32(m.elems.len() as u32);
        for e in &m.elems {
            s.u32(e.table);
            s.const_expr(e.offset);
            s.u32(e.funcs.len() as u32);
            for f in &e.funcs {
                s.u32(*f);
            }
        }
        section(&mut w, 9, s);
    }
    emit_customs(&mut w, m, 9);

    // code
    if !m.code.is_empty() {
        let mut s = Writer::new();
        s.u32(m.code.len() as u32);
        for body in &m.code {
            let mut b = Writer::new();
            emit_locals(&mut b, &body.locals);
            emit_seq(&mut b, &body.instrs);
            b.byte(0x0B);
            s.u32(b.out.len() as u32);
            s.bytes(&b.out);
        }
        section(&mut w, 10, s);
    }
    emit_customs(&mut w, m, 10);

    // data
    if !m.data.is_empty() {
        let mut s = Writer::new();
        s.u32(m.data.len() as u32);
        for d in &m.data {
            s.u32(d.memory);
            s.const_expr(d.offset);
            s.u32(d.bytes.len() as u32);
            s.bytes(&d.bytes);
        }
        section(&mut w, 11, s);
    }
    emit_customs(&mut w, m, 11);

    Ok(w.out)
}

fn section(w: &mut Writer, id: u8, body: Writer) {
    w.byte(id);
    w.u32(body.out.len() as u32);
    w.bytes(&body.out);
}

fn emit_customs(w: &mut Writer, m: &Module, after: u8) {
    for c in m.customs.iter().filter(|c| c.after == after) {
        let mut s = Writer::new();
        s.name(&c.name);
        s.bytes(&c.data);
        section(w, 0, s);
    }
}

/// Run-length compresses consecutive equal local types.
fn emit_locals(w: &mut Writer, locals: &[ValType]) {
    let mut runs: Vec<(u32, ValType)> = Vec::new();
    for &t in locals {
        match runs.last_mut() {
            Some((n, ty)) if *ty == t => *n += 1,
            _ => runs.push((1, t)),
        }
    }
    w.u32(runs.len() as u32);
    for (n, t) in runs {
        w.u32(n);
        w.valtype(t);
    }
}

fn emit_seq(w: &mut Writer, instrs: &[Instr]) {
    for i in instrs {
        emit_instr(w, i);
    }
}

fn emit_instr(w: &mut Writer, i: &Instr) {
    match i {
        Instr::Unreachable => w.byte(0x00),
        Instr::Nop => w.byte(0x01),
        Instr::Block(bt, body) => {
            w.byte(0x02);
            w.blocktype(*bt);
            emit_seq(w, body);
            w.byte(0x0B);
        }
        Instr::Loop(bt, body) => {
            w.byte(0x03);
            w.blocktype(*bt);
            emit_seq(w, body);
            w.byte(0x0B);
        }
        Instr::If(bt, then, els) => {
            w.byte(0x04);
            w.blocktype(*bt);
            emit_seq(w, then);
            if !els.is_empty() {
                w.byte(0x05);
                emit_seq(w, els);
            }
            w.byte(0x0B);
        }
        Instr::Br(l) => {
            w.byte(0x0C);
            w.u32(*l);
        }
        Instr::BrIf(l) => {
            w.byte(0x0D);
            w.u32(*l);
        }
        Instr::BrTable { targets, default } => {
            w.byte(0x0E);
            w.u32(targets.len() as u32);
            for t in targets {
                w.u32(*t);
            }
            w.u32(*default);
        }
        Instr::Return => w.byte(0x0F),
        Instr::Call(f) => {
            w.byte(0x10);
            w.u32(*f);
        }
        Instr::CallIndirect(t) => {
            w.byte(0x11);
            w.u32(*t);
            w.byte(0x00);
        }
        Instr::Drop => w.byte(0x1A),
        Instr::Select => w.byte(0x1B),
        Instr::LocalGet(i) => {
            w.byte(0x20);
            w.u32(*i);
        }
        Instr::LocalSet(i) => {
            w.byte(0x21);
            w.u32(*i);
        }
        Instr::LocalTee(i) => {
            w.byte(0x22);
            w.u32(*i);
        }
        Instr::GlobalGet(i) => {
            w.byte(0x23);
            w.u32(*i);
        }
        Instr::GlobalSet(i) => {
            w.byte(0x24);
            w.u32(*i);
        }
        Instr::MemorySize => {
            w.byte(0x3F);
            w.byte(0x00);
        }
        Instr::MemoryGrow => {
            w.byte(0x40);
            w.byte(0x00);
        }
        Instr::I32Const(v) => {
            w.byte(0x41);
            w.i32(*v);
        }
        Instr::I64Const(v) => {
            w.byte(0x42);
            w.i64(*v);
        }
        Instr::F32Const(bits) => {
            w.byte(0x43);
            w.bytes(&bits.to_le_bytes());
        }
        Instr::F64Const(bits) => {
            w.byte(0x44);
            w.bytes(&bits.to_le_bytes());
        }
        other => {
            if let Some(op) = mem_opcode(other) {
                let arg = other.mem_access().expect("memory opcode").arg;
                w.byte(op);
                w.u32(arg.align);
                w.u32(arg.offset);
            } else {
                let op = other
                    .simple_opcode()
                    .expect("every remaining instruction is a simple numeric op");
                w.byte(op);
            }
        }
    }
}

/// Surface-level index checks so that an encode of an inconsistent module
/// fails loudly instead of producing garbage bytes.
fn check_indices(m: &Module) -> Result<(), EncodeError> {
    if m.functions.len() != m.code.len() {
        return Err(EncodeError::FuncCodeMismatch {
            functions: m.functions.len(),
            code: m.code.len(),
        });
    }
    let n_types = m.types.len() as u32;
    for &t in &m.functions {
        if t >= n_types {
            return Err(EncodeError::IndexOutOfRange {
                space: "type",
                index: t,
            });
        }
    }
    let n_funcs = m.num_funcs();
    for e in &m.exports {
        let (space, bound) = match e.kind {
            ExportKind::Func => ("function", n_funcs),
            ExportKind::Table => ("table", m.num_tables()),
            ExportKind::Memory => ("memory", m.num_memories()),
            ExportKind::Global => ("global", m.num_globals()),
        };
        if e.index >= bound {
            return Err(EncodeError::IndexOutOfRange {
                space,
                index: e.index,
            });
        }
    }
    for seg in &m.elems {
        for &f in &seg.funcs {
            if f >= n_funcs {
                return Err(EncodeError::IndexOutOfRange {
                    space: "function",
                    index: f,
                });
            }
        }
    }
    if let Some(s) = m.start {
        if s >= n_funcs {
            return Err(EncodeError::IndexOutOfRange {
                space: "function",
                index: s,
            });
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::super::decode::decode_module;
    use super::*;

    #[test]
    fn empty_module_is_header_only() {
        let m = Module::default();
        assert_eq!(
            encode_module(&m).unwrap(),
            vec![0x00, 0x61, 0x73, 0x6D, 0x01, 0x00, 0x00, 0x00]
        );
    }

    #[test]
    fn add_function_roundtrip() {
        let mut m = Module::default();
        let ty = m.find_or_add_type(FuncType::new(
            vec![ValType::I32, ValType::I32],
            vec![ValType::I32],
        ));
        let f = m.push_function(
            ty,
            FuncBody {
                locals: vec![],
                instrs: vec![Instr::LocalGet(0), Instr::LocalGet(1), Instr::I32Add],
            },
        );
        m.exports.push(Export {
            name: "add".into(),
            kind: ExportKind::Func,
            index: f,
        });
        let bytes = encode_module(&m).unwrap();
        let back = decode_module(&bytes).unwrap();
        assert_eq!(back, m);
        assert_eq!(back.types.len(), 1);
        assert_eq!(back.functions.len(), 1);
        assert_eq!(back.exports.len(), 1);
        // Canonical bytes re-encode identically.
        assert_eq!(encode_module(&back).unwrap(), bytes);
    }

    #[test]
    fn out_of_range_export_rejected() {
        let mut m = Module::default();
        m.exports.push(Export {
            name: "f".into(),
            kind: ExportKind::Func,
            index: 3,
        });
        assert!(matches!(
            encode_module(&m),
            Err(EncodeError::IndexOutOfRange { .. })
        ));
    }

    #[test]
    fn empty_else_arm_omitted() {
        let mut m = Module::default();
        let ty = m.find_or_add_type(FuncType::new(vec![ValType::I32], vec![ValType::I32]));
        m.push_function(
            ty,
            FuncBody {
                locals: vec![],
                instrs: vec![
                    Instr::LocalGet(0),
                    Instr::If(Some(ValType::I32), vec![Instr::I32Const(1)], vec![Instr::I32Const(0)]),
                ],
            },
        );
        let with_else = encode_module(&m).unwrap();
        assert!(with_else.contains(&0x05));

        m.code[0].instrs = vec![
            Instr::LocalGet(0),
            Instr::If(None, vec![Instr::Nop], vec![]),
            Instr::I32Const(7),
        ];
        let without_else = encode_module(&m).unwrap();
        let decoded = decode_module(&without_else).unwrap();
        assert_eq!(decoded, m);
    }
}
