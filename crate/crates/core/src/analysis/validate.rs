//! Module validator.
//!
//! A transcription of the core-spec type-checking algorithm (operand stack
//! of possibly-unknown types plus a control-frame stack), restricted to the
//! MVP: single return values, at most one table and one memory.

use crate::binfmt::instr::{BlockType, Instr};
use crate::binfmt::module::*;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ValidationErrorKind {
    #[error("type mismatch: expected {expected}, found {found}")]
    TypeMismatch {
        expected: &'static str,
        found: &'static str,
    },
    #[error("operand stack underflow")]
    StackUnderflow,
    #[error("unknown {space} index {index}")]
    UnknownIndex { space: &'static str, index: u32 },
    #[error("unknown label depth {0}")]
    UnknownLabel(u32),
    #[error("br_table label arity mismatch")]
    LabelArityMismatch,
    #[error("{0} values remain on stack at block end")]
    UnbalancedStack(usize),
    #[error("if with a result type requires an else arm")]
    MissingElse,
    #[error("alignment 2^{align} exceeds natural alignment of a {width}-byte access")]
    BadAlignment { align: u32, width: u32 },
    #[error("global {0} is immutable")]
    ImmutableGlobal(u32),
    #[error("at most one {0} is allowed")]
    MultipleUnsupported(&'static str),
    #[error("function type declares {0} results (at most 1 allowed)")]
    TooManyResults(usize),
    #[error("duplicate export name {0:?}")]
    DuplicateExport(String),
    #[error("start function must have type () -> ()")]
    BadStartType,
    #[error("constant expression has type {found}, expected {expected}")]
    BadConstExprType {
        expected: &'static str,
        found: &'static str,
    },
    #[error("constant expression must reference an imported immutable global")]
    BadConstExprGlobal,
    #[error("limits minimum {min} exceeds maximum {max}")]
    BadLimitRange { min: u32, max: u32 },
    #[error("memory limits exceed 65536 pages")]
    MemoryTooLarge,
}

use ValidationErrorKind as K;

/// A validation failure, with the function it occurred in when body-level.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ValidationError {
    pub func: Option<u32>,
    pub kind: ValidationErrorKind,
}

impl std::fmt::Display for ValidationError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self.func {
            Some(i) => write!(f, "function {i}: {}", self.kind),
            None => write!(f, "{}", self.kind),
        }
    }
}

/// Validates a module under MVP rules. Returns all module-level errors plus
/// the first error of each ill-typed function body.
pub fn validate_module(m: &Module) -> Result<(), Vec<ValidationError>> {
    let mut errors = Vec::new();
    let module_err = |kind| ValidationError { func: None, kind };

    for (i, ty) in m.types.iter().enumerate() {
        if ty.results.len() > 1 {
            let _ = i;
            errors.push(module_err(K::TooManyResults(ty.results.len())));
        }
    }

    for imp in &m.imports {
        match &imp.desc {
            ImportDesc::Func(t) => {
                if *t as usize >= m.types.len() {
                    errors.push(module_err(K::UnknownIndex {
                        space: "type",
                        index: *t,
                    }));
                }
            }
            ImportDesc::Table(t) => check_limits(&t.limits, None, &mut errors),
            ImportDesc::Memory(t) => check_limits(&t.limits, Some(65536), &mut errors),
            ImportDesc::Global(_) => {}
        }
    }

    for &t in &m.functions {
        if t as usize >= m.types.len() {
            errors.push(module_err(K::UnknownIndex {
                space: "type",
                index: t,
            }));
        }
    }

    if m.num_tables() > 1 {
        errors.push(module_err(K::MultipleUnsupported("table")));
    }
    if m.num_memories() > 1 {
        errors.push(module_err(K::MultipleUnsupported("memory")));
    }
    for t in &m.tables {
        check_limits(&t.limits, None, &mut errors);
    }
    for mem in &m.memories {
        check_limits(&mem.limits, Some(65536), &mut errors);
    }

    let n_imported_globals = m.num_imported_globals();
    for g in &m.globals {
        check_const_expr(m, &g.init, g.ty.ty, n_imported_globals, &mut errors);
    }

    let mut names = std::collections::BTreeSet::new();
    for e in &m.exports {
        if !names.insert(e.name.as_str()) {
            errors.push(module_err(K::DuplicateExport(e.name.clone())));
        }
        let (space, bound) = match e.kind {
            ExportKind::Func => ("function", m.num_funcs()),
            ExportKind::Table => ("table", m.num_tables()),
            ExportKind::Memory => ("memory", m.num_memories()),
            ExportKind::Global => ("global", m.num_globals()),
        };
        if e.index >= bound {
            errors.push(module_err(K::UnknownIndex {
                space,
                index: e.index,
            }));
        }
    }

    if let Some(s) = m.start {
        match m.func_type(s) {
            None => errors.push(module_err(K::UnknownIndex {
                space: "function",
                index: s,
            })),
            Some(ft) => {
                if !ft.params.is_empty() || !ft.results.is_empty() {
                    errors.push(module_err(K::BadStartType));
                }
            }
        }
    }

    for e in &m.elems {
        if e.table >= m.num_tables() {
            errors.push(module_err(K::UnknownIndex {
                space: "table",
                index: e.table,
            }));
        }
        check_const_expr(m, &e.offset, ValType::I32, n_imported_globals, &mut errors);
        for &f in &e.funcs {
            if f >= m.num_funcs() {
                errors.push(module_err(K::UnknownIndex {
                    space: "function",
                    index: f,
                }));
            }
        }
    }

    for d in &m.data {
        if d.memory >= m.num_memories() {
            errors.push(module_err(K::UnknownIndex {
                space: "memory",
                index: d.memory,
            }));
        }
        check_const_expr(m, &d.offset, ValType::I32, n_imported_globals, &mut errors);
    }

    if m.functions.len() == m.code.len() && errors.is_empty() {
        let n_imports = m.num_imported_funcs();
        for (local_idx, body) in m.code.iter().enumerate() {
            let func = n_imports + local_idx as u32;
            let ty = &m.types[m.functions[local_idx] as usize];
            if let Err(kind) = validate_body(m, ty, body) {
                errors.push(ValidationError {
                    func: Some(func),
                    kind,
                });
            }
        }
    }

    if errors.is_empty() {
        Ok(())
    } else {
        Err(errors)
    }
}

fn check_limits(l: &Limits, page_cap: Option<u32>, errors: &mut Vec<ValidationError>) {
    if let Some(max) = l.max {
        if l.min > max {
            errors.push(ValidationError {
                func: None,
                kind: K::BadLimitRange { min: l.min, max },
            });
        }
    }
    if let Some(cap) = page_cap {
        if l.min > cap || l.max.is_some_and(|x| x > cap) {
            errors.push(ValidationError {
                func: None,
                kind: K::MemoryTooLarge,
            });
        }
    }
}

fn check_const_expr(
    m: &Module,
    e: &ConstExpr,
    expected: ValType,
    n_imported_globals: u32,
    errors: &mut Vec<ValidationError>,
) {
    let found = match e {
        ConstExpr::I32(_) => ValType::I32,
        ConstExpr::I64(_) => ValType::I64,
        ConstExpr::F32(_) => ValType::F32,
        ConstExpr::F64(_) => ValType::F64,
        ConstExpr::GlobalGet(idx) => {
            if *idx >= n_imported_globals {
                errors.push(ValidationError {
                    func: None,
                    kind: K::BadConstExprGlobal,
                });
                return;
            }
            let gt = m.global_type(*idx).expect("index checked above");
            if gt.mutable {
                errors.push(ValidationError {
                    func: None,
                    kind: K::BadConstExprGlobal,
                });
                return;
            }
            gt.ty
        }
    };
    if found != expected {
        errors.push(ValidationError {
            func: None,
            kind: K::BadConstExprType {
                expected: expected.name(),
                found: found.name(),
            },
        });
    }
}

// ---------------------------------------------------------------------------
// Body validation
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
enum Slot {
    Unknown,
    Known(ValType),
}

struct Frame {
    is_loop: bool,
    block_type: BlockType,
    height: usize,
    unreachable: bool,
}

impl Frame {
    /// Types expected by a branch to this frame's label.
    fn label_arity(&self) -> Option<ValType> {
        if self.is_loop {
            None
        } else {
            self.block_type
        }
    }
}

struct BodyValidator<'m> {
    module: &'m Module,
    locals: Vec<ValType>,
    results: Vec<ValType>,
    vals: Vec<Slot>,
    ctrls: Vec<Frame>,
}

impl<'m> BodyValidator<'m> {
    fn push_val(&mut self, s: Slot) {
        self.vals.push(s);
    }

    fn pop_val(&mut self) -> Result<Slot, K> {
        let frame = self.ctrls.last().ok_or(K::StackUnderflow)?;
        if self.vals.len() == frame.height {
            return if frame.unreachable {
                Ok(Slot::Unknown)
            } else {
                Err(K::StackUnderflow)
            };
        }
        self.vals.pop().ok_or(K::StackUnderflow)
    }

    fn pop_expect(&mut self, ty: ValType) -> Result<(), K> {
        match self.pop_val()? {
            Slot::Unknown => Ok(()),
            Slot::Known(t) if t == ty => Ok(()),
            Slot::Known(t) => Err(K::TypeMismatch {
                expected: ty.name(),
                found: t.name(),
            }),
        }
    }

    fn pop_params(&mut self, params: &[ValType]) -> Result<(), K> {
        for &p in params.iter().rev() {
            self.pop_expect(p)?;
        }
        Ok(())
    }

    fn push_block_type(&mut self, bt: BlockType) {
        if let Some(t) = bt {
            self.push_val(Slot::Known(t));
        }
    }

    fn pop_block_type(&mut self, bt: BlockType) -> Result<(), K> {
        if let Some(t) = bt {
            self.pop_expect(t)?;
        }
        Ok(())
    }

    fn push_ctrl(&mut self, is_loop: bool, bt: BlockType) {
        self.ctrls.push(Frame {
            is_loop,
            block_type: bt,
            height: self.vals.len(),
            unreachable: false,
        });
    }

    fn pop_ctrl(&mut self) -> Result<Frame, K> {
        let bt = self.ctrls.last().ok_or(K::StackUnderflow)?.block_type;
        self.pop_block_type(bt)?;
        let frame = self.ctrls.pop().expect("checked above");
        if self.vals.len() != frame.height {
            return Err(K::UnbalancedStack(self.vals.len() - frame.height));
        }
        Ok(frame)
    }

    fn mark_unreachable(&mut self) {
        let frame = self.ctrls.last_mut().expect("frame present");
        self.vals.truncate(frame.height);
        frame.unreachable = true;
    }

    fn label(&self, depth: u32) -> Result<&Frame, K> {
        let n = self.ctrls.len();
        if (depth as usize) >= n {
            return Err(K::UnknownLabel(depth));
        }
        Ok(&self.ctrls[n - 1 - depth as usize])
    }

    fn local(&self, idx: u32) -> Result<ValType, K> {
        self.locals.get(idx as usize).copied().ok_or(K::UnknownIndex {
            space: "local",
            index: idx,
        })
    }

    fn global(&self, idx: u32) -> Result<GlobalType, K> {
        self.module.global_type(idx).ok_or(K::UnknownIndex {
            space: "global",
            index: idx,
        })
    }

    fn require_memory(&self) -> Result<(), K> {
        if self.module.num_memories() == 0 {
            return Err(K::UnknownIndex {
                space: "memory",
                index: 0,
            });
        }
        Ok(())
    }

    fn seq(&mut self, instrs: &[Instr]) -> Result<(), K> {
        for i in instrs {
            self.instr(i)?;
        }
        Ok(())
    }

    fn instr(&mut self, i: &Instr) -> Result<(), K> {
        match i {
            Instr::Unreachable => self.mark_unreachable(),
            Instr::Nop => {}
            Instr::Block(bt, body) => {
                self.push_ctrl(false, *bt);
                self.seq(body)?;
                let f = self.pop_ctrl()?;
                self.push_block_type(f.block_type);
            }
            Instr::Loop(bt, body) => {
                self.push_ctrl(true, *bt);
                self.seq(body)?;
                let f = self.pop_ctrl()?;
                self.push_block_type(f.block_type);
            }
            Instr::If(bt, then, els) => {
                self.pop_expect(ValType::I32)?;
                if bt.is_some() && els.is_empty() {
                    return Err(K::MissingElse);
                }
                self.push_ctrl(false, *bt);
                self.seq(then)?;
                self.pop_ctrl()?;
                self.push_ctrl(false, *bt);
                self.seq(els)?;
                let f = self.pop_ctrl()?;
                self.push_block_type(f.block_type);
            }
            Instr::Br(depth) => {
                let arity = self.label(*depth)?.label_arity();
                self.pop_block_type(arity)?;
                self.mark_unreachable();
            }
            Instr::BrIf(depth) => {
                self.pop_expect(ValType::I32)?;
                let arity = self.label(*depth)?.label_arity();
                self.pop_block_type(arity)?;
                self.push_block_type(arity);
            }
            Instr::BrTable { targets, default } => {
                self.pop_expect(ValType::I32)?;
                let default_arity = self.label(*default)?.label_arity();
                for t in targets {
                    let arity = self.label(*t)?.label_arity();
                    if arity != default_arity {
                        return Err(K::LabelArityMismatch);
                    }
                    self.pop_block_type(arity)?;
                    self.push_block_type(arity);
                }
                self.pop_block_type(default_arity)?;
                self.mark_unreachable();
            }
            Instr::Return => {
                let results = self.results.clone();
                self.pop_params(&results)?;
                self.mark_unreachable();
            }
            Instr::Call(f) => {
                let ft = self
                    .module
                    .func_type(*f)
                    .ok_or(K::UnknownIndex {
                        space: "function",
                        index: *f,
                    })?
                    .clone();
                self.pop_params(&ft.params)?;
                for r in &ft.results {
                    self.push_val(Slot::Known(*r));
                }
            }
            Instr::CallIndirect(t) => {
                if self.module.num_tables() == 0 {
                    return Err(K::UnknownIndex {
                        space: "table",
                        index: 0,
                    });
                }
                let ft = self
                    .module
                    .types
                    .get(*t as usize)
                    .ok_or(K::UnknownIndex {
                        space: "type",
                        index: *t,
                    })?
                    .clone();
                self.pop_expect(ValType::I32)?;
                self.pop_params(&ft.params)?;
                for r in &ft.results {
                    self.push_val(Slot::Known(*r));
                }
            }
            Instr::Drop => {
                self.pop_val()?;
            }
            Instr::Select => {
                self.pop_expect(ValType::I32)?;
                let a = self.pop_val()?;
                let b = self.pop_val()?;
                let out = match (a, b) {
                    (Slot::Unknown, x) | (x, Slot::Unknown) => x,
                    (Slot::Known(x), Slot::Known(y)) if x == y => Slot::Known(x),
                    (Slot::Known(x), Slot::Known(y)) => {
                        return Err(K::TypeMismatch {
                            expected: x.name(),
                            found: y.name(),
                        })
                    }
                };
                self.push_val(out);
            }
            Instr::LocalGet(idx) => {
                let t = self.local(*idx)?;
                self.push_val(Slot::Known(t));
            }
            Instr::LocalSet(idx) => {
                let t = self.local(*idx)?;
                self.pop_expect(t)?;
            }
            Instr::LocalTee(idx) => {
                let t = self.local(*idx)?;
                self.pop_expect(t)?;
                self.push_val(Slot::Known(t));
            }
            Instr::GlobalGet(idx) => {
                let g = self.global(*idx)?;
                self.push_val(Slot::Known(g.ty));
            }
            Instr::GlobalSet(idx) => {
                let g = self.global(*idx)?;
                if !g.mutable {
                    return Err(K::ImmutableGlobal(*idx));
                }
                self.pop_expect(g.ty)?;
            }
            Instr::MemorySize => {
                self.require_memory()?;
                self.push_val(Slot::Known(ValType::I32));
            }
            Instr::MemoryGrow => {
                self.require_memory()?;
                self.pop_expect(ValType::I32)?;
                self.push_val(Slot::Known(ValType::I32));
            }
            Instr::I32Const(_) => self.push_val(Slot::Known(ValType::I32)),
            Instr::I64Const(_) => self.push_val(Slot::Known(ValType::I64)),
            Instr::F32Const(_) => self.push_val(Slot::Known(ValType::F32)),
            Instr::F64Const(_) => self.push_val(Slot::Known(ValType::F64)),
            other => {
                if let Some(acc) = other.mem_access() {
                    self.require_memory()?;
                    if acc.arg.align > acc.natural_align() {
                        return Err(K::BadAlignment {
                            align: acc.arg.align,
                            width: acc.width,
                        });
                    }
                    match acc.kind {
                        crate::binfmt::instr::MemAccessKind::Load => {
                            self.pop_expect(ValType::I32)?;
                            self.push_val(Slot::Known(acc.ty));
                        }
                        crate::binfmt::instr::MemAccessKind::Store => {
                            self.pop_expect(acc.ty)?;
                            self.pop_expect(ValType::I32)?;
                        }
                    }
                } else {
                    let (params, results) = other
                        .simple_signature()
                        .expect("remaining instructions are simple numeric ops");
                    self.pop_params(params)?;
                    for r in results {
                        self.push_val(Slot::Known(*r));
                    }
                }
            }
        }
        Ok(())
    }
}

fn validate_body(m: &Module, ty: &FuncType, body: &FuncBody) -> Result<(), ValidationErrorKind> {
    let mut locals = ty.params.clone();
    locals.extend_from_slice(&body.locals);
    let mut v = BodyValidator {
        module: m,
        locals,
        results: ty.results.clone(),
        vals: Vec::new(),
        ctrls: Vec::new(),
    };
    // The function body behaves as a block whose result is the return type.
    let bt: BlockType = ty.results.first().copied();
    v.push_ctrl(false, bt);
    v.seq(&body.instrs)?;
    v.pop_ctrl()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::binfmt::instr::MemArg;

    fn module_with_body(
        params: Vec<ValType>,
        results: Vec<ValType>,
        body: Vec<Instr>,
    ) -> Module {
        let mut m = Module::default();
        let ty = m.find_or_add_type(FuncType::new(params, results));
        m.push_function(
            ty,
            FuncBody {
                locals: vec![],
                instrs: body,
            },
        );
        m
    }

    #[test]
    fn empty_module_is_valid() {
        assert!(validate_module(&Module::default()).is_ok());
    }

    #[test]
    fn add_is_valid() {
        let m = module_with_body(
            vec![ValType::I32, ValType::I32],
            vec![ValType::I32],
            vec![Instr::LocalGet(0), Instr::LocalGet(1), Instr::I32Add],
        );
        assert_eq!(validate_module(&m), Ok(()));
    }

    #[test]
    fn ill_typed_add_rejected() {
        let m = module_with_body(
            vec![],
            vec![ValType::I32],
            vec![Instr::I32Const(1), Instr::I64Add],
        );
        let errs = validate_module(&m).unwrap_err();
        assert_eq!(errs[0].func, Some(0));
        assert!(matches!(
            errs[0].kind,
            K::TypeMismatch { .. } | K::StackUnderflow
        ));
    }

    #[test]
    fn branch_label_arity_checked() {
        // br 0 out of an i32-typed block without a value on the stack.
        let m = module_with_body(
            vec![],
            vec![ValType::I32],
            vec![Instr::Block(Some(ValType::I32), vec![Instr::Br(0)])],
        );
        assert!(validate_module(&m).is_err());

        let ok = module_with_body(
            vec![],
            vec![ValType::I32],
            vec![Instr::Block(
                Some(ValType::I32),
                vec![Instr::I32Const(3), Instr::Br(0)],
            )],
        );
        assert_eq!(validate_module(&ok), Ok(()));
    }

    #[test]
    fn unreachable_makes_stack_polymorphic() {
        let m = module_with_body(
            vec![],
            vec![ValType::I32],
            vec![Instr::Unreachable, Instr::I32Add],
        );
        assert_eq!(validate_module(&m), Ok(()));
    }

    #[test]
    fn memory_access_requires_memory() {
        let m = module_with_body(
            vec![ValType::I32],
            vec![ValType::I32],
            vec![Instr::LocalGet(0), Instr::I32Load(MemArg::offset(0))],
        );
        assert!(validate_module(&m).is_err());
    }

    #[test]
    fn over_aligned_access_rejected() {
        let mut m = module_with_body(
            vec![ValType::I32],
            vec![ValType::I32],
            vec![
                Instr::LocalGet(0),
                Instr::I32Load(MemArg { align: 3, offset: 0 }),
            ],
        );
        m.memories.push(MemoryType {
            limits: Limits { min: 1, max: None },
        });
        let errs = validate_module(&m).unwrap_err();
        assert!(matches!(errs[0].kind, K::BadAlignment { .. }));
    }

    #[test]
    fn duplicate_export_rejected() {
        let mut m = module_with_body(vec![], vec![], vec![]);
        m.exports.push(Export {
            name: "f".into(),
            kind: ExportKind::Func,
            index: 0,
        });
        m.exports.push(Export {
            name: "f".into(),
            kind: ExportKind::Func,
            index: 0,
        });
        let errs = validate_module(&m).unwrap_err();
        assert!(matches!(errs[0].kind, K::DuplicateExport(_)));
    }

    #[test]
    fn start_signature_checked() {
        let mut m = module_with_body(vec![ValType::I32], vec![], vec![Instr::Nop]);
        m.start = Some(0);
        let errs = validate_module(&m).unwrap_err();
        assert!(matches!(errs[0].kind, K::BadStartType));
    }

    #[test]
    fn call_indirect_requires_table() {
        let m = module_with_body(
            vec![],
            vec![],
            vec![Instr::I32Const(0), Instr::CallIndirect(0)],
        );
        assert!(validate_module(&m).is_err());
    }

    #[test]
    fn if_result_requires_else() {
        let m = module_with_body(
            vec![ValType::I32],
            vec![ValType::I32],
            vec![
                Instr::LocalGet(0),
                Instr::If(Some(ValType::I32), vec![Instr::I32Const(1)], vec![]),
            ],
        );
        let errs = validate_module(&m).unwrap_err();
        assert!(matches!(errs[0].kind, K::MissingElse));
    }
}
