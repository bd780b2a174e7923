//! Reference interpreter for the MVP subset.
//!
//! Big-step tree-walking execution with a deterministic fuel budget. Used as
//! the oracle for differential semantic testing of the obfuscation passes:
//! results, trap kinds, and captured host-call streams must all match.

pub mod diff;

pub use diff::{differential_check, gen_arg_vectors, DiffOutcome, Verdict};

use crate::binfmt::instr::{BlockType, Instr, MemAccess, MemAccessKind};
use crate::binfmt::module::*;
use std::collections::BTreeMap;
use std::rc::Rc;
use thiserror::Error;

const PAGE: usize = 65536;
const MAX_CALL_DEPTH: u32 = 1000;
/// Allocation guard: growth beyond 1 GiB fails with -1 (a permitted
/// implementation limit).
const MAX_PAGES_HARD: u64 = 16384;

/// A runtime value with its exact bit pattern.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Value {
    I32(i32),
    I64(i64),
    F32(u32),
    F64(u64),
}

impl Value {
    pub fn ty(&self) -> ValType {
        match self {
            Value::I32(_) => ValType::I32,
            Value::I64(_) => ValType::I64,
            Value::F32(_) => ValType::F32,
            Value::F64(_) => ValType::F64,
        }
    }

    pub fn zero(ty: ValType) -> Value {
        match ty {
            ValType::I32 => Value::I32(0),
            ValType::I64 => Value::I64(0),
            ValType::F32 => Value::F32(0),
            ValType::F64 => Value::F64(0),
        }
    }

    pub fn from_f32(v: f32) -> Value {
        Value::F32(v.to_bits())
    }

    pub fn from_f64(v: f64) -> Value {
        Value::F64(v.to_bits())
    }

    /// Equality with NaN payloads canonicalized: any two NaNs of the same
    /// width compare equal, everything else is bit-exact.
    pub fn semantic_eq(&self, other: &Value) -> bool {
        match (self, other) {
            (Value::F32(a), Value::F32(b)) => {
                let (fa, fb) = (f32::from_bits(*a), f32::from_bits(*b));
                (fa.is_nan() && fb.is_nan()) || a == b
            }
            (Value::F64(a), Value::F64(b)) => {
                let (fa, fb) = (f64::from_bits(*a), f64::from_bits(*b));
                (fa.is_nan() && fb.is_nan()) || a == b
            }
            _ => self == other,
        }
    }
}

impl std::fmt::Display for Value {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Value::I32(v) => write!(f, "i32:{v}"),
            Value::I64(v) => write!(f, "i64:{v}"),
            Value::F32(v) => write!(f, "f32:{}", f32::from_bits(*v)),
            Value::F64(v) => write!(f, "f64:{}", f64::from_bits(*v)),
        }
    }
}

/// Why execution aborted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum TrapKind {
    #[error("unreachable executed")]
    Unreachable,
    #[error("out-of-bounds memory access")]
    MemoryOutOfBounds,
    #[error("undefined table element")]
    UndefinedElement,
    #[error("uninitialized table element")]
    UninitializedElement,
    #[error("indirect call type mismatch")]
    IndirectTypeMismatch,
    #[error("integer divide by zero")]
    DivByZero,
    #[error("integer overflow")]
    IntegerOverflow,
    #[error("invalid conversion to integer")]
    InvalidConversion,
    #[error("call stack exhausted")]
    StackExhausted,
    #[error("host stub trapped")]
    HostTrap,
}

/// Result of one invocation.
#[derive(Debug, Clone, PartialEq)]
pub enum Outcome {
    Values(Vec<Value>),
    Trap(TrapKind),
    FuelExhausted,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum InstantiateError {
    #[error("unmatched import {module}.{name}: {why}")]
    UnsupportedImport {
        module: String,
        name: String,
        why: &'static str,
    },
    #[error("{kind} segment out of bounds")]
    SegmentOutOfBounds { kind: &'static str },
    #[error("start function trapped: {0}")]
    StartTrap(TrapKind),
    #[error("fuel exhausted while running start function")]
    StartFuelOut,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum InvokeError {
    #[error("no export named {0:?}")]
    NoSuchExport(String),
    #[error("export {0:?} is not a function")]
    NotAFunction(String),
    #[error("no function with index {0}")]
    NoSuchFunc(u32),
    #[error("expected {expected} arguments, got {got}")]
    ArgCount { expected: usize, got: usize },
    #[error("argument {index} has wrong type")]
    ArgType { index: usize },
}

/// What an imported function does when called.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StubBehavior {
    /// Trap with [`TrapKind::HostTrap`].
    Trap,
    /// Return zero values of the declared result types.
    ReturnZero,
    /// Record the arguments to the instance output stream, then return
    /// zeros.
    Capture,
}

/// Resolution table from (module, name) to stub behavior.
#[derive(Debug, Clone)]
pub struct StubSpec {
    map: BTreeMap<(String, String), StubBehavior>,
    default: StubBehavior,
}

impl Default for StubSpec {
    fn default() -> Self {
        StubSpec {
            map: BTreeMap::new(),
            default: StubBehavior::Trap,
        }
    }
}

impl StubSpec {
    pub fn new(default: StubBehavior) -> Self {
        StubSpec {
            map: BTreeMap::new(),
            default,
        }
    }

    pub fn with(mut self, module: &str, name: &str, behavior: StubBehavior) -> Self {
        self.map
            .insert((module.to_string(), name.to_string()), behavior);
        self
    }

    /// Trap on unknown imports, capture `env.emit` calls. The convention the
    /// fixture corpus uses.
    pub fn capturing() -> Self {
        StubSpec::default().with("env", "emit", StubBehavior::Capture)
    }

    fn resolve(&self, module: &str, name: &str) -> StubBehavior {
        self.map
            .get(&(module.to_string(), name.to_string()))
            .copied()
            .unwrap_or(self.default)
    }
}

enum Flow {
    Next,
    Br(u32),
    Return,
}

enum Halt {
    Trap(TrapKind),
    FuelOut,
}

type Exec<T> = Result<T, Halt>;

/// Point-in-time copy of mutable instance state, for cheap per-vector
/// resets in differential testing.
#[derive(Debug, Clone)]
pub struct Snapshot {
    memory: Vec<u8>,
    table: Vec<Option<u32>>,
    globals: Vec<Value>,
    output: Vec<Value>,
}

/// An instantiated module ready for invocation.
pub struct Instance {
    module: Rc<Module>,
    memory: Vec<u8>,
    max_pages: u64,
    table: Vec<Option<u32>>,
    globals: Vec<Value>,
    stack: Vec<Value>,
    output: Vec<Value>,
    import_behaviors: Vec<StubBehavior>,
    fuel: u64,
    last_steps: u64,
    call_depth: u32,
    trace_br_table: Option<Vec<(u32, i32)>>,
}

impl Instance {
    /// Instantiates a validated module: memory from data segments, table
    /// from elem segments, globals evaluated, then the start function.
    pub fn instantiate(
        module: &Module,
        stubs: &StubSpec,
        fuel: u64,
    ) -> Result<Instance, InstantiateError> {
        let mut import_behaviors = Vec::new();
        for imp in &module.imports {
            match &imp.desc {
                ImportDesc::Func(_) => {
                    import_behaviors.push(stubs.resolve(&imp.module, &imp.name));
                }
                _ => {
                    return Err(InstantiateError::UnsupportedImport {
                        module: imp.module.clone(),
                        name: imp.name.clone(),
                        why: "only function imports are stubbed",
                    })
                }
            }
        }

        let mut globals = Vec::new();
        for g in &module.globals {
            let v = match g.init {
                ConstExpr::I32(v) => Value::I32(v),
                ConstExpr::I64(v) => Value::I64(v),
                ConstExpr::F32(bits) => Value::F32(bits),
                ConstExpr::F64(bits) => Value::F64(bits),
                ConstExpr::GlobalGet(_) => {
                    return Err(InstantiateError::UnsupportedImport {
                        module: String::new(),
                        name: String::new(),
                        why: "imported globals are not supported",
                    })
                }
            };
            globals.push(v);
        }

        let (mut memory, max_pages) = match module.memory_type(0) {
            Some(mt) => (
                vec![0u8; mt.limits.min as usize * PAGE],
                u64::from(mt.limits.max.unwrap_or(65536)),
            ),
            None => (Vec::new(), 0),
        };
        for d in &module.data {
            let off = match d.offset.as_i32() {
                Some(v) => v as u32 as usize,
                None => {
                    return Err(InstantiateError::UnsupportedImport {
                        module: String::new(),
                        name: String::new(),
                        why: "non-constant data offset",
                    })
                }
            };
            let end = off.checked_add(d.bytes.len());
            match end {
                Some(e) if e <= memory.len() => memory[off..e].copy_from_slice(&d.bytes),
                _ => return Err(InstantiateError::SegmentOutOfBounds { kind: "data" }),
            }
        }

        let mut table: Vec<Option<u32>> = match module.table_type(0) {
            Some(tt) => vec![None; tt.limits.min as usize],
            None => Vec::new(),
        };
        for e in &module.elems {
            let off = match e.offset.as_i32() {
                Some(v) => v as u32 as usize,
                None => {
                    return Err(InstantiateError::UnsupportedImport {
                        module: String::new(),
                        name: String::new(),
                        why: "non-constant elem offset",
                    })
                }
            };
            let end = off.checked_add(e.funcs.len());
            match end {
                Some(x) if x <= table.len() => {
                    for (i, f) in e.funcs.iter().enumerate() {
                        table[off + i] = Some(*f);
                    }
                }
                _ => return Err(InstantiateError::SegmentOutOfBounds { kind: "elem" }),
            }
        }

        let mut inst = Instance {
            module: Rc::new(module.clone()),
            memory,
            max_pages,
            table,
            globals,
            stack: Vec::new(),
            output: Vec::new(),
            import_behaviors,
            fuel,
            last_steps: 0,
            call_depth: 0,
            trace_br_table: None,
        };

        if let Some(start) = module.start {
            match inst.call_function(start) {
                Ok(()) => {}
                Err(Halt::Trap(k)) => return Err(InstantiateError::StartTrap(k)),
                Err(Halt::FuelOut) => return Err(InstantiateError::StartFuelOut),
            }
        }
        inst.last_steps = fuel - inst.fuel;
        Ok(inst)
    }

    /// Invokes an exported function by name.
    pub fn invoke(&mut self, export: &str, args: &[Value], fuel: u64) -> Result<Outcome, InvokeError> {
        let e = self
            .module
            .exports
            .iter()
            .find(|e| e.name == export)
            .ok_or_else(|| InvokeError::NoSuchExport(export.to_string()))?;
        if e.kind != ExportKind::Func {
            return Err(InvokeError::NotAFunction(export.to_string()));
        }
        let func = e.index;
        self.invoke_index(func, args, fuel)
    }

    /// Invokes a function by index in the function space. Robust against
    /// export renames, which preserve indices.
    pub fn invoke_index(
        &mut self,
        func: u32,
        args: &[Value],
        fuel: u64,
    ) -> Result<Outcome, InvokeError> {
        let ft = self
            .module
            .func_type(func)
            .ok_or(InvokeError::NoSuchFunc(func))?
            .clone();
        if args.len() != ft.params.len() {
            return Err(InvokeError::ArgCount {
                expected: ft.params.len(),
                got: args.len(),
            });
        }
        for (i, (a, p)) in args.iter().zip(&ft.params).enumerate() {
            if a.ty() != *p {
                return Err(InvokeError::ArgType { index: i });
            }
        }

        self.stack.clear();
        self.call_depth = 0;
        self.fuel = fuel;
        self.stack.extend_from_slice(args);
        let result = self.call_function(func);
        self.last_steps = fuel - self.fuel;
        Ok(match result {
            Ok(()) => {
                let vals = std::mem::take(&mut self.stack);
                Outcome::Values(vals)
            }
            Err(Halt::Trap(k)) => {
                self.stack.clear();
                Outcome::Trap(k)
            }
            Err(Halt::FuelOut) => {
                self.stack.clear();
                Outcome::FuelExhausted
            }
        })
    }

    /// Steps consumed by the most recent invocation (or instantiation).
    pub fn last_steps(&self) -> u64 {
        self.last_steps
    }

    /// Values captured by `Capture` stubs so far.
    pub fn output(&self) -> &[Value] {
        &self.output
    }

    pub fn memory(&self) -> &[u8] {
        &self.memory
    }

    pub fn snapshot(&self) -> Snapshot {
        Snapshot {
            memory: self.memory.clone(),
            table: self.table.clone(),
            globals: self.globals.clone(),
            output: self.output.clone(),
        }
    }

    pub fn restore(&mut self, s: &Snapshot) {
        self.memory.clone_from(&s.memory);
        self.table.clone_from(&s.table);
        self.globals.clone_from(&s.globals);
        self.output.clone_from(&s.output);
    }

    /// Starts recording `(function, selector)` for every executed br_table.
    pub fn enable_br_table_trace(&mut self) {
        self.trace_br_table = Some(Vec::new());
    }

    pub fn take_br_table_trace(&mut self) -> Vec<(u32, i32)> {
        self.trace_br_table.replace(Vec::new()).unwrap_or_default()
    }

    // -- execution ----------------------------------------------------------

    fn charge(&mut self) -> Exec<()> {
        if self.fuel == 0 {
            return Err(Halt::FuelOut);
        }
        self.fuel -= 1;
        Ok(())
    }

    fn call_function(&mut self, func: u32) -> Exec<()> {
        let module = Rc::clone(&self.module);
        let ft = module.func_type(func).expect("validated module");
        let n_imports = module.num_imported_funcs();

        if func < n_imports {
            let behavior = self.import_behaviors[func as usize];
            let argc = ft.params.len();
            let at = self.stack.len() - argc;
            let args: Vec<Value> = self.stack.drain(at..).collect();
            match behavior {
                StubBehavior::Trap => return Err(Halt::Trap(TrapKind::HostTrap)),
                StubBehavior::ReturnZero => {}
                StubBehavior::Capture => self.output.extend_from_slice(&args),
            }
            for r in &ft.results {
                self.stack.push(Value::zero(*r));
            }
            return Ok(());
        }

        self.call_depth += 1;
        if self.call_depth > MAX_CALL_DEPTH {
            self.call_depth -= 1;
            return Err(Halt::Trap(TrapKind::StackExhausted));
        }

        let body = module.func_body(func).expect("validated module");
        let argc = ft.params.len();
        let at = self.stack.len() - argc;
        let mut locals: Vec<Value> = self.stack.drain(at..).collect();
        locals.extend(body.locals.iter().map(|t| Value::zero(*t)));

        let base = self.stack.len();
        let flow = self.exec_seq(func, &body.instrs, &mut locals);
        self.call_depth -= 1;
        let flow = flow?;
        debug_assert!(matches!(flow, Flow::Next | Flow::Return | Flow::Br(0)));

        let nres = ft.results.len();
        let at = self.stack.len() - nres;
        let results: Vec<Value> = self.stack.drain(at..).collect();
        self.stack.truncate(base);
        self.stack.extend(results);
        Ok(())
    }

    fn exec_seq(&mut self, func: u32, instrs: &[Instr], locals: &mut Vec<Value>) -> Exec<Flow> {
        for i in instrs {
            self.charge()?;
            match self.exec_instr(func, i, locals)? {
                Flow::Next => {}
                other => return Ok(other),
            }
        }
        Ok(Flow::Next)
    }

    fn land_block(&mut self, base: usize, bt: BlockType) {
        let n = usize::from(bt.is_some());
        let at = self.stack.len() - n;
        let vals: Vec<Value> = self.stack.drain(at..).collect();
        self.stack.truncate(base);
        self.stack.extend(vals);
    }

    fn exec_block_like(
        &mut self,
        func: u32,
        bt: BlockType,
        body: &[Instr],
        locals: &mut Vec<Value>,
    ) -> Exec<Flow> {
        let base = self.stack.len();
        match self.exec_seq(func, body, locals)? {
            Flow::Next => Ok(Flow::Next),
            Flow::Br(0) => {
                self.land_block(base, bt);
                Ok(Flow::Next)
            }
            Flow::Br(n) => Ok(Flow::Br(n - 1)),
            Flow::Return => Ok(Flow::Return),
        }
    }

    fn exec_instr(&mut self, func: u32, i: &Instr, locals: &mut Vec<Value>) -> Exec<Flow> {
        match i {
            Instr::Unreachable => return Err(Halt::Trap(TrapKind::Unreachable)),
            Instr::Nop => {}
            Instr::Block(bt, body) => return self.exec_block_like(func, *bt, body, locals),
            Instr::Loop(_, body) => loop {
                let base = self.stack.len();
                match self.exec_seq(func, body, locals)? {
                    Flow::Next => break,
                    Flow::Br(0) => {
                        // Loop labels have no operands in the MVP.
                        self.stack.truncate(base);
                        continue;
                    }
                    Flow::Br(n) => return Ok(Flow::Br(n - 1)),
                    Flow::Return => return Ok(Flow::Return),
                }
            },
            Instr::If(bt, then, els) => {
                let c = self.pop_i32();
                let arm = if c != 0 { then } else { els };
                return self.exec_block_like(func, *bt, arm, locals);
            }
            Instr::Br(depth) => return Ok(Flow::Br(*depth)),
            Instr::BrIf(depth) => {
                if self.pop_i32() != 0 {
                    return Ok(Flow::Br(*depth));
                }
            }
            Instr::BrTable { targets, default } => {
                let sel = self.pop_i32();
                if let Some(trace) = &mut self.trace_br_table {
                    trace.push((func, sel));
                }
                let depth = usize::try_from(sel)
                    .ok()
                    .and_then(|s| targets.get(s).copied())
                    .unwrap_or(*default);
                return Ok(Flow::Br(depth));
            }
            Instr::Return => return Ok(Flow::Return),
            Instr::Call(f) => self.call_function(*f)?,
            Instr::CallIndirect(ty) => {
                let idx = self.pop_i32() as u32;
                let entry = self
                    .table
                    .get(idx as usize)
                    .copied()
                    .ok_or(Halt::Trap(TrapKind::UndefinedElement))?;
                let callee = entry.ok_or(Halt::Trap(TrapKind::UninitializedElement))?;
                let expected = &self.module.types[*ty as usize];
                let actual = self.module.func_type(callee).expect("validated table entry");
                if actual != expected {
                    return Err(Halt::Trap(TrapKind::IndirectTypeMismatch));
                }
                self.call_function(callee)?;
            }
            Instr::Drop => {
                self.stack.pop();
            }
            Instr::Select => {
                let c = self.pop_i32();
                let b = self.pop();
                let a = self.pop();
                self.stack.push(if c != 0 { a } else { b });
            }
            Instr::LocalGet(idx) => self.stack.push(locals[*idx as usize]),
            Instr::LocalSet(idx) => locals[*idx as usize] = self.pop(),
            Instr::LocalTee(idx) => {
                let v = *self.stack.last().expect("validated");
                locals[*idx as usize] = v;
            }
            Instr::GlobalGet(idx) => self.stack.push(self.globals[*idx as usize]),
            Instr::GlobalSet(idx) => {
                let v = self.pop();
                self.globals[*idx as usize] = v;
            }
            Instr::MemorySize => {
                let pages = (self.memory.len() / PAGE) as i32;
                self.stack.push(Value::I32(pages));
            }
            Instr::MemoryGrow => {
                let delta = self.pop_i32() as u32;
                let old = (self.memory.len() / PAGE) as u64;
                let new = old + u64::from(delta);
                if new > self.max_pages || new > MAX_PAGES_HARD {
                    self.stack.push(Value::I32(-1));
                } else {
                    self.memory.resize(new as usize * PAGE, 0);
                    self.stack.push(Value::I32(old as i32));
                }
            }
            Instr::I32Const(v) => self.stack.push(Value::I32(*v)),
            Instr::I64Const(v) => self.stack.push(Value::I64(*v)),
            Instr::F32Const(bits) => self.stack.push(Value::F32(*bits)),
            Instr::F64Const(bits) => self.stack.push(Value::F64(*bits)),
            other => {
                if let Some(acc) = other.mem_access() {
                    self.exec_mem(acc)?;
                } else {
                    self.exec_numeric(other)?;
                }
            }
        }
        Ok(Flow::Next)
    }

    // -- operand stack helpers ----------------------------------------------

    fn pop(&mut self) -> Value {
        self.stack.pop().expect("validated module: stack underflow")
    }

    fn pop_i32(&mut self) -> i32 {
        match self.pop() {
            Value::I32(v) => v,
            other => panic!("validated module: expected i32, got {other:?}"),
        }
    }

    fn pop_i64(&mut self) -> i64 {
        match self.pop() {
            Value::I64(v) => v,
            other => panic!("validated module: expected i64, got {other:?}"),
        }
    }

    fn pop_f32(&mut self) -> f32 {
        match self.pop() {
            Value::F32(v) => f32::from_bits(v),
            other => panic!("validated module: expected f32, got {other:?}"),
        }
    }

    fn pop_f64(&mut self) -> f64 {
        match self.pop() {
            Value::F64(v) => f64::from_bits(v),
            other => panic!("validated module: expected f64, got {other:?}"),
        }
    }

    fn push_i32(&mut self, v: i32) {
        self.stack.push(Value::I32(v));
    }

    fn push_i64(&mut self, v: i64) {
        self.stack.push(Value::I64(v));
    }

    fn push_f32(&mut self, v: f32) {
        self.stack.push(Value::from_f32(v));
    }

    fn push_f64(&mut self, v: f64) {
        self.stack.push(Value::from_f64(v));
    }

    fn push_bool(&mut self, b: bool) {
        self.push_i32(i32::from(b));
    }

    // -- memory -------------------------------------------------------------

    fn exec_mem(&mut self, acc: MemAccess) -> Exec<()> {
        match acc.kind {
            MemAccessKind::Load => {
                let base = self.pop_i32() as u32;
                let ea = u64::from(base) + u64::from(acc.arg.offset);
                let raw = self.mem_read(ea, acc.width)?;
                let v = match (acc.ty, acc.width, acc.signed) {
                    (ValType::I32, 4, _) => Value::I32(raw as u32 as i32),
                    (ValType::I32, 1, true) => Value::I32(raw as u8 as i8 as i32),
                    (ValType::I32, 1, false) => Value::I32(raw as u8 as i32),
                    (ValType::I32, 2, true) => Value::I32(raw as u16 as i16 as i32),
                    (ValType::I32, 2, false) => Value::I32(raw as u16 as i32),
                    (ValType::I64, 8, _) => Value::I64(raw as i64),
                    (ValType::I64, 1, true) => Value::I64(raw as u8 as i8 as i64),
                    (ValType::I64, 1, false) => Value::I64(raw as u8 as i64),
                    (ValType::I64, 2, true) => Value::I64(raw as u16 as i16 as i64),
                    (ValType::I64, 2, false) => Value::I64(raw as u16 as i64),
                    (ValType::I64, 4, true) => Value::I64(raw as u32 as i32 as i64),
                    (ValType::I64, 4, false) => Value::I64(raw as u32 as i64),
                    (ValType::F32, 4, _) => Value::F32(raw as u32),
                    (ValType::F64, 8, _) => Value::F64(raw),
                    _ => unreachable!("no such load shape"),
                };
                self.stack.push(v);
            }
            MemAccessKind::Store => {
                let value = self.pop();
                let base = self.pop_i32() as u32;
                let ea = u64::from(base) + u64::from(acc.arg.offset);
                let raw = match value {
                    Value::I32(v) => v as u32 as u64,
                    Value::I64(v) => v as u64,
                    Value::F32(bits) => u64::from(bits),
                    Value::F64(bits) => bits,
                };
                self.mem_write(ea, acc.width, raw)?;
            }
        }
        Ok(())
    }

    fn mem_read(&self, ea: u64, width: u32) -> Exec<u64> {
        let end = ea + u64::from(width);
        if end > self.memory.len() as u64 {
            return Err(Halt::Trap(TrapKind::MemoryOutOfBounds));
        }
        let mut raw = 0u64;
        for i in 0..width as usize {
            raw |= u64::from(self.memory[ea as usize + i]) << (8 * i);
        }
        Ok(raw)
    }

    fn mem_write(&mut self, ea: u64, width: u32, raw: u64) -> Exec<()> {
        let end = ea + u64::from(width);
        if end > self.memory.len() as u64 {
            return Err(Halt::Trap(TrapKind::MemoryOutOfBounds));
        }
        for i in 0..width as usize {
            self.memory[ea as usize + i] = (raw >> (8 * i)) as u8;
        }
        Ok(())
    }

    // -- numeric ------------------------------------------------------------

    #[allow(clippy::too_many_lines)]
    fn exec_numeric(&mut self, i: &Instr) -> Exec<()> {
        use Instr::*;
        match i {
            // i32 comparisons
            I32Eqz => {
                let a = self.pop_i32();
                self.push_bool(a == 0);
            }
            I32Eq => self.cmp_i32(|a, b| a == b),
            I32Ne => self.cmp_i32(|a, b| a != b),
            I32LtS => self.cmp_i32(|a, b| a < b),
            I32LtU => self.cmp_i32(|a, b| (a as u32) < (b as u32)),
            I32GtS => self.cmp_i32(|a, b| a > b),
            I32GtU => self.cmp_i32(|a, b| (a as u32) > (b as u32)),
            I32LeS => self.cmp_i32(|a, b| a <= b),
            I32LeU => self.cmp_i32(|a, b| (a as u32) <= (b as u32)),
            I32GeS => self.cmp_i32(|a, b| a >= b),
            I32GeU => self.cmp_i32(|a, b| (a as u32) >= (b as u32)),
            // i64 comparisons
            I64Eqz => {
                let a = self.pop_i64();
                self.push_bool(a == 0);
            }
            I64Eq => self.cmp_i64(|a, b| a == b),
            I64Ne => self.cmp_i64(|a, b| a != b),
            I64LtS => self.cmp_i64(|a, b| a < b),
            I64LtU => self.cmp_i64(|a, b| (a as u64) < (b as u64)),
            I64GtS => self.cmp_i64(|a, b| a > b),
            I64GtU => self.cmp_i64(|a, b| (a as u64) > (b as u64)),
            I64LeS => self.cmp_i64(|a, b| a <= b),
            I64LeU => self.cmp_i64(|a, b| (a as u64) <= (b as u64)),
            I64GeS => self.cmp_i64(|a, b| a >= b),
            I64GeU => self.cmp_i64(|a, b| (a as u64) >= (b as u64)),
            // float comparisons
            F32Eq => self.cmp_f32(|a, b| a == b),
            F32Ne => self.cmp_f32(|a, b| a != b),
            F32Lt => self.cmp_f32(|a, b| a < b),
            F32Gt => self.cmp_f32(|a, b| a > b),
            F32Le => self.cmp_f32(|a, b| a <= b),
            F32Ge => self.cmp_f32(|a, b| a >= b),
            F64Eq => self.cmp_f64(|a, b| a == b),
            F64Ne => self.cmp_f64(|a, b| a != b),
            F64Lt => self.cmp_f64(|a, b| a < b),
            F64Gt => self.cmp_f64(|a, b| a > b),
            F64Le => self.cmp_f64(|a, b| a <= b),
            F64Ge => self.cmp_f64(|a, b| a >= b),
            // i32 arithmetic
            I32Clz => self.un_i32(|a| a.leading_zeros() as i32),
            I32Ctz => self.un_i32(|a| a.trailing_zeros() as i32),
            I32Popcnt => self.un_i32(|a| a.count_ones() as i32),
            I32Add => self.bin_i32(i32::wrapping_add),
            I32Sub => self.bin_i32(i32::wrapping_sub),
            I32Mul => self.bin_i32(i32::wrapping_mul),
            I32DivS => self.bin_i32_trap(|a, b| {
                if b == 0 {
                    Err(TrapKind::DivByZero)
                } else if a == i32::MIN && b == -1 {
                    Err(TrapKind::IntegerOverflow)
                } else {
                    Ok(a.wrapping_div(b))
                }
            })?,
            I32DivU => self.bin_i32_trap(|a, b| {
                if b == 0 {
                    Err(TrapKind::DivByZero)
                } else {
                    Ok(((a as u32) / (b as u32)) as i32)
                }
            })?,
            I32RemS => self.bin_i32_trap(|a, b| {
                if b == 0 {
                    Err(TrapKind::DivByZero)
                } else {
                    Ok(a.wrapping_rem(b))
                }
            })?,
            I32RemU => self.bin_i32_trap(|a, b| {
                if b == 0 {
                    Err(TrapKind::DivByZero)
                } else {
                    Ok(((a as u32) % (b as u32)) as i32)
                }
            })?,
            I32And => self.bin_i32(|a, b| a & b),
            I32Or => self.bin_i32(|a, b| a | b),
            I32Xor => self.bin_i32(|a, b| a ^ b),
            I32Shl => self.bin_i32(|a, b| a.wrapping_shl(b as u32)),
            I32ShrS => self.bin_i32(|a, b| a.wrapping_shr(b as u32)),
            I32ShrU => self.bin_i32(|a, b| ((a as u32).wrapping_shr(b as u32)) as i32),
            I32Rotl => self.bin_i32(|a, b| a.rotate_left((b as u32) & 31)),
            I32Rotr => self.bin_i32(|a, b| a.rotate_right((b as u32) & 31)),
            // i64 arithmetic
            I64Clz => self.un_i64(|a| i64::from(a.leading_zeros())),
            I64Ctz => self.un_i64(|a| i64::from(a.trailing_zeros())),
            I64Popcnt => self.un_i64(|a| i64::from(a.count_ones())),
            I64Add => self.bin_i64(i64::wrapping_add),
            I64Sub => self.bin_i64(i64::wrapping_sub),
            I64Mul => self.bin_i64(i64::wrapping_mul),
            I64DivS => self.bin_i64_trap(|a, b| {
                if b == 0 {
                    Err(TrapKind::DivByZero)
                } else if a == i64::MIN && b == -1 {
                    Err(TrapKind::IntegerOverflow)
                } else {
                    Ok(a.wrapping_div(b))
                }
            })?,
            I64DivU => self.bin_i64_trap(|a, b| {
                if b == 0 {
                    Err(TrapKind::DivByZero)
                } else {
                    Ok(((a as u64) / (b as u64)) as i64)
                }
            })?,
            I64RemS => self.bin_i64_trap(|a, b| {
                if b == 0 {
                    Err(TrapKind::DivByZero)
                } else {
                    Ok(a.wrapping_rem(b))
                }
            })?,
            I64RemU => self.bin_i64_trap(|a, b| {
                if b == 0 {
                    Err(TrapKind::DivByZero)
                } else {
                    Ok(((a as u64) % (b as u64)) as i64)
                }
            })?,
            I64And => self.bin_i64(|a, b| a & b),
            I64Or => self.bin_i64(|a, b| a | b),
            I64Xor => self.bin_i64(|a, b| a ^ b),
            I64Shl => self.bin_i64(|a, b| a.wrapping_shl(b as u32)),
            I64ShrS => self.bin_i64(|a, b| a.wrapping_shr(b as u32)),
            I64ShrU => self.bin_i64(|a, b| ((a as u64).wrapping_shr(b as u32)) as i64),
            I64Rotl => self.bin_i64(|a, b| a.rotate_left((b as u32) & 63)),
            I64Rotr => self.bin_i64(|a, b| a.rotate_right((b as u32) & 63)),
            // f32 arithmetic
            F32Abs => self.un_f32(f32::abs),
            F32Neg => self.un_f32(|a| -a),
            F32Ceil => self.un_f32(f32::ceil),
            F32Floor => self.un_f32(f32::floor),
            F32Trunc => self.un_f32(f32::trunc),
            F32Nearest => self.un_f32(f32::round_ties_even),
            F32Sqrt => self.un_f32(f32::sqrt),
            F32Add => self.bin_f32(|a, b| a + b),
            F32Sub => self.bin_f32(|a, b| a - b),
            F32Mul => self.bin_f32(|a, b| a * b),
            F32Div => self.bin_f32(|a, b| a / b),
            F32Min => self.bin_f32(fmin32),
            F32Max => self.bin_f32(fmax32),
            F32Copysign => self.bin_f32(f32::copysign),
            // f64 arithmetic
            F64Abs => self.un_f64(f64::abs),
            F64Neg => self.un_f64(|a| -a),
            F64Ceil => self.un_f64(f64::ceil),
            F64Floor => self.un_f64(f64::floor),
            F64Trunc => self.un_f64(f64::trunc),
            F64Nearest => self.un_f64(f64::round_ties_even),
            F64Sqrt => self.un_f64(f64::sqrt),
            F64Add => self.bin_f64(|a, b| a + b),
            F64Sub => self.bin_f64(|a, b| a - b),
            F64Mul => self.bin_f64(|a, b| a * b),
            F64Div => self.bin_f64(|a, b| a / b),
            F64Min => self.bin_f64(fmin64),
            F64Max => self.bin_f64(fmax64),
            F64Copysign => self.bin_f64(f64::copysign),
            // conversions
            I32WrapI64 => {
                let v = self.pop_i64();
                self.push_i32(v as i32);
            }
            I32TruncF32S => {
                let v = f64::from(self.pop_f32());
                self.push_i32(trunc_to_i32_s(v).map_err(Halt::Trap)?);
            }
            I32TruncF32U => {
                let v = f64::from(self.pop_f32());
                self.push_i32(trunc_to_i32_u(v).map_err(Halt::Trap)? as i32);
            }
            I32TruncF64S => {
                let v = self.pop_f64();
                self.push_i32(trunc_to_i32_s(v).map_err(Halt::Trap)?);
            }
            I32TruncF64U => {
                let v = self.pop_f64();
                self.push_i32(trunc_to_i32_u(v).map_err(Halt::Trap)? as i32);
            }
            I64ExtendI32S => {
                let v = self.pop_i32();
                self.push_i64(i64::from(v));
            }
            I64ExtendI32U => {
                let v = self.pop_i32();
                self.push_i64(i64::from(v as u32));
            }
            I64TruncF32S => {
                let v = f64::from(self.pop_f32());
                self.push_i64(trunc_to_i64_s(v).map_err(Halt::Trap)?);
            }
            I64TruncF32U => {
                let v = f64::from(self.pop_f32());
                self.push_i64(trunc_to_i64_u(v).map_err(Halt::Trap)? as i64);
            }
            I64TruncF64S => {
                let v = self.pop_f64();
                self.push_i64(trunc_to_i64_s(v).map_err(Halt::Trap)?);
            }
            I64TruncF64U => {
                let v = self.pop_f64();
                self.push_i64(trunc_to_i64_u(v).map_err(Halt::Trap)? as i64);
            }
            F32ConvertI32S => {
                let v = self.pop_i32();
                self.push_f32(v as f32);
            }
            F32ConvertI32U => {
                let v = self.pop_i32();
                self.push_f32(v as u32 as f32);
            }
            F32ConvertI64S => {
                let v = self.pop_i64();
                self.push_f32(v as f32);
            }
            F32ConvertI64U => {
                let v = self.pop_i64();
                self.push_f32(v as u64 as f32);
            }
            F32DemoteF64 => {
                let v = self.pop_f64();
                self.push_f32(v as f32);
            }
            F64ConvertI32S => {
                let v = self.pop_i32();
                self.push_f64(f64::from(v));
            }
            F64ConvertI32U => {
                let v = self.pop_i32();
                self.push_f64(f64::from(v as u32));
            }
            F64ConvertI64S => {
                let v = self.pop_i64();
                self.push_f64(v as f64);
            }
            F64ConvertI64U => {
                let v = self.pop_i64();
                self.push_f64(v as u64 as f64);
            }
            F64PromoteF32 => {
                let v = self.pop_f32();
                self.push_f64(f64::from(v));
            }
            I32ReinterpretF32 => {
                let v = self.pop_f32();
                self.push_i32(v.to_bits() as i32);
            }
            I64ReinterpretF64 => {
                let v = self.pop_f64();
                self.push_i64(v.to_bits() as i64);
            }
            F32ReinterpretI32 => {
                let v = self.pop_i32();
                self.stack.push(Value::F32(v as u32));
            }
            F64ReinterpretI64 => {
                let v = self.pop_i64();
                self.stack.push(Value::F64(v as u64));
            }
            other => unreachable!("not a numeric instruction: {other:?}"),
        }
        Ok(())
    }

    fn cmp_i32(&mut self, f: impl Fn(i32, i32) -> bool) {
        let b = self.pop_i32();
        let a = self.pop_i32();
        self.push_bool(f(a, b));
    }

    fn cmp_i64(&mut self, f: impl Fn(i64, i64) -> bool) {
        let b = self.pop_i64();
        let a = self.pop_i64();
        self.push_bool(f(a, b));
    }

    fn cmp_f32(&mut self, f: impl Fn(f32, f32) -> bool) {
        let b = self.pop_f32();
        let a = self.pop_f32();
        self.push_bool(f(a, b));
    }

    fn cmp_f64(&mut self, f: impl Fn(f64, f64) -> bool) {
        let b = self.pop_f64();
        let a = self.pop_f64();
        self.push_bool(f(a, b));
    }

    fn un_i32(&mut self, f: impl Fn(i32) -> i32) {
        let a = self.pop_i32();
        self.push_i32(f(a));
    }

    fn un_i64(&mut self, f: impl Fn(i64) -> i64) {
        let a = self.pop_i64();
        self.push_i64(f(a));
    }

    fn un_f32(&mut self, f: impl Fn(f32) -> f32) {
        let a = self.pop_f32();
        self.push_f32(f(a));
    }

    fn un_f64(&mut self, f: impl Fn(f64) -> f64) {
        let a = self.pop_f64();
        self.push_f64(f(a));
    }

    fn bin_i32(&mut self, f: impl Fn(i32, i32) -> i32) {
        let b = self.pop_i32();
        let a = self.pop_i32();
        self.push_i32(f(a, b));
    }

    fn bin_i64(&mut self, f: impl Fn(i64, i64) -> i64) {
        let b = self.pop_i64();
        let a = self.pop_i64();
        self.push_i64(f(a, b));
    }

    fn bin_f32(&mut self, f: impl Fn(f32, f32) -> f32) {
        let b = self.pop_f32();
        let a = self.pop_f32();
        self.push_f32(f(a, b));
    }

    fn bin_f64(&mut self, f: impl Fn(f64, f64) -> f64) {
        let b = self.pop_f64();
        let a = self.pop_f64();
        self.push_f64(f(a, b));
    }

    fn bin_i32_trap(&mut self, f: impl Fn(i32, i32) -> Result<i32, TrapKind>) -> Exec<()> {
        let b = self.pop_i32();
        let a = self.pop_i32();
        let r = f(a, b).map_err(Halt::Trap)?;
        self.push_i32(r);
        Ok(())
    }

    fn bin_i64_trap(&mut self, f: impl Fn(i64, i64) -> Result<i64, TrapKind>) -> Exec<()> {
        let b = self.pop_i64();
        let a = self.pop_i64();
        let r = f(a, b).map_err(Halt::Trap)?;
        self.push_i64(r);
        Ok(())
    }
}

fn fmin32(a: f32, b: f32) -> f32 {
    if a.is_nan() || b.is_nan() {
        f32::NAN
    } else if a < b {
        a
    } else if b < a {
        b
    } else if a.is_sign_negative() {
        a
    } else {
        b
    }
}

fn fmax32(a: f32, b: f32) -> f32 {
    if a.is_nan() || b.is_nan() {
        f32::NAN
    } else if a > b {
        a
    } else if b > a {
        b
    } else if a.is_sign_positive() {
        a
    } else {
        b
    }
}

fn fmin64(a: f64, b: f64) -> f64 {
    if a.is_nan() || b.is_nan() {
        f64::NAN
    } else if a < b {
        a
    } else if b < a {
        b
    } else if a.is_sign_negative() {
        a
    } else {
        b
    }
}

fn fmax64(a: f64, b: f64) -> f64 {
    if a.is_nan() || b.is_nan() {
        f64::NAN
    } else if a > b {
        a
    } else if b > a {
        b
    } else if a.is_sign_positive() {
        a
    } else {
        b
    }
}

fn trunc_to_i32_s(v: f64) -> Result<i32, TrapKind> {
    if v.is_nan() {
        return Err(TrapKind::InvalidConversion);
    }
    let t = v.trunc();
    if !(-2147483648.0..=2147483647.0).contains(&t) {
        return Err(TrapKind::IntegerOverflow);
    }
    Ok(t as i32)
}

fn trunc_to_i32_u(v: f64) -> Result<u32, TrapKind> {
    if v.is_nan() {
        return Err(TrapKind::InvalidConversion);
    }
    let t = v.trunc();
    if !(-0.0..=4294967295.0).contains(&t) {
        return Err(TrapKind::IntegerOverflow);
    }
    Ok(t as u32)
}

fn trunc_to_i64_s(v: f64) -> Result<i64, TrapKind> {
    if v.is_nan() {
        return Err(TrapKind::InvalidConversion);
    }
    let t = v.trunc();
    // 2^63 is exactly representable; i64::MAX is not.
    if t < -9223372036854775808.0 || t >= 9223372036854775808.0 {
        return Err(TrapKind::IntegerOverflow);
    }
    Ok(t as i64)
}

fn trunc_to_i64_u(v: f64) -> Result<u64, TrapKind> {
    if v.is_nan() {
        return Err(TrapKind::InvalidConversion);
    }
    let t = v.trunc();
    if t < -0.0 || t >= 18446744073709551616.0 {
        return Err(TrapKind::IntegerOverflow);
    }
    Ok(t as u64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::binfmt::instr::MemArg;

    fn run(
        params: Vec<ValType>,
        results: Vec<ValType>,
        body: Vec<Instr>,
        args: &[Value],
    ) -> Outcome {
        let mut m = Module::default();
        let ty = m.find_or_add_type(FuncType::new(params, results));
        let f = m.push_function(
            ty,
            FuncBody {
                locals: vec![],
                instrs: body,
            },
        );
        m.exports.push(Export {
            name: "f".into(),
            kind: ExportKind::Func,
            index: f,
        });
        crate::analysis::validate_module(&m).expect("test body must validate");
        let mut inst = Instance::instantiate(&m, &StubSpec::default(), 1 << 20).unwrap();
        inst.invoke("f", args, 1 << 20).unwrap()
    }

    #[test]
    fn add_two_and_three() {
        let out = run(
            vec![ValType::I32, ValType::I32],
            vec![ValType::I32],
            vec![Instr::LocalGet(0), Instr::LocalGet(1), Instr::I32Add],
            &[Value::I32(2), Value::I32(3)],
        );
        assert_eq!(out, Outcome::Values(vec![Value::I32(5)]));
    }

    #[test]
    fn div_overflow_traps() {
        let out = run(
            vec![ValType::I32, ValType::I32],
            vec![ValType::I32],
            vec![Instr::LocalGet(0), Instr::LocalGet(1), Instr::I32DivS],
            &[Value::I32(i32::MIN), Value::I32(-1)],
        );
        assert_eq!(out, Outcome::Trap(TrapKind::IntegerOverflow));

        let out = run(
            vec![ValType::I32, ValType::I32],
            vec![ValType::I32],
            vec![Instr::LocalGet(0), Instr::LocalGet(1), Instr::I32DivS],
            &[Value::I32(7), Value::I32(0)],
        );
        assert_eq!(out, Outcome::Trap(TrapKind::DivByZero));
    }

    #[test]
    fn rem_s_min_by_minus_one_is_zero() {
        let out = run(
            vec![ValType::I32, ValType::I32],
            vec![ValType::I32],
            vec![Instr::LocalGet(0), Instr::LocalGet(1), Instr::I32RemS],
            &[Value::I32(i32::MIN), Value::I32(-1)],
        );
        assert_eq!(out, Outcome::Values(vec![Value::I32(0)]));
    }

    #[test]
    fn memory_store_load_roundtrip() {
        let mut m = Module::default();
        m.memories.push(MemoryType {
            limits: Limits { min: 1, max: None },
        });
        let ty = m.find_or_add_type(FuncType::new(vec![ValType::I32], vec![ValType::I32]));
        let f = m.push_function(
            ty,
            FuncBody {
                locals: vec![],
                instrs: vec![
                    Instr::I32Const(64),
                    Instr::LocalGet(0),
                    Instr::I32Store(MemArg::offset(0)),
                    Instr::I32Const(64),
                    Instr::I32Load(MemArg::offset(0)),
                ],
            },
        );
        m.exports.push(Export {
            name: "f".into(),
            kind: ExportKind::Func,
            index: f,
        });
        crate::analysis::validate_module(&m).unwrap();
        let mut inst = Instance::instantiate(&m, &StubSpec::default(), 1 << 20).unwrap();
        let out = inst.invoke("f", &[Value::I32(-123456)], 1 << 20).unwrap();
        assert_eq!(out, Outcome::Values(vec![Value::I32(-123456)]));
    }

    #[test]
    fn oob_load_traps() {
        let mut m = Module::default();
        m.memories.push(MemoryType {
            limits: Limits { min: 1, max: None },
        });
        let ty = m.find_or_add_type(FuncType::new(vec![], vec![ValType::I32]));
        let f = m.push_function(
            ty,
            FuncBody {
                locals: vec![],
                instrs: vec![Instr::I32Const(65533), Instr::I32Load(MemArg::offset(0))],
            },
        );
        m.exports.push(Export {
            name: "f".into(),
            kind: ExportKind::Func,
            index: f,
        });
        let mut inst = Instance::instantiate(&m, &StubSpec::default(), 1 << 20).unwrap();
        let out = inst.invoke("f", &[], 1 << 20).unwrap();
        assert_eq!(out, Outcome::Trap(TrapKind::MemoryOutOfBounds));
    }

    #[test]
    fn loop_counts_down() {
        // local0 = arg; loop { local0 -= 1; br_if local0 != 0 }; return 42
        let body = vec![
            Instr::Loop(
                None,
                vec![
                    Instr::LocalGet(0),
                    Instr::I32Const(1),
                    Instr::I32Sub,
                    Instr::LocalTee(0),
                    Instr::I32Const(0),
                    Instr::I32Ne,
                    Instr::BrIf(0),
                ],
            ),
            Instr::I32Const(42),
        ];
        let out = run(
            vec![ValType::I32],
            vec![ValType::I32],
            body,
            &[Value::I32(5)],
        );
        assert_eq!(out, Outcome::Values(vec![Value::I32(42)]));
    }

    #[test]
    fn call_indirect_type_check() {
        let mut m = Module::default();
        let t0 = m.find_or_add_type(FuncType::new(vec![], vec![ValType::I32]));
        let t1 = m.find_or_add_type(FuncType::new(vec![], vec![ValType::I64]));
        let f0 = m.push_function(
            t0,
            FuncBody {
                locals: vec![],
                instrs: vec![Instr::I32Const(11)],
            },
        );
        let f1 = m.push_function(
            t1,
            FuncBody {
                locals: vec![],
                instrs: vec![Instr::I64Const(13)],
            },
        );
        m.tables.push(TableType {
            limits: Limits { min: 3, max: None },
        });
        m.elems.push(ElemSegment {
            table: 0,
            offset: ConstExpr::I32(0),
            funcs: vec![f0, f1],
        });
        let entry_ty = m.find_or_add_type(FuncType::new(vec![ValType::I32], vec![ValType::I32]));
        let entry = m.push_function(
            entry_ty,
            FuncBody {
                locals: vec![],
                instrs: vec![Instr::LocalGet(0), Instr::CallIndirect(t0)],
            },
        );
        m.exports.push(Export {
            name: "f".into(),
            kind: ExportKind::Func,
            index: entry,
        });
        crate::analysis::validate_module(&m).unwrap();
        let mut inst = Instance::instantiate(&m, &StubSpec::default(), 1 << 20).unwrap();

        assert_eq!(
            inst.invoke("f", &[Value::I32(0)], 1 << 20).unwrap(),
            Outcome::Values(vec![Value::I32(11)])
        );
        assert_eq!(
            inst.invoke("f", &[Value::I32(1)], 1 << 20).unwrap(),
            Outcome::Trap(TrapKind::IndirectTypeMismatch)
        );
        assert_eq!(
            inst.invoke("f", &[Value::I32(2)], 1 << 20).unwrap(),
            Outcome::Trap(TrapKind::UninitializedElement)
        );
        assert_eq!(
            inst.invoke("f", &[Value::I32(50)], 1 << 20).unwrap(),
            Outcome::Trap(TrapKind::UndefinedElement)
        );
    }

    #[test]
    fn fuel_exhaustion_reported() {
        let body = vec![Instr::Loop(None, vec![Instr::Br(0)])];
        let out = run(vec![], vec![], body, &[]);
        assert_eq!(out, Outcome::FuelExhausted);
    }

    #[test]
    fn capture_stub_records_arguments() {
        let mut m = Module::default();
        let emit_ty = m.find_or_add_type(FuncType::new(vec![ValType::I32], vec![]));
        m.imports.push(Import {
            module: "env".into(),
            name: "emit".into(),
            desc: ImportDesc::Func(emit_ty),
        });
        let ty = m.find_or_add_type(FuncType::new(vec![ValType::I32], vec![]));
        let f = m.push_function(
            ty,
            FuncBody {
                locals: vec![],
                instrs: vec![
                    Instr::LocalGet(0),
                    Instr::Call(0),
                    Instr::LocalGet(0),
                    Instr::I32Const(2),
                    Instr::I32Mul,
                    Instr::Call(0),
                ],
            },
        );
        m.exports.push(Export {
            name: "f".into(),
            kind: ExportKind::Func,
            index: f,
        });
        crate::analysis::validate_module(&m).unwrap();
        let mut inst = Instance::instantiate(&m, &StubSpec::capturing(), 1 << 20).unwrap();
        inst.invoke("f", &[Value::I32(21)], 1 << 20).unwrap();
        assert_eq!(inst.output(), &[Value::I32(21), Value::I32(42)]);
    }

    #[test]
    fn memory_grow_and_size() {
        let mut m = Module::default();
        m.memories.push(MemoryType {
            limits: Limits {
                min: 1,
                max: Some(3),
            },
        });
        let ty = m.find_or_add_type(FuncType::new(vec![], vec![ValType::I32]));
        let f = m.push_function(
            ty,
            FuncBody {
                locals: vec![],
                instrs: vec![
                    Instr::I32Const(1),
                    Instr::MemoryGrow,
                    Instr::Drop,
                    Instr::I32Const(5),
                    Instr::MemoryGrow, // beyond max: -1
                    Instr::Drop,
                    Instr::MemorySize,
                ],
            },
        );
        m.exports.push(Export {
            name: "f".into(),
            kind: ExportKind::Func,
            index: f,
        });
        let mut inst = Instance::instantiate(&m, &StubSpec::default(), 1 << 20).unwrap();
        let out = inst.invoke("f", &[], 1 << 20).unwrap();
        assert_eq!(out, Outcome::Values(vec![Value::I32(2)]));
    }

    #[test]
    fn snapshot_restore_resets_state() {
        let mut m = Module::default();
        m.memories.push(MemoryType {
            limits: Limits { min: 1, max: None },
        });
        let ty = m.find_or_add_type(FuncType::new(vec![], vec![ValType::I32]));
        let f = m.push_function(
            ty,
            FuncBody {
                locals: vec![],
                instrs: vec![
                    Instr::I32Const(0),
                    Instr::I32Const(0),
                    Instr::I32Load(MemArg::offset(0)),
                    Instr::I32Const(1),
                    Instr::I32Add,
                    Instr::I32Store(MemArg::offset(0)),
                    Instr::I32Const(0),
                    Instr::I32Load(MemArg::offset(0)),
                ],
            },
        );
        m.exports.push(Export {
            name: "f".into(),
            kind: ExportKind::Func,
            index: f,
        });
        let mut inst = Instance::instantiate(&m, &StubSpec::default(), 1 << 20).unwrap();
        let snap = inst.snapshot();
        assert_eq!(
            inst.invoke("f", &[], 1 << 20).unwrap(),
            Outcome::Values(vec![Value::I32(1)])
        );
        assert_eq!(
            inst.invoke("f", &[], 1 << 20).unwrap(),
            Outcome::Values(vec![Value::I32(2)])
        );
        inst.restore(&snap);
        assert_eq!(
            inst.invoke("f", &[], 1 << 20).unwrap(),
            Outcome::Values(vec![Value::I32(1)])
        );
    }

    #[test]
    fn nan_semantic_equality() {
        let a = Value::F32(f32::NAN.to_bits());
        let b = Value::F32(f32::NAN.to_bits() | 1);
        assert!(a.semantic_eq(&b));
        assert!(!Value::F32(1.0f32.to_bits()).semantic_eq(&Value::F32(2.0f32.to_bits())));
    }
}
