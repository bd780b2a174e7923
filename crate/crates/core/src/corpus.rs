//! Generated fixture modules used by the test suites, plus a randomized
//! well-typed module generator for codec round-trip testing.
//!
//! Every fixture exports one entry function with deterministic behavior per
//! input vector (values, traps, and `env.emit` output), covering arithmetic,
//! control flow, calls, tables, memory, globals, and the name section.

use crate::binfmt::instr::{Instr, MemArg};
use crate::binfmt::module::*;
use crate::binfmt::names::{encode_name_section, NameData, NameEntry};
use rand::Rng;

/// A corpus entry: a module plus the export name of its entry function.
#[derive(Debug, Clone)]
pub struct Fixture {
    pub name: &'static str,
    pub module: Module,
    pub entry: &'static str,
}

fn add_func(
    m: &mut Module,
    params: Vec<ValType>,
    results: Vec<ValType>,
    locals: Vec<ValType>,
    instrs: Vec<Instr>,
) -> u32 {
    let ty = m.find_or_add_type(FuncType::new(params, results));
    m.push_function(ty, FuncBody { locals, instrs })
}

fn export_func(m: &mut Module, name: &str, index: u32) {
    m.exports.push(Export {
        name: name.to_string(),
        kind: ExportKind::Func,
        index,
    });
}

fn add_memory(m: &mut Module, min: u32, max: Option<u32>) {
    m.memories.push(MemoryType {
        limits: Limits { min, max },
    });
}

use Instr::*;
use ValType::{F64, I32, I64};

fn fx_add() -> Module {
    let mut m = Module::default();
    let f = add_func(
        &mut m,
        vec![I32, I32],
        vec![I32],
        vec![],
        vec![LocalGet(0), LocalGet(1), I32Add],
    );
    export_func(&mut m, "add", f);
    m
}

fn fx_arith_chain() -> Module {
    let mut m = Module::default();
    let f = add_func(
        &mut m,
        vec![I32, I32],
        vec![I32],
        vec![],
        vec![
            LocalGet(0),
            I32Const(17),
            I32Mul,
            LocalGet(1),
            I32Const(31),
            I32Mul,
            I32Add,
            I32Const(0x5bd1_e995u32 as i32),
            I32Xor,
            LocalGet(0),
            I32Const(5),
            I32Rotl,
            I32Add,
            LocalGet(1),
            I32Const(3),
            I32ShrU,
            I32Sub,
            I32Const(0x27d4_eb2f),
            I32Mul,
            LocalGet(0),
            I32Xor,
            I32Const(11),
            I32Rotr,
            LocalGet(1),
            I32Add,
            I32Const(7),
            I32Or,
            LocalGet(0),
            I32Popcnt,
            I32Add,
        ],
    );
    export_func(&mut m, "scramble", f);
    m
}

fn fx_i64_mix() -> Module {
    let mut m = Module::default();
    let f = add_func(
        &mut m,
        vec![I64, I64],
        vec![I64],
        vec![],
        vec![
            LocalGet(0),
            LocalGet(1),
            I64Mul,
            LocalGet(0),
            I64Add,
            LocalGet(1),
            I64Xor,
            I64Const(0x9E37_79B9_7F4A_7C15u64 as i64),
            I64Add,
            LocalGet(0),
            I64Rotl,
            I64Popcnt,
            LocalGet(1),
            I64Const(13),
            I64ShrU,
            I64Sub,
        ],
    );
    export_func(&mut m, "mix64", f);
    m
}

fn fx_float_mix() -> Module {
    let mut m = Module::default();
    let f = add_func(
        &mut m,
        vec![F64, F64],
        vec![F64],
        vec![],
        vec![
            LocalGet(0),
            LocalGet(1),
            F64Add,
            LocalGet(0),
            F64Mul,
            F64Abs,
            F64Sqrt,
            LocalGet(1),
            F64Min,
            LocalGet(0),
            F64Copysign,
            LocalGet(1),
            F64Max,
            F64Const(2.5f64.to_bits()),
            F64Div,
            F64Nearest,
        ],
    );
    export_func(&mut m, "blend", f);
    m
}

fn fx_float_trunc() -> Module {
    let mut m = Module::default();
    let f = add_func(
        &mut m,
        vec![F64],
        vec![I32],
        vec![],
        vec![LocalGet(0), I32TruncF64S],
    );
    export_func(&mut m, "to_int", f);
    m
}

fn fx_abs_if() -> Module {
    let mut m = Module::default();
    let f = add_func(
        &mut m,
        vec![I32],
        vec![I32],
        vec![],
        vec![
            LocalGet(0),
            I32Const(0),
            I32LtS,
            If(
                Some(I32),
                vec![I32Const(0), LocalGet(0), I32Sub],
                vec![LocalGet(0)],
            ),
        ],
    );
    export_func(&mut m, "abs", f);
    m
}

fn fx_clamp_br() -> Module {
    let mut m = Module::default();
    let f = add_func(
        &mut m,
        vec![I32],
        vec![I32],
        vec![],
        vec![Block(
            Some(I32),
            vec![
                I32Const(0),
                LocalGet(0),
                I32Const(0),
                I32LeS,
                BrIf(0),
                Drop,
                I32Const(100),
                LocalGet(0),
                I32Const(100),
                I32GeS,
                BrIf(0),
                Drop,
                LocalGet(0),
            ],
        )],
    );
    export_func(&mut m, "clamp", f);
    m
}

fn fx_fact_loop() -> Module {
    let mut m = Module::default();
    let f = add_func(
        &mut m,
        vec![I32],
        vec![I32],
        vec![I32, I32], // n, acc
        vec![
            LocalGet(0),
            I32Const(7),
            I32And,
            LocalSet(1),
            I32Const(1),
            LocalSet(2),
            Block(
                None,
                vec![Loop(
                    None,
                    vec![
                        LocalGet(1),
                        I32Eqz,
                        BrIf(1),
                        LocalGet(2),
                        LocalGet(1),
                        I32Mul,
                        LocalSet(2),
                        LocalGet(1),
                        I32Const(1),
                        I32Sub,
                        LocalSet(1),
                        Br(0),
                    ],
                )],
            ),
            LocalGet(2),
        ],
    );
    export_func(&mut m, "fact", f);
    m
}

fn fx_fib_rec() -> Module {
    let mut m = Module::default();
    let fib = add_func(
        &mut m,
        vec![I32],
        vec![I32],
        vec![],
        vec![
            LocalGet(0),
            I32Const(2),
            I32LtS,
            If(
                Some(I32),
                vec![LocalGet(0)],
                vec![
                    LocalGet(0),
                    I32Const(1),
                    I32Sub,
                    Call(0),
                    LocalGet(0),
                    I32Const(2),
                    I32Sub,
                    Call(0),
                    I32Add,
                ],
            ),
        ],
    );
    let entry = add_func(
        &mut m,
        vec![I32],
        vec![I32],
        vec![],
        vec![LocalGet(0), I32Const(15), I32And, Call(fib)],
    );
    export_func(&mut m, "fib", entry);
    m
}

/// Exactly 20 direct call sites (all in the entry function) over 5 distinct
/// leaf callees.
fn fx_calls20() -> Module {
    let mut m = Module::default();
    let leaf_ops = [I32Add, I32Sub, I32Mul, I32Xor, I32Or];
    let mut leaves = Vec::new();
    for op in leaf_ops {
        leaves.push(add_func(
            &mut m,
            vec![I32, I32],
            vec![I32],
            vec![],
            vec![LocalGet(0), LocalGet(1), op.clone()],
        ));
    }
    let mut body = vec![LocalGet(0), LocalGet(1), Call(leaves[0])];
    for i in 1..20u32 {
        body.push(LocalGet(i % 2));
        body.push(Call(leaves[(i % 5) as usize]));
    }
    let entry = add_func(&mut m, vec![I32, I32], vec![I32], vec![], body);
    export_func(&mut m, "chain", entry);
    m
}

fn fx_mem_rw() -> Module {
    let mut m = Module::default();
    add_memory(&mut m, 1, Some(1));
    let f = add_func(
        &mut m,
        vec![I32, I32],
        vec![I32],
        vec![],
        vec![
            // stores of every width
            I32Const(16),
            LocalGet(0),
            I32Store(MemArg::offset(0)),
            I32Const(20),
            LocalGet(1),
            I32Store8(MemArg::offset(0)),
            I32Const(24),
            LocalGet(0),
            I32Store16(MemArg::offset(2)),
            I32Const(32),
            LocalGet(0),
            I64ExtendI32S,
            I64Store(MemArg::offset(0)),
            I32Const(40),
            LocalGet(1),
            I64ExtendI32U,
            I64Store32(MemArg::offset(4)),
            I32Const(0),
            LocalGet(0),
            F32ReinterpretI32,
            F32Store(MemArg::offset(48)),
            I32Const(0),
            LocalGet(1),
            I64ExtendI32U,
            F64ReinterpretI64,
            F64Store(MemArg::offset(56)),
            // loads back, combined
            I32Const(16),
            I32Load(MemArg::offset(0)),
            I32Const(20),
            I32Load8U(MemArg::offset(0)),
            I32Add,
            I32Const(20),
            I32Load8S(MemArg::offset(0)),
            I32Add,
            I32Const(24),
            I32Load16U(MemArg::offset(2)),
            I32Add,
            I32Const(24),
            I32Load16S(MemArg::offset(2)),
            I32Xor,
            I32Const(32),
            I64Load(MemArg::offset(0)),
            I32WrapI64,
            I32Add,
            I32Const(40),
            I64Load32U(MemArg::offset(4)),
            I32WrapI64,
            I32Add,
            I32Const(40),
            I64Load32S(MemArg::offset(4)),
            I32WrapI64,
            I32Sub,
            I32Const(0),
            F32Load(MemArg::offset(48)),
            I32ReinterpretF32,
            I32Add,
            I32Const(0),
            F64Load(MemArg::offset(56)),
            I64ReinterpretF64,
            I32WrapI64,
            I32Xor,
            I32Const(32),
            I64Load8U(MemArg::offset(3)),
            I32WrapI64,
            I32Add,
            I32Const(32),
            I64Load16S(MemArg::offset(2)),
            I32WrapI64,
            I32Add,
        ],
    );
    export_func(&mut m, "mem_rw", f);
    m
}

/// The plaintext of the `data_hash` fixture segment (32 bytes).
pub const HASH_TEXT: &[u8; 32] = b"Obfuscation keeps secrets safe!!";

fn fx_data_hash() -> Module {
    let mut m = Module::default();
    add_memory(&mut m, 1, Some(1));
    m.data.push(DataSegment {
        memory: 0,
        offset: ConstExpr::I32(1024),
        bytes: HASH_TEXT.to_vec(),
    });
    let f = add_func(
        &mut m,
        vec![I32],
        vec![I32],
        vec![I32, I32], // i, h
        vec![
            LocalGet(0),
            LocalSet(2),
            Block(
                None,
                vec![Loop(
                    None,
                    vec![
                        LocalGet(1),
                        I32Const(32),
                        I32GeU,
                        BrIf(1),
                        LocalGet(2),
                        I32Const(33),
                        I32Mul,
                        LocalGet(1),
                        I32Load8U(MemArg {
                            align: 0,
                            offset: 1024,
                        }),
                        I32Add,
                        LocalSet(2),
                        LocalGet(1),
                        I32Const(1),
                        I32Add,
                        LocalSet(1),
                        Br(0),
                    ],
                )],
            ),
            LocalGet(2),
        ],
    );
    export_func(&mut m, "hash", f);
    m
}

/// Reads from regions never written by any data segment; relies on
/// zero-initialized memory.
fn fx_zero_read() -> Module {
    let mut m = Module::default();
    add_memory(&mut m, 1, Some(1));
    m.data.push(DataSegment {
        memory: 0,
        offset: ConstExpr::I32(0),
        bytes: vec![1, 2, 3, 4, 5, 6, 7, 8],
    });
    let f = add_func(
        &mut m,
        vec![I32],
        vec![I32],
        vec![],
        vec![
            I32Const(0),
            I64Load(MemArg::offset(0)),
            I32WrapI64,
            LocalGet(0),
            I32Add,
            LocalGet(0),
            I32Const(1023),
            I32And,
            I32Load(MemArg {
                align: 0,
                offset: 2048,
            }),
            I32Add,
            I32Const(4000),
            I32Load8U(MemArg::offset(0)),
            I32Add,
            I32Const(60000),
            I32Load16U(MemArg::offset(0)),
            I32Add,
        ],
    );
    export_func(&mut m, "zeroes", f);
    m
}

fn fx_grow_rw() -> Module {
    let mut m = Module::default();
    add_memory(&mut m, 1, Some(4));
    let f = add_func(
        &mut m,
        vec![I32],
        vec![I32],
        vec![I32], // old page count
        vec![
            I32Const(1),
            MemoryGrow,
            LocalSet(1),
            I32Const(65540),
            LocalGet(0),
            I32Store(MemArg::offset(0)),
            I32Const(65540),
            I32Load(MemArg::offset(0)),
            MemorySize,
            I32Add,
            LocalGet(1),
            I32Add,
            I32Const(10),
            MemoryGrow, // beyond max: -1
            I32Add,
            I32Const(70000),
            I32Load(MemArg::offset(0)), // in grown page: zero-filled
            I32Add,
        ],
    );
    export_func(&mut m, "grow", f);
    m
}

/// Traps with out-of-bounds access for most inputs.
fn fx_oob_trap() -> Module {
    let mut m = Module::default();
    add_memory(&mut m, 1, Some(1));
    let f = add_func(
        &mut m,
        vec![I32],
        vec![I32],
        vec![],
        vec![LocalGet(0), I32Load(MemArg::offset(0))],
    );
    export_func(&mut m, "peek", f);
    m
}

fn fx_div_trap() -> Module {
    let mut m = Module::default();
    let f = add_func(
        &mut m,
        vec![I32, I32],
        vec![I32],
        vec![],
        vec![LocalGet(0), LocalGet(1), I32DivS],
    );
    export_func(&mut m, "div", f);
    m
}

/// A pre-existing table: selectors hit valid entries, a wrong-typed entry,
/// uninitialized slots, and out-of-range indices.
fn fx_indirect() -> Module {
    let mut m = Module::default();
    let t_unary = m.find_or_add_type(FuncType::new(vec![I32], vec![I32]));
    let f0 = add_func(
        &mut m,
        vec![I32],
        vec![I32],
        vec![],
        vec![LocalGet(0), I32Const(3), I32Mul],
    );
    let f1 = add_func(
        &mut m,
        vec![I32],
        vec![I32],
        vec![],
        vec![LocalGet(0), I32Const(7), I32Add],
    );
    let f2 = add_func(
        &mut m,
        vec![I32],
        vec![I32],
        vec![],
        vec![LocalGet(0), I32Const(2), I32Shl],
    );
    let f3 = add_func(&mut m, vec![], vec![I64], vec![], vec![I64Const(9)]);
    m.tables.push(TableType {
        limits: Limits {
            min: 6,
            max: Some(16),
        },
    });
    m.elems.push(ElemSegment {
        table: 0,
        offset: ConstExpr::I32(0),
        funcs: vec![f0, f1, f2, f3],
    });
    let entry = add_func(
        &mut m,
        vec![I32, I32],
        vec![I32],
        vec![],
        vec![
            LocalGet(1),
            LocalGet(0),
            I32Const(7),
            I32And,
            CallIndirect(t_unary),
        ],
    );
    export_func(&mut m, "dispatch", entry);
    m
}

fn fx_globals() -> Module {
    let mut m = Module::default();
    m.globals.push(Global {
        ty: GlobalType {
            ty: I32,
            mutable: true,
        },
        init: ConstExpr::I32(7),
    });
    m.globals.push(Global {
        ty: GlobalType {
            ty: I32,
            mutable: false,
        },
        init: ConstExpr::I32(100),
    });
    m.globals.push(Global {
        ty: GlobalType {
            ty: I64,
            mutable: true,
        },
        init: ConstExpr::I64(0x0F0F_0F0F),
    });
    let f = add_func(
        &mut m,
        vec![I32],
        vec![I32],
        vec![],
        vec![
            GlobalGet(0),
            LocalGet(0),
            I32Add,
            GlobalSet(0),
            GlobalGet(2),
            GlobalGet(0),
            I64ExtendI32S,
            I64Xor,
            GlobalSet(2),
            GlobalGet(0),
            GlobalGet(1),
            I32Mul,
            GlobalGet(2),
            I32WrapI64,
            I32Add,
        ],
    );
    export_func(&mut m, "tally", f);
    m
}

fn fx_named_funcs() -> Module {
    let mut m = Module::default();
    let alpha = add_func(
        &mut m,
        vec![I32],
        vec![I32],
        vec![],
        vec![LocalGet(0), I32Const(1), I32Add],
    );
    let beta = add_func(
        &mut m,
        vec![I32],
        vec![I32],
        vec![],
        vec![LocalGet(0), Call(alpha), LocalGet(0), I32Mul],
    );
    let run = add_func(
        &mut m,
        vec![I32],
        vec![I32],
        vec![],
        vec![LocalGet(0), Call(beta), LocalGet(0), Call(alpha), I32Add],
    );
    export_func(&mut m, "run", run);
    export_func(&mut m, "beta_entry", beta);

    let nd = NameData {
        // module-name subsection: "fix"
        prefix: vec![0x00, 0x04, 0x03, b'f', b'i', b'x'],
        func_names: Some(vec![
            NameEntry {
                idx: alpha,
                name: b"alpha".to_vec(),
            },
            NameEntry {
                idx: beta,
                name: b"beta_function".to_vec(),
            },
            NameEntry {
                idx: run,
                name: b"gamma".to_vec(),
            },
        ]),
        suffix: vec![],
    };
    attach_name_section(&mut m, &nd);
    m
}

fn fx_select_drop() -> Module {
    let mut m = Module::default();
    let f = add_func(
        &mut m,
        vec![I32, I32],
        vec![I32],
        vec![],
        vec![
            LocalGet(0),
            LocalGet(1),
            LocalGet(0),
            LocalGet(1),
            I32LtU,
            Select,
            I32Const(7),
            Drop,
            LocalGet(0),
            LocalGet(1),
            I32GtS,
            If(None, vec![Nop], vec![]),
        ],
    );
    export_func(&mut m, "min_u", f);
    m
}

fn fx_br_table() -> Module {
    let mut m = Module::default();
    let f = add_func(
        &mut m,
        vec![I32],
        vec![I32],
        vec![],
        vec![
            Block(
                None,
                vec![
                    Block(
                        None,
                        vec![
                            Block(
                                None,
                                vec![
                                    Block(
                                        None,
                                        vec![
                                            LocalGet(0),
                                            I32Const(3),
                                            I32And,
                                            BrTable {
                                                targets: vec![0, 1, 2],
                                                default: 3,
                                            },
                                        ],
                                    ),
                                    I32Const(10),
                                    LocalGet(0),
                                    I32Add,
                                    Return,
                                ],
                            ),
                            I32Const(20),
                            LocalGet(0),
                            I32Mul,
                            Return,
                        ],
                    ),
                    I32Const(30),
                    LocalGet(0),
                    I32Sub,
                    Return,
                ],
            ),
            I32Const(40),
            LocalGet(0),
            I32Xor,
        ],
    );
    export_func(&mut m, "route", f);
    m
}

fn fx_start_mem() -> Module {
    let mut m = Module::default();
    add_memory(&mut m, 1, Some(1));
    let start = add_func(
        &mut m,
        vec![],
        vec![],
        vec![],
        vec![
            I32Const(0),
            I32Const(0x00C0_FFEE),
            I32Store(MemArg::offset(0)),
            I32Const(8),
            I32Const(0x1234),
            I32Store16(MemArg::offset(0)),
        ],
    );
    m.start = Some(start);
    let f = add_func(
        &mut m,
        vec![I32],
        vec![I32],
        vec![],
        vec![
            I32Const(0),
            I32Load(MemArg::offset(0)),
            LocalGet(0),
            I32Add,
            I32Const(8),
            I32Load16U(MemArg::offset(0)),
            I32Add,
        ],
    );
    export_func(&mut m, "boot", f);
    m
}

/// Calls the capture stub `env.emit` once per loop iteration.
fn fx_emit_stream() -> Module {
    let mut m = Module::default();
    let emit_ty = m.find_or_add_type(FuncType::new(vec![I32], vec![]));
    m.imports.push(Import {
        module: "env".into(),
        name: "emit".into(),
        desc: ImportDesc::Func(emit_ty),
    });
    let f = add_func(
        &mut m,
        vec![I32],
        vec![],
        vec![I32],
        vec![
            Block(
                None,
                vec![Loop(
                    None,
                    vec![
                        LocalGet(1),
                        LocalGet(0),
                        I32Const(7),
                        I32And,
                        I32GeU,
                        BrIf(1),
                        LocalGet(1),
                        LocalGet(0),
                        I32Mul,
                        Call(0),
                        LocalGet(1),
                        I32Const(1),
                        I32Add,
                        LocalSet(1),
                        Br(0),
                    ],
                )],
            ),
            LocalGet(0),
            I32Const(0x55),
            I32Xor,
            Call(0),
        ],
    );
    export_func(&mut m, "stream", f);
    m
}

fn fx_divmix() -> Module {
    let mut m = Module::default();
    let f = add_func(
        &mut m,
        vec![I64, I64],
        vec![I64],
        vec![],
        vec![
            LocalGet(0),
            LocalGet(1),
            I64Const(1),
            I64Or,
            I64DivS,
            LocalGet(0),
            LocalGet(1),
            I64Const(1),
            I64Or,
            I64RemU,
            I64Add,
            LocalGet(1),
            I64Const(63),
            I64And,
            I64Shl,
        ],
    );
    export_func(&mut m, "divmix", f);
    m
}

fn fx_f32_ops() -> Module {
    let mut m = Module::default();
    let f = add_func(
        &mut m,
        vec![I32],
        vec![ValType::F32],
        vec![],
        vec![
            LocalGet(0),
            F32ConvertI32S,
            LocalGet(0),
            F32ConvertI32U,
            F32Sub,
            LocalGet(0),
            F32ReinterpretI32,
            F32Min,
            F32Floor,
            F32Const(1.5f32.to_bits()),
            F32Add,
            F32Trunc,
            F32Neg,
        ],
    );
    export_func(&mut m, "f32ops", f);
    m
}

/// Attaches (or replaces) the `name` custom section, anchored after the last
/// present non-custom section.
pub fn attach_name_section(m: &mut Module, nd: &NameData) {
    let after = last_section_id(m);
    let data = encode_name_section(nd);
    if let Some(c) = m.custom_mut("name") {
        c.data = data;
    } else {
        m.customs.push(CustomSection {
            name: "name".into(),
            data,
            after,
        });
    }
}

fn last_section_id(m: &Module) -> u8 {
    if !m.data.is_empty() {
        11
    } else if !m.code.is_empty() {
        10
    } else if !m.elems.is_empty() {
        9
    } else if !m.exports.is_empty() {
        7
    } else if !m.types.is_empty() {
        1
    } else {
        0
    }
}

/// The full fixture corpus.
pub fn fixtures() -> Vec<Fixture> {
    let make = |name, module, entry| Fixture {
        name,
        module,
        entry,
    };
    vec![
        make("add", fx_add(), "add"),
        make("arith_chain", fx_arith_chain(), "scramble"),
        make("i64_mix", fx_i64_mix(), "mix64"),
        make("float_mix", fx_float_mix(), "blend"),
        make("float_trunc", fx_float_trunc(), "to_int"),
        make("abs_if", fx_abs_if(), "abs"),
        make("clamp_br", fx_clamp_br(), "clamp"),
        make("fact_loop", fx_fact_loop(), "fact"),
        make("fib_rec", fx_fib_rec(), "fib"),
        make("calls20", fx_calls20(), "chain"),
        make("mem_rw", fx_mem_rw(), "mem_rw"),
        make("data_hash", fx_data_hash(), "hash"),
        make("zero_read", fx_zero_read(), "zeroes"),
        make("grow_rw", fx_grow_rw(), "grow"),
        make("oob_trap", fx_oob_trap(), "peek"),
        make("div_trap", fx_div_trap(), "div"),
        make("indirect", fx_indirect(), "dispatch"),
        make("globals", fx_globals(), "tally"),
        make("named_funcs", fx_named_funcs(), "run"),
        make("select_drop", fx_select_drop(), "min_u"),
        make("br_table", fx_br_table(), "route"),
        make("start_mem", fx_start_mem(), "boot"),
        make("emit_stream", fx_emit_stream(), "stream"),
        make("divmix", fx_divmix(), "divmix"),
        make("f32_ops", fx_f32_ops(), "f32ops"),
    ]
}

/// Looks up a fixture by name.
pub fn fixture(name: &str) -> Fixture {
    fixtures()
        .into_iter()
        .find(|f| f.name == name)
        .unwrap_or_else(|| panic!("no fixture named {name:?}"))
}

// ---------------------------------------------------------------------------
// Randomized module generation (codec round-trip testing)
// ---------------------------------------------------------------------------

/// Generates a random valid module: well-typed straight-line bodies over a
/// safe instruction palette, random sections, and random custom sections.
pub fn random_module(rng: &mut impl Rng) -> Module {
    let mut m = Module::default();

    let n_types = rng.random_range(1..4usize);
    for _ in 0..n_types {
        let params = (0..rng.random_range(0..4usize))
            .map(|_| random_valtype(rng))
            .collect();
        let results = if rng.random_bool(0.7) {
            vec![random_valtype(rng)]
        } else {
            vec![]
        };
        let ft = FuncType::new(params, results);
        if !m.types.contains(&ft) {
            m.types.push(ft);
        }
    }

    if rng.random_bool(0.3) {
        let ty = rng.random_range(0..m.types.len()) as u32;
        m.imports.push(Import {
            module: "env".into(),
            name: format!("imp{}", rng.random_range(0..100)),
            desc: ImportDesc::Func(ty),
        });
    }

    let has_memory = rng.random_bool(0.5);
    if has_memory {
        let min = rng.random_range(1..3u32);
        add_memory(
            &mut m,
            min,
            if rng.random_bool(0.5) {
                Some(min + 2)
            } else {
                None
            },
        );
    }

    for _ in 0..rng.random_range(0..3usize) {
        let ty = random_valtype(rng);
        m.globals.push(Global {
            ty: GlobalType {
                ty,
                mutable: rng.random_bool(0.5),
            },
            init: random_const(rng, ty),
        });
    }

    let n_funcs = rng.random_range(0..6usize);
    for _ in 0..n_funcs {
        let ty_idx = rng.random_range(0..m.types.len()) as u32;
        let ty = m.types[ty_idx as usize].clone();
        let locals: Vec<ValType> = (0..rng.random_range(0..4usize))
            .map(|_| random_valtype(rng))
            .collect();
        let body = random_body(rng, &ty, &locals, has_memory);
        m.push_function(
            ty_idx,
            FuncBody {
                locals,
                instrs: body,
            },
        );
    }

    if rng.random_bool(0.4) && m.num_funcs() > 0 {
        let count = rng.random_range(1..4usize).min(m.num_funcs() as usize);
        m.tables.push(TableType {
            limits: Limits {
                min: count as u32 + 2,
                max: None,
            },
        });
        m.elems.push(ElemSegment {
            table: 0,
            offset: ConstExpr::I32(rng.random_range(0..2)),
            funcs: (0..count)
                .map(|_| rng.random_range(0..m.num_funcs()))
                .collect(),
        });
    }

    if has_memory {
        for _ in 0..rng.random_range(0..3usize) {
            let len = rng.random_range(0..40usize);
            m.data.push(DataSegment {
                memory: 0,
                offset: ConstExpr::I32(rng.random_range(0..1000)),
                bytes: (0..len).map(|_| rng.random()).collect(),
            });
        }
    }

    for i in 0..rng.random_range(0..3u32) {
        if m.num_funcs() > 0 {
            m.exports.push(Export {
                name: format!("x{i}"),
                kind: ExportKind::Func,
                index: rng.random_range(0..m.num_funcs()),
            });
        }
    }

    for i in 0..rng.random_range(0..3u32) {
        let len = rng.random_range(0..25usize);
        m.customs.push(CustomSection {
            name: format!("custom{i}"),
            data: (0..len).map(|_| rng.random()).collect(),
            after: random_present_anchor(rng, &m),
        });
    }
    // Keep the customs list in file order, as decode produces it.
    m.customs.sort_by_key(|c| c.after);

    m
}

fn random_valtype(rng: &mut impl Rng) -> ValType {
    match rng.random_range(0..4u8) {
        0 => ValType::I32,
        1 => ValType::I64,
        2 => ValType::F32,
        _ => ValType::F64,
    }
}

fn random_const(rng: &mut impl Rng, ty: ValType) -> ConstExpr {
    match ty {
        ValType::I32 => ConstExpr::I32(rng.random()),
        ValType::I64 => ConstExpr::I64(rng.random()),
        ValType::F32 => ConstExpr::F32(rng.random()),
        ValType::F64 => ConstExpr::F64(rng.random()),
    }
}

fn random_const_instr(rng: &mut impl Rng, ty: ValType) -> Instr {
    match ty {
        ValType::I32 => I32Const(rng.random()),
        ValType::I64 => I64Const(rng.random()),
        ValType::F32 => F32Const(rng.random()),
        ValType::F64 => F64Const(rng.random()),
    }
}

/// Anchors must point at sections that will actually be emitted, otherwise
/// decode records a different anchor and round-tripping fails.
fn random_present_anchor(rng: &mut impl Rng, m: &Module) -> u8 {
    let mut present = vec![0u8];
    if !m.types.is_empty() {
        present.push(1);
    }
    if !m.imports.is_empty() {
        present.push(2);
    }
    if !m.functions.is_empty() {
        present.push(3);
    }
    if !m.tables.is_empty() {
        present.push(4);
    }
    if !m.memories.is_empty() {
        present.push(5);
    }
    if !m.globals.is_empty() {
        present.push(6);
    }
    if !m.exports.is_empty() {
        present.push(7);
    }
    if !m.elems.is_empty() {
        present.push(9);
    }
    if !m.code.is_empty() {
        present.push(10);
    }
    if !m.data.is_empty() {
        present.push(11);
    }
    present[rng.random_range(0..present.len())]
}

/// Builds a well-typed straight-line body by tracking the type stack.
fn random_body(
    rng: &mut impl Rng,
    ty: &FuncType,
    locals: &[ValType],
    has_memory: bool,
) -> Vec<Instr> {
    let mut all_locals = ty.params.clone();
    all_locals.extend_from_slice(locals);
    let mut stack: Vec<ValType> = Vec::new();
    let mut body = Vec::new();

    for _ in 0..rng.random_range(0..30usize) {
        let choice = rng.random_range(0..10u8);
        match choice {
            0..=2 => {
                let t = random_valtype(rng);
                body.push(random_const_instr(rng, t));
                stack.push(t);
            }
            3 if !all_locals.is_empty() => {
                let idx = rng.random_range(0..all_locals.len());
                body.push(LocalGet(idx as u32));
                stack.push(all_locals[idx]);
            }
            4 if stack.len() >= 2 && stack[stack.len() - 1] == stack[stack.len() - 2] => {
                let t = stack.pop().unwrap();
                body.push(match t {
                    ValType::I32 => [I32Add, I32Sub, I32Mul, I32Xor, I32And, I32Or, I32Rotl]
                        [rng.random_range(0..7)]
                    .clone(),
                    ValType::I64 => {
                        [I64Add, I64Sub, I64Mul, I64Xor][rng.random_range(0..4)].clone()
                    }
                    ValType::F32 => {
                        [F32Add, F32Sub, F32Mul, F32Div][rng.random_range(0..4)].clone()
                    }
                    ValType::F64 => {
                        [F64Add, F64Sub, F64Mul, F64Min][rng.random_range(0..4)].clone()
                    }
                });
            }
            5 if !stack.is_empty() => {
                body.push(Drop);
                stack.pop();
            }
            6 if !stack.is_empty() => {
                let t = *stack.last().unwrap();
                if let Some(idx) = all_locals.iter().position(|l| *l == t) {
                    if rng.random_bool(0.5) {
                        body.push(LocalSet(idx as u32));
                        stack.pop();
                    } else {
                        body.push(LocalTee(idx as u32));
                    }
                }
            }
            7 => {
                if rng.random_bool(0.5) {
                    let t = random_valtype(rng);
                    body.push(Block(Some(t), vec![random_const_instr(rng, t)]));
                    stack.push(t);
                } else {
                    body.push(I32Const(rng.random_range(0..2)));
                    body.push(If(None, vec![Nop], vec![Nop]));
                }
            }
            8 if has_memory && stack.last() == Some(&ValType::I32) => {
                body.push(I32Load8U(MemArg {
                    align: 0,
                    offset: rng.random_range(0..64),
                }));
            }
            9 if stack.last() == Some(&ValType::I64) => {
                body.push(I32WrapI64);
                stack.pop();
                stack.push(ValType::I32);
            }
            _ => {
                body.push(Nop);
            }
        }
    }

    // settle the stack to exactly the declared results
    for _ in 0..stack.len() {
        body.push(Drop);
    }
    for r in &ty.results {
        body.push(random_const_instr(rng, *r));
    }
    body
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::validate_module;
    use crate::binfmt::{decode_module, encode_module};
    use crate::interp::{Instance, Outcome, StubSpec, Value};
    use rand::SeedableRng;

    #[test]
    fn all_fixtures_validate() {
        for fx in fixtures() {
            if let Err(errs) = validate_module(&fx.module) {
                panic!("fixture {} invalid: {:?}", fx.name, errs);
            }
        }
    }

    #[test]
    fn all_fixtures_roundtrip() {
        for fx in fixtures() {
            let bytes = encode_module(&fx.module).unwrap();
            let back = decode_module(&bytes).unwrap();
            assert_eq!(back, fx.module, "fixture {}", fx.name);
            assert_eq!(encode_module(&back).unwrap(), bytes, "fixture {}", fx.name);
        }
    }

    #[test]
    fn fixture_entries_run() {
        for fx in fixtures() {
            let mut inst =
                Instance::instantiate(&fx.module, &StubSpec::capturing(), 1 << 24).unwrap();
            let ft = {
                let e = fx
                    .module
                    .exports
                    .iter()
                    .find(|e| e.name == fx.entry)
                    .unwrap_or_else(|| panic!("fixture {} has no entry export", fx.name));
                fx.module.func_type(e.index).unwrap().clone()
            };
            let args: Vec<Value> = ft.params.iter().map(|p| Value::zero(*p)).collect();
            let out = inst.invoke(fx.entry, &args, 1 << 24).unwrap();
            match out {
                Outcome::Values(_) | Outcome::Trap(_) => {}
                Outcome::FuelExhausted => panic!("fixture {} ran out of fuel", fx.name),
            }
        }
    }

    #[test]
    fn known_fixture_results() {
        let mut inst =
            Instance::instantiate(&fixture("add").module, &StubSpec::default(), 1 << 20).unwrap();
        assert_eq!(
            inst.invoke("add", &[Value::I32(2), Value::I32(3)], 1 << 20)
                .unwrap(),
            Outcome::Values(vec![Value::I32(5)])
        );

        // factorial of (10 & 7) = 2
        let mut inst =
            Instance::instantiate(&fixture("fact_loop").module, &StubSpec::default(), 1 << 20)
                .unwrap();
        assert_eq!(
            inst.invoke("fact", &[Value::I32(10)], 1 << 20).unwrap(),
            Outcome::Values(vec![Value::I32(2)])
        );

        // fib(7)
        let mut inst =
            Instance::instantiate(&fixture("fib_rec").module, &StubSpec::default(), 1 << 20)
                .unwrap();
        assert_eq!(
            inst.invoke("fib", &[Value::I32(7)], 1 << 20).unwrap(),
            Outcome::Values(vec![Value::I32(13)])
        );

        // start function wrote the magic words
        let mut inst =
            Instance::instantiate(&fixture("start_mem").module, &StubSpec::default(), 1 << 20)
                .unwrap();
        assert_eq!(
            inst.invoke("boot", &[Value::I32(1)], 1 << 20).unwrap(),
            Outcome::Values(vec![Value::I32(0x00C0_FFEE + 1 + 0x1234)])
        );

        // emit stream for x = 3: emits 0, 3, 6, then 3 ^ 0x55
        let m = fixture("emit_stream").module;
        let mut inst = Instance::instantiate(&m, &StubSpec::capturing(), 1 << 20).unwrap();
        inst.invoke("stream", &[Value::I32(3)], 1 << 20).unwrap();
        assert_eq!(
            inst.output(),
            &[
                Value::I32(0),
                Value::I32(3),
                Value::I32(6),
                Value::I32(3 ^ 0x55)
            ]
        );
    }

    #[test]
    fn corpus_is_large_enough() {
        assert!(fixtures().len() >= 20);
    }

    #[test]
    fn random_modules_validate_and_roundtrip() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(42);
        for i in 0..200 {
            let m = random_module(&mut rng);
            if let Err(errs) = validate_module(&m) {
                panic!("random module {i} invalid: {errs:?}");
            }
            let bytes = encode_module(&m).unwrap();
            let back = decode_module(&bytes).unwrap();
            assert_eq!(back, m, "random module {i}");
        }
    }
}

