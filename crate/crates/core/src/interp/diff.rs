//! Differential semantic testing between an original module and its
//! obfuscated form.

use super::{Instance, InstantiateError, Outcome, StubSpec, Value};
use crate::binfmt::module::{ExportKind, FuncType, Module, ValType};
use rand::Rng;

/// Result of comparing two modules over a set of input vectors.
#[derive(Debug, Clone, PartialEq)]
pub enum Verdict {
    Equal,
    Divergence { vector: usize, detail: String },
    Inconclusive { vector: usize, reason: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiffOutcome {
    pub verdict: Verdict,
    /// Total interpreter steps spent on the original module.
    pub steps_orig: u64,
    /// Total interpreter steps spent on the obfuscated module.
    pub steps_obf: u64,
}

/// Runs `entry` on both modules for every argument vector and compares
/// results, trap kinds, and captured output streams bit-exactly (NaNs
/// canonicalized).
///
/// `entry` is resolved by name against the original module's exports; the
/// obfuscated module is invoked through the export at the same position, so
/// renaming passes are transparent.
pub fn differential_check(
    orig: &Module,
    obf: &Module,
    entry: &str,
    vectors: &[Vec<Value>],
    stubs: &StubSpec,
    fuel: u64,
) -> DiffOutcome {
    let mut steps_orig = 0u64;
    let mut steps_obf = 0u64;
    let verdict = run_check(
        orig,
        obf,
        entry,
        vectors,
        stubs,
        fuel,
        &mut steps_orig,
        &mut steps_obf,
    );
    DiffOutcome {
        verdict,
        steps_orig,
        steps_obf,
    }
}

#[allow(clippy::too_many_arguments)]
fn run_check(
    orig: &Module,
    obf: &Module,
    entry: &str,
    vectors: &[Vec<Value>],
    stubs: &StubSpec,
    fuel: u64,
    steps_orig: &mut u64,
    steps_obf: &mut u64,
) -> Verdict {
    let Some(pos) = orig
        .exports
        .iter()
        .position(|e| e.name == entry && e.kind == ExportKind::Func)
    else {
        return Verdict::Inconclusive {
            vector: 0,
            reason: format!("no function export {entry:?} in original"),
        };
    };
    let func_orig = orig.exports[pos].index;
    let func_obf = match obf.exports.get(pos) {
        Some(e) if e.kind == ExportKind::Func => e.index,
        _ => {
            return Verdict::Divergence {
                vector: 0,
                detail: format!("export list shape changed at position {pos}"),
            }
        }
    };

    let inst_orig = Instance::instantiate(orig, stubs, fuel);
    let inst_obf = Instance::instantiate(obf, stubs, fuel);
    let (mut a, mut b) = match (inst_orig, inst_obf) {
        (Ok(a), Ok(b)) => (a, b),
        (Err(ea), Err(eb)) => {
            return if instantiate_errors_match(&ea, &eb) {
                Verdict::Equal
            } else {
                Verdict::Divergence {
                    vector: 0,
                    detail: format!("instantiation: original {ea}, obfuscated {eb}"),
                }
            };
        }
        (Err(e), Ok(_)) => {
            return Verdict::Divergence {
                vector: 0,
                detail: format!("only original failed to instantiate: {e}"),
            }
        }
        (Ok(_), Err(e)) => {
            return Verdict::Divergence {
                vector: 0,
                detail: format!("only obfuscated failed to instantiate: {e}"),
            }
        }
    };
    *steps_orig += a.last_steps();
    *steps_obf += b.last_steps();

    if !streams_equal(a.output(), b.output()) {
        return Verdict::Divergence {
            vector: 0,
            detail: "start-function output streams differ".to_string(),
        };
    }

    let snap_a = a.snapshot();
    let snap_b = b.snapshot();
    let base_out = a.output().len();

    for (v, args) in vectors.iter().enumerate() {
        a.restore(&snap_a);
        b.restore(&snap_b);
        let ra = a.invoke_index(func_orig, args, fuel);
        let rb = b.invoke_index(func_obf, args, fuel);
        *steps_orig += a.last_steps();
        *steps_obf += b.last_steps();
        let (ra, rb) = match (ra, rb) {
            (Ok(x), Ok(y)) => (x, y),
            (ea, eb) => {
                return Verdict::Divergence {
                    vector: v,
                    detail: format!("invoke errors: {ea:?} vs {eb:?}"),
                }
            }
        };
        match (&ra, &rb) {
            (Outcome::FuelExhausted, _) | (_, Outcome::FuelExhausted) => {
                return Verdict::Inconclusive {
                    vector: v,
                    reason: "fuel exhausted".to_string(),
                };
            }
            (Outcome::Values(va), Outcome::Values(vb)) => {
                if !streams_equal(va, vb) {
                    return Verdict::Divergence {
                        vector: v,
                        detail: format!("results differ: {va:?} vs {vb:?}"),
                    };
                }
            }
            (Outcome::Trap(ka), Outcome::Trap(kb)) => {
                if ka != kb {
                    return Verdict::Divergence {
                        vector: v,
                        detail: format!("trap kinds differ: {ka} vs {kb}"),
                    };
                }
            }
            (x, y) => {
                return Verdict::Divergence {
                    vector: v,
                    detail: format!("outcomes differ: {x:?} vs {y:?}"),
                }
            }
        }
        if !streams_equal(&a.output()[base_out..], &b.output()[base_out..]) {
            return Verdict::Divergence {
                vector: v,
                detail: "output streams differ".to_string(),
            };
        }
    }

    Verdict::Equal
}

fn instantiate_errors_match(a: &InstantiateError, b: &InstantiateError) -> bool {
    match (a, b) {
        (InstantiateError::StartTrap(x), InstantiateError::StartTrap(y)) => x == y,
        _ => std::mem::discriminant(a) == std::mem::discriminant(b),
    }
}

fn streams_equal(a: &[Value], b: &[Value]) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x.semantic_eq(y))
}

/// Deterministic argument vectors for a signature: a mix of edge values and
/// seeded-random fills.
pub fn gen_arg_vectors(ft: &FuncType, count: usize, rng: &mut impl Rng) -> Vec<Vec<Value>> {
    const I32_EDGES: &[i32] = &[0, 1, -1, 2, 7, 16, 100, 255, 65535, i32::MIN, i32::MAX];
    const I64_EDGES: &[i64] = &[0, 1, -1, 42, 1 << 33, i64::MIN, i64::MAX];
    (0..count)
        .map(|_| {
            ft.params
                .iter()
                .map(|p| match p {
                    ValType::I32 => {
                        if rng.random_bool(0.4) {
                            Value::I32(I32_EDGES[rng.random_range(0..I32_EDGES.len())])
                        } else {
                            Value::I32(rng.random())
                        }
                    }
                    ValType::I64 => {
                        if rng.random_bool(0.4) {
                            Value::I64(I64_EDGES[rng.random_range(0..I64_EDGES.len())])
                        } else {
                            Value::I64(rng.random())
                        }
                    }
                    ValType::F32 => {
                        if rng.random_bool(0.5) {
                            let pool: &[f32] =
                                &[0.0, -0.0, 1.0, -2.5, 1e10, -1e-10, f32::INFINITY, f32::NAN];
                            Value::from_f32(pool[rng.random_range(0..pool.len())])
                        } else {
                            Value::F32(rng.random())
                        }
                    }
                    ValType::F64 => {
                        if rng.random_bool(0.5) {
                            let pool: &[f64] =
                                &[0.0, -0.0, 1.0, -2.5, 1e100, -1e-100, f64::INFINITY, f64::NAN];
                            Value::from_f64(pool[rng.random_range(0..pool.len())])
                        } else {
                            Value::F64(rng.random())
                        }
                    }
                })
                .collect()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::binfmt::instr::Instr;
    use crate::binfmt::module::{Export, ExportKind, FuncBody};
    use rand::SeedableRng;

    fn add_module(constant: i32) -> Module {
        let mut m = Module::default();
        let ty = m.find_or_add_type(FuncType::new(
            vec![ValType::I32, ValType::I32],
            vec![ValType::I32],
        ));
        let f = m.push_function(
            ty,
            FuncBody {
                locals: vec![],
                instrs: vec![
                    Instr::LocalGet(0),
                    Instr::LocalGet(1),
                    Instr::I32Add,
                    Instr::I32Const(constant),
                    Instr::I32Add,
                ],
            },
        );
        m.exports.push(Export {
            name: "add".into(),
            kind: ExportKind::Func,
            index: f,
        });
        m
    }

    #[test]
    fn module_equals_itself() {
        let m = add_module(0);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let vectors = gen_arg_vectors(&m.types[0], 50, &mut rng);
        let out = differential_check(&m, &m, "add", &vectors, &StubSpec::default(), 1 << 20);
        assert_eq!(out.verdict, Verdict::Equal);
        assert_eq!(out.steps_orig, out.steps_obf);
    }

    #[test]
    fn mutated_constant_detected() {
        let m = add_module(0);
        let bad = add_module(1);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2);
        let vectors = gen_arg_vectors(&m.types[0], 50, &mut rng);
        let out = differential_check(&m, &bad, "add", &vectors, &StubSpec::default(), 1 << 20);
        match out.verdict {
            Verdict::Divergence { vector, .. } => assert_eq!(vector, 0),
            other => panic!("expected divergence, got {other:?}"),
        }
    }
}
