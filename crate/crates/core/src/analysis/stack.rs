//! Operand-stack type inference over instruction regions.
//!
//! Operates at one nesting level: structured constructs (`block`/`loop`/`if`)
//! are treated as atomic items with their declared net effect. This is the
//! view the code-splitting pass works with.

use crate::binfmt::instr::{Instr, MemAccessKind};
use crate::binfmt::module::{Module, ValType};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AnalysisError {
    #[error("operand stack underflow")]
    Underflow,
    #[error("type mismatch: expected {expected}, found {found}")]
    TypeMismatch {
        expected: &'static str,
        found: &'static str,
    },
    #[error("unknown {space} index {index}")]
    UnknownIndex { space: &'static str, index: u32 },
    #[error("stack is polymorphic at this point")]
    Polymorphic,
    #[error("select operands have different types")]
    SelectMismatch,
}

/// The operand-stack type vector at a program point.
///
/// After an unconditional transfer (`br`, `br_table`, `return`,
/// `unreachable`) the state becomes polymorphic: pops of any type succeed,
/// and `types` only tracks values pushed since the transfer.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct StackState {
    pub types: Vec<ValType>,
    pub polymorphic: bool,
}

impl StackState {
    pub fn new() -> Self {
        StackState::default()
    }

    pub fn with_types(types: Vec<ValType>) -> Self {
        StackState {
            types,
            polymorphic: false,
        }
    }

    pub fn height(&self) -> usize {
        self.types.len()
    }

    fn push(&mut self, t: ValType) {
        self.types.push(t);
    }

    fn pop_expect(&mut self, t: ValType) -> Result<(), AnalysisError> {
        match self.types.pop() {
            Some(found) if found == t => Ok(()),
            Some(found) => Err(AnalysisError::TypeMismatch {
                expected: t.name(),
                found: found.name(),
            }),
            None if self.polymorphic => Ok(()),
            None => Err(AnalysisError::Underflow),
        }
    }

    fn pop_any(&mut self) -> Result<Option<ValType>, AnalysisError> {
        match self.types.pop() {
            Some(t) => Ok(Some(t)),
            None if self.polymorphic => Ok(None),
            None => Err(AnalysisError::Underflow),
        }
    }

    fn pop_params(&mut self, params: &[ValType]) -> Result<(), AnalysisError> {
        for &p in params.iter().rev() {
            self.pop_expect(p)?;
        }
        Ok(())
    }

    fn make_polymorphic(&mut self) {
        self.types.clear();
        self.polymorphic = true;
    }
}

/// Typing context of one function: its module, index, flattened local types
/// (parameters first), and result types.
#[derive(Debug, Clone)]
pub struct FuncCtx<'m> {
    pub module: &'m Module,
    pub func: u32,
    pub locals: Vec<ValType>,
    pub results: Vec<ValType>,
}

impl<'m> FuncCtx<'m> {
    /// Builds the context for a locally defined function.
    pub fn for_func(module: &'m Module, func: u32) -> Option<FuncCtx<'m>> {
        let ty = module.func_type(func)?;
        let body = module.func_body(func)?;
        let mut locals = ty.params.clone();
        locals.extend_from_slice(&body.locals);
        Some(FuncCtx {
            module,
            func,
            locals,
            results: ty.results.clone(),
        })
    }

    fn local(&self, idx: u32) -> Result<ValType, AnalysisError> {
        self.locals
            .get(idx as usize)
            .copied()
            .ok_or(AnalysisError::UnknownIndex {
                space: "local",
                index: idx,
            })
    }
}

/// Applies one region-level item to the state.
pub(crate) fn apply_item(
    i: &Instr,
    state: &mut StackState,
    ctx: &FuncCtx,
) -> Result<(), AnalysisError> {
    match i {
        Instr::Nop => {}
        Instr::Block(bt, _) | Instr::Loop(bt, _) => {
            if let Some(t) = bt {
                state.push(*t);
            }
        }
        Instr::If(bt, _, _) => {
            state.pop_expect(ValType::I32)?;
            if let Some(t) = bt {
                state.push(*t);
            }
        }
        Instr::BrIf(_) => {
            // Net effect after the condition pop is zero on fall-through.
            state.pop_expect(ValType::I32)?;
        }
        Instr::Br(_) | Instr::Return | Instr::Unreachable => {
            state.make_polymorphic();
        }
        Instr::BrTable { .. } => {
            state.pop_expect(ValType::I32)?;
            state.make_polymorphic();
        }
        Instr::Call(f) => {
            let ft = ctx
                .module
                .func_type(*f)
                .ok_or(AnalysisError::UnknownIndex {
                    space: "function",
                    index: *f,
                })?;
            state.pop_params(&ft.params)?;
            for r in &ft.results {
                state.push(*r);
            }
        }
        Instr::CallIndirect(t) => {
            let ft = ctx
                .module
                .types
                .get(*t as usize)
                .ok_or(AnalysisError::UnknownIndex {
                    space: "type",
                    index: *t,
                })?;
            state.pop_expect(ValType::I32)?;
            state.pop_params(&ft.params)?;
            for r in &ft.results {
                state.push(*r);
            }
        }
        Instr::Drop => {
            state.pop_any()?;
        }
        Instr::Select => {
            state.pop_expect(ValType::I32)?;
            let a = state.pop_any()?;
            let b = state.pop_any()?;
            match (a, b) {
                (Some(x), Some(y)) if x != y => return Err(AnalysisError::SelectMismatch),
                (Some(x), _) | (_, Some(x)) => state.push(x),
                (None, None) => {
                    // Fully polymorphic select; the result type is unknown and
                    // the state stays polymorphic with no tracked slot.
                }
            }
        }
        Instr::LocalGet(idx) => {
            let t = ctx.local(*idx)?;
            state.push(t);
        }
        Instr::LocalSet(idx) => {
            let t = ctx.local(*idx)?;
            state.pop_expect(t)?;
        }
        Instr::LocalTee(idx) => {
            let t = ctx.local(*idx)?;
            state.pop_expect(t)?;
            state.push(t);
        }
        Instr::GlobalGet(idx) => {
            let g = ctx
                .module
                .global_type(*idx)
                .ok_or(AnalysisError::UnknownIndex {
                    space: "global",
                    index: *idx,
                })?;
            state.push(g.ty);
        }
        Instr::GlobalSet(idx) => {
            let g = ctx
                .module
                .global_type(*idx)
                .ok_or(AnalysisError::UnknownIndex {
                    space: "global",
                    index: *idx,
                })?;
            state.pop_expect(g.ty)?;
        }
        Instr::MemorySize => state.push(ValType::I32),
        Instr::MemoryGrow => {
            state.pop_expect(ValType::I32)?;
            state.push(ValType::I32);
        }
        Instr::I32Const(_) => state.push(ValType::I32),
        Instr::I64Const(_) => state.push(ValType::I64),
        Instr::F32Const(_) => state.push(ValType::F32),
        Instr::F64Const(_) => state.push(ValType::F64),
        other => {
            if let Some(acc) = other.mem_access() {
                match acc.kind {
                    MemAccessKind::Load => {
                        state.pop_expect(ValType::I32)?;
                        state.push(acc.ty);
                    }
                    MemAccessKind::Store => {
                        state.pop_expect(acc.ty)?;
                        state.pop_expect(ValType::I32)?;
                    }
                }
            } else {
                let (params, results) = other
                    .simple_signature()
                    .expect("remaining instructions are simple numeric ops");
                state.pop_params(params)?;
                for r in results {
                    state.push(*r);
                }
            }
        }
    }
    Ok(())
}

/// Computes the (pre, post) stack state of every region-level item, starting
/// from `entry`. Post of item `i` equals pre of item `i + 1`.
pub fn compute_stack_states(
    region: &[Instr],
    entry: &StackState,
    ctx: &FuncCtx,
) -> Result<Vec<(StackState, StackState)>, AnalysisError> {
    let mut state = entry.clone();
    let mut out = Vec::with_capacity(region.len());
    for i in region {
        let pre = state.clone();
        apply_item(i, &mut state, ctx)?;
        out.push((pre, state.clone()));
    }
    Ok(out)
}

/// Maximum operand-stack height over all item boundaries in the region.
///
/// Errors if the region hits a polymorphic point, where heights are not
/// meaningful.
pub fn max_stack_height(
    region: &[Instr],
    entry: &StackState,
    ctx: &FuncCtx,
) -> Result<usize, AnalysisError> {
    if entry.polymorphic {
        return Err(AnalysisError::Polymorphic);
    }
    let states = compute_stack_states(region, entry, ctx)?;
    let mut max = entry.height();
    for (_, post) in &states {
        if post.polymorphic {
            return Err(AnalysisError::Polymorphic);
        }
        max = max.max(post.height());
    }
    Ok(max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::binfmt::module::{FuncBody, FuncType};

    fn ctx_for(body: Vec<Instr>, params: Vec<ValType>, results: Vec<ValType>) -> Module {
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
    fn heights_of_add_chain() {
        let body = vec![Instr::I32Const(1), Instr::I32Const(2), Instr::I32Add];
        let m = ctx_for(body.clone(), vec![], vec![ValType::I32]);
        let ctx = FuncCtx::for_func(&m, 0).unwrap();
        let states = compute_stack_states(&body, &StackState::new(), &ctx).unwrap();
        let mut heights: Vec<usize> = vec![states[0].0.height()];
        heights.extend(states.iter().map(|(_, post)| post.height()));
        assert_eq!(heights, vec![0, 1, 2, 1]);
        assert!(states.iter().all(|(pre, post)| {
            pre.types.iter().all(|t| *t == ValType::I32)
                && post.types.iter().all(|t| *t == ValType::I32)
        }));
    }

    #[test]
    fn br_makes_state_polymorphic() {
        // The sequence inside `block [i32.const 1; br 0; i32.add; ...]`.
        let inner = vec![Instr::I32Const(1), Instr::Br(0), Instr::I32Add];
        let m = ctx_for(
            vec![Instr::Block(Some(ValType::I32), inner.clone())],
            vec![],
            vec![ValType::I32],
        );
        let ctx = FuncCtx::for_func(&m, 0).unwrap();
        let states = compute_stack_states(&inner, &StackState::new(), &ctx).unwrap();
        assert!(!states[0].1.polymorphic);
        assert!(states[1].1.polymorphic);
        assert!(states[2].1.polymorphic);
    }

    #[test]
    fn max_height_counts_pushes() {
        let body = vec![
            Instr::I32Const(1),
            Instr::I32Const(2),
            Instr::I32Const(3),
            Instr::I32Add,
            Instr::I32Add,
        ];
        let m = ctx_for(body.clone(), vec![], vec![ValType::I32]);
        let ctx = FuncCtx::for_func(&m, 0).unwrap();
        assert_eq!(max_stack_height(&body, &StackState::new(), &ctx).unwrap(), 3);

        let short = vec![Instr::I32Const(1), Instr::Drop];
        let m2 = ctx_for(short.clone(), vec![], vec![]);
        let ctx2 = FuncCtx::for_func(&m2, 0).unwrap();
        assert_eq!(max_stack_height(&short, &StackState::new(), &ctx2).unwrap(), 1);
    }

    #[test]
    fn nested_blocks_are_atomic_items() {
        let body = vec![
            Instr::Block(Some(ValType::I32), vec![Instr::I32Const(5)]),
            Instr::I32Const(2),
            Instr::I32Add,
        ];
        let m = ctx_for(body.clone(), vec![], vec![ValType::I32]);
        let ctx = FuncCtx::for_func(&m, 0).unwrap();
        let states = compute_stack_states(&body, &StackState::new(), &ctx).unwrap();
        assert_eq!(states[0].1.types, vec![ValType::I32]);
        assert_eq!(states[2].1.types, vec![ValType::I32]);
    }

    /// Oracle: simulate the type-level stack step by step with an
    /// independent push/pop counter over a straight-line body.
    #[test]
    fn max_height_matches_bruteforce_on_random_straightline() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(17);
        for _ in 0..200 {
            let mut body = Vec::new();
            let mut depth = 0usize;
            let mut max_depth = 0usize;
            for _ in 0..rng.random_range(1..40) {
                if depth >= 2 && rng.random_bool(0.4) {
                    body.push(match rng.random_range(0..4) {
                        0 => Instr::I32Add,
                        1 => Instr::I32Sub,
                        2 => Instr::I32Mul,
                        _ => Instr::I32Xor,
                    });
                    depth -= 1;
                } else if depth >= 1 && rng.random_bool(0.2) {
                    body.push(Instr::Drop);
                    depth -= 1;
                } else {
                    body.push(Instr::I32Const(rng.random_range(-100..100)));
                    depth += 1;
                }
                max_depth = max_depth.max(depth);
            }
            // Make the body a valid () -> () function: drop leftovers.
            for _ in 0..depth {
                body.push(Instr::Drop);
            }
            let m = ctx_for(body.clone(), vec![], vec![]);
            let ctx = FuncCtx::for_func(&m, 0).unwrap();
            assert_eq!(
                max_stack_height(&body, &StackState::new(), &ctx).unwrap(),
                max_depth
            );
        }
    }
}
