//! Code-block splitting.
//!
//! A code block is a contiguous run of same-level instructions with a typed
//! operand-stack interface. Splitting cuts it into pieces that share their
//! intermediate stack through newly allocated locals: every piece except the
//! last ends with `local.set` saves (popping top-first), every piece except
//! the first begins with the matching `local.get` restores in reverse order,
//! so sequential concatenation is semantically identical to the original.

use crate::analysis::stack::{compute_stack_states, AnalysisError, FuncCtx, StackState};
use crate::binfmt::instr::Instr;
use crate::binfmt::module::ValType;
use std::collections::BTreeMap;
use thiserror::Error;

/// A contiguous instruction run plus its entry/exit stack interface.
#[derive(Debug, Clone, PartialEq)]
pub struct CodeBlock {
    pub instrs: Vec<Instr>,
    pub entry: Vec<ValType>,
    pub exit: Vec<ValType>,
    pub source_func: u32,
}

impl CodeBlock {
    /// Builds a block from instructions, deriving the exit interface from
    /// the entry by stack typing.
    pub fn analyze(
        instrs: Vec<Instr>,
        entry: Vec<ValType>,
        ctx: &FuncCtx,
    ) -> Result<CodeBlock, SplitError> {
        let states = compute_stack_states(&instrs, &StackState::with_types(entry.clone()), ctx)?;
        let exit = match states.last() {
            Some((_, post)) => {
                if post.polymorphic {
                    return Err(SplitError::PolymorphicRegion);
                }
                post.types.clone()
            }
            None => entry.clone(),
        };
        Ok(CodeBlock {
            instrs,
            entry,
            exit,
            source_func: ctx.func,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SplitError {
    #[error("requested {requested} blocks but only {available} eligible positions")]
    TooManyBlocks { requested: usize, available: usize },
    #[error("region contains a branch that escapes it")]
    OutwardBranch,
    #[error("region reaches a polymorphic stack state")]
    PolymorphicRegion,
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
}

/// Allocates one saved local per (stack slot, value type), lazily, appending
/// to a function's local declarations.
#[derive(Debug)]
pub struct LocalAllocator {
    n_params: u32,
    locals: Vec<ValType>,
    saved: BTreeMap<(u32, ValType), u32>,
}

impl LocalAllocator {
    /// Takes over a function's current locals; call [`Self::into_locals`] to
    /// get the extended list back.
    pub fn new(n_params: u32, locals: Vec<ValType>) -> Self {
        LocalAllocator {
            n_params,
            locals,
            saved: BTreeMap::new(),
        }
    }

    /// Local index for a saved stack slot of the given type.
    pub fn slot_local(&mut self, slot: u32, ty: ValType) -> u32 {
        if let Some(idx) = self.saved.get(&(slot, ty)) {
            return *idx;
        }
        let idx = self.push(ty);
        self.saved.insert((slot, ty), idx);
        idx
    }

    /// Appends a fresh (non-slot) local.
    pub fn push(&mut self, ty: ValType) -> u32 {
        self.locals.push(ty);
        self.n_params + self.locals.len() as u32 - 1
    }

    pub fn into_locals(self) -> Vec<ValType> {
        self.locals
    }
}

/// True when this instruction may be part of a splittable region: plain
/// instructions, or structured constructs none of whose inner branches
/// escape the construct (`return` is allowed — it behaves identically
/// wherever the construct ends up).
pub fn item_is_eligible(i: &Instr) -> bool {
    match i {
        Instr::Br(_)
        | Instr::BrIf(_)
        | Instr::BrTable { .. }
        | Instr::Return
        | Instr::Unreachable => false,
        Instr::Block(_, body) | Instr::Loop(_, body) => !escapes_outward(body, 1),
        Instr::If(_, a, b) => !escapes_outward(a, 1) && !escapes_outward(b, 1),
        _ => true,
    }
}

fn escapes_outward(instrs: &[Instr], depth: u32) -> bool {
    instrs.iter().any(|i| match i {
        Instr::Br(d) | Instr::BrIf(d) => *d >= depth,
        Instr::BrTable { targets, default } => {
            targets.iter().chain(std::iter::once(default)).any(|d| *d >= depth)
        }
        Instr::Block(_, body) | Instr::Loop(_, body) => escapes_outward(body, depth + 1),
        Instr::If(_, a, b) => escapes_outward(a, depth + 1) || escapes_outward(b, depth + 1),
        _ => false,
    })
}

/// Splits `cb` into `num` sequential blocks, wiring the intermediate stack
/// through locals from `alloc`. Saved-slot indices are relative to the
/// block's entry height.
pub fn split_code_block(
    cb: &CodeBlock,
    num: usize,
    ctx: &FuncCtx,
    alloc: &mut LocalAllocator,
) -> Result<Vec<CodeBlock>, SplitError> {
    if num == 0 || num > cb.instrs.len() {
        return Err(SplitError::TooManyBlocks {
            requested: num,
            available: cb.instrs.len(),
        });
    }
    if !cb.instrs.iter().all(item_is_eligible) {
        return Err(SplitError::OutwardBranch);
    }
    if num == 1 {
        return Ok(vec![cb.clone()]);
    }

    let entry_state = StackState::with_types(cb.entry.clone());
    let states = compute_stack_states(&cb.instrs, &entry_state, ctx)?;
    if states.iter().any(|(_, post)| post.polymorphic) {
        return Err(SplitError::PolymorphicRegion);
    }

    // listDivide: chunk lengths as equal as possible, each at least one item.
    let len = cb.instrs.len();
    let base = len / num;
    let extra = len % num;
    let mut cut_points = Vec::with_capacity(num - 1);
    let mut at = 0usize;
    for k in 0..num - 1 {
        at += base + usize::from(k < extra);
        cut_points.push(at);
    }

    let entry_height = cb.entry.len();
    let mut out = Vec::with_capacity(num);
    let mut start = 0usize;
    let mut pending_restores: Vec<Instr> = Vec::new();

    for (k, &cut) in cut_points.iter().chain(std::iter::once(&len)).enumerate() {
        let chunk = &cb.instrs[start..cut];
        let mut instrs = std::mem::take(&mut pending_restores);
        instrs.extend_from_slice(chunk);

        let is_last = cut == len;
        if !is_last {
            // Stack at this boundary, above the region entry.
            let boundary = &states[cut - 1].1.types;
            let (saves, restores) = save_restore_seqs(alloc, boundary, entry_height);
            instrs.extend(saves);
            pending_restores = restores;
        }

        out.push(CodeBlock {
            instrs,
            entry: if k == 0 { cb.entry.clone() } else { vec![] },
            exit: if is_last { cb.exit.clone() } else { vec![] },
            source_func: cb.source_func,
        });
        start = cut;
    }
    Ok(out)
}

/// Save/restore sequences for the stack slots above `entry_height` in
/// `boundary`. Saves pop top-first; restores push bottom-up.
pub(crate) fn save_restore_seqs(
    alloc: &mut LocalAllocator,
    boundary: &[ValType],
    entry_height: usize,
) -> (Vec<Instr>, Vec<Instr>) {
    let mut saves = Vec::new();
    let mut restores = Vec::new();
    for slot in (entry_height..boundary.len()).rev() {
        let rel = (slot - entry_height) as u32;
        let local = alloc.slot_local(rel, boundary[slot]);
        saves.push(Instr::LocalSet(local));
    }
    for slot in entry_height..boundary.len() {
        let rel = (slot - entry_height) as u32;
        let local = alloc.slot_local(rel, boundary[slot]);
        restores.push(Instr::LocalGet(local));
    }
    (saves, restores)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::binfmt::module::{FuncBody, FuncType, Module};
    use Instr::*;

    fn setup(body: Vec<Instr>, results: Vec<ValType>) -> Module {
        let mut m = Module::default();
        let ty = m.find_or_add_type(FuncType::new(vec![], results));
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
    fn split_matches_worked_example() {
        let body = vec![I32Const(1), I32Const(2), I32Add];
        let m = setup(body.clone(), vec![ValType::I32]);
        let ctx = FuncCtx::for_func(&m, 0).unwrap();
        let cb = CodeBlock::analyze(body, vec![], &ctx).unwrap();
        let mut alloc = LocalAllocator::new(0, vec![]);
        // Cut after the second instruction: two i32 slots to carry over.
        let parts = split_code_block(&cb, 2, &ctx, &mut alloc).unwrap();
        assert_eq!(parts.len(), 2);
        // first allocated local saves the top slot
        assert_eq!(
            parts[0].instrs,
            vec![I32Const(1), I32Const(2), LocalSet(0), LocalSet(1)]
        );
        assert_eq!(parts[1].instrs, vec![LocalGet(1), LocalGet(0), I32Add]);
        assert_eq!(alloc.into_locals(), vec![ValType::I32, ValType::I32]);
    }

    #[test]
    fn identity_split() {
        let body = vec![I32Const(1), Drop];
        let m = setup(body.clone(), vec![]);
        let ctx = FuncCtx::for_func(&m, 0).unwrap();
        let cb = CodeBlock::analyze(body, vec![], &ctx).unwrap();
        let mut alloc = LocalAllocator::new(0, vec![]);
        let parts = split_code_block(&cb, 1, &ctx, &mut alloc).unwrap();
        assert_eq!(parts.len(), 1);
        assert_eq!(parts[0], cb);
        assert!(alloc.into_locals().is_empty());
    }

    #[test]
    fn too_many_blocks_rejected() {
        let body = vec![I32Const(1), Drop];
        let m = setup(body.clone(), vec![]);
        let ctx = FuncCtx::for_func(&m, 0).unwrap();
        let cb = CodeBlock::analyze(body, vec![], &ctx).unwrap();
        let mut alloc = LocalAllocator::new(0, vec![]);
        assert_eq!(
            split_code_block(&cb, 3, &ctx, &mut alloc),
            Err(SplitError::TooManyBlocks {
                requested: 3,
                available: 2,
            })
        );
    }

    #[test]
    fn outward_branch_rejected() {
        let body = vec![I32Const(1), Drop, Br(0)];
        let m = setup(body.clone(), vec![]);
        let ctx = FuncCtx::for_func(&m, 0).unwrap();
        let cb = CodeBlock {
            instrs: body,
            entry: vec![],
            exit: vec![],
            source_func: 0,
        };
        let mut alloc = LocalAllocator::new(0, vec![]);
        assert_eq!(
            split_code_block(&cb, 2, &ctx, &mut alloc),
            Err(SplitError::OutwardBranch)
        );
    }

    #[test]
    fn eligibility_of_nested_constructs() {
        // br depth inside the block stays internal
        assert!(item_is_eligible(&Block(
            None,
            vec![Loop(None, vec![I32Const(1), BrIf(1)])],
        )));
        // br depth 1 at block level escapes
        assert!(!item_is_eligible(&Block(None, vec![Br(1)])));
        // return is allowed inside a nested construct
        assert!(item_is_eligible(&Block(None, vec![Return])));
        // top-level control transfers are never items
        assert!(!item_is_eligible(&Return));
        assert!(!item_is_eligible(&BrIf(0)));
    }

    #[test]
    fn locals_reused_across_cuts_by_slot_and_type() {
        // Heights go 1,2,1,2 across cuts; slots of equal (index, type) share
        // one local.
        let body = vec![
            I32Const(1),
            I32Const(2),
            I32Add,
            I32Const(3),
            I32Add,
            Drop,
        ];
        let m = setup(body.clone(), vec![]);
        let ctx = FuncCtx::for_func(&m, 0).unwrap();
        let cb = CodeBlock::analyze(body, vec![], &ctx).unwrap();
        let mut alloc = LocalAllocator::new(0, vec![]);
        let parts = split_code_block(&cb, 6, &ctx, &mut alloc).unwrap();
        assert_eq!(parts.len(), 6);
        // max simultaneous carried slots is 2 (both i32)
        assert_eq!(alloc.into_locals(), vec![ValType::I32, ValType::I32]);
    }

    /// Differential oracle: reassembled split halves behave like the
    /// original for random cut counts and inputs.
    #[test]
    fn split_preserves_semantics_under_interpreter() {
        use crate::interp::{differential_check, gen_arg_vectors, StubSpec, Verdict};
        use rand::SeedableRng;

        let fx = crate::corpus::fixture("arith_chain");
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for num in [2usize, 3, 5, 9, 29] {
            let mut obf = fx.module.clone();
            let body = obf.code[0].instrs.clone();
            let n_params = obf.types[obf.functions[0] as usize].params.len() as u32;
            let ctx = FuncCtx::for_func(&fx.module, 0).unwrap();
            let cb = CodeBlock::analyze(body, vec![], &ctx).unwrap();
            let mut alloc = LocalAllocator::new(n_params, obf.code[0].locals.clone());
            let parts = split_code_block(&cb, num, &ctx, &mut alloc).unwrap();
            obf.code[0].locals = alloc.into_locals();
            obf.code[0].instrs = parts.into_iter().flat_map(|p| p.instrs).collect();
            crate::analysis::validate_module(&obf).unwrap();

            let ft = fx.module.func_type(0).unwrap().clone();
            let vectors = gen_arg_vectors(&ft, 100, &mut rng);
            let out = differential_check(
                &fx.module,
                &obf,
                fx.entry,
                &vectors,
                &StubSpec::default(),
                1 << 22,
            );
            assert_eq!(out.verdict, Verdict::Equal, "split {num} diverged");
        }
    }
}
