//! Code-level obfuscation: code-block splitting, structured rearranging
//! combinators, control-flow flattening, call→call_indirect alias
//! disruption, and Collatz-based opaque predicates.

pub mod alias;
pub mod assemble;
pub mod flatten;
pub mod opaque;
pub mod split;

pub use alias::{alias_disrupt, AliasError, AliasReport, OpaqueMode};
pub use assemble::{
    assemble_if_else, assemble_sequential, assemble_switch_case, assemble_while, AssembleError,
};
pub use flatten::{flatten_function, flatten_module, FlattenReport, FlattenedFunc, PredicateMode};
pub use opaque::{
    ensure_collatz_function, gen_collatz_constant, gen_collatz_function, gen_simple_opaque_zero,
    CollatzSpec, OpaqueError,
};
pub use split::{split_code_block, CodeBlock, LocalAllocator, SplitError};

use std::collections::BTreeSet;

/// Shared state threaded through a pass pipeline run: functions injected by
/// earlier passes (never candidates for later transformation) and the
/// module's Collatz step function, created once on demand.
#[derive(Debug, Clone, Default)]
pub struct PassContext {
    pub synthetic: BTreeSet<u32>,
    pub collatz_func: Option<u32>,
    pub notes: Vec<String>,
}

impl PassContext {
    pub fn new() -> Self {
        PassContext::default()
    }

    pub fn note(&mut self, s: String) {
        self.notes.push(s);
    }
}
