//! Static analysis over decoded modules: the validator, operand-stack
//! typing, block-structure analysis, and structural metrics.

pub mod blocks;
pub mod metrics;
pub mod stack;
pub mod validate;

pub use blocks::{build_block_tree, max_nesting_depth, nesting_histogram, BlockKind, BlockNode};
pub use metrics::{count_metrics, MetricsReport, ModuleMetrics};
pub use stack::{compute_stack_states, max_stack_height, AnalysisError, FuncCtx, StackState};
pub use validate::{validate_module, ValidationError, ValidationErrorKind};
