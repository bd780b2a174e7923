//! `wobf` is a binary-to-binary obfuscator for WebAssembly core modules
//! (binary format v1, MVP instruction set).
//!
//! The crate is organized around an owned [`binfmt::Module`] IR:
//!
//! * [`binfmt`] — lossless decoder/encoder between `.wasm` bytes and the IR,
//!   including the `name` custom section.
//! * [`analysis`] — operand-stack typing, block-structure analysis, a
//!   full validator, and structural metrics.
//! * [`data_obf`] — data-level passes: linear-memory encryption with
//!   on-demand runtime decryption, and identifier renaming.
//! * [`code_obf`] — code-level passes: code-block splitting, structured
//!   rearranging combinators, control-flow flattening, call→call_indirect
//!   alias disruption, and Collatz-based opaque predicates.
//! * [`interp`] — a reference interpreter used as the differential-testing
//!   oracle for semantic preservation.
//! * [`pipeline`] — pass selection/ordering and deterministic seeding.
//! * [`corpus`] — generated fixture modules and a randomized module
//!   generator used by the test suites.
//!
//! All passes are pure functions over owned `Module` values; identical
//! `(input, config, seed)` triples produce byte-identical outputs.

pub mod analysis;
pub mod binfmt;
pub mod code_obf;
pub mod corpus;
pub mod data_obf;
pub mod interp;
pub mod pipeline;

pub use binfmt::{decode_module, encode_module, Module};
pub use pipeline::{run_pipeline, ObfConfig};
