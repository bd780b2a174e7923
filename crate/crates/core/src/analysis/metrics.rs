//! Structural metrics: per-opcode counts, call/call_indirect counts, elem
//! section length, nesting histograms, and encoded byte size.

use super::blocks::{max_nesting_depth, nesting_histogram};
use crate::binfmt::encode_module;
use crate::binfmt::instr::Instr;
use crate::binfmt::module::Module;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt;

/// Flat metrics record for one module.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModuleMetrics {
    pub byte_size: u64,
    pub func_count: u32,
    pub instr_count: u64,
    pub calls: u64,
    pub call_indirects: u64,
    pub elem_entries: u64,
    pub max_nesting: u32,
    /// Number of structured blocks per nesting depth (1 = top level).
    pub nesting: BTreeMap<u32, u64>,
    pub opcode_counts: BTreeMap<String, u64>,
}

/// Exact structural counts for a decoded module.
pub fn count_metrics(m: &Module) -> ModuleMetrics {
    let mut opcode_counts = BTreeMap::new();
    let mut nesting = BTreeMap::new();
    let mut instr_count = 0u64;
    let mut max_nesting = 0u32;

    for body in &m.code {
        count_instrs(&body.instrs, &mut opcode_counts, &mut instr_count);
        nesting_histogram(&body.instrs, &mut nesting);
        max_nesting = max_nesting.max(max_nesting_depth(&body.instrs));
    }

    ModuleMetrics {
        byte_size: encode_module(m).map(|b| b.len() as u64).unwrap_or(0),
        func_count: m.num_funcs(),
        instr_count,
        calls: opcode_counts.get("call").copied().unwrap_or(0),
        call_indirects: opcode_counts.get("call_indirect").copied().unwrap_or(0),
        elem_entries: m.elems.iter().map(|e| e.funcs.len() as u64).sum(),
        max_nesting,
        nesting,
        opcode_counts,
    }
}

fn count_instrs(instrs: &[Instr], counts: &mut BTreeMap<String, u64>, total: &mut u64) {
    for i in instrs {
        *total += 1;
        *counts.entry(i.mnemonic().to_string()).or_insert(0) += 1;
        match i {
            Instr::Block(_, body) | Instr::Loop(_, body) => count_instrs(body, counts, total),
            Instr::If(_, then, els) => {
                count_instrs(then, counts, total);
                count_instrs(els, counts, total);
            }
            _ => {}
        }
    }
}

impl fmt::Display for ModuleMetrics {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "byte_size={}", self.byte_size)?;
        writeln!(f, "func_count={}", self.func_count)?;
        writeln!(f, "instr_count={}", self.instr_count)?;
        writeln!(f, "calls={}", self.calls)?;
        writeln!(f, "call_indirects={}", self.call_indirects)?;
        writeln!(f, "elem_entries={}", self.elem_entries)?;
        writeln!(f, "max_nesting={}", self.max_nesting)?;
        for (depth, n) in &self.nesting {
            writeln!(f, "nesting.{depth}={n}")?;
        }
        for (op, n) in &self.opcode_counts {
            writeln!(f, "op.{op}={n}")?;
        }
        Ok(())
    }
}

/// Before/after comparison emitted by the driver.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub before: ModuleMetrics,
    pub after: ModuleMetrics,
    /// after.byte_size / before.byte_size
    pub size_ratio: f64,
    /// Interpreter step-count ratio, when measured by a differential run.
    pub step_ratio: Option<f64>,
    /// Free-form remarks from the passes (degraded predicate inputs etc.).
    pub notes: Vec<String>,
}

impl MetricsReport {
    pub fn new(before: ModuleMetrics, after: ModuleMetrics) -> Self {
        let size_ratio = if before.byte_size == 0 {
            1.0
        } else {
            after.byte_size as f64 / before.byte_size as f64
        };
        MetricsReport {
            before,
            after,
            size_ratio,
            step_ratio: None,
            notes: Vec::new(),
        }
    }
}

impl fmt::Display for MetricsReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "size_ratio={:.4}", self.size_ratio)?;
        if let Some(r) = self.step_ratio {
            writeln!(f, "step_ratio={r:.4}")?;
        }
        for line in self.before.to_string().lines() {
            writeln!(f, "before.{line}")?;
        }
        for line in self.after.to_string().lines() {
            writeln!(f, "after.{line}")?;
        }
        for n in &self.notes {
            writeln!(f, "note={n}")?;
        }
        Ok(())
    }
}
