//! Block-structure analysis: nesting tree and depth metrics.

use crate::binfmt::instr::Instr;
use std::collections::BTreeMap;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BlockKind {
    FuncBody,
    Block,
    Loop,
    If,
}

/// One node of the nesting tree. `start`/`end` are preorder instruction
/// indices over the whole body; the function body itself is the root at
/// depth 0.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockNode {
    pub kind: BlockKind,
    pub start: usize,
    pub end: usize,
    pub arity: u32,
    pub children: Vec<BlockNode>,
}

impl BlockNode {
    /// Maximum depth of any node below (and including) this one, with this
    /// node at `base` depth.
    fn deepest(&self, base: u32) -> u32 {
        self.children
            .iter()
            .map(|c| c.deepest(base + 1))
            .max()
            .unwrap_or(base)
    }
}

/// Builds the nesting tree of a function body.
pub fn build_block_tree(instrs: &[Instr]) -> BlockNode {
    let mut counter = 0usize;
    let children = walk(instrs, &mut counter);
    BlockNode {
        kind: BlockKind::FuncBody,
        start: 0,
        end: counter,
        arity: 0,
        children,
    }
}

fn walk(instrs: &[Instr], counter: &mut usize) -> Vec<BlockNode> {
    let mut nodes = Vec::new();
    for i in instrs {
        let start = *counter;
        *counter += 1;
        match i {
            Instr::Block(bt, body) | Instr::Loop(bt, body) => {
                let children = walk(body, counter);
                nodes.push(BlockNode {
                    kind: if matches!(i, Instr::Loop(..)) {
                        BlockKind::Loop
                    } else {
                        BlockKind::Block
                    },
                    start,
                    end: *counter,
                    arity: u32::from(bt.is_some()),
                    children,
                });
            }
            Instr::If(bt, then, els) => {
                let mut children = walk(then, counter);
                children.extend(walk(els, counter));
                nodes.push(BlockNode {
                    kind: BlockKind::If,
                    start,
                    end: *counter,
                    arity: u32::from(bt.is_some()),
                    children,
                });
            }
            _ => {}
        }
    }
    nodes
}

/// Maximum nesting depth of a body: 0 for a flat body, `loop { block {} }`
/// has depth 2.
pub fn max_nesting_depth(instrs: &[Instr]) -> u32 {
    build_block_tree(instrs).deepest(0)
}

/// Counts structured nodes per nesting depth (depth 1 = directly inside the
/// function body) into `hist`.
pub fn nesting_histogram(instrs: &[Instr], hist: &mut BTreeMap<u32, u64>) {
    fn visit(node: &BlockNode, depth: u32, hist: &mut BTreeMap<u32, u64>) {
        for c in &node.children {
            *hist.entry(depth + 1).or_insert(0) += 1;
            visit(c, depth + 1, hist);
        }
    }
    visit(&build_block_tree(instrs), 0, hist);
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flat_body_depth_zero() {
        let body = vec![Instr::I32Const(1), Instr::Drop];
        assert_eq!(max_nesting_depth(&body), 0);
        let tree = build_block_tree(&body);
        assert!(tree.children.is_empty());
        assert_eq!(tree.end, 2);
    }

    #[test]
    fn loop_block_depth_two() {
        let body = vec![Instr::Loop(None, vec![Instr::Block(None, vec![])])];
        assert_eq!(max_nesting_depth(&body), 2);
        let mut hist = BTreeMap::new();
        nesting_histogram(&body, &mut hist);
        assert_eq!(hist.get(&1), Some(&1));
        assert_eq!(hist.get(&2), Some(&1));
    }

    #[test]
    fn if_arms_share_depth() {
        let body = vec![
            Instr::I32Const(1),
            Instr::If(
                None,
                vec![Instr::Block(None, vec![])],
                vec![Instr::Loop(None, vec![])],
            ),
        ];
        assert_eq!(max_nesting_depth(&body), 2);
        let tree = build_block_tree(&body);
        assert_eq!(tree.children.len(), 1);
        assert_eq!(tree.children[0].children.len(), 2);
    }

    #[test]
    fn preorder_ranges_nest() {
        let body = vec![
            Instr::Nop,
            Instr::Block(None, vec![Instr::Nop, Instr::Loop(None, vec![Instr::Nop])]),
            Instr::Nop,
        ];
        let tree = build_block_tree(&body);
        let block = &tree.children[0];
        assert_eq!(block.start, 1);
        let inner = &block.children[0];
        assert!(block.start < inner.start && inner.end <= block.end);
    }
}
