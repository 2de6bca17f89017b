//! Control flow graphs: construction from the typed AST, loop unfolding to a
//! bound `b`, and renaming into dynamic single assignment (DSA) form.
//!
//! A graph is a DAG (after unfolding) of assignment blocks and conditional
//! nodes, with one `Post` sink holding the translated postcondition. Loops
//! unfold into `b` nested copies of (condition, body); entering a (b+1)-th
//! iteration reaches a designated overflow guard so that executions needing
//! more than `b` iterations are visibly abandoned rather than silently
//! assumed away.

mod build;
mod dsa;
mod unfold;

use std::collections::BTreeMap;

use serde::Serialize;
use thiserror::Error;

pub use build::build_cfg;
pub use dsa::to_dsa;
pub use unfold::{unfold, unfold_with, UnfoldConfig};

/// Index of a node in [`Cfg::nodes`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(pub u32);

impl NodeId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// A (possibly versioned) variable reference. `version` is `None` before the
/// DSA pass and `Some(v)` afterwards; version 0 is the input value of a
/// parameter or the value a declaration initializes.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct VarRef {
    pub base: String,
    pub version: Option<u32>,
}

impl VarRef {
    pub fn plain(base: &str) -> Self {
        VarRef { base: base.to_string(), version: None }
    }

    pub fn versioned(base: &str, version: u32) -> Self {
        VarRef { base: base.to_string(), version: Some(version) }
    }
}

impl std::fmt::Display for VarRef {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self.version {
            Some(v) => write!(f, "{}_{}", self.base, v),
            None => write!(f, "{}", self.base),
        }
    }
}

/// Expression over (versioned) variables. Array lengths and bounded
/// quantifiers from the surface syntax are already resolved/expanded here.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CExpr {
    Const(i64),
    Var(VarRef),
    Index { array: VarRef, index: Box<CExpr> },
    Bin {
        op: crate::frontend::BinOp,
        lhs: Box<CExpr>,
        rhs: Box<CExpr>,
    },
    Not(Box<CExpr>),
}

impl CExpr {
    pub fn bin(op: crate::frontend::BinOp, lhs: CExpr, rhs: CExpr) -> CExpr {
        CExpr::Bin { op, lhs: Box::new(lhs), rhs: Box::new(rhs) }
    }
}

impl std::fmt::Display for CExpr {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CExpr::Const(n) => write!(f, "{n}"),
            CExpr::Var(v) => write!(f, "{v}"),
            CExpr::Index { array, index } => write!(f, "{array}[{index}]"),
            CExpr::Bin { op, lhs, rhs } => write!(f, "({lhs} {} {rhs})", op.symbol()),
            CExpr::Not(e) => write!(f, "!{e}"),
        }
    }
}

/// Source coordinate of a constraint or condition: the source line plus, for
/// statements inside unfolded loops, one `(loop condition line, iteration)`
/// pair per nesting level, iterations counted from 1.
///
/// Rendered as `line` outside loops, `loopLine:iter.line` inside (e.g.
/// `9:2.11`), and `loopLine:iter` for a loop condition occurrence itself.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct SourceCoord {
    pub line: u32,
    pub loop_ctx: Vec<(u32, u32)>,
}

impl SourceCoord {
    pub fn plain(line: u32) -> Self {
        SourceCoord { line, loop_ctx: Vec::new() }
    }

    pub fn render(&self) -> String {
        self.to_string()
    }
}

impl std::fmt::Display for SourceCoord {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.loop_ctx.is_empty() {
            return write!(f, "{}", self.line);
        }
        let prefix = self
            .loop_ctx
            .iter()
            .map(|(l, it)| format!("{l}:{it}"))
            .collect::<Vec<_>>()
            .join(".");
        // A loop condition occurrence renders as `loopLine:iter` alone.
        if self.loop_ctx.last().map(|(l, _)| *l) == Some(self.line) {
            write!(f, "{prefix}")
        } else {
            write!(f, "{prefix}.{}", self.line)
        }
    }
}

/// Whether an assignment came from a source statement or was synthesized at
/// a join point to reconcile branch versions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AssignOrigin {
    Source,
    Junction,
}

/// One assignment inside a block. For array element writes `index` is the
/// written index and `prev_array` the array version being updated; a whole
/// array copy (junction) has `index: None` and an array-typed `value`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Assign {
    pub target: VarRef,
    pub index: Option<CExpr>,
    pub prev_array: Option<VarRef>,
    pub value: CExpr,
    pub coord: Option<SourceCoord>,
    pub origin: AssignOrigin,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AssignBlock {
    pub assigns: Vec<Assign>,
    pub next: NodeId,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CondNode {
    pub expr: CExpr,
    pub line: u32,
    pub loop_ctx: Vec<(u32, u32)>,
    pub then_to: NodeId,
    pub else_to: NodeId,
    /// True for a `while` head in the pre-unfold graph (then-arc re-enters,
    /// else-arc exits, and the back arc returns here).
    pub is_loop: bool,
}

impl CondNode {
    pub fn coord(&self) -> SourceCoord {
        SourceCoord { line: self.line, loop_ctx: self.loop_ctx.clone() }
    }
}

/// Guard placed after the `b`-th unfolded body: if the loop condition still
/// holds, the execution needs more than `b` iterations and the path is
/// abandoned (an `Unreachable` hit); otherwise control continues to the
/// loop exit join.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GuardNode {
    pub expr: CExpr,
    pub loop_line: u32,
    pub loop_ctx: Vec<(u32, u32)>,
    pub ok_to: NodeId,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Node {
    Block(AssignBlock),
    Cond(CondNode),
    Guard(GuardNode),
    Post,
}

/// Control flow graph of one program.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Cfg {
    pub nodes: Vec<Node>,
    pub entry: NodeId,
    pub post: NodeId,
    /// `ensures`, quantifiers expanded; references `\result` via the
    /// placeholder variable until DSA substitutes the return expression.
    pub post_expr: CExpr,
    pub requires_expr: Option<CExpr>,
    /// The return expression (DSA-versioned after `to_dsa`).
    pub return_expr: CExpr,
    /// Parameters in declaration order; `Some(len)` marks an array.
    pub params: Vec<(String, Option<usize>)>,
    pub array_lengths: BTreeMap<String, usize>,
    pub is_dsa: bool,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CfgError {
    #[error("unfolding exceeded the configured node budget of {0} nodes")]
    UnfoldBudgetExceeded(usize),
    #[error("unfold requires a bound of at least 1")]
    BadBound,
    #[error("to_dsa requires a loop-free graph")]
    NotLoopFree,
}

impl Cfg {
    pub fn node(&self, id: NodeId) -> &Node {
        &self.nodes[id.index()]
    }

    pub fn cond_nodes(&self) -> impl Iterator<Item = (NodeId, &CondNode)> {
        self.nodes.iter().enumerate().filter_map(|(i, n)| match n {
            Node::Cond(c) => Some((NodeId(i as u32), c)),
            _ => None,
        })
    }

    pub fn blocks(&self) -> impl Iterator<Item = (NodeId, &AssignBlock)> {
        self.nodes.iter().enumerate().filter_map(|(i, n)| match n {
            Node::Block(b) => Some((NodeId(i as u32), b)),
            _ => None,
        })
    }

    pub fn is_loop_free(&self) -> bool {
        !self.nodes.iter().any(|n| matches!(n, Node::Cond(c) if c.is_loop))
    }

    /// Successors of a node in arc order (then before else).
    pub fn successors(&self, id: NodeId) -> Vec<NodeId> {
        match self.node(id) {
            Node::Block(b) => vec![b.next],
            Node::Cond(c) => vec![c.then_to, c.else_to],
            Node::Guard(g) => vec![g.ok_to],
            Node::Post => vec![],
        }
    }

    /// Deterministic text rendering in DFS order from the entry; used for
    /// debugging and structural equality in tests.
    pub fn canonical_dump(&self) -> String {
        let mut order = Vec::new();
        let mut seen = vec![false; self.nodes.len()];
        let mut stack = vec![self.entry];
        while let Some(id) = stack.pop() {
            if seen[id.index()] {
                continue;
            }
            seen[id.index()] = true;
            order.push(id);
            for s in self.successors(id).into_iter().rev() {
                stack.push(s);
            }
        }
        let numbering: BTreeMap<NodeId, usize> =
            order.iter().enumerate().map(|(i, id)| (*id, i)).collect();
        let mut out = String::new();
        for id in &order {
            let n = numbering[id];
            match self.node(*id) {
                Node::Block(b) => {
                    let body = b
                        .assigns
                        .iter()
                        .map(|a| {
                            let tag = match a.origin {
                                AssignOrigin::Source => "",
                                AssignOrigin::Junction => "~",
                            };
                            match &a.index {
                                Some(idx) => format!("{tag}{}[{idx}]={}", a.target, a.value),
                                None => format!("{tag}{}={}", a.target, a.value),
                            }
                        })
                        .collect::<Vec<_>>()
                        .join("; ");
                    out.push_str(&format!("n{n} block [{body}] -> n{}\n", numbering[&b.next]));
                }
                Node::Cond(c) => {
                    out.push_str(&format!(
                        "n{n} cond {} ({}) then n{} else n{}\n",
                        c.coord(),
                        c.expr,
                        numbering[&c.then_to],
                        numbering[&c.else_to]
                    ));
                }
                Node::Guard(g) => {
                    out.push_str(&format!(
                        "n{n} guard ({}) ok n{}\n",
                        g.expr,
                        numbering[&g.ok_to]
                    ));
                }
                Node::Post => out.push_str(&format!("n{n} post\n")),
            }
        }
        out.push_str(&format!("post: {}\n", self.post_expr));
        out
    }

    /// DOT rendering for debugging (`locfaults cfg <file> --dot`).
    pub fn to_dot(&self) -> String {
        let mut out = String::from("digraph cfg {\n  node [shape=box];\n");
        for (i, node) in self.nodes.iter().enumerate() {
            let label = match node {
                Node::Block(b) => {
                    let body = b
                        .assigns
                        .iter()
                        .map(|a| match &a.index {
                            Some(idx) => format!("{}[{}] = {}", a.target, idx, a.value),
                            None => format!("{} = {}", a.target, a.value),
                        })
                        .collect::<Vec<_>>()
                        .join("\\n");
                    format!("  n{i} [label=\"{}\"];\n", body.replace('"', "'"))
                }
                Node::Cond(c) => format!(
                    "  n{i} [shape=diamond, label=\"{}: {}\"];\n",
                    c.coord(),
                    c.expr.to_string().replace('"', "'")
                ),
                Node::Guard(g) => format!(
                    "  n{i} [shape=diamond, style=dashed, label=\"overflow? {}\"];\n",
                    g.expr.to_string().replace('"', "'")
                ),
                Node::Post => format!(
                    "  n{i} [shape=ellipse, label=\"POST: {}\"];\n",
                    self.post_expr.to_string().replace('"', "'")
                ),
            };
            out.push_str(&label);
            match node {
                Node::Block(b) => out.push_str(&format!("  n{i} -> n{};\n", b.next.0)),
                Node::Cond(c) => {
                    out.push_str(&format!("  n{i} -> n{} [label=\"then\"];\n", c.then_to.0));
                    out.push_str(&format!("  n{i} -> n{} [label=\"else\"];\n", c.else_to.0));
                }
                Node::Guard(g) => out.push_str(&format!("  n{i} -> n{};\n", g.ok_to.0)),
                Node::Post => {}
            }
        }
        out.push_str("}\n");
        out
    }
}
