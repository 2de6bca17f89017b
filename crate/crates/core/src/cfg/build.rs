//! CFG construction from the typed AST.
//!
//! Consecutive assignments merge into one block. Every `if` branch ends in a
//! block it owns (materializing an empty one when the branch is empty or
//! ends in a nested statement), so the DSA pass always has a slot to place
//! junction assignments on each arc into a join.

use std::collections::BTreeMap;

use crate::frontend::{Expr, Stmt, StmtKind, Type, TypedProgram};

use super::{
    Assign, AssignBlock, AssignOrigin, CExpr, Cfg, CondNode, Node, NodeId, SourceCoord, VarRef,
};

/// Placeholder variable standing for `\result` until DSA substitutes the
/// return expression into the postcondition.
pub(crate) const RESULT_VAR: &str = "\\result";

/// Build the control flow graph of `p`. Loops appear as back arcs; run
/// [`super::unfold`] and [`super::to_dsa`] before constraint translation.
pub fn build_cfg(p: &TypedProgram) -> Cfg {
    let prog = p.program();
    let mut b = Builder {
        nodes: Vec::new(),
        lengths: prog.array_lengths.clone(),
    };
    let post = b.push(Node::Post);

    let (entry, _tails) = b.chain(&prog.body, post);

    let return_expr = prog
        .body
        .iter()
        .find_map(|s| match &s.kind {
            StmtKind::Return { value } => Some(b.lower(value)),
            _ => None,
        })
        .expect("validated program ends in return");

    let post_expr = b.lower(&prog.ensures);
    let requires_expr = prog.requires.as_ref().map(|r| b.lower(r));

    let params = prog
        .params
        .iter()
        .map(|(name, ty)| match ty {
            Type::IntArray(len) => (name.clone(), Some(*len)),
            _ => (name.clone(), None),
        })
        .collect();

    Cfg {
        nodes: b.nodes,
        entry,
        post,
        post_expr,
        requires_expr,
        return_expr,
        params,
        array_lengths: prog.array_lengths.clone(),
        is_dsa: false,
    }
}

struct Builder {
    nodes: Vec<Node>,
    lengths: BTreeMap<String, usize>,
}

impl Builder {
    fn push(&mut self, node: Node) -> NodeId {
        let id = NodeId(self.nodes.len() as u32);
        self.nodes.push(node);
        id
    }

    /// Build `body` so that control falls through to `cont`. Assignment
    /// merging never crosses into `cont` itself, which other arcs may share.
    fn chain(&mut self, body: &[Stmt], cont: NodeId) -> (NodeId, ()) {
        // Build back to front; only blocks created within this chain are
        // valid merge targets.
        let mut next = cont;
        let mut merge_ok = false;
        for stmt in body.iter().rev() {
            next = self.stmt(stmt, next, merge_ok);
            merge_ok = true;
        }
        (next, ())
    }

    fn stmt(&mut self, stmt: &Stmt, next: NodeId, merge_ok: bool) -> NodeId {
        match &stmt.kind {
            StmtKind::VarDecl { name, init, .. } => {
                self.prepend_assign(stmt.line, VarRef::plain(name), None, init, next, merge_ok)
            }
            StmtKind::Assign { name, value } => {
                self.prepend_assign(stmt.line, VarRef::plain(name), None, value, next, merge_ok)
            }
            StmtKind::ArrayAssign { name, index, value } => {
                let idx = self.lower(index);
                self.prepend_assign(stmt.line, VarRef::plain(name), Some(idx), value, next, merge_ok)
            }
            StmtKind::If { cond, then_body, else_body } => {
                let then_to = self.branch(then_body, next);
                let else_to = self.branch(else_body, next);
                self.push(Node::Cond(CondNode {
                    expr: self.lower(cond),
                    line: stmt.line,
                    loop_ctx: Vec::new(),
                    then_to,
                    else_to,
                    is_loop: false,
                }))
            }
            StmtKind::While { cond, body } => {
                // Reserve the head, wire the body back to it.
                let head = self.push(Node::Post); // placeholder
                let body_entry = self.branch(body, head);
                self.nodes[head.index()] = Node::Cond(CondNode {
                    expr: self.lower(cond),
                    line: stmt.line,
                    loop_ctx: Vec::new(),
                    then_to: body_entry,
                    else_to: next,
                    is_loop: true,
                });
                head
            }
            StmtKind::Return { .. } => next,
        }
    }

    /// Build a branch body ending in a block owned by this arc.
    fn branch(&mut self, body: &[Stmt], cont: NodeId) -> NodeId {
        let needs_tail = match body.last().map(|s| &s.kind) {
            None => true,
            Some(StmtKind::If { .. }) | Some(StmtKind::While { .. }) => true,
            _ => false,
        };
        let cont = if needs_tail {
            self.push(Node::Block(AssignBlock { assigns: Vec::new(), next: cont }))
        } else {
            cont
        };
        let (entry, _) = self.chain(body, cont);
        entry
    }

    /// Prepend one assignment, merging into `next` when it is a block this
    /// chain created (`merge_ok`).
    fn prepend_assign(
        &mut self,
        line: u32,
        target: VarRef,
        index: Option<CExpr>,
        value: &Expr,
        next: NodeId,
        merge_ok: bool,
    ) -> NodeId {
        let assign = Assign {
            target,
            index,
            prev_array: None,
            value: self.lower(value),
            coord: Some(SourceCoord::plain(line)),
            origin: AssignOrigin::Source,
        };
        if merge_ok {
            if let Node::Block(b) = &mut self.nodes[next.index()] {
                b.assigns.insert(0, assign);
                return next;
            }
        }
        self.push(Node::Block(AssignBlock { assigns: vec![assign], next }))
    }

    /// Lower a surface expression: resolve `a.length`, expand bounded
    /// `forall` into a conjunction, map `\result` to its placeholder.
    fn lower(&self, e: &Expr) -> CExpr {
        match e {
            Expr::Int(n) => CExpr::Const(*n),
            Expr::Var(name) => CExpr::Var(VarRef::plain(name)),
            Expr::Result => CExpr::Var(VarRef::plain(RESULT_VAR)),
            Expr::Length(array) => {
                let len = self.lengths.get(array).copied().unwrap_or(0);
                CExpr::Const(len as i64)
            }
            Expr::Index { array, index } => CExpr::Index {
                array: VarRef::plain(array),
                index: Box::new(self.lower(index)),
            },
            Expr::Binary { op, lhs, rhs } => {
                CExpr::bin(*op, self.lower(lhs), self.lower(rhs))
            }
            Expr::Not(inner) => CExpr::Not(Box::new(self.lower(inner))),
            Expr::Forall { var, lo, hi, body } => {
                let lo = const_eval(&self.lower(lo));
                let hi = const_eval(&self.lower(hi));
                let mut conjuncts = Vec::new();
                for v in lo..hi {
                    conjuncts.push(self.lower(&substitute(body, var, v)));
                }
                match conjuncts.len() {
                    0 => CExpr::bin(
                        crate::frontend::BinOp::Eq,
                        CExpr::Const(0),
                        CExpr::Const(0),
                    ),
                    _ => {
                        let mut it = conjuncts.into_iter();
                        let first = it.next().unwrap();
                        it.fold(first, |acc, c| {
                            CExpr::bin(crate::frontend::BinOp::And, acc, c)
                        })
                    }
                }
            }
        }
    }
}

/// Evaluate a constant expression (typecheck guarantees quantifier bounds
/// are constant once lengths are resolved).
fn const_eval(e: &CExpr) -> i64 {
    match e {
        CExpr::Const(n) => *n,
        CExpr::Bin { op, lhs, rhs } => {
            let a = const_eval(lhs);
            let b = const_eval(rhs);
            match op {
                crate::frontend::BinOp::Add => a + b,
                crate::frontend::BinOp::Sub => a - b,
                crate::frontend::BinOp::Mul => a * b,
                _ => panic!("non-arithmetic operator in quantifier bound"),
            }
        }
        _ => panic!("non-constant quantifier bound"),
    }
}

/// Substitute integer `v` for the quantified variable `var`.
fn substitute(e: &Expr, var: &str, v: i64) -> Expr {
    match e {
        Expr::Var(name) if name == var => Expr::Int(v),
        Expr::Int(_) | Expr::Var(_) | Expr::Result | Expr::Length(_) => e.clone(),
        Expr::Index { array, index } => Expr::Index {
            array: array.clone(),
            index: Box::new(substitute(index, var, v)),
        },
        Expr::Binary { op, lhs, rhs } => Expr::Binary {
            op: *op,
            lhs: Box::new(substitute(lhs, var, v)),
            rhs: Box::new(substitute(rhs, var, v)),
        },
        Expr::Not(inner) => Expr::Not(Box::new(substitute(inner, var, v))),
        Expr::Forall { var: inner_var, lo, hi, body } => Expr::Forall {
            var: inner_var.clone(),
            lo: Box::new(substitute(lo, var, v)),
            hi: Box::new(substitute(hi, var, v)),
            body: if inner_var == var {
                body.clone()
            } else {
                Box::new(substitute(body, var, v))
            },
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::{parse, typecheck};

    fn cfg_for(src: &str) -> Cfg {
        build_cfg(&typecheck(parse(src).unwrap()).unwrap())
    }

    #[test]
    fn absminus_shape() {
        let src = std::fs::read_to_string(
            concat!(env!("CARGO_MANIFEST_DIR"), "/../../corpus/absminus.mj"),
        )
        .unwrap();
        // two if statements, ensures mentions the result
        let parsed = parse(&src).unwrap();
        let ifs = parsed
            .body
            .iter()
            .filter(|s| matches!(s.kind, crate::frontend::StmtKind::If { .. }))
            .count();
        assert_eq!(ifs, 2);
        fn mentions_result(e: &crate::frontend::Expr) -> bool {
            match e {
                crate::frontend::Expr::Result => true,
                crate::frontend::Expr::Binary { lhs, rhs, .. } => {
                    mentions_result(lhs) || mentions_result(rhs)
                }
                crate::frontend::Expr::Not(inner) => mentions_result(inner),
                crate::frontend::Expr::Index { index, .. } => mentions_result(index),
                _ => false,
            }
        }
        assert!(mentions_result(&parsed.ensures));

        let g = cfg_for(&src);
        assert_eq!(g.cond_nodes().count(), 2);
        assert_eq!(g.blocks().count(), 5);
        let lines: Vec<u32> = g.cond_nodes().map(|(_, c)| c.line).collect();
        assert!(lines.contains(&8) && lines.contains(&11));
    }

    #[test]
    fn straight_line_is_one_block() {
        let g = cfg_for(
            "function f(x: int) -> int ensures \\result == x + 1 {\n\
             var y: int = x + 1;\n\
             return y;\n}",
        );
        assert_eq!(g.cond_nodes().count(), 0);
        assert_eq!(g.blocks().count(), 1);
    }

    #[test]
    fn minimum_has_loop_with_back_arc() {
        let src = std::fs::read_to_string(
            concat!(env!("CARGO_MANIFEST_DIR"), "/../../corpus/minimum.mj"),
        )
        .unwrap();
        let g = cfg_for(&src);
        assert_eq!(g.cond_nodes().count(), 2);
        let loops: Vec<_> = g.cond_nodes().filter(|(_, c)| c.is_loop).collect();
        assert_eq!(loops.len(), 1);
        assert_eq!(loops[0].1.line, 9);
        assert!(!g.is_loop_free());
        // the loop body ends in a block whose next is the loop head
        let (head_id, head) = loops[0];
        let mut reaches_back = false;
        let mut stack = vec![head.then_to];
        let mut seen = std::collections::BTreeSet::new();
        while let Some(id) = stack.pop() {
            if !seen.insert(id) {
                continue;
            }
            if id == head_id {
                reaches_back = true;
                continue;
            }
            for s in g.successors(id) {
                stack.push(s);
            }
        }
        assert!(reaches_back, "loop body must flow back to the head");
    }

    #[test]
    fn forall_expands_in_postcondition() {
        let src = std::fs::read_to_string(
            concat!(env!("CARGO_MANIFEST_DIR"), "/../../corpus/minimum.mj"),
        )
        .unwrap();
        let g = cfg_for(&src);
        // four conjuncts, one per cell
        let text = g.post_expr.to_string();
        assert_eq!(text.matches(">=").count(), 4);
        assert!(text.contains("tab[0]") && text.contains("tab[3]"));
    }
}
