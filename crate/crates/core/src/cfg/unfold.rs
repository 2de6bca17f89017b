//! Loop unfolding: replace each `while` by `b` nested copies of
//! (condition, body). The `k`-th condition guards the `k`-th entry; after
//! the `b`-th body an overflow guard re-checks the condition so paths that
//! would iterate more than `b` times are visibly abandoned. Nested loops
//! unfold recursively inside every copy of the enclosing body, and every
//! iteration stamps its `(loop line, iteration)` pair onto the loop context
//! of the nodes it contains.

use std::collections::{BTreeMap, HashMap};

use super::{
    Assign, AssignBlock, Cfg, CfgError, CondNode, GuardNode, Node, NodeId, SourceCoord,
};

#[derive(Debug, Clone)]
pub struct UnfoldConfig {
    pub default_b: u32,
    /// Per-loop override keyed by the `while` line.
    pub per_loop: BTreeMap<u32, u32>,
    pub max_nodes: usize,
}

impl UnfoldConfig {
    pub fn new(b: u32) -> Self {
        UnfoldConfig { default_b: b, per_loop: BTreeMap::new(), max_nodes: 1_000_000 }
    }

    fn bound_for(&self, loop_line: u32) -> u32 {
        self.per_loop.get(&loop_line).copied().unwrap_or(self.default_b)
    }
}

/// Unfold every loop `b` times. Executions performing at most `b`
/// iterations per loop entry are preserved exactly.
pub fn unfold(g: &Cfg, b: u32) -> Result<Cfg, CfgError> {
    unfold_with(g, &UnfoldConfig::new(b))
}

pub fn unfold_with(g: &Cfg, config: &UnfoldConfig) -> Result<Cfg, CfgError> {
    if config.default_b == 0 {
        return Err(CfgError::BadBound);
    }
    let mut u = Unfolder {
        src: g,
        nodes: Vec::new(),
        memo: HashMap::new(),
        config,
    };
    let entry = u.clone_node(g.entry, &[], &HashMap::new())?;
    let post = u
        .memo
        .get(&(g.post, Vec::new()))
        .copied()
        .unwrap_or_else(|| {
            let id = NodeId(u.nodes.len() as u32);
            u.nodes.push(Node::Post);
            id
        });
    Ok(Cfg {
        nodes: u.nodes,
        entry,
        post,
        post_expr: g.post_expr.clone(),
        requires_expr: g.requires_expr.clone(),
        return_expr: g.return_expr.clone(),
        params: g.params.clone(),
        array_lengths: g.array_lengths.clone(),
        is_dsa: false,
    })
}

type Ctx = Vec<(u32, u32)>;

struct Unfolder<'a> {
    src: &'a Cfg,
    nodes: Vec<Node>,
    /// `(source node, loop context)` to its copy; joins converge here.
    memo: HashMap<(NodeId, Ctx), NodeId>,
    config: &'a UnfoldConfig,
}

impl<'a> Unfolder<'a> {
    fn reserve(&mut self) -> Result<NodeId, CfgError> {
        if self.nodes.len() >= self.config.max_nodes {
            return Err(CfgError::UnfoldBudgetExceeded(self.config.max_nodes));
        }
        let id = NodeId(self.nodes.len() as u32);
        self.nodes.push(Node::Post); // placeholder, patched by the caller
        Ok(id)
    }

    /// Clone the subgraph reachable from `id` under loop context `ctx`.
    /// `back` maps a loop head to the entry of the next unfolded copy, so
    /// back arcs inside the body being cloned jump forward instead.
    fn clone_node(
        &mut self,
        id: NodeId,
        ctx: &[(u32, u32)],
        back: &HashMap<NodeId, NodeId>,
    ) -> Result<NodeId, CfgError> {
        if let Some(&target) = back.get(&id) {
            return Ok(target);
        }
        let key = (id, ctx.to_vec());
        if let Some(&copy) = self.memo.get(&key) {
            return Ok(copy);
        }
        match self.src.node(id) {
            Node::Post => {
                let copy = self.reserve()?;
                self.memo.insert(key, copy);
                // placeholder is already Node::Post
                Ok(copy)
            }
            Node::Guard(g) => {
                let copy = self.reserve()?;
                self.memo.insert(key, copy);
                let ok_to = self.clone_node(g.ok_to, ctx, back)?;
                self.nodes[copy.index()] = Node::Guard(GuardNode {
                    expr: g.expr.clone(),
                    loop_line: g.loop_line,
                    loop_ctx: ctx.to_vec(),
                    ok_to,
                });
                Ok(copy)
            }
            Node::Block(b) => {
                let copy = self.reserve()?;
                self.memo.insert(key, copy);
                let next = self.clone_node(b.next, ctx, back)?;
                let assigns = b
                    .assigns
                    .iter()
                    .map(|a| Assign {
                        coord: a.coord.as_ref().map(|c| SourceCoord {
                            line: c.line,
                            loop_ctx: ctx.to_vec(),
                        }),
                        ..a.clone()
                    })
                    .collect();
                self.nodes[copy.index()] = Node::Block(AssignBlock { assigns, next });
                Ok(copy)
            }
            Node::Cond(c) if !c.is_loop => {
                let copy = self.reserve()?;
                self.memo.insert(key, copy);
                let then_to = self.clone_node(c.then_to, ctx, back)?;
                let else_to = self.clone_node(c.else_to, ctx, back)?;
                self.nodes[copy.index()] = Node::Cond(CondNode {
                    expr: c.expr.clone(),
                    line: c.line,
                    loop_ctx: ctx.to_vec(),
                    then_to,
                    else_to,
                    is_loop: false,
                });
                Ok(copy)
            }
            Node::Cond(head) => self.expand_loop(id, head.clone(), ctx, back),
        }
    }

    /// Materialize `b` copies of (condition, body) plus the overflow guard.
    fn expand_loop(
        &mut self,
        head_id: NodeId,
        head: CondNode,
        ctx: &[(u32, u32)],
        back: &HashMap<NodeId, NodeId>,
    ) -> Result<NodeId, CfgError> {
        let b = self.config.bound_for(head.line);
        let key = (head_id, ctx.to_vec());

        // Exit continuation, cloned once and shared by all exit arcs.
        let exit_cont = self.clone_node(head.else_to, ctx, back)?;

        // Build copies back to front: after the b-th body comes the guard.
        let mut guard_ctx = ctx.to_vec();
        guard_ctx.push((head.line, b + 1));
        let guard_block = self.reserve()?;
        self.nodes[guard_block.index()] =
            Node::Block(AssignBlock { assigns: Vec::new(), next: exit_cont });
        let guard = self.reserve()?;
        self.nodes[guard.index()] = Node::Guard(GuardNode {
            expr: head.expr.clone(),
            loop_line: head.line,
            loop_ctx: guard_ctx,
            ok_to: guard_block,
        });

        let mut next_entry = guard;
        for k in (1..=b).rev() {
            let mut iter_ctx = ctx.to_vec();
            iter_ctx.push((head.line, k));

            let mut inner_back = back.clone();
            inner_back.insert(head_id, next_entry);
            let body_entry = self.clone_node(head.then_to, &iter_ctx, &inner_back)?;

            // junction slot on this copy's exit arc
            let exit_block = self.reserve()?;
            self.nodes[exit_block.index()] =
                Node::Block(AssignBlock { assigns: Vec::new(), next: exit_cont });

            let cond = self.reserve()?;
            self.nodes[cond.index()] = Node::Cond(CondNode {
                expr: head.expr.clone(),
                line: head.line,
                loop_ctx: iter_ctx,
                then_to: body_entry,
                else_to: exit_block,
                is_loop: false,
            });
            next_entry = cond;
        }
        self.memo.insert(key, next_entry);
        Ok(next_entry)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cfg::build_cfg;
    use crate::frontend::{parse, typecheck};

    fn cfg_for_file(name: &str) -> Cfg {
        let path = format!("{}/../../corpus/{name}", env!("CARGO_MANIFEST_DIR"));
        let src = std::fs::read_to_string(path).unwrap();
        build_cfg(&typecheck(parse(&src).unwrap()).unwrap())
    }

    #[test]
    fn loop_free_graph_is_unchanged() {
        let g = cfg_for_file("absminus.mj");
        let u = unfold(&g, 5).unwrap();
        assert_eq!(g.canonical_dump(), u.canonical_dump());
    }

    #[test]
    fn minimum_unfolds_to_three_condition_copies() {
        let g = cfg_for_file("minimum.mj");
        let u = unfold(&g, 3).unwrap();
        assert!(u.is_loop_free());
        let loop_conds: Vec<_> = u.cond_nodes().filter(|(_, c)| c.line == 9).collect();
        assert_eq!(loop_conds.len(), 3);
        let mut coords: Vec<String> =
            loop_conds.iter().map(|(_, c)| c.coord().render()).collect();
        coords.sort();
        assert_eq!(coords, vec!["9:1", "9:2", "9:3"]);
        // inner if copies carry the loop context
        let mut inner: Vec<String> = u
            .cond_nodes()
            .filter(|(_, c)| c.line == 10)
            .map(|(_, c)| c.coord().render())
            .collect();
        inner.sort();
        assert_eq!(inner, vec!["9:1.10", "9:2.10", "9:3.10"]);
        // exactly one overflow guard
        assert_eq!(
            u.nodes.iter().filter(|n| matches!(n, Node::Guard(_))).count(),
            1
        );
    }

    #[test]
    fn nested_loops_unfold_recursively() {
        let g = cfg_for_file("bubblesort.mj");
        let u = unfold(&g, 4).unwrap();
        assert!(u.is_loop_free());
        // outer copies: 4 conditions at line 7; inner loop at line 9 appears
        // 4 times per outer body copy.
        assert_eq!(u.cond_nodes().filter(|(_, c)| c.line == 7).count(), 4);
        assert_eq!(u.cond_nodes().filter(|(_, c)| c.line == 9).count(), 16);
        let mut sample: Vec<String> = u
            .cond_nodes()
            .filter(|(_, c)| c.line == 9 && c.loop_ctx.first() == Some(&(7, 2)))
            .map(|(_, c)| c.coord().render())
            .collect();
        sample.sort();
        assert_eq!(sample, vec!["7:2.9:1", "7:2.9:2", "7:2.9:3", "7:2.9:4"]);
    }

    #[test]
    fn bad_bound_rejected() {
        let g = cfg_for_file("minimum.mj");
        assert!(matches!(unfold(&g, 0), Err(CfgError::BadBound)));
    }

    #[test]
    fn node_budget_enforced() {
        let g = cfg_for_file("bubblesort.mj");
        let mut cfg = UnfoldConfig::new(20);
        cfg.max_nodes = 50;
        assert!(matches!(
            unfold_with(&g, &cfg),
            Err(CfgError::UnfoldBudgetExceeded(50))
        ));
    }
}
