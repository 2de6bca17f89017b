//! Bounded model checking: find an input valuation that violates the
//! postcondition within the unfolding bound, standing in for an external
//! pretreatment tool.
//!
//! The whole unfolded DSA graph is encoded at once: every node gets a 0/1
//! reachability guard, branch conditions are reified, assignment constraints
//! are implied by their block's guard, paths into the overflow node are
//! forbidden, and `requires ∧ ¬ensures` is asserted. A `Sat` model's input
//! bindings are replayed through the AST interpreter before being returned.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cfg::{Cfg, Node, NodeId};
use crate::constraints::{CspBuilder, Sym};
use crate::frontend::{interpret, requires_holds, TypedProgram};
use crate::solver::{CmpOp, Domain, Formula, Limits, LinExpr, Problem, SolveResult, VarId};

/// Concrete input valuation: integers and fixed-length arrays.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counterexample {
    #[serde(flatten)]
    pub ints: BTreeMap<String, i64>,
    #[serde(flatten)]
    pub arrays: BTreeMap<String, Vec<i64>>,
}

impl Counterexample {
    /// Parse a JSON object of bindings, e.g. `{"i": 0, "tab": [3,2,1,0]}`.
    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        let raw: BTreeMap<String, serde_json::Value> = serde_json::from_str(text)?;
        let mut ce = Counterexample::default();
        for (k, v) in raw {
            if let Some(n) = v.as_i64() {
                ce.ints.insert(k, n);
            } else {
                let arr: Vec<i64> = serde_json::from_value(v)?;
                ce.arrays.insert(k, arr);
            }
        }
        Ok(ce)
    }

    pub fn to_json(&self) -> serde_json::Value {
        let mut map = serde_json::Map::new();
        for (k, v) in &self.ints {
            map.insert(k.clone(), serde_json::json!(v));
        }
        for (k, v) in &self.arrays {
            map.insert(k.clone(), serde_json::json!(v));
        }
        serde_json::Value::Object(map)
    }

    /// Render like `{i=0, j=1}`.
    pub fn render(&self) -> String {
        let mut parts: Vec<String> = self.ints.iter().map(|(k, v)| format!("{k}={v}")).collect();
        parts.extend(self.arrays.iter().map(|(k, v)| format!("{k}={v:?}")));
        format!("{{{}}}", parts.join(", "))
    }
}

#[derive(Debug, Error)]
pub enum BmcError {
    #[error(transparent)]
    Solver(#[from] crate::solver::SolverError),
    #[error("translation failed: {0}")]
    Translate(#[from] crate::constraints::TranslateError),
    #[error("found model does not replay to a postcondition violation")]
    UnsoundModel,
}

/// Search domain for counterexample inputs; kept human-scale by default.
#[derive(Debug, Clone, Copy)]
pub struct CeSearchConfig {
    pub input_domain: Domain,
    pub limits: Limits,
}

impl Default for CeSearchConfig {
    fn default() -> Self {
        CeSearchConfig {
            input_domain: Domain::new(-100, 100),
            limits: Limits::default(),
        }
    }
}

/// Find an input valuation violating `ensures` within the unfolded graph
/// `g`, or `None` when no such input exists in the search domain.
///
/// The returned counterexample is validated by concrete interpretation of
/// the original program.
pub fn find_counterexample(
    g: &Cfg,
    program: &TypedProgram,
    config: &CeSearchConfig,
) -> Result<Option<Counterexample>, BmcError> {
    assert!(g.is_dsa && g.is_loop_free(), "bmc needs an unfolded DSA graph");

    let mut builder = CspBuilder::new(&g.array_lengths, Domain::default());

    // translate all blocks (roles are irrelevant here: everything is
    // enforced, guarded by reachability)
    let mut block_constraints: Vec<(NodeId, Vec<Formula>)> = Vec::new();
    for (id, block) in g.blocks() {
        let cs = builder.translate_block(block)?;
        block_constraints.push((id, cs.into_iter().map(|c| c.formula).collect()));
    }
    let mut cond_formulas: Vec<(NodeId, Formula, Formula)> = Vec::new();
    for (id, cond) in g.cond_nodes() {
        let pos = builder.translate_cond(cond, true)?;
        let neg = builder.translate_cond(cond, false)?;
        cond_formulas.push((id, pos.formula, neg.formula));
    }
    let mut guard_formulas: Vec<(NodeId, Formula)> = Vec::new();
    for (i, node) in g.nodes.iter().enumerate() {
        if let Node::Guard(gd) = node {
            let overflow = crate::cfg::CondNode {
                expr: gd.expr.clone(),
                line: gd.loop_line,
                loop_ctx: gd.loop_ctx.clone(),
                then_to: NodeId(0),
                else_to: NodeId(0),
                is_loop: false,
            };
            let pos = builder.translate_cond(&overflow, true)?;
            guard_formulas.push((NodeId(i as u32), pos.formula));
        }
    }
    let requires = match &g.requires_expr {
        Some(r) => Some(builder.translate_requires(r)?),
        None => None,
    };
    let negated_post = {
        // build ¬ensures structurally
        let not_post = crate::cfg::CExpr::Not(Box::new(g.post_expr.clone()));
        builder.translate_requires(&not_post)?
    };

    let csp = builder.finish();
    let mut problem = Problem::default();
    let mut input_vars: Vec<(Sym, VarId)> = Vec::new();
    for sym in &csp.syms {
        let is_input = sym.version == 0
            && g.params.iter().any(|(p, _)| p == &sym.base)
            && sym.base != "$";
        let domain = if is_input { config.input_domain } else { csp.domain };
        let v = problem.new_var(domain);
        if is_input {
            input_vars.push((sym.clone(), v));
        }
    }

    // reachability guards
    let mut node_guard: BTreeMap<NodeId, VarId> = BTreeMap::new();
    for i in 0..g.nodes.len() {
        node_guard.insert(NodeId(i as u32), problem.new_var(Domain::boolean()));
    }
    let g_of = |id: NodeId| node_guard[&id];

    // entry is reached; the post must be reached; overflow paths are cut by
    // each guard node: reach(guard) ∧ cond  is forbidden.
    problem.post(Formula::Cmp {
        op: CmpOp::Eq,
        lin: LinExpr::var(g_of(g.entry)).sub(&LinExpr::constant(1)),
    });
    problem.post(Formula::Cmp {
        op: CmpOp::Eq,
        lin: LinExpr::var(g_of(g.post)).sub(&LinExpr::constant(1)),
    });

    // per-arc guard variables accumulate into each node's in-sum
    let mut in_sums: BTreeMap<NodeId, LinExpr> = BTreeMap::new();
    let add_arc = |problem: &mut Problem, in_sums: &mut BTreeMap<NodeId, LinExpr>, from: LinExpr, to: NodeId| {
        let arc = problem.new_var(Domain::boolean());
        problem.post(Formula::Cmp {
            op: CmpOp::Eq,
            lin: from.sub(&LinExpr::var(arc)),
        });
        let entry = in_sums.entry(to).or_default();
        *entry = entry.clone().add(&LinExpr::var(arc));
    };

    for (i, node) in g.nodes.iter().enumerate() {
        let id = NodeId(i as u32);
        match node {
            Node::Block(b) => {
                add_arc(&mut problem, &mut in_sums, LinExpr::var(g_of(id)), b.next);
                // guarded assignments: g = 1 implies constraint
                if let Some((_, fs)) = block_constraints.iter().find(|(bid, _)| *bid == id) {
                    for f in fs {
                        let g_zero = Formula::Cmp {
                            op: CmpOp::Eq,
                            lin: LinExpr::var(g_of(id)),
                        };
                        problem.post(Formula::Or(vec![g_zero, f.clone()]));
                    }
                }
            }
            Node::Cond(_) => {
                let (_, pos, neg) = cond_formulas
                    .iter()
                    .find(|(cid, _, _)| *cid == id)
                    .expect("translated");
                let t = problem.new_var(Domain::boolean());
                problem.post(Formula::Reified {
                    var: t,
                    inner: Box::new(pos.clone()),
                    inner_neg: Box::new(neg.clone()),
                });
                // then-arc guard = g * t; else-arc guard = g * (1-t) = g - g*t
                let gt = problem.new_var(Domain::boolean());
                problem.post(Formula::Product { z: gt, x: g_of(id), y: t });
                let (then_to, else_to) = match node {
                    Node::Cond(c) => (c.then_to, c.else_to),
                    _ => unreachable!(),
                };
                add_arc(&mut problem, &mut in_sums, LinExpr::var(gt), then_to);
                add_arc(
                    &mut problem,
                    &mut in_sums,
                    LinExpr::var(g_of(id)).sub(&LinExpr::var(gt)),
                    else_to,
                );
            }
            Node::Guard(gd) => {
                // reaching the guard with the loop condition still true means
                // the unfolding bound is insufficient: forbid it.
                let (_, overflow) = guard_formulas
                    .iter()
                    .find(|(gid, _)| *gid == id)
                    .expect("translated");
                let t = problem.new_var(Domain::boolean());
                problem.post(Formula::Reified {
                    var: t,
                    inner: Box::new(overflow.clone()),
                    inner_neg: Box::new(overflow.negate()),
                });
                let gt = problem.new_var(Domain::boolean());
                problem.post(Formula::Product { z: gt, x: g_of(id), y: t });
                problem.post(Formula::Cmp { op: CmpOp::Eq, lin: LinExpr::var(gt) });
                add_arc(
                    &mut problem,
                    &mut in_sums,
                    LinExpr::var(g_of(id)).sub(&LinExpr::var(gt)),
                    gd.ok_to,
                );
            }
            Node::Post => {}
        }
    }
    // tie node guards to their in-sums
    for (id, sum) in in_sums {
        problem.post(Formula::Cmp {
            op: CmpOp::Eq,
            lin: LinExpr::var(g_of(id)).sub(&sum),
        });
    }
    if let Some(r) = requires {
        problem.post(r.formula);
    }
    problem.post(negated_post.formula);

    match problem.solve(&config.limits)? {
        SolveResult::Unsat => Ok(None),
        SolveResult::Sat(model) => {
            let mut ce = Counterexample::default();
            for (name, len) in &g.params {
                match len {
                    None => {
                        let (_, v) = input_vars
                            .iter()
                            .find(|(s, _)| &s.base == name && s.cell.is_none())
                            .expect("input var");
                        ce.ints.insert(name.clone(), model.value(*v));
                    }
                    Some(len) => {
                        let mut cells = vec![0i64; *len];
                        for (s, v) in &input_vars {
                            if &s.base == name {
                                if let Some(i) = s.cell {
                                    cells[i] = model.value(*v);
                                }
                            }
                        }
                        ce.arrays.insert(name.clone(), cells);
                    }
                }
            }
            if !validates(program, &ce) {
                return Err(BmcError::UnsoundModel);
            }
            Ok(Some(ce))
        }
    }
}

/// True when `ce` satisfies `requires` and the concrete run violates
/// `ensures` — the validation applied both to found and user-supplied
/// counterexamples.
pub fn validates(program: &TypedProgram, ce: &Counterexample) -> bool {
    match requires_holds(program, &ce.ints, &ce.arrays) {
        Ok(true) => {}
        _ => return false,
    }
    match interpret(program, &ce.ints, &ce.arrays) {
        Ok(out) => !out.post_ok,
        Err(_) => false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cfg::{build_cfg, to_dsa, unfold};
    use crate::frontend::{parse, typecheck};

    fn pipeline(name: &str, b: u32) -> (TypedProgram, Cfg) {
        let path = format!("{}/../../corpus/{name}", env!("CARGO_MANIFEST_DIR"));
        let src = std::fs::read_to_string(path).unwrap();
        let p = typecheck(parse(&src).unwrap()).unwrap();
        let g = to_dsa(&unfold(&build_cfg(&p), b).unwrap()).unwrap();
        (p, g)
    }

    #[test]
    fn absminus_counterexample_found_and_validated() {
        let (p, g) = pipeline("absminus.mj", 1);
        let ce = find_counterexample(&g, &p, &CeSearchConfig::default())
            .unwrap()
            .expect("buggy program must have a counterexample");
        assert!(validates(&p, &ce));
    }

    #[test]
    fn corrected_absminus_has_none() {
        let (p, g) = pipeline("absminus_fixed.mj", 1);
        let found = find_counterexample(&g, &p, &CeSearchConfig::default()).unwrap();
        assert_eq!(found, None);
        // independent exhaustive check over a small input box
        let mut ints = BTreeMap::new();
        for i in -8..=8 {
            for j in -8..=8 {
                ints.insert("i".to_string(), i);
                ints.insert("j".to_string(), j);
                let out = interpret(&p, &ints, &BTreeMap::new()).unwrap();
                assert!(out.post_ok, "violation at i={i}, j={j}");
            }
        }
    }

    #[test]
    fn minimum_counterexample_found() {
        let (p, g) = pipeline("minimum.mj", 3);
        let ce = find_counterexample(&g, &p, &CeSearchConfig::default())
            .unwrap()
            .expect("minimum is buggy");
        assert!(validates(&p, &ce));
        // the buggy loop ignores the last cell, so the found array's strict
        // minimum must sit there
        let tab = &ce.arrays["tab"];
        let min = *tab.iter().min().unwrap();
        assert!(tab[3] == min && tab[..3].iter().all(|v| *v > min));
    }

    #[test]
    fn ce_json_round_trip() {
        let ce = Counterexample::from_json(r#"{"i": 0, "tab": [3, 2, 1, 0]}"#).unwrap();
        assert_eq!(ce.ints["i"], 0);
        assert_eq!(ce.arrays["tab"], vec![3, 2, 1, 0]);
        let back = Counterexample::from_json(&ce.to_json().to_string()).unwrap();
        assert_eq!(ce, back);
    }
}
