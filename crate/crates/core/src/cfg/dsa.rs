//! Dynamic single assignment renaming.
//!
//! Walks the loop-free graph in topological order keeping a version
//! environment per arc. A parameter's input value is version 0 and a
//! declaration's initializer writes version 0; every further write bumps the
//! version. At a join the merged version of a variable is the maximum over
//! the incoming arcs, and arcs arriving with a lower version receive
//! junction assignments (`min_3 = min_1` style) appended to the block that
//! owns the arc.

use std::collections::{BTreeMap, HashMap, VecDeque};

use super::{Assign, AssignOrigin, CExpr, Cfg, CfgError, Node, NodeId, VarRef};

type Env = BTreeMap<String, u32>;

/// Rename `g` into DSA form and substitute the postcondition: `\result`
/// becomes the versioned return expression, and every variable in the
/// `ensures`/`requires` clauses gets its final/input version.
pub fn to_dsa(g: &Cfg) -> Result<Cfg, CfgError> {
    if !g.is_loop_free() {
        return Err(CfgError::NotLoopFree);
    }
    let mut out = g.clone();

    // predecessors
    let mut preds: HashMap<NodeId, Vec<NodeId>> = HashMap::new();
    for i in 0..out.nodes.len() {
        let id = NodeId(i as u32);
        for s in out.successors(id) {
            preds.entry(s).or_default().push(id);
        }
    }

    // Kahn topological order over nodes reachable from the entry.
    let mut indeg: HashMap<NodeId, usize> = HashMap::new();
    let mut reachable = vec![false; out.nodes.len()];
    let mut stack = vec![out.entry];
    while let Some(id) = stack.pop() {
        if reachable[id.index()] {
            continue;
        }
        reachable[id.index()] = true;
        for s in out.successors(id) {
            *indeg.entry(s).or_insert(0) += 1;
            stack.push(s);
        }
    }
    let mut queue: VecDeque<NodeId> = VecDeque::new();
    queue.push_back(out.entry);
    let mut topo = Vec::new();
    while let Some(id) = queue.pop_front() {
        topo.push(id);
        for s in out.successors(id) {
            let d = indeg.get_mut(&s).expect("successor counted");
            *d -= 1;
            if *d == 0 {
                queue.push_back(s);
            }
        }
    }

    let mut env_out: HashMap<NodeId, Env> = HashMap::new();
    let mut entry_env = Env::new();
    for (name, _) in &out.params {
        entry_env.insert(name.clone(), 0);
    }

    let mut post_env = Env::new();
    for id in topo {
        // merge incoming environments
        let mut env = if id == out.entry {
            entry_env.clone()
        } else {
            Env::new()
        };
        let incoming: Vec<NodeId> = preds
            .get(&id)
            .map(|v| v.iter().copied().filter(|p| reachable[p.index()]).collect())
            .unwrap_or_default();
        for p in &incoming {
            for (var, &ver) in &env_out[p] {
                let entry = env.entry(var.clone()).or_insert(ver);
                *entry = (*entry).max(ver);
            }
        }
        // junctions on arcs arriving below the merged version
        if incoming.len() > 1 {
            for p in &incoming {
                let pe = env_out[p].clone();
                for (var, &merged) in &env {
                    if let Some(&have) = pe.get(var) {
                        if have < merged {
                            let junction = make_junction(&out, var, merged, have);
                            match &mut out.nodes[p.index()] {
                                Node::Block(b) => b.assigns.push(junction),
                                other => panic!(
                                    "join predecessor must be a block, found {other:?}"
                                ),
                            }
                        }
                    }
                }
            }
        }

        // rename the node under `env`
        match &mut out.nodes[id.index()] {
            Node::Block(b) => {
                for a in &mut b.assigns {
                    a.value = version_expr(&a.value, &env);
                    if let Some(idx) = &a.index {
                        a.index = Some(version_expr(idx, &env));
                    }
                    let base = a.target.base.clone();
                    let next_ver = env.get(&base).map(|v| v + 1).unwrap_or(0);
                    if a.index.is_some() {
                        a.prev_array = Some(VarRef::versioned(&base, *env.get(&base).unwrap_or(&0)));
                    }
                    a.target = VarRef::versioned(&base, next_ver);
                    env.insert(base, next_ver);
                }
            }
            Node::Cond(c) => {
                c.expr = version_expr(&c.expr, &env);
            }
            Node::Guard(gd) => {
                gd.expr = version_expr(&gd.expr, &env);
            }
            Node::Post => {
                post_env = env.clone();
            }
        }
        env_out.insert(id, env);
    }

    out.return_expr = version_expr(&out.return_expr, &post_env);
    out.post_expr = subst_result(&out.post_expr, &out.return_expr);
    out.post_expr = version_expr(&out.post_expr, &post_env);
    out.requires_expr = out
        .requires_expr
        .as_ref()
        .map(|r| version_expr(r, &entry_env));
    out.is_dsa = true;
    Ok(out)
}

fn make_junction(g: &Cfg, var: &str, merged: u32, have: u32) -> Assign {
    let _ = g;
    Assign {
        target: VarRef::versioned(var, merged),
        index: None,
        prev_array: None,
        value: CExpr::Var(VarRef::versioned(var, have)),
        coord: None,
        origin: AssignOrigin::Junction,
    }
}

/// Stamp versions from `env` onto unversioned variable references.
fn version_expr(e: &CExpr, env: &Env) -> CExpr {
    match e {
        CExpr::Const(_) => e.clone(),
        CExpr::Var(v) => {
            if v.version.is_some() {
                e.clone()
            } else {
                CExpr::Var(VarRef::versioned(&v.base, *env.get(&v.base).unwrap_or(&0)))
            }
        }
        CExpr::Index { array, index } => {
            let array = if array.version.is_some() {
                array.clone()
            } else {
                VarRef::versioned(&array.base, *env.get(&array.base).unwrap_or(&0))
            };
            CExpr::Index { array, index: Box::new(version_expr(index, env)) }
        }
        CExpr::Bin { op, lhs, rhs } => CExpr::Bin {
            op: *op,
            lhs: Box::new(version_expr(lhs, env)),
            rhs: Box::new(version_expr(rhs, env)),
        },
        CExpr::Not(inner) => CExpr::Not(Box::new(version_expr(inner, env))),
    }
}

/// Replace the `\result` placeholder with the (already versioned) return
/// expression.
fn subst_result(e: &CExpr, ret: &CExpr) -> CExpr {
    match e {
        CExpr::Var(v) if v.base == super::build::RESULT_VAR => ret.clone(),
        CExpr::Const(_) | CExpr::Var(_) => e.clone(),
        CExpr::Index { array, index } => CExpr::Index {
            array: array.clone(),
            index: Box::new(subst_result(index, ret)),
        },
        CExpr::Bin { op, lhs, rhs } => CExpr::Bin {
            op: *op,
            lhs: Box::new(subst_result(lhs, ret)),
            rhs: Box::new(subst_result(rhs, ret)),
        },
        CExpr::Not(inner) => CExpr::Not(Box::new(subst_result(inner, ret))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cfg::{build_cfg, unfold};
    use crate::frontend::{parse, typecheck};

    fn dsa_for_file(name: &str, b: u32) -> Cfg {
        let path = format!("{}/../../corpus/{name}", env!("CARGO_MANIFEST_DIR"));
        let src = std::fs::read_to_string(path).unwrap();
        let g = build_cfg(&typecheck(parse(&src).unwrap()).unwrap());
        to_dsa(&unfold(&g, b).unwrap()).unwrap()
    }

    #[test]
    fn absminus_versions_match_expected_names() {
        let g = dsa_for_file("absminus.mj", 1);
        let dump = g.canonical_dump();
        assert!(dump.contains("k_1=(k_0 + 2)"), "{dump}");
        assert!(dump.contains("~k_1=k_0"), "{dump}");
        assert!(dump.contains("result_1=(j_0 - i_0)"), "{dump}");
        assert!(dump.contains("result_1=(i_0 - j_0)"), "{dump}");
    }

    #[test]
    fn single_assignment_to_param_gets_version_one() {
        let src = "function f(x: int) -> int ensures \\result == 1 {\nx = 1;\nreturn x;\n}";
        let g = build_cfg(&typecheck(parse(src).unwrap()).unwrap());
        let d = to_dsa(&g).unwrap();
        let dump = d.canonical_dump();
        assert!(dump.contains("x_1=1"), "{dump}");
        assert_eq!(d.return_expr.to_string(), "x_1");
    }

    #[test]
    fn minimum_has_junctions_on_all_three_early_exits() {
        let g = dsa_for_file("minimum.mj", 3);
        let dump = g.canonical_dump();
        // exit after k-th check arrives with min_{k-1}, i_{k-1}; merged is
        // version 3 for both
        assert!(dump.contains("~i_3=i_0; ~min_3=min_0"), "{dump}");
        assert!(dump.contains("~i_3=i_1; ~min_3=min_1"), "{dump}");
        assert!(dump.contains("~i_3=i_2; ~min_3=min_2"), "{dump}");
        // postcondition references the join version
        assert!(g.post_expr.to_string().contains("min_3"), "{}", g.post_expr);
    }

    #[test]
    fn dsa_single_assignment_along_every_path() {
        for (name, b) in [
            ("absminus.mj", 1),
            ("minimum.mj", 3),
            ("bubblesort.mj", 4),
            ("sum.mj", 8),
            ("squareroot.mj", 10),
        ] {
            let g = dsa_for_file(name, b);
            check_single_assignment(&g);
        }
    }

    fn check_single_assignment(g: &Cfg) {
        // depth-first over all root-to-post paths, tracking defined versions
        fn walk(g: &Cfg, id: NodeId, defined: &mut Vec<VarRef>, depth: usize) {
            assert!(depth < 10_000, "path too deep");
            match g.node(id) {
                Node::Block(b) => {
                    for a in &b.assigns {
                        assert!(
                            !defined.contains(&a.target),
                            "version {} assigned twice along a path",
                            a.target
                        );
                        defined.push(a.target.clone());
                    }
                    walk(g, b.next, defined, depth + 1);
                    for a in &b.assigns {
                        let pos = defined.iter().rposition(|d| d == &a.target).unwrap();
                        defined.remove(pos);
                    }
                }
                Node::Cond(c) => {
                    walk(g, c.then_to, defined, depth + 1);
                    walk(g, c.else_to, defined, depth + 1);
                }
                Node::Guard(gd) => walk(g, gd.ok_to, defined, depth + 1),
                Node::Post => {}
            }
        }
        walk(g, g.entry, &mut Vec::new(), 0);
    }
}
