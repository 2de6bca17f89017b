//! Cross-module properties over the corpus: the hard/soft partition, path
//! monotonicity under deeper unfolding, report monotonicity in the
//! deviation budget, and the pruning characterization.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use locfaults_core::bmc::Counterexample;
use locfaults_core::cfg::{build_cfg, to_dsa, unfold, Cfg, Node, NodeId};
use locfaults_core::constraints::{ConstraintOrigin, Role};
use locfaults_core::engine::{
    locate, path_csp, propagate, Deviation, EngineConfig, PruneReason,
};
use locfaults_core::frontend::{parse, pretty_print, typecheck, TypedProgram};
use locfaults_core::solver::Domain;

fn corpus_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../corpus")
}

fn load(name: &str) -> TypedProgram {
    let src = std::fs::read_to_string(corpus_dir().join(name)).unwrap();
    typecheck(parse(&src).unwrap()).unwrap()
}

fn graph(name: &str, b: u32) -> Cfg {
    to_dsa(&unfold(&build_cfg(&load(name)), b).unwrap()).unwrap()
}

fn sidecar_ce(name: &str) -> Option<(Counterexample, u32, u32, u32)> {
    let path = corpus_dir().join(name).with_extension("json");
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(path).ok()?).ok()?;
    let ce = Counterexample::from_json(&v.get("ce")?.to_string()).ok()?;
    Some((
        ce,
        v["b"].as_u64()? as u32,
        v.get("b_mcd").and_then(|x| x.as_u64()).unwrap_or(3) as u32,
        v.get("b_mcs").and_then(|x| x.as_u64()).unwrap_or(4) as u32,
    ))
}

fn corpus_sources() -> Vec<String> {
    let mut out: Vec<String> = std::fs::read_dir(corpus_dir())
        .unwrap()
        .filter_map(|e| {
            let p = e.unwrap().path();
            (p.extension().map(|x| x == "mj").unwrap_or(false))
                .then(|| p.file_name().unwrap().to_string_lossy().into_owned())
        })
        .collect();
    out.sort();
    out
}

#[test]
fn pretty_print_round_trips_the_corpus() {
    let mut sources: Vec<PathBuf> = corpus_sources()
        .into_iter()
        .map(|n| corpus_dir().join(n))
        .collect();
    for entry in std::fs::read_dir(corpus_dir().join("bench")).unwrap() {
        let p = entry.unwrap().path();
        if p.extension().map(|x| x == "mj").unwrap_or(false) {
            sources.push(p);
        }
    }
    for path in sources {
        let src = std::fs::read_to_string(&path).unwrap();
        let p1 = parse(&src).unwrap();
        let p2 = parse(&pretty_print(&p1))
            .unwrap_or_else(|e| panic!("{}: reparse failed: {e}", path.display()));
        assert_eq!(p1, p2, "{}: round trip changed the tree", path.display());
    }
}

#[test]
fn soft_constraints_are_exactly_source_assignments() {
    for name in corpus_sources() {
        let Some((ce, b, b_mcd, _)) = sidecar_ce(&name) else { continue };
        let g = graph(&name, b);
        let base = match propagate(&g, &ce, &Deviation::empty()) {
            Ok(t) => t,
            Err(_) => continue,
        };
        let mut csps = vec![path_csp(&g, &ce, &base, &Deviation::empty(), Domain::default()).unwrap()];
        // also audit one deviated-path system per correcting deviation
        let config = EngineConfig { b_mcd, b_mcs: 1, ..Default::default() };
        if let Ok(report) = locate(&g, &ce, &config) {
            for mcd in &report.mcds {
                let conds = mcd
                    .coords
                    .iter()
                    .map(|c| {
                        g.cond_nodes()
                            .find(|(_, node)| node.coord().render() == *c)
                            .map(|(id, _)| id)
                            .unwrap()
                    })
                    .collect();
                let d = Deviation { conds };
                let trace = propagate(&g, &ce, &d).unwrap();
                csps.push(path_csp(&g, &ce, &trace, &d, Domain::default()).unwrap());
            }
        }
        for csp in csps {
            for c in &csp.soft {
                assert_eq!(c.role, Role::Soft);
                assert_eq!(
                    c.origin,
                    ConstraintOrigin::Assignment,
                    "{name}: soft constraint {} is not a source assignment",
                    c.text
                );
                assert!(c.coord.is_some(), "{name}: soft constraint without coordinate");
            }
            for c in &csp.hard {
                assert_ne!(
                    c.origin,
                    ConstraintOrigin::Assignment,
                    "{name}: source assignment {} must be soft",
                    c.text
                );
            }
        }
    }
}

/// All root-to-post paths as branch decision sequences, by coordinate.
fn path_signatures(g: &Cfg) -> BTreeSet<Vec<(String, bool)>> {
    fn walk(
        g: &Cfg,
        id: NodeId,
        current: &mut Vec<(String, bool)>,
        out: &mut BTreeSet<Vec<(String, bool)>>,
    ) {
        match g.node(id) {
            Node::Post => {
                out.insert(current.clone());
            }
            Node::Block(b) => walk(g, b.next, current, out),
            Node::Guard(gd) => walk(g, gd.ok_to, current, out),
            Node::Cond(c) => {
                for (taken, target) in [(true, c.then_to), (false, c.else_to)] {
                    current.push((c.coord().render(), taken));
                    walk(g, target, current, out);
                    current.pop();
                }
            }
        }
    }
    let mut out = BTreeSet::new();
    walk(g, g.entry, &mut Vec::new(), &mut out);
    out
}

#[test]
fn unfolding_paths_inject_into_deeper_unfoldings() {
    for (name, bounds) in [("minimum.mj", vec![1, 2, 3]), ("sum.mj", vec![2, 3, 4])] {
        let mut previous: Option<BTreeSet<Vec<(String, bool)>>> = None;
        for b in bounds {
            let g = graph(name, b);
            let paths = path_signatures(&g);
            if let Some(prev) = &previous {
                // each path of the shallower unfolding continues into the
                // deeper one: it reappears as a prefix (a run that used to
                // end at the overflow guard now faces the fresh condition)
                for p in prev {
                    assert!(
                        paths.iter().any(|q| q.starts_with(p)),
                        "{name}: path {p:?} of b={} has no extension at b={b}",
                        b - 1
                    );
                }
                assert!(paths.len() > prev.len(), "{name}: no new paths at b={b}");
            }
            previous = Some(paths);
        }
    }
}

#[test]
fn reports_are_monotone_in_the_deviation_budget() {
    for name in corpus_sources() {
        let Some((ce, b, _, b_mcs)) = sidecar_ce(&name) else { continue };
        let g = graph(&name, b);
        let mut previous: Option<Vec<Vec<String>>> = None;
        for b_mcd in 0..=3u32 {
            let config = EngineConfig { b_mcd, b_mcs, ..Default::default() };
            let report = match locate(&g, &ce, &config) {
                Ok(r) => r,
                Err(e) => panic!("{name} b_mcd={b_mcd}: {e}"),
            };
            let mcds: Vec<Vec<String>> =
                report.mcds.iter().map(|m| m.coords.clone()).collect();
            if let Some(prev) = &previous {
                assert_eq!(
                    &mcds[..prev.len().min(mcds.len())],
                    &prev[..],
                    "{name}: budget {b_mcd} must extend the budget {} report",
                    b_mcd - 1
                );
            }
            previous = Some(mcds);
        }
    }
}

#[test]
fn mark_pruned_deviations_contain_a_smaller_mark() {
    for name in corpus_sources() {
        let Some((ce, b, _, b_mcs)) = sidecar_ce(&name) else { continue };
        let g = graph(&name, b);
        let config = EngineConfig { b_mcd: 3, b_mcs, ..Default::default() };
        let Ok(report) = locate(&g, &ce, &config) else { continue };
        for pruned in &report.pruned {
            if let PruneReason::Marked { node, mark, size } = &pruned.reason {
                assert!(
                    pruned.coords.contains(node),
                    "{name}: pruned {:?} does not contain its trigger {node}",
                    pruned.coords
                );
                assert!(
                    mark < size,
                    "{name}: mark {mark} must be smaller than the candidate size {size}"
                );
                assert_eq!(*size as usize, pruned.coords.len());
            }
        }
    }
}

#[test]
fn atmost_solving_retracts_exactly_the_failing_assignment() {
    use locfaults_core::solver::{solve_with_atmost, Limits};

    let g = graph("absminus.mj", 1);
    let ce = Counterexample::from_json(r#"{"i":0,"j":1}"#).unwrap();
    let trace = propagate(&g, &ce, &Deviation::empty()).unwrap();
    let csp = path_csp(&g, &ce, &trace, &Deviation::empty(), Domain::default()).unwrap();
    let limits = Limits::default();

    // k = 0 leaves nothing retractable: the full system is infeasible
    assert_eq!(solve_with_atmost(&csp, 0, &[], &limits).unwrap(), None);

    // k = 1 finds a model retracting exactly the line-15 assignment
    let values = solve_with_atmost(&csp, 1, &[], &limits)
        .unwrap()
        .expect("one retraction suffices");
    let retracted: Vec<String> = values
        .iter()
        .enumerate()
        .filter(|(_, on)| !**on)
        .map(|(i, _)| csp.soft[i].rendered_coord())
        .collect();
    assert_eq!(retracted, vec!["15".to_string()]);

    // an infeasible hard frame stays infeasible at any k
    let mut hard_core = csp.clone();
    let clash = hard_core.hard[0].clone();
    let mut negated = clash.clone();
    negated.formula = clash.formula.negate();
    hard_core.hard.push(negated);
    let n = hard_core.soft.len() as u32;
    assert_eq!(solve_with_atmost(&hard_core, n, &[], &limits).unwrap(), None);
}

#[test]
fn statement_lines_exist_in_the_source() {
    fn walk(stmts: &[locfaults_core::frontend::Stmt], max: u32) {
        for s in stmts {
            assert!(s.line >= 1 && s.line <= max, "line {} out of range", s.line);
            match &s.kind {
                locfaults_core::frontend::StmtKind::If { then_body, else_body, .. } => {
                    walk(then_body, max);
                    walk(else_body, max);
                }
                locfaults_core::frontend::StmtKind::While { body, .. } => walk(body, max),
                _ => {}
            }
        }
    }
    for name in corpus_sources() {
        let src = std::fs::read_to_string(corpus_dir().join(&name)).unwrap();
        let lines = src.lines().count() as u32;
        let p = parse(&src).unwrap();
        walk(&p.body, lines);
    }
}

#[test]
fn csp_dump_lists_roles_and_coordinates() {
    let g = graph("absminus.mj", 1);
    let ce = Counterexample::from_json(r#"{"i":0,"j":1}"#).unwrap();
    let trace = propagate(&g, &ce, &Deviation::empty()).unwrap();
    let csp = path_csp(&g, &ce, &trace, &Deviation::empty(), Domain::default()).unwrap();
    let dump = csp.dump();
    assert!(dump.contains("hard - : i_0 == 0"), "{dump}");
    assert!(dump.contains("soft 9 : k_1 = (k_0 + 2)"), "{dump}");
    assert!(dump.contains("soft 15 : result_1 = (i_0 - j_0)"), "{dump}");
}
