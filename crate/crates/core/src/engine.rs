//! The localization search: depth-first exploration of the unfolded DSA
//! graph driven by concrete counterexample propagation.
//!
//! Deviating a condition takes the branch opposite to the concrete
//! evaluation at that point; a deviation set whose propagation satisfies the
//! postcondition and that contains no previously found correcting set is a
//! Minimal Correction Deviation. For the counterexample path, and for the
//! prefix of each MCD up to its last deviated condition, correction subsets
//! of the associated constraint system name the suspicious assignments.
//!
//! Array indices are concretized along the propagated path before
//! translation: the system keeps the read/written cell symbolic in value but
//! pins which cell the statement touched, matching statement-level
//! suspicion.

use std::collections::{BTreeSet, HashMap};
use std::time::Instant;

use thiserror::Error;

use crate::bmc::Counterexample;
use crate::cfg::{Assign, CExpr, Cfg, CondNode, Node, NodeId, VarRef};
use crate::constraints::{Constraint, CspBuilder};
use crate::frontend::BinOp;
use crate::mcs::{mcs_enumerate, Mcs, McsError};
use crate::solver::{Domain, Limits};

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("the supplied input is not a counterexample: {0}")]
    NotACounterexample(String),
    #[error("propagation crossed the loop-unfolding overflow guard")]
    UnreachableHit,
    #[error("propagation failed: {0}")]
    Propagation(String),
    #[error(transparent)]
    Translate(#[from] crate::constraints::TranslateError),
    #[error(transparent)]
    Solver(#[from] crate::solver::SolverError),
}

/// An ordered set of condition nodes whose branches are flipped relative to
/// concrete propagation, in path order.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Deviation {
    pub conds: Vec<NodeId>,
}

impl Deviation {
    pub fn empty() -> Self {
        Deviation::default()
    }

    pub fn as_set(&self) -> BTreeSet<NodeId> {
        self.conds.iter().copied().collect()
    }
}

/// Concrete propagation record of one path.
#[derive(Debug, Clone)]
pub struct PathTrace {
    pub visited: Vec<NodeId>,
    /// Conditions evaluated along the path with the branch actually taken
    /// (after flips).
    pub decisions: Vec<(NodeId, bool)>,
    /// Assignments executed, in order.
    pub executed: Vec<(NodeId, Assign)>,
    /// Final valuation of every versioned scalar and array.
    pub final_ints: HashMap<(String, u32), i64>,
    pub final_arrays: HashMap<(String, u32), Vec<i64>>,
    pub result: i64,
    pub post_verdict: bool,
}

/// Why a candidate deviation was set aside.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PruneReason {
    /// Propagation reached the postcondition but it still fails.
    NonCorrecting,
    /// Contains an already found correcting deviation.
    NonMinimal { subsumed_by: Vec<String> },
    /// Contains a node whose mark is smaller than the candidate size.
    Marked { node: String, mark: u32, size: u32 },
    /// The path crossed the unfolding overflow guard or hit a runtime error.
    Abandoned { why: String },
}

#[derive(Debug, Clone)]
pub struct PrunedDeviation {
    pub coords: Vec<String>,
    pub reason: PruneReason,
}

#[derive(Debug, Clone)]
pub struct McdReport {
    pub coords: Vec<String>,
    pub mcss: Vec<Mcs>,
}

#[derive(Debug, Clone, Default)]
pub struct LocalizationReport {
    pub ce_path_mcss: Vec<Mcs>,
    pub mcds: Vec<McdReport>,
    pub pruned: Vec<PrunedDeviation>,
    /// Deviations whose propagation completed (reached the postcondition).
    pub explored_deviations: usize,
    pub pretreatment_secs: f64,
    pub localization_secs: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct EngineConfig {
    pub b_mcd: u32,
    pub b_mcs: u32,
    pub marking: bool,
    pub domain: Domain,
    pub limits: Limits,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig {
            b_mcd: 3,
            b_mcs: 4,
            marking: true,
            domain: Domain::default(),
            limits: Limits::default(),
        }
    }
}

// ---------------------------------------------------------------------------
// concrete propagation
// ---------------------------------------------------------------------------

struct Env {
    ints: HashMap<(String, u32), i64>,
    arrays: HashMap<(String, u32), Vec<i64>>,
}

impl Env {
    fn from_ce(g: &Cfg, ce: &Counterexample) -> Result<Env, EngineError> {
        let mut env = Env { ints: HashMap::new(), arrays: HashMap::new() };
        for (name, len) in &g.params {
            match len {
                None => {
                    let v = ce.ints.get(name).copied().ok_or_else(|| {
                        EngineError::NotACounterexample(format!("missing binding for `{name}`"))
                    })?;
                    env.ints.insert((name.clone(), 0), v);
                }
                Some(len) => {
                    let values = ce.arrays.get(name).cloned().ok_or_else(|| {
                        EngineError::NotACounterexample(format!("missing binding for `{name}`"))
                    })?;
                    if values.len() != *len {
                        return Err(EngineError::NotACounterexample(format!(
                            "`{name}` must have length {len}"
                        )));
                    }
                    env.arrays.insert((name.clone(), 0), values);
                }
            }
        }
        Ok(env)
    }

    fn int(&self, r: &VarRef) -> Result<i64, EngineError> {
        let key = (r.base.clone(), r.version.expect("DSA"));
        self.ints
            .get(&key)
            .copied()
            .ok_or_else(|| EngineError::Propagation(format!("read of unassigned `{r}`")))
    }

    fn array(&self, r: &VarRef) -> Result<&Vec<i64>, EngineError> {
        let key = (r.base.clone(), r.version.expect("DSA"));
        self.arrays
            .get(&key)
            .ok_or_else(|| EngineError::Propagation(format!("read of unassigned array `{r}`")))
    }

    fn eval(&self, e: &CExpr) -> Result<i64, EngineError> {
        Ok(match e {
            CExpr::Const(n) => *n,
            CExpr::Var(v) => self.int(v)?,
            CExpr::Index { array, index } => {
                let idx = self.eval(index)?;
                let arr = self.array(array)?;
                if idx < 0 || idx as usize >= arr.len() {
                    return Err(EngineError::Propagation(format!(
                        "index {idx} out of bounds for `{}`",
                        array.base
                    )));
                }
                arr[idx as usize]
            }
            CExpr::Bin { op, .. } if op.is_arith() => {
                let (a, b) = match e {
                    CExpr::Bin { lhs, rhs, .. } => (self.eval(lhs)?, self.eval(rhs)?),
                    _ => unreachable!(),
                };
                match op {
                    BinOp::Add => a.wrapping_add(b),
                    BinOp::Sub => a.wrapping_sub(b),
                    BinOp::Mul => a.wrapping_mul(b),
                    _ => unreachable!(),
                }
            }
            other => i64::from(self.eval_bool(other)?),
        })
    }

    fn eval_bool(&self, e: &CExpr) -> Result<bool, EngineError> {
        Ok(match e {
            CExpr::Bin { op, lhs, rhs } if op.is_cmp() => {
                let a = self.eval(lhs)?;
                let b = self.eval(rhs)?;
                match op {
                    BinOp::Eq => a == b,
                    BinOp::Ne => a != b,
                    BinOp::Lt => a < b,
                    BinOp::Le => a <= b,
                    BinOp::Gt => a > b,
                    BinOp::Ge => a >= b,
                    _ => unreachable!(),
                }
            }
            CExpr::Bin { op: BinOp::And, lhs, rhs } => {
                self.eval_bool(lhs)? && self.eval_bool(rhs)?
            }
            CExpr::Bin { op: BinOp::Or, lhs, rhs } => {
                self.eval_bool(lhs)? || self.eval_bool(rhs)?
            }
            CExpr::Not(inner) => !self.eval_bool(inner)?,
            other => {
                return Err(EngineError::Propagation(format!(
                    "`{other}` in boolean position"
                )))
            }
        })
    }

    fn execute(&mut self, a: &Assign) -> Result<(), EngineError> {
        let version = a.target.version.expect("DSA");
        match &a.index {
            Some(index) => {
                let idx = self.eval(index)?;
                let prev = a.prev_array.as_ref().expect("array write has prev");
                let mut arr = self.array(prev)?.clone();
                if idx < 0 || idx as usize >= arr.len() {
                    return Err(EngineError::Propagation(format!(
                        "store index {idx} out of bounds for `{}`",
                        a.target.base
                    )));
                }
                let value = self.eval(&a.value)?;
                arr[idx as usize] = value;
                self.arrays.insert((a.target.base.clone(), version), arr);
            }
            None => {
                // whole-array copy or scalar
                if let CExpr::Var(src) = &a.value {
                    let src_key = (src.base.clone(), src.version.expect("DSA"));
                    if self.arrays.contains_key(&src_key) {
                        let arr = self.arrays[&src_key].clone();
                        self.arrays.insert((a.target.base.clone(), version), arr);
                        return Ok(());
                    }
                }
                let v = match self.eval(&a.value) {
                    Ok(v) => v,
                    // a junction can copy a branch-local variable on a path
                    // that never declared it; the value is dead there
                    Err(_) if a.origin == crate::cfg::AssignOrigin::Junction => 0,
                    Err(e) => return Err(e),
                };
                self.ints.insert((a.target.base.clone(), version), v);
            }
        }
        Ok(())
    }
}

/// Propagate `ce` concretely through `g`, flipping exactly the conditions in
/// `d`. Conditions not in `d` follow their concrete evaluation; assignments
/// always execute concretely.
pub fn propagate(g: &Cfg, ce: &Counterexample, d: &Deviation) -> Result<PathTrace, EngineError> {
    assert!(
        g.is_dsa && g.is_loop_free(),
        "propagate needs an unfolded DSA graph"
    );
    let flips = d.as_set();
    let mut env = Env::from_ce(g, ce)?;
    let mut visited = Vec::new();
    let mut decisions = Vec::new();
    let mut executed = Vec::new();
    let mut node = g.entry;
    let mut steps = 0usize;
    loop {
        steps += 1;
        if steps > g.nodes.len() + 1 {
            return Err(EngineError::Propagation("path longer than the graph".into()));
        }
        visited.push(node);
        match g.node(node) {
            Node::Block(b) => {
                for a in &b.assigns {
                    env.execute(a)?;
                    executed.push((node, a.clone()));
                }
                node = b.next;
            }
            Node::Cond(c) => {
                let concrete = env.eval_bool(&c.expr)?;
                let taken = if flips.contains(&node) { !concrete } else { concrete };
                decisions.push((node, taken));
                node = if taken { c.then_to } else { c.else_to };
            }
            Node::Guard(gd) => {
                if env.eval_bool(&gd.expr)? {
                    return Err(EngineError::UnreachableHit);
                }
                node = gd.ok_to;
            }
            Node::Post => break,
        }
    }
    let result = env.eval(&g.return_expr)?;
    let post_verdict = env.eval_bool(&g.post_expr)?;
    Ok(PathTrace {
        visited,
        decisions,
        executed,
        final_ints: env.ints,
        final_arrays: env.arrays,
        result,
        post_verdict,
    })
}

// ---------------------------------------------------------------------------
// path constraint systems
// ---------------------------------------------------------------------------

/// Replace array-read and store indices by the values they took along the
/// propagated path.
fn concretize_indices(e: &CExpr, env: &Env) -> Result<CExpr, EngineError> {
    Ok(match e {
        CExpr::Const(_) | CExpr::Var(_) => e.clone(),
        CExpr::Index { array, index } => {
            let idx = env.eval(index)?;
            CExpr::Index { array: array.clone(), index: Box::new(CExpr::Const(idx)) }
        }
        CExpr::Bin { op, lhs, rhs } => CExpr::Bin {
            op: *op,
            lhs: Box::new(concretize_indices(lhs, env)?),
            rhs: Box::new(concretize_indices(rhs, env)?),
        },
        CExpr::Not(inner) => CExpr::Not(Box::new(concretize_indices(inner, env)?)),
    })
}

/// The constraint system of a propagated path, per the hard/soft partition:
/// counterexample bindings hard, source assignments soft, junction copies
/// hard, plus either the postcondition (empty deviation) or the asserted
/// deviated branch condition at the last flipped node.
pub fn path_csp(
    g: &Cfg,
    ce: &Counterexample,
    trace: &PathTrace,
    d: &Deviation,
    domain: Domain,
) -> Result<crate::constraints::Csp, EngineError> {
    let mut builder = CspBuilder::new(&g.array_lengths, domain);
    for c in builder.translate_ce(ce, &g.params)? {
        builder.push(c);
    }

    // replay the environment to concretize indices statement by statement
    let mut env = Env::from_ce(g, ce)?;
    let mut constraints: Vec<(NodeId, Constraint)> = Vec::new();
    for (node, assign) in &trace.executed {
        let mut a = assign.clone();
        a.value = concretize_indices(&a.value, &env)?;
        if let Some(idx) = &a.index {
            a.index = Some(concretize_indices(idx, &env)?);
        }
        env.execute(assign)?;
        constraints.push((*node, builder.translate_assign(&a)?));
    }

    match d.conds.last().copied() {
        None => {
            for (_, c) in constraints {
                builder.push(c);
            }
            for c in builder.translate_post(&g.post_expr)? {
                builder.push(c);
            }
        }
        Some(last) => {
            // assignments strictly before the last deviated condition
            let cut = trace
                .visited
                .iter()
                .position(|n| *n == last)
                .expect("deviated condition on path");
            let before: BTreeSet<NodeId> = trace.visited[..cut].iter().copied().collect();
            for (node, c) in constraints {
                if before.contains(&node) {
                    builder.push(c);
                }
            }
            // the deviated branch condition, concretized against the state
            // at the condition
            let taken = trace
                .decisions
                .iter()
                .find(|(n, _)| *n == last)
                .map(|(_, t)| *t)
                .expect("deviated condition was decided");
            let cond = match g.node(last) {
                Node::Cond(c) => c,
                _ => unreachable!("deviations only contain conditions"),
            };
            let mut env = Env::from_ce(g, ce)?;
            for (node, assign) in &trace.executed {
                if before.contains(node) {
                    env.execute(assign)?;
                }
            }
            let concretized = CondNode {
                expr: concretize_indices(&cond.expr, &env)?,
                ..cond.clone()
            };
            let c = builder.translate_cond(&concretized, taken)?;
            builder.push(c);
        }
    }
    Ok(builder.finish())
}

// ---------------------------------------------------------------------------
// the search
// ---------------------------------------------------------------------------

/// Run the full localization for a failing input.
pub fn locate(
    g: &Cfg,
    ce: &Counterexample,
    config: &EngineConfig,
) -> Result<LocalizationReport, EngineError> {
    let started = Instant::now();
    if let Some(req) = &g.requires_expr {
        let env = Env::from_ce(g, ce)?;
        if !env.eval_bool(req)? {
            return Err(EngineError::NotACounterexample(
                "input violates the requires clause".into(),
            ));
        }
    }
    let base = propagate(g, ce, &Deviation::empty())?;
    if base.post_verdict {
        return Err(EngineError::NotACounterexample(
            "the program satisfies its postcondition on this input".into(),
        ));
    }

    let mut report = LocalizationReport::default();

    // step 0: correction subsets of the counterexample path
    let csp = path_csp(g, ce, &base, &Deviation::empty(), config.domain)?;
    report.ce_path_mcss = run_mcs(&csp, config)?;

    // steps 1..=b_mcd: deviations of exactly k conditions
    let mut marks: HashMap<NodeId, u32> = HashMap::new();
    let mut found_correcting: Vec<BTreeSet<NodeId>> = Vec::new();
    for k in 1..=config.b_mcd {
        let mut search = DeviationSearch {
            g,
            ce,
            config,
            k,
            marks: &mut marks,
            found_correcting: &mut found_correcting,
            report: &mut report,
        };
        let mut env = Env::from_ce(g, ce)?;
        search.dfs(g.entry, &mut env, &mut Vec::new(), u32::MAX)?;
    }

    report.localization_secs = started.elapsed().as_secs_f64();
    Ok(report)
}

fn run_mcs(csp: &crate::constraints::Csp, config: &EngineConfig) -> Result<Vec<Mcs>, EngineError> {
    match mcs_enumerate(csp, config.b_mcs, &config.limits) {
        Ok(mcss) => Ok(mcss),
        // a satisfiable deviated-path system, or one whose hard frame is
        // already contradictory, has no assignment-level suspects
        Err(McsError::NotInfeasible) | Err(McsError::HardCoreInfeasible) => Ok(Vec::new()),
        Err(McsError::Solver(e)) => Err(EngineError::Solver(e)),
        Err(McsError::OracleTooLarge(_)) => unreachable!("enumeration has no size cap"),
    }
}

struct DeviationSearch<'a> {
    g: &'a Cfg,
    ce: &'a Counterexample,
    config: &'a EngineConfig,
    k: u32,
    marks: &'a mut HashMap<NodeId, u32>,
    found_correcting: &'a mut Vec<BTreeSet<NodeId>>,
    report: &'a mut LocalizationReport,
}

impl<'a> DeviationSearch<'a> {
    fn coord_of(&self, id: NodeId) -> String {
        match self.g.node(id) {
            Node::Cond(c) => c.coord().render(),
            _ => unreachable!("deviations only contain conditions"),
        }
    }

    fn coords_of(&self, flips: &[NodeId]) -> Vec<String> {
        flips.iter().map(|id| self.coord_of(*id)).collect()
    }

    /// Walk the graph concretely; at each condition explore the deviated
    /// branch first, then the concrete branch, so flips are discovered in
    /// source order along the path.
    fn dfs(
        &mut self,
        node: NodeId,
        env: &mut Env,
        flips: &mut Vec<NodeId>,
        min_mark: u32,
    ) -> Result<(), EngineError> {
        match self.g.node(node) {
            Node::Post => {
                if flips.len() as u32 == self.k {
                    self.complete(flips)?;
                }
                Ok(())
            }
            Node::Guard(gd) => {
                let overflow = match env.eval_bool(&gd.expr) {
                    Ok(v) => v,
                    Err(e) => return self.abandon(flips, e),
                };
                if overflow {
                    if !flips.is_empty() {
                        self.report.pruned.push(PrunedDeviation {
                            coords: self.coords_of(flips),
                            reason: PruneReason::Abandoned {
                                why: "crossed the unfolding overflow guard".into(),
                            },
                        });
                        return Ok(());
                    }
                    return Err(EngineError::UnreachableHit);
                }
                self.dfs(gd.ok_to, env, flips, min_mark)
            }
            Node::Block(b) => {
                let mut undo_ints = Vec::new();
                let mut undo_arrays = Vec::new();
                for a in &b.assigns {
                    let version = a.target.version.expect("DSA");
                    let key = (a.target.base.clone(), version);
                    let is_array_write = a.index.is_some()
                        || matches!(&a.value, CExpr::Var(src)
                            if env.arrays.contains_key(&(src.base.clone(), src.version.expect("DSA"))));
                    if is_array_write {
                        undo_arrays.push((key.clone(), env.arrays.get(&key).cloned()));
                    } else {
                        undo_ints.push((key.clone(), env.ints.get(&key).copied()));
                    }
                    if let Err(e) = env.execute(a) {
                        self.rollback(env, undo_ints, undo_arrays);
                        if !flips.is_empty() {
                            // runtime error on a deviated path: abandon it
                            self.report.pruned.push(PrunedDeviation {
                                coords: self.coords_of(flips),
                                reason: PruneReason::Abandoned { why: e.to_string() },
                            });
                            return Ok(());
                        }
                        return Err(e);
                    }
                }
                let r = self.dfs(b.next, env, flips, min_mark);
                self.rollback(env, undo_ints, undo_arrays);
                r
            }
            Node::Cond(c) => {
                let concrete = match env.eval_bool(&c.expr) {
                    Ok(v) => v,
                    Err(e) => return self.abandon(flips, e),
                };
                // deviate first
                if (flips.len() as u32) < self.k {
                    flips.push(node);
                    let size = flips.len() as u32;
                    let node_mark = self.marks.get(&node).copied().unwrap_or(u32::MAX);
                    let new_min = min_mark.min(node_mark);
                    if self.config.marking && new_min < size {
                        let trigger = *flips
                            .iter()
                            .find(|n| {
                                self.marks.get(*n).copied().unwrap_or(u32::MAX) < size
                            })
                            .expect("some mark triggered the prune");
                        self.report.pruned.push(PrunedDeviation {
                            coords: self.coords_of(flips),
                            reason: PruneReason::Marked {
                                node: self.coord_of(trigger),
                                mark: self.marks[&trigger],
                                size,
                            },
                        });
                    } else {
                        let target = if concrete { c.else_to } else { c.then_to };
                        self.dfs(target, env, flips, new_min)?;
                    }
                    flips.pop();
                }
                // continue along the concrete branch
                let target = if concrete { c.then_to } else { c.else_to };
                self.dfs(target, env, flips, min_mark)
            }
        }
    }

    /// A runtime error on a deviated path abandons that path; on the
    /// concrete path it is a real failure.
    fn abandon(&mut self, flips: &[NodeId], e: EngineError) -> Result<(), EngineError> {
        if flips.is_empty() {
            return Err(e);
        }
        self.report.pruned.push(PrunedDeviation {
            coords: self.coords_of(flips),
            reason: PruneReason::Abandoned { why: e.to_string() },
        });
        Ok(())
    }

    fn rollback(
        &self,
        env: &mut Env,
        undo_ints: Vec<((String, u32), Option<i64>)>,
        undo_arrays: Vec<((String, u32), Option<Vec<i64>>)>,
    ) {
        for (key, old) in undo_ints.into_iter().rev() {
            match old {
                Some(v) => env.ints.insert(key, v),
                None => env.ints.remove(&key),
            };
        }
        for (key, old) in undo_arrays.into_iter().rev() {
            match old {
                Some(v) => env.arrays.insert(key, v),
                None => env.arrays.remove(&key),
            };
        }
    }

    /// A path with exactly `k` flips reached the postcondition.
    fn complete(&mut self, flips: &[NodeId]) -> Result<(), EngineError> {
        self.report.explored_deviations += 1;
        let deviation = Deviation { conds: flips.to_vec() };
        let trace = propagate(self.g, self.ce, &deviation)?;
        let coords = self.coords_of(flips);
        if !trace.post_verdict {
            self.report.pruned.push(PrunedDeviation {
                coords,
                reason: PruneReason::NonCorrecting,
            });
            return Ok(());
        }
        let as_set = deviation.as_set();
        if let Some(sub) = self
            .found_correcting
            .iter()
            .find(|prev| prev.is_subset(&as_set))
        {
            let subsumed_by: Vec<String> = sub.iter().map(|id| self.coord_of(*id)).collect();
            self.found_correcting.push(as_set);
            self.report.pruned.push(PrunedDeviation {
                coords,
                reason: PruneReason::NonMinimal { subsumed_by },
            });
            return Ok(());
        }
        // a new MCD
        let csp = path_csp(self.g, self.ce, &trace, &deviation, self.config.domain)?;
        let mcss = run_mcs(&csp, self.config)?;
        self.report.mcds.push(McdReport { coords, mcss });
        self.found_correcting.push(as_set);
        if self.config.marking {
            let last = *flips.last().expect("non-empty deviation");
            let entry = self.marks.entry(last).or_insert(self.k);
            *entry = (*entry).min(self.k);
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cfg::{build_cfg, to_dsa, unfold};
    use crate::frontend::{parse, typecheck};

    fn pipeline(name: &str, b: u32) -> Cfg {
        let path = format!("{}/../../corpus/{name}", env!("CARGO_MANIFEST_DIR"));
        let src = std::fs::read_to_string(path).unwrap();
        let p = typecheck(parse(&src).unwrap()).unwrap();
        to_dsa(&unfold(&build_cfg(&p), b).unwrap()).unwrap()
    }

    fn ce(pairs: &[(&str, i64)]) -> Counterexample {
        Counterexample {
            ints: pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
            arrays: Default::default(),
        }
    }

    fn cond_at(g: &Cfg, line: u32) -> NodeId {
        g.cond_nodes()
            .find(|(_, c)| c.line == line)
            .map(|(id, _)| id)
            .unwrap()
    }

    #[test]
    fn absminus_counterexample_path() {
        let g = pipeline("absminus.mj", 1);
        let t = propagate(&g, &ce(&[("i", 0), ("j", 1)]), &Deviation::empty()).unwrap();
        assert_eq!(t.result, -1);
        assert!(!t.post_verdict);
    }

    #[test]
    fn absminus_deviations_match_expected_verdicts() {
        let g = pipeline("absminus.mj", 1);
        let input = ce(&[("i", 0), ("j", 1)]);
        // deviating the second condition (line 11) corrects the run
        let d11 = Deviation { conds: vec![cond_at(&g, 11)] };
        assert!(propagate(&g, &input, &d11).unwrap().post_verdict);
        // deviating the first condition (line 8) does not
        let d8 = Deviation { conds: vec![cond_at(&g, 8)] };
        assert!(!propagate(&g, &input, &d8).unwrap().post_verdict);
    }

    #[test]
    fn locate_rejects_passing_input() {
        let g = pipeline("absminus.mj", 1);
        let err = locate(&g, &ce(&[("i", 5), ("j", 1)]), &EngineConfig::default()).unwrap_err();
        assert!(matches!(err, EngineError::NotACounterexample(_)));
    }

    #[test]
    fn absminus_localization_reproduces_expected_sets() {
        let g = pipeline("absminus.mj", 1);
        let config = EngineConfig { b_mcd: 2, b_mcs: 3, ..Default::default() };
        let report = locate(&g, &ce(&[("i", 0), ("j", 1)]), &config).unwrap();

        // counterexample path: one MCS, the line-15 assignment
        let ce_sets: Vec<Vec<String>> = report
            .ce_path_mcss
            .iter()
            .map(|m| m.coords.clone())
            .collect();
        assert_eq!(ce_sets, vec![vec!["15".to_string()]]);

        // exactly one MCD, the line-11 condition, with MCSs {7} and {9}
        assert_eq!(report.mcds.len(), 1);
        assert_eq!(report.mcds[0].coords, vec!["11".to_string()]);
        let mcd_sets: Vec<Vec<String>> = report.mcds[0]
            .mcss
            .iter()
            .map(|m| m.coords.clone())
            .collect();
        assert_eq!(mcd_sets, vec![vec!["7".to_string()], vec!["9".to_string()]]);

        // the line-8 deviation is recorded as non-correcting
        assert!(report
            .pruned
            .iter()
            .any(|p| p.coords == vec!["8".to_string()]
                && p.reason == PruneReason::NonCorrecting));
        // {8, 11} is not among the MCDs
        assert!(!report
            .mcds
            .iter()
            .any(|m| m.coords == vec!["8".to_string(), "11".to_string()]));
    }

    #[test]
    fn budget_zero_only_analyzes_the_ce_path() {
        let g = pipeline("absminus.mj", 1);
        let config = EngineConfig { b_mcd: 0, ..Default::default() };
        let report = locate(&g, &ce(&[("i", 0), ("j", 1)]), &config).unwrap();
        assert!(report.mcds.is_empty());
        assert_eq!(report.explored_deviations, 0);
        assert!(!report.ce_path_mcss.is_empty());
    }

    #[test]
    fn minimum_localization_matches_expected_coordinates() {
        let g = pipeline("minimum.mj", 3);
        let ce = Counterexample {
            ints: Default::default(),
            arrays: std::iter::once(("tab".to_string(), vec![3, 2, 1, 0])).collect(),
        };
        let config = EngineConfig { b_mcd: 1, b_mcs: 4, ..Default::default() };
        let report = locate(&g, &ce, &config).unwrap();

        let ce_sets: Vec<Vec<String>> = report
            .ce_path_mcss
            .iter()
            .map(|m| m.coords.clone())
            .collect();
        assert_eq!(ce_sets, vec![vec!["9:2.11".to_string()]]);

        assert_eq!(report.mcds.len(), 1);
        assert_eq!(report.mcds[0].coords, vec!["9:3".to_string()]);
        let mcd_sets: Vec<Vec<String>> = report.mcds[0]
            .mcss
            .iter()
            .map(|m| m.coords.clone())
            .collect();
        assert_eq!(
            mcd_sets,
            vec![
                vec!["8".to_string()],
                vec!["9:1.13".to_string()],
                vec!["9:2.13".to_string()]
            ]
        );
    }
}
