//! Finite-domain constraint solver.
//!
//! Complete depth-first search over integer interval domains with
//! bounds-consistency propagation: linear comparisons, products
//! (`z = x*y`), array element reads/writes, boolean combinations,
//! reification, and an at-most-k cardinality propagator over indicator
//! variables. Variable order is first-fail (smallest domain), values are
//! tried lowest-first, and nothing restarts, so runs are deterministic.
//!
//! Propagation only ever narrows interval bounds and never removes a value
//! that participates in a solution; completeness comes from the search
//! labeling every variable.

mod propagate;

use thiserror::Error;

use crate::constraints::Csp;

/// Index of a solver variable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct VarId(pub u32);

impl VarId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// Inclusive integer interval domain.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Domain {
    pub lo: i64,
    pub hi: i64,
}

/// Default analysis interval; all corpus values fit comfortably.
pub const DEFAULT_DOMAIN: Domain = Domain { lo: -100_000, hi: 100_000 };

impl Default for Domain {
    fn default() -> Self {
        DEFAULT_DOMAIN
    }
}

impl Domain {
    pub fn new(lo: i64, hi: i64) -> Self {
        assert!(lo <= hi, "empty domain [{lo}, {hi}]");
        Domain { lo, hi }
    }

    pub fn singleton(v: i64) -> Self {
        Domain { lo: v, hi: v }
    }

    pub fn boolean() -> Self {
        Domain { lo: 0, hi: 1 }
    }
}

/// Linear expression `sum(coef * var) + constant`.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct LinExpr {
    pub terms: Vec<(i64, VarId)>,
    pub constant: i64,
}

impl LinExpr {
    pub fn constant(c: i64) -> Self {
        LinExpr { terms: Vec::new(), constant: c }
    }

    pub fn var(v: VarId) -> Self {
        LinExpr { terms: vec![(1, v)], constant: 0 }
    }

    pub fn sub(mut self, other: &LinExpr) -> LinExpr {
        for (c, v) in &other.terms {
            self.terms.push((-c, *v));
        }
        self.constant -= other.constant;
        self.normalize()
    }

    pub fn add(mut self, other: &LinExpr) -> LinExpr {
        for (c, v) in &other.terms {
            self.terms.push((*c, *v));
        }
        self.constant += other.constant;
        self.normalize()
    }

    pub fn scale(mut self, k: i64) -> LinExpr {
        for (c, _) in &mut self.terms {
            *c *= k;
        }
        self.constant *= k;
        self
    }

    fn normalize(mut self) -> LinExpr {
        self.terms.sort_by_key(|(_, v)| *v);
        let mut merged: Vec<(i64, VarId)> = Vec::with_capacity(self.terms.len());
        for (c, v) in self.terms {
            match merged.last_mut() {
                Some((mc, mv)) if *mv == v => *mc += c,
                _ => merged.push((c, v)),
            }
        }
        merged.retain(|(c, _)| *c != 0);
        self.terms = merged;
        self
    }

    /// Exactly one unknown variable with coefficient 1 and no constant?
    pub fn as_var(&self) -> Option<VarId> {
        match (self.terms.as_slice(), self.constant) {
            ([(1, v)], 0) => Some(*v),
            _ => None,
        }
    }
}

/// Comparison operators over `LinExpr ⋈ 0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CmpOp {
    Eq,
    Ne,
    Le,
    Lt,
    Ge,
    Gt,
}

impl CmpOp {
    pub fn negate(self) -> CmpOp {
        match self {
            CmpOp::Eq => CmpOp::Ne,
            CmpOp::Ne => CmpOp::Eq,
            CmpOp::Le => CmpOp::Gt,
            CmpOp::Lt => CmpOp::Ge,
            CmpOp::Ge => CmpOp::Lt,
            CmpOp::Gt => CmpOp::Le,
        }
    }

    pub fn holds(self, v: i64) -> bool {
        match self {
            CmpOp::Eq => v == 0,
            CmpOp::Ne => v != 0,
            CmpOp::Le => v <= 0,
            CmpOp::Lt => v < 0,
            CmpOp::Ge => v >= 0,
            CmpOp::Gt => v > 0,
        }
    }
}

/// Constraint formulas. `Product` and the element atoms operate on plain
/// variables; translation introduces auxiliaries for nested expressions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Formula {
    /// `lin ⋈ 0`
    Cmp { op: CmpOp, lin: LinExpr },
    /// `z = x * y`
    Product { z: VarId, x: VarId, y: VarId },
    /// `out = cells[index]`; also constrains `index` into bounds.
    ElementRead {
        out: VarId,
        cells: Vec<VarId>,
        index: VarId,
    },
    /// `out = store(base, index, value)` element-wise.
    ElementWrite {
        out: Vec<VarId>,
        base: Vec<VarId>,
        index: VarId,
        value: VarId,
    },
    And(Vec<Formula>),
    Or(Vec<Formula>),
    Not(Box<Formula>),
    /// `var ↔ inner`; `inner_neg` is the pushed-in negation of `inner`.
    Reified {
        var: VarId,
        inner: Box<Formula>,
        inner_neg: Box<Formula>,
    },
    /// At most `k` of `vars` (all 0/1) are 0.
    AtMostFalse { vars: Vec<VarId>, k: u32 },
}

impl Formula {
    pub const TRUE: Formula = Formula::Cmp { op: CmpOp::Eq, lin: LinExpr { terms: Vec::new(), constant: 0 } };

    /// Push negation inward. Element and product atoms stay wrapped in
    /// `Not` (the translator never negates them; evaluation still works).
    pub fn negate(&self) -> Formula {
        match self {
            Formula::Cmp { op, lin } => Formula::Cmp { op: op.negate(), lin: lin.clone() },
            Formula::And(fs) => Formula::Or(fs.iter().map(|f| f.negate()).collect()),
            Formula::Or(fs) => Formula::And(fs.iter().map(|f| f.negate()).collect()),
            Formula::Not(inner) => (**inner).clone(),
            other => Formula::Not(Box::new(other.clone())),
        }
    }

    /// Visit every variable the formula mentions (with repeats).
    pub(crate) fn for_each_var(&self, f: &mut impl FnMut(VarId)) {
        match self {
            Formula::Cmp { lin, .. } => lin.terms.iter().for_each(|(_, v)| f(*v)),
            Formula::Product { z, x, y } => {
                f(*z);
                f(*x);
                f(*y);
            }
            Formula::ElementRead { out, cells, index } => {
                f(*out);
                f(*index);
                cells.iter().for_each(|c| f(*c));
            }
            Formula::ElementWrite { out, base, index, value } => {
                f(*index);
                f(*value);
                out.iter().for_each(|c| f(*c));
                base.iter().for_each(|c| f(*c));
            }
            Formula::And(fs) | Formula::Or(fs) => fs.iter().for_each(|g| g.for_each_var(f)),
            Formula::Not(inner) => inner.for_each_var(f),
            Formula::Reified { var, inner, .. } => {
                f(*var);
                inner.for_each_var(f);
            }
            Formula::AtMostFalse { vars, .. } => vars.iter().for_each(|v| f(*v)),
        }
    }

    /// Exact evaluation under a full assignment.
    pub fn check(&self, values: &[i64]) -> bool {
        match self {
            Formula::Cmp { op, lin } => {
                let v = lin.constant
                    + lin
                        .terms
                        .iter()
                        .map(|(c, v)| c * values[v.index()])
                        .sum::<i64>();
                op.holds(v)
            }
            Formula::Product { z, x, y } => {
                values[z.index()] == values[x.index()] * values[y.index()]
            }
            Formula::ElementRead { out, cells, index } => {
                let i = values[index.index()];
                i >= 0
                    && (i as usize) < cells.len()
                    && values[out.index()] == values[cells[i as usize].index()]
            }
            Formula::ElementWrite { out, base, index, value } => {
                let i = values[index.index()];
                if i < 0 || i as usize >= base.len() {
                    return false;
                }
                out.iter().enumerate().all(|(j, o)| {
                    let expect = if j == i as usize {
                        values[value.index()]
                    } else {
                        values[base[j].index()]
                    };
                    values[o.index()] == expect
                })
            }
            Formula::And(fs) => fs.iter().all(|f| f.check(values)),
            Formula::Or(fs) => fs.iter().any(|f| f.check(values)),
            Formula::Not(inner) => !inner.check(values),
            Formula::Reified { var, inner, .. } => {
                (values[var.index()] == 1) == inner.check(values)
            }
            Formula::AtMostFalse { vars, k } => {
                vars.iter().filter(|v| values[v.index()] == 0).count() <= *k as usize
            }
        }
    }

}

/// A full assignment, indexed by [`VarId`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Model {
    pub values: Vec<i64>,
}

impl Model {
    pub fn value(&self, v: VarId) -> i64 {
        self.values[v.index()]
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SolveResult {
    Sat(Model),
    Unsat,
}

impl SolveResult {
    pub fn is_sat(&self) -> bool {
        matches!(self, SolveResult::Sat(_))
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SolverError {
    #[error("search budget exceeded after {nodes} nodes / {millis} ms")]
    ResourceLimit { nodes: u64, millis: u64 },
}

/// Search budget. A hit aborts the whole run, reported distinctly from
/// Unsat so partial results are never passed off as complete.
#[derive(Debug, Clone, Copy)]
pub struct Limits {
    pub max_nodes: u64,
    pub max_millis: u64,
}

impl Default for Limits {
    fn default() -> Self {
        Limits { max_nodes: 10_000_000, max_millis: 30_000 }
    }
}

/// A solver problem: domains plus enforced formulas.
#[derive(Debug, Clone, Default)]
pub struct Problem {
    pub domains: Vec<Domain>,
    pub constraints: Vec<Formula>,
}

impl Problem {
    pub fn new_var(&mut self, d: Domain) -> VarId {
        let id = VarId(self.domains.len() as u32);
        self.domains.push(d);
        id
    }

    pub fn post(&mut self, f: Formula) {
        self.constraints.push(f);
    }

    /// Solve with the given budget. `Sat` models are re-checked exactly
    /// against every constraint before being returned.
    pub fn solve(&self, limits: &Limits) -> Result<SolveResult, SolverError> {
        self.solve_with(&[], limits)
    }

    /// Solve with additional constraints layered on top, without cloning
    /// the base problem.
    pub fn solve_with(
        &self,
        extra: &[Formula],
        limits: &Limits,
    ) -> Result<SolveResult, SolverError> {
        let result = propagate::search(self, extra, limits)?;
        if let SolveResult::Sat(model) = &result {
            for c in self.constraints.iter().chain(extra.iter()) {
                debug_assert!(c.check(&model.values), "model violates {c:?}");
                if !c.check(&model.values) {
                    // Never report an unsound model.
                    return Ok(SolveResult::Unsat);
                }
            }
        }
        Ok(result)
    }
}

/// Satisfiability of `csp.hard` plus the soft constraints selected by
/// `enforced_soft` (a mask over `csp.soft`, all when `None`).
pub fn is_sat(
    csp: &Csp,
    enforced_soft: Option<&[bool]>,
    limits: &Limits,
) -> Result<SolveResult, SolverError> {
    let mut problem = csp.base_problem();
    for (i, c) in csp.soft.iter().enumerate() {
        let on = enforced_soft.map(|m| m[i]).unwrap_or(true);
        if on {
            problem.post(c.formula.clone());
        }
    }
    problem.solve(limits)
}

/// Satisfiability with one indicator per soft constraint and at most `k`
/// indicators false. Returns, on Sat, the model and the indicator values in
/// soft order.
pub fn solve_with_atmost(
    csp: &Csp,
    k: u32,
    extra: &[Formula],
    limits: &Limits,
) -> Result<Option<Vec<bool>>, SolverError> {
    let (mut problem, indicators) = csp.problem_with_indicators();
    problem.post(Formula::AtMostFalse { vars: indicators.clone(), k });
    for f in extra {
        problem.post(f.clone());
    }
    match problem.solve(limits)? {
        SolveResult::Unsat => Ok(None),
        SolveResult::Sat(model) => Ok(Some(
            indicators.iter().map(|y| model.value(*y) == 1).collect(),
        )),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lin(terms: &[(i64, VarId)], constant: i64) -> LinExpr {
        LinExpr { terms: terms.to_vec(), constant }.normalize()
    }

    #[test]
    fn unique_solution_found() {
        // x+y=2, x-y=0 over [0,10]
        let mut p = Problem::default();
        let x = p.new_var(Domain::new(0, 10));
        let y = p.new_var(Domain::new(0, 10));
        p.post(Formula::Cmp { op: CmpOp::Eq, lin: lin(&[(1, x), (1, y)], -2) });
        p.post(Formula::Cmp { op: CmpOp::Eq, lin: lin(&[(1, x), (-1, y)], 0) });
        match p.solve(&Limits::default()).unwrap() {
            SolveResult::Sat(m) => {
                assert_eq!(m.value(x), 1);
                assert_eq!(m.value(y), 1);
            }
            SolveResult::Unsat => panic!("expected Sat"),
        }
    }

    #[test]
    fn contradictory_bounds_are_unsat() {
        // x>=1, x<=0
        let mut p = Problem::default();
        let x = p.new_var(Domain::new(-10, 10));
        p.post(Formula::Cmp { op: CmpOp::Ge, lin: lin(&[(1, x)], -1) });
        p.post(Formula::Cmp { op: CmpOp::Le, lin: lin(&[(1, x)], 0) });
        assert_eq!(p.solve(&Limits::default()).unwrap(), SolveResult::Unsat);
    }

    #[test]
    fn product_constraint() {
        // z = x*y, z = 12, x in [2,4], y in [1,10], x <= y
        let mut p = Problem::default();
        let x = p.new_var(Domain::new(2, 4));
        let y = p.new_var(Domain::new(1, 10));
        let z = p.new_var(Domain::new(12, 12));
        p.post(Formula::Product { z, x, y });
        p.post(Formula::Cmp { op: CmpOp::Le, lin: lin(&[(1, x), (-1, y)], 0) });
        match p.solve(&Limits::default()).unwrap() {
            SolveResult::Sat(m) => {
                assert_eq!(m.value(x) * m.value(y), 12);
                assert!(m.value(x) <= m.value(y));
            }
            SolveResult::Unsat => panic!("expected Sat"),
        }
    }

    #[test]
    fn element_read_constrains_index() {
        // cells fixed [5, 7, 9]; out = 7 forces index = 1
        let mut p = Problem::default();
        let cells: Vec<VarId> = [5, 7, 9]
            .iter()
            .map(|v| p.new_var(Domain::singleton(*v)))
            .collect();
        let index = p.new_var(Domain::new(-5, 5));
        let out = p.new_var(Domain::singleton(7));
        p.post(Formula::ElementRead { out, cells, index });
        match p.solve(&Limits::default()).unwrap() {
            SolveResult::Sat(m) => assert_eq!(m.value(index), 1),
            SolveResult::Unsat => panic!("expected Sat"),
        }
    }

    #[test]
    fn at_most_false_counts() {
        let mut p = Problem::default();
        let ys: Vec<VarId> = (0..3).map(|_| p.new_var(Domain::boolean())).collect();
        // force y0 = 0 and y1 = 0; at most 1 false is then unsatisfiable
        p.post(Formula::Cmp { op: CmpOp::Eq, lin: lin(&[(1, ys[0])], 0) });
        p.post(Formula::Cmp { op: CmpOp::Eq, lin: lin(&[(1, ys[1])], 0) });
        p.post(Formula::AtMostFalse { vars: ys.clone(), k: 1 });
        assert_eq!(p.solve(&Limits::default()).unwrap(), SolveResult::Unsat);
    }

    #[test]
    fn reified_links_both_ways() {
        let mut p = Problem::default();
        let x = p.new_var(Domain::new(0, 10));
        let t = p.new_var(Domain::boolean());
        let inner = Formula::Cmp { op: CmpOp::Ge, lin: lin(&[(1, x)], -5) };
        p.post(Formula::Reified {
            var: t,
            inner_neg: Box::new(inner.negate()),
            inner: Box::new(inner),
        });
        // t = 0 forces x < 5
        p.post(Formula::Cmp { op: CmpOp::Eq, lin: lin(&[(1, t)], 0) });
        match p.solve(&Limits::default()).unwrap() {
            SolveResult::Sat(m) => assert!(m.value(x) < 5),
            SolveResult::Unsat => panic!("expected Sat"),
        }
    }
}
