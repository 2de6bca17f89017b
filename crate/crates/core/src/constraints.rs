//! Constraint IR and translation from DSA graphs.
//!
//! Every constraint carries its source coordinate and a role. Soft
//! constraints come only from source assignment blocks; counterexample
//! bindings, junction copies, branch conditions and the postcondition are
//! hard. Correction subsets are therefore always sets of statements.

use std::collections::BTreeMap;

use thiserror::Error;

pub use crate::cfg::SourceCoord;
use crate::cfg::{Assign, AssignBlock, AssignOrigin, CExpr, CondNode, VarRef};
use crate::frontend::BinOp;
use crate::solver::{CmpOp, Domain, Formula, LinExpr, Problem, VarId};

/// Hard constraints define the analysis frame; soft ones are retractable
/// candidates for correction subsets.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Role {
    Hard,
    Soft,
}

/// Where a constraint came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConstraintOrigin {
    Assignment,
    Junction,
    CounterexampleBinding,
    BranchCondition,
    Postcondition,
    Requires,
}

#[derive(Debug, Clone)]
pub struct Constraint {
    pub formula: Formula,
    pub role: Role,
    pub origin: ConstraintOrigin,
    pub coord: Option<SourceCoord>,
    pub text: String,
}

impl Constraint {
    pub fn rendered_coord(&self) -> String {
        self.coord
            .as_ref()
            .map(|c| c.render())
            .unwrap_or_else(|| "-".to_string())
    }
}

/// A versioned scalar or array-cell symbol in the variable table.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct Sym {
    pub base: String,
    pub version: u32,
    pub cell: Option<usize>,
}

impl std::fmt::Display for Sym {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self.cell {
            Some(i) => write!(f, "{}_{}[{}]", self.base, self.version, i),
            None => write!(f, "{}_{}", self.base, self.version),
        }
    }
}

/// A finite-domain constraint system over versioned variables, partitioned
/// into hard and soft constraints.
#[derive(Debug, Clone, Default)]
pub struct Csp {
    pub syms: Vec<Sym>,
    pub domain: Domain,
    pub hard: Vec<Constraint>,
    pub soft: Vec<Constraint>,
}

impl Csp {
    /// Domains plus the hard constraints.
    pub fn base_problem(&self) -> Problem {
        let mut p = Problem::default();
        for _ in &self.syms {
            p.new_var(self.domain);
        }
        for c in &self.hard {
            p.post(c.formula.clone());
        }
        p
    }

    /// Base problem plus one 0/1 indicator per soft constraint, linked as
    /// `y_i = 1 implies c_i` (`y_i → c_i`). Returns the indicator ids in
    /// soft order.
    pub fn problem_with_indicators(&self) -> (Problem, Vec<VarId>) {
        let mut p = self.base_problem();
        let mut ys = Vec::with_capacity(self.soft.len());
        for c in &self.soft {
            let y = p.new_var(Domain::boolean());
            let y_is_zero = Formula::Cmp { op: CmpOp::Eq, lin: LinExpr::var(y) };
            p.post(Formula::Or(vec![y_is_zero, c.formula.clone()]));
            ys.push(y);
        }
        (p, ys)
    }

    /// The indicator variable ids [`Self::problem_with_indicators`] will
    /// allocate, without building the problem; blocking clauses built over
    /// these remain valid across repeated solves.
    pub fn indicator_ids(&self) -> Vec<VarId> {
        (0..self.soft.len())
            .map(|i| VarId((self.syms.len() + i) as u32))
            .collect()
    }

    /// Newline-separated `role coord : text` records for debugging.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        for c in self.hard.iter().chain(self.soft.iter()) {
            let role = match c.role {
                Role::Hard => "hard",
                Role::Soft => "soft",
            };
            out.push_str(&format!("{role} {} : {}\n", c.rendered_coord(), c.text));
        }
        out
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TranslateError {
    #[error("unsupported expression in constraint position: {0}")]
    UnsupportedExpr(String),
    #[error("counterexample does not bind `{0}`")]
    IncompleteCounterexample(String),
}

/// Builds one [`Csp`] over a shared variable table.
pub struct CspBuilder {
    table: BTreeMap<Sym, VarId>,
    syms: Vec<Sym>,
    array_lengths: BTreeMap<String, usize>,
    domain: Domain,
    aux_count: u32,
    hard: Vec<Constraint>,
    soft: Vec<Constraint>,
}

impl CspBuilder {
    pub fn new(array_lengths: &BTreeMap<String, usize>, domain: Domain) -> Self {
        CspBuilder {
            table: BTreeMap::new(),
            syms: Vec::new(),
            array_lengths: array_lengths.clone(),
            domain,
            aux_count: 0,
            hard: Vec::new(),
            soft: Vec::new(),
        }
    }

    pub fn finish(self) -> Csp {
        Csp {
            syms: self.syms,
            domain: self.domain,
            hard: self.hard,
            soft: self.soft,
        }
    }

    pub fn push(&mut self, c: Constraint) {
        match c.role {
            Role::Hard => self.hard.push(c),
            Role::Soft => self.soft.push(c),
        }
    }

    fn var(&mut self, sym: Sym) -> VarId {
        if let Some(&v) = self.table.get(&sym) {
            return v;
        }
        let id = VarId(self.syms.len() as u32);
        self.syms.push(sym.clone());
        self.table.insert(sym, id);
        id
    }

    fn scalar(&mut self, r: &VarRef) -> VarId {
        let version = r.version.expect("translation requires DSA form");
        self.var(Sym { base: r.base.clone(), version, cell: None })
    }

    fn cell(&mut self, r: &VarRef, i: usize) -> VarId {
        let version = r.version.expect("translation requires DSA form");
        self.var(Sym { base: r.base.clone(), version, cell: Some(i) })
    }

    fn cells(&mut self, r: &VarRef) -> Vec<VarId> {
        let len = *self
            .array_lengths
            .get(&r.base)
            .unwrap_or_else(|| panic!("unknown array `{}`", r.base));
        (0..len).map(|i| self.cell(r, i)).collect()
    }

    fn aux(&mut self, hint: &str) -> VarId {
        self.aux_count += 1;
        let sym = Sym {
            base: format!("${hint}{}", self.aux_count),
            version: 0,
            cell: None,
        };
        self.var(sym)
    }

    fn is_array(&self, base: &str) -> bool {
        self.array_lengths.contains_key(base)
    }

    // ---- expression lowering -------------------------------------------

    /// Lower an integer expression to a linear form plus auxiliary
    /// definitions (products, symbolic element reads).
    fn lin(&mut self, e: &CExpr, defs: &mut Vec<Formula>) -> Result<LinExpr, TranslateError> {
        match e {
            CExpr::Const(n) => Ok(LinExpr::constant(*n)),
            CExpr::Var(v) => Ok(LinExpr::var(self.scalar(v))),
            CExpr::Index { array, index } => match **index {
                CExpr::Const(i) => {
                    let len = self.array_lengths[&array.base] as i64;
                    if i < 0 || i >= len {
                        return Err(TranslateError::UnsupportedExpr(format!(
                            "constant index {i} out of bounds for `{}`",
                            array.base
                        )));
                    }
                    Ok(LinExpr::var(self.cell(array, i as usize)))
                }
                _ => {
                    let idx_lin = self.lin(index, defs)?;
                    let idx = self.materialize(idx_lin, defs);
                    let cells = self.cells(array);
                    let out = self.aux("read");
                    defs.push(Formula::ElementRead { out, cells, index: idx });
                    Ok(LinExpr::var(out))
                }
            },
            CExpr::Bin { op, lhs, rhs } => {
                let a = self.lin(lhs, defs)?;
                let b = self.lin(rhs, defs)?;
                match op {
                    BinOp::Add => Ok(a.add(&b)),
                    BinOp::Sub => Ok(a.sub(&b)),
                    BinOp::Mul => {
                        if a.terms.is_empty() {
                            Ok(b.scale(a.constant))
                        } else if b.terms.is_empty() {
                            Ok(a.scale(b.constant))
                        } else {
                            let x = self.materialize(a, defs);
                            let y = self.materialize(b, defs);
                            let z = self.aux("prod");
                            defs.push(Formula::Product { z, x, y });
                            Ok(LinExpr::var(z))
                        }
                    }
                    other => Err(TranslateError::UnsupportedExpr(format!(
                        "operator {} in integer position",
                        other.symbol()
                    ))),
                }
            }
            CExpr::Not(_) => Err(TranslateError::UnsupportedExpr(
                "boolean in integer position".into(),
            )),
        }
    }

    /// A variable equal to `lin` (reusing it when it already is one).
    fn materialize(&mut self, lin: LinExpr, defs: &mut Vec<Formula>) -> VarId {
        if let Some(v) = lin.as_var() {
            return v;
        }
        let v = self.aux("lin");
        defs.push(Formula::Cmp {
            op: CmpOp::Eq,
            lin: lin.sub(&LinExpr::var(v)),
        });
        v
    }

    /// Lower a boolean expression. `positive = false` builds the negation
    /// structurally, so auxiliary definitions always stay positive.
    fn bool_formula(
        &mut self,
        e: &CExpr,
        positive: bool,
        defs: &mut Vec<Formula>,
    ) -> Result<Formula, TranslateError> {
        match e {
            CExpr::Bin { op, lhs, rhs } if op.is_cmp() => {
                let a = self.lin(lhs, defs)?;
                let b = self.lin(rhs, defs)?;
                let lin = a.sub(&b);
                let cmp = match op {
                    BinOp::Eq => CmpOp::Eq,
                    BinOp::Ne => CmpOp::Ne,
                    BinOp::Lt => CmpOp::Lt,
                    BinOp::Le => CmpOp::Le,
                    BinOp::Gt => CmpOp::Gt,
                    BinOp::Ge => CmpOp::Ge,
                    _ => unreachable!(),
                };
                let cmp = if positive { cmp } else { cmp.negate() };
                Ok(Formula::Cmp { op: cmp, lin })
            }
            CExpr::Bin { op: BinOp::And, lhs, rhs } => {
                let a = self.bool_formula(lhs, positive, defs)?;
                let b = self.bool_formula(rhs, positive, defs)?;
                Ok(if positive {
                    Formula::And(vec![a, b])
                } else {
                    Formula::Or(vec![a, b])
                })
            }
            CExpr::Bin { op: BinOp::Or, lhs, rhs } => {
                let a = self.bool_formula(lhs, positive, defs)?;
                let b = self.bool_formula(rhs, positive, defs)?;
                Ok(if positive {
                    Formula::Or(vec![a, b])
                } else {
                    Formula::And(vec![a, b])
                })
            }
            CExpr::Not(inner) => self.bool_formula(inner, !positive, defs),
            other => Err(TranslateError::UnsupportedExpr(format!(
                "`{other}` in boolean position"
            ))),
        }
    }

    fn with_defs(formula: Formula, defs: Vec<Formula>) -> Formula {
        if defs.is_empty() {
            formula
        } else {
            let mut all = defs;
            all.push(formula);
            Formula::And(all)
        }
    }

    // ---- translation operations -------------------------------------------

    /// One constraint per assignment: soft for source assignments, hard for
    /// junction copies.
    pub fn translate_block(&mut self, block: &AssignBlock) -> Result<Vec<Constraint>, TranslateError> {
        block
            .assigns
            .iter()
            .map(|a| self.translate_assign(a))
            .collect()
    }

    /// Lower one assignment. Array element writes become store constraints
    /// (per-cell equalities when the index is a constant); whole-array
    /// copies (junctions) become cell-wise equalities.
    pub fn translate_assign(&mut self, a: &Assign) -> Result<Constraint, TranslateError> {
        let mut defs = Vec::new();
        let formula = match (&a.index, self.is_array(&a.target.base)) {
            (Some(index), _) => {
                let prev = a.prev_array.clone().expect("array write carries prev version");
                let out = self.cells(&a.target);
                let base = self.cells(&prev);
                let value_lin = self.lin(&a.value, &mut defs)?;
                let value = self.materialize(value_lin, &mut defs);
                match index {
                    CExpr::Const(i) => {
                        let i = *i;
                        if i < 0 || i as usize >= out.len() {
                            return Err(TranslateError::UnsupportedExpr(format!(
                                "constant store index {i} out of bounds"
                            )));
                        }
                        let mut eqs = Vec::new();
                        for (j, o) in out.iter().enumerate() {
                            let rhs = if j == i as usize { value } else { base[j] };
                            eqs.push(Formula::Cmp {
                                op: CmpOp::Eq,
                                lin: LinExpr::var(*o).sub(&LinExpr::var(rhs)),
                            });
                        }
                        Formula::And(eqs)
                    }
                    _ => {
                        let idx_lin = self.lin(index, &mut defs)?;
                        let idx = self.materialize(idx_lin, &mut defs);
                        Formula::ElementWrite { out, base, index: idx, value }
                    }
                }
            }
            (None, true) => {
                // whole-array copy: target = value (a plain array variable)
                let src = match &a.value {
                    CExpr::Var(v) => v.clone(),
                    other => {
                        return Err(TranslateError::UnsupportedExpr(format!(
                            "array assignment from `{other}`"
                        )))
                    }
                };
                let out = self.cells(&a.target);
                let base = self.cells(&src);
                let eqs = out
                    .iter()
                    .zip(&base)
                    .map(|(o, b)| Formula::Cmp {
                        op: CmpOp::Eq,
                        lin: LinExpr::var(*o).sub(&LinExpr::var(*b)),
                    })
                    .collect();
                Formula::And(eqs)
            }
            (None, false) => {
                let target = self.scalar(&a.target);
                let value = self.lin(&a.value, &mut defs)?;
                Formula::Cmp {
                    op: CmpOp::Eq,
                    lin: LinExpr::var(target).sub(&value),
                }
            }
        };
        let (role, origin) = match a.origin {
            AssignOrigin::Source => (Role::Soft, ConstraintOrigin::Assignment),
            AssignOrigin::Junction => (Role::Hard, ConstraintOrigin::Junction),
        };
        let text = match &a.index {
            Some(idx) => format!("{}[{}] = {}", a.target, idx, a.value),
            None => format!("{} = {}", a.target, a.value),
        };
        Ok(Constraint {
            formula: Self::with_defs(formula, defs),
            role,
            origin,
            coord: a.coord.clone(),
            text,
        })
    }

    /// The condition of `c` as a hard constraint: asserted when `taken`,
    /// negated otherwise.
    pub fn translate_cond(&mut self, c: &CondNode, taken: bool) -> Result<Constraint, TranslateError> {
        let mut defs = Vec::new();
        let formula = self.bool_formula(&c.expr, taken, &mut defs)?;
        let text = if taken {
            format!("{}", c.expr)
        } else {
            format!("!{}", c.expr)
        };
        Ok(Constraint {
            formula: Self::with_defs(formula, defs),
            role: Role::Hard,
            origin: ConstraintOrigin::BranchCondition,
            coord: Some(c.coord()),
            text,
        })
    }

    /// The postcondition as hard constraints, one per top-level conjunct.
    /// Quantifiers were already expanded and `\result` substituted.
    pub fn translate_post(&mut self, post_expr: &CExpr) -> Result<Vec<Constraint>, TranslateError> {
        let mut conjuncts = Vec::new();
        flatten_conj(post_expr, &mut conjuncts);
        conjuncts
            .into_iter()
            .map(|c| {
                let mut defs = Vec::new();
                let formula = self.bool_formula(c, true, &mut defs)?;
                Ok(Constraint {
                    formula: Self::with_defs(formula, defs),
                    role: Role::Hard,
                    origin: ConstraintOrigin::Postcondition,
                    coord: None,
                    text: format!("{c}"),
                })
            })
            .collect()
    }

    /// Counterexample bindings as hard equalities on version-0 variables.
    pub fn translate_ce(
        &mut self,
        ce: &crate::bmc::Counterexample,
        params: &[(String, Option<usize>)],
    ) -> Result<Vec<Constraint>, TranslateError> {
        let mut out = Vec::new();
        for (name, len) in params {
            match len {
                None => {
                    let v = ce
                        .ints
                        .get(name)
                        .copied()
                        .ok_or_else(|| TranslateError::IncompleteCounterexample(name.clone()))?;
                    let var = self.var(Sym { base: name.clone(), version: 0, cell: None });
                    out.push(Constraint {
                        formula: Formula::Cmp {
                            op: CmpOp::Eq,
                            lin: LinExpr::var(var).sub(&LinExpr::constant(v)),
                        },
                        role: Role::Hard,
                        origin: ConstraintOrigin::CounterexampleBinding,
                        coord: None,
                        text: format!("{name}_0 == {v}"),
                    });
                }
                Some(len) => {
                    let values = ce
                        .arrays
                        .get(name)
                        .ok_or_else(|| TranslateError::IncompleteCounterexample(name.clone()))?;
                    if values.len() != *len {
                        return Err(TranslateError::IncompleteCounterexample(name.clone()));
                    }
                    for (i, v) in values.iter().enumerate() {
                        let var = self.var(Sym { base: name.clone(), version: 0, cell: Some(i) });
                        out.push(Constraint {
                            formula: Formula::Cmp {
                                op: CmpOp::Eq,
                                lin: LinExpr::var(var).sub(&LinExpr::constant(*v)),
                            },
                            role: Role::Hard,
                            origin: ConstraintOrigin::CounterexampleBinding,
                            coord: None,
                            text: format!("{name}_0[{i}] == {v}"),
                        });
                    }
                }
            }
        }
        Ok(out)
    }

    /// `requires` as hard constraints (over version-0 variables).
    pub fn translate_requires(&mut self, req: &CExpr) -> Result<Constraint, TranslateError> {
        let mut defs = Vec::new();
        let formula = self.bool_formula(req, true, &mut defs)?;
        Ok(Constraint {
            formula: Self::with_defs(formula, defs),
            role: Role::Hard,
            origin: ConstraintOrigin::Requires,
            coord: None,
            text: format!("{req}"),
        })
    }
}

fn flatten_conj<'a>(e: &'a CExpr, out: &mut Vec<&'a CExpr>) {
    match e {
        CExpr::Bin { op: BinOp::And, lhs, rhs } => {
            flatten_conj(lhs, out);
            flatten_conj(rhs, out);
        }
        other => out.push(other),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cfg::VarRef;

    fn builder() -> CspBuilder {
        let mut lengths = BTreeMap::new();
        lengths.insert("tab".to_string(), 4);
        CspBuilder::new(&lengths, Domain::default())
    }

    fn plain_assign(target: &str, tv: u32, value: CExpr, line: u32) -> Assign {
        Assign {
            target: VarRef::versioned(target, tv),
            index: None,
            prev_array: None,
            value,
            coord: Some(SourceCoord::plain(line)),
            origin: AssignOrigin::Source,
        }
    }

    #[test]
    fn linear_assignment_is_soft_with_coord() {
        let mut b = builder();
        // k_1 = k_0 + 2 at line 9
        let a = plain_assign(
            "k",
            1,
            CExpr::bin(
                BinOp::Add,
                CExpr::Var(VarRef::versioned("k", 0)),
                CExpr::Const(2),
            ),
            9,
        );
        let c = b.translate_assign(&a).unwrap();
        assert_eq!(c.role, Role::Soft);
        assert_eq!(c.rendered_coord(), "9");
        assert_eq!(c.text, "k_1 = (k_0 + 2)");
    }

    #[test]
    fn identity_assignment() {
        let mut b = builder();
        let a = plain_assign("x", 1, CExpr::Var(VarRef::versioned("x", 0)), 3);
        let c = b.translate_assign(&a).unwrap();
        assert!(matches!(c.formula, Formula::Cmp { op: CmpOp::Eq, .. }));
    }

    #[test]
    fn element_read_with_coord_in_iteration() {
        let mut b = builder();
        // min_2 = tab_0[i_1], line 11, iteration 2 of loop at 9
        let mut a = plain_assign(
            "min",
            2,
            CExpr::Index {
                array: VarRef::versioned("tab", 0),
                index: Box::new(CExpr::Var(VarRef::versioned("i", 1))),
            },
            11,
        );
        a.coord = Some(SourceCoord { line: 11, loop_ctx: vec![(9, 2)] });
        let c = b.translate_assign(&a).unwrap();
        assert_eq!(c.role, Role::Soft);
        assert_eq!(c.rendered_coord(), "9:2.11");
        // symbolic read requires an ElementRead definition
        match &c.formula {
            Formula::And(fs) => assert!(fs
                .iter()
                .any(|f| matches!(f, Formula::ElementRead { .. }))),
            other => panic!("expected defs + equality, got {other:?}"),
        }
    }

    #[test]
    fn cond_negation_flips_comparison() {
        let mut b = builder();
        // i_2 < 4 - 1, taken = false  →  i_2 >= 3
        let cond = CondNode {
            expr: CExpr::bin(
                BinOp::Lt,
                CExpr::Var(VarRef::versioned("i", 2)),
                CExpr::bin(BinOp::Sub, CExpr::Const(4), CExpr::Const(1)),
            ),
            line: 9,
            loop_ctx: vec![(9, 3)],
            then_to: crate::cfg::NodeId(0),
            else_to: crate::cfg::NodeId(0),
            is_loop: false,
        };
        let c = b.translate_cond(&cond, false).unwrap();
        assert_eq!(c.role, Role::Hard);
        assert_eq!(c.rendered_coord(), "9:3");
        match &c.formula {
            Formula::Cmp { op: CmpOp::Ge, .. } => {}
            other => panic!("expected >=, got {other:?}"),
        }
        // and there must be no satisfying i_2 < 3
        let mut p = Problem::default();
        let i2 = p.new_var(Domain::singleton(2));
        let _ = i2;
    }

    #[test]
    fn counterexample_bindings_per_cell() {
        let mut b = builder();
        let ce = crate::bmc::Counterexample {
            ints: BTreeMap::new(),
            arrays: std::iter::once(("tab".to_string(), vec![3, 2, 1, 0])).collect(),
        };
        let cs = b
            .translate_ce(&ce, &[("tab".to_string(), Some(4))])
            .unwrap();
        assert_eq!(cs.len(), 4);
        assert!(cs.iter().all(|c| c.role == Role::Hard));
        assert_eq!(cs[0].text, "tab_0[0] == 3");
    }

    #[test]
    fn empty_parameter_list_yields_no_bindings() {
        let mut b = builder();
        let ce = crate::bmc::Counterexample::default();
        let cs = b.translate_ce(&ce, &[]).unwrap();
        assert!(cs.is_empty());
    }

    #[test]
    fn missing_binding_is_reported() {
        let mut b = builder();
        let ce = crate::bmc::Counterexample::default();
        let err = b
            .translate_ce(&ce, &[("i".to_string(), None)])
            .unwrap_err();
        assert!(matches!(err, TranslateError::IncompleteCounterexample(_)));
    }

    #[test]
    fn product_in_postcondition_introduces_aux() {
        let mut b = builder();
        // res_1 * res_1 <= val_0
        let post = CExpr::bin(
            BinOp::Le,
            CExpr::bin(
                BinOp::Mul,
                CExpr::Var(VarRef::versioned("res", 1)),
                CExpr::Var(VarRef::versioned("res", 1)),
            ),
            CExpr::Var(VarRef::versioned("val", 0)),
        );
        let cs = b.translate_post(&post).unwrap();
        assert_eq!(cs.len(), 1);
        match &cs[0].formula {
            Formula::And(fs) => {
                assert!(fs.iter().any(|f| matches!(f, Formula::Product { .. })))
            }
            other => panic!("expected product def, got {other:?}"),
        }
    }
}
