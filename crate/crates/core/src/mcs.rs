//! Minimal correction subset enumeration.
//!
//! Implements indicator-based MCS enumeration: every soft constraint gets an
//! indicator `y_i` with `y_i → c_i`; models of the system under an
//! at-most-k-false cardinality cap yield MCSs of size `k`; each found MCS is
//! blocked (at least one of its indicators must be true) in both the
//! k-bounded and the global system; `k` grows until the bound `b_mcs` is
//! passed or the globally blocked system becomes infeasible. A brute-force
//! subset oracle backs the enumerator in tests.

use std::collections::BTreeSet;

use thiserror::Error;

use crate::constraints::Csp;
use crate::solver::{self, CmpOp, Formula, Limits, LinExpr, SolveResult};

/// One minimal correction subset: indices into `csp.soft` plus the rendered
/// source coordinates, sorted in source order.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct Mcs {
    pub constraints: BTreeSet<usize>,
    pub coords: Vec<String>,
}

impl Mcs {
    fn new(csp: &Csp, constraints: BTreeSet<usize>) -> Self {
        let mut coords: Vec<String> = constraints
            .iter()
            .map(|&i| csp.soft[i].rendered_coord())
            .collect();
        coords.sort_by_key(|c| coord_key(c));
        Mcs { constraints, coords }
    }

    pub fn render(&self) -> String {
        format!("{{{}}}", self.coords.join(","))
    }
}

/// Numeric sort key for a rendered coordinate: `9:2.11` orders by
/// `[9, 2, 11]`, so `5` comes before `9:1.11` which comes before `13`...
/// by the first differing segment.
pub fn coord_key(coord: &str) -> Vec<u32> {
    coord
        .split(|c| c == ':' || c == '.')
        .filter_map(|s| s.parse().ok())
        .collect()
}

#[derive(Debug, Error)]
pub enum McsError {
    #[error("the hard constraints alone are infeasible; no correction subset exists")]
    HardCoreInfeasible,
    #[error("system is satisfiable; nothing to correct")]
    NotInfeasible,
    #[error("oracle limit: {0} soft constraints exceed the exhaustive cap of 14")]
    OracleTooLarge(usize),
    #[error(transparent)]
    Solver(#[from] crate::solver::SolverError),
}

/// Enumerate all MCSs of cardinality at most `b_mcs`, ordered by cardinality
/// then by coordinate strings.
pub fn mcs_enumerate(csp: &Csp, b_mcs: u32, limits: &Limits) -> Result<Vec<Mcs>, McsError> {
    match solver::is_sat(csp, None, limits)? {
        SolveResult::Sat(_) => return Err(McsError::NotInfeasible),
        SolveResult::Unsat => {}
    }
    match solver::is_sat(csp, Some(&vec![false; csp.soft.len()]), limits)? {
        SolveResult::Unsat => return Err(McsError::HardCoreInfeasible),
        SolveResult::Sat(_) => {}
    }

    let mut found: Vec<BTreeSet<usize>> = Vec::new();
    // blocking clauses accumulated in the global system
    let mut global_blocks: Vec<Formula> = Vec::new();

    let indicators = csp.indicator_ids();
    let block_of = |mcs: &BTreeSet<usize>| -> Formula {
        // at least one indicator of the MCS is true
        let mut lin = LinExpr::constant(-1);
        for &i in mcs {
            lin = lin.add(&LinExpr::var(indicators[i]));
        }
        Formula::Cmp { op: CmpOp::Ge, lin }
    };

    let n = csp.soft.len() as u32;
    let mut k = 1u32;
    while k <= b_mcs {
        // outer feasibility: the globally blocked system (no cardinality cap)
        if solver::solve_with_atmost(csp, n, &global_blocks, limits)?.is_none() {
            break;
        }

        // all MCSs of size k, each blocked in both systems on discovery
        let mut k_blocks: Vec<Formula> = global_blocks.clone();
        while let Some(values) = solver::solve_with_atmost(csp, k, &k_blocks, limits)? {
            let new_mcs: BTreeSet<usize> = values
                .iter()
                .enumerate()
                .filter(|(_, enforced)| !**enforced)
                .map(|(i, _)| i)
                .collect();
            debug_assert!(!new_mcs.is_empty(), "empty correction set from a sat model");
            let block = block_of(&new_mcs);
            k_blocks.push(block.clone());
            global_blocks.push(block);
            if !found.contains(&new_mcs) {
                found.push(new_mcs);
            }
        }
        k += 1;
    }

    let mut result: Vec<Mcs> = found.into_iter().map(|s| Mcs::new(csp, s)).collect();
    sort_mcss(&mut result);
    Ok(result)
}

fn sort_mcss(out: &mut [Mcs]) {
    out.sort_by(|a, b| {
        a.constraints
            .len()
            .cmp(&b.constraints.len())
            .then_with(|| {
                let ka: Vec<Vec<u32>> = a.coords.iter().map(|c| coord_key(c)).collect();
                let kb: Vec<Vec<u32>> = b.coords.iter().map(|c| coord_key(c)).collect();
                ka.cmp(&kb)
            })
            .then_with(|| a.constraints.cmp(&b.constraints))
    });
}

/// Brute-force oracle: checks every subset of the soft constraints with the
/// solver and keeps the minimal correcting ones. Exponential; capped at 14
/// soft constraints.
pub fn mcs_oracle(csp: &Csp, b_mcs: u32, limits: &Limits) -> Result<Vec<Mcs>, McsError> {
    let n = csp.soft.len();
    if n > 14 {
        return Err(McsError::OracleTooLarge(n));
    }
    match solver::is_sat(csp, None, limits)? {
        SolveResult::Sat(_) => return Err(McsError::NotInfeasible),
        SolveResult::Unsat => {}
    }
    match solver::is_sat(csp, Some(&vec![false; n]), limits)? {
        SolveResult::Unsat => return Err(McsError::HardCoreInfeasible),
        SolveResult::Sat(_) => {}
    }

    let mut minimal: Vec<BTreeSet<usize>> = Vec::new();
    // subsets by increasing size; a correcting superset of a known MCS is
    // not minimal (removal is monotone), so it can be skipped
    for size in 1..=n.min(b_mcs as usize) {
        for subset in subsets_of_size(n, size) {
            if minimal.iter().any(|m| m.is_subset(&subset)) {
                continue;
            }
            let mask: Vec<bool> = (0..n).map(|i| !subset.contains(&i)).collect();
            if solver::is_sat(csp, Some(&mask), limits)?.is_sat() {
                minimal.push(subset);
            }
        }
    }
    let mut result: Vec<Mcs> = minimal.into_iter().map(|s| Mcs::new(csp, s)).collect();
    sort_mcss(&mut result);
    Ok(result)
}

fn subsets_of_size(n: usize, size: usize) -> Vec<BTreeSet<usize>> {
    let mut out = Vec::new();
    let mut current = Vec::new();
    fn rec(start: usize, n: usize, size: usize, current: &mut Vec<usize>, out: &mut Vec<BTreeSet<usize>>) {
        if current.len() == size {
            out.push(current.iter().copied().collect());
            return;
        }
        for i in start..n {
            current.push(i);
            rec(i + 1, n, size, current, out);
            current.pop();
        }
    }
    rec(0, n, size, &mut current, &mut out);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constraints::{Constraint, ConstraintOrigin, Role};
    use crate::solver::{Domain, VarId};

    /// hard: x in [0,5] (domain); soft: x=1, x=2
    fn two_exclusive() -> Csp {
        let mut csp = Csp {
            syms: vec![crate::constraints::Sym { base: "x".into(), version: 0, cell: None }],
            domain: Domain::new(0, 5),
            hard: Vec::new(),
            soft: Vec::new(),
        };
        for v in [1i64, 2] {
            csp.soft.push(Constraint {
                formula: Formula::Cmp {
                    op: CmpOp::Eq,
                    lin: LinExpr::var(VarId(0)).sub(&LinExpr::constant(v)),
                },
                role: Role::Soft,
                origin: ConstraintOrigin::Assignment,
                coord: Some(crate::cfg::SourceCoord::plain(v as u32)),
                text: format!("x == {v}"),
            });
        }
        csp
    }

    #[test]
    fn two_exclusive_soft_constraints_give_two_singletons() {
        let csp = two_exclusive();
        let limits = Limits::default();
        let got = mcs_enumerate(&csp, 2, &limits).unwrap();
        assert_eq!(got.len(), 2);
        assert!(got.iter().all(|m| m.constraints.len() == 1));
        let oracle = mcs_oracle(&csp, 2, &limits).unwrap();
        assert_eq!(got, oracle);
    }

    #[test]
    fn satisfiable_system_is_rejected() {
        let mut csp = two_exclusive();
        csp.soft.pop(); // only x=1 remains: satisfiable
        let err = mcs_enumerate(&csp, 2, &Limits::default()).unwrap_err();
        assert!(matches!(err, McsError::NotInfeasible));
    }

    #[test]
    fn infeasible_hard_core_is_reported() {
        let mut csp = two_exclusive();
        csp.hard.push(Constraint {
            formula: Formula::Cmp {
                op: CmpOp::Ge,
                lin: LinExpr::var(VarId(0)).sub(&LinExpr::constant(10)),
            },
            role: Role::Hard,
            origin: ConstraintOrigin::Postcondition,
            coord: None,
            text: "x >= 10".into(),
        });
        let err = mcs_enumerate(&csp, 2, &Limits::default()).unwrap_err();
        assert!(matches!(err, McsError::HardCoreInfeasible));
    }

    #[test]
    fn oracle_cap() {
        let mut csp = two_exclusive();
        for _ in 0..15 {
            csp.soft.push(csp.soft[0].clone());
        }
        assert!(matches!(
            mcs_oracle(&csp, 3, &Limits::default()),
            Err(McsError::OracleTooLarge(_))
        ));
    }

    #[test]
    fn cardinality_bound_is_respected_and_monotone() {
        // soft: x=1, x=2, y=1, y=2 with hard x=y: MCSs are pairs
        let mut csp = Csp {
            syms: vec![
                crate::constraints::Sym { base: "x".into(), version: 0, cell: None },
                crate::constraints::Sym { base: "y".into(), version: 0, cell: None },
            ],
            domain: Domain::new(0, 5),
            hard: vec![Constraint {
                formula: Formula::Cmp {
                    op: CmpOp::Eq,
                    lin: LinExpr::var(VarId(0)).sub(&LinExpr::var(VarId(1))),
                },
                role: Role::Hard,
                origin: ConstraintOrigin::Postcondition,
                coord: None,
                text: "x == y".into(),
            }],
            soft: Vec::new(),
        };
        for (var, v, line) in [(0u32, 1i64, 1u32), (0, 2, 2), (1, 1, 3), (1, 2, 4)] {
            csp.soft.push(Constraint {
                formula: Formula::Cmp {
                    op: CmpOp::Eq,
                    lin: LinExpr::var(VarId(var)).sub(&LinExpr::constant(v)),
                },
                role: Role::Soft,
                origin: ConstraintOrigin::Assignment,
                coord: Some(crate::cfg::SourceCoord::plain(line)),
                text: format!("v{var} == {v}"),
            });
        }
        let limits = Limits::default();
        let k1 = mcs_enumerate(&csp, 1, &limits).unwrap();
        assert!(k1.is_empty(), "no singleton fixes x=y conflicts: {k1:?}");
        let k2 = mcs_enumerate(&csp, 2, &limits).unwrap();
        assert!(!k2.is_empty());
        assert!(k2.iter().all(|m| m.constraints.len() <= 2));
        // larger bound returns a superset
        let k4 = mcs_enumerate(&csp, 4, &limits).unwrap();
        for m in &k2 {
            assert!(k4.contains(m));
        }
        assert_eq!(k2, mcs_oracle(&csp, 2, &limits).unwrap());
        assert_eq!(k4, mcs_oracle(&csp, 4, &limits).unwrap());
    }
}
