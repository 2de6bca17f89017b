//! Concrete AST interpreter. Serves as the ground-truth semantics for the
//! unfolded-CFG propagation and validates counterexamples.

use std::collections::BTreeMap;

use thiserror::Error;

use super::ast::{BinOp, Expr, Program, Stmt, StmtKind};
use super::typecheck::TypedProgram;

/// Safety fuse on total loop iterations for one run.
const ITERATION_FUSE: u64 = 1_000_000;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ExecError {
    #[error("input binding for `{0}` is missing or has the wrong shape")]
    BadBinding(String),
    #[error("line {line}: array index {index} out of bounds for `{array}` of length {len}")]
    IndexOutOfBounds {
        array: String,
        index: i64,
        len: usize,
        line: u32,
    },
    #[error("iteration fuse exceeded; the program may not terminate")]
    IterationFuse,
}

/// Result of one concrete run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExecOutcome {
    pub result: i64,
    /// Concrete truth of the `ensures` clause.
    pub post_ok: bool,
    /// Per loop (keyed by the `while` line): the largest number of
    /// iterations any single entry to that loop performed.
    pub max_iterations: BTreeMap<u32, u32>,
    /// Final array contents, by parameter name.
    pub final_arrays: BTreeMap<String, Vec<i64>>,
}

struct Machine {
    ints: BTreeMap<String, i64>,
    arrays: BTreeMap<String, Vec<i64>>,
    max_iterations: BTreeMap<u32, u32>,
    fuel: u64,
}

/// Run `p` on the given inputs. `ints` binds integer parameters, `arrays`
/// binds array parameters at their declared lengths.
pub fn interpret(
    p: &TypedProgram,
    ints: &BTreeMap<String, i64>,
    arrays: &BTreeMap<String, Vec<i64>>,
) -> Result<ExecOutcome, ExecError> {
    let p = p.program();
    let mut m = Machine {
        ints: BTreeMap::new(),
        arrays: BTreeMap::new(),
        max_iterations: BTreeMap::new(),
        fuel: ITERATION_FUSE,
    };
    bind_inputs(p, ints, arrays, &mut m)?;

    let result = exec_block(&p.body, &mut m)?.expect("validated program ends in return");
    let post_ok = eval_bool(&p.ensures, &m, Some(result))?;
    Ok(ExecOutcome {
        result,
        post_ok,
        max_iterations: m.max_iterations,
        final_arrays: m.arrays,
    })
}

/// Evaluate the `requires` clause on the inputs (true when absent).
pub fn requires_holds(
    p: &TypedProgram,
    ints: &BTreeMap<String, i64>,
    arrays: &BTreeMap<String, Vec<i64>>,
) -> Result<bool, ExecError> {
    let p = p.program();
    let mut m = Machine {
        ints: BTreeMap::new(),
        arrays: BTreeMap::new(),
        max_iterations: BTreeMap::new(),
        fuel: ITERATION_FUSE,
    };
    bind_inputs(p, ints, arrays, &mut m)?;
    match &p.requires {
        None => Ok(true),
        Some(req) => eval_bool(req, &m, None),
    }
}

fn bind_inputs(
    p: &Program,
    ints: &BTreeMap<String, i64>,
    arrays: &BTreeMap<String, Vec<i64>>,
    m: &mut Machine,
) -> Result<(), ExecError> {
    for (name, ty) in &p.params {
        match ty {
            super::ast::Type::IntArray(len) => {
                let values = arrays
                    .get(name)
                    .ok_or_else(|| ExecError::BadBinding(name.clone()))?;
                if values.len() != *len {
                    return Err(ExecError::BadBinding(name.clone()));
                }
                m.arrays.insert(name.clone(), values.clone());
            }
            _ => {
                let v = ints
                    .get(name)
                    .copied()
                    .ok_or_else(|| ExecError::BadBinding(name.clone()))?;
                m.ints.insert(name.clone(), v);
            }
        }
    }
    Ok(())
}

fn exec_block(body: &[Stmt], m: &mut Machine) -> Result<Option<i64>, ExecError> {
    for stmt in body {
        if let Some(v) = exec_stmt(stmt, m)? {
            return Ok(Some(v));
        }
    }
    Ok(None)
}

fn exec_stmt(stmt: &Stmt, m: &mut Machine) -> Result<Option<i64>, ExecError> {
    match &stmt.kind {
        StmtKind::VarDecl { name, init, .. } => {
            let v = eval_int(init, m, stmt.line)?;
            m.ints.insert(name.clone(), v);
            Ok(None)
        }
        StmtKind::Assign { name, value } => {
            let v = eval_int(value, m, stmt.line)?;
            m.ints.insert(name.clone(), v);
            Ok(None)
        }
        StmtKind::ArrayAssign { name, index, value } => {
            let idx = eval_int(index, m, stmt.line)?;
            let v = eval_int(value, m, stmt.line)?;
            let arr = m
                .arrays
                .get_mut(name)
                .ok_or_else(|| ExecError::BadBinding(name.clone()))?;
            let len = arr.len();
            if idx < 0 || idx as usize >= len {
                return Err(ExecError::IndexOutOfBounds {
                    array: name.clone(),
                    index: idx,
                    len,
                    line: stmt.line,
                });
            }
            arr[idx as usize] = v;
            Ok(None)
        }
        StmtKind::If { cond, then_body, else_body } => {
            if eval_bool_at(cond, m, stmt.line)? {
                exec_block(then_body, m)
            } else {
                exec_block(else_body, m)
            }
        }
        StmtKind::While { cond, body } => {
            let mut iterations = 0u32;
            while eval_bool_at(cond, m, stmt.line)? {
                if m.fuel == 0 {
                    return Err(ExecError::IterationFuse);
                }
                m.fuel -= 1;
                iterations += 1;
                if let Some(v) = exec_block(body, m)? {
                    return Ok(Some(v));
                }
            }
            let entry = m.max_iterations.entry(stmt.line).or_insert(0);
            *entry = (*entry).max(iterations);
            Ok(None)
        }
        StmtKind::Return { value } => {
            let v = eval_int(value, m, stmt.line)?;
            Ok(Some(v))
        }
    }
}

fn eval_int(e: &Expr, m: &Machine, line: u32) -> Result<i64, ExecError> {
    Ok(match e {
        Expr::Int(n) => *n,
        Expr::Var(name) => *m
            .ints
            .get(name)
            .ok_or_else(|| ExecError::BadBinding(name.clone()))?,
        Expr::Length(array) => {
            let arr = m
                .arrays
                .get(array)
                .ok_or_else(|| ExecError::BadBinding(array.clone()))?;
            arr.len() as i64
        }
        Expr::Index { array, index } => {
            let idx = eval_int(index, m, line)?;
            let arr = m
                .arrays
                .get(array)
                .ok_or_else(|| ExecError::BadBinding(array.clone()))?;
            if idx < 0 || idx as usize >= arr.len() {
                return Err(ExecError::IndexOutOfBounds {
                    array: array.clone(),
                    index: idx,
                    len: arr.len(),
                    line,
                });
            }
            arr[idx as usize]
        }
        Expr::Binary { op, lhs, rhs } => {
            let a = eval_int(lhs, m, line)?;
            let b = eval_int(rhs, m, line)?;
            match op {
                BinOp::Add => a.wrapping_add(b),
                BinOp::Sub => a.wrapping_sub(b),
                BinOp::Mul => a.wrapping_mul(b),
                _ => unreachable!("non-arithmetic operator in int position"),
            }
        }
        _ => unreachable!("typechecked int expression"),
    })
}

fn eval_bool_at(e: &Expr, m: &Machine, line: u32) -> Result<bool, ExecError> {
    Ok(match e {
        Expr::Binary { op, lhs, rhs } if op.is_cmp() => {
            let a = eval_int(lhs, m, line)?;
            let b = eval_int(rhs, m, line)?;
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
        Expr::Binary { op: BinOp::And, lhs, rhs } => {
            eval_bool_at(lhs, m, line)? && eval_bool_at(rhs, m, line)?
        }
        Expr::Binary { op: BinOp::Or, lhs, rhs } => {
            eval_bool_at(lhs, m, line)? || eval_bool_at(rhs, m, line)?
        }
        Expr::Not(inner) => !eval_bool_at(inner, m, line)?,
        Expr::Forall { var, lo, hi, body } => {
            let lo = eval_int(lo, m, line)?;
            let hi = eval_int(hi, m, line)?;
            let mut all = true;
            let mut inner = Machine {
                ints: m.ints.clone(),
                arrays: m.arrays.clone(),
                max_iterations: BTreeMap::new(),
                fuel: m.fuel,
            };
            for v in lo..hi {
                inner.ints.insert(var.clone(), v);
                if !eval_bool_at(body, &inner, line)? {
                    all = false;
                    break;
                }
            }
            all
        }
        _ => unreachable!("typechecked bool expression"),
    })
}

/// Evaluate a specification expression, substituting `result` for `\result`.
fn eval_bool(e: &Expr, m: &Machine, result: Option<i64>) -> Result<bool, ExecError> {
    // Reuse the machine evaluator by materializing `\result` as a binding.
    fn subst(e: &Expr, result: i64) -> Expr {
        match e {
            Expr::Result => Expr::Int(result),
            Expr::Int(_) | Expr::Var(_) | Expr::Length(_) => e.clone(),
            Expr::Index { array, index } => Expr::Index {
                array: array.clone(),
                index: Box::new(subst(index, result)),
            },
            Expr::Binary { op, lhs, rhs } => Expr::Binary {
                op: *op,
                lhs: Box::new(subst(lhs, result)),
                rhs: Box::new(subst(rhs, result)),
            },
            Expr::Not(inner) => Expr::Not(Box::new(subst(inner, result))),
            Expr::Forall { var, lo, hi, body } => Expr::Forall {
                var: var.clone(),
                lo: Box::new(subst(lo, result)),
                hi: Box::new(subst(hi, result)),
                body: Box::new(subst(body, result)),
            },
        }
    }
    let e = match result {
        Some(r) => subst(e, r),
        None => e.clone(),
    };
    eval_bool_at(&e, m, 0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::{parse, typecheck};

    fn check(src: &str, ints: &[(&str, i64)], arrays: &[(&str, Vec<i64>)]) -> ExecOutcome {
        let p = typecheck(parse(src).unwrap()).unwrap();
        let ints = ints.iter().map(|(k, v)| (k.to_string(), *v)).collect();
        let arrays = arrays
            .iter()
            .map(|(k, v)| (k.to_string(), v.clone()))
            .collect();
        interpret(&p, &ints, &arrays).unwrap()
    }

    #[test]
    fn runs_a_loop() {
        let src = "function s(n: int) -> int ensures \\result >= 0 {\n\
                   var acc: int = 0;\n\
                   var i: int = 1;\n\
                   while (i <= n) {\n\
                   acc = acc + i;\n\
                   i = i + 1;\n\
                   }\n\
                   return acc;\n}";
        let out = check(src, &[("n", 4)], &[]);
        assert_eq!(out.result, 10);
        assert!(out.post_ok);
        assert_eq!(out.max_iterations.get(&4), Some(&4));
    }

    #[test]
    fn postcondition_violation_is_reported() {
        let src = "function f(i: int) -> int ensures \\result == i + 1 { return i; }";
        let out = check(src, &[("i", 3)], &[]);
        assert_eq!(out.result, 3);
        assert!(!out.post_ok);
    }

    #[test]
    fn forall_over_array() {
        let src = "function m(tab: int[3]) -> int \
                   ensures forall k in [0, tab.length) : tab[k] >= \\result \
                   { return 1; }";
        let good = check(src, &[], &[("tab", vec![1, 2, 3])]);
        assert!(good.post_ok);
        let bad = check(src, &[], &[("tab", vec![0, 2, 3])]);
        assert!(!bad.post_ok);
    }

    #[test]
    fn array_write_out_of_bounds() {
        let src = "function f(tab: int[2]) -> int ensures \\result == 0 {\n\
                   tab[5] = 1;\n\
                   return 0;\n}";
        let p = typecheck(parse(src).unwrap()).unwrap();
        let arrays = std::iter::once(("tab".to_string(), vec![0, 0])).collect();
        let err = interpret(&p, &BTreeMap::new(), &arrays).unwrap_err();
        assert!(matches!(err, ExecError::IndexOutOfBounds { .. }));
    }
}
