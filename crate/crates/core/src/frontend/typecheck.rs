//! Type checking and specification-position rules.

use std::collections::BTreeMap;

use thiserror::Error;

use super::ast::{Expr, Program, Stmt, StmtKind, Type};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TypeError {
    #[error("line {line}: type mismatch: expected {expected}, found {found} in {context}")]
    TypeMismatch {
        expected: String,
        found: String,
        context: String,
        line: u32,
    },
    #[error("undeclared variable `{name}`")]
    UndeclaredVariable { name: String },
    #[error("line {line}: bounded forall is only allowed inside requires/ensures")]
    QuantifierOutsideSpec { line: u32 },
    #[error("`\\result` is only allowed inside ensures")]
    ResultOutsideEnsures,
    #[error("quantifier bounds must be constant expressions (literals and array lengths)")]
    NonConstantQuantifierBounds,
}

/// A typechecked program. Construction guarantees that every expression is
/// well typed, conditions are boolean, `\result` appears only in `ensures`,
/// and quantifiers appear only in specification positions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TypedProgram {
    program: Program,
}

impl TypedProgram {
    pub fn program(&self) -> &Program {
        &self.program
    }

    pub fn into_program(self) -> Program {
        self.program
    }
}

struct Ctx {
    vars: BTreeMap<String, Type>,
    array_lengths: BTreeMap<String, usize>,
}

#[derive(Clone, Copy, PartialEq)]
enum Position {
    Body,
    Requires,
    Ensures,
}

/// Check `p`, returning it wrapped as [`TypedProgram`].
///
/// `ensures` may mention `\result`, parameters and top-level locals (the
/// value they hold when the function returns); `requires` only parameters.
pub fn typecheck(p: Program) -> Result<TypedProgram, TypeError> {
    let mut ctx = Ctx {
        vars: BTreeMap::new(),
        array_lengths: p.array_lengths.clone(),
    };
    for (name, ty) in &p.params {
        ctx.vars.insert(name.clone(), *ty);
    }

    if let Some(req) = &p.requires {
        expect_type(req, Type::Bool, &ctx, Position::Requires, 0, "requires clause")?;
    }

    check_block(&p.body, &mut ctx)?;

    // ensures is checked after the body so locals are in scope.
    expect_type(&p.ensures, Type::Bool, &ctx, Position::Ensures, 0, "ensures clause")?;
    Ok(TypedProgram { program: p })
}

fn check_block(body: &[Stmt], ctx: &mut Ctx) -> Result<(), TypeError> {
    for stmt in body {
        check_stmt(stmt, ctx)?;
    }
    Ok(())
}

fn check_stmt(stmt: &Stmt, ctx: &mut Ctx) -> Result<(), TypeError> {
    let line = stmt.line;
    match &stmt.kind {
        StmtKind::VarDecl { name, ty, init } => {
            expect_type(init, Type::Int, ctx, Position::Body, line, "initializer")?;
            ctx.vars.insert(name.clone(), *ty);
            Ok(())
        }
        StmtKind::Assign { name, value } => {
            let target = lookup(ctx, name)?;
            if target != Type::Int {
                return Err(TypeError::TypeMismatch {
                    expected: "int".into(),
                    found: target.to_string(),
                    context: format!("assignment to `{name}`"),
                    line,
                });
            }
            expect_type(value, Type::Int, ctx, Position::Body, line, "assigned value")
        }
        StmtKind::ArrayAssign { name, index, value } => {
            let target = lookup(ctx, name)?;
            if !matches!(target, Type::IntArray(_)) {
                return Err(TypeError::TypeMismatch {
                    expected: "int array".into(),
                    found: target.to_string(),
                    context: format!("array assignment to `{name}`"),
                    line,
                });
            }
            expect_type(index, Type::Int, ctx, Position::Body, line, "array index")?;
            expect_type(value, Type::Int, ctx, Position::Body, line, "assigned value")
        }
        StmtKind::If { cond, then_body, else_body } => {
            expect_type(cond, Type::Bool, ctx, Position::Body, line, "if condition")?;
            check_block(then_body, ctx)?;
            check_block(else_body, ctx)
        }
        StmtKind::While { cond, body } => {
            expect_type(cond, Type::Bool, ctx, Position::Body, line, "while condition")?;
            check_block(body, ctx)
        }
        StmtKind::Return { value } => {
            expect_type(value, Type::Int, ctx, Position::Body, line, "return value")
        }
    }
}

fn lookup(ctx: &Ctx, name: &str) -> Result<Type, TypeError> {
    ctx.vars
        .get(name)
        .copied()
        .ok_or_else(|| TypeError::UndeclaredVariable { name: name.to_string() })
}

fn expect_type(
    e: &Expr,
    want: Type,
    ctx: &Ctx,
    pos: Position,
    line: u32,
    context: &str,
) -> Result<(), TypeError> {
    let found = infer(e, ctx, pos, line)?;
    if found != want {
        return Err(TypeError::TypeMismatch {
            expected: want.to_string(),
            found: found.to_string(),
            context: context.to_string(),
            line,
        });
    }
    Ok(())
}

fn infer(e: &Expr, ctx: &Ctx, pos: Position, line: u32) -> Result<Type, TypeError> {
    match e {
        Expr::Int(_) => Ok(Type::Int),
        Expr::Var(name) => lookup(ctx, name),
        Expr::Result => {
            if pos == Position::Ensures {
                Ok(Type::Int)
            } else {
                Err(TypeError::ResultOutsideEnsures)
            }
        }
        Expr::Index { array, index } => {
            let arr = lookup(ctx, array)?;
            if !matches!(arr, Type::IntArray(_)) {
                return Err(TypeError::TypeMismatch {
                    expected: "int array".into(),
                    found: arr.to_string(),
                    context: format!("index into `{array}`"),
                    line,
                });
            }
            expect_type(index, Type::Int, ctx, pos, line, "array index")?;
            Ok(Type::Int)
        }
        Expr::Length(array) => {
            let arr = lookup(ctx, array)?;
            if !matches!(arr, Type::IntArray(_)) {
                return Err(TypeError::TypeMismatch {
                    expected: "int array".into(),
                    found: arr.to_string(),
                    context: format!("`{array}.length`"),
                    line,
                });
            }
            Ok(Type::Int)
        }
        Expr::Binary { op, lhs, rhs } => {
            if op.is_arith() {
                expect_type(lhs, Type::Int, ctx, pos, line, "arithmetic operand")?;
                expect_type(rhs, Type::Int, ctx, pos, line, "arithmetic operand")?;
                Ok(Type::Int)
            } else if op.is_cmp() {
                expect_type(lhs, Type::Int, ctx, pos, line, "comparison operand")?;
                expect_type(rhs, Type::Int, ctx, pos, line, "comparison operand")?;
                Ok(Type::Bool)
            } else {
                expect_type(lhs, Type::Bool, ctx, pos, line, "boolean operand")?;
                expect_type(rhs, Type::Bool, ctx, pos, line, "boolean operand")?;
                Ok(Type::Bool)
            }
        }
        Expr::Not(inner) => {
            expect_type(inner, Type::Bool, ctx, pos, line, "negated expression")?;
            Ok(Type::Bool)
        }
        Expr::Forall { var, lo, hi, body } => {
            if pos == Position::Body {
                return Err(TypeError::QuantifierOutsideSpec { line });
            }
            if !is_const_expr(lo) || !is_const_expr(hi) {
                return Err(TypeError::NonConstantQuantifierBounds);
            }
            if ctx.vars.contains_key(var) {
                return Err(TypeError::TypeMismatch {
                    expected: "fresh quantifier variable".into(),
                    found: format!("`{var}` already declared"),
                    context: "forall binder".into(),
                    line,
                });
            }
            let mut inner_ctx = Ctx {
                vars: ctx.vars.clone(),
                array_lengths: ctx.array_lengths.clone(),
            };
            inner_ctx.vars.insert(var.clone(), Type::Int);
            expect_type(body, Type::Bool, &inner_ctx, pos, line, "forall body")?;
            Ok(Type::Bool)
        }
    }
}

/// Quantifier bounds must evaluate at analysis time: literals, `a.length`
/// and arithmetic over them.
fn is_const_expr(e: &Expr) -> bool {
    match e {
        Expr::Int(_) | Expr::Length(_) => true,
        Expr::Binary { op, lhs, rhs } if op.is_arith() => is_const_expr(lhs) && is_const_expr(rhs),
        _ => false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::parse;

    #[test]
    fn int_condition_is_rejected() {
        let p = parse(
            "function f(k: int) -> int ensures \\result == 0 {\nif (k) {\nk = 1;\n}\nreturn 0;\n}",
        )
        .unwrap();
        assert!(matches!(typecheck(p), Err(TypeError::TypeMismatch { .. })));
    }

    #[test]
    fn forall_in_body_is_rejected() {
        let src = "function f(tab: int[3]) -> int ensures \\result == 0 {\n\
                   var x: int = 0;\n\
                   if (forall k in [0, 3) : tab[k] >= 0) {\nx = 1;\n}\n\
                   return x;\n}";
        let p = parse(src).unwrap();
        assert!(matches!(
            typecheck(p),
            Err(TypeError::QuantifierOutsideSpec { .. })
        ));
    }

    #[test]
    fn forall_in_ensures_is_accepted() {
        let src = "function f(tab: int[3]) -> int \n\
                   ensures forall k in [0, tab.length) : tab[k] >= \\result {\n\
                   return 0;\n}";
        let p = parse(src).unwrap();
        assert!(typecheck(p).is_ok());
    }

    #[test]
    fn undeclared_variable() {
        let p = parse("function f() -> int ensures \\result == 0 { return y; }").unwrap();
        assert!(matches!(
            typecheck(p),
            Err(TypeError::UndeclaredVariable { .. })
        ));
    }

    #[test]
    fn result_in_body_is_rejected() {
        let p = parse("function f() -> int ensures \\result == 0 { return \\result; }").unwrap();
        assert!(matches!(typecheck(p), Err(TypeError::ResultOutsideEnsures)));
    }

    #[test]
    fn ensures_may_reference_locals() {
        let src = "function f() -> int ensures \\result <= cap {\n\
                   var cap: int = 10;\n\
                   return 5;\n}";
        let p = parse(src).unwrap();
        assert!(typecheck(p).is_ok());
    }
}
