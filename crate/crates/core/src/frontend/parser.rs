//! Recursive descent parser for the mini-language.
//!
//! Grammar sketch:
//!
//! ```text
//! program := "function" ident "(" params? ")" "->" "int" clauses block
//! param   := ident ":" ("int" | "int" "[" intlit "]")
//! clauses := ("requires" expr)? "ensures" expr
//! stmt    := "var" ident ":" "int" "=" expr ";"
//!          | ident "=" expr ";"
//!          | ident "[" expr "]" "=" expr ";"
//!          | "if" "(" expr ")" block ("else" block)?
//!          | "while" "(" expr ")" block
//!          | "return" expr ";"
//! ```
//!
//! `a ==> b` is accepted as sugar for `!a || b`; the AST carries only
//! `&&`, `||` and `!`.

use std::collections::BTreeSet;

use thiserror::Error;

use super::ast::{BinOp, Expr, Program, Stmt, StmtKind, Type};
use super::lexer::{lex, LexError, Token, TokenKind};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ParseError {
    #[error("line {line}:{col}: syntax error: {message}")]
    SyntaxError { message: String, line: u32, col: u32 },
    #[error("line {line}: duplicate declaration of `{name}`")]
    DuplicateDeclaration { name: String, line: u32 },
    #[error("missing `ensures` clause")]
    MissingEnsures,
}

impl From<LexError> for ParseError {
    fn from(e: LexError) -> Self {
        let (line, col) = match e {
            LexError::UnexpectedChar { line, col, .. } => (line, col),
            LexError::IntOutOfRange { line, col } => (line, col),
        };
        ParseError::SyntaxError { message: e.to_string(), line, col }
    }
}

/// Parse UTF-8 source text into a [`Program`], preserving statement line
/// numbers. Validates declaration uniqueness, line monotonicity and the
/// single trailing `return`.
pub fn parse(source: &str) -> Result<Program, ParseError> {
    let tokens = lex(source)?;
    let mut parser = Parser { tokens, pos: 0 };
    let program = parser.program()?;
    validate(&program)?;
    Ok(program)
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    fn at_end_err<T>(&self, expected: &str) -> Result<T, ParseError> {
        let (line, col) = self
            .tokens
            .last()
            .map(|t| (t.line, t.col))
            .unwrap_or((1, 1));
        Err(ParseError::SyntaxError {
            message: format!("unexpected end of input, expected {expected}"),
            line,
            col,
        })
    }

    fn bump(&mut self) -> Option<Token> {
        let t = self.tokens.get(self.pos).cloned();
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    fn expect(&mut self, kind: &TokenKind, what: &str) -> Result<Token, ParseError> {
        match self.peek() {
            Some(t) if &t.kind == kind => Ok(self.bump().unwrap()),
            Some(t) => Err(ParseError::SyntaxError {
                message: format!("expected {what}, found {:?}", t.kind),
                line: t.line,
                col: t.col,
            }),
            None => self.at_end_err(what),
        }
    }

    fn eat(&mut self, kind: &TokenKind) -> bool {
        if matches!(self.peek(), Some(t) if &t.kind == kind) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn ident(&mut self, what: &str) -> Result<(String, u32), ParseError> {
        match self.peek() {
            Some(Token { kind: TokenKind::Ident(name), line, .. }) => {
                let (name, line) = (name.clone(), *line);
                self.pos += 1;
                Ok((name, line))
            }
            Some(t) => Err(ParseError::SyntaxError {
                message: format!("expected {what}, found {:?}", t.kind),
                line: t.line,
                col: t.col,
            }),
            None => self.at_end_err(what),
        }
    }

    fn program(&mut self) -> Result<Program, ParseError> {
        self.expect(&TokenKind::KwFunction, "`function`")?;
        let (name, _) = self.ident("function name")?;
        self.expect(&TokenKind::LParen, "`(`")?;
        let mut params = Vec::new();
        let mut array_lengths = std::collections::BTreeMap::new();
        if !self.eat(&TokenKind::RParen) {
            loop {
                let (pname, pline) = self.ident("parameter name")?;
                self.expect(&TokenKind::Colon, "`:`")?;
                self.expect(&TokenKind::KwInt, "`int`")?;
                let ty = if self.eat(&TokenKind::LBracket) {
                    let len = match self.bump() {
                        Some(Token { kind: TokenKind::Int(n), line, col }) => {
                            if n <= 0 {
                                return Err(ParseError::SyntaxError {
                                    message: "array length must be positive".into(),
                                    line,
                                    col,
                                });
                            }
                            n as usize
                        }
                        Some(t) => {
                            return Err(ParseError::SyntaxError {
                                message: format!("expected array length, found {:?}", t.kind),
                                line: t.line,
                                col: t.col,
                            })
                        }
                        None => return self.at_end_err("array length"),
                    };
                    self.expect(&TokenKind::RBracket, "`]`")?;
                    array_lengths.insert(pname.clone(), len);
                    Type::IntArray(len)
                } else {
                    Type::Int
                };
                params.push((pname, ty));
                let _ = pline;
                if self.eat(&TokenKind::RParen) {
                    break;
                }
                self.expect(&TokenKind::Comma, "`,` or `)`")?;
            }
        }
        self.expect(&TokenKind::Arrow, "`->`")?;
        self.expect(&TokenKind::KwInt, "return type `int`")?;

        let mut requires = None;
        let mut ensures = None;
        loop {
            if self.eat(&TokenKind::KwRequires) {
                let e = self.expr()?;
                requires = Some(match requires {
                    None => e,
                    Some(prev) => Expr::binary(BinOp::And, prev, e),
                });
            } else if self.eat(&TokenKind::KwEnsures) {
                let e = self.expr()?;
                ensures = Some(match ensures {
                    None => e,
                    Some(prev) => Expr::binary(BinOp::And, prev, e),
                });
            } else {
                break;
            }
        }
        let ensures = ensures.ok_or(ParseError::MissingEnsures)?;
        let body = self.block()?;
        Ok(Program { name, params, requires, ensures, body, array_lengths })
    }

    fn block(&mut self) -> Result<Vec<Stmt>, ParseError> {
        self.expect(&TokenKind::LBrace, "`{`")?;
        let mut stmts = Vec::new();
        while !self.eat(&TokenKind::RBrace) {
            if self.peek().is_none() {
                return self.at_end_err("`}`");
            }
            stmts.push(self.stmt()?);
        }
        Ok(stmts)
    }

    fn stmt(&mut self) -> Result<Stmt, ParseError> {
        let tok = match self.peek() {
            Some(t) => t.clone(),
            None => return self.at_end_err("statement"),
        };
        let line = tok.line;
        match tok.kind {
            TokenKind::KwVar => {
                self.bump();
                let (name, _) = self.ident("variable name")?;
                self.expect(&TokenKind::Colon, "`:`")?;
                self.expect(&TokenKind::KwInt, "`int`")?;
                self.expect(&TokenKind::Assign, "`=`")?;
                let init = self.expr()?;
                self.expect(&TokenKind::Semi, "`;`")?;
                Ok(Stmt { line, kind: StmtKind::VarDecl { name, ty: Type::Int, init } })
            }
            TokenKind::KwIf => {
                self.bump();
                self.expect(&TokenKind::LParen, "`(`")?;
                let cond = self.expr()?;
                self.expect(&TokenKind::RParen, "`)`")?;
                let then_body = self.block()?;
                let else_body = if self.eat(&TokenKind::KwElse) {
                    self.block()?
                } else {
                    Vec::new()
                };
                Ok(Stmt { line, kind: StmtKind::If { cond, then_body, else_body } })
            }
            TokenKind::KwWhile => {
                self.bump();
                self.expect(&TokenKind::LParen, "`(`")?;
                let cond = self.expr()?;
                self.expect(&TokenKind::RParen, "`)`")?;
                let body = self.block()?;
                Ok(Stmt { line, kind: StmtKind::While { cond, body } })
            }
            TokenKind::KwReturn => {
                self.bump();
                let value = self.expr()?;
                self.expect(&TokenKind::Semi, "`;`")?;
                Ok(Stmt { line, kind: StmtKind::Return { value } })
            }
            TokenKind::Ident(_) => {
                let (name, _) = self.ident("identifier")?;
                if self.eat(&TokenKind::LBracket) {
                    let index = self.expr()?;
                    self.expect(&TokenKind::RBracket, "`]`")?;
                    self.expect(&TokenKind::Assign, "`=`")?;
                    let value = self.expr()?;
                    self.expect(&TokenKind::Semi, "`;`")?;
                    Ok(Stmt { line, kind: StmtKind::ArrayAssign { name, index, value } })
                } else {
                    self.expect(&TokenKind::Assign, "`=`")?;
                    let value = self.expr()?;
                    self.expect(&TokenKind::Semi, "`;`")?;
                    Ok(Stmt { line, kind: StmtKind::Assign { name, value } })
                }
            }
            other => Err(ParseError::SyntaxError {
                message: format!("expected statement, found {other:?}"),
                line: tok.line,
                col: tok.col,
            }),
        }
    }

    // expr := or_expr ("==>" expr)?   (right associative, desugars)
    fn expr(&mut self) -> Result<Expr, ParseError> {
        let lhs = self.or_expr()?;
        if self.eat(&TokenKind::Implies) {
            let rhs = self.expr()?;
            Ok(Expr::binary(BinOp::Or, Expr::Not(Box::new(lhs)), rhs))
        } else {
            Ok(lhs)
        }
    }

    fn or_expr(&mut self) -> Result<Expr, ParseError> {
        let mut e = self.and_expr()?;
        while self.eat(&TokenKind::OrOr) {
            let rhs = self.and_expr()?;
            e = Expr::binary(BinOp::Or, e, rhs);
        }
        Ok(e)
    }

    fn and_expr(&mut self) -> Result<Expr, ParseError> {
        let mut e = self.cmp_expr()?;
        while self.eat(&TokenKind::AndAnd) {
            let rhs = self.cmp_expr()?;
            e = Expr::binary(BinOp::And, e, rhs);
        }
        Ok(e)
    }

    fn cmp_expr(&mut self) -> Result<Expr, ParseError> {
        let lhs = self.add_expr()?;
        let op = match self.peek().map(|t| &t.kind) {
            Some(TokenKind::EqEq) => Some(BinOp::Eq),
            Some(TokenKind::NotEq) => Some(BinOp::Ne),
            Some(TokenKind::Lt) => Some(BinOp::Lt),
            Some(TokenKind::Le) => Some(BinOp::Le),
            Some(TokenKind::Gt) => Some(BinOp::Gt),
            Some(TokenKind::Ge) => Some(BinOp::Ge),
            _ => None,
        };
        if let Some(op) = op {
            self.bump();
            let rhs = self.add_expr()?;
            Ok(Expr::binary(op, lhs, rhs))
        } else {
            Ok(lhs)
        }
    }

    fn add_expr(&mut self) -> Result<Expr, ParseError> {
        let mut e = self.mul_expr()?;
        loop {
            if self.eat(&TokenKind::Plus) {
                let rhs = self.mul_expr()?;
                e = Expr::binary(BinOp::Add, e, rhs);
            } else if self.eat(&TokenKind::Minus) {
                let rhs = self.mul_expr()?;
                e = Expr::binary(BinOp::Sub, e, rhs);
            } else {
                break;
            }
        }
        Ok(e)
    }

    fn mul_expr(&mut self) -> Result<Expr, ParseError> {
        let mut e = self.unary_expr()?;
        while self.eat(&TokenKind::Star) {
            let rhs = self.unary_expr()?;
            e = Expr::binary(BinOp::Mul, e, rhs);
        }
        Ok(e)
    }

    fn unary_expr(&mut self) -> Result<Expr, ParseError> {
        if self.eat(&TokenKind::Bang) {
            let inner = self.unary_expr()?;
            return Ok(Expr::Not(Box::new(inner)));
        }
        if self.eat(&TokenKind::Minus) {
            let inner = self.unary_expr()?;
            return Ok(match inner {
                Expr::Int(n) => Expr::Int(-n),
                other => Expr::binary(BinOp::Sub, Expr::Int(0), other),
            });
        }
        self.primary_expr()
    }

    fn primary_expr(&mut self) -> Result<Expr, ParseError> {
        let tok = match self.peek() {
            Some(t) => t.clone(),
            None => return self.at_end_err("expression"),
        };
        match tok.kind {
            TokenKind::Int(n) => {
                self.bump();
                Ok(Expr::Int(n))
            }
            TokenKind::KwResult => {
                self.bump();
                Ok(Expr::Result)
            }
            TokenKind::LParen => {
                self.bump();
                let e = self.expr()?;
                self.expect(&TokenKind::RParen, "`)`")?;
                Ok(e)
            }
            TokenKind::KwForall => {
                self.bump();
                let (var, _) = self.ident("quantified variable")?;
                self.expect(&TokenKind::KwIn, "`in`")?;
                self.expect(&TokenKind::LBracket, "`[`")?;
                let lo = self.expr()?;
                self.expect(&TokenKind::Comma, "`,`")?;
                let hi = self.expr()?;
                self.expect(&TokenKind::RParen, "`)` closing the half-open range")?;
                self.expect(&TokenKind::Colon, "`:`")?;
                let body = self.expr()?;
                Ok(Expr::Forall {
                    var,
                    lo: Box::new(lo),
                    hi: Box::new(hi),
                    body: Box::new(body),
                })
            }
            TokenKind::Ident(_) => {
                let (name, _) = self.ident("identifier")?;
                if self.eat(&TokenKind::LBracket) {
                    let index = self.expr()?;
                    self.expect(&TokenKind::RBracket, "`]`")?;
                    Ok(Expr::Index { array: name, index: Box::new(index) })
                } else if self.eat(&TokenKind::Dot) {
                    let (field, fline) = self.ident("`length`")?;
                    if field != "length" {
                        return Err(ParseError::SyntaxError {
                            message: format!("unknown field `{field}`"),
                            line: fline,
                            col: 0,
                        });
                    }
                    Ok(Expr::Length(name))
                } else {
                    Ok(Expr::Var(name))
                }
            }
            other => Err(ParseError::SyntaxError {
                message: format!("expected expression, found {other:?}"),
                line: tok.line,
                col: tok.col,
            }),
        }
    }
}

/// Structural checks: unique declarations, strictly increasing statement
/// lines, and exactly one `return` as the final top-level statement.
fn validate(p: &Program) -> Result<(), ParseError> {
    let mut names: BTreeSet<&str> = BTreeSet::new();
    for (name, _) in &p.params {
        if !names.insert(name) {
            return Err(ParseError::DuplicateDeclaration { name: name.clone(), line: 1 });
        }
    }
    let mut last_line = 0u32;
    check_block(&p.body, &mut names, &mut last_line)?;

    let return_count = count_returns(&p.body);
    let ends_with_return = matches!(
        p.body.last().map(|s| &s.kind),
        Some(StmtKind::Return { .. })
    );
    if return_count != 1 || !ends_with_return {
        let line = p.body.last().map(|s| s.line).unwrap_or(1);
        return Err(ParseError::SyntaxError {
            message: "exactly one `return` is required, as the last top-level statement".into(),
            line,
            col: 0,
        });
    }
    Ok(())
}

fn count_returns(body: &[Stmt]) -> usize {
    body.iter()
        .map(|s| match &s.kind {
            StmtKind::Return { .. } => 1,
            StmtKind::If { then_body, else_body, .. } => {
                count_returns(then_body) + count_returns(else_body)
            }
            StmtKind::While { body, .. } => count_returns(body),
            _ => 0,
        })
        .sum()
}

fn check_block<'a>(
    body: &'a [Stmt],
    names: &mut BTreeSet<&'a str>,
    last_line: &mut u32,
) -> Result<(), ParseError> {
    for stmt in body {
        if stmt.line <= *last_line {
            return Err(ParseError::SyntaxError {
                message: format!(
                    "statement line {} does not increase over previous line {}",
                    stmt.line, *last_line
                ),
                line: stmt.line,
                col: 0,
            });
        }
        *last_line = stmt.line;
        match &stmt.kind {
            StmtKind::VarDecl { name, .. } => {
                if !names.insert(name) {
                    return Err(ParseError::DuplicateDeclaration {
                        name: name.clone(),
                        line: stmt.line,
                    });
                }
            }
            StmtKind::If { then_body, else_body, .. } => {
                check_block(then_body, names, last_line)?;
                check_block(else_body, names, last_line)?;
            }
            StmtKind::While { body, .. } => {
                check_block(body, names, last_line)?;
            }
            _ => {}
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_program() {
        let p = parse("function f() -> int ensures \\result == 0 { return 0; }").unwrap();
        assert_eq!(p.name, "f");
        assert_eq!(p.body.len(), 1);
        assert!(matches!(p.body[0].kind, StmtKind::Return { .. }));
        assert!(p.requires.is_none());
    }

    #[test]
    fn rejects_missing_ensures() {
        let err = parse("function f() -> int { return 0; }").unwrap_err();
        assert_eq!(err, ParseError::MissingEnsures);
    }

    #[test]
    fn rejects_duplicate_declaration() {
        let src = "function f(x: int) -> int ensures \\result == 0 {\nvar x: int = 1;\nreturn 0;\n}";
        assert!(matches!(
            parse(src),
            Err(ParseError::DuplicateDeclaration { .. })
        ));
    }

    #[test]
    fn rejects_two_returns() {
        let src = "function f() -> int ensures \\result == 0 {\nreturn 0;\nreturn 1;\n}";
        assert!(matches!(parse(src), Err(ParseError::SyntaxError { .. })));
    }

    #[test]
    fn implication_desugars() {
        let p = parse("function f(i: int) -> int ensures (i > 0) ==> (\\result == i) { return i; }")
            .unwrap();
        match &p.ensures {
            Expr::Binary { op: BinOp::Or, lhs, .. } => {
                assert!(matches!(**lhs, Expr::Not(_)));
            }
            other => panic!("expected desugared implication, got {other:?}"),
        }
    }

    #[test]
    fn array_param_records_length() {
        let p = parse(
            "function f(tab: int[4]) -> int ensures \\result >= 0 { return tab[0]; }",
        )
        .unwrap();
        assert_eq!(p.array_lengths.get("tab"), Some(&4));
    }
}
