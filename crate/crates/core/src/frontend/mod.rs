//! Frontend for the `.mj` mini-language: lexing, parsing, typechecking,
//! pretty printing and a concrete interpreter.
//!
//! The language is a small annotated imperative language: one function per
//! file with `requires`/`ensures` clauses, integer and fixed-length integer
//! array parameters, `var`/`if`/`while`/`return` statements, and bounded
//! `forall` quantifiers restricted to specification positions.

mod ast;
mod interp;
mod lexer;
mod parser;
mod pretty;
mod typecheck;

pub use ast::{BinOp, Expr, Program, Stmt, StmtKind, Type};
pub use interp::{interpret, requires_holds, ExecError, ExecOutcome};
pub use lexer::{LexError, Token, TokenKind};
pub use parser::{parse, ParseError};
pub use pretty::pretty_print;
pub use typecheck::{typecheck, TypeError, TypedProgram};
