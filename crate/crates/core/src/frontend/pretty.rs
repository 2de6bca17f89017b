//! Line-preserving pretty printer.
//!
//! Statements are emitted on their recorded source lines (padding with blank
//! lines as needed) so that `parse(pretty_print(parse(src)))` reproduces the
//! AST, line numbers included. Expressions are printed fully parenthesized.

use super::ast::{Expr, Program, Stmt, StmtKind, Type};

pub fn pretty_print(p: &Program) -> String {
    let mut out = Emitter { buf: String::new(), line: 0 };

    let params = p
        .params
        .iter()
        .map(|(name, ty)| match ty {
            Type::IntArray(n) => format!("{name}: int[{n}]"),
            _ => format!("{name}: int"),
        })
        .collect::<Vec<_>>()
        .join(", ");
    out.emit_line(&format!("function {}({}) -> int", p.name, params));
    if let Some(req) = &p.requires {
        out.emit_line(&format!("  requires {}", expr_text(req)));
    }
    out.emit_line(&format!("  ensures {}", expr_text(&p.ensures)));
    out.emit_line("{");
    emit_block(&mut out, &p.body, 1);
    out.emit_line("}");
    out.buf
}

struct Emitter {
    buf: String,
    line: u32,
}

impl Emitter {
    /// Write `text` on the next line.
    fn emit_line(&mut self, text: &str) {
        self.buf.push_str(text);
        self.buf.push('\n');
        self.line += 1;
    }

    /// Write `text` on line `target` if it is still ahead, padding with
    /// blank lines; otherwise fall back to the next line.
    fn emit_at(&mut self, target: u32, text: &str) {
        while self.line + 1 < target {
            self.buf.push('\n');
            self.line += 1;
        }
        self.emit_line(text);
    }
}

fn emit_block(out: &mut Emitter, body: &[Stmt], depth: usize) {
    let pad = "  ".repeat(depth);
    for stmt in body {
        match &stmt.kind {
            StmtKind::VarDecl { name, init, .. } => {
                out.emit_at(stmt.line, &format!("{pad}var {name}: int = {};", expr_text(init)));
            }
            StmtKind::Assign { name, value } => {
                out.emit_at(stmt.line, &format!("{pad}{name} = {};", expr_text(value)));
            }
            StmtKind::ArrayAssign { name, index, value } => {
                out.emit_at(
                    stmt.line,
                    &format!("{pad}{name}[{}] = {};", expr_text(index), expr_text(value)),
                );
            }
            StmtKind::If { cond, then_body, else_body } => {
                out.emit_at(stmt.line, &format!("{pad}if ({}) {{", expr_text(cond)));
                emit_block(out, then_body, depth + 1);
                if else_body.is_empty() {
                    out.emit_line(&format!("{pad}}}"));
                } else {
                    out.emit_line(&format!("{pad}}}"));
                    out.emit_line(&format!("{pad}else {{"));
                    emit_block(out, else_body, depth + 1);
                    out.emit_line(&format!("{pad}}}"));
                }
            }
            StmtKind::While { cond, body } => {
                out.emit_at(stmt.line, &format!("{pad}while ({}) {{", expr_text(cond)));
                emit_block(out, body, depth + 1);
                out.emit_line(&format!("{pad}}}"));
            }
            StmtKind::Return { value } => {
                out.emit_at(stmt.line, &format!("{pad}return {};", expr_text(value)));
            }
        }
    }
}

pub(crate) fn expr_text(e: &Expr) -> String {
    match e {
        Expr::Int(n) => n.to_string(),
        Expr::Var(name) => name.clone(),
        Expr::Result => "\\result".to_string(),
        Expr::Index { array, index } => format!("{array}[{}]", expr_text(index)),
        Expr::Length(array) => format!("{array}.length"),
        Expr::Binary { op, lhs, rhs } => {
            format!("({} {} {})", expr_text(lhs), op.symbol(), expr_text(rhs))
        }
        Expr::Not(inner) => format!("!{}", expr_text(inner)),
        Expr::Forall { var, lo, hi, body } => format!(
            "forall {var} in [{}, {}) : {}",
            expr_text(lo),
            expr_text(hi),
            expr_text(body)
        ),
    }
}

#[cfg(test)]
mod tests {
    use crate::frontend::{parse, pretty_print};

    #[test]
    fn round_trip_preserves_ast_and_lines() {
        let src = "function abs(i: int, j: int) -> int\n\
                   \x20 ensures ((i < j) ==> (\\result == (j - i)))\n\
                   {\n\
                   \x20 var k: int = 0;\n\
                   \x20 if (i <= j) {\n\
                   \x20   k = k + 2;\n\
                   \x20 }\n\
                   \n\
                   \x20 return k;\n\
                   }\n";
        let p1 = parse(src).unwrap();
        let printed = pretty_print(&p1);
        let p2 = parse(&printed).unwrap();
        assert_eq!(p1, p2);
    }
}
