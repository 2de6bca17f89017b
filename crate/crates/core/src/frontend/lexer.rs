//! Hand-rolled lexer. Tracks 1-based line/column for every token.

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TokenKind {
    Ident(String),
    Int(i64),
    KwFunction,
    KwRequires,
    KwEnsures,
    KwVar,
    KwIf,
    KwElse,
    KwWhile,
    KwReturn,
    KwForall,
    KwIn,
    KwInt,
    KwResult, // `\result`
    LParen,
    RParen,
    LBrace,
    RBrace,
    LBracket,
    RBracket,
    Comma,
    Semi,
    Colon,
    Dot,
    Arrow,   // ->
    Implies, // ==>
    AndAnd,
    OrOr,
    Bang,
    Assign, // =
    EqEq,
    NotEq,
    Lt,
    Le,
    Gt,
    Ge,
    Plus,
    Minus,
    Star,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub kind: TokenKind,
    pub line: u32,
    pub col: u32,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum LexError {
    #[error("line {line}:{col}: unexpected character {ch:?}")]
    UnexpectedChar { ch: char, line: u32, col: u32 },
    #[error("line {line}:{col}: integer literal out of range")]
    IntOutOfRange { line: u32, col: u32 },
}

pub fn lex(source: &str) -> Result<Vec<Token>, LexError> {
    let mut tokens = Vec::new();
    let chars: Vec<char> = source.chars().collect();
    let mut i = 0usize;
    let mut line = 1u32;
    let mut col = 1u32;

    let keyword = |word: &str| -> Option<TokenKind> {
        Some(match word {
            "function" => TokenKind::KwFunction,
            "requires" => TokenKind::KwRequires,
            "ensures" => TokenKind::KwEnsures,
            "var" => TokenKind::KwVar,
            "if" => TokenKind::KwIf,
            "else" => TokenKind::KwElse,
            "while" => TokenKind::KwWhile,
            "return" => TokenKind::KwReturn,
            "forall" => TokenKind::KwForall,
            "in" => TokenKind::KwIn,
            "int" => TokenKind::KwInt,
            _ => return None,
        })
    };

    while i < chars.len() {
        let c = chars[i];
        let (tline, tcol) = (line, col);
        let advance = |i: &mut usize, line: &mut u32, col: &mut u32, n: usize| {
            for _ in 0..n {
                if chars[*i] == '\n' {
                    *line += 1;
                    *col = 1;
                } else {
                    *col += 1;
                }
                *i += 1;
            }
        };

        if c.is_whitespace() {
            advance(&mut i, &mut line, &mut col, 1);
            continue;
        }
        // line comments
        if c == '/' && i + 1 < chars.len() && chars[i + 1] == '/' {
            while i < chars.len() && chars[i] != '\n' {
                advance(&mut i, &mut line, &mut col, 1);
            }
            continue;
        }
        if c.is_ascii_digit() {
            let start = i;
            while i < chars.len() && chars[i].is_ascii_digit() {
                advance(&mut i, &mut line, &mut col, 1);
            }
            let text: String = chars[start..i].iter().collect();
            let value = text
                .parse::<i64>()
                .map_err(|_| LexError::IntOutOfRange { line: tline, col: tcol })?;
            tokens.push(Token { kind: TokenKind::Int(value), line: tline, col: tcol });
            continue;
        }
        if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                advance(&mut i, &mut line, &mut col, 1);
            }
            let word: String = chars[start..i].iter().collect();
            let kind = keyword(&word).unwrap_or(TokenKind::Ident(word));
            tokens.push(Token { kind, line: tline, col: tcol });
            continue;
        }
        if c == '\\' {
            // only `\result` starts with a backslash
            let rest: String = chars[i..].iter().take(7).collect();
            if rest == "\\result" {
                advance(&mut i, &mut line, &mut col, 7);
                tokens.push(Token { kind: TokenKind::KwResult, line: tline, col: tcol });
                continue;
            }
            return Err(LexError::UnexpectedChar { ch: c, line: tline, col: tcol });
        }

        let two: String = chars[i..].iter().take(2).collect();
        let three: String = chars[i..].iter().take(3).collect();
        let (kind, width) = if three == "==>" {
            (TokenKind::Implies, 3)
        } else {
            match two.as_str() {
                "->" => (TokenKind::Arrow, 2),
                "&&" => (TokenKind::AndAnd, 2),
                "||" => (TokenKind::OrOr, 2),
                "==" => (TokenKind::EqEq, 2),
                "!=" => (TokenKind::NotEq, 2),
                "<=" => (TokenKind::Le, 2),
                ">=" => (TokenKind::Ge, 2),
                _ => match c {
                    '(' => (TokenKind::LParen, 1),
                    ')' => (TokenKind::RParen, 1),
                    '{' => (TokenKind::LBrace, 1),
                    '}' => (TokenKind::RBrace, 1),
                    '[' => (TokenKind::LBracket, 1),
                    ']' => (TokenKind::RBracket, 1),
                    ',' => (TokenKind::Comma, 1),
                    ';' => (TokenKind::Semi, 1),
                    ':' => (TokenKind::Colon, 1),
                    '.' => (TokenKind::Dot, 1),
                    '!' => (TokenKind::Bang, 1),
                    '=' => (TokenKind::Assign, 1),
                    '<' => (TokenKind::Lt, 1),
                    '>' => (TokenKind::Gt, 1),
                    '+' => (TokenKind::Plus, 1),
                    '-' => (TokenKind::Minus, 1),
                    '*' => (TokenKind::Star, 1),
                    _ => {
                        return Err(LexError::UnexpectedChar { ch: c, line: tline, col: tcol });
                    }
                },
            }
        };
        advance(&mut i, &mut line, &mut col, width);
        tokens.push(Token { kind, line: tline, col: tcol });
    }
    Ok(tokens)
}
