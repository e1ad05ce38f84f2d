use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Tok {
    Ident(String),
    Int(i64),
    Str(String),
    Sym(&'static str),
    Eof,
}

#[derive(Debug, Clone)]
pub(crate) struct Token {
    pub tok: Tok,
    pub line: usize,
    pub column: usize,
}

const SYMBOLS: &[&str] = &[
    "+=", "++", "<=", "(", ")", "{", "}", "[", "]", ";", ",", ".", ":", "=", "*", "+", "-", "∈",
];

pub(crate) fn syntax(line: usize, column: usize, message: impl Into<String>) -> Error {
    Error::Syntax {
        line,
        column,
        message: message.into(),
    }
}

/// Splits source text into tokens. `//` starts a line comment.
pub(crate) fn tokenize(src: &str) -> Result<Vec<Token>> {
    let mut out = Vec::new();
    let mut line = 1;
    let mut col = 1;
    let mut rest = src;
    while let Some(c) = rest.chars().next() {
        let (tl, tc) = (line, col);
        if c == '\n' {
            line += 1;
            col = 1;
            rest = &rest[1..];
            continue;
        }
        if c.is_whitespace() {
            col += 1;
            rest = &rest[c.len_utf8()..];
            continue;
        }
        if rest.starts_with("//") {
            let end = rest.find('\n').unwrap_or(rest.len());
            col += rest[..end].chars().count();
            rest = &rest[end..];
            continue;
        }
        if c.is_ascii_alphabetic() || c == '_' {
            let end = rest
                .find(|ch: char| !(ch.is_ascii_alphanumeric() || ch == '_'))
                .unwrap_or(rest.len());
            out.push(Token {
                tok: Tok::Ident(rest[..end].into()),
                line: tl,
                column: tc,
            });
            col += end;
            rest = &rest[end..];
            continue;
        }
        if c.is_ascii_digit() {
            let end = rest.find(|ch: char| !ch.is_ascii_digit()).unwrap_or(rest.len());
            let n: i64 = rest[..end]
                .parse()
                .map_err(|_| syntax(tl, tc, "integer literal out of range"))?;
            out.push(Token {
                tok: Tok::Int(n),
                line: tl,
                column: tc,
            });
            col += end;
            rest = &rest[end..];
            continue;
        }
        if c == '"' {
            let mut s = String::new();
            let mut chars = rest[1..].char_indices();
            let mut consumed = None;
            while let Some((i, ch)) = chars.next() {
                match ch {
                    '"' => {
                        consumed = Some(i + 2);
                        break;
                    }
                    '\\' => match chars.next() {
                        Some((_, 'n')) => s.push('\n'),
                        Some((_, e @ ('"' | '\\'))) => s.push(e),
                        _ => return Err(syntax(tl, tc, "bad escape in string literal")),
                    },
                    '\n' => return Err(syntax(tl, tc, "unterminated string literal")),
                    other => s.push(other),
                }
            }
            let Some(n) = consumed else {
                return Err(syntax(tl, tc, "unterminated string literal"));
            };
            col += rest[..n].chars().count();
            rest = &rest[n..];
            out.push(Token {
                tok: Tok::Str(s),
                line: tl,
                column: tc,
            });
            continue;
        }
        match SYMBOLS.iter().find(|s| rest.starts_with(**s)) {
            Some(sym) => {
                out.push(Token {
                    tok: Tok::Sym(sym),
                    line: tl,
                    column: tc,
                });
                col += sym.chars().count();
                rest = &rest[sym.len()..];
            }
            None => return Err(syntax(tl, tc, alloc::format!("unexpected character '{c}'"))),
        }
    }
    out.push(Token {
        tok: Tok::Eof,
        line,
        column: col,
    });
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tokens_and_positions() {
        let t = tokenize("acc x: int;\n  x += \"a\\\"b\"; // c\n∈").unwrap();
        assert_eq!(t[0].tok, Tok::Ident("acc".into()));
        assert_eq!(t[2].tok, Tok::Sym(":"));
        let plus = t.iter().find(|t| t.tok == Tok::Sym("+=")).unwrap();
        assert_eq!((plus.line, plus.column), (2, 5));
        assert!(t.iter().any(|t| t.tok == Tok::Str("a\"b".into())));
        assert_eq!(t[t.len() - 2].tok, Tok::Sym("∈"));
    }

    #[test]
    fn unterminated_string() {
        assert!(matches!(
            tokenize("x \"abc"),
            Err(Error::Syntax { line: 1, column: 3, .. })
        ));
    }
}
