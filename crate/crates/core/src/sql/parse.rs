use alloc::boxed::Box;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use super::ast::*;
use super::lexer::{syntax, tokenize, Tok, Token};
use crate::error::{Error, Result};

const RESERVED: &[&str] = &[
    "SELECT", "FROM", "WHERE", "GROUP", "BY", "AND", "AS", "DISTINCT", "COUNT", "SUM", "CREATE", "VIEW", "ORDER",
    "HAVING", "LIMIT", "OFFSET", "JOIN", "ON", "LEFT", "RIGHT", "OUTER", "INNER", "FULL", "CROSS", "NATURAL", "UNION",
    "INTERSECT", "EXCEPT", "OR", "NOT", "IN", "LIKE", "BETWEEN", "IS", "NULL", "AVG", "MIN", "MAX", "CASE",
];

/// Constructs outside the subset, with the name used in diagnostics.
const UNSUPPORTED: &[(&str, &str)] = &[
    ("ORDER", "ORDER BY"),
    ("HAVING", "HAVING"),
    ("LIMIT", "LIMIT"),
    ("OFFSET", "OFFSET"),
    ("LEFT", "OUTER JOIN"),
    ("RIGHT", "OUTER JOIN"),
    ("FULL", "OUTER JOIN"),
    ("OUTER", "OUTER JOIN"),
    ("JOIN", "JOIN syntax (use comma joins with WHERE equalities)"),
    ("INNER", "JOIN syntax (use comma joins with WHERE equalities)"),
    ("CROSS", "JOIN syntax (use comma joins with WHERE equalities)"),
    ("NATURAL", "JOIN syntax (use comma joins with WHERE equalities)"),
    ("UNION", "UNION"),
    ("INTERSECT", "INTERSECT"),
    ("EXCEPT", "EXCEPT"),
    ("OR", "OR in WHERE"),
    ("NOT", "NOT in WHERE"),
    ("IN", "IN predicate"),
    ("LIKE", "LIKE predicate"),
    ("BETWEEN", "BETWEEN predicate"),
    ("IS", "NULL test"),
    ("INSERT", "INSERT"),
    ("UPDATE", "UPDATE"),
    ("DELETE", "DELETE"),
];

/// Parses zero or more `CREATE VIEW name AS SELECT ..;` followed by one `SELECT`.
/// Keywords are case-insensitive; identifiers keep their case.
pub fn parse_sql(text: &str) -> Result<SqlQuery> {
    let mut p = Parser {
        toks: tokenize(text)?,
        pos: 0,
    };
    let mut views = Vec::new();
    while p.is_kw("CREATE") {
        p.pos += 1;
        p.expect_kw("VIEW")?;
        let name = p.ident("view name")?;
        p.expect_kw("AS")?;
        let select = p.select()?;
        p.expect_sym(";")?;
        views.push(View { name, select });
    }
    p.unsupported_here()?;
    let select = p.select()?;
    p.eat_sym(";");
    p.unsupported_here()?;
    if p.peek().tok != Tok::Eof {
        return Err(p.err("expected end of input"));
    }
    Ok(SqlQuery { views, select })
}

struct Parser {
    toks: Vec<Token>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Token {
        &self.toks[self.pos]
    }

    fn peek_at(&self, n: usize) -> &Tok {
        &self.toks[(self.pos + n).min(self.toks.len() - 1)].tok
    }

    fn err(&self, msg: impl Into<String>) -> Error {
        let t = self.peek();
        syntax(t.line, t.column, msg)
    }

    fn is_kw(&self, kw: &str) -> bool {
        matches!(&self.peek().tok, Tok::Word(w) if w.eq_ignore_ascii_case(kw))
    }

    fn eat_kw(&mut self, kw: &str) -> bool {
        let hit = self.is_kw(kw);
        if hit {
            self.pos += 1;
        }
        hit
    }

    fn expect_kw(&mut self, kw: &str) -> Result<()> {
        if self.eat_kw(kw) {
            Ok(())
        } else {
            Err(self.err(format!("expected {kw}")))
        }
    }

    fn is_sym(&self, s: &str) -> bool {
        matches!(&self.peek().tok, Tok::Sym(x) if *x == s)
    }

    fn eat_sym(&mut self, s: &str) -> bool {
        let hit = self.is_sym(s);
        if hit {
            self.pos += 1;
        }
        hit
    }

    fn expect_sym(&mut self, s: &str) -> Result<()> {
        if self.eat_sym(s) {
            Ok(())
        } else {
            Err(self.err(format!("expected '{s}'")))
        }
    }

    /// Fails with a named diagnostic when the next word starts a construct outside the subset.
    fn unsupported_here(&self) -> Result<()> {
        if let Tok::Word(w) = &self.peek().tok {
            let up = w.to_ascii_uppercase();
            if let Some((_, name)) = UNSUPPORTED.iter().find(|(k, _)| *k == up) {
                return Err(Error::Unsupported(format!(
                    "{name} at {}:{}",
                    self.peek().line,
                    self.peek().column
                )));
            }
        }
        if let Tok::Sym(s @ ("<" | ">" | "<=" | ">=" | "<>" | "!=")) = &self.peek().tok {
            return Err(Error::Unsupported(format!(
                "comparison '{s}' at {}:{} (only '=' is supported)",
                self.peek().line,
                self.peek().column
            )));
        }
        Ok(())
    }

    fn ident(&mut self, what: &str) -> Result<String> {
        match &self.peek().tok {
            Tok::Word(w) if !RESERVED.iter().any(|r| w.eq_ignore_ascii_case(r)) => {
                let w = w.clone();
                self.pos += 1;
                Ok(w)
            }
            _ => {
                self.unsupported_here()?;
                Err(self.err(format!("expected {what}")))
            }
        }
    }

    fn select(&mut self) -> Result<Select> {
        self.expect_kw("SELECT")?;
        let distinct = self.eat_kw("DISTINCT");
        let mut items = vec_one(self.item()?);
        while self.eat_sym(",") {
            items.push(self.item()?);
        }
        self.unsupported_here()?;
        self.expect_kw("FROM")?;
        let mut from = vec_one(self.from_item()?);
        while self.eat_sym(",") {
            from.push(self.from_item()?);
        }
        self.unsupported_here()?;
        let mut conds = Vec::new();
        if self.eat_kw("WHERE") {
            conds.push(self.cond()?);
            while self.eat_kw("AND") {
                conds.push(self.cond()?);
            }
        }
        self.unsupported_here()?;
        let mut group_by = None;
        if self.eat_kw("GROUP") {
            self.expect_kw("BY")?;
            group_by = Some(self.colref()?);
            if self.is_sym(",") {
                return Err(Error::Unsupported("GROUP BY on more than one column".into()));
            }
        }
        self.unsupported_here()?;
        Ok(Select {
            distinct,
            items,
            from,
            conds,
            group_by,
        })
    }

    fn item(&mut self) -> Result<SelectItem> {
        let expr = if self.eat_sym("*") {
            ItemExpr::Star
        } else if self.is_sym("(") {
            self.pos += 1;
            let sub = self.select()?;
            self.expect_sym(")")?;
            ItemExpr::Subquery(Box::new(sub))
        } else if self.is_kw("COUNT") && self.peek_at(1) == &Tok::Sym("(") {
            self.pos += 2;
            if self.is_kw("DISTINCT") {
                return Err(Error::Unsupported("COUNT(DISTINCT ..)".into()));
            }
            let arg = if self.eat_sym("*") { None } else { Some(self.colref()?) };
            self.expect_sym(")")?;
            ItemExpr::Count(arg)
        } else if self.is_kw("SUM") && self.peek_at(1) == &Tok::Sym("(") {
            self.pos += 2;
            let arg = self.colref()?;
            self.expect_sym(")")?;
            ItemExpr::Sum(arg)
        } else if ["AVG", "MIN", "MAX"].iter().any(|k| self.is_kw(k)) {
            let Tok::Word(w) = &self.peek().tok else { unreachable!() };
            return Err(Error::Unsupported(format!("aggregate {}", w.to_ascii_uppercase())));
        } else {
            ItemExpr::Column(self.colref()?)
        };
        let alias = if self.eat_kw("AS") {
            Some(self.ident("column alias")?)
        } else if matches!(&self.peek().tok, Tok::Word(w) if !RESERVED.iter().any(|r| w.eq_ignore_ascii_case(r))) {
            Some(self.ident("column alias")?)
        } else {
            None
        };
        Ok(SelectItem { expr, alias })
    }

    fn from_item(&mut self) -> Result<FromItem> {
        if self.is_sym("(") {
            return Err(Error::Unsupported("subquery in FROM".into()));
        }
        let table = self.ident("table name")?;
        let alias = if self.eat_kw("AS") {
            Some(self.ident("table alias")?)
        } else if matches!(&self.peek().tok, Tok::Word(w) if !RESERVED.iter().any(|r| w.eq_ignore_ascii_case(r))) {
            Some(self.ident("table alias")?)
        } else {
            None
        };
        Ok(FromItem { table, alias })
    }

    fn colref(&mut self) -> Result<ColRef> {
        let first = self.ident("column")?;
        if self.eat_sym(".") {
            let name = self.ident("column")?;
            Ok(ColRef {
                qual: Some(first),
                name,
            })
        } else {
            Ok(ColRef {
                qual: None,
                name: first,
            })
        }
    }

    fn cond(&mut self) -> Result<Cond> {
        if self.is_sym("(") {
            return Err(Error::Unsupported("parenthesised condition".into()));
        }
        let left = self.operand()?;
        self.unsupported_here()?;
        self.expect_sym("=")?;
        let right = self.operand()?;
        Ok(Cond { left, right })
    }

    fn operand(&mut self) -> Result<Operand> {
        match self.peek().tok.clone() {
            Tok::Int(v) => {
                self.pos += 1;
                Ok(Operand::Int(v))
            }
            Tok::Sym("-") if matches!(self.peek_at(1), Tok::Int(_)) => {
                let Tok::Int(v) = self.peek_at(1).clone() else { unreachable!() };
                self.pos += 2;
                Ok(Operand::Int(-v))
            }
            Tok::Str(s) => {
                self.pos += 1;
                Ok(Operand::Str(s))
            }
            Tok::Sym("{") => {
                self.pos += 1;
                let name = match self.peek().tok.clone() {
                    Tok::Int(v) => v.to_string(),
                    Tok::Word(w) => w,
                    _ => return Err(self.err("expected parameter name")),
                };
                self.pos += 1;
                self.expect_sym("}")?;
                Ok(Operand::Param(name))
            }
            Tok::Sym(":") => {
                self.pos += 1;
                match self.peek().tok.clone() {
                    Tok::Word(w) => {
                        self.pos += 1;
                        Ok(Operand::Param(w))
                    }
                    _ => Err(self.err("expected parameter name")),
                }
            }
            _ => Ok(Operand::Col(self.colref()?)),
        }
    }
}

fn vec_one<T>(x: T) -> Vec<T> {
    alloc::vec![x]
}
