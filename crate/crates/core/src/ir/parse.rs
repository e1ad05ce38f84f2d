use alloc::boxed::Box;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use super::ast::*;
use super::lexer::{syntax, tokenize, Tok, Token};
use crate::error::{Error, Result};
use crate::multiset::{FieldType, Schema};

/// Parses the textual loop language into a [`Program`].
///
/// Accumulators and results must be declared before use. Worker subscripts
/// are recognized by being the iterator of an enclosing `for`/`forall` range.
pub fn parse_program(src: &str) -> Result<Program> {
    let toks = tokenize(src)?;
    let mut p = Parser {
        toks,
        pos: 0,
        prog: Program::empty(),
        ranges: Vec::new(),
    };
    let mut body = Vec::new();
    while !p.at_eof() {
        if let Some(s) = p.item()? {
            body.push(s);
        }
    }
    p.prog.body = body;
    Ok(p.prog)
}

struct Parser {
    toks: Vec<Token>,
    pos: usize,
    prog: Program,
    ranges: Vec<String>,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn peek_at(&self, n: usize) -> &Tok {
        let i = (self.pos + n).min(self.toks.len() - 1);
        &self.toks[i].tok
    }

    fn at_eof(&self) -> bool {
        matches!(self.peek(), Tok::Eof)
    }

    fn err(&self, msg: impl Into<String>) -> Error {
        let t = &self.toks[self.pos];
        syntax(t.line, t.column, msg)
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].tok.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn is_sym(&self, s: &str) -> bool {
        matches!(self.peek(), Tok::Sym(x) if *x == s)
    }

    fn is_kw(&self, kw: &str) -> bool {
        matches!(self.peek(), Tok::Ident(x) if x == kw)
    }

    fn eat_sym(&mut self, s: &str) -> bool {
        if self.is_sym(s) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn expect_sym(&mut self, s: &str) -> Result<()> {
        if self.eat_sym(s) {
            Ok(())
        } else {
            Err(self.err(format!("expected '{s}', found {}", describe(self.peek()))))
        }
    }

    fn ident(&mut self) -> Result<String> {
        match self.peek().clone() {
            Tok::Ident(s) => {
                self.bump();
                Ok(s)
            }
            other => Err(self.err(format!("expected identifier, found {}", describe(&other)))),
        }
    }

    fn expect_kw(&mut self, kw: &str) -> Result<()> {
        if self.is_kw(kw) {
            self.bump();
            Ok(())
        } else {
            Err(self.err(format!("expected '{kw}', found {}", describe(self.peek()))))
        }
    }

    fn item(&mut self) -> Result<Option<Stmt>> {
        if self.is_kw("table") || self.is_kw("result") || self.is_kw("output") || self.is_kw("acc") {
            // An acc or result named like a keyword is still usable as a statement.
            if !matches!(self.peek_at(1), Tok::Sym(_)) || matches!(self.peek_at(1), Tok::Sym("(")) {
                self.decl()?;
                return Ok(None);
            }
        }
        self.stmt().map(Some)
    }

    fn decl(&mut self) -> Result<()> {
        let kw = self.ident()?;
        let name = self.ident()?;
        let taken = self.prog.table(&name).is_some()
            || self.prog.result(&name).is_some()
            || self.prog.acc(&name).is_some();
        if taken {
            return Err(self.err(format!("'{name}' is declared twice")));
        }
        match kw.as_str() {
            "acc" => {
                self.expect_sym(":")?;
                let ty = match self.ident()?.as_str() {
                    "int" => AccType::Int,
                    "float" => AccType::Float,
                    other => return Err(self.err(format!("accumulator type must be int or float, not '{other}'"))),
                };
                let mut keyed = false;
                let mut per_worker = false;
                while !self.is_sym(";") {
                    match self.ident()?.as_str() {
                        "keyed" => keyed = true,
                        "per_worker" => per_worker = true,
                        other => return Err(self.err(format!("unknown accumulator modifier '{other}'"))),
                    }
                }
                self.expect_sym(";")?;
                self.prog.accs.push(AccDecl {
                    name,
                    ty,
                    keyed,
                    per_worker,
                });
            }
            _ => {
                let schema = self.field_list()?;
                let mut per_worker = false;
                if kw != "table" && self.is_kw("per_worker") {
                    self.bump();
                    per_worker = true;
                }
                self.expect_sym(";")?;
                if kw == "table" {
                    self.prog.tables.push(TableDecl { name, schema });
                } else {
                    self.prog.results.push(ResultDecl {
                        name,
                        schema,
                        output: kw == "output",
                        per_worker,
                    });
                }
            }
        }
        Ok(())
    }

    fn field_list(&mut self) -> Result<Schema> {
        self.expect_sym("(")?;
        let mut schema = Schema::default();
        if !self.is_sym(")") {
            loop {
                let f = self.ident()?;
                self.expect_sym(":")?;
                let tname = self.ident()?;
                let ty = FieldType::parse(&tname).ok_or_else(|| self.err(format!("unknown type '{tname}'")))?;
                schema
                    .push(f.clone(), ty)
                    .map_err(|_| self.err(format!("duplicate field '{f}'")))?;
                if !self.eat_sym(",") {
                    break;
                }
            }
        }
        self.expect_sym(")")?;
        Ok(schema)
    }

    fn block(&mut self) -> Result<Vec<Stmt>> {
        if self.eat_sym("{") {
            let mut out = Vec::new();
            while !self.eat_sym("}") {
                if self.at_eof() {
                    return Err(self.err("unexpected end of input, expected '}'"));
                }
                out.push(self.stmt()?);
            }
            Ok(out)
        } else {
            Ok(alloc::vec![self.stmt()?])
        }
    }

    fn stmt(&mut self) -> Result<Stmt> {
        if self.is_kw("forelem") && matches!(self.peek_at(1), Tok::Sym("(")) {
            return self.forelem();
        }
        if (self.is_kw("for") || self.is_kw("forall")) && matches!(self.peek_at(1), Tok::Sym("(")) {
            return self.for_loop();
        }
        self.assignment()
    }

    fn forelem(&mut self) -> Result<Stmt> {
        self.expect_kw("forelem")?;
        self.expect_sym("(")?;
        let var = self.ident()?;
        if self.eat_sym(";") && self.ident()? != var {
            return Err(self.err("iterator names in 'forelem (i; i in ..)' must match"));
        }
        if !(self.eat_sym("∈") || (self.is_kw("in") && {
            self.bump();
            true
        })) {
            return Err(self.err("expected 'in'"));
        }
        let domain = self.domain()?;
        self.expect_sym(")")?;
        let method = if self.is_kw("using") {
            self.bump();
            match self.ident()?.as_str() {
                "scan" => Some(IterMethod::NestedScan),
                "hash" => {
                    self.expect_sym("(")?;
                    let f = self.ident()?;
                    self.expect_sym(")")?;
                    Some(IterMethod::HashProbe(f))
                }
                other => return Err(self.err(format!("unknown iteration method '{other}'"))),
            }
        } else {
            None
        };
        let body = self.block()?;
        Ok(Stmt::Loop(Loop {
            header: Header::Forelem { var, domain, method },
            body,
        }))
    }

    fn domain(&mut self) -> Result<Domain> {
        let head = self.ident()?;
        let (set, block) = if head == "p" && self.is_sym("[") {
            self.bump();
            let k = self.ident()?;
            self.expect_sym("]")?;
            (self.ident()?, Some(k))
        } else {
            match head.strip_prefix('p') {
                Some(s) if !s.is_empty() => (s.to_string(), None),
                _ => return Err(self.err(format!("index set must be written p<set>, found '{head}'"))),
            }
        };
        let mut d = Domain::all(set);
        d.block = block;
        if self.eat_sym(".") {
            let f = self.ident()?;
            if f == "distinct" && self.is_sym("(") {
                self.bump();
                d.distinct = Some(self.ident()?);
                self.expect_sym(")")?;
            } else {
                self.expect_sym("[")?;
                let value = self.expr()?;
                self.expect_sym("]")?;
                d.filter = Some(Filter { field: f, value });
            }
        }
        Ok(d)
    }

    fn for_loop(&mut self) -> Result<Stmt> {
        let parallel = self.ident()? == "forall";
        self.expect_sym("(")?;
        let var = self.ident()?;
        if self.eat_sym("=") {
            match self.bump() {
                Tok::Int(1) => {}
                _ => return Err(self.err("range loops start at 1")),
            }
            self.expect_sym(";")?;
            if self.ident()? != var {
                return Err(self.err("range condition must test the loop variable"));
            }
            self.expect_sym("<=")?;
            let n = match self.bump() {
                Tok::Int(n) if n >= 1 && n <= u32::MAX as i64 => n as u32,
                _ => return Err(self.err("range bound must be a positive integer")),
            };
            self.expect_sym(";")?;
            if self.ident()? != var {
                return Err(self.err("range increment must step the loop variable"));
            }
            self.expect_sym("++")?;
            self.expect_sym(")")?;
            self.ranges.push(var.clone());
            let body = self.block();
            self.ranges.pop();
            return Ok(Stmt::Loop(Loop {
                header: Header::Range { var, n, parallel },
                body: body?,
            }));
        }
        if parallel {
            return Err(self.err("forall loops iterate over a range"));
        }
        if !(self.eat_sym("∈") || (self.is_kw("in") && {
            self.bump();
            true
        })) {
            return Err(self.err("expected '=' or 'in'"));
        }
        self.expect_kw("X")?;
        self.expect_sym("(")?;
        let set = self.ident()?;
        self.expect_sym(".")?;
        let field = self.ident()?;
        self.expect_sym(")")?;
        let part = if self.eat_sym("[") {
            let k = self.ident()?;
            self.expect_sym("]")?;
            Some(k)
        } else {
            None
        };
        self.expect_sym(")")?;
        let body = self.block()?;
        Ok(Stmt::Loop(Loop {
            header: Header::Values { var, set, field, part },
            body,
        }))
    }

    fn assignment(&mut self) -> Result<Stmt> {
        let name = match self.peek().clone() {
            Tok::Ident(s) => s,
            other => return Err(self.err(format!("expected statement, found {}", describe(&other)))),
        };
        if self.prog.result(&name).is_some() {
            self.bump();
            let worker = if self.eat_sym("[") {
                let k = self.ident()?;
                self.expect_sym("]")?;
                Some(k)
            } else {
                None
            };
            self.expect_sym("+=")?;
            let stmt = if self.eat_sym("(") {
                let mut values = alloc::vec![self.expr()?];
                while self.eat_sym(",") {
                    values.push(self.expr()?);
                }
                self.expect_sym(")")?;
                Stmt::Union {
                    target: ResultRef { name, worker },
                    values,
                }
            } else {
                let src = self.ident()?;
                self.expect_sym("[")?;
                self.expect_sym("*")?;
                self.expect_sym("]")?;
                if src != name || worker.is_some() {
                    return Err(self.err("merge must have the form R += R[*]"));
                }
                Stmt::Merge { target: name }
            };
            self.expect_sym(";")?;
            return Ok(stmt);
        }
        if self.prog.acc(&name).is_none() {
            return Err(Error::Undeclared(format!(
                "'{name}' is not a declared accumulator or result (line {})",
                self.toks[self.pos].line
            )));
        }
        let target = self.acc_ref()?;
        let stmt = if self.eat_sym("+=") {
            Stmt::Accumulate {
                target,
                delta: self.expr()?,
            }
        } else if self.eat_sym("++") {
            Stmt::Accumulate {
                target,
                delta: Expr::Int(1),
            }
        } else if self.eat_sym("=") {
            Stmt::Assign {
                target,
                value: self.expr()?,
            }
        } else {
            return Err(self.err("expected '+=', '++' or '='"));
        };
        self.expect_sym(";")?;
        Ok(stmt)
    }

    /// Parses `name[..][..]` for a declared accumulator.
    fn acc_ref(&mut self) -> Result<AccRef> {
        let name = self.ident()?;
        let decl = self.prog.acc(&name).cloned().expect("checked by caller");
        let mut subs = Vec::new();
        while self.is_sym("[") {
            self.bump();
            subs.push(self.expr()?);
            self.expect_sym("]")?;
        }
        let mut worker = None;
        if decl.per_worker {
            if let Some(Expr::Var(v)) = subs.first() {
                if self.ranges.iter().any(|r| r == v) {
                    worker = Some(v.clone());
                    subs.remove(0);
                }
            }
        }
        let key = match (decl.keyed, subs.len()) {
            (_, 0) => None,
            (true, 1) => Some(Box::new(subs.pop().expect("one subscript"))),
            _ => return Err(self.err(format!("too many subscripts on '{name}'"))),
        };
        Ok(AccRef { name, worker, key })
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        while self.eat_sym("+") {
            lhs = Expr::Add(Box::new(lhs), Box::new(self.term()?));
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.factor()?;
        while self.is_sym("*") && !matches!(self.peek_at(1), Tok::Sym("]")) {
            self.bump();
            lhs = Expr::Mul(Box::new(lhs), Box::new(self.factor()?));
        }
        Ok(lhs)
    }

    fn factor(&mut self) -> Result<Expr> {
        match self.peek().clone() {
            Tok::Int(n) => {
                self.bump();
                Ok(Expr::Int(n))
            }
            Tok::Sym("-") => {
                self.bump();
                match self.bump() {
                    Tok::Int(n) => Ok(Expr::Int(-n)),
                    _ => Err(self.err("expected integer after '-'")),
                }
            }
            Tok::Str(s) => {
                self.bump();
                Ok(Expr::Str(s))
            }
            Tok::Sym("(") => {
                self.bump();
                let e = self.expr()?;
                self.expect_sym(")")?;
                Ok(e)
            }
            Tok::Ident(name) => {
                if name == "sum" && matches!(self.peek_at(1), Tok::Sym("(")) {
                    self.bump();
                    self.bump();
                    let acc = self.ident()?;
                    if self.prog.acc(&acc).is_none() {
                        return Err(Error::Undeclared(format!("'{acc}' is not a declared accumulator")));
                    }
                    self.expect_sym("[")?;
                    self.expect_sym("*")?;
                    self.expect_sym("]")?;
                    let key = if self.eat_sym("[") {
                        let k = self.expr()?;
                        self.expect_sym("]")?;
                        Some(Box::new(k))
                    } else {
                        None
                    };
                    self.expect_sym(")")?;
                    return Ok(Expr::SumWorkers { name: acc, key });
                }
                let is_field = matches!(self.peek_at(1), Tok::Sym("["))
                    && matches!(self.peek_at(2), Tok::Ident(_))
                    && matches!(self.peek_at(3), Tok::Sym("]"))
                    && matches!(self.peek_at(4), Tok::Sym("."));
                if is_field {
                    self.bump();
                    self.bump();
                    let var = self.ident()?;
                    self.bump();
                    self.bump();
                    let field = self.ident()?;
                    return Ok(Expr::Field { set: name, var, field });
                }
                if self.prog.acc(&name).is_some() {
                    return Ok(Expr::Acc(self.acc_ref()?));
                }
                self.bump();
                Ok(Expr::Var(name))
            }
            other => Err(self.err(format!("expected expression, found {}", describe(&other)))),
        }
    }
}

fn describe(t: &Tok) -> String {
    match t {
        Tok::Ident(s) => format!("'{s}'"),
        Tok::Int(n) => format!("'{n}'"),
        Tok::Str(s) => format!("\"{s}\""),
        Tok::Sym(s) => format!("'{s}'"),
        Tok::Eof => "end of input".into(),
    }
}
