use alloc::string::String;
use core::fmt::{self, Display, Formatter, Write};

use super::ast::*;
use crate::multiset::Schema;

fn fields(f: &mut Formatter<'_>, s: &Schema) -> fmt::Result {
    f.write_char('(')?;
    for (i, fld) in s.fields().iter().enumerate() {
        if i > 0 {
            f.write_str(", ")?;
        }
        write!(f, "{}: {}", fld.name, fld.ty)?;
    }
    f.write_char(')')
}

impl Display for Program {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        for t in &self.tables {
            write!(f, "table {}", t.name)?;
            fields(f, &t.schema)?;
            f.write_str(";\n")?;
        }
        for r in &self.results {
            write!(f, "{} {}", if r.output { "output" } else { "result" }, r.name)?;
            fields(f, &r.schema)?;
            if r.per_worker {
                f.write_str(" per_worker")?;
            }
            f.write_str(";\n")?;
        }
        for a in &self.accs {
            let ty = match a.ty {
                AccType::Int => "int",
                AccType::Float => "float",
            };
            write!(f, "acc {}: {ty}", a.name)?;
            if a.keyed {
                f.write_str(" keyed")?;
            }
            if a.per_worker {
                f.write_str(" per_worker")?;
            }
            f.write_str(";\n")?;
        }
        let has_decls = !(self.tables.is_empty() && self.results.is_empty() && self.accs.is_empty());
        if has_decls && !self.body.is_empty() {
            f.write_char('\n')?;
        }
        for s in &self.body {
            write_stmt(f, s, 0)?;
        }
        Ok(())
    }
}

impl Display for Stmt {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        write_stmt(f, self, 0)
    }
}

fn indent(f: &mut Formatter<'_>, depth: usize) -> fmt::Result {
    for _ in 0..depth {
        f.write_str("  ")?;
    }
    Ok(())
}

fn write_stmt(f: &mut Formatter<'_>, s: &Stmt, depth: usize) -> fmt::Result {
    indent(f, depth)?;
    match s {
        Stmt::Loop(l) => {
            write!(f, "{} {{\n", l.header)?;
            for b in &l.body {
                write_stmt(f, b, depth + 1)?;
            }
            indent(f, depth)?;
            f.write_str("}\n")
        }
        Stmt::Accumulate { target, delta } => writeln!(f, "{target} += {delta};"),
        Stmt::Assign { target, value } => writeln!(f, "{target} = {value};"),
        Stmt::Union { target, values } => {
            f.write_str(&target.name)?;
            if let Some(w) = &target.worker {
                write!(f, "[{w}]")?;
            }
            f.write_str(" += (")?;
            for (i, v) in values.iter().enumerate() {
                if i > 0 {
                    f.write_str(", ")?;
                }
                write!(f, "{v}")?;
            }
            f.write_str(");\n")
        }
        Stmt::Merge { target } => writeln!(f, "{target} += {target}[*];"),
    }
}

impl Display for Header {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        match self {
            Header::Forelem { var, domain, method } => {
                write!(f, "forelem ({var} in {domain})")?;
                match method {
                    Some(IterMethod::NestedScan) => f.write_str(" using scan"),
                    Some(IterMethod::HashProbe(fld)) => write!(f, " using hash({fld})"),
                    None => Ok(()),
                }
            }
            Header::Range { var, n, parallel } => {
                let kw = if *parallel { "forall" } else { "for" };
                write!(f, "{kw} ({var} = 1; {var} <= {n}; {var}++)")
            }
            Header::Values { var, set, field, part } => {
                write!(f, "for ({var} in X({set}.{field})")?;
                if let Some(k) = part {
                    write!(f, "[{k}]")?;
                }
                f.write_char(')')
            }
        }
    }
}

impl Display for Domain {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        match &self.block {
            Some(k) => write!(f, "p[{k}]{}", self.set)?,
            None => write!(f, "p{}", self.set)?,
        }
        if let Some(d) = &self.distinct {
            write!(f, ".distinct({d})")?;
        }
        if let Some(flt) = &self.filter {
            write!(f, ".{}[{}]", flt.field, flt.value)?;
        }
        Ok(())
    }
}

impl Display for AccRef {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name)?;
        if let Some(w) = &self.worker {
            write!(f, "[{w}]")?;
        }
        if let Some(k) = &self.key {
            write!(f, "[{k}]")?;
        }
        Ok(())
    }
}

fn quote(f: &mut Formatter<'_>, s: &str) -> fmt::Result {
    f.write_char('"')?;
    for c in s.chars() {
        match c {
            '"' => f.write_str("\\\"")?,
            '\\' => f.write_str("\\\\")?,
            '\n' => f.write_str("\\n")?,
            c => f.write_char(c)?,
        }
    }
    f.write_char('"')
}

impl Display for Expr {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Int(n) => write!(f, "{n}"),
            Expr::Str(s) => quote(f, s),
            Expr::Field { set, var, field } => write!(f, "{set}[{var}].{field}"),
            Expr::Var(v) => f.write_str(v),
            Expr::Acc(r) => write!(f, "{r}"),
            Expr::SumWorkers { name, key } => {
                write!(f, "sum({name}[*]")?;
                if let Some(k) = key {
                    write!(f, "[{k}]")?;
                }
                f.write_char(')')
            }
            Expr::Add(a, b) => {
                write!(f, "{a} + ")?;
                if matches!(**b, Expr::Add(..)) {
                    write!(f, "({b})")
                } else {
                    write!(f, "{b}")
                }
            }
            Expr::Mul(a, b) => {
                for (i, side) in [a, b].into_iter().enumerate() {
                    if i == 1 {
                        f.write_str(" * ")?;
                    }
                    let paren = matches!(**side, Expr::Add(..)) || (i == 1 && matches!(**side, Expr::Mul(..)));
                    if paren {
                        write!(f, "({side})")?;
                    } else {
                        write!(f, "{side}")?;
                    }
                }
                Ok(())
            }
        }
    }
}

/// Canonical text of a program; parsing it yields an equal program.
pub fn pretty(p: &Program) -> String {
    alloc::format!("{p}")
}

#[cfg(test)]
mod tests {
    use super::super::parse::parse_program;
    use super::*;
    use alloc::boxed::Box;

    const SRC: &str = "table access(url: str, hits: int);
result G(url: str);
output R(url: str, count: int) per_worker;
acc count: int keyed per_worker;
acc total: float;

forelem (i in paccess.distinct(url)) {
  G += (access[i].url);
}
forall (k = 1; k <= 4; k++) {
  count[k] = 0;
  for (l in X(access.url)[k]) {
    forelem (j in paccess.url[l]) using hash(url) {
      count[k][access[j].url] += access[j].hits * (2 + 3);
    }
  }
  forelem (i in p[k]access) {
    R[k] += (access[i].url, count[k][access[i].url]);
  }
}
R += R[*];
total = sum(count[*][\"a\\\"q\"]) + -4;
";

    #[test]
    fn round_trip_is_identity() {
        let p = parse_program(SRC).unwrap();
        assert_eq!(pretty(&p), SRC);
        assert_eq!(parse_program(&pretty(&p)).unwrap(), p);
    }

    #[test]
    fn right_nested_sums_keep_parens() {
        let e = Expr::Add(
            Box::new(Expr::Int(1)),
            Box::new(Expr::Add(Box::new(Expr::Int(2)), Box::new(Expr::Int(3)))),
        );
        assert_eq!(alloc::format!("{e}"), "1 + (2 + 3)");
    }
}
