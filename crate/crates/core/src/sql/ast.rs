use alloc::boxed::Box;
use alloc::string::String;
use alloc::vec::Vec;

/// Views in definition order followed by the query itself.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SqlQuery {
    pub views: Vec<View>,
    pub select: Select,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct View {
    pub name: String,
    pub select: Select,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Select {
    pub distinct: bool,
    pub items: Vec<SelectItem>,
    pub from: Vec<FromItem>,
    /// Conjunction of equalities.
    pub conds: Vec<Cond>,
    pub group_by: Option<ColRef>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SelectItem {
    pub expr: ItemExpr,
    pub alias: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ItemExpr {
    Star,
    Column(ColRef),
    /// `COUNT(*)` when `None`.
    Count(Option<ColRef>),
    Sum(ColRef),
    Subquery(Box<Select>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FromItem {
    pub table: String,
    pub alias: Option<String>,
}

impl FromItem {
    /// The name columns are qualified with.
    pub fn binding(&self) -> &str {
        self.alias.as_deref().unwrap_or(&self.table)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ColRef {
    pub qual: Option<String>,
    pub name: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Cond {
    pub left: Operand,
    pub right: Operand,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Operand {
    Col(ColRef),
    Int(i64),
    Str(String),
    /// `{name}`, `{0}` or `:name`.
    Param(String),
}
