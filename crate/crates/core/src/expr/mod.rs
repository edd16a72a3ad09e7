//! Textual expression parsing and desugaring.
//!
//! Expressions follow the SPARQL 1.1 expression grammar with variables
//! replaced by plain names (node/field references or property paths) plus a
//! set of custom shorthands: infix REGEX (`~`, `~*`, `LIKE`), `BETWEEN`,
//! initial-substring brackets (`name[3]`), `INV(p)` for `^p`, UML dot paths,
//! language tag selectors (`abc@en`) and Virtuoso date differences
//! (`days(a-b)`).
//!
//! Arithmetic `+ - * /` are operators only when surrounded by spaces; glued
//! occurrences belong to names, IRIs or path modifiers.

mod desugar;
mod parser;
mod print;

pub use desugar::desugar;
pub use parser::{parse_expression, ParseError};
pub use print::print_canonical;

use crate::symbols::Resolution;

/// Where an expression text appears; a few constructs are position-gated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExprPosition {
    Field,
    Condition,
    Aggregation,
    GroupBy,
    OrderBy,
    ClassPosition,
    LinkPath,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Or,
    And,
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
    Add,
    Sub,
    Mul,
    Div,
    /// String concatenation (`++`), rendered as CONCAT.
    Concat,
}

impl BinOp {
    pub fn text(&self) -> &'static str {
        match self {
            BinOp::Or => "||",
            BinOp::And => "&&",
            BinOp::Eq => "=",
            BinOp::Ne => "!=",
            BinOp::Lt => "<",
            BinOp::Le => "<=",
            BinOp::Gt => ">",
            BinOp::Ge => ">=",
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::Concat => "++",
        }
    }

    pub fn is_comparison(&self) -> bool {
        matches!(
            self,
            BinOp::Eq | BinOp::Ne | BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PathMod {
    None,
    ZeroOrOne,
    ZeroOrMore,
    OneOrMore,
}

impl PathMod {
    pub fn text(&self) -> &'static str {
        match self {
            PathMod::None => "",
            PathMod::ZeroOrOne => "?",
            PathMod::ZeroOrMore => "*",
            PathMod::OneOrMore => "+",
        }
    }
}

/// One step of a navigation path inside a name entity.
#[derive(Debug, Clone, PartialEq)]
pub struct PathStep {
    pub inverse: bool,
    pub modifier: PathMod,
    pub item: StepItem,
}

#[derive(Debug, Clone, PartialEq)]
pub enum StepItem {
    /// Plain or prefixed name; `display` marks the `[text]` form.
    Name {
        prefix: Option<String>,
        local: String,
        display: bool,
    },
    Iri(String),
    /// Explicit variable step (`?p`), allowed in link path position.
    Var { name: String, hidden: bool },
    /// The `a` keyword (rdf:type) in paths.
    A,
}

impl StepItem {
    pub fn plain_local(&self) -> Option<&str> {
        match self {
            StepItem::Name {
                prefix: None,
                local,
                display: false,
            } => Some(local),
            _ => None,
        }
    }

    /// Base text used when deriving an automatic variable name.
    pub fn var_base(&self) -> String {
        match self {
            StepItem::Name { local, .. } => local.clone(),
            StepItem::Iri(iri) => iri
                .rsplit(|c| c == '#' || c == '/')
                .next()
                .unwrap_or("v")
                .to_string(),
            StepItem::Var { name, .. } => name.clone(),
            StepItem::A => "type".to_string(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LikeOp {
    /// `~` — infix REGEX.
    Regex,
    /// `~*` — case-insensitive infix REGEX.
    RegexCi,
    /// SQL-style `LIKE` pattern.
    Like,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LikeSpec {
    pub op: LikeOp,
    pub pattern: String,
}

/// A name occurring where SPARQL would allow a variable: node or field
/// reference, explicit variable reference or a property path.
#[derive(Debug, Clone, PartialEq)]
pub struct NameEntity {
    /// Identity of this occurrence within its expression tree.
    pub id: u32,
    pub raw_text: String,
    /// The `@` prefix: a reference to a name defined in the query.
    pub reference_mark: bool,
    /// The back-tick prefix: constant resource, not value navigation.
    pub constant_mark: bool,
    pub steps: Vec<PathStep>,
    pub lang_tags: Vec<String>,
    /// `name[i]` / `name[i,j]` initial-substring shorthand.
    pub substring: Option<(u64, Option<u64>)>,
    /// `name BETWEEN (lo, hi)` shorthand.
    pub between: Option<(Box<Expr>, Box<Expr>)>,
    /// `name ~ 'p'` / `name ~* 'p'` / `name LIKE 'p'` shorthand.
    pub like: Option<LikeSpec>,
    /// Filled during name resolution of the first step.
    pub resolution: Option<Resolution>,
}

impl NameEntity {
    /// Text of the path without marks or attachments; identical texts within
    /// one expression denote the same value.
    pub fn path_key(&self) -> String {
        let mut out = String::new();
        if self.reference_mark {
            out.push('@');
        }
        if self.constant_mark {
            out.push('`');
        }
        for (i, s) in self.steps.iter().enumerate() {
            if i > 0 {
                out.push('/');
            }
            if s.inverse {
                out.push('^');
            }
            match &s.item {
                StepItem::Name { prefix, local, display } => {
                    if let Some(p) = prefix {
                        out.push_str(p);
                        out.push(':');
                    }
                    if *display {
                        out.push('[');
                        out.push_str(local);
                        out.push(']');
                    } else {
                        out.push_str(local);
                    }
                }
                StepItem::Iri(iri) => {
                    out.push('<');
                    out.push_str(iri);
                    out.push('>');
                }
                StepItem::Var { name, hidden } => {
                    out.push_str(if *hidden { "??" } else { "?" });
                    out.push_str(name);
                }
                StepItem::A => out.push('a'),
            }
            out.push_str(s.modifier.text());
        }
        for lt in &self.lang_tags {
            out.push('@');
            out.push_str(lt);
        }
        out
    }

    /// Default variable base: the local name of the last step.
    pub fn var_base(&self) -> String {
        match self.steps.last().map(|s| &s.item) {
            Some(StepItem::Name { local, .. }) => local.clone(),
            Some(StepItem::Iri(iri)) => iri
                .rsplit(['/', '#'])
                .next()
                .filter(|s| !s.is_empty())
                .unwrap_or("value")
                .to_string(),
            Some(StepItem::Var { name, .. }) => name.clone(),
            Some(StepItem::A) | None => "value".to_string(),
        }
    }

    /// A single plain (unprefixed, non-display, unmarked) one-step name.
    pub fn single_plain_name(&self) -> Option<&str> {
        if self.constant_mark
            || self.steps.len() != 1
            || self.steps[0].inverse
            || self.steps[0].modifier != PathMod::None
        {
            return None;
        }
        self.steps[0].item.plain_local()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ValueScope {
    Range(i64, i64),
    List(Vec<Option<Expr>>),
    Tuples(Vec<Vec<Option<Expr>>>),
}

/// Parsed expression tree.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Str {
        value: String,
        lang: Option<String>,
        datatype: Option<String>,
    },
    Num(String),
    Bool(bool),
    Name(NameEntity),
    Var {
        name: String,
        hidden: bool,
    },
    /// `(.)`, standalone `.`, `(this)`, `(select this)` — the node instance.
    ClassRef,
    Star,
    Unary {
        op: char,
        expr: Box<Expr>,
    },
    Binary {
        op: BinOp,
        lhs: Box<Expr>,
        rhs: Box<Expr>,
    },
    /// Function application; builtin names are canonicalized to upper case,
    /// prefixed names (`bif:datediff`) kept verbatim.
    Call {
        name: String,
        args: Vec<Expr>,
    },
    Aggregate {
        func: String,
        distinct: bool,
        arg: Box<Expr>,
        separator: Option<String>,
    },
    Exists {
        negated: bool,
        inner: Box<Expr>,
    },
    In {
        negated: bool,
        lhs: Box<Expr>,
        items: Vec<Expr>,
    },
    Values(ValueScope),
    /// Infix `a ? b` coalesce shorthand (experimental).
    Coalesce2 {
        lhs: Box<Expr>,
        rhs: Box<Expr>,
    },
}

impl Expr {
    pub fn is_aggregate(&self) -> bool {
        matches!(self, Expr::Aggregate { .. })
    }

    /// Does any aggregate application occur anywhere in the tree?
    pub fn contains_aggregate(&self) -> bool {
        let mut found = false;
        self.walk(&mut |e| {
            if e.is_aggregate() {
                found = true;
            }
        });
        found
    }

    /// Pre-order traversal.
    pub fn walk<'a>(&'a self, f: &mut impl FnMut(&'a Expr)) {
        f(self);
        match self {
            Expr::Unary { expr, .. } => expr.walk(f),
            Expr::Binary { lhs, rhs, .. } | Expr::Coalesce2 { lhs, rhs } => {
                lhs.walk(f);
                rhs.walk(f);
            }
            Expr::Call { args, .. } => args.iter().for_each(|a| a.walk(f)),
            Expr::Aggregate { arg, .. } => arg.walk(f),
            Expr::Exists { inner, .. } => inner.walk(f),
            Expr::In { lhs, items, .. } => {
                lhs.walk(f);
                items.iter().for_each(|a| a.walk(f));
            }
            Expr::Name(n) => {
                if let Some((lo, hi)) = &n.between {
                    lo.walk(f);
                    hi.walk(f);
                }
            }
            Expr::Values(ValueScope::List(items)) => {
                items.iter().flatten().for_each(|a| a.walk(f))
            }
            Expr::Values(ValueScope::Tuples(rows)) => rows
                .iter()
                .flat_map(|r| r.iter().flatten())
                .for_each(|a| a.walk(f)),
            _ => {}
        }
    }

    /// In-place traversal over name entities.
    pub fn walk_names_mut(&mut self, f: &mut impl FnMut(&mut NameEntity)) {
        match self {
            Expr::Name(n) => {
                f(n);
                if let Some((lo, hi)) = &mut n.between {
                    lo.walk_names_mut(f);
                    hi.walk_names_mut(f);
                }
            }
            Expr::Unary { expr, .. } => expr.walk_names_mut(f),
            Expr::Binary { lhs, rhs, .. } | Expr::Coalesce2 { lhs, rhs } => {
                lhs.walk_names_mut(f);
                rhs.walk_names_mut(f);
            }
            Expr::Call { args, .. } => args.iter_mut().for_each(|a| a.walk_names_mut(f)),
            Expr::Aggregate { arg, .. } => arg.walk_names_mut(f),
            Expr::Exists { inner, .. } => inner.walk_names_mut(f),
            Expr::In { lhs, items, .. } => {
                lhs.walk_names_mut(f);
                items.iter_mut().for_each(|a| a.walk_names_mut(f));
            }
            Expr::Values(ValueScope::List(items)) => items
                .iter_mut()
                .flatten()
                .for_each(|a| a.walk_names_mut(f)),
            Expr::Values(ValueScope::Tuples(rows)) => rows
                .iter_mut()
                .flat_map(|r| r.iter_mut().flatten())
                .for_each(|a| a.walk_names_mut(f)),
            _ => {}
        }
    }
}

/// All name entities in left-to-right source order. Occurrences are listed by
/// identity: the same text appearing twice yields two entries.
pub fn collect_name_entities(tree: &Expr) -> Vec<&NameEntity> {
    let mut out = Vec::new();
    tree.walk(&mut |e| {
        if let Expr::Name(n) = e {
            out.push(n);
        }
    });
    out.sort_by_key(|n| n.id);
    out
}

#[cfg(test)]
mod tests;
