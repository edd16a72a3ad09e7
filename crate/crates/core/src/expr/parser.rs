//! Recursive-descent expression parser (PEG style, scannerless).
//!
//! Space sensitivity: `+ - * /` act as operators only when surrounded by
//! spaces; glued to a name they are part of the name token or a path
//! modifier. Path continuation dots/slashes must be glued on both sides.

use super::*;

#[derive(Debug, Clone, thiserror::Error)]
#[error("parse error at offset {offset}: expected {expected}")]
pub struct ParseError {
    pub offset: usize,
    pub expected: String,
}

struct Parser {
    src: Vec<char>,
    pos: usize,
    position: ExprPosition,
    next_entity_id: u32,
}

const AGGREGATES: &[&str] = &[
    "COUNT", "SUM", "MIN", "MAX", "AVG", "SAMPLE", "GROUP_CONCAT", "COUNT_DISTINCT",
];

const DATE_DIFF_FNS: &[&str] = &["days", "months", "years", "hours", "minutes", "seconds"];

/// Parse an expression text appearing at the given position.
pub fn parse_expression(text: &str, position: ExprPosition) -> Result<Expr, ParseError> {
    let trimmed = text.trim();
    if trimmed.is_empty() {
        return Err(ParseError {
            offset: 0,
            expected: "non-empty expression".into(),
        });
    }
    let mut p = Parser {
        src: trimmed.chars().collect(),
        pos: 0,
        position,
        next_entity_id: 0,
    };
    let expr = match position {
        ExprPosition::LinkPath => p.parse_link_path()?,
        _ => p.parse_expr()?,
    };
    p.skip_ws();
    if !p.at_end() {
        return Err(p.err("end of input"));
    }
    Ok(expr)
}

impl Parser {
    fn err(&self, expected: &str) -> ParseError {
        ParseError {
            offset: self.pos,
            expected: expected.to_string(),
        }
    }

    fn at_end(&self) -> bool {
        self.pos >= self.src.len()
    }

    fn peek(&self) -> Option<char> {
        self.src.get(self.pos).copied()
    }

    fn peek_at(&self, off: usize) -> Option<char> {
        self.src.get(self.pos + off).copied()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.peek();
        if c.is_some() {
            self.pos += 1;
        }
        c
    }

    fn skip_ws(&mut self) {
        while matches!(self.peek(), Some(c) if c.is_whitespace()) {
            self.pos += 1;
        }
    }

    fn prev_is_space(&self) -> bool {
        self.pos == 0 || self.src[self.pos - 1].is_whitespace()
    }

    fn next_after_is_space(&self, len: usize) -> bool {
        match self.src.get(self.pos + len) {
            Some(c) => c.is_whitespace(),
            None => true,
        }
    }

    fn eat(&mut self, s: &str) -> bool {
        let chars: Vec<char> = s.chars().collect();
        if self.src[self.pos..].starts_with(&chars) {
            self.pos += chars.len();
            true
        } else {
            false
        }
    }

    /// Case-insensitive keyword match, requiring a word boundary after.
    fn eat_keyword(&mut self, kw: &str) -> bool {
        let n = kw.len();
        if self.pos + n > self.src.len() {
            return false;
        }
        let slice: String = self.src[self.pos..self.pos + n].iter().collect();
        if !slice.eq_ignore_ascii_case(kw) {
            return false;
        }
        if let Some(c) = self.src.get(self.pos + n) {
            if is_name_char(*c) {
                return false;
            }
        }
        self.pos += n;
        true
    }

    fn peek_keyword(&self, kw: &str) -> bool {
        let mut clone = Parser {
            src: self.src.clone(),
            pos: self.pos,
            position: self.position,
            next_entity_id: 0,
        };
        clone.eat_keyword(kw)
    }

    fn new_entity_id(&mut self) -> u32 {
        let id = self.next_entity_id;
        self.next_entity_id += 1;
        id
    }

    // -- precedence levels --------------------------------------------------

    fn parse_expr(&mut self) -> Result<Expr, ParseError> {
        self.skip_ws();
        // Value scopes appear only as whole expressions.
        if self.peek() == Some('{')
            && matches!(self.position, ExprPosition::Field | ExprPosition::Condition)
        {
            return self.parse_value_scope();
        }
        self.parse_or()
    }

    fn parse_or(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.parse_and()?;
        loop {
            self.skip_ws();
            if self.eat("||") || self.eat_keyword("OR") || (self.peek() == Some('|') && self.peek_at(1) != Some('|') && { self.pos += 1; true }) {
                let rhs = self.parse_and()?;
                lhs = Expr::Binary {
                    op: BinOp::Or,
                    lhs: Box::new(lhs),
                    rhs: Box::new(rhs),
                };
            } else {
                return Ok(lhs);
            }
        }
    }

    fn parse_and(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.parse_relational()?;
        loop {
            self.skip_ws();
            if self.eat("&&") || self.eat_keyword("AND") || (self.peek() == Some('&') && { self.pos += 1; true }) {
                let rhs = self.parse_relational()?;
                lhs = Expr::Binary {
                    op: BinOp::And,
                    lhs: Box::new(lhs),
                    rhs: Box::new(rhs),
                };
            } else {
                return Ok(lhs);
            }
        }
    }

    fn parse_relational(&mut self) -> Result<Expr, ParseError> {
        let lhs = self.parse_additive()?;
        self.skip_ws();
        let negated = {
            let save = self.pos;
            if self.eat_keyword("NOT") {
                self.skip_ws();
                if self.peek_keyword("IN") {
                    true
                } else {
                    self.pos = save;
                    false
                }
            } else {
                false
            }
        };
        if negated || self.peek_keyword("IN") {
            self.eat_keyword("IN");
            self.skip_ws();
            let items = self.parse_in_list()?;
            return Ok(Expr::In {
                negated,
                lhs: Box::new(lhs),
                items,
            });
        }
        for (text, op) in [
            ("!=", BinOp::Ne),
            ("<=", BinOp::Le),
            (">=", BinOp::Ge),
            ("=", BinOp::Eq),
            ("<", BinOp::Lt),
            (">", BinOp::Gt),
        ] {
            if self.eat(text) {
                let rhs = self.parse_additive()?;
                return Ok(Expr::Binary {
                    op,
                    lhs: Box::new(lhs),
                    rhs: Box::new(rhs),
                });
            }
        }
        // Infix coalesce shorthand `a ? b` (space-separated to keep it away
        // from path modifiers).
        if self.peek() == Some('?')
            && self.prev_is_space()
            && self.next_after_is_space(1)
            && self.position != ExprPosition::LinkPath
        {
            self.pos += 1;
            let rhs = self.parse_additive()?;
            return Ok(Expr::Coalesce2 {
                lhs: Box::new(lhs),
                rhs: Box::new(rhs),
            });
        }
        Ok(lhs)
    }

    fn parse_in_list(&mut self) -> Result<Vec<Expr>, ParseError> {
        self.skip_ws();
        match self.peek() {
            Some('(') | Some('{') => {
                let close = if self.peek() == Some('(') { ')' } else { '}' };
                self.pos += 1;
                let mut items = Vec::new();
                self.skip_ws();
                if self.peek() == Some(close) {
                    self.pos += 1;
                    return Ok(items);
                }
                loop {
                    items.push(self.parse_expr()?);
                    self.skip_ws();
                    if self.eat(",") {
                        continue;
                    }
                    if self.bump() == Some(close) {
                        return Ok(items);
                    }
                    return Err(self.err("`,` or closing bracket in IN list"));
                }
            }
            _ => Err(self.err("`(` or `{` after IN")),
        }
    }

    fn parse_additive(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.parse_multiplicative()?;
        loop {
            self.skip_ws();
            if self.eat("++") {
                let rhs = self.parse_multiplicative()?;
                lhs = Expr::Binary {
                    op: BinOp::Concat,
                    lhs: Box::new(lhs),
                    rhs: Box::new(rhs),
                };
                continue;
            }
            let op = match self.peek() {
                Some('+') => Some(BinOp::Add),
                Some('-') => Some(BinOp::Sub),
                _ => None,
            };
            // Arithmetic needs surrounding spaces.
            if let Some(op) = op {
                if self.prev_is_space() && self.next_after_is_space(1) {
                    self.pos += 1;
                    let rhs = self.parse_multiplicative()?;
                    lhs = Expr::Binary {
                        op,
                        lhs: Box::new(lhs),
                        rhs: Box::new(rhs),
                    };
                    continue;
                }
            }
            return Ok(lhs);
        }
    }

    fn parse_multiplicative(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.parse_unary()?;
        loop {
            self.skip_ws();
            let op = match self.peek() {
                Some('*') => Some(BinOp::Mul),
                Some('/') => Some(BinOp::Div),
                _ => None,
            };
            if let Some(op) = op {
                if self.prev_is_space() && self.next_after_is_space(1) {
                    self.pos += 1;
                    let rhs = self.parse_unary()?;
                    lhs = Expr::Binary {
                        op,
                        lhs: Box::new(lhs),
                        rhs: Box::new(rhs),
                    };
                    continue;
                }
            }
            return Ok(lhs);
        }
    }

    fn parse_unary(&mut self) -> Result<Expr, ParseError> {
        self.skip_ws();
        if self.peek() == Some('!') && self.peek_at(1) != Some('=') {
            self.pos += 1;
            let expr = self.parse_unary()?;
            return Ok(Expr::Unary {
                op: '!',
                expr: Box::new(expr),
            });
        }
        if self.peek() == Some('-') && !matches!(self.peek_at(1), Some(c) if c.is_ascii_digit()) {
            self.pos += 1;
            let expr = self.parse_unary()?;
            return Ok(Expr::Unary {
                op: '-',
                expr: Box::new(expr),
            });
        }
        self.parse_primary()
    }

    // -- primaries ----------------------------------------------------------

    fn parse_primary(&mut self) -> Result<Expr, ParseError> {
        self.skip_ws();
        match self.peek() {
            None => Err(self.err("expression")),
            Some(c) if c.is_ascii_digit() => self.parse_number(false),
            Some('-') if matches!(self.peek_at(1), Some(d) if d.is_ascii_digit()) => {
                self.pos += 1;
                let num = self.parse_number(true)?;
                Ok(num)
            }
            Some('\'') | Some('"') => self.parse_string_literal(),
            Some('<') => self.parse_iri_entity(),
            Some('(') => self.parse_parenthesized(),
            Some('.') => {
                // Standalone `.` — the node instance.
                let next = self.peek_at(1);
                if next.map_or(true, |c| !is_name_char(c) && c != '.') {
                    self.pos += 1;
                    Ok(Expr::ClassRef)
                } else {
                    Err(self.err("expression"))
                }
            }
            Some('*')
                if matches!(
                    self.position,
                    ExprPosition::Field | ExprPosition::ClassPosition
                ) =>
            {
                self.pos += 1;
                Ok(Expr::Star)
            }
            Some('?') => self.parse_variable(),
            Some('{') if self.position == ExprPosition::Condition => {
                // `{ pattern }` exists shorthand is not supported; value
                // scopes are handled at parse_expr level.
                Err(self.err("expression"))
            }
            _ => self.parse_name_or_call(),
        }
    }

    fn parse_number(&mut self, negative: bool) -> Result<Expr, ParseError> {
        let start = self.pos;
        while matches!(self.peek(), Some(c) if c.is_ascii_digit()) {
            self.pos += 1;
        }
        if self.peek() == Some('.') && matches!(self.peek_at(1), Some(c) if c.is_ascii_digit()) {
            self.pos += 1;
            while matches!(self.peek(), Some(c) if c.is_ascii_digit()) {
                self.pos += 1;
            }
        }
        if matches!(self.peek(), Some('e') | Some('E')) {
            let save = self.pos;
            self.pos += 1;
            if matches!(self.peek(), Some('+') | Some('-')) {
                self.pos += 1;
            }
            if matches!(self.peek(), Some(c) if c.is_ascii_digit()) {
                while matches!(self.peek(), Some(c) if c.is_ascii_digit()) {
                    self.pos += 1;
                }
            } else {
                self.pos = save;
            }
        }
        let text: String = self.src[start..self.pos].iter().collect();
        if text.is_empty() {
            return Err(self.err("number"));
        }
        Ok(Expr::Num(if negative { format!("-{text}") } else { text }))
    }

    fn parse_string_literal(&mut self) -> Result<Expr, ParseError> {
        let quote = self.bump().unwrap();
        let mut value = String::new();
        loop {
            match self.bump() {
                None => return Err(self.err("closing string quote")),
                Some('\\') => match self.bump() {
                    Some(c) => {
                        value.push('\\');
                        value.push(c);
                    }
                    None => return Err(self.err("escape character")),
                },
                Some(c) if c == quote => break,
                Some(c) => value.push(c),
            }
        }
        let mut lang = None;
        let mut datatype = None;
        if self.peek() == Some('@') && matches!(self.peek_at(1), Some(c) if c.is_ascii_alphabetic())
        {
            self.pos += 1;
            let start = self.pos;
            while matches!(self.peek(), Some(c) if c.is_ascii_alphanumeric() || c == '-') {
                self.pos += 1;
            }
            lang = Some(self.src[start..self.pos].iter().collect());
        } else if self.eat("^^") {
            let start = self.pos;
            if self.peek() == Some('<') {
                while self.peek() != Some('>') && !self.at_end() {
                    self.pos += 1;
                }
                self.pos += 1;
            } else {
                while matches!(self.peek(), Some(c) if is_name_char(c) || c == ':') {
                    self.pos += 1;
                }
            }
            datatype = Some(self.src[start..self.pos].iter().collect());
        }
        Ok(Expr::Str {
            value,
            lang,
            datatype,
        })
    }

    fn parse_iri_entity(&mut self) -> Result<Expr, ParseError> {
        let start = self.pos;
        self.pos += 1; // <
        let iri_start = self.pos;
        while self.peek() != Some('>') {
            if self.at_end() {
                return Err(self.err("`>`"));
            }
            self.pos += 1;
        }
        let iri: String = self.src[iri_start..self.pos].iter().collect();
        self.pos += 1; // >
        let id = self.new_entity_id();
        let mut entity = NameEntity {
            id,
            raw_text: self.src[start..self.pos].iter().collect(),
            reference_mark: false,
            constant_mark: false,
            steps: vec![PathStep {
                inverse: false,
                modifier: PathMod::None,
                item: StepItem::Iri(iri),
            }],
            lang_tags: Vec::new(),
            substring: None,
            between: None,
            like: None,
            resolution: None,
        };
        self.parse_path_continuation(&mut entity)?;
        self.parse_name_attachments(&mut entity)?;
        entity.raw_text = entity.path_key();
        Ok(Expr::Name(entity))
    }

    fn parse_parenthesized(&mut self) -> Result<Expr, ParseError> {
        // Class expression forms.
        for form in ["(.)", "(select this)", "(this)", "(no_class)"] {
            if self.eat(form) {
                return Ok(Expr::ClassRef);
            }
        }
        self.pos += 1; // (
        let inner = self.parse_expr()?;
        self.skip_ws();
        if !self.eat(")") {
            return Err(self.err("`)`"));
        }
        Ok(inner)
    }

    fn parse_variable(&mut self) -> Result<Expr, ParseError> {
        self.pos += 1; // ?
        let hidden = self.peek() == Some('?') && {
            self.pos += 1;
            true
        };
        let start = self.pos;
        while matches!(self.peek(), Some(c) if c.is_ascii_alphanumeric() || c == '_') {
            self.pos += 1;
        }
        if self.pos == start {
            return Err(self.err("variable name"));
        }
        Ok(Expr::Var {
            name: self.src[start..self.pos].iter().collect(),
            hidden,
        })
    }

    fn parse_value_scope(&mut self) -> Result<Expr, ParseError> {
        self.pos += 1; // {
        self.skip_ws();
        // { 1..5 }
        let save = self.pos;
        if matches!(self.peek(), Some(c) if c.is_ascii_digit()) {
            let lo_start = self.pos;
            while matches!(self.peek(), Some(c) if c.is_ascii_digit()) {
                self.pos += 1;
            }
            let lo_end = self.pos;
            if self.eat("..") {
                let hi_start = self.pos;
                while matches!(self.peek(), Some(c) if c.is_ascii_digit()) {
                    self.pos += 1;
                }
                let lo: String = self.src[lo_start..lo_end].iter().collect();
                let hi: String = self.src[hi_start..self.pos].iter().collect();
                self.skip_ws();
                if !self.eat("}") {
                    return Err(self.err("`}`"));
                }
                return Ok(Expr::Values(ValueScope::Range(
                    lo.parse().map_err(|_| self.err("integer"))?,
                    hi.parse().map_err(|_| self.err("integer"))?,
                )));
            }
            self.pos = save;
        }
        // { (a,b), (c,d) } tuples or { a, b, c } list
        if self.peek() == Some('(') {
            let mut rows = Vec::new();
            loop {
                self.skip_ws();
                if !self.eat("(") {
                    return Err(self.err("`(`"));
                }
                let mut row = Vec::new();
                loop {
                    self.skip_ws();
                    if self.eat_keyword("UNDEF") {
                        row.push(None);
                    } else {
                        row.push(Some(self.parse_unary()?));
                    }
                    self.skip_ws();
                    if self.eat(",") {
                        continue;
                    }
                    if self.eat(")") {
                        break;
                    }
                    return Err(self.err("`,` or `)`"));
                }
                rows.push(row);
                self.skip_ws();
                if self.eat(",") {
                    continue;
                }
                if self.eat("}") {
                    return Ok(Expr::Values(ValueScope::Tuples(rows)));
                }
                return Err(self.err("`,` or `}`"));
            }
        }
        let mut items = Vec::new();
        loop {
            self.skip_ws();
            if self.eat_keyword("UNDEF") {
                items.push(None);
            } else {
                items.push(Some(self.parse_unary()?));
            }
            self.skip_ws();
            if self.eat(",") {
                continue;
            }
            if self.eat("}") {
                return Ok(Expr::Values(ValueScope::List(items)));
            }
            return Err(self.err("`,` or `}`"));
        }
    }

    // -- names, paths and calls ----------------------------------------------

    fn parse_link_path(&mut self) -> Result<Expr, ParseError> {
        self.skip_ws();
        if self.peek() == Some('?') {
            return self.parse_variable();
        }
        self.parse_name_or_call()
    }

    fn parse_name_or_call(&mut self) -> Result<Expr, ParseError> {
        self.skip_ws();
        if self.eat_keyword("true") {
            return Ok(Expr::Bool(true));
        }
        if self.eat_keyword("false") {
            return Ok(Expr::Bool(false));
        }
        // NOT EXISTS / NOT { ... } / EXISTS
        {
            let save = self.pos;
            if self.eat_keyword("NOT") {
                self.skip_ws();
                if self.eat_keyword("EXISTS") || self.peek() == Some('(') {
                    self.skip_ws();
                    if self.eat("(") {
                        let inner = self.parse_expr()?;
                        self.skip_ws();
                        if !self.eat(")") {
                            return Err(self.err("`)`"));
                        }
                        return Ok(Expr::Exists {
                            negated: true,
                            inner: Box::new(inner),
                        });
                    }
                }
                self.pos = save;
            }
        }
        if self.peek_keyword("EXISTS") {
            let save = self.pos;
            self.eat_keyword("EXISTS");
            self.skip_ws();
            if self.eat("(") {
                let inner = self.parse_expr()?;
                self.skip_ws();
                if !self.eat(")") {
                    return Err(self.err("`)`"));
                }
                return Ok(Expr::Exists {
                    negated: false,
                    inner: Box::new(inner),
                });
            }
            self.pos = save;
        }

        let reference_mark = self.peek() == Some('@') && {
            self.pos += 1;
            true
        };
        let constant_mark = self.peek() == Some('`') && {
            self.pos += 1;
            true
        };

        // INV( / ^ inverse first step, or a plain step.
        let mut first = self.parse_path_step()?;

        // A call: single undecorated name glued to `(`.
        if !reference_mark
            && !constant_mark
            && !first.inverse
            && first.modifier == PathMod::None
            && self.peek() == Some('(')
        {
            if let StepItem::Name {
                prefix,
                local,
                display: false,
            } = &first.item
            {
                let name = match prefix {
                    Some(p) => format!("{p}:{local}"),
                    None => local.clone(),
                };
                return self.parse_call(name);
            }
        }

        let start_text_id = self.new_entity_id();
        let mut entity = NameEntity {
            id: start_text_id,
            raw_text: String::new(),
            reference_mark,
            constant_mark,
            steps: Vec::new(),
            lang_tags: Vec::new(),
            substring: None,
            between: None,
            like: None,
            resolution: None,
        };
        self.parse_step_suffix(&mut first)?;
        entity.steps.push(first);
        self.parse_path_continuation(&mut entity)?;
        self.parse_name_attachments(&mut entity)?;
        entity.raw_text = entity.path_key();
        Ok(Expr::Name(entity))
    }

    /// One path element: `name`, `prefix:name`, `prefix:[display]`,
    /// `[display]`, `<iri>`, `^elt`, `INV(elt)`, `?var` or `a`.
    fn parse_path_step(&mut self) -> Result<PathStep, ParseError> {
        if self.peek() == Some('^') {
            self.pos += 1;
            let mut inner = self.parse_path_step()?;
            inner.inverse = !inner.inverse;
            return Ok(inner);
        }
        {
            let save = self.pos;
            if self.eat_keyword("INV") || self.eat_keyword("inv") {
                if self.peek() == Some('(') {
                    self.pos += 1;
                    self.skip_ws();
                    let mut inner = self.parse_path_step()?;
                    self.skip_ws();
                    if !self.eat(")") {
                        return Err(self.err("`)`"));
                    }
                    inner.inverse = !inner.inverse;
                    return Ok(inner);
                }
                self.pos = save;
            }
        }
        if self.peek() == Some('<') {
            self.pos += 1;
            let start = self.pos;
            while self.peek() != Some('>') {
                if self.at_end() {
                    return Err(self.err("`>`"));
                }
                self.pos += 1;
            }
            let iri: String = self.src[start..self.pos].iter().collect();
            self.pos += 1;
            return Ok(PathStep {
                inverse: false,
                modifier: PathMod::None,
                item: StepItem::Iri(iri),
            });
        }
        if self.peek() == Some('?') && self.position == ExprPosition::LinkPath {
            if let Expr::Var { name, hidden } = self.parse_variable()? {
                return Ok(PathStep {
                    inverse: false,
                    modifier: PathMod::None,
                    item: StepItem::Var { name, hidden },
                });
            }
        }
        if self.peek() == Some('[') {
            let display = self.parse_bracketed()?;
            return Ok(PathStep {
                inverse: false,
                modifier: PathMod::None,
                item: StepItem::Name {
                    prefix: None,
                    local: display,
                    display: true,
                },
            });
        }
        let start = self.pos;
        if !matches!(self.peek(), Some(c) if c.is_ascii_alphabetic() || c == '_') {
            return Err(self.err("name"));
        }
        while matches!(self.peek(), Some(c) if is_name_char(c)) {
            self.pos += 1;
        }
        let word: String = self.src[start..self.pos].iter().collect();
        // prefix:name / prefix:[display]
        if self.peek() == Some(':') {
            self.pos += 1;
            if self.peek() == Some('[') {
                let display = self.parse_bracketed()?;
                return Ok(PathStep {
                    inverse: false,
                    modifier: PathMod::None,
                    item: StepItem::Name {
                        prefix: Some(word),
                        local: display,
                        display: true,
                    },
                });
            }
            let lstart = self.pos;
            while matches!(self.peek(), Some(c) if is_name_char(c)) {
                self.pos += 1;
            }
            let local: String = self.src[lstart..self.pos].iter().collect();
            return Ok(PathStep {
                inverse: false,
                modifier: PathMod::None,
                item: StepItem::Name {
                    prefix: Some(word),
                    local,
                    display: false,
                },
            });
        }
        if word == "a" && self.position == ExprPosition::LinkPath {
            return Ok(PathStep {
                inverse: false,
                modifier: PathMod::None,
                item: StepItem::A,
            });
        }
        Ok(PathStep {
            inverse: false,
            modifier: PathMod::None,
            item: StepItem::Name {
                prefix: None,
                local: word,
                display: false,
            },
        })
    }

    fn parse_bracketed(&mut self) -> Result<String, ParseError> {
        self.pos += 1; // [
        let start = self.pos;
        while self.peek() != Some(']') {
            if self.at_end() {
                return Err(self.err("`]`"));
            }
            self.pos += 1;
        }
        let text: String = self.src[start..self.pos].iter().collect();
        self.pos += 1;
        Ok(text)
    }

    /// Path modifier glued to a step: `?`, `*` or `+`.
    fn parse_step_suffix(&mut self, step: &mut PathStep) -> Result<(), ParseError> {
        match self.peek() {
            Some('?') if self.position == ExprPosition::LinkPath => {
                self.pos += 1;
                step.modifier = PathMod::ZeroOrOne;
            }
            Some('*') if !self.prev_is_space() && self.boundary_after(1) => {
                self.pos += 1;
                step.modifier = PathMod::ZeroOrMore;
            }
            Some('+') if !self.prev_is_space() && self.boundary_after(1) => {
                self.pos += 1;
                step.modifier = PathMod::OneOrMore;
            }
            _ => {}
        }
        Ok(())
    }

    fn boundary_after(&self, off: usize) -> bool {
        match self.src.get(self.pos + off) {
            None => true,
            Some(c) => c.is_whitespace() || matches!(c, ')' | ',' | '.' | '/' | '}' | ']'),
        }
    }

    /// Continue a path over glued `.` or `/` separators.
    fn parse_path_continuation(&mut self, entity: &mut NameEntity) -> Result<(), ParseError> {
        loop {
            let sep = self.peek();
            if (sep == Some('.') || sep == Some('/'))
                && !self.prev_is_space()
                && matches!(self.peek_at(1), Some(c) if is_name_start(c) || c == '^' || c == '[' || c == '<')
            {
                self.pos += 1;
                let mut step = self.parse_path_step()?;
                self.parse_step_suffix(&mut step)?;
                entity.steps.push(step);
                continue;
            }
            // Path alternatives are only meaningful on link paths.
            if self.position == ExprPosition::LinkPath
                && sep == Some('|')
                && !self.prev_is_space()
            {
                // Kept as separate steps marked by the raw text; alternatives
                // are rare and rendered verbatim, so reject for now.
                return Err(self.err("path without alternative"));
            }
            return Ok(());
        }
    }

    /// Lang tags, substring spec, BETWEEN and LIKE attachments.
    fn parse_name_attachments(&mut self, entity: &mut NameEntity) -> Result<(), ParseError> {
        // @en / @(en,de)
        if self.peek() == Some('@') {
            self.pos += 1;
            if self.peek() == Some('(') {
                self.pos += 1;
                loop {
                    self.skip_ws();
                    let start = self.pos;
                    while matches!(self.peek(), Some(c) if c.is_ascii_alphanumeric() || c == '-') {
                        self.pos += 1;
                    }
                    if self.pos == start {
                        return Err(self.err("language tag"));
                    }
                    entity.lang_tags.push(self.src[start..self.pos].iter().collect());
                    self.skip_ws();
                    if self.eat(",") {
                        continue;
                    }
                    if self.eat(")") {
                        break;
                    }
                    return Err(self.err("`,` or `)`"));
                }
            } else {
                let start = self.pos;
                while matches!(self.peek(), Some(c) if c.is_ascii_alphanumeric() || c == '-') {
                    self.pos += 1;
                }
                if self.pos == start {
                    return Err(self.err("language tag"));
                }
                entity.lang_tags.push(self.src[start..self.pos].iter().collect());
            }
        }
        // name[i] / name[i,j]
        if self.peek() == Some('[')
            && matches!(self.peek_at(1), Some(c) if c.is_ascii_digit())
        {
            self.pos += 1;
            let i = self.parse_integer()?;
            let mut j = None;
            self.skip_ws();
            if self.eat(",") {
                self.skip_ws();
                j = Some(self.parse_integer()?);
            }
            self.skip_ws();
            if !self.eat("]") {
                return Err(self.err("`]`"));
            }
            entity.substring = Some((i, j));
        }
        // BETWEEN (a, b)
        {
            let save = self.pos;
            self.skip_ws();
            if self.eat_keyword("BETWEEN") {
                self.skip_ws();
                if !self.eat("(") {
                    return Err(self.err("`(` after BETWEEN"));
                }
                let lo = self.parse_expr()?;
                self.skip_ws();
                if !self.eat(",") {
                    return Err(self.err("`,`"));
                }
                let hi = self.parse_expr()?;
                self.skip_ws();
                if !self.eat(")") {
                    return Err(self.err("`)`"));
                }
                entity.between = Some((Box::new(lo), Box::new(hi)));
            } else {
                self.pos = save;
            }
        }
        // LIKE 'p' / ~ 'p' / ~* 'p'
        {
            let save = self.pos;
            self.skip_ws();
            let op = if self.eat("~*") {
                Some(LikeOp::RegexCi)
            } else if self.eat("~") {
                Some(LikeOp::Regex)
            } else if self.eat_keyword("LIKE") {
                Some(LikeOp::Like)
            } else {
                None
            };
            match op {
                Some(op) => {
                    self.skip_ws();
                    let pattern = match self.parse_string_literal()? {
                        Expr::Str { value, .. } => value,
                        _ => unreachable!(),
                    };
                    entity.like = Some(LikeSpec { op, pattern });
                }
                None => self.pos = save,
            }
        }
        Ok(())
    }

    fn parse_integer(&mut self) -> Result<u64, ParseError> {
        let start = self.pos;
        while matches!(self.peek(), Some(c) if c.is_ascii_digit()) {
            self.pos += 1;
        }
        if self.pos == start {
            return Err(self.err("integer"));
        }
        let text: String = self.src[start..self.pos].iter().collect();
        text.parse().map_err(|_| self.err("integer"))
    }

    fn parse_call(&mut self, name: String) -> Result<Expr, ParseError> {
        self.pos += 1; // (
        let upper = name.to_ascii_uppercase();

        if DATE_DIFF_FNS.contains(&name.to_ascii_lowercase().as_str()) && !name.contains(':') {
            return self.parse_date_diff_call(name.to_ascii_lowercase());
        }

        if AGGREGATES.contains(&upper.as_str()) {
            return self.parse_aggregate_call(upper);
        }

        self.skip_ws();
        let mut args = Vec::new();
        if self.eat(")") {
            return Ok(Expr::Call {
                name: canonical_fn_name(&name),
                args,
            });
        }
        loop {
            args.push(self.parse_expr()?);
            self.skip_ws();
            if self.eat(",") {
                continue;
            }
            if self.eat(")") {
                break;
            }
            return Err(self.err("`,` or `)`"));
        }
        Ok(Expr::Call {
            name: canonical_fn_name(&name),
            args,
        })
    }

    /// `days(a-b)` — the dash needs no surrounding spaces here; the arguments
    /// are primaries that stop at `-`.
    fn parse_date_diff_call(&mut self, func: String) -> Result<Expr, ParseError> {
        self.skip_ws();
        let lhs = self.parse_date_diff_arg()?;
        self.skip_ws();
        if !self.eat("-") {
            return Err(self.err("`-` between date expressions"));
        }
        self.skip_ws();
        let rhs = self.parse_date_diff_arg()?;
        self.skip_ws();
        if !self.eat(")") {
            return Err(self.err("`)`"));
        }
        Ok(Expr::Call {
            name: func,
            args: vec![lhs, rhs],
        })
    }

    /// A date-diff argument: a primary whose name tokens stop at `-`.
    fn parse_date_diff_arg(&mut self) -> Result<Expr, ParseError> {
        // Temporarily treat '-' as a terminator by parsing a primary and
        // trimming any trailing '-" pieces from a glued name.
        let save = self.pos;
        let expr = self.parse_primary()?;
        if let Expr::Name(entity) = &expr {
            if let Some(StepItem::Name { local, .. }) = entity.steps.last().map(|s| &s.item) {
                if let Some(cut) = local.find('-') {
                    // Reparse, stopping before the dash.
                    let consumed_here = self.pos - save;
                    let reduction = local.len() - cut;
                    self.pos = save + consumed_here - reduction;
                    let mut entity = entity.clone();
                    if let Some(StepItem::Name { local, .. }) =
                        entity.steps.last_mut().map(|s| &mut s.item)
                    {
                        local.truncate(cut);
                    }
                    entity.raw_text = entity.path_key();
                    return Ok(Expr::Name(entity));
                }
            }
        }
        Ok(expr)
    }

    fn parse_aggregate_call(&mut self, func: String) -> Result<Expr, ParseError> {
        self.skip_ws();
        let mut distinct = false;
        let func = if func == "COUNT_DISTINCT" {
            distinct = true;
            "COUNT".to_string()
        } else {
            func
        };
        if self.eat_keyword("DISTINCT") {
            distinct = true;
            self.skip_ws();
        }
        let arg = self.parse_expr()?;
        let mut separator = None;
        self.skip_ws();
        if func == "GROUP_CONCAT" {
            if self.eat(";") {
                self.skip_ws();
                if !self.eat_keyword("SEPARATOR") {
                    return Err(self.err("SEPARATOR"));
                }
                self.skip_ws();
                if !self.eat("=") {
                    return Err(self.err("`=`"));
                }
                self.skip_ws();
                separator = match self.parse_string_literal()? {
                    Expr::Str { value, .. } => Some(value),
                    _ => unreachable!(),
                };
            } else if self.eat(",") {
                self.skip_ws();
                separator = match self.parse_string_literal()? {
                    Expr::Str { value, .. } => Some(value),
                    _ => unreachable!(),
                };
            }
            self.skip_ws();
        }
        if !self.eat(")") {
            return Err(self.err("`)`"));
        }
        Ok(Expr::Aggregate {
            func,
            distinct,
            arg: Box::new(arg),
            separator,
        })
    }
}

fn is_name_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_' || c == '-'
}

fn is_name_start(c: char) -> bool {
    c.is_ascii_alphabetic() || c == '_'
}

/// Builtin names are canonicalized to the SPARQL upper-case spelling;
/// prefixed function names stay as written.
fn canonical_fn_name(name: &str) -> String {
    if name.contains(':') {
        name.to_string()
    } else {
        const KNOWN: &[&str] = &[
            "LANG", "DATATYPE", "IRI", "URI", "ABS", "CEIL", "FLOOR", "ROUND", "STRLEN", "STR",
            "UCASE", "LCASE", "ENCODE_FOR_URI", "YEAR", "MONTH", "DAY", "HOURS", "MINUTES",
            "SECONDS", "TIMEZONE", "TZ", "MD5", "SHA1", "SHA256", "SHA384", "SHA512",
            "LANGMATCHES", "CONTAINS", "STRSTARTS", "STRENDS", "STRBEFORE", "STRAFTER", "STRLANG",
            "STRDT", "COALESCE", "CONCAT", "BOUND", "IF", "REGEX", "SUBSTR", "SUBSTRING",
            "REPLACE", "RAND", "NOW", "UUID", "STRUUID", "BNODE",
        ];
        let upper = name.to_ascii_uppercase();
        if KNOWN.contains(&upper.as_str()) {
            if upper == "SUBSTRING" {
                "SUBSTR".to_string()
            } else {
                upper
            }
        } else {
            // Case-preserving for the SPARQL case-sensitive builtins.
            const MIXED: &[&str] = &["isIRI", "isURI", "isBLANK", "isLITERAL", "isNUMERIC", "sameTerm"];
            MIXED
                .iter()
                .find(|k| k.eq_ignore_ascii_case(name))
                .map(|k| k.to_string())
                .unwrap_or_else(|| name.to_string())
        }
    }
}
