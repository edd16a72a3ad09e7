//! Diagnostics collected across the compilation pipeline.
//!
//! Validation and name resolution never abort on the first problem; findings
//! are accumulated here with a severity and reported together.

use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Error,
    Warning,
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct Diagnostic {
    pub severity: Severity,
    /// Stable machine-readable code, e.g. `not-a-tree`, `scoping`.
    pub code: String,
    pub message: String,
    /// Id of the document/AST element the finding is attached to, if any.
    pub element: Option<String>,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sev = match self.severity {
            Severity::Error => "error",
            Severity::Warning => "warning",
        };
        match &self.element {
            Some(el) => write!(f, "{sev}[{}] at {el}: {}", self.code, self.message),
            None => write!(f, "{sev}[{}]: {}", self.code, self.message),
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct Diagnostics {
    items: Vec<Diagnostic>,
}

impl Diagnostics {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn error(&mut self, code: &str, message: impl Into<String>) {
        self.push(Severity::Error, code, message, None);
    }

    pub fn error_at(&mut self, code: &str, message: impl Into<String>, element: &str) {
        self.push(Severity::Error, code, message, Some(element.to_string()));
    }

    pub fn warning(&mut self, code: &str, message: impl Into<String>) {
        self.push(Severity::Warning, code, message, None);
    }

    pub fn warning_at(&mut self, code: &str, message: impl Into<String>, element: &str) {
        self.push(Severity::Warning, code, message, Some(element.to_string()));
    }

    fn push(&mut self, severity: Severity, code: &str, message: impl Into<String>, element: Option<String>) {
        self.items.push(Diagnostic {
            severity,
            code: code.to_string(),
            message: message.into(),
            element,
        });
    }

    pub fn has_errors(&self) -> bool {
        self.items.iter().any(|d| d.severity == Severity::Error)
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Diagnostic> {
        self.items.iter()
    }

    pub fn errors(&self) -> impl Iterator<Item = &Diagnostic> {
        self.items.iter().filter(|d| d.severity == Severity::Error)
    }

    pub fn extend(&mut self, other: Diagnostics) {
        self.items.extend(other.items);
    }

    /// True when some diagnostic carries the given code.
    pub fn has_code(&self, code: &str) -> bool {
        self.items.iter().any(|d| d.code == code)
    }
}

impl fmt::Display for Diagnostics {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for d in &self.items {
            writeln!(f, "{d}")?;
        }
        Ok(())
    }
}
