//! Canonical serialized form of a visual query: parsing and validation.
//!
//! A query document is a JSON object listing the query graph nodes and links
//! together with their compartments (fields, aggregations, conditions,
//! grouping and ordering). Compartment order is pinned down by explicit
//! integer `order` fields.

use serde::{Deserialize, Serialize};

use crate::diag::Diagnostics;
use crate::expr::{self, ExprPosition};
use crate::schema::Schema;

#[derive(Debug, thiserror::Error)]
pub enum DocumentError {
    #[error("malformed query document: {0}")]
    Format(#[from] serde_json::Error),
    #[error("unsupported format version {0}")]
    Version(u32),
    #[error("document structure: {0}")]
    Structure(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NodeType {
    Data,
    Unit,
    Union,
}

impl Default for NodeType {
    fn default() -> Self {
        NodeType::Data
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LinkMode {
    Required,
    Optional,
    Negated,
}

impl Default for LinkMode {
    fn default() -> Self {
        LinkMode::Required
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LinkKind {
    Join,
    Subquery,
    Reference,
}

impl Default for LinkKind {
    fn default() -> Self {
        LinkKind::Join
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum LabelService {
    None,
    Label,
    AltLabel,
    Description,
}

impl Default for LabelService {
    fn default() -> Self {
        LabelService::None
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum ConditionForm {
    Auto,
    PlainFilter,
    FilterExists,
}

impl Default for ConditionForm {
    fn default() -> Self {
        ConditionForm::Auto
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct FieldRecord {
    pub expr: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alias: Option<String>,
    /// The `{+}` mark: values are required.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub require_values: bool,
    /// The `{h}` mark: find the value but keep it out of the selection list.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub helper: bool,
    #[serde(default, skip_serializing_if = "is_default_label")]
    pub label_service: LabelService,
    pub order: i64,
}

fn is_default_label(l: &LabelService) -> bool {
    *l == LabelService::None
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct AggregationRecord {
    pub expr: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alias: Option<String>,
    pub order: i64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct ConditionRecord {
    pub expr: String,
    #[serde(default, skip_serializing_if = "is_default_form")]
    pub form: ConditionForm,
    pub order: i64,
}

fn is_default_form(f: &ConditionForm) -> bool {
    *f == ConditionForm::Auto
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct OrderByRecord {
    pub expr: String,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub descending: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct NodeRecord {
    pub id: String,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub main: bool,
    #[serde(default, skip_serializing_if = "is_data")]
    pub node_type: NodeType,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub class_name: Option<String>,
    /// Explicit class variable, `?C` or `??C`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub class_variable: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub instance_alias: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub instance_resource: Option<String>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub indirect_membership: bool,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub distinct: bool,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub fields: Vec<FieldRecord>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub aggregations: Vec<AggregationRecord>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub conditions: Vec<ConditionRecord>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub group_by: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub order_by: Vec<OrderByRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub limit: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub offset: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub full_sparql: Option<String>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub full_sparql_is_subquery: bool,
}

fn is_data(t: &NodeType) -> bool {
    *t == NodeType::Data
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct LinkRecord {
    pub id: String,
    /// Structural parent for non-reference links.
    pub source: String,
    pub target: String,
    /// Property path text, explicit variable `?p`/`??p`, `++` or `==`.
    pub path: String,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub inverse: bool,
    #[serde(default, skip_serializing_if = "is_required")]
    pub mode: LinkMode,
    #[serde(default, skip_serializing_if = "is_join")]
    pub kind: LinkKind,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub existence_check: bool,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub global: bool,
    pub order: i64,
}

fn is_required(m: &LinkMode) -> bool {
    *m == LinkMode::Required
}

fn is_join(k: &LinkKind) -> bool {
    *k == LinkKind::Join
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct QueryDocument {
    #[serde(default = "format_version")]
    pub format_version: u32,
    pub schema_name: String,
    pub nodes: Vec<NodeRecord>,
    #[serde(default)]
    pub links: Vec<LinkRecord>,
}

fn format_version() -> u32 {
    1
}

impl NodeRecord {
    pub fn is_control(&self) -> bool {
        self.node_type != NodeType::Data
    }
}

impl QueryDocument {
    pub fn main_node(&self) -> &NodeRecord {
        self.nodes
            .iter()
            .find(|n| n.main)
            .expect("validated document has a main node")
    }

    pub fn node(&self, id: &str) -> Option<&NodeRecord> {
        self.nodes.iter().find(|n| n.id == id)
    }

    /// Serialize back to the canonical JSON form.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("document serialization cannot fail")
    }
}

/// Parse a UTF-8 query document, checking structural invariants that make the
/// document well-formed regardless of any schema.
pub fn parse_query_document(document: &[u8]) -> Result<QueryDocument, DocumentError> {
    let doc: QueryDocument = serde_json::from_slice(document)?;
    if doc.format_version != 1 {
        return Err(DocumentError::Version(doc.format_version));
    }
    let mains = doc.nodes.iter().filter(|n| n.main).count();
    if mains != 1 {
        return Err(DocumentError::Structure(format!(
            "expected exactly one main node, found {mains}"
        )));
    }
    let mut node_ids = std::collections::HashSet::new();
    for n in &doc.nodes {
        if !node_ids.insert(n.id.as_str()) {
            return Err(DocumentError::Structure(format!(
                "duplicate node id `{}`",
                n.id
            )));
        }
    }
    let mut link_ids = std::collections::HashSet::new();
    for l in &doc.links {
        if !link_ids.insert(l.id.as_str()) {
            return Err(DocumentError::Structure(format!(
                "duplicate link id `{}`",
                l.id
            )));
        }
        for end in [&l.source, &l.target] {
            if !node_ids.contains(end.as_str()) {
                return Err(DocumentError::Structure(format!(
                    "link `{}` endpoint `{end}` names no node",
                    l.id
                )));
            }
        }
    }
    Ok(doc)
}

/// Validate a parsed document against its schema. All findings are returned
/// as diagnostics; an empty (or warning-only) result means the document can
/// be compiled.
pub fn validate_document(doc: &QueryDocument, _schema: &Schema) -> Diagnostics {
    let mut diags = Diagnostics::new();
    let main = match doc.nodes.iter().find(|n| n.main) {
        Some(n) => n,
        None => {
            diags.error("no-main-node", "document has no main node");
            return diags;
        }
    };

    // (a) non-reference links form a spanning tree rooted at the main node.
    let structural: Vec<&LinkRecord> = doc
        .links
        .iter()
        .filter(|l| l.kind != LinkKind::Reference)
        .collect();
    if structural.len() != doc.nodes.len() - 1 {
        diags.error(
            "not-a-tree",
            format!(
                "structure is not a tree: {} nodes need {} structural links, found {}",
                doc.nodes.len(),
                doc.nodes.len() - 1,
                structural.len()
            ),
        );
    }
    let mut parent: std::collections::HashMap<&str, &str> = Default::default();
    for l in &structural {
        if parent.insert(l.target.as_str(), l.source.as_str()).is_some() {
            diags.error_at(
                "not-a-tree",
                format!("structure is not a tree: node `{}` has two parents", l.target),
                &l.id,
            );
        }
        if l.target == main.id {
            diags.error_at("not-a-tree", "main node cannot have a parent", &l.id);
        }
    }
    // Reachability from the main node; also detects cycles.
    let mut depth: std::collections::HashMap<&str, usize> = Default::default();
    for n in &doc.nodes {
        let mut cur = n.id.as_str();
        let mut steps = 0usize;
        while cur != main.id {
            match parent.get(cur) {
                Some(p) if steps <= doc.nodes.len() => {
                    cur = p;
                    steps += 1;
                }
                _ => {
                    diags.error_at(
                        "not-a-tree",
                        "structure is not a tree: node is not connected to the main node",
                        &n.id,
                    );
                    steps = usize::MAX;
                    break;
                }
            }
        }
        if steps != usize::MAX {
            depth.insert(n.id.as_str(), steps);
        }
    }

    // (b) reference links point from a structurally deeper block to a higher one.
    for l in doc.links.iter().filter(|l| l.kind == LinkKind::Reference) {
        if l.mode == LinkMode::Optional {
            diags.error_at("reference-link", "reference links cannot be optional", &l.id);
        }
        if let (Some(sd), Some(td)) = (depth.get(l.source.as_str()), depth.get(l.target.as_str())) {
            if td > sd {
                diags.warning_at(
                    "reference-link",
                    "reference link should point from a deeper query block to a higher one",
                    &l.id,
                );
            }
        }
        if l.path == "++" || l.path == "==" {
            diags.error_at(
                "reference-link",
                "`++`/`==` are not allowed on reference links",
                &l.id,
            );
        }
    }

    // (c) order by / limit / offset only on the main node or global subquery roots.
    for n in &doc.nodes {
        if n.main {
            continue;
        }
        let incoming = structural.iter().find(|l| l.target == n.id);
        let in_global_subquery = incoming.map_or(false, |l| l.global);
        if (!n.order_by.is_empty() || n.limit.is_some() || n.offset.is_some())
            && !in_global_subquery
        {
            diags.error_at(
                "local-subquery-slicing",
                "order by, limit and offset are not allowed in local subqueries",
                &n.id,
            );
        }
    }

    // (d) every expression parses.
    for n in &doc.nodes {
        let check = |diags: &mut Diagnostics, text: &str, pos: ExprPosition, what: &str| {
            if let Err(e) = expr::parse_expression(text, pos) {
                diags.error_at("expr-parse", format!("{what} `{text}`: {e}"), &n.id);
            }
        };
        for f in &n.fields {
            check(&mut diags, &f.expr, ExprPosition::Field, "field expression");
        }
        for a in &n.aggregations {
            match expr::parse_expression(&a.expr, ExprPosition::Aggregation) {
                Err(e) => diags.error_at(
                    "expr-parse",
                    format!("aggregation expression `{}`: {e}", a.expr),
                    &n.id,
                ),
                Ok(t) => {
                    if !t.is_aggregate() {
                        diags.error_at(
                            "aggregation",
                            format!(
                                "aggregation expression `{}` must apply an aggregate function",
                                a.expr
                            ),
                            &n.id,
                        );
                    }
                }
            }
        }
        for c in &n.conditions {
            check(&mut diags, &c.expr, ExprPosition::Condition, "condition expression");
        }
        for g in &n.group_by {
            check(&mut diags, g, ExprPosition::GroupBy, "group by expression");
        }
        for o in &n.order_by {
            check(&mut diags, &o.expr, ExprPosition::OrderBy, "order by expression");
        }
        if let Some(cv) = &n.class_variable {
            if !(cv.starts_with('?')) {
                diags.error_at(
                    "class-variable",
                    format!("class variable `{cv}` must start with `?` or `??`"),
                    &n.id,
                );
            }
        }
    }
    for l in doc.links.iter().filter(|l| l.kind != LinkKind::Reference) {
        if l.path != "++" && l.path != "==" {
            if let Err(e) = expr::parse_expression(&l.path, ExprPosition::LinkPath) {
                diags.error_at("expr-parse", format!("link path `{}`: {e}", l.path), &l.id);
            }
        }
    }

    // (e) control node constraints.
    for n in &doc.nodes {
        if n.is_control() {
            if n.class_name.is_some() || n.class_variable.is_some() || n.instance_resource.is_some()
            {
                diags.error_at(
                    "control-node",
                    "unit/union nodes carry no class or instance specification",
                    &n.id,
                );
            }
        }
        if n.class_name.is_some() && n.class_variable.is_some() {
            diags.error_at(
                "class-spec",
                "class name and class variable are mutually exclusive",
                &n.id,
            );
        }
        for f in &n.fields {
            if f.helper && f.label_service != LabelService::None {
                diags.error_at(
                    "field-marks",
                    "a helper field cannot request a label service",
                    &n.id,
                );
            }
        }
    }
    for l in &doc.links {
        if (l.path == "++" || l.path == "==") && l.kind == LinkKind::Subquery && l.path == "==" {
            diags.error_at("link-path", "`==` is only allowed on join links", &l.id);
        }
        if (l.existence_check || l.global) && l.kind != LinkKind::Subquery {
            diags.error_at(
                "link-flags",
                "existenceCheck/global apply to subquery links only",
                &l.id,
            );
        }
    }

    diags
}
