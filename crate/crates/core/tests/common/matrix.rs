//! Reusable name-visibility matrix: one cell per name category and
//! structural transition, checked against the scoping rules.

use vqc::ast::{build_initial_ast, complete_ast};
use vqc::diag::Diagnostics;
use vqc::document::parse_query_document;
use vqc::schema::Schema;
use vqc::symbols::{SymbolKind, SymbolTable};

/// How the defining node relates to the using node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Transition {
    ThisNode,
    SameFragment,
    DownOptional,
    UpOptional,
    DownSubquery,
    UpSubquery,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NameCategory {
    Instance,
    Property,
    ExplicitAlias,
    Aggregate,
}

pub const TRANSITIONS: [Transition; 6] = [
    Transition::ThisNode,
    Transition::SameFragment,
    Transition::DownOptional,
    Transition::UpOptional,
    Transition::DownSubquery,
    Transition::UpSubquery,
];

pub const CATEGORIES: [NameCategory; 4] = [
    NameCategory::Instance,
    NameCategory::Property,
    NameCategory::ExplicitAlias,
    NameCategory::Aggregate,
];

/// Expected visibility of a name of the given category after the transition.
pub fn expected_visible(cat: NameCategory, tr: Transition) -> bool {
    use NameCategory::*;
    use Transition::*;
    match (cat, tr) {
        (Instance, UpSubquery) => false,
        (Instance, _) => true,
        (Property | ExplicitAlias, ThisNode | SameFragment | UpOptional | UpSubquery) => true,
        (Property | ExplicitAlias, DownOptional | DownSubquery) => false,
        (Aggregate, UpSubquery) => true,
        (Aggregate, _) => false,
    }
}

/// The defining node (id "def"). The tested name is `nm` except for the
/// property category, where the property name itself is the name.
fn defining_node(cat: NameCategory, main: bool) -> serde_json::Value {
    let mut node = serde_json::json!({
        "id": "def",
        "className": "HospitalEpisode",
    });
    if main {
        node["main"] = serde_json::json!(true);
    }
    match cat {
        NameCategory::Instance => {
            node["instanceAlias"] = serde_json::json!("nm");
        }
        NameCategory::Property => {
            node["fields"] = serde_json::json!([{ "expr": "caseRecordNo", "order": 1 }]);
        }
        NameCategory::ExplicitAlias => {
            node["fields"] =
                serde_json::json!([{ "expr": "totalCost", "alias": "nm", "order": 1 }]);
        }
        NameCategory::Aggregate => {
            node["aggregations"] =
                serde_json::json!([{ "expr": "count(.)", "alias": "nm", "order": 1 }]);
        }
    }
    node
}

/// Build a minimal document that defines the name at `def` and has a node
/// `use` reached through the given transition. Returns (document, node id at
/// which visibility is probed).
pub fn matrix_document(cat: NameCategory, tr: Transition) -> (serde_json::Value, &'static str) {
    let (nodes, links) = match tr {
        Transition::ThisNode => (vec![defining_node(cat, true)], serde_json::json!([])),
        // `def` is the main node; `use` hangs off it.
        Transition::SameFragment => (
            vec![
                defining_node(cat, true),
                serde_json::json!({ "id": "use", "className": "Patient" }),
            ],
            serde_json::json!([
                { "id": "l1", "source": "def", "target": "use", "path": "patient", "order": 1 }
            ]),
        ),
        Transition::DownOptional => (
            vec![
                defining_node(cat, true),
                serde_json::json!({ "id": "use", "className": "Patient" }),
            ],
            serde_json::json!([
                { "id": "l1", "source": "def", "target": "use", "path": "patient",
                  "mode": "optional", "order": 1 }
            ]),
        ),
        Transition::DownSubquery => (
            vec![
                defining_node(cat, true),
                serde_json::json!({ "id": "use", "className": "Patient" }),
            ],
            serde_json::json!([
                { "id": "l1", "source": "def", "target": "use", "path": "patient",
                  "kind": "subquery", "order": 1 }
            ]),
        ),
        // `use` is the main node; `def` hangs below it.
        Transition::UpOptional => (
            vec![
                serde_json::json!({ "id": "use", "main": true, "className": "Patient" }),
                defining_node(cat, false),
            ],
            serde_json::json!([
                { "id": "l1", "source": "use", "target": "def", "path": "hospitalEpisode",
                  "mode": "optional", "order": 1 }
            ]),
        ),
        Transition::UpSubquery => (
            vec![
                serde_json::json!({ "id": "use", "main": true, "className": "Patient" }),
                defining_node(cat, false),
            ],
            serde_json::json!([
                { "id": "l1", "source": "use", "target": "def", "path": "hospitalEpisode",
                  "kind": "subquery", "order": 1 }
            ]),
        ),
    };
    let doc = serde_json::json!({
        "schemaName": "mini-hospital",
        "nodes": nodes,
        "links": links,
    });
    let probe = if tr == Transition::ThisNode { "def" } else { "use" };
    (doc, probe)
}

pub fn probed_name(cat: NameCategory) -> &'static str {
    match cat {
        NameCategory::Property => "caseRecordNo",
        _ => "nm",
    }
}

pub fn build_table(doc: &serde_json::Value, schema: &Schema) -> (SymbolTable, Diagnostics) {
    let bytes = serde_json::to_vec(doc).unwrap();
    let parsed = parse_query_document(&bytes).expect("document parses");
    let mut diags = Diagnostics::new();
    let ast = build_initial_ast(&parsed, schema).expect("initial ast");
    let (_, table) = complete_ast(ast, schema, &mut diags).expect("full ast");
    (table, diags)
}

/// One matrix cell: the name is (in)visible at the probe node exactly per the
/// visibility table, and visible descriptions carry the crossing flags.
pub fn check_cell(cat: NameCategory, tr: Transition, schema: &Schema) -> Result<(), String> {
    let (doc, probe) = matrix_document(cat, tr);
    let (table, diags) = build_table(&doc, schema);
    if diags.has_errors() {
        return Err(format!("{cat:?}/{tr:?}: unexpected diagnostics {diags:?}"));
    }
    let name = probed_name(cat);
    let descs = table.lookup(probe, name);
    let visible = descs.is_some_and(|d| !d.is_empty());
    let expected = expected_visible(cat, tr);
    if visible != expected {
        return Err(format!(
            "{cat:?}/{tr:?}: `{name}` visible={visible}, expected {expected}"
        ));
    }
    if let Some(descs) = descs {
        let d = &descs[0];
        match tr {
            Transition::UpOptional if cat != NameCategory::Instance => {
                if !d.up_by_optional {
                    return Err(format!("{cat:?}/{tr:?}: upByOptional flag missing"));
                }
            }
            Transition::DownSubquery => {
                if !d.down_by_subquery {
                    return Err(format!("{cat:?}/{tr:?}: downBySubquery flag missing"));
                }
            }
            Transition::UpSubquery => {
                if d.up_by_subquery != 1 {
                    return Err(format!(
                        "{cat:?}/{tr:?}: upBySubQuery={}, expected 1",
                        d.up_by_subquery
                    ));
                }
            }
            _ => {}
        }
        let expected_kind = match cat {
            NameCategory::Instance => SymbolKind::ClassAlias,
            NameCategory::Property => SymbolKind::PropertyName,
            NameCategory::ExplicitAlias => SymbolKind::PropertyAlias,
            NameCategory::Aggregate => SymbolKind::AggregateAlias,
        };
        if d.kind != expected_kind {
            return Err(format!(
                "{cat:?}/{tr:?}: kind {:?}, expected {expected_kind:?}",
                d.kind
            ));
        }
    }
    Ok(())
}

pub fn run_matrix(schema: &Schema) -> Vec<String> {
    let mut failures = Vec::new();
    for cat in CATEGORIES {
        for tr in TRANSITIONS {
            if let Err(e) = check_cell(cat, tr, schema) {
                failures.push(e);
            }
        }
    }
    failures
}
