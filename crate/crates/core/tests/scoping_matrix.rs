//! Name visibility matrix: every combination of name category and structural
//! transition is checked against the scoping rules, plus the footnote cases.

mod common;

use common::matrix::{build_table, run_matrix};
use vqc::corpus;
use vqc::schema::Schema;

fn fixture_schema() -> Schema {
    common::load_schema(&corpus::workspace_fixtures_dir().join("mini-hospital.schema.json"))
}

#[test]
fn visibility_matrix_all_cells() {
    let schema = fixture_schema();
    let failures = run_matrix(&schema);
    assert!(failures.is_empty(), "matrix failures:\n{}", failures.join("\n"));
}

/// A value name that crossed an optional border upward cannot start a
/// navigation expression at the target node.
#[test]
fn footnote_no_navigation_after_upward_optional() {
    let schema = fixture_schema();
    let doc = serde_json::json!({
        "schemaName": "mini-hospital",
        "nodes": [
            { "id": "use", "main": true, "className": "Patient",
              "conditions": [ { "expr": "nm.personName = 'x'", "order": 1 } ] },
            { "id": "def", "className": "HospitalEpisode",
              "fields": [ { "expr": "responsiblePhysician", "alias": "nm", "order": 1 } ] }
        ],
        "links": [
            { "id": "l1", "source": "use", "target": "def", "path": "hospitalEpisode",
              "mode": "optional", "order": 1 }
        ]
    });
    let (_, diags) = build_table(&doc, &schema);
    assert!(
        diags.has_code("scoping"),
        "expected a scoping diagnostic, got {diags:?}"
    );
}

/// An instance name that descended into a subquery cannot be aggregated there.
#[test]
fn footnote_no_aggregation_of_descended_instance() {
    let schema = fixture_schema();
    let doc = serde_json::json!({
        "schemaName": "mini-hospital",
        "nodes": [
            { "id": "def", "main": true, "className": "HospitalEpisode",
              "instanceAlias": "nm" },
            { "id": "use", "className": "Patient",
              "aggregations": [ { "expr": "count(nm)", "alias": "c", "order": 1 } ] }
        ],
        "links": [
            { "id": "l1", "source": "def", "target": "use", "path": "patient",
              "kind": "subquery", "order": 1 }
        ]
    });
    let (_, diags) = build_table(&doc, &schema);
    assert!(
        diags.has_code("scoping"),
        "expected a scoping diagnostic, got {diags:?}"
    );
}

/// Using an alias that is out of scope falls through to schema resolution and
/// is reported when it names no schema entity.
#[test]
fn out_of_scope_alias_is_unresolved() {
    let schema = fixture_schema();
    // Aggregate alias used at its own node: not visible there.
    let doc = serde_json::json!({
        "schemaName": "mini-hospital",
        "nodes": [
            { "id": "def", "main": true, "className": "HospitalEpisode",
              "aggregations": [ { "expr": "count(.)", "alias": "nm", "order": 1 } ],
              "conditions": [ { "expr": "nm > 1", "order": 1 } ] }
        ]
    });
    let (_, diags) = build_table(&doc, &schema);
    assert!(
        diags.has_code("unresolved-name"),
        "expected unresolved-name, got {diags:?}"
    );
}
