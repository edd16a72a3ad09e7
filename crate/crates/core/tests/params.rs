//! Generation parameters: string literal conversion modes, engine-specific
//! rewrites, and the default grouping separator.

mod common;

use vqc::corpus;
use vqc::generate::Params;
use vqc::schema::Schema;
use vqc::token::tokenize;

fn fixture_schema() -> Schema {
    common::load_schema(&corpus::workspace_fixtures_dir().join("mini-hospital.schema.json"))
}

fn compile_with(doc: &serde_json::Value, params_json: &str) -> String {
    let schema = fixture_schema();
    let params = Params::from_json(params_json.as_bytes()).expect("params parse");
    vqc::compile(&serde_json::to_vec(doc).unwrap(), &schema, &params)
        .unwrap_or_else(|e| panic!("compiles: {} / {:?}", e.message, e.diagnostics))
        .sparql
}

/// True when `needle`'s token sequence occurs contiguously in `haystack`.
pub fn tokens_contain(haystack: &str, needle: &str) -> bool {
    let h = tokenize(haystack);
    let n = tokenize(needle);
    !n.is_empty() && h.windows(n.len()).any(|w| w == n.as_slice())
}

fn gender_doc() -> serde_json::Value {
    serde_json::json!({
        "schemaName": "mini-hospital",
        "nodes": [
            { "id": "n1", "main": true, "className": "Patient", "instanceAlias": "P",
              "conditions": [ { "expr": "gender = \"male\"", "order": 1 } ] }
        ]
    })
}

#[test]
fn string_conversion_simple() {
    let q = compile_with(&gender_doc(), r#"{"stringLiteralConversion":"SIMPLE"}"#);
    assert!(
        tokens_contain(&q, r#"FILTER(STR(?gender) = "male")"#),
        "missing SIMPLE form:\n{q}"
    );
    assert!(tokens_contain(&q, "?P :gender ?gender."), "base triple:\n{q}");
}

#[test]
fn string_conversion_typed() {
    let q = compile_with(&gender_doc(), r#"{"stringLiteralConversion":"TYPED"}"#);
    assert!(
        tokens_contain(&q, r#"FILTER(?gender = "male"^^xsd:string)"#),
        "missing TYPED form:\n{q}"
    );
}

#[test]
fn string_conversion_off() {
    let q = compile_with(&gender_doc(), r#"{"stringLiteralConversion":"OFF"}"#);
    assert!(
        tokens_contain(&q, r#"FILTER(?gender = "male")"#),
        "missing OFF form:\n{q}"
    );
}

#[test]
fn virtuoso_date_difference() {
    let doc = serde_json::json!({
        "schemaName": "mini-hospital",
        "nodes": [
            { "id": "n1", "main": true, "className": "HospitalEpisode", "instanceAlias": "H",
              "fields": [
                  { "expr": "days(dischargeDate - admissionDate)", "alias": "stay", "order": 1 }
              ] }
        ]
    });
    let q = compile_with(&doc, r#"{"queryEngineType":"VIRTUOSO"}"#);
    assert!(
        tokens_contain(
            &q,
            r#"bif:datediff("day", xsd:dateTime(?admissionDate), xsd:dateTime(?dischargeDate))"#
        ),
        "missing datediff rewrite:\n{q}"
    );
}

#[test]
fn date_difference_requires_virtuoso() {
    let doc = serde_json::json!({
        "schemaName": "mini-hospital",
        "nodes": [
            { "id": "n1", "main": true, "className": "HospitalEpisode", "instanceAlias": "H",
              "fields": [
                  { "expr": "days(dischargeDate - admissionDate)", "alias": "stay", "order": 1 }
              ] }
        ]
    });
    let schema = fixture_schema();
    let result = vqc::compile(
        &serde_json::to_vec(&doc).unwrap(),
        &schema,
        &Params::default(),
    );
    match result {
        Err(e) => assert!(e.diagnostics.has_code("engine"), "{:?}", e.diagnostics),
        Ok(out) => panic!("expected an engine diagnostic, got:\n{}", out.sparql),
    }
}

#[test]
fn group_concat_default_separator() {
    let doc = serde_json::json!({
        "schemaName": "mini-hospital",
        "nodes": [
            { "id": "n1", "main": true, "className": "Patient", "instanceAlias": "P",
              "fields": [ { "expr": "personID", "requireValues": true, "order": 1 } ],
              "aggregations": [ { "expr": "GROUP_CONCAT(personName)", "alias": "names", "order": 1 } ] }
        ]
    });
    let q = compile_with(&doc, "{}");
    assert!(
        tokens_contain(&q, r#"GROUP_CONCAT(?personName; SEPARATOR=", ")"#),
        "missing separator default:\n{q}"
    );
}

#[test]
fn virtuoso_substring_builtin() {
    let doc = serde_json::json!({
        "schemaName": "mini-hospital",
        "nodes": [
            { "id": "n1", "main": true, "className": "Patient", "instanceAlias": "P",
              "fields": [ { "expr": "personName[1,3]", "alias": "s", "order": 1 } ] }
        ]
    });
    let q = compile_with(&doc, r#"{"queryEngineType":"VIRTUOSO"}"#);
    assert!(
        tokens_contain(&q, "bif:substring(?personName, 1, 3)"),
        "missing bif:substring rewrite:\n{q}"
    );
}
