//! Property tests for the expression pipeline and end-to-end determinism.

mod common;

use proptest::prelude::*;
use vqc::document::parse_query_document;
use vqc::expr::{desugar, parse_expression, print_canonical, ExprPosition};
use vqc::token::tokenize;

const NAMES: [&str; 5] = ["abc", "cost", "ward", "name1", "xval"];
const FUNCS: [&str; 4] = ["UCASE", "LCASE", "STR", "ABS"];
const CMP: [&str; 6] = ["=", "!=", "<", "<=", ">", ">="];

/// Texts of value expressions (field compartment grammar).
fn value_expr() -> impl Strategy<Value = String> {
    let name = prop::sample::select(&NAMES[..]).prop_map(str::to_string);
    let leaf = prop_oneof![
        name.clone(),
        any::<u32>().prop_map(|n| n.to_string()),
        "[a-z]{0,8}".prop_map(|s| format!("'{s}'")),
        name.clone().prop_map(|n| format!("{n}.personName")),
        name.clone().prop_map(|n| format!("{n}[1,3]")),
    ];
    leaf.prop_recursive(3, 16, 3, |inner| {
        prop_oneof![
            (inner.clone(), prop::sample::select(&FUNCS[..]))
                .prop_map(|(e, f)| format!("{f}({e})")),
            (inner.clone(), inner.clone(), prop::sample::select(&["+", "-", "*", "/"][..]))
                .prop_map(|(a, b, op)| format!("({a} {op} {b})")),
            (inner.clone(), inner).prop_map(|(a, b)| format!("IF({a} > {b}, {a}, {b})")),
        ]
    })
}

/// Texts of boolean expressions (condition compartment grammar).
fn condition_expr() -> impl Strategy<Value = String> {
    let cmp = (value_expr(), value_expr(), prop::sample::select(&CMP[..]))
        .prop_map(|(a, b, op)| format!("{a} {op} {b}"));
    let name = prop::sample::select(&NAMES[..]).prop_map(str::to_string);
    let leaf = prop_oneof![
        cmp,
        (name.clone(), any::<u16>(), any::<u16>())
            .prop_map(|(n, a, b)| format!("{n} BETWEEN ({a}, {b})")),
        (name.clone(), "[a-z]{1,6}").prop_map(|(n, p)| format!("{n} ~ '{p}'")),
        (name, "[a-z]{1,6}").prop_map(|(n, p)| format!("{n} LIKE '%{p}'")),
    ];
    leaf.prop_recursive(2, 12, 2, |inner| {
        prop_oneof![
            (inner.clone(), inner.clone()).prop_map(|(a, b)| format!("({a}) && ({b})")),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| format!("({a}) || ({b})")),
            inner.prop_map(|a| format!("NOT({a})")),
        ]
    })
}

proptest! {
    /// Printing a parsed tree canonically and reparsing reaches a fixpoint.
    #[test]
    fn canonical_print_reparse_fixpoint(text in value_expr()) {
        let parsed = parse_expression(&text, ExprPosition::Field).expect("generated expr parses");
        let printed = print_canonical(&parsed);
        let reparsed = parse_expression(&printed, ExprPosition::Field)
            .unwrap_or_else(|e| panic!("canonical form `{printed}` must reparse: {e}"));
        prop_assert_eq!(printed, print_canonical(&reparsed));
    }

    #[test]
    fn condition_print_reparse_fixpoint(text in condition_expr()) {
        let parsed =
            parse_expression(&text, ExprPosition::Condition).expect("generated expr parses");
        let printed = print_canonical(&parsed);
        let reparsed = parse_expression(&printed, ExprPosition::Condition)
            .unwrap_or_else(|e| panic!("canonical form `{printed}` must reparse: {e}"));
        prop_assert_eq!(printed, print_canonical(&reparsed));
    }

    /// Desugaring shorthand forms is idempotent.
    #[test]
    fn desugar_is_idempotent(text in condition_expr()) {
        let parsed =
            parse_expression(&text, ExprPosition::Condition).expect("generated expr parses");
        let once = desugar(&parsed);
        let twice = desugar(&once);
        prop_assert_eq!(print_canonical(&once), print_canonical(&twice));
    }

    /// `a - b` is subtraction; `a-b` is one name token.
    #[test]
    fn space_sensitivity_of_minus(a in prop::sample::select(&NAMES[..]),
                                  b in prop::sample::select(&NAMES[..])) {
        let spaced = parse_expression(&format!("{a} - {b}"), ExprPosition::Field).unwrap();
        prop_assert!(matches!(spaced, vqc::expr::Expr::Binary { .. }), "spaced form: {spaced:?}");
        let fused = parse_expression(&format!("{a}-{b}"), ExprPosition::Field).unwrap();
        prop_assert!(matches!(fused, vqc::expr::Expr::Name(_)), "fused form: {fused:?}");
    }
}

/// parse ∘ serialize is the identity on query documents.
#[test]
fn document_serialization_round_trips() {
    for case in common::all_cases() {
        let doc = parse_query_document(&case.document).expect("corpus document parses");
        let json = doc.to_json();
        let again = parse_query_document(json.as_bytes()).expect("serialized form parses");
        assert_eq!(json, again.to_json(), "{}: round trip drifted", case.name);
    }
}

/// Identical inputs always produce byte-identical SPARQL.
#[test]
fn compilation_is_deterministic() {
    for case in common::all_cases() {
        if case.meta.expect_error.is_some() {
            continue;
        }
        let a = common::compile_case(&case).map(|o| o.sparql);
        let b = common::compile_case(&case).map(|o| o.sparql);
        let a = a.unwrap_or_else(|e| format!("error: {}", e.message));
        let b = b.unwrap_or_else(|e| format!("error: {}", e.message));
        assert_eq!(a, b, "{}: nondeterministic output", case.name);
    }
}

/// Renaming an explicit alias renames exactly that variable in the output.
#[test]
fn alias_renaming_invariance() {
    let case = common::all_cases()
        .into_iter()
        .find(|c| c.name == "shared-explicit-alias")
        .expect("case exists");
    let original = common::compile_case(&case).expect("compiles").sparql;

    let mut renamed_case = case;
    let text = String::from_utf8(renamed_case.document.clone()).unwrap();
    assert!(text.contains("\"X\""), "alias spelled as expected");
    renamed_case.document = text.replace("\"X\"", "\"Y\"").into_bytes();
    let renamed = common::compile_case(&renamed_case).expect("compiles").sparql;

    let mapped: Vec<String> = tokenize(&original)
        .into_iter()
        .map(|t| if t == "?X" { "?Y".to_string() } else { t })
        .collect();
    assert_eq!(mapped, tokenize(&renamed));
}
