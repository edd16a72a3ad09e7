use super::*;

fn parse(text: &str) -> Expr {
    parse_expression(text, ExprPosition::Condition).unwrap_or_else(|e| {
        panic!("failed to parse {text:?}: {e}");
    })
}

fn roundtrip(text: &str) {
    let first = parse(text);
    let printed = print_canonical(&first);
    let second = parse_expression(&printed, ExprPosition::Condition)
        .unwrap_or_else(|e| panic!("canonical form {printed:?} does not reparse: {e}"));
    assert_eq!(
        print_canonical(&second),
        printed,
        "canonical print is not a fixpoint for {text:?}"
    );
}

#[test]
fn plain_name() {
    match parse("caseRecordNo") {
        Expr::Name(entity) => {
            assert_eq!(entity.steps.len(), 1);
            assert_eq!(entity.single_plain_name(), Some("caseRecordNo"));
            assert!(!entity.reference_mark);
        }
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn prefixed_and_display_names() {
    match parse("foaf:name") {
        Expr::Name(e) => match &e.steps[0].item {
            StepItem::Name { prefix, local, display } => {
                assert_eq!(prefix.as_deref(), Some("foaf"));
                assert_eq!(local, "name");
                assert!(!display);
            }
            other => panic!("unexpected {other:?}"),
        },
        other => panic!("unexpected {other:?}"),
    }
    match parse("[case record number]") {
        Expr::Name(e) => match &e.steps[0].item {
            StepItem::Name { local, display, .. } => {
                assert_eq!(local, "case record number");
                assert!(display);
            }
            other => panic!("unexpected {other:?}"),
        },
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn dotted_path() {
    match parse("patient.personID") {
        Expr::Name(e) => {
            assert_eq!(e.steps.len(), 2);
            assert_eq!(e.path_key(), "patient/personID");
        }
        other => panic!("unexpected {other:?}"),
    }
    // Slash separator normalizes to the same path.
    match parse("patient/personID") {
        Expr::Name(e) => assert_eq!(e.path_key(), "patient/personID"),
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn inverse_steps() {
    match parse("^patient.personID") {
        Expr::Name(e) => assert!(e.steps[0].inverse),
        other => panic!("unexpected {other:?}"),
    }
    match parse("INV(patient).personID") {
        Expr::Name(e) => {
            assert!(e.steps[0].inverse);
            assert!(!e.steps[1].inverse);
        }
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn reference_and_constant_marks() {
    match parse("@minAge") {
        Expr::Name(e) => assert!(e.reference_mark),
        other => panic!("unexpected {other:?}"),
    }
    match parse("`skos:broader") {
        Expr::Name(e) => assert!(e.constant_mark),
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn spaced_arithmetic_vs_glued_name() {
    // Glued dash stays inside the name.
    match parse("from-date") {
        Expr::Name(e) => assert_eq!(e.single_plain_name(), Some("from-date")),
        other => panic!("unexpected {other:?}"),
    }
    // Spaced dash is subtraction.
    match parse("a - b") {
        Expr::Binary { op: BinOp::Sub, .. } => {}
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn precedence() {
    // a = 1 || b = 2 && c = 3  parses as  a = 1 || (b = 2 && c = 3)
    match parse("a = 1 || b = 2 && c = 3") {
        Expr::Binary { op: BinOp::Or, rhs, .. } => match *rhs {
            Expr::Binary { op: BinOp::And, .. } => {}
            other => panic!("unexpected {other:?}"),
        },
        other => panic!("unexpected {other:?}"),
    }
    match parse("1 + 2 * 3") {
        Expr::Binary { op: BinOp::Add, rhs, .. } => match *rhs {
            Expr::Binary { op: BinOp::Mul, .. } => {}
            other => panic!("unexpected {other:?}"),
        },
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn comparisons_and_literals() {
    match parse("ageAtAdmission >= 18") {
        Expr::Binary { op: BinOp::Ge, rhs, .. } => assert_eq!(*rhs, Expr::Num("18".into())),
        other => panic!("unexpected {other:?}"),
    }
    match parse("name = 'Alice'") {
        Expr::Binary { op: BinOp::Eq, rhs, .. } => match *rhs {
            Expr::Str { ref value, .. } => assert_eq!(value, "Alice"),
            ref other => panic!("unexpected {other:?}"),
        },
        other => panic!("unexpected {other:?}"),
    }
    assert_eq!(parse("true"), Expr::Bool(true));
    assert_eq!(parse("-4.5"), Expr::Num("-4.5".into()));
}

#[test]
fn aggregates() {
    match parse_expression("COUNT(treatmentInWard)", ExprPosition::Aggregation).unwrap() {
        Expr::Aggregate { func, distinct, .. } => {
            assert_eq!(func, "COUNT");
            assert!(!distinct);
        }
        other => panic!("unexpected {other:?}"),
    }
    match parse_expression("count(distinct ward)", ExprPosition::Aggregation).unwrap() {
        Expr::Aggregate { func, distinct, .. } => {
            assert_eq!(func, "COUNT");
            assert!(distinct);
        }
        other => panic!("unexpected {other:?}"),
    }
    match parse_expression(
        "GROUP_CONCAT(wardName; SEPARATOR = '; ')",
        ExprPosition::Aggregation,
    )
    .unwrap()
    {
        Expr::Aggregate { separator, .. } => assert_eq!(separator.as_deref(), Some("; ")),
        other => panic!("unexpected {other:?}"),
    }
    assert!(parse("SUM(x) > 4").contains_aggregate());
    assert!(!parse("x > 4").contains_aggregate());
}

#[test]
fn between_and_like_attachments() {
    match parse("ageAtAdmission BETWEEN (18, 65)") {
        Expr::Name(e) => assert!(e.between.is_some()),
        other => panic!("unexpected {other:?}"),
    }
    match parse("familyName LIKE 'Sm_th%'") {
        Expr::Name(e) => {
            let like = e.like.unwrap();
            assert_eq!(like.op, LikeOp::Like);
            assert_eq!(like.pattern, "Sm_th%");
        }
        other => panic!("unexpected {other:?}"),
    }
    match parse("familyName ~* 'smith'") {
        Expr::Name(e) => assert_eq!(e.like.unwrap().op, LikeOp::RegexCi),
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn substring_and_lang_tags() {
    match parse("personID[1,6]") {
        Expr::Name(e) => assert_eq!(e.substring, Some((1, Some(6)))),
        other => panic!("unexpected {other:?}"),
    }
    match parse("label@en") {
        Expr::Name(e) => assert_eq!(e.lang_tags, vec!["en".to_string()]),
        other => panic!("unexpected {other:?}"),
    }
    match parse("label@(en,de)") {
        Expr::Name(e) => assert_eq!(e.lang_tags, vec!["en".to_string(), "de".to_string()]),
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn in_lists_and_coalesce() {
    match parse("status IN ('open', 'closed')") {
        Expr::In { negated, items, .. } => {
            assert!(!negated);
            assert_eq!(items.len(), 2);
        }
        other => panic!("unexpected {other:?}"),
    }
    match parse("status NOT IN ('void')") {
        Expr::In { negated, .. } => assert!(negated),
        other => panic!("unexpected {other:?}"),
    }
    match parse("nickName ? firstName") {
        Expr::Coalesce2 { .. } => {}
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn value_scopes() {
    match parse_expression("{1..5}", ExprPosition::Condition).unwrap() {
        Expr::Values(ValueScope::Range(1, 5)) => {}
        other => panic!("unexpected {other:?}"),
    }
    match parse_expression("{'a', 'b', UNDEF}", ExprPosition::Condition).unwrap() {
        Expr::Values(ValueScope::List(items)) => {
            assert_eq!(items.len(), 3);
            assert!(items[2].is_none());
        }
        other => panic!("unexpected {other:?}"),
    }
    match parse_expression("{(1, 'a'), (2, 'b')}", ExprPosition::Condition).unwrap() {
        Expr::Values(ValueScope::Tuples(rows)) => assert_eq!(rows.len(), 2),
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn date_diff_dash_needs_no_spaces() {
    match parse("days(dischargeDate-admissionDate) > 10") {
        Expr::Binary { lhs, .. } => match *lhs {
            Expr::Call { ref name, ref args } => {
                assert_eq!(name, "days");
                assert_eq!(args.len(), 2);
            }
            ref other => panic!("unexpected {other:?}"),
        },
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn link_path_forms() {
    let p = parse_expression("treatmentInWard", ExprPosition::LinkPath).unwrap();
    assert!(matches!(p, Expr::Name(_)));
    let v = parse_expression("??p", ExprPosition::LinkPath).unwrap();
    assert!(matches!(v, Expr::Var { hidden: true, .. }));
    match parse_expression("broader+", ExprPosition::LinkPath).unwrap() {
        Expr::Name(e) => assert_eq!(e.steps[0].modifier, PathMod::OneOrMore),
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn exists_shorthand() {
    match parse("NOT EXISTS(status = 'void')") {
        Expr::Exists { negated: true, .. } => {}
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn desugar_between_matches_manual() {
    let sugared = desugar(&parse("age BETWEEN (18, 65)"));
    let manual = desugar(&parse("age >= 18 && age <= 65"));
    assert_eq!(print_canonical(&sugared), print_canonical(&manual));
}

#[test]
fn desugar_like() {
    let e = desugar(&parse("name LIKE 'Sm_th%'"));
    assert_eq!(print_canonical(&e), "REGEX(name, '^Sm.th')");
    let e = desugar(&parse("name LIKE '%ith'"));
    assert_eq!(print_canonical(&e), "REGEX(name, 'ith$')");
    let e = desugar(&parse("name LIKE 'Smith'"));
    assert_eq!(print_canonical(&e), "REGEX(name, '^Smith$')");
}

#[test]
fn desugar_is_idempotent() {
    for text in [
        "age BETWEEN (18, 65)",
        "name LIKE '%mit%'",
        "x IN (1, 2, 3)",
        "a ? b",
        "personID[1,6] = '123456'",
    ] {
        let once = desugar(&parse(text));
        let twice = desugar(&once);
        assert_eq!(print_canonical(&once), print_canonical(&twice));
    }
}

#[test]
fn canonical_print_roundtrips() {
    for text in [
        "caseRecordNo",
        "patient.personID",
        "a = 1 || b = 2 && c = 3",
        "1 + 2 * 3",
        "(1 + 2) * 3",
        "COUNT(x)",
        "GROUP_CONCAT(name; SEPARATOR = ', ')",
        "age BETWEEN (18, 65)",
        "name ~* 'smith'",
        "label@(en,de)",
        "x NOT IN (1, 2)",
        "nickName ? firstName",
        "!(a = 1)",
        "days(d2-d1) > 10",
        "{1..5}",
        "STRLEN(name) > 3",
    ] {
        roundtrip(text);
    }
}

#[test]
fn errors_reported() {
    assert!(parse_expression("", ExprPosition::Condition).is_err());
    assert!(parse_expression("a ==", ExprPosition::Condition).is_err());
    assert!(parse_expression("'unterminated", ExprPosition::Condition).is_err());
    assert!(parse_expression("x IN 1", ExprPosition::Condition).is_err());
}
