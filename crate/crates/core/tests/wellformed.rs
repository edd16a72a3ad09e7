//! Well-formedness of every generated query: independent syntax check plus
//! variable-binding and implicit-grouping analysis over the parsed algebra.

mod common;

use std::collections::HashSet;

use spargebra::algebra::{AggregateExpression, Expression, GraphPattern, OrderExpression};
use spargebra::term::TermPattern;
use spargebra::Query;

/// Variables in scope after evaluating a pattern (SPARQL "in-scope" set).
fn in_scope(pattern: &GraphPattern, out: &mut HashSet<String>) {
    match pattern {
        GraphPattern::Bgp { patterns } => {
            for t in patterns {
                if let TermPattern::Variable(v) = &t.subject {
                    out.insert(v.as_str().to_string());
                }
                if let spargebra::term::NamedNodePattern::Variable(v) = &t.predicate {
                    out.insert(v.as_str().to_string());
                }
                if let TermPattern::Variable(v) = &t.object {
                    out.insert(v.as_str().to_string());
                }
            }
        }
        GraphPattern::Path {
            subject, object, ..
        } => {
            if let TermPattern::Variable(v) = subject {
                out.insert(v.as_str().to_string());
            }
            if let TermPattern::Variable(v) = object {
                out.insert(v.as_str().to_string());
            }
        }
        GraphPattern::Join { left, right }
        | GraphPattern::Union { left, right }
        | GraphPattern::LeftJoin { left, right, .. } => {
            in_scope(left, out);
            in_scope(right, out);
        }
        // MINUS removes bindings; only the left side contributes.
        GraphPattern::Minus { left, .. } => in_scope(left, out),
        GraphPattern::Filter { inner, .. }
        | GraphPattern::OrderBy { inner, .. }
        | GraphPattern::Distinct { inner }
        | GraphPattern::Reduced { inner }
        | GraphPattern::Slice { inner, .. } => in_scope(inner, out),
        GraphPattern::Extend {
            inner, variable, ..
        } => {
            in_scope(inner, out);
            out.insert(variable.as_str().to_string());
        }
        GraphPattern::Values { variables, .. } => {
            for v in variables {
                out.insert(v.as_str().to_string());
            }
        }
        GraphPattern::Project { variables, .. } => {
            for v in variables {
                out.insert(v.as_str().to_string());
            }
        }
        GraphPattern::Group {
            variables,
            aggregates,
            ..
        } => {
            for v in variables {
                out.insert(v.as_str().to_string());
            }
            for (v, _) in aggregates {
                out.insert(v.as_str().to_string());
            }
        }
        GraphPattern::Graph { inner, .. } | GraphPattern::Service { inner, .. } => {
            in_scope(inner, out)
        }
    }
}

fn expr_vars(expr: &Expression, out: &mut HashSet<String>) {
    match expr {
        Expression::Variable(v) => {
            out.insert(v.as_str().to_string());
        }
        Expression::Or(a, b)
        | Expression::And(a, b)
        | Expression::Equal(a, b)
        | Expression::SameTerm(a, b)
        | Expression::Greater(a, b)
        | Expression::GreaterOrEqual(a, b)
        | Expression::Less(a, b)
        | Expression::LessOrEqual(a, b)
        | Expression::Add(a, b)
        | Expression::Subtract(a, b)
        | Expression::Multiply(a, b)
        | Expression::Divide(a, b) => {
            expr_vars(a, out);
            expr_vars(b, out);
        }
        Expression::In(a, items) => {
            expr_vars(a, out);
            for i in items {
                expr_vars(i, out);
            }
        }
        Expression::UnaryPlus(a) | Expression::UnaryMinus(a) | Expression::Not(a) => {
            expr_vars(a, out)
        }
        Expression::FunctionCall(_, args) => {
            for a in args {
                expr_vars(a, out);
            }
        }
        Expression::If(a, b, c) => {
            expr_vars(a, out);
            expr_vars(b, out);
            expr_vars(c, out);
        }
        Expression::Coalesce(args) => {
            for a in args {
                expr_vars(a, out);
            }
        }
        Expression::Bound(v) => {
            out.insert(v.as_str().to_string());
        }
        // EXISTS introduces its own scope; its variables may be fresh.
        Expression::Exists(_) => {}
        Expression::NamedNode(_) | Expression::Literal(_) => {}
    }
}

/// Recursively check every Project/Group/OrderBy layer of the algebra.
fn check_pattern(pattern: &GraphPattern, problems: &mut Vec<String>) {
    match pattern {
        GraphPattern::Project { inner, variables } => {
            let mut scope = HashSet::new();
            in_scope(inner, &mut scope);
            for v in variables {
                if !scope.contains(v.as_str()) {
                    problems.push(format!("projected ?{} is unbound in its scope", v.as_str()));
                }
            }
            check_pattern(inner, problems);
        }
        GraphPattern::Group {
            inner,
            variables,
            aggregates,
        } => {
            let mut scope = HashSet::new();
            in_scope(inner, &mut scope);
            for v in variables {
                if !scope.contains(v.as_str()) {
                    problems.push(format!("GROUP BY ?{} is unbound", v.as_str()));
                }
            }
            for (_, agg) in aggregates {
                let mut vars = HashSet::new();
                match agg {
                    AggregateExpression::CountSolutions { .. } => {}
                    AggregateExpression::FunctionCall { expr, .. } => expr_vars(expr, &mut vars),
                }
                for v in vars {
                    if !scope.contains(&v) {
                        problems.push(format!("aggregated ?{v} is unbound"));
                    }
                }
            }
            check_pattern(inner, problems);
        }
        GraphPattern::OrderBy { inner, expression } => {
            let mut scope = HashSet::new();
            in_scope(inner, &mut scope);
            for oe in expression {
                let mut vars = HashSet::new();
                match oe {
                    OrderExpression::Asc(e) | OrderExpression::Desc(e) => expr_vars(e, &mut vars),
                }
                for v in vars {
                    if !scope.contains(&v) {
                        problems.push(format!("ORDER BY ?{v} is unbound"));
                    }
                }
            }
            check_pattern(inner, problems);
        }
        GraphPattern::Bgp { .. } | GraphPattern::Values { .. } | GraphPattern::Path { .. } => {}
        GraphPattern::Join { left, right }
        | GraphPattern::Union { left, right }
        | GraphPattern::Minus { left, right } => {
            check_pattern(left, problems);
            check_pattern(right, problems);
        }
        GraphPattern::LeftJoin { left, right, .. } => {
            check_pattern(left, problems);
            check_pattern(right, problems);
        }
        GraphPattern::Filter { inner, expr } => {
            // Filters may mention EXISTS-scoped variables; only walk nested
            // EXISTS patterns structurally.
            let mut stack = vec![expr];
            while let Some(e) = stack.pop() {
                if let Expression::Exists(p) = e {
                    check_pattern(p, problems);
                }
                match e {
                    Expression::Or(a, b)
                    | Expression::And(a, b)
                    | Expression::Equal(a, b)
                    | Expression::Greater(a, b)
                    | Expression::GreaterOrEqual(a, b)
                    | Expression::Less(a, b)
                    | Expression::LessOrEqual(a, b) => {
                        stack.push(a);
                        stack.push(b);
                    }
                    Expression::Not(a) => stack.push(a),
                    _ => {}
                }
            }
            check_pattern(inner, problems);
        }
        GraphPattern::Extend { inner, .. }
        | GraphPattern::Distinct { inner }
        | GraphPattern::Reduced { inner }
        | GraphPattern::Slice { inner, .. }
        | GraphPattern::Graph { inner, .. }
        | GraphPattern::Service { inner, .. } => check_pattern(inner, problems),
    }
}

/// Implicit grouping: under a Group, projected non-aggregate variables must
/// be group keys or aggregate results.
fn check_grouping(pattern: &GraphPattern, problems: &mut Vec<String>) {
    if let GraphPattern::Project { inner, variables } = pattern {
        // Peel Distinct/Slice/OrderBy/Extend down to a possible Group.
        let mut cur: &GraphPattern = inner;
        let mut extended: HashSet<String> = HashSet::new();
        loop {
            match cur {
                GraphPattern::Extend {
                    inner, variable, ..
                } => {
                    extended.insert(variable.as_str().to_string());
                    cur = inner;
                }
                GraphPattern::OrderBy { inner, .. }
                | GraphPattern::Distinct { inner }
                | GraphPattern::Reduced { inner }
                | GraphPattern::Slice { inner, .. }
                | GraphPattern::Filter { inner, .. } => cur = inner,
                _ => break,
            }
        }
        if let GraphPattern::Group {
            variables: keys,
            aggregates,
            ..
        } = cur
        {
            let mut allowed: HashSet<String> =
                keys.iter().map(|v| v.as_str().to_string()).collect();
            for (v, _) in aggregates {
                allowed.insert(v.as_str().to_string());
            }
            allowed.extend(extended);
            for v in variables {
                if !allowed.contains(v.as_str()) {
                    problems.push(format!(
                        "?{} projected out of an aggregated query without grouping",
                        v.as_str()
                    ));
                }
            }
        }
    }
    // Recurse into subqueries.
    match pattern {
        GraphPattern::Join { left, right }
        | GraphPattern::Union { left, right }
        | GraphPattern::Minus { left, right }
        | GraphPattern::LeftJoin { left, right, .. } => {
            check_grouping(left, problems);
            check_grouping(right, problems);
        }
        GraphPattern::Project { inner, .. }
        | GraphPattern::Filter { inner, .. }
        | GraphPattern::Extend { inner, .. }
        | GraphPattern::OrderBy { inner, .. }
        | GraphPattern::Distinct { inner }
        | GraphPattern::Reduced { inner }
        | GraphPattern::Slice { inner, .. }
        | GraphPattern::Group { inner, .. }
        | GraphPattern::Graph { inner, .. }
        | GraphPattern::Service { inner, .. } => check_grouping(inner, problems),
        _ => {}
    }
}

pub fn check_query_text(sparql: &str) -> Result<(), String> {
    let query = Query::parse(sparql, None).map_err(|e| format!("syntax: {e}"))?;
    let pattern = match &query {
        Query::Select { pattern, .. } => pattern,
        _ => return Err("not a SELECT query".to_string()),
    };
    let mut problems = Vec::new();
    check_pattern(pattern, &mut problems);
    check_grouping(pattern, &mut problems);
    if problems.is_empty() {
        Ok(())
    } else {
        Err(problems.join("; "))
    }
}

#[test]
fn corpus_queries_are_well_formed() {
    let cases = common::all_cases();
    let mut compiled = 0;
    let mut failures = Vec::new();
    for case in &cases {
        if case.meta.expect_error.is_some() {
            continue;
        }
        let out = common::compile_case_ok(case);
        compiled += 1;
        if let Err(e) = check_query_text(&out.sparql) {
            failures.push(format!("{}: {e}\n{}", case.name, out.sparql));
        }
    }
    assert!(
        compiled >= 30,
        "only {compiled} corpus cases compiled; need at least 30"
    );
    assert!(failures.is_empty(), "{}", failures.join("\n---\n"));
}
