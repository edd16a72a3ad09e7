//! Assembles the generation model into SPARQL text.

use crate::ast::Boundary;
use crate::document::NodeType;
use crate::schema::Schema;

use super::model::GenModel;
use super::Params;

pub fn render_sparql(model: &GenModel, params: &Params, _schema: &Schema) -> String {
    let mut out = String::new();
    for (prefix, iri) in &model.prefixes {
        out.push_str(&format!("PREFIX {prefix}: <{iri}>\n"));
    }
    if !model.prefixes.is_empty() {
        out.push('\n');
    }
    out.push_str(&render_scope(model, model.root, params, 0));
    out.push('\n');
    out
}

fn pad(indent: usize) -> String {
    "  ".repeat(indent)
}

/// Nodes whose fields appear in the scope's SELECT list: descend through
/// required joins, optionals and unions; stop at negations, existence checks
/// and nested subqueries.
fn selectable_nodes(model: &GenModel, root: usize) -> Vec<usize> {
    let mut out = vec![root];
    let mut stack = vec![root];
    while let Some(idx) = stack.pop() {
        for &child in model.nodes[idx].children.iter().rev() {
            let c = &model.nodes[child];
            if c.negated || c.existence_check || c.subquery_scope || c.global {
                continue;
            }
            out.push(child);
            stack.push(child);
        }
    }
    // Restore document (pre-order) order.
    out.sort_unstable();
    out
}

struct SelectList {
    items: Vec<String>,
    simple_vars: Vec<String>,
    has_aggregates: bool,
}

fn select_list(model: &GenModel, root: usize, join_var: Option<&str>) -> SelectList {
    let mut items = Vec::new();
    let mut simple_vars = Vec::new();
    let mut has_aggregates = false;
    if let Some(jv) = join_var {
        items.push(format!("?{jv}"));
        simple_vars.push(jv.to_string());
    }
    for idx in selectable_nodes(model, root) {
        let n = &model.nodes[idx];
        for v in &n.select_simple {
            if !simple_vars.contains(v) {
                items.push(format!("?{v}"));
                simple_vars.push(v.clone());
            }
        }
        for v in &n.select_label {
            items.push(format!("?{v}"));
        }
    }
    for idx in selectable_nodes(model, root) {
        for (expr, var) in &model.nodes[idx].select_agg {
            items.push(format!("({expr} AS ?{var})"));
            has_aggregates = true;
        }
    }
    SelectList {
        items,
        simple_vars,
        has_aggregates,
    }
}

/// One SELECT query (the main query or a nested subquery).
fn render_scope(model: &GenModel, root: usize, params: &Params, indent: usize) -> String {
    let node = &model.nodes[root];
    let join_var = if node.subquery_scope && !node.global && !node.free_link {
        node.parent_var.as_deref()
    } else {
        None
    };
    let sel = select_list(model, root, join_var);
    let distinct = if node.distinct { "DISTINCT " } else { "" };
    let head = if sel.items.is_empty() {
        format!("?{}", node.instance_var)
    } else {
        sel.items.join(" ")
    };

    let p = pad(indent);
    let mut out = format!("{p}SELECT {distinct}{head}\n{p}WHERE{{\n");
    out.push_str(&render_body(model, root, params, indent + 1));

    // Trailing triples introduced by grouping and ordering expressions.
    let bp = pad(indent + 1);
    for t in &node.order_by_triples {
        out.push_str(&format!("{bp}{t}\n"));
    }
    for t in &node.group_by_triples {
        out.push_str(&format!("{bp}{t}\n"));
    }
    out.push_str(&format!("{p}}}"));

    // GROUP BY: explicit on the scope root, otherwise implicit when
    // aggregates are selected.
    let group: Vec<String> = if !node.group_by_vars.is_empty() {
        node.group_by_vars.clone()
    } else if sel.has_aggregates && !sel.simple_vars.is_empty() {
        sel.simple_vars.iter().map(|v| format!("?{v}")).collect()
    } else {
        Vec::new()
    };
    if !group.is_empty() {
        out.push_str(&format!("\n{p}GROUP BY {}", group.join(" ")));
    }
    if !node.order_by.is_empty() {
        let keys: Vec<String> = node
            .order_by
            .iter()
            .map(|(text, desc)| {
                if *desc {
                    format!("DESC({text})")
                } else if text.starts_with('?') {
                    text.clone()
                } else {
                    format!("({text})")
                }
            })
            .collect();
        out.push_str(&format!("\n{p}ORDER BY {}", keys.join(" ")));
    }
    if let Some(offset) = node.offset {
        out.push_str(&format!("\n{p}OFFSET {offset}"));
    }
    if let Some(limit) = node.limit {
        out.push_str(&format!("\n{p}LIMIT {limit}"));
    }
    out
}

/// Members of the fragment rooted at `root`: required joins and unit control
/// nodes only; every other child starts its own block.
fn fragment_members(model: &GenModel, root: usize) -> Vec<usize> {
    let mut out = vec![root];
    let mut stack = vec![root];
    while let Some(idx) = stack.pop() {
        for &child in model.nodes[idx].children.iter().rev() {
            let c = &model.nodes[child];
            if c.boundary == Some(Boundary::Fragment) && c.node_type != NodeType::Union {
                out.push(child);
                stack.push(child);
            }
        }
    }
    out.sort_unstable();
    out
}

/// The WHERE pattern of a scope: its root fragment plus nested blocks.
fn render_body(model: &GenModel, root: usize, params: &Params, indent: usize) -> String {
    let mut out = String::new();
    render_fragment(model, root, params, indent, &mut out);
    if model.nodes[root].has_label_service {
        out.push_str(&format!(
            "{}SERVICE wikibase:label {{bd:serviceParam wikibase:language \"en\".}}\n",
            pad(indent)
        ));
    }
    out
}

fn render_fragment(
    model: &GenModel,
    root: usize,
    params: &Params,
    indent: usize,
    out: &mut String,
) {
    let members = fragment_members(model, root);
    let p = pad(indent);

    // Phase 1: structural triples of all fragment members. Same-instance
    // links can repeat a class triple verbatim; emit each one once.
    let mut seen = std::collections::HashSet::new();
    let mut structural = |t: &str, out: &mut String| {
        if seen.insert(t.to_string()) {
            out.push_str(&format!("{p}{t}\n"));
        }
    };
    for &idx in &members {
        let n = &model.nodes[idx];
        if let Some(v) = &n.instance_values {
            structural(v, out);
        }
        if let Some(t) = &n.link_triple {
            structural(t, out);
        }
        if let Some(t) = &n.class_triple {
            structural(t, out);
        }
        for t in &n.reference_triples {
            structural(t, out);
        }
        for t in &n.filter_as_triples {
            structural(t, out);
        }
    }
    let p = pad(indent);

    // Phase 2: nested subqueries.
    for &idx in &members {
        let n = &model.nodes[idx];
        for &child in &n.children {
            let c = &model.nodes[child];
            if (c.subquery_scope || c.global) && !c.negated && !c.existence_check {
                if c.optional {
                    out.push_str(&format!("{p}OPTIONAL{{\n"));
                    out.push_str(&render_scope(model, child, params, indent + 1));
                    out.push_str(&format!("\n{p}}}\n"));
                } else {
                    out.push_str(&format!("{p}{{\n"));
                    out.push_str(&render_scope(model, child, params, indent + 1));
                    out.push_str(&format!("\n{p}}}\n"));
                }
            }
        }
        for q in &n.local_agg_subqueries {
            out.push_str(&format!("{p}{q}\n"));
        }
        if let Some(text) = &n.full_sparql {
            if n.full_sparql_is_subquery {
                out.push_str(&format!("{p}{{{text}}}\n"));
            }
        }
    }

    // Phase 3: attributes, filters and dependent blocks, node by node.
    for &idx in &members {
        let n = &model.nodes[idx];

        for attr in &n.attributes {
            if let Some(v) = &attr.values {
                out.push_str(&format!("{p}{v}\n"));
                continue;
            }
            if attr.optional {
                let triples = attr.triples.join(" ");
                out.push_str(&format!("{p}OPTIONAL{{{triples}}}\n"));
            } else {
                for t in &attr.triples {
                    out.push_str(&format!("{p}{t}\n"));
                }
            }
            if let Some(b) = &attr.bind {
                out.push_str(&format!("{p}{b}\n"));
            }
            if let Some(b) = &attr.bound {
                out.push_str(&format!("{p}{b}\n"));
            }
            for f in &attr.filters {
                out.push_str(&format!("{p}{f}\n"));
            }
        }

        if let Some(text) = &n.full_sparql {
            if !n.full_sparql_is_subquery {
                out.push_str(&format!("{p}{text}\n"));
            }
        }

        for filter in &n.filters {
            for t in &filter.base_triples {
                out.push_str(&format!("{p}{t}\n"));
            }
            out.push_str(&format!("{p}{}\n", filter.text));
        }

        for t in &n.agg_base_triples {
            out.push_str(&format!("{p}{t}\n"));
        }

        // Dependent blocks in link order.
        for &child in &n.children {
            let c = &model.nodes[child];
            if c.node_type == NodeType::Union {
                render_union(model, child, params, indent, out);
                continue;
            }
            if c.existence_check {
                let not = if c.negated { "NOT " } else { "" };
                out.push_str(&format!("{p}FILTER {not}EXISTS{{\n"));
                render_fragment(model, child, params, indent + 1, out);
                out.push_str(&format!("{p}}}\n"));
                continue;
            }
            if c.negated {
                if c.subquery_scope {
                    out.push_str(&format!("{p}MINUS{{\n"));
                    out.push_str(&render_scope(model, child, params, indent + 1));
                    out.push_str(&format!("\n{p}}}\n"));
                } else {
                    out.push_str(&format!("{p}FILTER NOT EXISTS{{\n"));
                    render_fragment(model, child, params, indent + 1, out);
                    out.push_str(&format!("{p}}}\n"));
                }
                continue;
            }
            if c.optional && !c.subquery_scope {
                out.push_str(&format!("{p}OPTIONAL{{\n"));
                render_fragment(model, child, params, indent + 1, out);
                out.push_str(&format!("{p}}}\n"));
            }
            // Required joins are fragment members (phases above); subqueries
            // were emitted in phase 2.
        }
    }
}

/// A union control node: each child is one branch.
fn render_union(
    model: &GenModel,
    union: usize,
    params: &Params,
    indent: usize,
    out: &mut String,
) {
    let p = pad(indent);
    let branches = &model.nodes[union].children;
    let mut parts = Vec::new();
    for &branch in branches {
        let mut body = String::new();
        render_fragment(model, branch, params, indent + 1, &mut body);
        parts.push(format!("{p}{{\n{body}{p}}}"));
    }
    if parts.is_empty() {
        return;
    }
    out.push_str(&parts.join("\nUNION\n"));
    out.push('\n');
}
