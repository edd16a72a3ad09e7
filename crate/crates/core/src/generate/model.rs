//! Generation model: per-node SPARQL text fragments ready for assembly.

use std::collections::{BTreeMap, HashSet};

use crate::ast::{Ast, Boundary, LinkPath};
use crate::diag::Diagnostics;
use crate::document::{ConditionForm, LabelService, LinkKind, NodeType};
use crate::expr::{desugar, BinOp, Expr, NameEntity, PathStep, StepItem};
use crate::schema::Schema;
use crate::symbols::{BaseRef, SymbolTable};

use super::{
    FieldVar, Params, QueryEngineType, Slot, StepKey, StringLiteralConversion, VariableMap,
};

/// A non-aggregated attribute field, ready to print.
#[derive(Debug, Default)]
pub struct AttrGen {
    pub triples: Vec<String>,
    pub bind: Option<String>,
    pub bound: Option<String>,
    pub values: Option<String>,
    /// Extra FILTER texts tied to the attribute (language selection).
    pub filters: Vec<String>,
    /// Without required values the triples go into an OPTIONAL block.
    pub optional: bool,
}

#[derive(Debug)]
pub struct FilterGen {
    /// Triples placed outside the FILTER (empty for the EXISTS form).
    pub base_triples: Vec<String>,
    /// The complete FILTER / FILTER EXISTS text.
    pub text: String,
}

/// Everything the renderer needs to know about one node.
#[derive(Debug)]
pub struct NodeGen {
    pub id: String,
    pub node_type: NodeType,
    pub main: bool,
    pub parent: Option<usize>,
    pub children: Vec<usize>,
    pub boundary: Option<Boundary>,
    /// Incoming link renders a nested SELECT (aggregated subquery).
    pub subquery_scope: bool,
    pub existence_check: bool,
    pub negated: bool,
    pub global: bool,
    pub optional: bool,
    /// Incoming link is `++`: no data connection to the parent.
    pub free_link: bool,
    pub distinct: bool,
    pub limit: Option<u64>,
    pub offset: Option<u64>,
    pub instance_var: String,
    /// Instance variable of the structural parent (join variable).
    pub parent_var: Option<String>,
    pub class_triple: Option<String>,
    pub link_triple: Option<String>,
    pub instance_values: Option<String>,
    pub attributes: Vec<AttrGen>,
    pub local_agg_subqueries: Vec<String>,
    pub select_simple: Vec<String>,
    pub select_label: Vec<String>,
    pub select_agg: Vec<(String, String)>,
    pub filter_as_triples: Vec<String>,
    pub filters: Vec<FilterGen>,
    pub agg_base_triples: Vec<String>,
    pub reference_triples: Vec<String>,
    pub group_by_vars: Vec<String>,
    pub group_by_triples: Vec<String>,
    pub order_by: Vec<(String, bool)>,
    pub order_by_triples: Vec<String>,
    pub full_sparql: Option<String>,
    pub full_sparql_is_subquery: bool,
    pub has_label_service: bool,
}

#[derive(Debug)]
pub struct GenModel {
    pub nodes: Vec<NodeGen>,
    pub root: usize,
    /// prefix → namespace IRI, for the PREFIX header.
    pub prefixes: BTreeMap<String, String>,
}

/// Shared state while rendering expressions of one node compartment.
struct Cx<'a> {
    ast: &'a Ast,
    vars: &'a VariableMap,
    schema: &'a Schema,
    params: &'a Params,
    node: usize,
    slot: Slot,
    triples: Vec<String>,
    filters: Vec<String>,
    emitted: HashSet<StepKey>,
    prefixes: &'a mut BTreeMap<String, String>,
    diags: &'a mut Diagnostics,
    /// A fresh triple over a property that may have several values.
    fresh_multi: bool,
    fresh_any: bool,
}

impl<'a> Cx<'a> {
    fn new(
        ast: &'a Ast,
        vars: &'a VariableMap,
        schema: &'a Schema,
        params: &'a Params,
        node: usize,
        slot: Slot,
        prefixes: &'a mut BTreeMap<String, String>,
        diags: &'a mut Diagnostics,
    ) -> Self {
        Cx {
            ast,
            vars,
            schema,
            params,
            node,
            slot,
            triples: Vec::new(),
            filters: Vec::new(),
            emitted: HashSet::new(),
            prefixes,
            diags,
            fresh_multi: false,
            fresh_any: false,
        }
    }

    fn node_id(&self) -> &str {
        &self.ast.nodes[self.node].id
    }

    fn render_iri(&mut self, iri: &str) -> String {
        render_iri(self.schema, iri, self.prefixes)
    }

    /// Render a name entity: emit its path triples, return the value text.
    fn name_text(&mut self, entity: &NameEntity) -> String {
        let resolution = match &entity.resolution {
            Some(r) => r.clone(),
            None => {
                return format!("?{}", entity.var_base());
            }
        };
        let (mut subject, first_materialized) = match &resolution.base {
            BaseRef::SelfInstance => (
                format!("?{}", self.vars.instance_var(self.node)),
                0usize,
            ),
            BaseRef::Instance { node } => {
                let idx = self.ast.node_index(node).unwrap_or(self.node);
                (format!("?{}", self.vars.instance_var(idx)), 1)
            }
            BaseRef::Alias { name, context, .. } => {
                let var = self
                    .vars
                    .alias_var(context, name)
                    .map(str::to_string)
                    .unwrap_or_else(|| name.clone());
                (format!("?{var}"), 1)
            }
            BaseRef::Variable { name, .. } => (format!("?{name}"), 1),
            BaseRef::Constant { iri } => {
                let iri = iri.clone();
                return self.render_iri(&iri);
            }
        };
        let n = entity.steps.len();
        for step_idx in first_materialized..n {
            let key: StepKey = (self.node, self.slot, entity.id, step_idx);
            let var = self
                .vars
                .step_var(&key)
                .map(str::to_string)
                .unwrap_or_else(|| entity.var_base());
            let reused = self.vars.step_is_reused(&key);
            if !reused && self.emitted.insert(key) {
                let res_idx = step_idx - first_materialized;
                let pred = self.predicate_text(&entity.steps[step_idx], &resolution, res_idx);
                self.triples.push(format!("{subject} {pred} ?{var}."));
                self.fresh_any = true;
                if let Some(step) = resolution.steps.get(res_idx) {
                    if step.max_cardinality != 1 {
                        self.fresh_multi = true;
                    }
                } else {
                    self.fresh_multi = true;
                }
            }
            subject = format!("?{var}");
        }
        if !entity.lang_tags.is_empty() {
            let cond = if entity.lang_tags.len() == 1 {
                format!("LANG({subject}) = \"{}\"", entity.lang_tags[0])
            } else {
                let tags: Vec<String> = entity
                    .lang_tags
                    .iter()
                    .map(|t| format!("\"{t}\""))
                    .collect();
                format!("LANG({subject}) IN ({})", tags.join(", "))
            };
            self.filters.push(format!("FILTER({cond})"));
        }
        subject
    }

    fn predicate_text(
        &mut self,
        step: &PathStep,
        resolution: &crate::symbols::Resolution,
        res_idx: usize,
    ) -> String {
        let core = match &step.item {
            StepItem::Var { name, .. } => format!("?{name}"),
            StepItem::A => "a".to_string(),
            StepItem::Iri(iri) => {
                let iri = iri.clone();
                self.render_iri(&iri)
            }
            StepItem::Name { prefix, local, .. } => {
                match resolution.steps.get(res_idx).and_then(|s| s.iri.clone()) {
                    Some(iri) => self.render_iri(&iri),
                    None => {
                        // Unresolved names still render via the namespace.
                        let guess = match prefix {
                            Some(p) => format!("{p}:{local}"),
                            None => format!(":{local}"),
                        };
                        if prefix.is_none() {
                            let default = self.schema.default_namespace().iri.clone();
                            self.prefixes.entry(String::new()).or_insert(default);
                        }
                        guess
                    }
                }
            }
        };
        let mut text = if step.inverse { format!("^{core}") } else { core };
        text.push_str(step.modifier.text());
        text
    }

    /// The SPARQL text of an expression (triples collect on the side).
    fn expr_text(&mut self, e: &Expr) -> String {
        match e {
            Expr::Str {
                value,
                lang,
                datatype,
            } => {
                let mut out = format!("\"{value}\"");
                if let Some(l) = lang {
                    out.push('@');
                    out.push_str(l);
                } else if let Some(dt) = datatype {
                    out.push_str("^^");
                    out.push_str(dt);
                    self.note_prefix_of(dt);
                }
                out
            }
            Expr::Num(n) => n.clone(),
            Expr::Bool(b) => b.to_string(),
            Expr::Var { name, .. } => format!("?{name}"),
            Expr::ClassRef => format!("?{}", self.vars.instance_var(self.node)),
            Expr::Star => "*".to_string(),
            Expr::Name(entity) => self.name_text(entity),
            Expr::Unary { op, expr } => {
                let inner = self.expr_text(expr);
                let needs_paren = matches!(**expr, Expr::Binary { .. });
                if needs_paren {
                    format!("{op}({inner})")
                } else {
                    format!("{op}{inner}")
                }
            }
            Expr::Binary { op, lhs, rhs } => self.binary_text(*op, lhs, rhs),
            Expr::Call { name, args } => self.call_text(name, args),
            Expr::Aggregate {
                func,
                distinct,
                arg,
                separator,
            } => {
                let arg_text = self.expr_text(arg);
                let distinct = if *distinct { "DISTINCT " } else { "" };
                if func == "GROUP_CONCAT" {
                    let sep = separator
                        .clone()
                        .unwrap_or_else(|| self.params.grouping_separator.clone());
                    format!("GROUP_CONCAT({distinct}{arg_text}; SEPARATOR=\"{sep}\")")
                } else {
                    format!("{func}({distinct}{arg_text})")
                }
            }
            Expr::Exists { negated, inner } => {
                // An existence test over a sub-expression: its triples live
                // inside the EXISTS block.
                let mut sub = Cx::new(
                    self.ast,
                    self.vars,
                    self.schema,
                    self.params,
                    self.node,
                    self.slot,
                    &mut *self.prefixes,
                    &mut *self.diags,
                );
                let text = sub.expr_text(inner);
                let triples = sub.triples.join(" ");
                let not = if *negated { "NOT " } else { "" };
                format!("{not}EXISTS{{{triples} FILTER({text})}}")
            }
            Expr::In {
                negated,
                lhs,
                items,
            } => {
                let lhs = self.expr_text(lhs);
                let items: Vec<String> = items.iter().map(|i| self.expr_text(i)).collect();
                let not = if *negated { " NOT" } else { "" };
                format!("{lhs}{not} IN ({})", items.join(", "))
            }
            Expr::Coalesce2 { lhs, rhs } => {
                let a = self.expr_text(lhs);
                let b = self.expr_text(rhs);
                format!("COALESCE({a}, {b})")
            }
            Expr::Values(_) => {
                let id = self.node_id().to_string();
                self.diags.error_at(
                    "value-scope",
                    "a value scope can only form a whole field expression",
                    &id,
                );
                String::new()
            }
        }
    }

    fn binary_text(&mut self, op: BinOp, lhs: &Expr, rhs: &Expr) -> String {
        if op == BinOp::Concat {
            let a = self.expr_text(lhs);
            let b = self.expr_text(rhs);
            return format!("CONCAT({a}, {b})");
        }
        let mut left = self.expr_text(lhs);
        let mut right = self.expr_text(rhs);
        // String literal conversion in comparisons against xsd:string
        // data properties.
        if op.is_comparison() {
            let l_string = is_string_property(lhs);
            let r_string = is_string_property(rhs);
            let l_literal = is_plain_string(lhs);
            let r_literal = is_plain_string(rhs);
            match self.params.string_literal_conversion {
                StringLiteralConversion::Simple => {
                    if l_string && r_literal {
                        left = format!("STR({left})");
                    }
                    if r_string && l_literal {
                        right = format!("STR({right})");
                    }
                }
                StringLiteralConversion::Typed => {
                    if l_string && r_literal {
                        right = format!("{right}^^xsd:string");
                        self.note_prefix_of("xsd:string");
                    }
                    if r_string && l_literal {
                        left = format!("{left}^^xsd:string");
                        self.note_prefix_of("xsd:string");
                    }
                }
                StringLiteralConversion::Off => {}
            }
        }
        let op_text = match op {
            BinOp::Or => "||",
            BinOp::And => "&&",
            BinOp::Eq => "=",
            BinOp::Ne => "!=",
            BinOp::Lt => "<",
            BinOp::Le => "<=",
            BinOp::Gt => ">",
            BinOp::Ge => ">=",
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::Concat => unreachable!(),
        };
        let wrap = |e: &Expr, text: String| -> String {
            if matches!(e, Expr::Binary { .. }) {
                format!("({text})")
            } else {
                text
            }
        };
        // Keep logical chains flat, parenthesize mixed arithmetic.
        match op {
            BinOp::Or | BinOp::And => format!("{left} {op_text} {right}"),
            _ => format!("{} {op_text} {}", wrap(lhs, left), wrap(rhs, right)),
        }
    }

    fn call_text(&mut self, name: &str, args: &[Expr]) -> String {
        // Date difference shorthands.
        if matches!(name, "days" | "months" | "years") && args.len() == 2 {
            let unit = match name {
                "days" => "day",
                "months" => "month",
                _ => "year",
            };
            if self.params.query_engine_type != QueryEngineType::Virtuoso {
                let id = self.node_id().to_string();
                self.diags.error_at(
                    "engine",
                    format!("`{name}(a-b)` requires the VIRTUOSO query engine type"),
                    &id,
                );
            }
            let a = self.date_arg_text(&args[0]);
            let b = self.date_arg_text(&args[1]);
            self.prefixes.insert(
                "bif".to_string(),
                "http://www.openlinksw.com/schemas/bif#".to_string(),
            );
            // datediff counts from its first argument to its second, so
            // `days(a - b)` puts `b` first.
            return format!("bif:datediff(\"{unit}\", {b}, {a})");
        }
        if name == "SUBSTR" && self.params.query_engine_type == QueryEngineType::Virtuoso {
            let args: Vec<String> = args.iter().map(|a| self.expr_text(a)).collect();
            self.prefixes.insert(
                "bif".to_string(),
                "http://www.openlinksw.com/schemas/bif#".to_string(),
            );
            return format!("bif:substring({})", args.join(", "));
        }
        let args: Vec<String> = args.iter().map(|a| self.expr_text(a)).collect();
        format!("{name}({})", args.join(", "))
    }

    /// Date arguments are wrapped in xsd:dateTime() when typed xsd:date.
    fn date_arg_text(&mut self, e: &Expr) -> String {
        let text = self.expr_text(e);
        let is_date = matches!(
            e,
            Expr::Name(entity)
                if entity
                    .resolution
                    .as_ref()
                    .and_then(|r| r.last_step())
                    .and_then(|s| s.data_type.as_deref())
                    == Some("xsd:date")
        );
        if is_date {
            self.note_prefix_of("xsd:dateTime");
            format!("xsd:dateTime({text})")
        } else {
            text
        }
    }

    fn note_prefix_of(&mut self, prefixed: &str) {
        if let Some((prefix, _)) = prefixed.split_once(':') {
            if let Some(ns) = self.schema.namespace(prefix) {
                self.prefixes.insert(prefix.to_string(), ns.iri.clone());
            } else if prefix == "xsd" {
                self.prefixes.insert(
                    "xsd".to_string(),
                    "http://www.w3.org/2001/XMLSchema#".to_string(),
                );
            }
        }
    }
}

fn is_plain_string(e: &Expr) -> bool {
    matches!(
        e,
        Expr::Str {
            lang: None,
            datatype: None,
            ..
        }
    )
}

fn is_string_property(e: &Expr) -> bool {
    match e {
        Expr::Name(entity) => entity
            .resolution
            .as_ref()
            .and_then(|r| r.last_step())
            .and_then(|s| s.data_type.as_deref())
            .map_or(false, |dt| dt == "xsd:string"),
        _ => false,
    }
}

pub fn render_iri(schema: &Schema, iri: &str, prefixes: &mut BTreeMap<String, String>) -> String {
    if let Some((ns, local)) = schema.namespace_of_iri(iri) {
        if !local.is_empty() && !local.contains(['/', '#']) {
            prefixes.insert(ns.prefix.clone(), ns.iri.clone());
            return format!("{}:{local}", ns.prefix);
        }
    }
    format!("<{iri}>")
}

/// Build the generation model: one `NodeGen` per AST node, document order.
pub fn build_generation_model(
    ast: &Ast,
    _table: &SymbolTable,
    vars: &VariableMap,
    params: &Params,
    schema: &Schema,
    diags: &mut Diagnostics,
) -> Result<GenModel, crate::CompileError> {
    let mut prefixes: BTreeMap<String, String> = BTreeMap::new();
    let mut nodes = Vec::with_capacity(ast.nodes.len());

    for idx in 0..ast.nodes.len() {
        let node = &ast.nodes[idx];
        let link = node.parent_link.map(|li| &ast.links[li]);
        let boundary = link.map(|l| ast.boundary(l));
        let instance_var = vars.instance_var(idx).to_string();

        let mut gen = NodeGen {
            id: node.id.clone(),
            node_type: node.node_type,
            main: node.main,
            parent: node.parent,
            children: node.children.clone(),
            boundary,
            subquery_scope: link.map_or(false, |l| {
                l.kind == LinkKind::Subquery && !l.existence_check
            }),
            existence_check: link.map_or(false, |l| l.existence_check),
            negated: boundary == Some(Boundary::Negation),
            global: link.map_or(false, |l| l.global),
            optional: boundary == Some(Boundary::Optional),
            free_link: link.map_or(false, |l| matches!(l.path, LinkPath::Free)),
            distinct: node.distinct,
            limit: node.limit,
            offset: node.offset,
            instance_var: instance_var.clone(),
            parent_var: node.parent.map(|p| vars.instance_var(p).to_string()),
            class_triple: None,
            link_triple: None,
            instance_values: None,
            attributes: Vec::new(),
            local_agg_subqueries: Vec::new(),
            select_simple: Vec::new(),
            select_label: Vec::new(),
            select_agg: Vec::new(),
            filter_as_triples: Vec::new(),
            filters: Vec::new(),
            agg_base_triples: Vec::new(),
            reference_triples: Vec::new(),
            group_by_vars: Vec::new(),
            group_by_triples: Vec::new(),
            order_by: Vec::new(),
            order_by_triples: Vec::new(),
            full_sparql: node.full_sparql.clone(),
            full_sparql_is_subquery: node.full_sparql_is_subquery,
            has_label_service: false,
        };

        // Class assertion.
        let membership = class_membership_role(node, params, schema, &mut prefixes);
        if let Some(entity) = &node.class_entity {
            let class = render_iri(schema, &entity.iri, &mut prefixes);
            gen.class_triple = Some(format!("?{instance_var} {membership} {class}."));
        } else if let Some(cv) = &node.class_variable {
            gen.class_triple = Some(format!("?{instance_var} {membership} ?{cv}."));
        }
        if let Some(resource) = &node.instance_resource {
            let rendered = if resource.starts_with('<') || resource.contains("://") {
                let iri = resource.trim_matches(['<', '>']);
                render_iri(schema, iri, &mut prefixes)
            } else {
                let (prefix, local) = resource.split_once(':').unwrap_or(("", resource));
                match schema.expand_name(prefix, local) {
                    Ok(iri) => render_iri(schema, &iri, &mut prefixes),
                    Err(_) => resource.clone(),
                }
            };
            gen.instance_values = Some(format!("VALUES ?{instance_var} {{{rendered}}}"));
        }

        // Incoming link triple.
        if let Some(l) = link {
            if !l.global {
                if let LinkPath::Path(slot) = &l.path {
                    let mut cx = Cx::new(
                        ast,
                        vars,
                        schema,
                        params,
                        idx,
                        Slot::LinkPath,
                        &mut prefixes,
                        diags,
                    );
                    let pred = link_path_text(slot.parsed(), &mut cx);
                    let parent_var = vars.instance_var(l.parent);
                    gen.link_triple = Some(if l.inverse {
                        format!("?{instance_var} {pred} ?{parent_var}.")
                    } else {
                        format!("?{parent_var} {pred} ?{instance_var}.")
                    });
                }
            }
        }

        // Fields.
        for (fi, field) in node.fields.iter().enumerate() {
            let parsed = desugar(field.expr.parsed());
            let field_var = vars
                .field_var(idx, fi)
                .unwrap_or_else(|| format!("f{fi}"));
            if !field.helper {
                if !gen.select_simple.contains(&field_var) {
                    gen.select_simple.push(field_var.clone());
                }
                if field.label_service != LabelService::None
                    && params.enable_wikibase_label_services
                {
                    let suffix = match field.label_service {
                        LabelService::Label => "Label",
                        LabelService::AltLabel => "AltLabel",
                        LabelService::Description => "Description",
                        LabelService::None => unreachable!(),
                    };
                    gen.select_label.push(format!("{field_var}{suffix}"));
                    gen.has_label_service = true;
                }
            }
            if parsed.contains_aggregate() {
                // Local aggregate subquery in an ordinary field.
                let mut cx = Cx::new(
                    ast,
                    vars,
                    schema,
                    params,
                    idx,
                    Slot::Field(fi),
                    &mut prefixes,
                    diags,
                );
                let agg_text = cx.expr_text(&parsed);
                let triples = cx.triples.join(" ");
                gen.local_agg_subqueries.push(format!(
                    "{{SELECT ?{instance_var} ({agg_text} AS ?{field_var}) WHERE{{{triples}}} GROUP BY ?{instance_var}}}"
                ));
                continue;
            }
            if let Expr::Values(scope) = &parsed {
                gen.attributes.push(AttrGen {
                    values: Some(render_values(&field_var, scope, diags, &node.id)),
                    ..AttrGen::default()
                });
                continue;
            }
            // Re-exported names need no clauses of their own.
            if let FieldVar::AliasRef { .. } =
                vars_field_kind(vars, idx, fi)
            {
                continue;
            }
            let mut cx = Cx::new(
                ast,
                vars,
                schema,
                params,
                idx,
                Slot::Field(fi),
                &mut prefixes,
                diags,
            );
            let text = cx.expr_text(&parsed);
            let needs_bind = text != format!("?{field_var}");
            let mut attr = AttrGen {
                triples: cx.triples,
                filters: cx.filters,
                ..AttrGen::default()
            };
            if needs_bind {
                attr.bind = Some(format!("BIND({text} AS ?{field_var})"));
                if field.require_values {
                    attr.bound = Some(format!("FILTER(BOUND(?{field_var}))"));
                }
            } else {
                attr.optional = !field.require_values && !attr.triples.is_empty();
            }
            gen.attributes.push(attr);
        }

        // Aggregations.
        for (ai, agg) in node.aggregations.iter().enumerate() {
            let parsed = desugar(agg.expr.parsed());
            let var = vars
                .agg_var(idx, ai)
                .map(str::to_string)
                .unwrap_or_else(|| format!("agg{ai}"));
            let mut cx = Cx::new(
                ast,
                vars,
                schema,
                params,
                idx,
                Slot::Agg(ai),
                &mut prefixes,
                diags,
            );
            let text = cx.expr_text(&parsed);
            gen.agg_base_triples.extend(cx.triples);
            gen.select_agg.push((text, var));
        }

        // Conditions.
        for (ci, cond) in node.conditions.iter().enumerate() {
            let parsed = desugar(cond.expr.parsed());
            let mut cx = Cx::new(
                ast,
                vars,
                schema,
                params,
                idx,
                Slot::Cond(ci),
                &mut prefixes,
                diags,
            );
            // Triple-form conditions: `prop = constant`.
            if cond.form == ConditionForm::Auto {
                if let Some(triples) = filter_as_triple(&parsed, &mut cx) {
                    gen.filter_as_triples.extend(triples);
                    continue;
                }
            }
            let text = cx.expr_text(&parsed);
            let exists = match cond.form {
                ConditionForm::FilterExists => true,
                ConditionForm::PlainFilter => false,
                ConditionForm::Auto => cx.fresh_any && cx.fresh_multi,
            };
            let mut extra = cx.filters.clone();
            if exists {
                let triples = cx.triples.join(" ");
                gen.filters.push(FilterGen {
                    base_triples: Vec::new(),
                    text: format!("FILTER EXISTS{{{triples} FILTER({text})}}"),
                });
            } else if matches!(parsed, Expr::Exists { .. }) {
                gen.filters.push(FilterGen {
                    base_triples: cx.triples,
                    text: format!("FILTER {text}"),
                });
            } else {
                gen.filters.push(FilterGen {
                    base_triples: cx.triples,
                    text: format!("FILTER({text})"),
                });
            }
            for f in extra.drain(..) {
                gen.filters.push(FilterGen {
                    base_triples: Vec::new(),
                    text: f,
                });
            }
        }

        // Grouping and ordering.
        for (gi, g) in node.group_by.iter().enumerate() {
            let parsed = desugar(g.parsed());
            let mut cx = Cx::new(
                ast,
                vars,
                schema,
                params,
                idx,
                Slot::Group(gi),
                &mut prefixes,
                diags,
            );
            let text = cx.expr_text(&parsed);
            gen.group_by_triples.extend(cx.triples);
            gen.group_by_vars.push(text);
        }
        for (oi, o) in node.order_by.iter().enumerate() {
            let parsed = desugar(o.expr.parsed());
            let mut cx = Cx::new(
                ast,
                vars,
                schema,
                params,
                idx,
                Slot::Order(oi),
                &mut prefixes,
                diags,
            );
            let text = cx.expr_text(&parsed);
            gen.order_by_triples.extend(cx.triples);
            gen.order_by.push((text, o.descending));
        }

        nodes.push(gen);
    }

    // Reference links become extra triples (or NOT EXISTS filters) at their
    // source node.
    for (ri, rl) in ast.ref_links.iter().enumerate() {
        let mut cx = Cx::new(
            ast,
            vars,
            schema,
            params,
            rl.source,
            Slot::RefLink(ri),
            &mut prefixes,
            diags,
        );
        let pred = match &rl.path {
            LinkPath::Path(slot) => link_path_text(slot.parsed(), &mut cx),
            _ => continue,
        };
        let s = vars.instance_var(rl.source);
        let t = vars.instance_var(rl.target);
        let triple = if rl.inverse {
            format!("?{t} {pred} ?{s}.")
        } else {
            format!("?{s} {pred} ?{t}.")
        };
        if rl.negated {
            nodes[rl.source].filters.push(FilterGen {
                base_triples: Vec::new(),
                text: format!("FILTER NOT EXISTS{{{triple}}}"),
            });
        } else {
            nodes[rl.source].reference_triples.push(triple);
        }
    }

    if params.enable_wikibase_label_services && nodes.iter().any(|n| n.has_label_service) {
        prefixes.insert(
            "wikibase".to_string(),
            "http://wikiba.se/ontology#".to_string(),
        );
        prefixes.insert(
            "bd".to_string(),
            "http://www.bigdata.com/rdf#".to_string(),
        );
    }

    Ok(GenModel {
        nodes,
        root: ast.root,
        prefixes,
    })
}

fn vars_field_kind(vars: &VariableMap, node: usize, field: usize) -> FieldVar {
    // `field_var` resolves AliasRef; here the raw kind is needed.
    match vars.field_kind(node, field) {
        Some(fv) => fv.clone(),
        None => FieldVar::Own(String::new()),
    }
}

fn class_membership_role(
    node: &crate::ast::AstNode,
    params: &Params,
    schema: &Schema,
    prefixes: &mut BTreeMap<String, String>,
) -> String {
    let role = if node.indirect_membership {
        params.indirect_class_membership_role.as_deref()
    } else {
        params.direct_class_membership_role.as_deref()
    };
    match role {
        None => "a".to_string(),
        Some(r) if r == "rdf:type" => "a".to_string(),
        Some(r) => {
            let (prefix, local) = r.split_once(':').unwrap_or(("", r));
            match schema.expand_name(prefix, local) {
                Ok(iri) => render_iri(schema, &iri, prefixes),
                Err(_) => r.to_string(),
            }
        }
    }
}

/// Property path text of a link: steps joined by `/`.
fn link_path_text(parsed: &Expr, cx: &mut Cx) -> String {
    match parsed {
        Expr::Var { name, .. } => format!("?{name}"),
        Expr::Name(entity) => {
            let resolution = entity.resolution.clone();
            let parts: Vec<String> = entity
                .steps
                .iter()
                .enumerate()
                .map(|(i, step)| match &resolution {
                    Some(r) => cx.predicate_text(step, r, i),
                    None => cx.predicate_text(
                        step,
                        &crate::symbols::Resolution {
                            base: BaseRef::SelfInstance,
                            steps: Vec::new(),
                        },
                        i,
                    ),
                })
                .collect();
            parts.join("/")
        }
        _ => String::new(),
    }
}

/// `prop = constant` conditions in triple form.
fn filter_as_triple(parsed: &Expr, cx: &mut Cx) -> Option<Vec<String>> {
    let (name, value) = match parsed {
        Expr::Binary {
            op: BinOp::Eq,
            lhs,
            rhs,
        } => match (lhs.as_ref(), rhs.as_ref()) {
            (Expr::Name(n), v) if is_constantish(v) => (n, v),
            (v, Expr::Name(n)) if is_constantish(v) => (n, v),
            _ => return None,
        },
        _ => return None,
    };
    let resolution = name.resolution.as_ref()?;
    if resolution.base != BaseRef::SelfInstance || name.steps.is_empty() {
        return None;
    }
    if !name.lang_tags.is_empty() {
        return None;
    }
    // String comparisons stay in FILTER form: equality of plain and
    // xsd:string-typed literals is conversion-sensitive.
    if matches!(value, Expr::Str { .. })
        && resolution
            .last_step()
            .and_then(|s| s.data_type.as_deref())
            .is_some_and(|dt| dt == "xsd:string")
    {
        return None;
    }
    // Chain all but the last step to fresh variables, close with the value.
    let mut triples = Vec::new();
    let mut subject = format!("?{}", cx.vars.instance_var(cx.node));
    let n = name.steps.len();
    for idx in 0..n - 1 {
        let key: StepKey = (cx.node, cx.slot, name.id, idx);
        let var = cx
            .vars
            .step_var(&key)
            .map(str::to_string)
            .unwrap_or_else(|| name.var_base());
        let pred = cx.predicate_text(&name.steps[idx], resolution, idx);
        triples.push(format!("{subject} {pred} ?{var}."));
        subject = format!("?{var}");
    }
    let resolution = resolution.clone();
    let pred = cx.predicate_text(&name.steps[n - 1], &resolution, n - 1);
    let value_text = cx.expr_text(value);
    triples.push(format!("{subject} {pred} {value_text}."));
    Some(triples)
}

fn is_constantish(e: &Expr) -> bool {
    match e {
        Expr::Str { .. } | Expr::Num(_) | Expr::Bool(_) => true,
        Expr::Name(entity) => entity.constant_mark,
        Expr::Unary { op: '-', expr } => matches!(**expr, Expr::Num(_)),
        _ => false,
    }
}

fn render_values(
    var: &str,
    scope: &crate::expr::ValueScope,
    _diags: &mut Diagnostics,
    _node_id: &str,
) -> String {
    use crate::expr::ValueScope;
    match scope {
        ValueScope::Range(lo, hi) => {
            let items: Vec<String> = (*lo..=*hi).map(|v| v.to_string()).collect();
            format!("VALUES ?{var} {{{}}}", items.join(" "))
        }
        ValueScope::List(items) => {
            let rendered: Vec<String> = items
                .iter()
                .map(|i| match i {
                    None => "UNDEF".to_string(),
                    Some(e) => literal_text(e),
                })
                .collect();
            format!("VALUES ?{var} {{{}}}", rendered.join(" "))
        }
        ValueScope::Tuples(rows) => {
            // Multi-column scopes need the row vars spelled out; render the
            // single-variable projection of the first column.
            let rendered: Vec<String> = rows
                .iter()
                .map(|row| match row.first() {
                    Some(Some(e)) => literal_text(e),
                    _ => "UNDEF".to_string(),
                })
                .collect();
            format!("VALUES ?{var} {{{}}}", rendered.join(" "))
        }
    }
}

fn literal_text(e: &Expr) -> String {
    match e {
        Expr::Str { value, lang, .. } => match lang {
            Some(l) => format!("\"{value}\"@{l}"),
            None => format!("\"{value}\""),
        },
        Expr::Num(n) => n.clone(),
        Expr::Bool(b) => b.to_string(),
        Expr::Unary { op: '-', expr } => format!("-{}", literal_text(expr)),
        _ => "UNDEF".to_string(),
    }
}
