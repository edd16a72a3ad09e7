//! SPARQL generation: variable assignment, generation model, text rendering.

mod model;
mod render;

pub use model::{build_generation_model, AttrGen, FilterGen, GenModel, NodeGen};
pub use render::render_sparql;

use std::collections::{HashMap, HashSet};

use serde::Deserialize;

use crate::ast::{Ast, AstNode, LinkPath};
use crate::diag::Diagnostics;
use crate::document::NodeType;
use crate::expr::{collect_name_entities, Expr, NameEntity, StepItem};
use crate::symbols::{BaseRef, SymbolTable};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum StringLiteralConversion {
    Simple,
    Typed,
    Off,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum QueryEngineType {
    General,
    Virtuoso,
}

/// Query environment parameters influencing generation.
#[derive(Debug, Clone, Deserialize)]
#[serde(rename_all = "camelCase", default)]
pub struct Params {
    pub dss_schema: Option<String>,
    pub string_literal_conversion: StringLiteralConversion,
    pub query_engine_type: QueryEngineType,
    pub grouping_separator: String,
    /// Predicate of the direct class membership triple; `a` when unset.
    pub direct_class_membership_role: Option<String>,
    pub indirect_class_membership_role: Option<String>,
    pub enable_wikibase_label_services: bool,
}

impl Default for Params {
    fn default() -> Self {
        Params {
            dss_schema: None,
            string_literal_conversion: StringLiteralConversion::Simple,
            query_engine_type: QueryEngineType::General,
            grouping_separator: ", ".to_string(),
            direct_class_membership_role: None,
            indirect_class_membership_role: None,
            enable_wikibase_label_services: false,
        }
    }
}

impl Params {
    pub fn from_json(bytes: &[u8]) -> Result<Params, serde_json::Error> {
        serde_json::from_slice(bytes)
    }
}

/// Identifies the compartment an expression lives in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Slot {
    Field(usize),
    Agg(usize),
    Cond(usize),
    Group(usize),
    Order(usize),
    LinkPath,
    RefLink(usize),
}

/// Key of one path step inside one expression occurrence.
pub type StepKey = (usize, Slot, u32, usize);

/// The variable a field selects.
#[derive(Debug, Clone)]
pub enum FieldVar {
    Own(String),
    /// The field re-exports a name defined at another node.
    AliasRef { context: String, name: String },
}

#[derive(Debug, Default)]
pub struct VariableMap {
    /// SPARQL variable (without `?`) of each node instance.
    pub instance: Vec<String>,
    /// Variable of the exploratory class position, per node.
    pub class_var: Vec<Option<String>>,
    step_vars: HashMap<StepKey, String>,
    /// Steps whose variable re-uses an earlier introduction: no new triple.
    reused: HashSet<StepKey>,
    /// (defining node id, name) → variable.
    alias_vars: HashMap<(String, String), String>,
    field_vars: HashMap<(usize, usize), FieldVar>,
    agg_vars: HashMap<(usize, usize), String>,
}

impl VariableMap {
    pub fn instance_var(&self, node: usize) -> &str {
        &self.instance[node]
    }

    pub fn step_var(&self, key: &StepKey) -> Option<&str> {
        self.step_vars.get(key).map(String::as_str)
    }

    pub fn step_is_reused(&self, key: &StepKey) -> bool {
        self.reused.contains(key)
    }

    pub fn alias_var(&self, node_id: &str, name: &str) -> Option<&str> {
        self.alias_vars
            .get(&(node_id.to_string(), name.to_string()))
            .map(String::as_str)
    }

    pub fn field_var(&self, node: usize, field: usize) -> Option<String> {
        match self.field_vars.get(&(node, field))? {
            FieldVar::Own(v) => Some(v.clone()),
            FieldVar::AliasRef { context, name } => {
                self.alias_var(context, name).map(str::to_string)
            }
        }
    }

    pub fn agg_var(&self, node: usize, agg: usize) -> Option<&str> {
        self.agg_vars.get(&(node, agg)).map(String::as_str)
    }

    /// The raw field variable entry, without alias resolution.
    pub fn field_kind(&self, node: usize, field: usize) -> Option<&FieldVar> {
        self.field_vars.get(&(node, field))
    }
}

struct Alloc {
    used: HashSet<String>,
    counters: HashMap<String, u32>,
}

impl Alloc {
    fn new() -> Self {
        Alloc {
            used: HashSet::new(),
            counters: HashMap::new(),
        }
    }

    fn reserve(&mut self, name: &str) {
        self.used.insert(name.to_string());
    }

    /// Auto-generated names stay distinct by `_1`, `_2`… suffixes.
    fn auto(&mut self, base: &str) -> String {
        let base = sanitize(base);
        if self.used.insert(base.clone()) {
            return base;
        }
        loop {
            let n = self.counters.entry(base.clone()).or_insert(0);
            *n += 1;
            let candidate = format!("{base}_{n}");
            if self.used.insert(candidate.clone()) {
                return candidate;
            }
        }
    }
}

fn sanitize(base: &str) -> String {
    let cleaned: String = base
        .chars()
        .map(|c| if c.is_alphanumeric() || c == '_' { c } else { '_' })
        .collect();
    if cleaned.is_empty() || cleaned.chars().next().unwrap().is_ascii_digit() {
        format!("v{cleaned}")
    } else {
        cleaned
    }
}

fn iri_local(iri: &str) -> &str {
    iri.rsplit(['#', '/']).next().unwrap_or(iri)
}

/// Base name of the variable a path step would introduce.
fn step_base(entity: &NameEntity, step_idx: usize) -> String {
    match &entity.steps[step_idx].item {
        StepItem::Name { local, .. } => local.clone(),
        StepItem::Iri(iri) => iri_local(iri).to_string(),
        StepItem::Var { name, .. } => name.clone(),
        StepItem::A => "type".to_string(),
    }
}

/// Assign SPARQL variable names to every name in the query, in document
/// order: explicit aliases keep their spelling and are shared, auto-generated
/// names come from class names and last path properties with `_N` suffixes.
pub fn assign_variables(
    ast: &Ast,
    _table: &SymbolTable,
    _diags: &mut Diagnostics,
) -> Result<VariableMap, crate::CompileError> {
    let mut alloc = Alloc::new();
    let mut map = VariableMap {
        instance: vec![String::new(); ast.nodes.len()],
        class_var: vec![None; ast.nodes.len()],
        ..VariableMap::default()
    };

    // Explicit names are reserved up front, so they always win over
    // auto-generated ones.
    for node in &ast.nodes {
        if let Some(a) = &node.instance_alias {
            alloc.reserve(a);
        }
        if let Some(cv) = &node.class_variable {
            alloc.reserve(cv);
        }
        for f in &node.fields {
            if let Some(a) = &f.alias {
                alloc.reserve(a);
            }
        }
        for a in &node.aggregations {
            if let Some(al) = &a.alias {
                alloc.reserve(al);
            }
        }
        let reserve_vars = |expr: &Expr, alloc: &mut Alloc| {
            expr.walk(&mut |e| {
                if let Expr::Var { name, .. } = e {
                    alloc.reserve(name);
                }
            });
        };
        for f in &node.fields {
            reserve_vars(f.expr.parsed(), &mut alloc);
        }
        for a in &node.aggregations {
            reserve_vars(a.expr.parsed(), &mut alloc);
        }
        for c in &node.conditions {
            reserve_vars(c.expr.parsed(), &mut alloc);
        }
    }
    for link in &ast.links {
        if let LinkPath::Path(p) = &link.path {
            if let Expr::Var { name, .. } = p.parsed() {
                alloc.reserve(name);
            }
        }
    }

    // Pass two: document order.
    for idx in 0..ast.nodes.len() {
        let node = &ast.nodes[idx];
        // Instance variable.
        map.instance[idx] = instance_variable(ast, idx, &map, &mut alloc);
        if let Some(alias) = &node.instance_alias {
            map.alias_vars.insert(
                (node.id.clone(), alias.clone()),
                map.instance[idx].clone(),
            );
        }
        if let Some(cv) = &node.class_variable {
            map.class_var[idx] = Some(cv.clone());
            map.alias_vars
                .insert((node.id.clone(), cv.clone()), cv.clone());
        }

        // Names already introduced at this node (implicit/explicit field
        // aliases); later compartments re-use them instead of new triples.
        let mut bindings: HashMap<String, String> = HashMap::new();

        for (fi, field) in node.fields.iter().enumerate() {
            let slot = Slot::Field(fi);
            assign_expr_vars(
                field.expr.parsed(),
                idx,
                slot,
                &mut alloc,
                &mut map,
                &mut bindings,
                field.alias.as_deref(),
                true,
            );
            let fv = field_variable(field.expr.parsed(), idx, fi, &map, &mut alloc, node);
            // Record the introduced name for re-use and cross-node refs.
            match (&fv, &field.alias) {
                (FieldVar::Own(v), Some(alias)) => {
                    bindings.insert(alias.clone(), v.clone());
                    map.alias_vars
                        .insert((node.id.clone(), alias.clone()), v.clone());
                }
                (FieldVar::Own(v), None) => {
                    if let Some(name) = implicit_name(field.expr.parsed()) {
                        bindings.entry(name.clone()).or_insert_with(|| v.clone());
                        map.alias_vars
                            .entry((node.id.clone(), name))
                            .or_insert_with(|| v.clone());
                    }
                }
                (FieldVar::AliasRef { .. }, Some(alias)) => {
                    // Re-exported name: the alias names the referenced variable.
                    if let FieldVar::AliasRef { context, name } = &fv {
                        if let Some(v) = map.alias_var(context, name).map(str::to_string) {
                            bindings.insert(alias.clone(), v.clone());
                            map.alias_vars.insert((node.id.clone(), alias.clone()), v);
                        }
                    }
                }
                _ => {}
            }
            map.field_vars.insert((idx, fi), fv);
        }

        for (ai, agg) in node.aggregations.iter().enumerate() {
            let slot = Slot::Agg(ai);
            assign_expr_vars(
                agg.expr.parsed(),
                idx,
                slot,
                &mut alloc,
                &mut map,
                &mut bindings,
                None,
                false,
            );
            let var = match &agg.alias {
                Some(a) => a.clone(),
                None => alloc.auto(&aggregate_base(agg.expr.parsed(), idx, &map)),
            };
            if let Some(a) = &agg.alias {
                map.alias_vars
                    .insert((node.id.clone(), a.clone()), var.clone());
            }
            map.agg_vars.insert((idx, ai), var);
        }

        for (ci, cond) in node.conditions.iter().enumerate() {
            assign_expr_vars(
                cond.expr.parsed(),
                idx,
                Slot::Cond(ci),
                &mut alloc,
                &mut map,
                &mut bindings,
                None,
                false,
            );
        }
        for (gi, g) in node.group_by.iter().enumerate() {
            assign_expr_vars(
                g.parsed(),
                idx,
                Slot::Group(gi),
                &mut alloc,
                &mut map,
                &mut bindings,
                None,
                false,
            );
        }
        for (oi, o) in node.order_by.iter().enumerate() {
            assign_expr_vars(
                o.expr.parsed(),
                idx,
                Slot::Order(oi),
                &mut alloc,
                &mut map,
                &mut bindings,
                None,
                false,
            );
        }
    }

    // Explicit link variables.
    for link in &ast.links {
        if let LinkPath::Path(p) = &link.path {
            if let Expr::Var { name, .. } = p.parsed() {
                let child = &ast.nodes[link.child];
                map.alias_vars
                    .insert((child.id.clone(), name.clone()), name.clone());
            }
        }
    }

    Ok(map)
}

fn instance_variable(ast: &Ast, idx: usize, map: &VariableMap, alloc: &mut Alloc) -> String {
    let node = &ast.nodes[idx];
    if let Some(alias) = &node.instance_alias {
        return alias.clone();
    }
    // Control nodes and same-instance children share the nearest instance.
    if node.node_type != NodeType::Data {
        if let Some(p) = node.parent {
            return map.instance[p].clone();
        }
    }
    if let Some(li) = node.parent_link {
        if matches!(ast.links[li].path, LinkPath::SameInstance) {
            return map.instance[ast.links[li].parent].clone();
        }
    }
    if let Some(entity) = &node.class_entity {
        return alloc.auto(&entity.local_name);
    }
    if let Some(name) = &node.class_name {
        return alloc.auto(iri_local(name));
    }
    // Fall back to the incoming link's last property name.
    if let Some(li) = node.parent_link {
        if let LinkPath::Path(p) = &ast.links[li].path {
            if let Expr::Name(e) = p.parsed() {
                return alloc.auto(&step_base(e, e.steps.len() - 1));
            }
        }
    }
    alloc.auto("node")
}

/// Walk the name entities of one expression, assigning a variable to every
/// path step that will materialize as a triple object.
#[allow(clippy::too_many_arguments)]
fn assign_expr_vars(
    expr: &Expr,
    node: usize,
    slot: Slot,
    alloc: &mut Alloc,
    map: &mut VariableMap,
    bindings: &mut HashMap<String, String>,
    field_alias: Option<&str>,
    is_field: bool,
) {
    let whole_entity_id = match expr {
        // A substring attachment desugars to SUBSTR(...) around the name, so
        // the alias belongs to the BIND target, not the name's own variable.
        Expr::Name(e) if e.substring.is_none() => Some(e.id),
        _ => None,
    };
    for entity in collect_name_entities(expr) {
        let resolution = match &entity.resolution {
            Some(r) => r,
            None => continue,
        };
        let first_materialized = match resolution.base {
            BaseRef::SelfInstance => 0,
            BaseRef::Constant { .. } => continue,
            _ => 1,
        };
        let n = entity.steps.len();
        for step_idx in first_materialized..n {
            let key: StepKey = (node, slot, entity.id, step_idx);
            if map.step_vars.contains_key(&key) {
                continue;
            }
            if let StepItem::Var { name, .. } = &entity.steps[step_idx].item {
                map.step_vars.insert(key, name.clone());
                map.reused.insert(key);
                continue;
            }
            let base = step_base(entity, step_idx);
            let is_last = step_idx == n - 1;
            // A single plain property in a non-field position re-uses the
            // variable of the field that introduced the same name.
            if is_last && !is_field && n == 1 && resolution.base == BaseRef::SelfInstance {
                if let Some(existing) = bindings.get(&base) {
                    map.step_vars.insert(key, existing.clone());
                    map.reused.insert(key);
                    continue;
                }
                // First plain mention in a non-field compartment introduces
                // the name; later mentions in this node denote the same value.
                let var = alloc.auto(&base);
                bindings.insert(base, var.clone());
                map.step_vars.insert(key, var);
                continue;
            }
            let var = if is_last && Some(entity.id) == whole_entity_id {
                match field_alias {
                    Some(alias) => alias.to_string(),
                    None => alloc.auto(&base),
                }
            } else {
                alloc.auto(&base)
            };
            map.step_vars.insert(key, var);
        }
    }
}

fn field_variable(
    expr: &Expr,
    node: usize,
    field_idx: usize,
    map: &VariableMap,
    alloc: &mut Alloc,
    ast_node: &AstNode,
) -> FieldVar {
    let alias = ast_node.fields[field_idx].alias.clone();
    match expr {
        // A substring attachment becomes a computed value, so the field gets
        // its own BIND target distinct from the name's variable.
        Expr::Name(entity) if entity.substring.is_some() => {
            FieldVar::Own(alias.unwrap_or_else(|| alloc.auto("expr")))
        }
        Expr::Name(entity) => {
            match entity.resolution.as_ref().map(|r| &r.base) {
                // Re-export of a name defined elsewhere, no further steps.
                Some(BaseRef::Alias { name, context, .. }) if entity.steps.len() == 1 => {
                    match alias {
                        // An alias renames the referenced variable only if it
                        // differs; either way the select var is resolved late.
                        _ => FieldVar::AliasRef {
                            context: context.clone(),
                            name: name.clone(),
                        },
                    }
                }
                Some(BaseRef::Instance { node: ctx }) if entity.steps.len() == 1 => {
                    FieldVar::AliasRef {
                        context: ctx.clone(),
                        name: entity.single_plain_name().unwrap_or_default().to_string(),
                    }
                }
                Some(BaseRef::Variable { name, .. }) if entity.steps.len() == 1 => {
                    FieldVar::Own(name.clone())
                }
                _ => {
                    // The whole-expression entity's last step variable.
                    let slot = Slot::Field(field_idx);
                    let key: StepKey = (node, slot, entity.id, entity.steps.len() - 1);
                    match map.step_vars.get(&key) {
                        Some(v) => FieldVar::Own(v.clone()),
                        None => FieldVar::Own(alias.unwrap_or_else(|| alloc.auto("value"))),
                    }
                }
            }
        }
        Expr::ClassRef => FieldVar::Own(map.instance[node].clone()),
        Expr::Var { name, .. } => FieldVar::Own(name.clone()),
        Expr::Aggregate { .. } => {
            // Local aggregate subquery value.
            let base = aggregate_base(expr, node, map);
            FieldVar::Own(match alias {
                Some(a) => a,
                None => alloc.auto(&base),
            })
        }
        _ => FieldVar::Own(match alias {
            Some(a) => a,
            None => alloc.auto("expr"),
        }),
    }
}

/// `<argbase>_<FUNC>`, e.g. `id_COUNT` for `count(id)`.
fn aggregate_base(expr: &Expr, node: usize, map: &VariableMap) -> String {
    if let Expr::Aggregate { func, arg, .. } = expr {
        let arg_base = match arg.as_ref() {
            Expr::Name(e) => step_base(e, e.steps.len() - 1),
            Expr::ClassRef => map.instance[node].clone(),
            Expr::Var { name, .. } => name.clone(),
            Expr::Star => map.instance[node].clone(),
            _ => "value".to_string(),
        };
        format!("{arg_base}_{func}")
    } else {
        "agg".to_string()
    }
}

fn implicit_name(expr: &Expr) -> Option<String> {
    match expr {
        Expr::Name(entity) if !entity.reference_mark && !entity.constant_mark => {
            entity.steps.last().and_then(|s| match &s.item {
                StepItem::Name { local, .. } => Some(local.clone()),
                _ => None,
            })
        }
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ast::{build_initial_ast, complete_ast};
    use crate::document::parse_query_document;
    use crate::schema::load_schema;

    fn assign(doc_json: &str) -> (Ast, VariableMap) {
        let doc = parse_query_document(doc_json.as_bytes()).unwrap();
        let schema = load_schema(crate::schema::tests::MINI.as_bytes()).unwrap().0;
        let ast = build_initial_ast(&doc, &schema).unwrap();
        let mut diags = Diagnostics::new();
        let (ast, table) = complete_ast(ast, &schema, &mut diags).unwrap();
        let vars = assign_variables(&ast, &table, &mut diags).unwrap();
        (ast, vars)
    }

    #[test]
    fn alias_wins_class_name_feeds_auto() {
        let (_, vars) = assign(
            r#"{
                "schemaName": "mini",
                "nodes": [
                    {"id": "a", "main": true, "className": "HospitalEpisode",
                     "instanceAlias": "H"},
                    {"id": "b", "className": "TreatmentInWard"}
                ],
                "links": [{"id": "l", "source": "a", "target": "b",
                           "path": "treatmentInWard", "order": 1}]
            }"#,
        );
        assert_eq!(vars.instance_var(0), "H");
        assert_eq!(vars.instance_var(1), "TreatmentInWard");
    }

    #[test]
    fn repeated_auto_names_get_suffixes() {
        let (_, vars) = assign(
            r#"{
                "schemaName": "mini",
                "nodes": [
                    {"id": "a", "main": true, "className": "HospitalEpisode",
                     "fields": [
                        {"expr": "caseRecordNo", "order": 1},
                        {"expr": "caseRecordNo", "order": 2}
                     ]}
                ],
                "links": []
            }"#,
        );
        assert_eq!(vars.field_var(0, 0).unwrap(), "caseRecordNo");
        assert_eq!(vars.field_var(0, 1).unwrap(), "caseRecordNo_1");
    }

    #[test]
    fn condition_reuses_the_field_variable() {
        let (ast, vars) = assign(
            r#"{
                "schemaName": "mini",
                "nodes": [
                    {"id": "a", "main": true, "className": "HospitalEpisode",
                     "fields": [{"expr": "caseRecordNo", "order": 1}],
                     "conditions": [{"expr": "caseRecordNo > 4", "order": 1}]}
                ],
                "links": []
            }"#,
        );
        let cond = ast.nodes[0].conditions[0].expr.parsed();
        let entity = collect_name_entities(cond)[0];
        let key = (0usize, Slot::Cond(0), entity.id, 0usize);
        assert_eq!(vars.step_var(&key), Some("caseRecordNo"));
        assert!(vars.step_is_reused(&key));
    }

    #[test]
    fn local_aggregate_field_names() {
        let (_, vars) = assign(
            r#"{
                "schemaName": "mini",
                "nodes": [
                    {"id": "a", "main": true, "className": "HospitalEpisode",
                     "fields": [{"expr": "COUNT(caseRecordNo)", "order": 1}]}
                ],
                "links": []
            }"#,
        );
        assert_eq!(vars.field_var(0, 0).unwrap(), "caseRecordNo_COUNT");
    }
}
