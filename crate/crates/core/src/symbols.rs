//! Per-node name visibility and name resolution.
//!
//! Every name defined in a query (instance aliases, field aliases, aggregate
//! aliases, property names used as whole fields, explicit query variables) is
//! recorded in the symbol table together with the set of nodes it is visible
//! from. Visibility is governed by how the path from the defining node to the
//! using node crosses fragment, optional, negation, union and subquery
//! boundaries.

use std::collections::BTreeMap;

use serde_json::{json, Map, Value};

use crate::ast::{Ast, Boundary, LinkPath};
use crate::diag::Diagnostics;
use crate::expr::{Expr, ExprPosition, NameEntity, StepItem};
use crate::schema::{self, EntityRef, KindHint, PropertyInfo, ResolvedEntity, Schema};

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum SymbolKind {
    PropertyName,
    ClassName,
    PropertyAlias,
    BindAlias,
    ClassAlias,
    AggregateAlias,
    ReferenceToAlias,
    UnresolvedFieldAlias,
    UnresolvedName,
}

impl SymbolKind {
    /// The scoping category the kind belongs to.
    fn category(self) -> Category {
        match self {
            SymbolKind::ClassAlias => Category::Instance,
            SymbolKind::AggregateAlias => Category::Aggregate,
            _ => Category::Value,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Category {
    /// An instance name names a graph resource; it can enter nested blocks.
    Instance,
    /// Property names and explicit aliases: plain values.
    Value,
    /// Aggregate aliases only surface one level above their subquery.
    Aggregate,
}

/// Schema typing information carried by a description.
#[derive(Debug, Clone)]
pub struct TypeInfo {
    pub entity: EntityRef,
    pub property: Option<PropertyInfo>,
}

/// One meaning of a name visible at some node.
#[derive(Debug, Clone)]
pub struct NameDescription {
    pub kind: SymbolKind,
    pub type_info: Option<TypeInfo>,
    /// AST id of the node where the name is defined.
    pub context: String,
    /// Number of subquery links crossed upward to reach this node.
    pub up_by_subquery: u32,
    pub down_by_subquery: bool,
    pub up_by_optional: bool,
    /// Structural links between the defining node and this node.
    pub distance_from_class: u32,
}

impl NameDescription {
    fn new(kind: SymbolKind, type_info: Option<TypeInfo>, context: &str) -> Self {
        NameDescription {
            kind,
            type_info,
            context: context.to_string(),
            up_by_subquery: 0,
            down_by_subquery: false,
            up_by_optional: false,
            distance_from_class: 0,
        }
    }
}

/// How a name entity in an expression was resolved.
#[derive(Debug, Clone, PartialEq)]
pub struct Resolution {
    pub base: BaseRef,
    /// Resolution of each path step that becomes a generated triple. When
    /// `base` consumes the first step, this covers the remaining steps.
    pub steps: Vec<StepResolution>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum BaseRef {
    /// Navigation starts at the instance of the node holding the expression.
    SelfInstance,
    /// The first step names the instance of some node (a class alias).
    Instance { node: String },
    /// The first step refers to an alias defined at `context`.
    Alias {
        name: String,
        kind: SymbolKind,
        context: String,
    },
    /// The first step is an explicit query variable.
    Variable { name: String, hidden: bool },
    /// The whole entity denotes a constant resource.
    Constant { iri: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepResolution {
    pub iri: Option<String>,
    pub data_type: Option<String>,
    pub max_cardinality: i64,
    pub is_data_property: bool,
}

impl StepResolution {
    fn unknown() -> Self {
        StepResolution {
            iri: None,
            data_type: None,
            max_cardinality: -1,
            is_data_property: false,
        }
    }

    fn from_property(p: &PropertyInfo) -> Self {
        StepResolution {
            iri: Some(p.entity.iri.clone()),
            data_type: p.data_type.clone(),
            max_cardinality: p.max_cardinality,
            is_data_property: p.property_type == schema::PropertyType::DataProperty,
        }
    }
}

impl Resolution {
    /// The resolution of the value-producing (last) step, if any.
    pub fn last_step(&self) -> Option<&StepResolution> {
        self.steps.last()
    }
}

#[derive(Debug, Default)]
pub struct SymbolTable {
    /// node id → name → descriptions.
    per_node: BTreeMap<String, BTreeMap<String, Vec<NameDescription>>>,
}

impl SymbolTable {
    pub fn visible_names(&self, node_id: &str) -> Vec<&str> {
        self.per_node
            .get(node_id)
            .map(|names| names.keys().map(String::as_str).collect())
            .unwrap_or_default()
    }

    pub fn lookup(&self, node_id: &str, name: &str) -> Option<&Vec<NameDescription>> {
        self.per_node.get(node_id).and_then(|names| names.get(name))
    }

    /// A name placeholder (a field whose own name never resolved) is only
    /// kept when no real description of that name exists at the node.
    fn prune_placeholders(&mut self) {
        for names in self.per_node.values_mut() {
            for descs in names.values_mut() {
                if descs.iter().any(|d| d.kind != SymbolKind::UnresolvedName) {
                    descs.retain(|d| d.kind != SymbolKind::UnresolvedName);
                }
            }
        }
    }

    fn insert(&mut self, node_id: &str, name: &str, desc: NameDescription) {
        self.per_node
            .entry(node_id.to_string())
            .or_default()
            .entry(name.to_string())
            .or_default()
            .push(desc);
    }

    /// JSON rendering of the table.
    pub fn dump_json(&self) -> Value {
        let mut table = Map::new();
        for (node, names) in &self.per_node {
            let mut node_map = Map::new();
            for (name, descs) in names {
                let rendered: Vec<Value> = descs.iter().map(render_description).collect();
                node_map.insert(name.clone(), Value::Array(rendered));
            }
            table.insert(node.clone(), Value::Object(node_map));
        }
        json!({ "symbolTable": table })
    }
}

fn render_description(d: &NameDescription) -> Value {
    let mut out = Map::new();
    out.insert("kind".into(), serde_json::to_value(d.kind).unwrap());
    let type_value = match &d.type_info {
        None => Value::Null,
        Some(t) => {
            let mut m = Map::new();
            m.insert("iri".into(), json!(t.entity.iri));
            m.insert("prefix".into(), json!(t.entity.prefix));
            if d.kind == SymbolKind::PropertyName {
                m.insert("display_name".into(), json!(t.entity.display_name));
                m.insert("local_name".into(), json!(t.entity.local_name));
            } else {
                m.insert("local_name".into(), json!(t.entity.local_name));
                m.insert("display_name".into(), json!(t.entity.display_name));
            }
            if let Some(p) = &t.property {
                m.insert("object_cnt".into(), json!(p.object_cnt));
                m.insert("data_cnt".into(), json!(p.data_cnt));
            }
            m.insert("is_local".into(), json!(t.entity.is_local));
            if let Some(p) = &t.property {
                m.insert("max_cardinality".into(), json!(p.max_cardinality));
                m.insert(
                    "inverse_max_cardinality".into(),
                    json!(p.inverse_max_cardinality),
                );
                if let Some(dt) = &p.data_type {
                    m.insert("data_type".into(), json!(dt));
                }
                m.insert("property_type".into(), serde_json::to_value(p.property_type).unwrap());
            }
            // Property names are recorded at the node where they occur; the
            // context rides inside the type record.
            if d.kind == SymbolKind::PropertyName {
                m.insert("context".into(), json!(d.context));
            }
            Value::Object(m)
        }
    };
    if d.kind == SymbolKind::PropertyName && type_value != Value::Null {
        out.insert("type".into(), type_value);
    } else {
        out.insert("type".into(), type_value);
        out.insert("context".into(), json!(d.context));
    }
    if d.up_by_subquery > 0 {
        out.insert("upBySubQuery".into(), json!(d.up_by_subquery));
    }
    if d.down_by_subquery {
        out.insert("downBySubquery".into(), json!(d.down_by_subquery));
    }
    if d.up_by_optional {
        out.insert("upByOptional".into(), json!(d.up_by_optional));
    }
    if d.up_by_subquery > 0 {
        out.insert("distanceFromClass".into(), json!(d.distance_from_class));
    }
    Value::Object(out)
}

/// A name definition before propagation.
struct Definition {
    name: String,
    node: usize,
    desc: NameDescription,
    /// For subquery exporting: the defining field is part of the selection.
    exported: bool,
}

/// Decide whether (and how) a description may cross one structural link.
/// Returns the updated flags, or `None` when the crossing is illegal.
fn cross(
    category: Category,
    boundary: Boundary,
    upward: bool,
    exported: bool,
    state: &CrossState,
) -> Option<CrossState> {
    let mut next = state.clone();
    next.distance += 1;
    // After surfacing from a subquery a value name stays within the host
    // fragment only.
    if state.crossed_up_subquery
        && category != Category::Instance
        && boundary != Boundary::Fragment
    {
        return None;
    }
    match category {
        Category::Instance => match (boundary, upward) {
            (Boundary::Fragment, _) => Some(next),
            (Boundary::Optional, false)
            | (Boundary::Negation, false)
            | (Boundary::Union, false) => Some(next),
            (Boundary::Optional, true) | (Boundary::Union, true) => {
                next.up_by_optional = true;
                Some(next)
            }
            (Boundary::Subquery, false) => {
                next.down_by_subquery = true;
                Some(next)
            }
            (Boundary::Negation, true) | (Boundary::Subquery, true) => None,
        },
        Category::Value => match (boundary, upward) {
            (Boundary::Fragment, _) => Some(next),
            (Boundary::Optional, true) | (Boundary::Union, true) => {
                next.up_by_optional = true;
                Some(next)
            }
            (Boundary::Subquery, true) if exported && !state.crossed_up_subquery => {
                next.crossed_up_subquery = true;
                next.up_by_subquery += 1;
                Some(next)
            }
            _ => None,
        },
        Category::Aggregate => match (boundary, upward) {
            (Boundary::Subquery, true) if exported && !state.crossed_up_subquery => {
                next.crossed_up_subquery = true;
                next.up_by_subquery += 1;
                Some(next)
            }
            (Boundary::Fragment, _) if state.crossed_up_subquery => Some(next),
            _ => None,
        },
    }
}

#[derive(Debug, Clone)]
struct CrossState {
    up_by_subquery: u32,
    down_by_subquery: bool,
    up_by_optional: bool,
    crossed_up_subquery: bool,
    distance: u32,
}

impl CrossState {
    fn start() -> Self {
        CrossState {
            up_by_subquery: 0,
            down_by_subquery: false,
            up_by_optional: false,
            crossed_up_subquery: false,
            distance: 0,
        }
    }
}

/// Build the full symbol table for a stage-two AST and resolve every name
/// entity in its expressions.
pub fn build_symbol_table(ast: &mut Ast, schema: &Schema, diags: &mut Diagnostics) -> SymbolTable {
    let definitions = collect_definitions(ast, schema, diags);
    let mut table = SymbolTable::default();
    propagate(ast, &definitions, &mut table);
    resolve_expressions(ast, schema, &table, diags);
    table.prune_placeholders();
    table
}

fn collect_definitions(ast: &Ast, schema: &Schema, diags: &mut Diagnostics) -> Vec<Definition> {
    let mut defs = Vec::new();
    for (idx, node) in ast.nodes.iter().enumerate() {
        // Instance alias.
        if let Some(alias) = &node.instance_alias {
            let type_info = node.class_entity.as_ref().map(|e| TypeInfo {
                entity: e.clone(),
                property: None,
            });
            defs.push(Definition {
                name: alias.clone(),
                node: idx,
                desc: NameDescription::new(SymbolKind::ClassAlias, type_info, &node.id),
                exported: true,
            });
        }
        // Exploratory class variable doubles as a value name.
        if let Some(cv) = &node.class_variable {
            defs.push(Definition {
                name: cv.clone(),
                node: idx,
                desc: NameDescription::new(SymbolKind::BindAlias, None, &node.id),
                exported: true,
            });
        }
        // Field aliases, and property names serving as whole fields.
        for field in &node.fields {
            let parsed = field.expr.parsed();
            match &field.alias {
                Some(alias) => {
                    let (kind, type_info) = classify_field(parsed, schema);
                    defs.push(Definition {
                        name: alias.clone(),
                        node: idx,
                        desc: NameDescription::new(kind, type_info, &node.id),
                        exported: !field.helper,
                    });
                }
                None => {
                    // A control node without an instance of its own defines
                    // no property names; plain names there refer to values
                    // brought in from elsewhere.
                    let classless = node.class_name.is_none()
                        && node.class_variable.is_none()
                        && node.instance_resource.is_none()
                        && node.node_type != crate::document::NodeType::Data;
                    if classless {
                        continue;
                    }
                    if let Some((name, type_info, kind)) =
                        implicit_field_name(parsed, schema)
                    {
                        defs.push(Definition {
                            name,
                            node: idx,
                            desc: NameDescription::new(kind, type_info, &node.id),
                            exported: !field.helper,
                        });
                    }
                }
            }
        }
        for agg in &node.aggregations {
            let name = match &agg.alias {
                Some(a) => a.clone(),
                None => continue,
            };
            defs.push(Definition {
                name,
                node: idx,
                desc: NameDescription::new(SymbolKind::AggregateAlias, None, &node.id),
                exported: true,
            });
        }
    }
    // Explicit link path variables are visible like field aliases of the
    // child node.
    for link in &ast.links {
        if let LinkPath::Path(slot) = &link.path {
            if let Expr::Var { name, .. } = slot.parsed() {
                defs.push(Definition {
                    name: name.clone(),
                    node: link.child,
                    desc: NameDescription::new(
                        SymbolKind::BindAlias,
                        None,
                        &ast.nodes[link.child].id,
                    ),
                    exported: true,
                });
            }
        }
    }
    // Duplicate alias definitions in one node are conflicts.
    let mut seen: BTreeMap<(usize, &str), u32> = BTreeMap::new();
    for d in &defs {
        *seen.entry((d.node, d.name.as_str())).or_default() += 1;
    }
    for ((node, name), count) in seen {
        if count > 1 && !name.is_empty() {
            diags.warning_at(
                "duplicate-name",
                format!("name `{name}` is introduced {count} times in one node"),
                &ast.nodes[node].id,
            );
        }
    }
    defs
}

/// Kind of an aliased field, judged by its expression shape.
fn classify_field(parsed: &Expr, schema: &Schema) -> (SymbolKind, Option<TypeInfo>) {
    if parsed.contains_aggregate() {
        return (SymbolKind::AggregateAlias, None);
    }
    match parsed {
        Expr::Name(entity) if entity.reference_mark && entity.steps.len() == 1 => {
            (SymbolKind::ReferenceToAlias, None)
        }
        Expr::Name(entity)
            if entity.between.is_none()
                && entity.like.is_none()
                && entity.substring.is_none()
                && entity.lang_tags.is_empty()
                && !entity.constant_mark =>
        {
            let type_info = last_step_property(entity, schema);
            (SymbolKind::PropertyAlias, type_info)
        }
        Expr::Var { .. } | Expr::ClassRef => (SymbolKind::PropertyAlias, None),
        _ => (SymbolKind::BindAlias, None),
    }
}

/// Whole-field property references without an alias introduce the property
/// name itself (the implicit alias).
fn implicit_field_name(
    parsed: &Expr,
    schema: &Schema,
) -> Option<(String, Option<TypeInfo>, SymbolKind)> {
    match parsed {
        Expr::Name(entity)
            if !entity.reference_mark
                && !entity.constant_mark
                && entity.between.is_none()
                && entity.like.is_none()
                && entity.substring.is_none() =>
        {
            let last = entity.steps.last()?;
            let name = match &last.item {
                StepItem::Name { local, .. } => local.clone(),
                _ => return None,
            };
            let type_info = last_step_property(entity, schema);
            let kind = if type_info.is_some() {
                SymbolKind::PropertyName
            } else {
                SymbolKind::UnresolvedName
            };
            Some((name, type_info, kind))
        }
        _ => None,
    }
}

fn last_step_property(entity: &NameEntity, schema: &Schema) -> Option<TypeInfo> {
    let last = entity.steps.last()?;
    let prop = match &last.item {
        StepItem::Name {
            prefix,
            local,
            display,
        } => {
            let form = render_name_form(prefix.as_deref(), local, *display);
            match schema::resolve_entity(schema, &form, KindHint::Property) {
                Ok((ResolvedEntity::Property(p), _)) => Some(p),
                _ => None,
            }
        }
        StepItem::Iri(iri) => schema.property_by_iri(iri).cloned(),
        _ => None,
    }?;
    Some(TypeInfo {
        entity: prop.entity.clone(),
        property: Some(prop),
    })
}

fn render_name_form(prefix: Option<&str>, local: &str, display: bool) -> String {
    match (prefix, display) {
        (Some(p), true) => format!("{p}:[{local}]"),
        (Some(p), false) => format!("{p}:{local}"),
        (None, true) => format!("[{local}]"),
        (None, false) => local.to_string(),
    }
}

fn propagate(ast: &Ast, definitions: &[Definition], table: &mut SymbolTable) {
    // Adjacency: for each node, the structural links touching it.
    let mut adjacent: Vec<Vec<(usize, bool)>> = vec![Vec::new(); ast.nodes.len()];
    for (li, link) in ast.links.iter().enumerate() {
        adjacent[link.child].push((li, true)); // crossing upward
        adjacent[link.parent].push((li, false)); // crossing downward
    }

    for def in definitions {
        let category = def.desc.kind.category();
        // Aggregate aliases are not visible at their own node.
        let visible_at_origin = category != Category::Aggregate;
        if visible_at_origin {
            table.insert(&ast.nodes[def.node].id, &def.name, def.desc.clone());
        }
        // DFS over the tree; each node has a unique path from the origin.
        let mut stack: Vec<(usize, Option<usize>, CrossState)> =
            vec![(def.node, None, CrossState::start())];
        while let Some((at, via, state)) = stack.pop() {
            for &(li, upward) in &adjacent[at] {
                if Some(li) == via {
                    continue;
                }
                let link = &ast.links[li];
                let boundary = ast.boundary(link);
                if let Some(next) = cross(category, boundary, upward, def.exported, &state) {
                    let to = if upward { link.parent } else { link.child };
                    let mut desc = def.desc.clone();
                    desc.up_by_subquery = next.up_by_subquery;
                    desc.down_by_subquery = next.down_by_subquery;
                    desc.up_by_optional = next.up_by_optional;
                    desc.distance_from_class = next.distance;
                    table.insert(&ast.nodes[to].id, &def.name, desc);
                    stack.push((to, Some(li), next));
                }
            }
        }
    }
}

fn resolve_expressions(ast: &mut Ast, schema: &Schema, table: &SymbolTable, diags: &mut Diagnostics) {
    let node_count = ast.nodes.len();
    for idx in 0..node_count {
        let node_id = ast.nodes[idx].id.clone();
        let resolve_in = |slot: &mut crate::ast::AstExpr,
                              position: ExprPosition,
                              diags: &mut Diagnostics| {
            if let Some(parsed) = slot.parsed.as_mut() {
                parsed.walk_names_mut(&mut |entity| {
                    entity.resolution =
                        resolve_entity_at_node(entity, &node_id, position, schema, table, diags);
                });
            }
        };
        // Split borrows: move the expression slots out while resolving.
        let mut node = std::mem::replace(
            &mut ast.nodes[idx],
            crate::ast::AstNode {
                id: String::new(),
                main: false,
                node_type: crate::document::NodeType::Data,
                class_name: None,
                class_entity: None,
                class_variable: None,
                class_variable_hidden: false,
                instance_alias: None,
                instance_resource: None,
                indirect_membership: false,
                distinct: false,
                fields: Vec::new(),
                aggregations: Vec::new(),
                conditions: Vec::new(),
                group_by: Vec::new(),
                order_by: Vec::new(),
                limit: None,
                offset: None,
                full_sparql: None,
                full_sparql_is_subquery: false,
                parent: None,
                parent_link: None,
                children: Vec::new(),
            },
        );
        for f in &mut node.fields {
            resolve_in(&mut f.expr, ExprPosition::Field, diags);
        }
        for a in &mut node.aggregations {
            resolve_in(&mut a.expr, ExprPosition::Aggregation, diags);
        }
        for c in &mut node.conditions {
            resolve_in(&mut c.expr, ExprPosition::Condition, diags);
        }
        for g in &mut node.group_by {
            resolve_in(g, ExprPosition::GroupBy, diags);
        }
        for o in &mut node.order_by {
            resolve_in(&mut o.expr, ExprPosition::OrderBy, diags);
        }
        ast.nodes[idx] = node;
    }
    // Link paths resolve in the context of the child node.
    for li in 0..ast.links.len() {
        let child_id = ast.nodes[ast.links[li].child].id.clone();
        if let LinkPath::Path(slot) = &mut ast.links[li].path {
            if let Some(parsed) = slot.parsed.as_mut() {
                parsed.walk_names_mut(&mut |entity| {
                    entity.resolution = resolve_entity_at_node(
                        entity,
                        &child_id,
                        ExprPosition::LinkPath,
                        schema,
                        table,
                        diags,
                    );
                });
            }
        }
    }
    for li in 0..ast.ref_links.len() {
        let target_id = ast.nodes[ast.ref_links[li].target].id.clone();
        if let LinkPath::Path(slot) = &mut ast.ref_links[li].path {
            if let Some(parsed) = slot.parsed.as_mut() {
                parsed.walk_names_mut(&mut |entity| {
                    entity.resolution = resolve_entity_at_node(
                        entity,
                        &target_id,
                        ExprPosition::LinkPath,
                        schema,
                        table,
                        diags,
                    );
                });
            }
        }
    }
}

/// Resolve one name entity appearing at a node.
fn resolve_entity_at_node(
    entity: &NameEntity,
    node_id: &str,
    position: ExprPosition,
    schema: &Schema,
    table: &SymbolTable,
    diags: &mut Diagnostics,
) -> Option<Resolution> {
    let first = entity.steps.first()?;

    // Explicit variables resolve to themselves.
    if let StepItem::Var { name, hidden } = &first.item {
        return Some(Resolution {
            base: BaseRef::Variable {
                name: name.clone(),
                hidden: *hidden,
            },
            steps: resolve_steps(&entity.steps[1..], schema, node_id, diags),
        });
    }
    if let StepItem::A = first.item {
        return Some(Resolution {
            base: BaseRef::SelfInstance,
            steps: vec![StepResolution::unknown()],
        });
    }

    // Backtick marks a constant resource.
    if entity.constant_mark {
        let form = step_name_form(first);
        let iri = match schema::resolve_entity(schema, &form, KindHint::Any) {
            Ok((resolved, _)) => resolved.iri().unwrap_or_default().to_string(),
            Err(e) => {
                diags.error_at("unresolved-name", format!("constant `{form}`: {e}"), node_id);
                String::new()
            }
        };
        return Some(Resolution {
            base: BaseRef::Constant { iri },
            steps: Vec::new(),
        });
    }

    // Plain unprefixed first step: try the symbol table first.
    let table_hit = match &first.item {
        StepItem::Name {
            prefix: None,
            local,
            display: false,
        } if first.modifier == crate::expr::PathMod::None && !first.inverse => table
            .lookup(node_id, local)
            .and_then(|descs| {
                // An unresolved placeholder (a field whose own name is still
                // unknown) never shadows a real definition of the same name.
                // A field expression also never resolves to the alias that
                // the field itself defines at this node.
                let suitable = |d: &&NameDescription| {
                    // Placeholders for unresolved names never shadow anything.
                    if d.kind == SymbolKind::UnresolvedName {
                        return false;
                    }
                    if position != ExprPosition::Field {
                        return true;
                    }
                    // A field never resolves to the alias it itself defines.
                    if d.context == node_id
                        && matches!(d.kind, SymbolKind::PropertyAlias | SymbolKind::BindAlias)
                    {
                        return false;
                    }
                    // A field repeating a property name from another node in
                    // the same scope is a fresh occurrence of the property,
                    // not a re-export; only names selected across a subquery
                    // or optional border are re-used as values.
                    if d.kind == SymbolKind::PropertyName
                        && d.context != node_id
                        && d.up_by_subquery == 0
                        && !d.up_by_optional
                    {
                        return false;
                    }
                    true
                };
                descs.iter().find(suitable)
            })
            .map(|d| (local.clone(), d.clone())),
        _ => None,
    };

    if let Some((name, desc)) = table_hit {
        // Footnote checks for names brought across boundaries.
        if desc.up_by_optional && entity.steps.len() > 1 {
            diags.error_at(
                "scoping",
                format!(
                    "`{name}` reached this node across an optional or union border \
                     and cannot start a navigation expression"
                ),
                node_id,
            );
        }
        if desc.kind == SymbolKind::ClassAlias
            && desc.down_by_subquery
            && position == ExprPosition::Aggregation
        {
            diags.error_at(
                "scoping",
                format!("instance name `{name}` cannot be aggregated inside this subquery"),
                node_id,
            );
        }
        let base = match desc.kind {
            SymbolKind::ClassAlias => BaseRef::Instance {
                node: desc.context.clone(),
            },
            // A property name hit is still a navigation from this node's
            // instance — the table entry only carries its typing.
            SymbolKind::PropertyName | SymbolKind::UnresolvedName
                if desc.context == node_id =>
            {
                return Some(Resolution {
                    base: BaseRef::SelfInstance,
                    steps: resolve_steps(&entity.steps, schema, node_id, diags),
                });
            }
            _ => BaseRef::Alias {
                name,
                kind: desc.kind,
                context: desc.context.clone(),
            },
        };
        return Some(Resolution {
            base,
            steps: resolve_steps(&entity.steps[1..], schema, node_id, diags),
        });
    }

    if entity.reference_mark {
        diags.error_at(
            "unresolved-name",
            format!(
                "`@{}` refers to no alias visible from this node",
                entity.raw_text.trim_start_matches('@')
            ),
            node_id,
        );
        return None;
    }

    // Fall back to the schema: the whole path navigates from this node.
    let hint = if position == ExprPosition::ClassPosition {
        KindHint::Class
    } else {
        KindHint::Property
    };
    if entity.steps.len() == 1 {
        let form = step_name_form(first);
        match schema::resolve_entity(schema, &form, hint) {
            Ok((ResolvedEntity::Class(c), _)) if position == ExprPosition::ClassPosition => {
                return Some(Resolution {
                    base: BaseRef::Constant { iri: c.iri },
                    steps: Vec::new(),
                });
            }
            Ok((ResolvedEntity::Class(c), _)) => {
                // A class name in a value position denotes the class resource.
                return Some(Resolution {
                    base: BaseRef::Constant { iri: c.iri },
                    steps: Vec::new(),
                });
            }
            _ => {}
        }
    }
    let steps = resolve_steps(&entity.steps, schema, node_id, diags);
    Some(Resolution {
        base: BaseRef::SelfInstance,
        steps,
    })
}

fn step_name_form(step: &crate::expr::PathStep) -> String {
    match &step.item {
        StepItem::Name {
            prefix,
            local,
            display,
        } => render_name_form(prefix.as_deref(), local, *display),
        StepItem::Iri(iri) => format!("<{iri}>"),
        StepItem::Var { name, .. } => format!("?{name}"),
        StepItem::A => "a".to_string(),
    }
}

fn resolve_steps(
    steps: &[crate::expr::PathStep],
    schema: &Schema,
    node_id: &str,
    diags: &mut Diagnostics,
) -> Vec<StepResolution> {
    steps
        .iter()
        .map(|step| match &step.item {
            StepItem::Var { .. } | StepItem::A => StepResolution::unknown(),
            StepItem::Iri(iri) => match schema.property_by_iri(iri) {
                Some(p) => StepResolution::from_property(p),
                None => StepResolution {
                    iri: Some(iri.clone()),
                    ..StepResolution::unknown()
                },
            },
            StepItem::Name {
                prefix,
                local,
                display,
            } => {
                let form = render_name_form(prefix.as_deref(), local, *display);
                match schema::resolve_entity(schema, &form, KindHint::Property) {
                    Ok((ResolvedEntity::Property(p), _)) => StepResolution::from_property(&p),
                    Ok((ResolvedEntity::Unknown { iri, .. }, _)) => {
                        diags.warning_at(
                            "unknown-property",
                            format!("property `{form}` is not described by the schema"),
                            node_id,
                        );
                        StepResolution {
                            iri: Some(iri),
                            ..StepResolution::unknown()
                        }
                    }
                    Ok((ResolvedEntity::Class(c), _)) => {
                        diags.error_at(
                            "unresolved-name",
                            format!("`{form}` names a class where a property is expected"),
                            node_id,
                        );
                        StepResolution {
                            iri: Some(c.iri),
                            ..StepResolution::unknown()
                        }
                    }
                    Ok((ResolvedEntity::NotFound, _)) => {
                        diags.error_at(
                            "unresolved-name",
                            format!("`{form}` is neither a visible name nor a schema property"),
                            node_id,
                        );
                        StepResolution::unknown()
                    }
                    Err(e) => {
                        diags.error_at("unresolved-name", format!("`{form}`: {e}"), node_id);
                        StepResolution::unknown()
                    }
                }
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ast::{build_initial_ast, complete_ast};
    use crate::document::parse_query_document;
    use crate::schema::load_schema;

    fn mini_schema() -> Schema {
        load_schema(crate::schema::tests::MINI.as_bytes()).unwrap().0
    }

    fn build(doc_json: &str) -> (crate::ast::Ast, SymbolTable, Diagnostics) {
        let doc = parse_query_document(doc_json.as_bytes()).unwrap();
        let schema = mini_schema();
        let ast = build_initial_ast(&doc, &schema).unwrap();
        let mut diags = Diagnostics::new();
        let (ast, table) = complete_ast(ast, &schema, &mut diags).unwrap();
        (ast, table, diags)
    }

    #[test]
    fn instance_alias_travels_down_a_subquery() {
        let (_, table, _) = build(
            r#"{
                "schemaName": "mini",
                "nodes": [
                    {"id": "root", "main": true, "className": "HospitalEpisode",
                     "instanceAlias": "H"},
                    {"id": "sub"}
                ],
                "links": [
                    {"id": "l1", "source": "root", "target": "sub",
                     "path": "treatmentInWard", "kind": "subquery", "order": 1}
                ]
            }"#,
        );
        let descs = table.lookup("sub", "H").expect("H visible in subquery");
        assert!(descs[0].down_by_subquery);
        assert_eq!(descs[0].kind, SymbolKind::ClassAlias);
        let at_root = table.lookup("root", "H").unwrap();
        assert!(!at_root[0].down_by_subquery);
    }

    #[test]
    fn aggregate_alias_surfaces_one_level_only() {
        let (_, table, _) = build(
            r#"{
                "schemaName": "mini",
                "nodes": [
                    {"id": "root", "main": true, "className": "HospitalEpisode"},
                    {"id": "sub",
                     "aggregations": [{"expr": "COUNT(.)", "alias": "T_Count", "order": 1}]},
                    {"id": "subsub"}
                ],
                "links": [
                    {"id": "l1", "source": "root", "target": "sub",
                     "path": "treatmentInWard", "kind": "subquery", "order": 1},
                    {"id": "l2", "source": "sub", "target": "subsub",
                     "path": "treatmentInWard", "kind": "subquery", "order": 2}
                ]
            }"#,
        );
        // Not visible at the defining node, visible one level up.
        assert!(table.lookup("sub", "T_Count").is_none());
        let at_root = table.lookup("root", "T_Count").expect("visible at host");
        assert_eq!(at_root[0].kind, SymbolKind::AggregateAlias);
        assert_eq!(at_root[0].up_by_subquery, 1);
        assert_eq!(at_root[0].distance_from_class, 1);
        assert!(table.lookup("subsub", "T_Count").is_none());
    }

    #[test]
    fn property_field_registers_its_name() {
        let (_, table, _) = build(
            r#"{
                "schemaName": "mini",
                "nodes": [
                    {"id": "root", "main": true, "className": "HospitalEpisode",
                     "fields": [{"expr": "caseRecordNo", "order": 1}]}
                ],
                "links": []
            }"#,
        );
        let descs = table.lookup("root", "caseRecordNo").unwrap();
        assert_eq!(descs[0].kind, SymbolKind::PropertyName);
        let info = descs[0].type_info.as_ref().unwrap();
        assert!(info.entity.iri.ends_with("caseRecordNo"));
        let prop = info.property.as_ref().unwrap();
        assert_eq!(prop.max_cardinality, 1);
    }

    #[test]
    fn value_names_do_not_enter_optional_blocks() {
        let (_, table, _) = build(
            r#"{
                "schemaName": "mini",
                "nodes": [
                    {"id": "root", "main": true, "className": "HospitalEpisode",
                     "fields": [{"expr": "caseRecordNo", "alias": "rec", "order": 1}]},
                    {"id": "opt"}
                ],
                "links": [
                    {"id": "l1", "source": "root", "target": "opt",
                     "path": "treatmentInWard", "mode": "optional", "order": 1}
                ]
            }"#,
        );
        assert!(table.lookup("opt", "rec").is_none());
        // But an instance alias would enter.
    }

    #[test]
    fn value_name_crosses_up_from_optional_as_value_only() {
        let (_, table, diags) = build(
            r#"{
                "schemaName": "mini",
                "nodes": [
                    {"id": "root", "main": true, "className": "HospitalEpisode",
                     "conditions": [{"expr": "rec > 4", "order": 1}]},
                    {"id": "opt",
                     "fields": [{"expr": "caseRecordNo", "alias": "rec", "order": 1}]}
                ],
                "links": [
                    {"id": "l1", "source": "root", "target": "opt",
                     "path": "treatmentInWard", "mode": "optional", "order": 1}
                ]
            }"#,
        );
        let descs = table.lookup("root", "rec").expect("rec visible upward");
        assert!(descs[0].up_by_optional);
        assert!(!diags.has_errors(), "{diags}");
    }

    #[test]
    fn symbol_dump_shape() {
        let (_, table, _) = build(
            r#"{
                "schemaName": "mini",
                "nodes": [
                    {"id": "root", "main": true, "className": "HospitalEpisode",
                     "instanceAlias": "H",
                     "fields": [{"expr": "caseRecordNo", "order": 1}]}
                ],
                "links": []
            }"#,
        );
        let dump = table.dump_json();
        let root = &dump["symbolTable"]["root"];
        assert_eq!(root["H"][0]["kind"], "CLASS_ALIAS");
        assert_eq!(root["H"][0]["context"], "root");
        let case = &root["caseRecordNo"][0];
        assert_eq!(case["kind"], "PROPERTY_NAME");
        // Property descriptions carry their context inside the type record.
        assert_eq!(case["type"]["context"], "root");
        assert_eq!(case["type"]["property_type"], "DATA_PROPERTY");
    }
}
