//! Abstract syntax tree of a visual query.
//!
//! The AST is built in two stages: the *initial* structure mirrors the query
//! document (raw expression texts, no schema references), the *full* stage
//! adds parsed expressions, resolved schema entities and the symbol table.

use std::collections::HashMap;

use crate::diag::Diagnostics;
use crate::document::{
    ConditionForm, LabelService, LinkKind, LinkMode, NodeType, QueryDocument,
};
use crate::expr::{self, Expr, ExprPosition};
use crate::schema::{self, EntityRef, KindHint, ResolvedEntity, Schema};
use crate::symbols::SymbolTable;

#[derive(Debug, thiserror::Error)]
pub enum AstError {
    #[error("document structure: {0}")]
    Structure(String),
    #[error("expression `{text}` does not parse: {source}")]
    Expression {
        text: String,
        source: expr::ParseError,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Stage {
    Initial,
    Full,
}

/// An expression slot: the raw text plus, after stage two, its parse tree.
#[derive(Debug, Clone)]
pub struct AstExpr {
    pub text: String,
    pub parsed: Option<Expr>,
}

impl AstExpr {
    fn raw(text: &str) -> Self {
        AstExpr {
            text: text.to_string(),
            parsed: None,
        }
    }

    pub fn parsed(&self) -> &Expr {
        self.parsed.as_ref().expect("expression parsed in stage two")
    }
}

#[derive(Debug, Clone)]
pub struct AstField {
    pub expr: AstExpr,
    pub alias: Option<String>,
    pub require_values: bool,
    pub helper: bool,
    pub label_service: LabelService,
    pub order: i64,
}

#[derive(Debug, Clone)]
pub struct AstAggregation {
    pub expr: AstExpr,
    pub alias: Option<String>,
    pub order: i64,
}

#[derive(Debug, Clone)]
pub struct AstCondition {
    pub expr: AstExpr,
    pub form: ConditionForm,
    pub order: i64,
}

#[derive(Debug, Clone)]
pub struct AstOrderBy {
    pub expr: AstExpr,
    pub descending: bool,
}

#[derive(Debug, Clone)]
pub struct AstNode {
    pub id: String,
    pub main: bool,
    pub node_type: NodeType,
    pub class_name: Option<String>,
    /// Schema entity for `class_name`, resolved in stage two.
    pub class_entity: Option<EntityRef>,
    /// Exploratory class variable without the leading `?`/`??` marks.
    pub class_variable: Option<String>,
    pub class_variable_hidden: bool,
    pub instance_alias: Option<String>,
    pub instance_resource: Option<String>,
    pub indirect_membership: bool,
    pub distinct: bool,
    pub fields: Vec<AstField>,
    pub aggregations: Vec<AstAggregation>,
    pub conditions: Vec<AstCondition>,
    pub group_by: Vec<AstExpr>,
    pub order_by: Vec<AstOrderBy>,
    pub limit: Option<u64>,
    pub offset: Option<u64>,
    pub full_sparql: Option<String>,
    pub full_sparql_is_subquery: bool,
    pub parent: Option<usize>,
    /// Index into `Ast::links` of the incoming structural link.
    pub parent_link: Option<usize>,
    /// Child node indexes ordered by link `order`.
    pub children: Vec<usize>,
}

/// The connection along a structural link.
#[derive(Debug, Clone)]
pub enum LinkPath {
    /// `++`: the nodes are related by query structure only.
    Free,
    /// `==`: both nodes describe the same instance.
    SameInstance,
    /// A property path (possibly an explicit variable).
    Path(AstExpr),
}

#[derive(Debug, Clone)]
pub struct AstLink {
    pub id: String,
    pub parent: usize,
    pub child: usize,
    pub path: LinkPath,
    pub inverse: bool,
    pub mode: LinkMode,
    pub kind: LinkKind,
    pub existence_check: bool,
    pub global: bool,
    pub order: i64,
}

/// A non-structural link adding an extra assertion between two nodes.
#[derive(Debug, Clone)]
pub struct RefLink {
    pub id: String,
    pub source: usize,
    pub target: usize,
    pub path: LinkPath,
    pub inverse: bool,
    pub negated: bool,
    pub order: i64,
}

/// Scope boundary type a structural link represents.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Boundary {
    /// A required join: both ends are in the same query fragment.
    Fragment,
    Optional,
    Negation,
    /// The child is a branch of a union node.
    Union,
    Subquery,
}

#[derive(Debug)]
pub struct Ast {
    pub stage: Stage,
    pub nodes: Vec<AstNode>,
    pub links: Vec<AstLink>,
    pub ref_links: Vec<RefLink>,
    pub root: usize,
    by_id: HashMap<String, usize>,
}

impl Ast {
    pub fn node_index(&self, id: &str) -> Option<usize> {
        self.by_id.get(id).copied()
    }

    pub fn boundary(&self, link: &AstLink) -> Boundary {
        match link.kind {
            LinkKind::Subquery => {
                if link.mode == LinkMode::Negated {
                    Boundary::Negation
                } else {
                    Boundary::Subquery
                }
            }
            _ => match link.mode {
                LinkMode::Negated => Boundary::Negation,
                LinkMode::Optional => Boundary::Optional,
                LinkMode::Required => {
                    if self.nodes[link.parent].node_type == NodeType::Union {
                        Boundary::Union
                    } else {
                        Boundary::Fragment
                    }
                }
            },
        }
    }

    /// Representative node index of the fragment each node belongs to.
    /// A fragment is a maximal set of nodes connected by required joins.
    pub fn fragments(&self) -> Vec<usize> {
        let mut rep = vec![0usize; self.nodes.len()];
        // Nodes are stored so that a parent precedes its children.
        for idx in 0..self.nodes.len() {
            rep[idx] = match self.nodes[idx].parent_link {
                Some(l) if self.boundary(&self.links[l]) == Boundary::Fragment => {
                    rep[self.links[l].parent]
                }
                _ => idx,
            };
        }
        rep
    }

    /// Tree path between two nodes: the links crossed walking `from` → `to`,
    /// each paired with `true` when crossed upward (child to parent).
    pub fn path_between(&self, from: usize, to: usize) -> Vec<(usize, bool)> {
        let anc = |mut n: usize| -> Vec<usize> {
            let mut out = vec![n];
            while let Some(p) = self.nodes[n].parent {
                out.push(p);
                n = p;
            }
            out
        };
        let from_anc = anc(from);
        let to_anc = anc(to);
        let lca = *from_anc
            .iter()
            .find(|a| to_anc.contains(a))
            .expect("tree nodes share the root");
        let mut path = Vec::new();
        let mut cur = from;
        while cur != lca {
            path.push((self.nodes[cur].parent_link.unwrap(), true));
            cur = self.nodes[cur].parent.unwrap();
        }
        let mut down = Vec::new();
        let mut cur = to;
        while cur != lca {
            down.push((self.nodes[cur].parent_link.unwrap(), false));
            cur = self.nodes[cur].parent.unwrap();
        }
        down.reverse();
        path.extend(down);
        path
    }
}

/// Stage one: build the tree structure from the document. Expressions stay
/// as raw text; no schema information is consulted.
pub fn build_initial_ast(doc: &QueryDocument, _schema: &Schema) -> Result<Ast, AstError> {
    let mut by_id = HashMap::new();
    let mut order: Vec<usize> = Vec::new();

    // Order nodes parent-before-child starting from the main node.
    let main_pos = doc
        .nodes
        .iter()
        .position(|n| n.main)
        .ok_or_else(|| AstError::Structure("no main node".into()))?;
    let mut children_of: HashMap<&str, Vec<&crate::document::LinkRecord>> = HashMap::new();
    for l in doc.links.iter().filter(|l| l.kind != LinkKind::Reference) {
        children_of.entry(l.source.as_str()).or_default().push(l);
    }
    for links in children_of.values_mut() {
        links.sort_by_key(|l| l.order);
    }
    let mut stack = vec![main_pos];
    let mut seen = vec![false; doc.nodes.len()];
    while let Some(pos) = stack.pop() {
        if seen[pos] {
            return Err(AstError::Structure(format!(
                "node `{}` is reachable twice",
                doc.nodes[pos].id
            )));
        }
        seen[pos] = true;
        order.push(pos);
        if let Some(links) = children_of.get(doc.nodes[pos].id.as_str()) {
            for l in links.iter().rev() {
                let child_pos = doc
                    .nodes
                    .iter()
                    .position(|n| n.id == l.target)
                    .ok_or_else(|| {
                        AstError::Structure(format!("link target `{}` names no node", l.target))
                    })?;
                stack.push(child_pos);
            }
        }
    }
    if order.len() != doc.nodes.len() {
        return Err(AstError::Structure(
            "not all nodes are connected to the main node".into(),
        ));
    }

    let mut nodes = Vec::with_capacity(doc.nodes.len());
    for (idx, &pos) in order.iter().enumerate() {
        let n = &doc.nodes[pos];
        by_id.insert(n.id.clone(), idx);
        let (class_variable, hidden) = match &n.class_variable {
            Some(v) => {
                let stripped = v.trim_start_matches('?');
                (Some(stripped.to_string()), v.starts_with("??"))
            }
            None => (None, false),
        };
        nodes.push(AstNode {
            id: n.id.clone(),
            main: n.main,
            node_type: n.node_type,
            class_name: n.class_name.clone(),
            class_entity: None,
            class_variable,
            class_variable_hidden: hidden,
            instance_alias: n.instance_alias.clone(),
            instance_resource: n.instance_resource.clone(),
            indirect_membership: n.indirect_membership,
            distinct: n.distinct,
            fields: n
                .fields
                .iter()
                .map(|f| AstField {
                    expr: AstExpr::raw(&f.expr),
                    alias: f.alias.clone(),
                    require_values: f.require_values,
                    helper: f.helper,
                    label_service: f.label_service,
                    order: f.order,
                })
                .collect(),
            aggregations: n
                .aggregations
                .iter()
                .map(|a| AstAggregation {
                    expr: AstExpr::raw(&a.expr),
                    alias: a.alias.clone(),
                    order: a.order,
                })
                .collect(),
            conditions: n
                .conditions
                .iter()
                .map(|c| AstCondition {
                    expr: AstExpr::raw(&c.expr),
                    form: c.form,
                    order: c.order,
                })
                .collect(),
            group_by: n.group_by.iter().map(|g| AstExpr::raw(g)).collect(),
            order_by: n
                .order_by
                .iter()
                .map(|o| AstOrderBy {
                    expr: AstExpr::raw(&o.expr),
                    descending: o.descending,
                })
                .collect(),
            limit: n.limit,
            offset: n.offset,
            full_sparql: n.full_sparql.clone(),
            full_sparql_is_subquery: n.full_sparql_is_subquery,
            parent: None,
            parent_link: None,
            children: Vec::new(),
        });
        // Fields and compartments keep visual order.
        nodes[idx].fields.sort_by_key(|f| f.order);
        nodes[idx].aggregations.sort_by_key(|a| a.order);
        nodes[idx].conditions.sort_by_key(|c| c.order);
    }

    let mut links = Vec::new();
    let mut ref_links = Vec::new();
    let mut doc_links: Vec<&crate::document::LinkRecord> = doc.links.iter().collect();
    doc_links.sort_by_key(|l| l.order);
    for l in doc_links {
        let path = match l.path.as_str() {
            "++" => LinkPath::Free,
            "==" => LinkPath::SameInstance,
            other => LinkPath::Path(AstExpr::raw(other)),
        };
        let source = by_id[&l.source];
        let target = by_id[&l.target];
        if l.kind == LinkKind::Reference {
            ref_links.push(RefLink {
                id: l.id.clone(),
                source,
                target,
                path,
                inverse: l.inverse,
                negated: l.mode == LinkMode::Negated,
                order: l.order,
            });
        } else {
            let link_idx = links.len();
            links.push(AstLink {
                id: l.id.clone(),
                parent: source,
                child: target,
                path,
                inverse: l.inverse,
                mode: l.mode,
                kind: l.kind,
                existence_check: l.existence_check,
                global: l.global,
                order: l.order,
            });
            nodes[target].parent = Some(source);
            nodes[target].parent_link = Some(link_idx);
            nodes[source].children.push(target);
        }
    }

    Ok(Ast {
        stage: Stage::Initial,
        nodes,
        links,
        ref_links,
        root: 0,
        by_id,
    })
}

/// Stage two: parse every expression, resolve class names against the schema
/// and build the full symbol table with all names resolved.
pub fn complete_ast(
    mut ast: Ast,
    schema: &Schema,
    diags: &mut Diagnostics,
) -> Result<(Ast, SymbolTable), AstError> {
    let parse = |slot: &mut AstExpr, pos: ExprPosition| -> Result<(), AstError> {
        let parsed = expr::parse_expression(&slot.text, pos).map_err(|e| AstError::Expression {
            text: slot.text.clone(),
            source: e,
        })?;
        slot.parsed = Some(parsed);
        Ok(())
    };

    for node in &mut ast.nodes {
        for f in &mut node.fields {
            parse(&mut f.expr, ExprPosition::Field)?;
        }
        for a in &mut node.aggregations {
            parse(&mut a.expr, ExprPosition::Aggregation)?;
        }
        for c in &mut node.conditions {
            parse(&mut c.expr, ExprPosition::Condition)?;
        }
        for g in &mut node.group_by {
            parse(g, ExprPosition::GroupBy)?;
        }
        for o in &mut node.order_by {
            parse(&mut o.expr, ExprPosition::OrderBy)?;
        }
    }
    for link in &mut ast.links {
        if let LinkPath::Path(slot) = &mut link.path {
            parse(slot, ExprPosition::LinkPath)?;
        }
    }
    for link in &mut ast.ref_links {
        if let LinkPath::Path(slot) = &mut link.path {
            parse(slot, ExprPosition::LinkPath)?;
        }
    }

    // Resolve node classes.
    for node in &mut ast.nodes {
        if let Some(name) = node.class_name.clone() {
            match schema::resolve_entity(schema, &name, KindHint::Class) {
                Ok((ResolvedEntity::Class(entity), _)) => node.class_entity = Some(entity),
                Ok((ResolvedEntity::Unknown {
                    iri,
                    prefix,
                    local_name,
                }, _)) => {
                    diags.warning_at(
                        "unknown-class",
                        format!("class `{name}` is not described by the schema"),
                        &node.id,
                    );
                    node.class_entity = Some(EntityRef {
                        iri,
                        prefix: prefix.unwrap_or_default(),
                        local_name: local_name.clone(),
                        display_name: local_name,
                        entity_kind: schema::EntityKind::Class,
                        is_local: false,
                    });
                }
                Ok((ResolvedEntity::Property(p), _)) => {
                    diags.error_at(
                        "class-spec",
                        format!("`{name}` names a property, not a class"),
                        &node.id,
                    );
                    node.class_entity = Some(p.entity);
                }
                Ok((ResolvedEntity::NotFound, _)) | Err(_) => {
                    diags.error_at(
                        "unknown-class",
                        format!("class `{name}` cannot be resolved"),
                        &node.id,
                    );
                }
            }
        }
    }

    let table = crate::symbols::build_symbol_table(&mut ast, schema, diags);
    ast.stage = Stage::Full;
    Ok((ast, table))
}
