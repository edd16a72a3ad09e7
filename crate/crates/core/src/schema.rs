//! Background data schema: namespaces, classes and properties.
//!
//! The schema supplies the vocabulary for name resolution (by local name,
//! display name, prefixed name or full IRI) and the namespace table for
//! prefix expansion and PREFIX emission.

use std::collections::HashMap;

use serde::Deserialize;

use crate::diag::Diagnostics;

#[derive(Debug, thiserror::Error)]
pub enum SchemaError {
    #[error("malformed schema document: {0}")]
    Format(#[from] serde_json::Error),
    #[error("duplicate namespace prefix `{0}`")]
    DuplicatePrefix(String),
    #[error("namespace `{0}` has an empty IRI")]
    EmptyNamespaceIri(String),
    #[error("unknown namespace prefix `{0}`")]
    UnknownPrefix(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Namespace {
    /// Short prefix; empty for the default namespace.
    pub prefix: String,
    pub iri: String,
    pub is_default: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub enum EntityKind {
    Class,
    Property,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, Deserialize)]
pub enum PropertyType {
    #[serde(rename = "DATA_PROPERTY")]
    DataProperty,
    #[serde(rename = "OBJECT_PROPERTY")]
    ObjectProperty,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EntityRef {
    pub iri: String,
    pub prefix: String,
    pub local_name: String,
    pub display_name: String,
    pub entity_kind: EntityKind,
    /// True when the entity belongs to the loaded schema.
    pub is_local: bool,
}

/// Property description; extends the plain entity reference with typing,
/// cardinality and optional usage statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct PropertyInfo {
    pub entity: EntityRef,
    pub data_type: Option<String>,
    /// -1 means unbounded.
    pub max_cardinality: i64,
    pub inverse_max_cardinality: i64,
    pub property_type: PropertyType,
    pub object_cnt: u64,
    pub data_cnt: u64,
}

impl PropertyInfo {
    pub fn is_single_valued(&self) -> bool {
        self.max_cardinality == 1
    }
}

#[derive(Debug)]
pub struct Schema {
    pub name: String,
    pub namespaces: Vec<Namespace>,
    classes_by_local: HashMap<String, EntityRef>,
    classes_by_display: HashMap<String, EntityRef>,
    props_by_local: HashMap<String, PropertyInfo>,
    props_by_display: HashMap<String, PropertyInfo>,
    classes_by_iri: HashMap<String, EntityRef>,
    props_by_iri: HashMap<String, PropertyInfo>,
    /// Local names that collided during indexing; plain-name lookup on these
    /// reports an ambiguity diagnostic upstream.
    ambiguous_locals: Vec<String>,
}

/// Outcome of resolving an entity name form against the schema.
#[derive(Debug, Clone, PartialEq)]
pub enum ResolvedEntity {
    Class(EntityRef),
    Property(PropertyInfo),
    /// The name expanded to an IRI that the schema does not know; it is still
    /// usable verbatim in generated SPARQL.
    Unknown {
        iri: String,
        prefix: Option<String>,
        local_name: String,
    },
    NotFound,
}

impl ResolvedEntity {
    pub fn iri(&self) -> Option<&str> {
        match self {
            ResolvedEntity::Class(e) => Some(&e.iri),
            ResolvedEntity::Property(p) => Some(&p.entity.iri),
            ResolvedEntity::Unknown { iri, .. } => Some(iri),
            ResolvedEntity::NotFound => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KindHint {
    Class,
    Property,
    Any,
}

// ---------------------------------------------------------------------------
// Schema file format (External Interfaces)

#[derive(Deserialize)]
#[serde(rename_all = "camelCase")]
struct SchemaDoc {
    #[serde(default)]
    name: String,
    default_namespace: String,
    #[serde(default)]
    namespaces: Vec<NamespaceRec>,
    #[serde(default)]
    classes: Vec<EntityRec>,
    #[serde(default)]
    properties: Vec<EntityRec>,
}

#[derive(Deserialize)]
struct NamespaceRec {
    prefix: String,
    iri: String,
}

#[derive(Deserialize)]
#[serde(rename_all = "camelCase")]
struct EntityRec {
    #[serde(default)]
    iri: Option<String>,
    #[serde(default)]
    prefix: String,
    local_name: String,
    #[serde(default)]
    display_name: Option<String>,
    #[serde(default)]
    data_type: Option<String>,
    #[serde(default = "default_cardinality")]
    max_cardinality: i64,
    #[serde(default = "default_cardinality")]
    inverse_max_cardinality: i64,
    #[serde(default)]
    property_type: Option<PropertyType>,
    #[serde(default)]
    object_cnt: u64,
    #[serde(default)]
    data_cnt: u64,
}

fn default_cardinality() -> i64 {
    -1
}

/// Load and index a schema document. Duplicate local names within a kind are
/// reported as diagnostics; last-wins indexing applies for display names.
pub fn load_schema(document: &[u8]) -> Result<(Schema, Diagnostics), SchemaError> {
    let doc: SchemaDoc = serde_json::from_slice(document)?;
    let mut diagnostics = Diagnostics::new();

    let mut namespaces = Vec::new();
    let mut seen_prefixes = HashMap::new();
    let default_ns = Namespace {
        prefix: String::new(),
        iri: doc.default_namespace.clone(),
        is_default: true,
    };
    if default_ns.iri.is_empty() {
        return Err(SchemaError::EmptyNamespaceIri(String::new()));
    }
    seen_prefixes.insert(String::new(), ());
    namespaces.push(default_ns);
    for ns in &doc.namespaces {
        if ns.iri.is_empty() {
            return Err(SchemaError::EmptyNamespaceIri(ns.prefix.clone()));
        }
        if seen_prefixes.insert(ns.prefix.clone(), ()).is_some() {
            return Err(SchemaError::DuplicatePrefix(ns.prefix.clone()));
        }
        namespaces.push(Namespace {
            prefix: ns.prefix.clone(),
            iri: ns.iri.clone(),
            is_default: false,
        });
    }

    let ns_iri = |prefix: &str| -> Option<&str> {
        namespaces
            .iter()
            .find(|n| n.prefix == prefix)
            .map(|n| n.iri.as_str())
    };

    let mut schema = Schema {
        name: doc.name.clone(),
        namespaces: namespaces.clone(),
        classes_by_local: HashMap::new(),
        classes_by_display: HashMap::new(),
        props_by_local: HashMap::new(),
        props_by_display: HashMap::new(),
        classes_by_iri: HashMap::new(),
        props_by_iri: HashMap::new(),
        ambiguous_locals: Vec::new(),
    };

    for rec in &doc.classes {
        let base = ns_iri(&rec.prefix)
            .ok_or_else(|| SchemaError::UnknownPrefix(rec.prefix.clone()))?;
        let iri = rec
            .iri
            .clone()
            .unwrap_or_else(|| format!("{base}{}", rec.local_name));
        let entity = EntityRef {
            iri: iri.clone(),
            prefix: rec.prefix.clone(),
            local_name: rec.local_name.clone(),
            display_name: rec
                .display_name
                .clone()
                .unwrap_or_else(|| rec.local_name.clone()),
            entity_kind: EntityKind::Class,
            is_local: true,
        };
        if schema.classes_by_local.contains_key(&entity.local_name) {
            diagnostics.warning(
                "duplicate-local-name",
                format!("duplicate class local name `{}`", entity.local_name),
            );
            schema.ambiguous_locals.push(entity.local_name.clone());
        }
        schema
            .classes_by_local
            .insert(entity.local_name.clone(), entity.clone());
        schema
            .classes_by_display
            .insert(entity.display_name.clone(), entity.clone());
        schema.classes_by_iri.insert(iri, entity);
    }

    for rec in &doc.properties {
        let base = ns_iri(&rec.prefix)
            .ok_or_else(|| SchemaError::UnknownPrefix(rec.prefix.clone()))?;
        let iri = rec
            .iri
            .clone()
            .unwrap_or_else(|| format!("{base}{}", rec.local_name));
        let prop = PropertyInfo {
            entity: EntityRef {
                iri: iri.clone(),
                prefix: rec.prefix.clone(),
                local_name: rec.local_name.clone(),
                display_name: rec
                    .display_name
                    .clone()
                    .unwrap_or_else(|| rec.local_name.clone()),
                entity_kind: EntityKind::Property,
                is_local: true,
            },
            data_type: rec.data_type.clone(),
            max_cardinality: rec.max_cardinality,
            inverse_max_cardinality: rec.inverse_max_cardinality,
            property_type: rec.property_type.unwrap_or(if rec.data_type.is_some() {
                PropertyType::DataProperty
            } else {
                PropertyType::ObjectProperty
            }),
            object_cnt: rec.object_cnt,
            data_cnt: rec.data_cnt,
        };
        if schema.props_by_local.contains_key(&prop.entity.local_name) {
            diagnostics.warning(
                "duplicate-local-name",
                format!("duplicate property local name `{}`", prop.entity.local_name),
            );
            schema.ambiguous_locals.push(prop.entity.local_name.clone());
        }
        schema
            .props_by_local
            .insert(prop.entity.local_name.clone(), prop.clone());
        schema
            .props_by_display
            .insert(prop.entity.display_name.clone(), prop.clone());
        schema.props_by_iri.insert(iri, prop);
    }

    Ok((schema, diagnostics))
}

impl Schema {
    pub fn default_namespace(&self) -> &Namespace {
        self.namespaces
            .iter()
            .find(|n| n.is_default)
            .expect("schema always has a default namespace")
    }

    pub fn namespace(&self, prefix: &str) -> Option<&Namespace> {
        self.namespaces.iter().find(|n| n.prefix == prefix)
    }

    /// Concatenate the namespace IRI bound to `prefix` with `local`.
    pub fn expand_name(&self, prefix: &str, local: &str) -> Result<String, SchemaError> {
        let ns = self
            .namespace(prefix)
            .ok_or_else(|| SchemaError::UnknownPrefix(prefix.to_string()))?;
        Ok(format!("{}{}", ns.iri, local))
    }

    /// Find the declared namespace whose IRI is a prefix of `iri`.
    pub fn namespace_of_iri<'s, 'i>(&'s self, iri: &'i str) -> Option<(&'s Namespace, &'i str)> {
        self.namespaces
            .iter()
            .filter(|n| iri.starts_with(&n.iri))
            .max_by_key(|n| n.iri.len())
            .map(|n| (n, &iri[n.iri.len()..]))
    }

    pub fn class_by_local(&self, local: &str) -> Option<&EntityRef> {
        self.classes_by_local.get(local)
    }

    pub fn property_by_local(&self, local: &str) -> Option<&PropertyInfo> {
        self.props_by_local.get(local)
    }

    pub fn class_by_iri(&self, iri: &str) -> Option<&EntityRef> {
        self.classes_by_iri.get(iri)
    }

    pub fn property_by_iri(&self, iri: &str) -> Option<&PropertyInfo> {
        self.props_by_iri.get(iri)
    }

    pub fn is_ambiguous_local(&self, local: &str) -> bool {
        self.ambiguous_locals.iter().any(|n| n == local)
    }

    fn lookup_plain(&self, name: &str, hint: KindHint) -> ResolvedEntity {
        match hint {
            KindHint::Class => self
                .classes_by_local
                .get(name)
                .cloned()
                .map(ResolvedEntity::Class)
                .or_else(|| {
                    self.classes_by_display
                        .get(name)
                        .cloned()
                        .map(ResolvedEntity::Class)
                })
                .unwrap_or(ResolvedEntity::NotFound),
            KindHint::Property => self
                .props_by_local
                .get(name)
                .cloned()
                .map(ResolvedEntity::Property)
                .or_else(|| {
                    self.props_by_display
                        .get(name)
                        .cloned()
                        .map(ResolvedEntity::Property)
                })
                .unwrap_or(ResolvedEntity::NotFound),
            KindHint::Any => {
                let as_prop = self.lookup_plain(name, KindHint::Property);
                if as_prop != ResolvedEntity::NotFound {
                    return as_prop;
                }
                self.lookup_plain(name, KindHint::Class)
            }
        }
    }

    fn lookup_iri(&self, iri: &str, hint: KindHint) -> Option<ResolvedEntity> {
        match hint {
            KindHint::Class => self.classes_by_iri.get(iri).cloned().map(ResolvedEntity::Class),
            KindHint::Property => self
                .props_by_iri
                .get(iri)
                .cloned()
                .map(ResolvedEntity::Property),
            KindHint::Any => self
                .props_by_iri
                .get(iri)
                .cloned()
                .map(ResolvedEntity::Property)
                .or_else(|| self.classes_by_iri.get(iri).cloned().map(ResolvedEntity::Class)),
        }
    }

    fn lookup_display(&self, display: &str, hint: KindHint) -> Option<ResolvedEntity> {
        match hint {
            KindHint::Class => self
                .classes_by_display
                .get(display)
                .cloned()
                .map(ResolvedEntity::Class),
            KindHint::Property => self
                .props_by_display
                .get(display)
                .cloned()
                .map(ResolvedEntity::Property),
            KindHint::Any => self
                .props_by_display
                .get(display)
                .cloned()
                .map(ResolvedEntity::Property)
                .or_else(|| {
                    self.classes_by_display
                        .get(display)
                        .cloned()
                        .map(ResolvedEntity::Class)
                }),
        }
    }
}

/// Resolve an entity name text against the schema.
///
/// Accepted forms: `name`, `prefix:name`, `<iri>`, `[display text]`,
/// `prefix:[display text]` and any of these preceded by a back-tick to mark
/// a constant resource reference. The back-tick mark itself is reported by
/// the second tuple element.
pub fn resolve_entity(
    schema: &Schema,
    name_form: &str,
    hint: KindHint,
) -> Result<(ResolvedEntity, bool), SchemaError> {
    let text = name_form.trim();
    let (text, constant) = match text.strip_prefix('`') {
        Some(rest) => (rest, true),
        None => (text, false),
    };

    // <iri> form
    if let Some(inner) = text.strip_prefix('<').and_then(|t| t.strip_suffix('>')) {
        if let Some(found) = schema.lookup_iri(inner, hint) {
            return Ok((found, constant));
        }
        let (prefix, local) = match schema.namespace_of_iri(inner) {
            Some((ns, local)) => (Some(ns.prefix.clone()), local.to_string()),
            None => (None, inner.to_string()),
        };
        return Ok((
            ResolvedEntity::Unknown {
                iri: inner.to_string(),
                prefix,
                local_name: local,
            },
            constant,
        ));
    }

    // [display] form
    if text.starts_with('[') && text.ends_with(']') {
        let display = &text[1..text.len() - 1];
        return Ok((
            schema
                .lookup_display(display, hint)
                .unwrap_or(ResolvedEntity::NotFound),
            constant,
        ));
    }

    // prefix:name and prefix:[display]
    if let Some(colon) = text.find(':') {
        let prefix = &text[..colon];
        let rest = &text[colon + 1..];
        if schema.namespace(prefix).is_none() {
            return Err(SchemaError::UnknownPrefix(prefix.to_string()));
        }
        if rest.starts_with('[') && rest.ends_with(']') {
            let display = &rest[1..rest.len() - 1];
            return Ok((
                schema
                    .lookup_display(display, hint)
                    .unwrap_or(ResolvedEntity::NotFound),
                constant,
            ));
        }
        let iri = schema.expand_name(prefix, rest)?;
        if let Some(found) = schema.lookup_iri(&iri, hint) {
            return Ok((found, constant));
        }
        return Ok((
            ResolvedEntity::Unknown {
                iri,
                prefix: Some(prefix.to_string()),
                local_name: rest.to_string(),
            },
            constant,
        ));
    }

    Ok((schema.lookup_plain(text, hint), constant))
}
