//! Compiler from visual diagrammatic query documents to SPARQL 1.1 SELECT text.
//!
//! The pipeline takes a query document (a JSON encoding of a UML-style visual
//! query graph), a data schema (classes, properties, namespaces) and a set of
//! generation parameters, and produces an executable SPARQL query:
//!
//! 1. [`document`] parses and validates the query document,
//! 2. [`ast`] builds the query abstract syntax tree in two stages,
//! 3. [`expr`] parses the textual expressions placed on diagram elements,
//! 4. [`symbols`] maintains per-node name visibility and resolves names,
//! 5. [`generate`] assigns SPARQL variables, builds the generation model and
//!    renders the final query text,
//! 6. [`client`] executes generated queries against SPARQL endpoints.

pub mod ast;
pub mod client;
pub mod corpus;
pub mod diag;
pub mod document;
pub mod expr;
pub mod generate;
pub mod schema;
pub mod symbols;
pub mod token;

use diag::Diagnostics;
use generate::Params;

/// Result of a full compilation run.
#[derive(Debug)]
pub struct CompileOutput {
    pub sparql: String,
    pub diagnostics: Diagnostics,
}

/// Error of a full compilation run: diagnostics collected up to the failure.
#[derive(Debug, thiserror::Error)]
#[error("{message}")]
pub struct CompileError {
    pub message: String,
    pub diagnostics: Diagnostics,
}

/// Compile a query document against a schema with the given parameters.
///
/// This is the front door used by the CLI, the corpus runner and the Python
/// bindings; it wires the whole pipeline together.
pub fn compile(
    document_bytes: &[u8],
    schema: &schema::Schema,
    params: &Params,
) -> Result<CompileOutput, CompileError> {
    let doc = document::parse_query_document(document_bytes).map_err(|e| CompileError {
        message: e.to_string(),
        diagnostics: Diagnostics::new(),
    })?;
    compile_document(&doc, schema, params)
}

/// Compile an already-parsed query document.
pub fn compile_document(
    doc: &document::QueryDocument,
    schema: &schema::Schema,
    params: &Params,
) -> Result<CompileOutput, CompileError> {
    let mut diagnostics = document::validate_document(doc, schema);
    if diagnostics.has_errors() {
        return Err(CompileError {
            message: "query document validation failed".into(),
            diagnostics,
        });
    }
    let ast = ast::build_initial_ast(doc, schema).map_err(|e| CompileError {
        message: e.to_string(),
        diagnostics: diagnostics.clone(),
    })?;
    let (ast, table) = ast::complete_ast(ast, schema, &mut diagnostics).map_err(|e| {
        CompileError {
            message: e.to_string(),
            diagnostics: diagnostics.clone(),
        }
    })?;
    if diagnostics.has_errors() {
        return Err(CompileError {
            message: "name resolution failed".into(),
            diagnostics,
        });
    }
    let vars = generate::assign_variables(&ast, &table, &mut diagnostics).map_err(|e| {
        CompileError {
            message: e.to_string(),
            diagnostics: diagnostics.clone(),
        }
    })?;
    let model = generate::build_generation_model(&ast, &table, &vars, params, schema, &mut diagnostics)
        .map_err(|e| CompileError {
            message: e.to_string(),
            diagnostics: diagnostics.clone(),
        })?;
    if diagnostics.has_errors() {
        return Err(CompileError {
            message: "query generation failed".into(),
            diagnostics,
        });
    }
    let sparql = generate::render_sparql(&model, params, schema);
    Ok(CompileOutput {
        sparql,
        diagnostics,
    })
}
