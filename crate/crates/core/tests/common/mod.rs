//! Shared helpers for the integration test suites.
#![allow(dead_code)] // each test binary uses a different subset

pub mod matrix;

use std::fs;
use std::path::Path;

use vqc::corpus::{self, CorpusCase};
use vqc::generate::Params;
use vqc::schema::{self, Schema};
use vqc::{compile, CompileError, CompileOutput};

/// Load the schema a case compiles against (the default fixture schema unless
/// the case metadata names another one).
pub fn case_schema(case: &CorpusCase) -> Schema {
    let file = case
        .meta
        .schema
        .clone()
        .unwrap_or_else(|| "mini-hospital.schema.json".to_string());
    load_schema(&corpus::workspace_fixtures_dir().join(file))
}

pub fn load_schema(path: &Path) -> Schema {
    let bytes = fs::read(path).unwrap_or_else(|e| panic!("read {}: {e}", path.display()));
    let (schema, diags) = schema::load_schema(&bytes).expect("schema loads");
    assert!(!diags.has_errors(), "schema diagnostics: {diags:?}");
    schema
}

/// Generation parameters of a case: defaults overlaid with the metadata ones.
pub fn case_params(case: &CorpusCase) -> Params {
    match &case.meta.params {
        Some(value) => {
            Params::from_json(value.to_string().as_bytes()).expect("params override parses")
        }
        None => Params::default(),
    }
}

pub fn compile_case(case: &CorpusCase) -> Result<CompileOutput, CompileError> {
    let schema = case_schema(case);
    let params = case_params(case);
    compile(&case.document, &schema, &params)
}

pub fn compile_case_ok(case: &CorpusCase) -> CompileOutput {
    compile_case(case).unwrap_or_else(|e| {
        panic!(
            "case {} should compile: {} / {:?}",
            case.name, e.message, e.diagnostics
        )
    })
}

pub fn all_cases() -> Vec<CorpusCase> {
    corpus::load_corpus(&corpus::workspace_corpus_dir()).expect("corpus loads")
}
