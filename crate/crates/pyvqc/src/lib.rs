//! Python bindings: compile, validate and explain visual query documents.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

use vqc::diag::Severity;
use vqc::generate::Params;
use vqc::schema::{load_schema, Schema};

/// A loaded data schema.
#[pyclass(name = "Schema")]
struct PySchema {
    inner: Schema,
}

#[pymethods]
impl PySchema {
    /// Load a schema from its JSON text.
    #[new]
    fn new(text: &str) -> PyResult<Self> {
        let (inner, _diags) =
            load_schema(text.as_bytes()).map_err(|e| PyValueError::new_err(e.to_string()))?;
        Ok(PySchema { inner })
    }
}

fn parse_params(params_json: Option<&str>) -> PyResult<Params> {
    match params_json {
        Some(text) => Params::from_json(text.as_bytes())
            .map_err(|e| PyValueError::new_err(format!("params: {e}"))),
        None => Ok(Params::default()),
    }
}

fn diagnostics_list(py: Python<'_>, diags: &vqc::diag::Diagnostics) -> PyResult<Vec<Py<PyDict>>> {
    let mut out = Vec::new();
    for d in diags.iter() {
        let entry = PyDict::new_bound(py);
        let severity = match d.severity {
            Severity::Error => "error",
            Severity::Warning => "warning",
        };
        entry.set_item("severity", severity)?;
        entry.set_item("code", &d.code)?;
        entry.set_item("message", &d.message)?;
        entry.set_item("element", d.element.as_deref())?;
        out.push(entry.unbind());
    }
    Ok(out)
}

/// Compile a query document to SPARQL text.
///
/// Returns a dict with `sparql` and `diagnostics`.
#[pyfunction]
#[pyo3(signature = (document, schema, params=None))]
fn compile<'py>(
    py: Python<'py>,
    document: &str,
    schema: &PySchema,
    params: Option<&str>,
) -> PyResult<Py<PyDict>> {
    let params = parse_params(params)?;
    match vqc::compile(document.as_bytes(), &schema.inner, &params) {
        Ok(output) => {
            let result = PyDict::new_bound(py);
            result.set_item("sparql", output.sparql)?;
            result.set_item("diagnostics", diagnostics_list(py, &output.diagnostics)?)?;
            Ok(result.unbind())
        }
        Err(e) => Err(PyValueError::new_err(format!(
            "{e}: {:?}",
            e.diagnostics.errors().collect::<Vec<_>>()
        ))),
    }
}

/// Validate a query document; returns the list of diagnostics.
#[pyfunction]
#[pyo3(signature = (document, schema, params=None))]
fn validate<'py>(
    py: Python<'py>,
    document: &str,
    schema: &PySchema,
    params: Option<&str>,
) -> PyResult<Vec<Py<PyDict>>> {
    let params = parse_params(params)?;
    match vqc::compile(document.as_bytes(), &schema.inner, &params) {
        Ok(output) => diagnostics_list(py, &output.diagnostics),
        Err(e) => diagnostics_list(py, &e.diagnostics),
    }
}

/// The per-node symbol table of a query document, as a JSON string.
#[pyfunction]
fn explain_symbols(document: &str, schema: &PySchema) -> PyResult<String> {
    let doc = vqc::document::parse_query_document(document.as_bytes())
        .map_err(|e| PyValueError::new_err(e.to_string()))?;
    let mut diagnostics = vqc::document::validate_document(&doc, &schema.inner);
    if diagnostics.has_errors() {
        return Err(PyValueError::new_err("query document validation failed"));
    }
    let ast = vqc::ast::build_initial_ast(&doc, &schema.inner)
        .map_err(|e| PyValueError::new_err(e.to_string()))?;
    let (_ast, table) = vqc::ast::complete_ast(ast, &schema.inner, &mut diagnostics)
        .map_err(|e| PyValueError::new_err(e.to_string()))?;
    serde_json::to_string_pretty(&table.dump_json())
        .map_err(|e| PyValueError::new_err(e.to_string()))
}

#[pymodule]
fn pyvqc(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PySchema>()?;
    m.add_function(wrap_pyfunction!(compile, m)?)?;
    m.add_function(wrap_pyfunction!(validate, m)?)?;
    m.add_function(wrap_pyfunction!(explain_symbols, m)?)?;
    Ok(())
}
