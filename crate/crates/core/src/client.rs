//! SPARQL endpoint client: query execution over the SPARQL protocol and
//! decoding of `application/sparql-results+json` responses.

use std::collections::BTreeMap;
use std::time::Duration;

use serde::Deserialize;

#[derive(Debug, thiserror::Error)]
pub enum ClientError {
    #[error("request failed: {0}")]
    Transport(#[from] reqwest::Error),
    #[error("endpoint returned HTTP {status}: {body}")]
    Http { status: u16, body: String },
    #[error("malformed results document: {0}")]
    Decode(#[from] serde_json::Error),
}

#[derive(Debug, Clone)]
pub struct EndpointConfig {
    pub url: String,
    pub timeout: Duration,
    /// HTTP basic credentials, when the endpoint needs them.
    pub credentials: Option<(String, String)>,
}

impl EndpointConfig {
    pub fn new(url: impl Into<String>) -> Self {
        EndpointConfig {
            url: url.into(),
            timeout: Duration::from_secs(60),
            credentials: None,
        }
    }
}

/// One RDF term in a result binding.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Term {
    Uri {
        value: String,
    },
    Literal {
        value: String,
        #[serde(rename = "xml:lang")]
        lang: Option<String>,
        datatype: Option<String>,
    },
    Bnode {
        value: String,
    },
}

impl Term {
    /// Plain text of the term, for table display.
    pub fn lexical(&self) -> &str {
        match self {
            Term::Uri { value } | Term::Literal { value, .. } | Term::Bnode { value } => value,
        }
    }
}

/// Decoded SELECT results: the variable header plus one map per solution.
#[derive(Debug, Clone)]
pub struct ResultTable {
    pub variables: Vec<String>,
    pub rows: Vec<BTreeMap<String, Term>>,
}

#[derive(Deserialize)]
struct ResultsDocument {
    head: Head,
    results: Results,
}

#[derive(Deserialize)]
struct Head {
    #[serde(default)]
    vars: Vec<String>,
}

#[derive(Deserialize)]
struct Results {
    bindings: Vec<BTreeMap<String, Term>>,
}

/// Decode a `application/sparql-results+json` document.
pub fn parse_results(bytes: &[u8]) -> Result<ResultTable, serde_json::Error> {
    let doc: ResultsDocument = serde_json::from_slice(bytes)?;
    Ok(ResultTable {
        variables: doc.head.vars,
        rows: doc.results.bindings,
    })
}

/// POST a SELECT query to the endpoint and decode the JSON results.
pub fn execute_query(config: &EndpointConfig, query: &str) -> Result<ResultTable, ClientError> {
    let client = reqwest::blocking::Client::builder()
        .timeout(config.timeout)
        .build()?;
    let mut request = client
        .post(&config.url)
        .header("Accept", "application/sparql-results+json")
        .form(&[("query", query)]);
    if let Some((user, password)) = &config.credentials {
        request = request.basic_auth(user, Some(password));
    }
    let response = request.send()?;
    let status = response.status();
    let body = response.text()?;
    if !status.is_success() {
        return Err(ClientError::Http {
            status: status.as_u16(),
            body,
        });
    }
    Ok(parse_results(body.as_bytes())?)
}

/// Output formats of the `run` command.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ResultFormat {
    Table,
    Csv,
    Json,
}

pub fn format_results(table: &ResultTable, format: ResultFormat) -> String {
    match format {
        ResultFormat::Table => format_table(table),
        ResultFormat::Csv => format_csv(table),
        ResultFormat::Json => format_json(table),
    }
}

fn cell<'a>(row: &'a BTreeMap<String, Term>, var: &str) -> &'a str {
    row.get(var).map(Term::lexical).unwrap_or("")
}

fn format_table(table: &ResultTable) -> String {
    let widths: Vec<usize> = table
        .variables
        .iter()
        .map(|v| {
            table
                .rows
                .iter()
                .map(|r| cell(r, v).chars().count())
                .chain([v.chars().count()])
                .max()
                .unwrap_or(0)
        })
        .collect();
    let mut out = String::new();
    let header: Vec<String> = table
        .variables
        .iter()
        .zip(&widths)
        .map(|(v, w)| format!("{v:<w$}"))
        .collect();
    out.push_str(&header.join(" | "));
    out.push('\n');
    let rule: Vec<String> = widths.iter().map(|w| "-".repeat(*w)).collect();
    out.push_str(&rule.join("-+-"));
    out.push('\n');
    for row in &table.rows {
        let cells: Vec<String> = table
            .variables
            .iter()
            .zip(&widths)
            .map(|(v, w)| format!("{:<w$}", cell(row, v)))
            .collect();
        out.push_str(cells.join(" | ").trim_end());
        out.push('\n');
    }
    out
}

fn format_csv(table: &ResultTable) -> String {
    let quote = |s: &str| -> String {
        if s.contains([',', '"', '\n']) {
            format!("\"{}\"", s.replace('"', "\"\""))
        } else {
            s.to_string()
        }
    };
    let mut out = table
        .variables
        .iter()
        .map(|v| quote(v))
        .collect::<Vec<_>>()
        .join(",");
    out.push('\n');
    for row in &table.rows {
        let line: Vec<String> = table
            .variables
            .iter()
            .map(|v| quote(cell(row, v)))
            .collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    out
}

fn format_json(table: &ResultTable) -> String {
    let rows: Vec<serde_json::Value> = table
        .rows
        .iter()
        .map(|row| {
            let map: serde_json::Map<String, serde_json::Value> = table
                .variables
                .iter()
                .filter_map(|v| {
                    row.get(v)
                        .map(|t| (v.clone(), serde_json::Value::String(t.lexical().to_string())))
                })
                .collect();
            serde_json::Value::Object(map)
        })
        .collect();
    serde_json::to_string_pretty(&serde_json::json!({
        "variables": table.variables,
        "rows": rows,
    }))
    .expect("result table always serializes")
}

#[cfg(test)]
mod tests {
    use super::*;

    const DOC: &str = r#"{
        "head": {"vars": ["name", "age"]},
        "results": {"bindings": [
            {"name": {"type": "literal", "value": "Alice", "xml:lang": "en"},
             "age": {"type": "literal", "value": "41",
                     "datatype": "http://www.w3.org/2001/XMLSchema#integer"}},
            {"name": {"type": "uri", "value": "http://example.org/bob"}}
        ]}
    }"#;

    #[test]
    fn parses_results_json() {
        let table = parse_results(DOC.as_bytes()).unwrap();
        assert_eq!(table.variables, ["name", "age"]);
        assert_eq!(table.rows.len(), 2);
        assert_eq!(table.rows[0]["name"].lexical(), "Alice");
        assert_eq!(table.rows[0]["age"].lexical(), "41");
        assert!(table.rows[1].get("age").is_none());
    }

    #[test]
    fn formats_csv_with_quoting() {
        let mut table = parse_results(DOC.as_bytes()).unwrap();
        if let Some(Term::Literal { value, .. }) = table.rows[0].get_mut("name") {
            *value = "Alice, \"A\"".to_string();
        }
        let csv = format_csv(&table);
        assert!(csv.starts_with("name,age\n"));
        assert!(csv.contains("\"Alice, \"\"A\"\"\",41"));
    }

    #[test]
    fn formats_table_and_json() {
        let table = parse_results(DOC.as_bytes()).unwrap();
        let text = format_results(&table, ResultFormat::Table);
        assert!(text.lines().next().unwrap().contains("name"));
        let json = format_results(&table, ResultFormat::Json);
        let value: serde_json::Value = serde_json::from_str(&json).unwrap();
        assert_eq!(value["rows"][0]["name"], "Alice");
    }
}
