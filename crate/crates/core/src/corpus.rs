//! Conformance corpus loader: each case directory holds a query document and
//! its expected artifacts.
//!
//! Layout of one case under the corpus root:
//!
//! ```text
//! corpus/<name>/query.json          the query document
//! corpus/<name>/expected.rq         expected SPARQL text (token compared)
//! corpus/<name>/expected.rows.json  expected result rows over the fixture data
//! corpus/<name>/meta.json           optional: schema/params overrides, notes
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use serde::Deserialize;

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("malformed {path}: {source}")]
    Json {
        path: String,
        source: serde_json::Error,
    },
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct CaseMeta {
    /// Schema file relative to the fixtures directory; the default schema
    /// applies when absent.
    #[serde(default)]
    pub schema: Option<String>,
    /// Generation parameter overrides for this case.
    #[serde(default)]
    pub params: Option<serde_json::Value>,
    /// The case is expected to fail compilation with this diagnostic code.
    #[serde(default)]
    pub expect_error: Option<String>,
    #[serde(default)]
    pub description: Option<String>,
    /// Tags grouping cases for the test suites (e.g. "semantic").
    #[serde(default)]
    pub tags: Vec<String>,
}

#[derive(Debug)]
pub struct CorpusCase {
    pub name: String,
    pub dir: PathBuf,
    pub document: Vec<u8>,
    pub expected_sparql: Option<String>,
    pub expected_rows: Option<serde_json::Value>,
    pub meta: CaseMeta,
}

impl CorpusCase {
    pub fn has_tag(&self, tag: &str) -> bool {
        self.meta.tags.iter().any(|t| t == tag)
    }
}

fn read(path: &Path) -> Result<Vec<u8>, CorpusError> {
    fs::read(path).map_err(|source| CorpusError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn load_case(dir: &Path) -> Result<CorpusCase, CorpusError> {
    let name = dir
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    let document = read(&dir.join("query.json"))?;
    let expected_sparql = match fs::read_to_string(dir.join("expected.rq")) {
        Ok(text) => Some(text),
        Err(_) => None,
    };
    let expected_rows = match read(&dir.join("expected.rows.json")) {
        Ok(bytes) => Some(serde_json::from_slice(&bytes).map_err(|source| CorpusError::Json {
            path: dir.join("expected.rows.json").display().to_string(),
            source,
        })?),
        Err(_) => None,
    };
    let meta = match read(&dir.join("meta.json")) {
        Ok(bytes) => serde_json::from_slice(&bytes).map_err(|source| CorpusError::Json {
            path: dir.join("meta.json").display().to_string(),
            source,
        })?,
        Err(_) => CaseMeta::default(),
    };
    Ok(CorpusCase {
        name,
        dir: dir.to_path_buf(),
        document,
        expected_sparql,
        expected_rows,
        meta,
    })
}

/// Load every case under the corpus root, sorted by name.
pub fn load_corpus(root: &Path) -> Result<Vec<CorpusCase>, CorpusError> {
    let entries = fs::read_dir(root).map_err(|source| CorpusError::Io {
        path: root.display().to_string(),
        source,
    })?;
    let mut dirs: Vec<PathBuf> = entries
        .filter_map(|e| e.ok())
        .map(|e| e.path())
        .filter(|p| p.is_dir() && p.join("query.json").exists())
        .collect();
    dirs.sort();
    dirs.iter().map(|d| load_case(d)).collect()
}

/// The corpus directory of this repository (tests and the default CLI).
pub fn workspace_corpus_dir() -> PathBuf {
    workspace_root().join("corpus")
}

/// The fixtures directory of this repository.
pub fn workspace_fixtures_dir() -> PathBuf {
    workspace_root().join("fixtures")
}

fn workspace_root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .ancestors()
        .nth(2)
        .expect("crate lives two levels under the workspace root")
        .to_path_buf()
}
