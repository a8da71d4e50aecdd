//! Semantic tables: mapping runtime function names to semantic event kinds.
//!
//! Trace records may name the runtime function that fired instead of a
//! semantic kind; the table for the traced runtime version resolves those
//! names. Tables are plain text files (one per runtime version) so that new
//! runtime versions only require a new data file, not a code change.

use crate::event::SemanticKind;
use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use thiserror::Error;

/// Maps runtime function names to semantic kinds for one runtime version.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SemanticTable {
    /// Runtime version this table describes, e.g. `1.17.3`.
    pub version: String,
    entries: BTreeMap<String, SemanticKind>,
}

impl SemanticTable {
    /// Resolve a function name to its semantic kind.
    pub fn lookup(&self, function: &str) -> Option<SemanticKind> {
        self.entries.get(function).copied()
    }

    /// All `(function, kind)` entries in name order.
    pub fn entries(&self) -> impl Iterator<Item = (&str, SemanticKind)> {
        self.entries.iter().map(|(f, k)| (f.as_str(), *k))
    }

    /// Parse a table file: a `version <v>` header followed by
    /// tab-separated `<function> <kind>` lines. `#` starts a comment.
    pub fn parse(text: &str) -> Result<SemanticTable, TableError> {
        let mut version: Option<String> = None;
        let mut entries = BTreeMap::new();
        for (no, raw) in text.lines().enumerate() {
            let line_no = no + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if version.is_none() {
                let Some(v) = line.strip_prefix("version ") else {
                    return Err(TableError::Malformed {
                        line_no,
                        message: "expected `version <v>` header".to_string(),
                    });
                };
                version = Some(v.trim().to_string());
                continue;
            }
            let Some((function, kind_name)) = line.split_once('\t') else {
                return Err(TableError::Malformed {
                    line_no,
                    message: "expected `<function>\\t<kind>`".to_string(),
                });
            };
            let Some(kind) = SemanticKind::from_name(kind_name.trim()) else {
                return Err(TableError::Malformed {
                    line_no,
                    message: format!("unknown semantic kind `{}`", kind_name.trim()),
                });
            };
            if entries.insert(function.trim().to_string(), kind).is_some() {
                return Err(TableError::Malformed {
                    line_no,
                    message: format!("duplicate entry for `{}`", function.trim()),
                });
            }
        }
        let Some(version) = version else {
            return Err(TableError::Malformed {
                line_no: 1,
                message: "missing `version` header".to_string(),
            });
        };
        Ok(SemanticTable { version, entries })
    }
}

impl fmt::Display for SemanticTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "version {}", self.version)?;
        for (function, kind) in &self.entries {
            writeln!(f, "{function}\t{kind}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum TableError {
    #[error("no bundled semantic table for runtime version `{0}`")]
    UnsupportedVersion(String),
    #[error("malformed semantic table, line {line_no}: {message}")]
    Malformed { line_no: usize, message: String },
    #[error("cannot read semantic table: {0}")]
    Io(#[from] std::io::Error),
}

/// Bundled tables, compiled into the library.
const BUNDLED: &[(&str, &str)] = &[("1.17.3", include_str!("../tables/1.17.3.txt"))];

/// Runtime version used when the caller does not name one.
pub const DEFAULT_VERSION: &str = "1.17.3";

/// Load the bundled semantic table for a runtime version.
pub fn load_semantic_table(version: &str) -> Result<SemanticTable, TableError> {
    for (v, text) in BUNDLED {
        if *v == version {
            let table = SemanticTable::parse(text)?;
            debug_assert_eq!(table.version, *v);
            return Ok(table);
        }
    }
    Err(TableError::UnsupportedVersion(version.to_string()))
}

/// Load a semantic table for `version`, preferring `<dir>/<version>.txt`
/// when a directory override is given, and falling back to the bundled set.
pub fn load_semantic_table_from(
    dir: Option<&Path>,
    version: &str,
) -> Result<SemanticTable, TableError> {
    if let Some(dir) = dir {
        let path = dir.join(format!("{version}.txt"));
        if path.exists() {
            let text = std::fs::read_to_string(&path)?;
            return SemanticTable::parse(&text);
        }
    }
    load_semantic_table(version)
}
