//! Line-oriented table schema files.
//!
//! Format, one field per line after a version header:
//!
//! ```text
//! v1
//! student_id:text::
//! quiz_5:numeric:0:5
//! ```
//!
//! `kind` is one of numeric/text/boolean/categorical/timestamp; `min`/`max`
//! are optional numeric bounds and stay empty for non-numeric fields.

use super::{CatalogError, ValueKind};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct FieldSchema {
    pub name: String,
    pub kind: ValueKind,
    pub min: Option<f64>,
    pub max: Option<f64>,
}

impl FieldSchema {
    pub fn new(name: &str, kind: ValueKind) -> Self {
        FieldSchema {
            name: name.to_string(),
            kind,
            min: None,
            max: None,
        }
    }

    pub fn bounded(name: &str, min: f64, max: f64) -> Self {
        FieldSchema {
            name: name.to_string(),
            kind: ValueKind::Numeric,
            min: Some(min),
            max: Some(max),
        }
    }

    pub fn nonnegative(name: &str) -> Self {
        FieldSchema {
            name: name.to_string(),
            kind: ValueKind::Numeric,
            min: Some(0.0),
            max: None,
        }
    }
}

/// Ordered field list for one importable table.
#[derive(Debug, Clone, PartialEq)]
pub struct TableSchema {
    pub version: u32,
    pub fields: Vec<FieldSchema>,
}

impl TableSchema {
    pub fn new(fields: Vec<FieldSchema>) -> Self {
        TableSchema {
            version: SCHEMA_VERSION,
            fields,
        }
    }

    pub fn field(&self, name: &str) -> Option<&FieldSchema> {
        self.fields.iter().find(|f| f.name == name)
    }

    /// Render to the line-oriented file format.
    pub fn render(&self) -> String {
        let mut out = format!("v{}\n", self.version);
        for f in &self.fields {
            let min = f.min.map(|v| v.to_string()).unwrap_or_default();
            let max = f.max.map(|v| v.to_string()).unwrap_or_default();
            out.push_str(&format!("{}:{}:{}:{}\n", f.name, f.kind.as_str(), min, max));
        }
        out
    }

    /// Parse the line-oriented file format.
    pub fn parse(text: &str) -> Result<TableSchema, CatalogError> {
        let mut lines = text.lines().enumerate();
        let (_, header) = lines.next().ok_or(CatalogError::SchemaParse {
            line: 1,
            message: "empty schema file".to_string(),
        })?;
        let version: u32 = header
            .trim()
            .strip_prefix('v')
            .and_then(|v| v.parse().ok())
            .ok_or(CatalogError::SchemaParse {
                line: 1,
                message: format!("expected version header like 'v1', got {header:?}"),
            })?;
        if version != SCHEMA_VERSION {
            return Err(CatalogError::SchemaVersion(version));
        }
        let mut fields = Vec::new();
        for (idx, line) in lines {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let parts: Vec<&str> = line.split(':').collect();
            if parts.len() != 4 {
                return Err(CatalogError::SchemaParse {
                    line: idx + 1,
                    message: format!("expected name:kind:min:max, got {line:?}"),
                });
            }
            let kind = ValueKind::parse(parts[1]).ok_or(CatalogError::SchemaParse {
                line: idx + 1,
                message: format!("unknown value kind {:?}", parts[1]),
            })?;
            let parse_bound = |s: &str| -> Result<Option<f64>, CatalogError> {
                if s.is_empty() {
                    Ok(None)
                } else {
                    s.parse().map(Some).map_err(|_| CatalogError::SchemaParse {
                        line: idx + 1,
                        message: format!("bad bound {s:?}"),
                    })
                }
            };
            fields.push(FieldSchema {
                name: parts[0].to_string(),
                kind,
                min: parse_bound(parts[2])?,
                max: parse_bound(parts[3])?,
            });
        }
        Ok(TableSchema {
            version,
            fields,
        })
    }
}

/// Built-in schema for the per-course marks table.
pub fn student_record_schema() -> TableSchema {
    TableSchema::new(vec![
        FieldSchema::new("student_id", ValueKind::Text),
        FieldSchema::bounded("gpa", 0.0, 5.0),
        FieldSchema::new("major", ValueKind::Categorical),
        FieldSchema::nonnegative("passed_hours"),
        FieldSchema::bounded("absence_rate", 0.0, 1.0),
        FieldSchema::bounded("quiz_5", 0.0, 5.0),
        FieldSchema::bounded("mid1_15", 0.0, 15.0),
        FieldSchema::bounded("mid2_20", 0.0, 20.0),
        FieldSchema::bounded("tutorial_2", 0.0, 2.0),
        FieldSchema::bounded("homework_3", 0.0, 3.0),
        FieldSchema::bounded("lecture_total_45", 0.0, 45.0),
        FieldSchema::bounded("lab_total_10", 0.0, 10.0),
        FieldSchema::bounded("final_lab_5", 0.0, 5.0),
        FieldSchema::bounded("final_exam", 0.0, 40.0),
        FieldSchema::bounded("total_100", 0.0, 100.0),
        FieldSchema::new("grade", ValueKind::Categorical),
        FieldSchema::bounded("status", 0.0, 1.0),
        FieldSchema::new("semester", ValueKind::Categorical),
    ])
}

/// Built-in schema for the feedback-form export.
pub fn feedback_schema() -> TableSchema {
    TableSchema::new(vec![
        FieldSchema::new("student_id", ValueKind::Text),
        FieldSchema::new("q1", ValueKind::Text),
        FieldSchema::new("q2", ValueKind::Text),
        FieldSchema::new("q3", ValueKind::Text),
    ])
}
