//! Domain schemas and feature encoding.
//!
//! This module owns every schema the pipeline touches: the nine data-point
//! categories the collectors feed, the per-course student record with its
//! mark brackets and sum identities, the free-text feedback document, and the
//! feature specifications that turn records into numeric rows for model
//! training.

mod features;
mod record;
mod schema;
mod taxonomy;

pub use features::{
    encode_features, FeatureDef, FeatureKind, FeatureSnapshot, FeatureSpec, LabeledRow,
};
pub use record::{
    validate_record, FeedbackDocument, Strictness, StudentRecord, ValidationBounds, Violation,
};
pub use schema::{feedback_schema, student_record_schema, FieldSchema, TableSchema};
pub use taxonomy::{
    categorize_factor, data_point_categories, CategoryCode, DataPointCategory, FactorCategory,
};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CatalogError {
    #[error("unknown categorical level {level:?} for feature {feature:?}")]
    UnknownLevel { feature: String, level: String },
    #[error("record has no field named {0:?}")]
    UnknownField(String),
    #[error("missing target {0:?}")]
    MissingTarget(String),
    #[error("variable {0:?} is not registered in any data-point category")]
    UnregisteredVariable(String),
    #[error("schema parse error at line {line}: {message}")]
    SchemaParse { line: usize, message: String },
    #[error("unsupported schema version {0}")]
    SchemaVersion(u32),
}

/// Value kinds a data-point variable can carry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ValueKind {
    Numeric,
    Text,
    Boolean,
    Categorical,
    Timestamp,
}

impl ValueKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ValueKind::Numeric => "numeric",
            ValueKind::Text => "text",
            ValueKind::Boolean => "boolean",
            ValueKind::Categorical => "categorical",
            ValueKind::Timestamp => "timestamp",
        }
    }

    pub fn parse(s: &str) -> Option<ValueKind> {
        match s {
            "numeric" => Some(ValueKind::Numeric),
            "text" => Some(ValueKind::Text),
            "boolean" => Some(ValueKind::Boolean),
            "categorical" => Some(ValueKind::Categorical),
            "timestamp" => Some(ValueKind::Timestamp),
            _ => None,
        }
    }
}
