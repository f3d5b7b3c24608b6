//! Feature specifications and record encoding.

use super::{CatalogError, StudentRecord};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// Kind of a model feature.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureKind {
    Continuous,
    Categorical,
}

/// One feature: a record field name plus its kind.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureDef {
    pub name: String,
    pub kind: FeatureKind,
}

impl FeatureDef {
    pub fn continuous(name: &str) -> Self {
        FeatureDef {
            name: name.to_string(),
            kind: FeatureKind::Continuous,
        }
    }

    pub fn categorical(name: &str) -> Self {
        FeatureDef {
            name: name.to_string(),
            kind: FeatureKind::Categorical,
        }
    }
}

/// An ordered feature list, a target, and frozen categorical dictionaries.
///
/// Dictionaries are fitted once from the records available at spec-fit time
/// and never updated afterwards: encoding a record whose categorical level is
/// missing from the dictionary is an error, not an extension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSpec {
    pub features: Vec<FeatureDef>,
    pub target_name: String,
    /// feature name -> ordered levels; a level's index is its dense code.
    pub dictionaries: BTreeMap<String, Vec<String>>,
}

impl FeatureSpec {
    /// Fit a spec: freeze one dictionary per categorical feature from the
    /// levels observed in `records`, in first-seen order.
    pub fn fit(
        features: Vec<FeatureDef>,
        target_name: &str,
        records: &[StudentRecord],
    ) -> FeatureSpec {
        let mut dictionaries: BTreeMap<String, Vec<String>> = BTreeMap::new();
        for def in features.iter().filter(|d| d.kind == FeatureKind::Categorical) {
            let mut levels: Vec<String> = Vec::new();
            for rec in records {
                if let Some(level) = rec.categorical_field(&def.name) {
                    if !levels.iter().any(|l| l == level) {
                        levels.push(level.to_string());
                    }
                }
            }
            dictionaries.insert(def.name.clone(), levels);
        }
        FeatureSpec {
            features,
            target_name: target_name.to_string(),
            dictionaries,
        }
    }

    /// The ten structured input features for the performance regressor,
    /// fitted against `records`.
    pub fn model1(records: &[StudentRecord]) -> FeatureSpec {
        FeatureSpec::fit(Self::model1_features(), "total_100", records)
    }

    /// Same inputs as `model1` but targeting the dropout flag.
    pub fn dropout(records: &[StudentRecord]) -> FeatureSpec {
        FeatureSpec::fit(Self::model1_features(), "status", records)
    }

    fn model1_features() -> Vec<FeatureDef> {
        vec![
            FeatureDef::continuous("absence_rate"),
            FeatureDef::continuous("quiz_5"),
            FeatureDef::continuous("mid1_15"),
            FeatureDef::continuous("mid2_20"),
            FeatureDef::continuous("tutorial_2"),
            FeatureDef::continuous("homework_3"),
            FeatureDef::continuous("lecture_total_45"),
            FeatureDef::continuous("lab_total_10"),
            FeatureDef::continuous("final_lab_5"),
            FeatureDef::categorical("semester"),
        ]
    }

    /// Dense feature index -> arity, for every categorical feature.
    pub fn categorical_features_info(&self) -> BTreeMap<usize, usize> {
        self.features
            .iter()
            .enumerate()
            .filter(|(_, d)| d.kind == FeatureKind::Categorical)
            .map(|(i, d)| (i, self.dictionaries.get(&d.name).map_or(0, |v| v.len())))
            .collect()
    }

    /// Dense code for a categorical level.
    pub fn encode_level(&self, feature: &str, level: &str) -> Result<usize, CatalogError> {
        self.dictionaries
            .get(feature)
            .and_then(|levels| levels.iter().position(|l| l == level))
            .ok_or_else(|| CatalogError::UnknownLevel {
                feature: feature.to_string(),
                level: level.to_string(),
            })
    }

    /// Original level for a dense code, the inverse of `encode_level`.
    pub fn decode_level(&self, feature: &str, code: usize) -> Option<&str> {
        self.dictionaries
            .get(feature)
            .and_then(|levels| levels.get(code))
            .map(|s| s.as_str())
    }

    /// Feature names in vector order, appending the sentiment column when the
    /// encoded rows will carry one.
    pub fn feature_names(&self, with_sentiment: bool) -> Vec<String> {
        let mut names: Vec<String> = self.features.iter().map(|d| d.name.clone()).collect();
        if with_sentiment {
            names.push("sentiment_score".to_string());
        }
        names
    }
}

/// Immutable snapshot of the feature metadata a trained model needs to stay
/// self-describing: names in vector order plus the frozen dictionaries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSnapshot {
    pub feature_names: Vec<String>,
    pub dictionaries: BTreeMap<String, Vec<String>>,
    pub target_name: String,
}

impl FeatureSnapshot {
    pub fn from_spec(spec: &FeatureSpec, with_sentiment: bool) -> FeatureSnapshot {
        FeatureSnapshot {
            feature_names: spec.feature_names(with_sentiment),
            dictionaries: spec.dictionaries.clone(),
            target_name: spec.target_name.clone(),
        }
    }
}

/// One encoded training row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledRow {
    pub student_id: String,
    pub features: Vec<f64>,
    pub target: f64,
}

/// Encode a record into a numeric vector in spec order. Categorical levels
/// map to their dense dictionary codes; `sentiment`, when given, is appended
/// as the final feature.
pub fn encode_features(
    record: &StudentRecord,
    sentiment: Option<f64>,
    spec: &FeatureSpec,
) -> Result<LabeledRow, CatalogError> {
    let mut features = Vec::with_capacity(spec.features.len() + 1);
    for def in &spec.features {
        let value = match def.kind {
            FeatureKind::Continuous => record
                .numeric_field(&def.name)
                .ok_or_else(|| CatalogError::UnknownField(def.name.clone()))?,
            FeatureKind::Categorical => {
                let level = record
                    .categorical_field(&def.name)
                    .ok_or_else(|| CatalogError::UnknownField(def.name.clone()))?;
                spec.encode_level(&def.name, level)? as f64
            }
        };
        features.push(value);
    }
    if let Some(s) = sentiment {
        features.push(s);
    }
    let target = record
        .numeric_field(&spec.target_name)
        .ok_or_else(|| CatalogError::MissingTarget(spec.target_name.clone()))?;
    Ok(LabeledRow {
        student_id: record.student_id.clone(),
        features,
        target,
    })
}
