//! Forest training, prediction, and the versioned model file.

use super::bins::build_bins;
use super::tree::{GrowContext, TreeNode};
use super::{ForestConfig, ForestError, Task};
use crate::catalog::{FeatureSnapshot, LabeledRow};
use crate::hash::Fnv64;
use crate::rng::SplitMix64;
use serde::{Deserialize, Serialize};
use std::path::Path;

const MODEL_VERSION: &str = "rf-1";

/// A trained forest plus the feature-space snapshot it was fitted on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    version: String,
    pub config: ForestConfig,
    pub features: FeatureSnapshot,
    trees: Vec<TreeNode>,
    /// Hash of the training rows and config, for provenance checks.
    pub training_digest: u64,
}

/// Hash of feature/target bits plus the serialized config: two models share
/// a digest exactly when they were trained from identical inputs.
fn training_digest(rows: &[LabeledRow], config: &ForestConfig) -> u64 {
    let mut hasher = Fnv64::new();
    hasher.update(&(rows.len() as u64).to_le_bytes());
    for row in rows {
        for &x in &row.features {
            hasher.update(&x.to_bits().to_le_bytes());
        }
        hasher.update(&row.target.to_bits().to_le_bytes());
    }
    let config_json = serde_json::to_vec(config).expect("config serializes");
    hasher.update(&config_json);
    hasher.finish()
}

/// Train a forest on labeled rows. Deterministic: identical rows and config
/// produce a byte-identical serialized model.
pub fn train(
    rows: &[LabeledRow],
    features: &FeatureSnapshot,
    config: &ForestConfig,
) -> Result<ForestModel, ForestError> {
    if rows.len() < 2 {
        return Err(ForestError::TooFewRows { n: rows.len() });
    }
    let n_features = features.feature_names.len();
    config.validate(n_features)?;
    for (i, row) in rows.iter().enumerate() {
        if row.features.len() != n_features {
            return Err(ForestError::RowWidthMismatch {
                row: i,
                expected: n_features,
                got: row.features.len(),
            });
        }
        if !row.target.is_finite() {
            return Err(ForestError::NonFinite {
                row: i,
                what: "target".to_string(),
            });
        }
        if config.task == Task::BinaryClassification
            && row.target != 0.0
            && row.target != 1.0
        {
            return Err(ForestError::NonBinaryTarget {
                row: i,
                value: row.target,
            });
        }
        for (f, &x) in row.features.iter().enumerate() {
            if !x.is_finite() {
                return Err(ForestError::NonFinite {
                    row: i,
                    what: format!("feature {f}"),
                });
            }
            if let Some(&arity) = config.categorical_features_info.get(&f) {
                if x.fract() != 0.0 || x < 0.0 || x >= arity as f64 {
                    return Err(ForestError::InvalidCategoricalValue {
                        row: i,
                        feature: f,
                        value: x,
                        arity,
                    });
                }
            }
        }
    }

    let columns: Vec<Vec<f64>> = (0..n_features)
        .map(|f| rows.iter().map(|r| r.features[f]).collect())
        .collect();
    let targets: Vec<f64> = rows.iter().map(|r| r.target).collect();
    let bins = build_bins(&columns, config)?;
    let ctx = GrowContext {
        columns: &columns,
        targets: &targets,
        bins: &bins,
        task: config.task,
        max_depth: config.max_depth,
        features_per_node: config.features_per_node(n_features),
    };

    let n = rows.len();
    let trees: Vec<TreeNode> = (0..config.num_trees)
        .map(|tree_index| {
            // Each tree owns a counter-derived stream; the bootstrap draws
            // come first, then any per-node feature draws.
            let mut rng = SplitMix64::stream(config.seed, tree_index as u64);
            let sample: Vec<usize> = if config.bootstrap {
                (0..n).map(|_| rng.next_below(n as u64) as usize).collect()
            } else {
                (0..n).collect()
            };
            ctx.grow(&sample, &mut rng)
        })
        .collect();

    Ok(ForestModel {
        version: MODEL_VERSION.to_string(),
        config: config.clone(),
        features: features.clone(),
        trees,
        training_digest: training_digest(rows, config),
    })
}

impl ForestModel {
    pub fn n_features(&self) -> usize {
        self.features.feature_names.len()
    }

    pub fn num_trees(&self) -> usize {
        self.trees.len()
    }

    pub fn max_tree_depth(&self) -> usize {
        self.trees.iter().map(TreeNode::depth).max().unwrap_or(0)
    }

    fn check_width(&self, x: &[f64]) -> Result<(), ForestError> {
        if x.len() != self.n_features() {
            return Err(ForestError::FeatureLengthMismatch {
                expected: self.n_features(),
                got: x.len(),
            });
        }
        Ok(())
    }

    /// Ensemble prediction: tree mean for regression, majority vote (ties
    /// to class 0) for classification.
    pub fn predict(&self, x: &[f64]) -> Result<f64, ForestError> {
        self.check_width(x)?;
        match self.config.task {
            Task::Regression => {
                let sum: f64 = self.trees.iter().map(|t| t.predict(x)).sum();
                Ok(sum / self.trees.len() as f64)
            }
            Task::BinaryClassification => {
                let ones = self
                    .trees
                    .iter()
                    .filter(|t| t.predict(x) == 1.0)
                    .count();
                let zeros = self.trees.len() - ones;
                Ok(if ones > zeros { 1.0 } else { 0.0 })
            }
        }
    }

    /// Classification prediction as a label. Errors on regression models.
    pub fn predict_class(&self, x: &[f64]) -> Result<u8, ForestError> {
        if self.config.task != Task::BinaryClassification {
            return Err(ForestError::TaskMismatch {
                actual: self.config.task.as_str(),
                requested: "binary_classification",
            });
        }
        Ok(self.predict(x)? as u8)
    }

    pub fn predict_batch(&self, rows: &[Vec<f64>]) -> Result<Vec<f64>, ForestError> {
        rows.iter().map(|x| self.predict(x)).collect()
    }

    /// Serialized model document, stable down to the byte for a fixed model.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serializes")
    }
}

/// Write the model as a versioned JSON document.
pub fn save_model(model: &ForestModel, path: &Path) -> Result<(), ForestError> {
    std::fs::write(path, model.to_json()).map_err(|e| ForestError::Io {
        action: "write",
        path: path.display().to_string(),
        source: e,
    })
}

/// Read a model document, checking the format version.
pub fn load_model(path: &Path) -> Result<ForestModel, ForestError> {
    let text = std::fs::read_to_string(path).map_err(|e| ForestError::Io {
        action: "read",
        path: path.display().to_string(),
        source: e,
    })?;
    let model: ForestModel =
        serde_json::from_str(&text).map_err(|e| ForestError::CorruptModel {
            path: path.display().to_string(),
            reason: e.to_string(),
        })?;
    if model.version != MODEL_VERSION {
        return Err(ForestError::VersionMismatch {
            path: path.display().to_string(),
            found: model.version,
            expected: MODEL_VERSION,
        });
    }
    Ok(model)
}
