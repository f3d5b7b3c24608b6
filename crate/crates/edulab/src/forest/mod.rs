//! From-scratch random forests for performance regression and dropout
//! binary classification.
//!
//! Training is bit-reproducible: each tree draws its bootstrap sample and
//! per-node feature subsets from its own counter-derived RNG stream, split
//! candidates are evaluated in ascending (feature, threshold) order with
//! strictly-better replacement, and every statistic that feeds a float sum
//! is accumulated in a canonical sort order. Identical rows and config
//! therefore serialize to byte-identical model files, and row order never
//! changes a tree grown without bootstrap.

mod bins;
mod impurity;
mod model;
mod tree;

pub use bins::{build_bins, FeatureBins};
pub use impurity::{gini, variance_impurity};
pub use model::{load_model, save_model, train, ForestModel};

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ForestError {
    #[error("invalid config: {0}")]
    BadConfig(String),
    #[error("need at least 2 training rows, got {n}")]
    TooFewRows { n: usize },
    #[error("row {row} has {got} features, expected {expected}")]
    RowWidthMismatch {
        row: usize,
        expected: usize,
        got: usize,
    },
    #[error("row {row}: {what} is not finite")]
    NonFinite { row: usize, what: String },
    #[error("row {row}: target {value} is not a binary class label")]
    NonBinaryTarget { row: usize, value: f64 },
    #[error("row {row}: categorical feature {feature} has value {value}, expected an integer in [0, {arity})")]
    InvalidCategoricalValue {
        row: usize,
        feature: usize,
        value: f64,
        arity: usize,
    },
    #[error("categorical feature {feature} has arity {arity}, exceeding max_bins {max_bins}")]
    ArityExceedsBins {
        feature: usize,
        arity: usize,
        max_bins: usize,
    },
    #[error("prediction input has {got} features, model expects {expected}")]
    FeatureLengthMismatch { expected: usize, got: usize },
    #[error("model task is {actual}, not {requested}")]
    TaskMismatch {
        actual: &'static str,
        requested: &'static str,
    },
    #[error("impurity of an empty node is undefined")]
    EmptyImpurity,
    #[error("cannot {action} model file {path}: {source}")]
    Io {
        action: &'static str,
        path: String,
        source: std::io::Error,
    },
    #[error("model file {path} is corrupt: {reason}")]
    CorruptModel { path: String, reason: String },
    #[error("model file {path} has version {found:?}, expected {expected:?}")]
    VersionMismatch {
        path: String,
        found: String,
        expected: &'static str,
    },
}

/// What the forest predicts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    Regression,
    BinaryClassification,
}

impl Task {
    pub fn as_str(&self) -> &'static str {
        match self {
            Task::Regression => "regression",
            Task::BinaryClassification => "binary_classification",
        }
    }
}

/// How many features each node considers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureSubsetStrategy {
    /// Task-dependent convention: all features for a single tree, otherwise
    /// sqrt for classification and a third (rounded up) for regression.
    Auto,
    All,
    Sqrt,
    Log2,
    OneThird,
}

impl FeatureSubsetStrategy {
    pub fn parse(s: &str) -> Option<FeatureSubsetStrategy> {
        Some(match s {
            "auto" => FeatureSubsetStrategy::Auto,
            "all" => FeatureSubsetStrategy::All,
            "sqrt" => FeatureSubsetStrategy::Sqrt,
            "log2" => FeatureSubsetStrategy::Log2,
            "onethird" => FeatureSubsetStrategy::OneThird,
            _ => return None,
        })
    }
}

/// Forest hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestConfig {
    pub task: Task,
    pub num_trees: usize,
    pub max_depth: usize,
    pub max_bins: usize,
    pub feature_subset_strategy: FeatureSubsetStrategy,
    /// Feature index to number of levels, for one-hot-free categorical
    /// splits. Encoded values must be integers in `[0, arity)`.
    pub categorical_features_info: BTreeMap<usize, usize>,
    pub seed: u64,
    pub bootstrap: bool,
}

impl ForestConfig {
    pub fn regression(seed: u64) -> ForestConfig {
        ForestConfig::defaults(Task::Regression, seed)
    }

    pub fn classification(seed: u64) -> ForestConfig {
        ForestConfig::defaults(Task::BinaryClassification, seed)
    }

    fn defaults(task: Task, seed: u64) -> ForestConfig {
        ForestConfig {
            task,
            num_trees: 100,
            max_depth: 8,
            max_bins: 32,
            feature_subset_strategy: FeatureSubsetStrategy::Auto,
            categorical_features_info: BTreeMap::new(),
            seed,
            bootstrap: true,
        }
    }

    pub(crate) fn validate(&self, n_features: usize) -> Result<(), ForestError> {
        if self.num_trees == 0 {
            return Err(ForestError::BadConfig("num_trees must be at least 1".into()));
        }
        if self.max_depth == 0 {
            return Err(ForestError::BadConfig("max_depth must be at least 1".into()));
        }
        if self.max_bins < 2 {
            return Err(ForestError::BadConfig("max_bins must be at least 2".into()));
        }
        for (&feature, &arity) in &self.categorical_features_info {
            if feature >= n_features {
                return Err(ForestError::BadConfig(format!(
                    "categorical feature index {feature} is out of range for {n_features} features"
                )));
            }
            if arity < 2 {
                return Err(ForestError::BadConfig(format!(
                    "categorical feature {feature} has arity {arity}; need at least 2"
                )));
            }
            if arity > self.max_bins {
                return Err(ForestError::ArityExceedsBins {
                    feature,
                    arity,
                    max_bins: self.max_bins,
                });
            }
        }
        Ok(())
    }

    /// Resolve the subset strategy to a concrete k ∈ [1, n_features].
    pub fn features_per_node(&self, n_features: usize) -> usize {
        let strategy = match self.feature_subset_strategy {
            FeatureSubsetStrategy::Auto => {
                if self.num_trees == 1 {
                    FeatureSubsetStrategy::All
                } else if self.task == Task::BinaryClassification {
                    FeatureSubsetStrategy::Sqrt
                } else {
                    FeatureSubsetStrategy::OneThird
                }
            }
            other => other,
        };
        let k = match strategy {
            FeatureSubsetStrategy::All => n_features,
            FeatureSubsetStrategy::Sqrt => (n_features as f64).sqrt().floor() as usize,
            FeatureSubsetStrategy::Log2 => (n_features as f64).log2().floor() as usize,
            FeatureSubsetStrategy::OneThird => n_features.div_ceil(3),
            FeatureSubsetStrategy::Auto => unreachable!("auto resolved above"),
        };
        k.clamp(1, n_features)
    }
}
