//! Split-candidate construction, computed once per training run from the
//! full columns.

use super::{ForestConfig, ForestError};

/// Split candidates for one feature.
#[derive(Debug, Clone, PartialEq)]
pub enum FeatureBins {
    /// Ascending thresholds; a row goes left when `x ≤ threshold`. Empty for
    /// a constant column (the feature is unusable).
    Continuous(Vec<f64>),
    /// One-vs-rest candidates, one per level; a row goes left when
    /// `x == level`.
    Categorical { arity: usize },
}

impl FeatureBins {
    pub fn candidate_count(&self) -> usize {
        match self {
            FeatureBins::Continuous(t) => t.len(),
            FeatureBins::Categorical { arity } => *arity,
        }
    }
}

/// Thresholds at the `max_bins`-quantiles of the sorted column, deduplicated
/// and excluding the maximum (a threshold at the maximum would send every
/// row left).
fn continuous_bins(values: &[f64], max_bins: usize) -> Vec<f64> {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let max = sorted[n - 1];
    let mut thresholds = Vec::new();
    for j in 1..max_bins {
        let idx = ((j * n) / max_bins).max(1) - 1;
        let t = sorted[idx];
        if t >= max {
            continue;
        }
        if thresholds.last() != Some(&t) {
            thresholds.push(t);
        }
    }
    thresholds
}

/// Candidate splits for every feature column. `columns[f]` holds feature
/// `f`'s value for every training row.
pub fn build_bins(
    columns: &[Vec<f64>],
    config: &ForestConfig,
) -> Result<Vec<FeatureBins>, ForestError> {
    let mut bins = Vec::with_capacity(columns.len());
    for (feature, column) in columns.iter().enumerate() {
        if column.is_empty() {
            return Err(ForestError::TooFewRows { n: 0 });
        }
        match config.categorical_features_info.get(&feature) {
            Some(&arity) => bins.push(FeatureBins::Categorical { arity }),
            None => bins.push(FeatureBins::Continuous(continuous_bins(
                column,
                config.max_bins,
            ))),
        }
    }
    Ok(bins)
}
