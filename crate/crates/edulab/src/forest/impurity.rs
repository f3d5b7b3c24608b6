//! Node impurity measures: Gini for classification, population variance for
//! regression.

use super::ForestError;

/// Gini impurity `1 − Σ pᵢ²` of nonnegative class counts.
pub fn gini(counts: &[u64]) -> Result<f64, ForestError> {
    let total: u64 = counts.iter().sum();
    if total == 0 {
        return Err(ForestError::EmptyImpurity);
    }
    let total = total as f64;
    let sum_sq: f64 = counts
        .iter()
        .map(|&c| {
            let p = c as f64 / total;
            p * p
        })
        .sum();
    Ok(1.0 - sum_sq)
}

/// Population variance of targets. A singleton has zero impurity.
pub fn variance_impurity(targets: &[f64]) -> Result<f64, ForestError> {
    if targets.is_empty() {
        return Err(ForestError::EmptyImpurity);
    }
    let n = targets.len() as f64;
    let mean = targets.iter().sum::<f64>() / n;
    Ok(targets.iter().map(|t| (t - mean) * (t - mean)).sum::<f64>() / n)
}

/// Running (count, sum, sum of squares) over targets, for incremental
/// variance along a sorted sweep.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub(super) struct VarStats {
    pub count: usize,
    pub sum: f64,
    pub sum_sq: f64,
}

impl VarStats {
    pub fn push(&mut self, y: f64) {
        self.count += 1;
        self.sum += y;
        self.sum_sq += y * y;
    }

    pub fn minus(&self, other: &VarStats) -> VarStats {
        VarStats {
            count: self.count - other.count,
            sum: self.sum - other.sum,
            sum_sq: self.sum_sq - other.sum_sq,
        }
    }

    /// `n × Var = Σy² − (Σy)²/n`, floored at zero against rounding.
    pub fn impurity_mass(&self) -> f64 {
        if self.count == 0 {
            return 0.0;
        }
        (self.sum_sq - self.sum * self.sum / self.count as f64).max(0.0)
    }
}

/// Running binary class counts along a sorted sweep.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub(super) struct ClassStats {
    pub counts: [u64; 2],
}

impl ClassStats {
    pub fn push(&mut self, class: usize) {
        self.counts[class] += 1;
    }

    pub fn total(&self) -> u64 {
        self.counts[0] + self.counts[1]
    }

    pub fn minus(&self, other: &ClassStats) -> ClassStats {
        ClassStats {
            counts: [
                self.counts[0] - other.counts[0],
                self.counts[1] - other.counts[1],
            ],
        }
    }

    /// `n × Gini`, zero for an empty side.
    pub fn impurity_mass(&self) -> f64 {
        let n = self.total();
        if n == 0 {
            return 0.0;
        }
        let n = n as f64;
        let p0 = self.counts[0] as f64 / n;
        let p1 = self.counts[1] as f64 / n;
        n * (1.0 - p0 * p0 - p1 * p1)
    }
}
