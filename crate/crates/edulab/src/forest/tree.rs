//! Single-tree growth with canonical-order statistics.
//!
//! Every floating-point accumulation that can influence a split choice or a
//! leaf value runs over data sorted by (feature value, target) — never over
//! rows in dataset order — so a tree grown without bootstrap is a function
//! of the row *set*, not the row *sequence*.

use super::bins::FeatureBins;
use super::impurity::{ClassStats, VarStats};
use super::Task;
use crate::rng::SplitMix64;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TreeNode {
    Leaf {
        value: f64,
    },
    /// Continuous split: `x[feature] ≤ threshold` goes left.
    SplitLe {
        feature: usize,
        threshold: f64,
        left: Box<TreeNode>,
        right: Box<TreeNode>,
    },
    /// Categorical one-vs-rest split: `x[feature] == level` goes left.
    SplitEq {
        feature: usize,
        level: usize,
        left: Box<TreeNode>,
        right: Box<TreeNode>,
    },
}

impl TreeNode {
    pub fn predict(&self, x: &[f64]) -> f64 {
        match self {
            TreeNode::Leaf { value } => *value,
            TreeNode::SplitLe {
                feature,
                threshold,
                left,
                right,
            } => {
                if x[*feature] <= *threshold {
                    left.predict(x)
                } else {
                    right.predict(x)
                }
            }
            TreeNode::SplitEq {
                feature,
                level,
                left,
                right,
            } => {
                if x[*feature] == *level as f64 {
                    left.predict(x)
                } else {
                    right.predict(x)
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 0,
            TreeNode::SplitLe { left, right, .. } | TreeNode::SplitEq { left, right, .. } => {
                1 + left.depth().max(right.depth())
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Candidate {
    Le(f64),
    Eq(usize),
}

/// Borrowed training context shared by all trees of one forest.
pub(super) struct GrowContext<'a> {
    /// `columns[f][row]`: feature f of each dataset row.
    pub columns: &'a [Vec<f64>],
    pub targets: &'a [f64],
    pub bins: &'a [FeatureBins],
    pub task: Task,
    pub max_depth: usize,
    /// Features considered per node; when equal to the feature count, no
    /// RNG is consumed for subset draws.
    pub features_per_node: usize,
}

impl<'a> GrowContext<'a> {
    fn n_features(&self) -> usize {
        self.columns.len()
    }

    /// Grow a tree over `rows` (dataset indices, bootstrap duplicates
    /// allowed). `rng` is this tree's private stream.
    pub fn grow(&self, rows: &[usize], rng: &mut SplitMix64) -> TreeNode {
        self.grow_node(rows, 0, rng)
    }

    fn grow_node(&self, rows: &[usize], depth: usize, rng: &mut SplitMix64) -> TreeNode {
        if depth == self.max_depth || rows.len() < 2 || self.is_pure(rows) {
            return self.leaf(rows);
        }
        let features = self.draw_features(rng);
        match self.best_split(rows, &features) {
            Some((feature, candidate)) => {
                let (left_rows, right_rows) = self.partition(rows, feature, candidate);
                let left = self.grow_node(&left_rows, depth + 1, rng);
                let right = self.grow_node(&right_rows, depth + 1, rng);
                match candidate {
                    Candidate::Le(threshold) => TreeNode::SplitLe {
                        feature,
                        threshold,
                        left: Box::new(left),
                        right: Box::new(right),
                    },
                    Candidate::Eq(level) => TreeNode::SplitEq {
                        feature,
                        level,
                        left: Box::new(left),
                        right: Box::new(right),
                    },
                }
            }
            None => self.leaf(rows),
        }
    }

    fn draw_features(&self, rng: &mut SplitMix64) -> Vec<usize> {
        let n = self.n_features();
        if self.features_per_node >= n {
            return (0..n).collect();
        }
        let mut features = rng.sample_indices(n, self.features_per_node);
        features.sort_unstable();
        features
    }

    fn is_pure(&self, rows: &[usize]) -> bool {
        let first = self.targets[rows[0]];
        rows.iter().all(|&r| self.targets[r] == first)
    }

    /// Leaf prediction: mean target over the node (summed in sorted order)
    /// for regression, majority class with ties to 0 for classification.
    fn leaf(&self, rows: &[usize]) -> TreeNode {
        let value = match self.task {
            Task::Regression => {
                let mut ys: Vec<f64> = rows.iter().map(|&r| self.targets[r]).collect();
                ys.sort_by(f64::total_cmp);
                ys.iter().sum::<f64>() / ys.len() as f64
            }
            Task::BinaryClassification => {
                let ones = rows.iter().filter(|&&r| self.targets[r] == 1.0).count();
                let zeros = rows.len() - ones;
                if ones > zeros {
                    1.0
                } else {
                    0.0
                }
            }
        };
        TreeNode::Leaf { value }
    }

    /// Scan candidates in ascending (feature, threshold/level) order and
    /// keep the first strictly-best one. Splits that leave a side empty or
    /// fail to strictly reduce impurity are rejected.
    fn best_split(&self, rows: &[usize], features: &[usize]) -> Option<(usize, Candidate)> {
        let parent_mass = self.parent_impurity_mass(rows);
        let mut best: Option<(f64, usize, Candidate)> = None;
        for &feature in features {
            let mut pairs: Vec<(f64, f64)> = rows
                .iter()
                .map(|&r| (self.columns[feature][r], self.targets[r]))
                .collect();
            pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
            let candidates = self.feature_candidates(feature, &pairs);
            for (candidate, mass) in candidates {
                if mass < parent_mass && best.map_or(true, |(m, _, _)| mass < m) {
                    best = Some((mass, feature, candidate));
                }
            }
        }
        best.map(|(_, feature, candidate)| (feature, candidate))
    }

    /// Total child impurity mass (n·impurity summed over both sides) for
    /// every viable candidate of `feature`, in candidate order.
    fn feature_candidates(
        &self,
        feature: usize,
        pairs: &[(f64, f64)],
    ) -> Vec<(Candidate, f64)> {
        match (&self.bins[feature], self.task) {
            (FeatureBins::Continuous(thresholds), Task::Regression) => {
                let mut total = VarStats::default();
                for &(_, y) in pairs {
                    total.push(y);
                }
                let mut out = Vec::new();
                let mut prefix = VarStats::default();
                let mut idx = 0;
                for &t in thresholds {
                    while idx < pairs.len() && pairs[idx].0 <= t {
                        prefix.push(pairs[idx].1);
                        idx += 1;
                    }
                    if prefix.count == 0 || prefix.count == pairs.len() {
                        continue;
                    }
                    let mass = prefix.impurity_mass() + total.minus(&prefix).impurity_mass();
                    out.push((Candidate::Le(t), mass));
                }
                out
            }
            (FeatureBins::Continuous(thresholds), Task::BinaryClassification) => {
                let mut total = ClassStats::default();
                for &(_, y) in pairs {
                    total.push(y as usize);
                }
                let mut out = Vec::new();
                let mut prefix = ClassStats::default();
                let mut idx = 0;
                for &t in thresholds {
                    while idx < pairs.len() && pairs[idx].0 <= t {
                        prefix.push(pairs[idx].1 as usize);
                        idx += 1;
                    }
                    let n_left = prefix.total() as usize;
                    if n_left == 0 || n_left == pairs.len() {
                        continue;
                    }
                    let mass = prefix.impurity_mass() + total.minus(&prefix).impurity_mass();
                    out.push((Candidate::Le(t), mass));
                }
                out
            }
            (FeatureBins::Categorical { arity }, task) => {
                // pairs are sorted by level, so per-level stats are
                // contiguous group sweeps.
                match task {
                    Task::Regression => {
                        let mut total = VarStats::default();
                        let mut groups = vec![VarStats::default(); *arity];
                        for &(x, y) in pairs {
                            total.push(y);
                            groups[x as usize].push(y);
                        }
                        (0..*arity)
                            .filter(|&level| {
                                groups[level].count > 0 && groups[level].count < pairs.len()
                            })
                            .map(|level| {
                                let mass = groups[level].impurity_mass()
                                    + total.minus(&groups[level]).impurity_mass();
                                (Candidate::Eq(level), mass)
                            })
                            .collect()
                    }
                    Task::BinaryClassification => {
                        let mut total = ClassStats::default();
                        let mut groups = vec![ClassStats::default(); *arity];
                        for &(x, y) in pairs {
                            total.push(y as usize);
                            groups[x as usize].push(y as usize);
                        }
                        (0..*arity)
                            .filter(|&level| {
                                let c = groups[level].total() as usize;
                                c > 0 && c < pairs.len()
                            })
                            .map(|level| {
                                let mass = groups[level].impurity_mass()
                                    + total.minus(&groups[level]).impurity_mass();
                                (Candidate::Eq(level), mass)
                            })
                            .collect()
                    }
                }
            }
        }
    }

    fn parent_impurity_mass(&self, rows: &[usize]) -> f64 {
        match self.task {
            Task::Regression => {
                let mut ys: Vec<f64> = rows.iter().map(|&r| self.targets[r]).collect();
                ys.sort_by(f64::total_cmp);
                let mut stats = VarStats::default();
                for y in ys {
                    stats.push(y);
                }
                stats.impurity_mass()
            }
            Task::BinaryClassification => {
                let mut stats = ClassStats::default();
                for &r in rows {
                    stats.push(self.targets[r] as usize);
                }
                stats.impurity_mass()
            }
        }
    }

    fn partition(
        &self,
        rows: &[usize],
        feature: usize,
        candidate: Candidate,
    ) -> (Vec<usize>, Vec<usize>) {
        let goes_left = |r: usize| match candidate {
            Candidate::Le(t) => self.columns[feature][r] <= t,
            Candidate::Eq(level) => self.columns[feature][r] == level as f64,
        };
        rows.iter().copied().partition(|&r| goes_left(r))
    }
}
