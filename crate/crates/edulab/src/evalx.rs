//! Holdout splitting and model evaluation metrics.
//!
//! Regression reports carry the five headline metrics (MSE, RMSE, MAE, R²,
//! explained variance); classification reports carry a 2×2 confusion matrix
//! and the usual derived rates for the positive class. Variances are
//! population variances throughout, matching the tree-impurity definition
//! in [`crate::forest`].

use crate::rng::SplitMix64;
use serde::Serialize;
use std::fmt::Write as _;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("train fraction {0} is not strictly between 0 and 1")]
    FractionOutOfRange(f64),
    #[error("need at least 2 rows, got {n}")]
    TooFewRows { n: usize },
    #[error("train fraction leaves a {side} set empty (n = {n})")]
    DegenerateSplit { side: &'static str, n: usize },
    #[error("length mismatch: {truth} truth values vs {pred} predictions")]
    LengthMismatch { truth: usize, pred: usize },
    #[error("label at index {index} is {value}, expected 0 or 1")]
    NonBinaryLabel { index: usize, value: u8 },
}

/// Shuffle row indices with the seeded generator and cut at
/// `round(n × train_fraction)`. Both halves are returned in ascending index
/// order: the split is a pair of sets, not sequences.
pub fn split_indices(
    n: usize,
    train_fraction: f64,
    seed: u64,
) -> Result<(Vec<usize>, Vec<usize>), EvalError> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(EvalError::FractionOutOfRange(train_fraction));
    }
    if n < 2 {
        return Err(EvalError::TooFewRows { n });
    }
    let k = (n as f64 * train_fraction).round() as usize;
    if k == 0 {
        return Err(EvalError::DegenerateSplit { side: "train", n });
    }
    if k == n {
        return Err(EvalError::DegenerateSplit { side: "test", n });
    }
    let mut indices: Vec<usize> = (0..n).collect();
    let mut rng = SplitMix64::new(seed);
    rng.shuffle(&mut indices);
    let mut train = indices[..k].to_vec();
    let mut test = indices[k..].to_vec();
    train.sort_unstable();
    test.sort_unstable();
    Ok((train, test))
}

/// Split rows into (train, test) by [`split_indices`].
pub fn split<T: Clone>(
    rows: &[T],
    train_fraction: f64,
    seed: u64,
) -> Result<(Vec<T>, Vec<T>), EvalError> {
    let (train_idx, test_idx) = split_indices(rows.len(), train_fraction, seed)?;
    let take = |idx: &[usize]| idx.iter().map(|&i| rows[i].clone()).collect();
    Ok((take(&train_idx), take(&test_idx)))
}

/// Regression evaluation. `r_squared` and `explained_variance` are `None`
/// when the truth values are all equal (zero variance).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegressionReport {
    pub mse: f64,
    pub rmse: f64,
    pub mae: f64,
    pub r_squared: Option<f64>,
    pub explained_variance: Option<f64>,
    pub n: usize,
}

impl RegressionReport {
    /// Aligned text table.
    pub fn render(&self) -> String {
        let fmt_opt = |v: Option<f64>| match v {
            Some(x) => format!("{x:.6}"),
            None => "undefined (constant truth)".to_string(),
        };
        let mut out = String::new();
        let _ = writeln!(out, "rows                {}", self.n);
        let _ = writeln!(out, "mse                 {:.6}", self.mse);
        let _ = writeln!(out, "rmse                {:.6}", self.rmse);
        let _ = writeln!(out, "mae                 {:.6}", self.mae);
        let _ = writeln!(out, "r_squared           {}", fmt_opt(self.r_squared));
        let _ = writeln!(out, "explained_variance  {}", fmt_opt(self.explained_variance));
        out
    }
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn population_variance(xs: &[f64]) -> f64 {
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / xs.len() as f64
}

/// Compute the five regression metrics of `pred` against `truth`.
pub fn regression_metrics(truth: &[f64], pred: &[f64]) -> Result<RegressionReport, EvalError> {
    if truth.len() != pred.len() {
        return Err(EvalError::LengthMismatch {
            truth: truth.len(),
            pred: pred.len(),
        });
    }
    if truth.len() < 2 {
        return Err(EvalError::TooFewRows { n: truth.len() });
    }
    let n = truth.len();
    let residuals: Vec<f64> = truth.iter().zip(pred).map(|(y, p)| y - p).collect();
    let sse: f64 = residuals.iter().map(|r| r * r).sum();
    let mse = sse / n as f64;
    let mae = residuals.iter().map(|r| r.abs()).sum::<f64>() / n as f64;
    let y_mean = mean(truth);
    let sst: f64 = truth.iter().map(|y| (y - y_mean) * (y - y_mean)).sum();
    let (r_squared, explained_variance) = if sst == 0.0 {
        (None, None)
    } else {
        (
            Some(1.0 - sse / sst),
            Some(1.0 - population_variance(&residuals) / (sst / n as f64)),
        )
    };
    Ok(RegressionReport {
        mse,
        rmse: mse.sqrt(),
        mae,
        r_squared,
        explained_variance,
        n,
    })
}

/// Binary classification evaluation for the positive class (label 1).
/// A rate with a zero denominator is reported as 0 with its `*_defined`
/// flag cleared.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassificationReport {
    /// `confusion[actual][predicted]`, class order [0, 1].
    pub confusion: [[u64; 2]; 2],
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub precision_defined: bool,
    pub recall_defined: bool,
    pub f1_defined: bool,
    pub n: usize,
}

impl ClassificationReport {
    pub fn render(&self) -> String {
        let fmt_flag = |v: f64, defined: bool| {
            if defined {
                format!("{v:.6}")
            } else {
                "0 (undefined: empty denominator)".to_string()
            }
        };
        let [[tn, fp], [fn_, tp]] = self.confusion;
        let mut out = String::new();
        let _ = writeln!(out, "rows       {}", self.n);
        let _ = writeln!(out, "confusion  actual 0: [tn {tn}, fp {fp}]");
        let _ = writeln!(out, "           actual 1: [fn {fn_}, tp {tp}]");
        let _ = writeln!(out, "accuracy   {:.6}", self.accuracy);
        let _ = writeln!(out, "precision  {}", fmt_flag(self.precision, self.precision_defined));
        let _ = writeln!(out, "recall     {}", fmt_flag(self.recall, self.recall_defined));
        let _ = writeln!(out, "f1         {}", fmt_flag(self.f1, self.f1_defined));
        out
    }
}

/// Confusion matrix and derived rates of `pred` against `truth`.
pub fn classification_metrics(truth: &[u8], pred: &[u8]) -> Result<ClassificationReport, EvalError> {
    if truth.len() != pred.len() {
        return Err(EvalError::LengthMismatch {
            truth: truth.len(),
            pred: pred.len(),
        });
    }
    if truth.is_empty() {
        return Err(EvalError::TooFewRows { n: 0 });
    }
    let mut confusion = [[0u64; 2]; 2];
    for (i, (&y, &p)) in truth.iter().zip(pred).enumerate() {
        if y > 1 {
            return Err(EvalError::NonBinaryLabel { index: i, value: y });
        }
        if p > 1 {
            return Err(EvalError::NonBinaryLabel { index: i, value: p });
        }
        confusion[y as usize][p as usize] += 1;
    }
    let [[tn, fp], [fn_, tp]] = confusion;
    let n = truth.len();
    let rate = |num: u64, den: u64| -> (f64, bool) {
        if den == 0 {
            (0.0, false)
        } else {
            (num as f64 / den as f64, true)
        }
    };
    let (precision, precision_defined) = rate(tp, tp + fp);
    let (recall, recall_defined) = rate(tp, tp + fn_);
    let (f1, f1_defined) = if precision_defined && recall_defined && precision + recall > 0.0 {
        (2.0 * precision * recall / (precision + recall), true)
    } else {
        (0.0, false)
    };
    Ok(ClassificationReport {
        confusion,
        accuracy: (tn + tp) as f64 / n as f64,
        precision,
        recall,
        f1,
        precision_defined,
        recall_defined,
        f1_defined,
        n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const TOL: f64 = 1e-12;

    #[test]
    fn split_is_disjoint_and_exhaustive() {
        let (train, test) = split_indices(10, 0.7, 42).unwrap();
        assert_eq!(train.len(), 7);
        assert_eq!(test.len(), 3);
        let mut all: Vec<usize> = train.iter().chain(&test).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..10).collect::<Vec<_>>());
    }

    #[test]
    fn split_is_deterministic_per_seed() {
        assert_eq!(
            split_indices(100, 0.7, 7).unwrap(),
            split_indices(100, 0.7, 7).unwrap()
        );
        assert_ne!(
            split_indices(100, 0.7, 7).unwrap(),
            split_indices(100, 0.7, 8).unwrap()
        );
    }

    #[test]
    fn split_rejects_bad_parameters() {
        assert!(matches!(
            split_indices(10, 0.0, 1),
            Err(EvalError::FractionOutOfRange(_))
        ));
        assert!(matches!(
            split_indices(10, 1.0, 1),
            Err(EvalError::FractionOutOfRange(_))
        ));
        assert!(matches!(split_indices(1, 0.5, 1), Err(EvalError::TooFewRows { n: 1 })));
        // round(4 × 0.05) = 0 leaves the train side empty.
        assert!(matches!(
            split_indices(4, 0.05, 1),
            Err(EvalError::DegenerateSplit { side: "train", .. })
        ));
        assert!(matches!(
            split_indices(4, 0.99, 1),
            Err(EvalError::DegenerateSplit { side: "test", .. })
        ));
    }

    #[test]
    fn split_rows_matches_indices() {
        let rows: Vec<char> = "abcdefghij".chars().collect();
        let (train, test) = split(&rows, 0.7, 42).unwrap();
        let (ti, si) = split_indices(10, 0.7, 42).unwrap();
        assert_eq!(train, ti.iter().map(|&i| rows[i]).collect::<Vec<_>>());
        assert_eq!(test, si.iter().map(|&i| rows[i]).collect::<Vec<_>>());
    }

    #[test]
    fn regression_oracle_fixture() {
        let truth = [1.0, 2.0, 3.0, 4.0];
        let pred = [1.5, 2.0, 2.5, 4.0];
        let r = regression_metrics(&truth, &pred).unwrap();
        assert!((r.mse - 0.125).abs() < TOL);
        assert!((r.rmse - 0.125f64.sqrt()).abs() < TOL);
        assert!((r.mae - 0.25).abs() < TOL);
        assert!((r.r_squared.unwrap() - 0.9).abs() < TOL);
        assert!((r.explained_variance.unwrap() - 0.9).abs() < TOL);
        assert_eq!(r.n, 4);
    }

    #[test]
    fn perfect_predictor_scores_one() {
        let y = [3.0, 1.0, 4.0, 1.5];
        let r = regression_metrics(&y, &y).unwrap();
        assert_eq!(r.mse, 0.0);
        assert_eq!(r.rmse, 0.0);
        assert_eq!(r.mae, 0.0);
        assert_eq!(r.r_squared, Some(1.0));
        assert_eq!(r.explained_variance, Some(1.0));
    }

    #[test]
    fn mean_predictor_scores_zero() {
        let y = [1.0, 2.0, 3.0, 4.0];
        let pred = [2.5; 4];
        let r = regression_metrics(&y, &pred).unwrap();
        assert!(r.r_squared.unwrap().abs() < TOL);
        assert!(r.explained_variance.unwrap().abs() < TOL);
    }

    #[test]
    fn constant_truth_leaves_r2_undefined() {
        let r = regression_metrics(&[2.0, 2.0, 2.0], &[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(r.r_squared, None);
        assert_eq!(r.explained_variance, None);
        assert!(r.mse > 0.0);
    }

    #[test]
    fn regression_input_errors() {
        assert!(matches!(
            regression_metrics(&[1.0], &[1.0, 2.0]),
            Err(EvalError::LengthMismatch { truth: 1, pred: 2 })
        ));
        assert!(matches!(
            regression_metrics(&[1.0], &[1.0]),
            Err(EvalError::TooFewRows { n: 1 })
        ));
    }

    #[test]
    fn r2_invariant_under_common_shift() {
        let y = [1.0, 2.0, 3.0, 4.0];
        let pred = [1.5, 2.0, 2.5, 4.0];
        let y2: Vec<f64> = y.iter().map(|v| v + 100.0).collect();
        let p2: Vec<f64> = pred.iter().map(|v| v + 100.0).collect();
        let a = regression_metrics(&y, &pred).unwrap();
        let b = regression_metrics(&y2, &p2).unwrap();
        assert!((a.r_squared.unwrap() - b.r_squared.unwrap()).abs() < 1e-9);
    }

    #[test]
    fn explained_variance_exceeds_r2_under_biased_predictions() {
        // A constant bias inflates SSE but not the residual variance.
        let y = [1.0, 2.0, 3.0, 4.0];
        let pred: Vec<f64> = y.iter().map(|v| v + 1.0).collect();
        let r = regression_metrics(&y, &pred).unwrap();
        assert_eq!(r.explained_variance, Some(1.0));
        assert!(r.r_squared.unwrap() < 1.0);
    }

    #[test]
    fn metrics_are_permutation_invariant() {
        // Exactly representable values keep the sums order-independent.
        let y = [1.0, 2.0, 3.0, 4.0];
        let pred = [1.5, 2.0, 2.5, 4.0];
        let y_rev = [4.0, 3.0, 2.0, 1.0];
        let pred_rev = [4.0, 2.5, 2.0, 1.5];
        let a = regression_metrics(&y, &pred).unwrap();
        let b = regression_metrics(&y_rev, &pred_rev).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn classification_perfect_prediction() {
        let y = [0, 1, 0, 1, 1];
        let r = classification_metrics(&y, &y).unwrap();
        assert_eq!(r.accuracy, 1.0);
        assert_eq!(r.f1, 1.0);
        assert_eq!(r.confusion, [[2, 0], [0, 3]]);
    }

    #[test]
    fn all_negative_predictions_have_zero_recall() {
        let truth = [0, 1, 1, 0];
        let pred = [0, 0, 0, 0];
        let r = classification_metrics(&truth, &pred).unwrap();
        assert_eq!(r.recall, 0.0);
        assert!(r.recall_defined); // tp + fn = 2, the rate is genuinely 0
        assert!(!r.precision_defined); // no positive predictions at all
        assert_eq!(r.precision, 0.0);
        assert!(!r.f1_defined);
    }

    #[test]
    fn hand_counted_confusion() {
        let truth = [0, 0, 0, 1, 1, 1];
        let pred = [0, 0, 1, 0, 1, 1];
        let r = classification_metrics(&truth, &pred).unwrap();
        assert_eq!(r.confusion, [[2, 1], [1, 2]]);
        assert!((r.accuracy - 4.0 / 6.0).abs() < TOL);
        assert!((r.precision - 2.0 / 3.0).abs() < TOL);
        assert!((r.recall - 2.0 / 3.0).abs() < TOL);
    }

    #[test]
    fn non_binary_labels_rejected() {
        assert!(matches!(
            classification_metrics(&[0, 2], &[0, 1]),
            Err(EvalError::NonBinaryLabel { index: 1, value: 2 })
        ));
        assert!(matches!(
            classification_metrics(&[0, 1], &[3, 1]),
            Err(EvalError::NonBinaryLabel { index: 0, value: 3 })
        ));
    }

    #[test]
    fn reports_render_all_fields() {
        let r = regression_metrics(&[1.0, 2.0, 3.0, 4.0], &[1.5, 2.0, 2.5, 4.0]).unwrap();
        let text = r.render();
        for field in ["mse", "rmse", "mae", "r_squared", "explained_variance"] {
            assert!(text.contains(field), "missing {field}");
        }
        let c = classification_metrics(&[0, 1], &[0, 1]).unwrap();
        let text = c.render();
        for field in ["confusion", "accuracy", "precision", "recall", "f1"] {
            assert!(text.contains(field), "missing {field}");
        }
    }
}
