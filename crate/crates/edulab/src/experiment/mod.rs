//! End-to-end model comparison over synthetic cohorts.
//!
//! The pipeline mirrors a three-stage study design:
//!
//! 1. **Model 1** — regress the course total on the ten structured inputs.
//! 2. **Model 2** — score each respondent's feedback with the lexicon
//!    scorer and persist the scores (frame file + raw-store table).
//! 3. **Model 3** — rerun the regression with the sentiment score as an
//!    extra feature, paired against Model 1 on the *same* train/test rows.
//!
//! Because the cohort generator plants the attitude effect, the expected
//! outcome is known: Model 3 should beat Model 1 when `effect_delta > 0`
//! and match it when the effect is zero. The whole experiment is a pure
//! function of (generator seed, split seed, forest seed, config).

mod config;
mod generate;
mod report;

pub use config::{ExperimentConfig, GeneratorConfig};
pub use generate::{
    generate_cohort, sentence_pool, write_cohort, Attitude, CohortFiles, GeneratedCohort,
    GroundTruth,
};
pub use report::{compare, ComparisonReport, SeedOutcome};

use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::Serialize;

use crate::catalog::{
    encode_features, student_record_schema, CatalogError, FeatureSnapshot, FeatureSpec,
    LabeledRow, StudentRecord,
};
use crate::dataflow::{from_frame, from_scan, run_indexed, DataflowError, PartitionedDataset};
use crate::evalx::{regression_metrics, split_indices, EvalError, RegressionReport};
use crate::forest::{train, ForestConfig, ForestError};
use crate::ingest::{import_feedback, import_table, IngestError, FEEDBACK_TABLE};
use crate::sentiment::{score_document, Lexicon, SentimentBand, SentimentError};
use crate::storage::{
    write_frame, CellWrite, Column, ColumnTable, FrameValue, RawRow, RawStore, RowPut,
    StorageError,
};

/// Raw-store table the sentiment scores are merged into.
pub const SENTIMENT_TABLE: &str = "sentiment";

#[derive(Debug, thiserror::Error)]
pub enum ExperimentError {
    #[error("config line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("{0}")]
    Invalid(String),
    #[error("student {student_id}: {reason}")]
    BadRecord { student_id: String, reason: String },
    #[error("join produced no rows; no respondents matched the marks table")]
    EmptyJoin,
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Storage(#[from] StorageError),
    #[error(transparent)]
    Dataflow(#[from] DataflowError),
    #[error(transparent)]
    Sentiment(#[from] SentimentError),
    #[error(transparent)]
    Forest(#[from] ForestError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Catalog(#[from] CatalogError),
}

/// How Model 3 reconciles 500 marks rows with a smaller respondent set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum JoinPolicy {
    /// Inner join: train and evaluate both models on respondents only.
    RespondentsOnly,
    /// Left join: keep every student, filling 2.0 for non-respondents.
    ImputeNeutral,
}

impl JoinPolicy {
    pub fn as_str(&self) -> &'static str {
        match self {
            JoinPolicy::RespondentsOnly => "respondents_only",
            JoinPolicy::ImputeNeutral => "impute_neutral",
        }
    }
}

impl FromStr for JoinPolicy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "respondents_only" => Ok(JoinPolicy::RespondentsOnly),
            "impute_neutral" => Ok(JoinPolicy::ImputeNeutral),
            other => Err(format!(
                "unknown join policy {other:?} (want respondents_only or impute_neutral)"
            )),
        }
    }
}

/// Holdout split settings shared by every model in a comparison.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitSpec {
    /// Train-side fraction, strictly between 0 and 1.
    pub train_fraction: f64,
    pub seed: u64,
}

/// Partition/worker counts for the dataflow stages.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PipelineConfig {
    pub partitions: usize,
    pub workers: usize,
}

fn required_cell(row: &RawRow, name: &str) -> Result<String, ExperimentError> {
    row.cell_str(name)
        .map(str::to_string)
        .ok_or_else(|| ExperimentError::BadRecord {
            student_id: row.row_key.clone(),
            reason: format!("missing cell {name:?}"),
        })
}

fn numeric_cell(row: &RawRow, name: &str) -> Result<f64, ExperimentError> {
    let raw = required_cell(row, name)?;
    raw.parse().map_err(|_| ExperimentError::BadRecord {
        student_id: row.row_key.clone(),
        reason: format!("cell {name:?} is not numeric: {raw:?}"),
    })
}

fn integer_cell(row: &RawRow, name: &str) -> Result<u64, ExperimentError> {
    let value = numeric_cell(row, name)?;
    if value.fract() != 0.0 || !(0.0..=u64::MAX as f64).contains(&value) {
        return Err(ExperimentError::BadRecord {
            student_id: row.row_key.clone(),
            reason: format!("cell {name:?} is not a non-negative integer: {value}"),
        });
    }
    Ok(value as u64)
}

fn record_from_row(row: &RawRow) -> Result<StudentRecord, ExperimentError> {
    Ok(StudentRecord {
        student_id: required_cell(row, "student_id")?,
        gpa: numeric_cell(row, "gpa")?,
        major: required_cell(row, "major")?,
        passed_hours: integer_cell(row, "passed_hours")? as u32,
        absence_rate: numeric_cell(row, "absence_rate")?,
        quiz_5: numeric_cell(row, "quiz_5")?,
        mid1_15: numeric_cell(row, "mid1_15")?,
        mid2_20: numeric_cell(row, "mid2_20")?,
        tutorial_2: numeric_cell(row, "tutorial_2")?,
        homework_3: numeric_cell(row, "homework_3")?,
        lecture_total_45: numeric_cell(row, "lecture_total_45")?,
        lab_total_10: numeric_cell(row, "lab_total_10")?,
        final_lab_5: numeric_cell(row, "final_lab_5")?,
        final_exam: numeric_cell(row, "final_exam")?,
        total_100: numeric_cell(row, "total_100")?,
        grade: required_cell(row, "grade")?,
        status: integer_cell(row, "status")? as u8,
        semester: required_cell(row, "semester")?,
    })
}

/// Parse every row of an ingested marks table back into typed records,
/// ordered by student id.
pub fn load_student_records(
    store: &RawStore,
    table: &str,
) -> Result<Vec<StudentRecord>, ExperimentError> {
    store
        .scan_all(table)?
        .iter()
        .map(record_from_row)
        .collect()
}

/// Train on a split of `rows` and evaluate on the held-out remainder.
fn train_and_eval(
    rows: &[LabeledRow],
    snapshot: &FeatureSnapshot,
    split: &SplitSpec,
    forest: &ForestConfig,
) -> Result<(RegressionReport, usize), ExperimentError> {
    let (train_idx, test_idx) = split_indices(rows.len(), split.train_fraction, split.seed)?;
    let train_rows: Vec<LabeledRow> = train_idx.iter().map(|&i| rows[i].clone()).collect();
    let model = train(&train_rows, snapshot, forest)?;
    let test_features: Vec<Vec<f64>> =
        test_idx.iter().map(|&i| rows[i].features.clone()).collect();
    let predictions = model.predict_batch(&test_features)?;
    let truth: Vec<f64> = test_idx.iter().map(|&i| rows[i].target).collect();
    let report = regression_metrics(&truth, &predictions)?;
    Ok((report, test_idx.len()))
}

/// Outcome of a single-model run.
#[derive(Debug, Clone)]
pub struct ModelRun {
    pub rows: usize,
    pub test_rows: usize,
    pub report: RegressionReport,
}

/// Structured-only regression: encode the marks table with the ten-input
/// feature spec and report holdout metrics.
pub fn run_model1(
    store: &RawStore,
    marks_table: &str,
    split: &SplitSpec,
    forest: &ForestConfig,
) -> Result<ModelRun, ExperimentError> {
    let records = load_student_records(store, marks_table)?;
    let spec = FeatureSpec::model1(&records);
    let rows: Vec<LabeledRow> = records
        .iter()
        .map(|r| encode_features(r, None, &spec))
        .collect::<Result<_, _>>()?;
    let mut forest = forest.clone();
    forest.categorical_features_info = spec.categorical_features_info();
    let snapshot = FeatureSnapshot::from_spec(&spec, false);
    let (report, test_rows) = train_and_eval(&rows, &snapshot, split, &forest)?;
    Ok(ModelRun {
        rows: rows.len(),
        test_rows,
        report,
    })
}

/// Outcome of the sentiment-scoring stage.
#[derive(Debug, Clone)]
pub struct Model2Run {
    pub respondents: usize,
    /// (negative, neutral, positive) respondent counts.
    pub band_counts: [usize; 3],
    pub frame_path: PathBuf,
}

/// Score every respondent's feedback through the dataflow layer, write the
/// results as a three-column frame (`student_id`, `sentiment_score`,
/// `sentiment`), and merge them into the raw store's sentiment table.
pub fn run_model2(
    store: &mut RawStore,
    feedback_table: &str,
    lexicon: &Lexicon,
    pipeline: &PipelineConfig,
    frame_path: &Path,
) -> Result<Model2Run, ExperimentError> {
    let dataset = from_scan(store, feedback_table, pipeline.partitions, pipeline.workers)?;
    let scored = dataset.map_values(|student_id, row| {
        let answer = |q: &str| row.cell_str(q).unwrap_or("").to_string();
        let doc = crate::catalog::FeedbackDocument::new(
            student_id.clone(),
            [answer("q1"), answer("q2"), answer("q3")],
            0,
        );
        let result = score_document(&doc, lexicon);
        (result.average, result.category)
    });
    let collected = scored.collect_by_key();

    let mut band_counts = [0usize; 3];
    for (_, (_, category)) in &collected {
        let slot = match category {
            SentimentBand::Negative => 0,
            SentimentBand::Neutral => 1,
            SentimentBand::Positive => 2,
        };
        band_counts[slot] += 1;
    }

    let table = ColumnTable::new(vec![
        Column::text(
            "student_id",
            collected.iter().map(|(id, _)| id.clone()).collect(),
        ),
        Column::floats(
            "sentiment_score",
            collected.iter().map(|(_, (score, _))| *score).collect(),
        ),
        Column::text(
            "sentiment",
            collected
                .iter()
                .map(|(_, (_, category))| category.as_str().to_string())
                .collect(),
        ),
    ])?;
    write_frame(&table, frame_path)?;

    // Merge into the raw store at a fixed logical timestamp: re-scoring the
    // same respondents overwrites in place.
    store.create_table(SENTIMENT_TABLE)?;
    let puts: Vec<RowPut> = collected
        .iter()
        .map(|(id, (score, category))| {
            RowPut::new(
                id,
                vec![
                    CellWrite::new("sentiment_score", score.to_string(), 1),
                    CellWrite::new("sentiment", category.as_str(), 1),
                ],
            )
        })
        .collect();
    if !puts.is_empty() {
        store.commit_batch(SENTIMENT_TABLE, &puts)?;
    }

    Ok(Model2Run {
        respondents: collected.len(),
        band_counts,
        frame_path: frame_path.to_path_buf(),
    })
}

/// A fair paired comparison: both reports come from the same joined rows
/// and the same train/test indices.
#[derive(Debug, Clone)]
pub struct PairedRun {
    pub rows: usize,
    pub test_rows: usize,
    pub model1: RegressionReport,
    pub model3: RegressionReport,
}

impl PairedRun {
    /// Holdout R² gain of the integrated model, when both are defined.
    pub fn improvement(&self) -> Option<f64> {
        Some(self.model3.r_squared? - self.model1.r_squared?)
    }
}

/// Integrated regression: join marks with the sentiment frame under
/// `policy`, then train and evaluate Model 1 and Model 3 on identical
/// splits of the joined rows.
pub fn run_model3(
    store: &RawStore,
    marks_table: &str,
    frame_path: &Path,
    policy: JoinPolicy,
    split: &SplitSpec,
    forest: &ForestConfig,
    pipeline: &PipelineConfig,
) -> Result<PairedRun, ExperimentError> {
    let records = load_student_records(store, marks_table)?;
    let marks = PartitionedDataset::from_pairs(
        records
            .into_iter()
            .map(|r| (r.student_id.clone(), r))
            .collect(),
        pipeline.partitions,
        pipeline.workers,
    )?;
    let sentiment = from_frame(
        frame_path,
        Some(&["student_id", "sentiment_score"]),
        "student_id",
        pipeline.partitions,
        pipeline.workers,
    )?
    .map_values(|_, cells| {
        cells.iter().find_map(|(name, value)| match (name.as_str(), value) {
            ("sentiment_score", FrameValue::Float(score)) => Some(*score),
            _ => None,
        })
    });

    let null_score = |id: &str| {
        ExperimentError::Invalid(format!("sentiment frame has a null score for {id:?}"))
    };
    let joined: Vec<(StudentRecord, f64)> = match policy {
        JoinPolicy::RespondentsOnly => marks
            .join_inner(&sentiment)
            .collect_by_key()
            .into_iter()
            .map(|(id, (record, score))| Ok((record, score.ok_or_else(|| null_score(&id))?)))
            .collect::<Result<_, ExperimentError>>()?,
        JoinPolicy::ImputeNeutral => marks
            .join_left(&sentiment)
            .collect_by_key()
            .into_iter()
            .map(|(id, (record, hit))| match hit {
                Some(score) => Ok((record, score.ok_or_else(|| null_score(&id))?)),
                None => Ok((record, 2.0)),
            })
            .collect::<Result<_, ExperimentError>>()?,
    };
    if joined.is_empty() {
        return Err(ExperimentError::EmptyJoin);
    }

    let joined_records: Vec<StudentRecord> = joined.iter().map(|(r, _)| r.clone()).collect();
    let spec = FeatureSpec::model1(&joined_records);
    let mut rows1 = Vec::with_capacity(joined.len());
    let mut rows3 = Vec::with_capacity(joined.len());
    for (record, score) in &joined {
        rows1.push(encode_features(record, None, &spec)?);
        rows3.push(encode_features(record, Some(*score), &spec)?);
    }

    let mut forest = forest.clone();
    forest.categorical_features_info = spec.categorical_features_info();
    let (report1, test_rows) =
        train_and_eval(&rows1, &FeatureSnapshot::from_spec(&spec, false), split, &forest)?;
    let (report3, _) =
        train_and_eval(&rows3, &FeatureSnapshot::from_spec(&spec, true), split, &forest)?;
    Ok(PairedRun {
        rows: joined.len(),
        test_rows,
        model1: report1,
        model3: report3,
    })
}

fn forest_for(config: &ExperimentConfig, seed: u64) -> ForestConfig {
    let mut forest = ForestConfig::regression(seed);
    forest.num_trees = config.num_trees;
    forest.max_depth = config.max_depth;
    forest.max_bins = config.max_bins;
    forest
}

/// Run the full pipeline for one seed: generate, ingest, score, join,
/// train, evaluate. All artifacts land under `seed_<seed>/` in `work_dir`.
fn run_seed(
    config: &ExperimentConfig,
    work_dir: &Path,
    seed: u64,
) -> Result<SeedOutcome, ExperimentError> {
    let seed_dir = work_dir.join(format!("seed_{seed}"));
    let generator = GeneratorConfig {
        seed,
        ..config.generator.clone()
    };
    let cohort = generate_cohort(&generator)?;
    let files = write_cohort(&cohort, &seed_dir.join("data"))?;

    let mut store = RawStore::open(seed_dir.join("store"))?;
    import_table(&mut store, &files.marks, &student_record_schema(), "marks", 1)?;
    import_feedback(&mut store, &files.feedback, "marks", 1)?;

    let pipeline = PipelineConfig {
        partitions: config.partitions,
        workers: config.workers,
    };
    let lexicon = Lexicon::fixture();
    let frame_path = seed_dir.join("sentiment.laf");
    run_model2(&mut store, FEEDBACK_TABLE, &lexicon, &pipeline, &frame_path)?;

    let split = SplitSpec {
        train_fraction: config.train_fraction,
        seed,
    };
    let paired = run_model3(
        &store,
        "marks",
        &frame_path,
        config.join,
        &split,
        &forest_for(config, seed),
        &pipeline,
    )?;
    let r2 = |report: &RegressionReport, which: &str| {
        report.r_squared.ok_or_else(|| {
            ExperimentError::Invalid(format!(
                "seed {seed}: {which} r-squared is undefined (constant truth)"
            ))
        })
    };
    let r2_model1 = r2(&paired.model1, "model 1")?;
    let r2_model3 = r2(&paired.model3, "model 3")?;
    Ok(SeedOutcome {
        seed,
        rows: paired.rows,
        r2_model1,
        r2_model3,
        improvement: r2_model3 - r2_model1,
    })
}

/// Run the comparison over `config.seeds` seeds (in parallel) and fold the
/// outcomes into a report. Seed `i` uses base seed + i for generation,
/// splitting, and training alike.
pub fn run_experiment(
    config: &ExperimentConfig,
    work_dir: &Path,
) -> Result<ComparisonReport, ExperimentError> {
    config.validate()?;
    let seeds: Vec<u64> = (0..config.seeds).map(|i| config.generator.seed + i).collect();
    let workers = config.workers.min(seeds.len()).max(1);
    let results = run_indexed(seeds.len(), workers, |i| run_seed(config, work_dir, seeds[i]));
    let outcomes: Vec<SeedOutcome> = results.into_iter().collect::<Result<_, _>>()?;
    compare(config, outcomes)
}
