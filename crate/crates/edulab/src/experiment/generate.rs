//! Synthetic cohort generator with a planted attitude effect.
//!
//! A latent ability drives every mark component; a latent attitude shifts
//! the final exam by ±`effect_delta` points and decides which sentence pool
//! the student's feedback is drawn from. Ability, attitude, mark noise,
//! respondent selection, and sentence choice each consume their own
//! counter-derived random stream, so changing how many draws one aspect
//! makes never perturbs the others and every cohort is a pure function of
//! its seed.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::catalog::{student_record_schema, FeedbackDocument, StudentRecord};
use crate::rng::SplitMix64;

use super::{ExperimentError, GeneratorConfig};

/// Latent attitude planted per student.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Attitude {
    Negative,
    Neutral,
    Positive,
}

impl Attitude {
    pub fn as_str(&self) -> &'static str {
        match self {
            Attitude::Negative => "negative",
            Attitude::Neutral => "neutral",
            Attitude::Positive => "positive",
        }
    }
}

/// Per-student hidden state, written to the ground-truth file so
/// experiments can check what the pipeline recovered.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroundTruth {
    pub student_id: String,
    pub ability: f64,
    pub attitude: Attitude,
    pub respondent: bool,
}

/// A generated cohort, in memory.
#[derive(Debug, Clone)]
pub struct GeneratedCohort {
    pub records: Vec<StudentRecord>,
    pub feedback: Vec<FeedbackDocument>,
    pub truth: Vec<GroundTruth>,
}

/// Feedback sentences whose fixture-lexicon score lands in the negative
/// band. Every pool sentence is plain course feedback built from lexicon
/// vocabulary; agreement is asserted by test, not assumed.
const NEGATIVE_POOL: [&str; 12] = [
    "The lectures were boring and the pace was exhausting",
    "Homework instructions were confusing and often unclear",
    "I hated the rushed labs",
    "The grading felt unfair and the feedback was unhelpful",
    "Material was outdated and the examples felt pointless",
    "The quizzes were a waste of time",
    "Office hours were chaotic and the staff seemed unprepared",
    "This was the worst course so far",
    "Not a good use of my time",
    "The project requirements were vague and frustrating",
    "Lectures felt monotonous and the slides were dull",
    "I was really disappointed with the disorganized schedule",
];

/// Sentences scoring in the neutral band.
const NEUTRAL_POOL: [&str; 12] = [
    "The course was okay overall",
    "Lectures were fine but the pace felt standard",
    "The workload was manageable and fairly typical",
    "Labs were alright and the material was adequate",
    "A reasonable course with a normal amount of homework",
    "The content felt standard for this level",
    "Some parts were fine and others felt moderate",
    "An okay set of lectures with typical assignments",
    "The quizzes were reasonable and the grading was adequate",
    "Nothing special but the sessions were manageable",
    "It was a typical course with standard materials",
    "The pace was normal and the topics were alright",
];

/// Sentences scoring in the positive band.
const POSITIVE_POOL: [&str; 12] = [
    "The lectures were clear and engaging",
    "I really enjoyed the practical labs",
    "The instructor was helpful and very supportive",
    "Great course with excellent examples",
    "The material was interesting and well organized",
    "Assignments were useful and the feedback was always helpful",
    "I loved the interactive sessions",
    "A wonderful experience from start to finish",
    "The labs were fun and the examples were relevant",
    "Clear explanations and a fair grading scheme",
    "The course was amazing and I would recommend it",
    "Thorough lectures with valuable practice problems",
];

/// The sentence pool an attitude draws feedback from.
pub fn sentence_pool(attitude: Attitude) -> &'static [&'static str] {
    match attitude {
        Attitude::Negative => &NEGATIVE_POOL,
        Attitude::Neutral => &NEUTRAL_POOL,
        Attitude::Positive => &POSITIVE_POOL,
    }
}

// Stream indices: one independent random stream per generated aspect.
const STREAM_ABILITY: u64 = 0;
const STREAM_ATTITUDE: u64 = 1;
const STREAM_FIELDS: u64 = 2;
const STREAM_RESPONDENTS: u64 = 3;
const STREAM_SENTENCES: u64 = 4;

fn clamp01(x: f64) -> f64 {
    x.clamp(0.0, 1.0)
}

/// Round to two decimals, the precision mark sheets are kept at.
fn round2(x: f64) -> f64 {
    (x * 100.0).round() / 100.0
}

fn round3(x: f64) -> f64 {
    (x * 1000.0).round() / 1000.0
}

fn grade_for(total: f64) -> &'static str {
    match total {
        t if t >= 90.0 => "A",
        t if t >= 80.0 => "B",
        t if t >= 70.0 => "C",
        t if t >= 60.0 => "D",
        _ => "F",
    }
}

/// Generate a cohort. Deterministic: the result is a pure function of
/// `config`.
pub fn generate_cohort(config: &GeneratorConfig) -> Result<GeneratedCohort, ExperimentError> {
    config.validate()?;
    let n = config.n_students;
    let sigma = config.noise_sigma;
    let mut ability_rng = SplitMix64::stream(config.seed, STREAM_ABILITY);
    let mut attitude_rng = SplitMix64::stream(config.seed, STREAM_ATTITUDE);
    let mut fields_rng = SplitMix64::stream(config.seed, STREAM_FIELDS);
    let mut respondents_rng = SplitMix64::stream(config.seed, STREAM_RESPONDENTS);
    let mut sentence_rng = SplitMix64::stream(config.seed, STREAM_SENTENCES);

    let respondent_count = (n as f64 * config.response_rate).round() as usize;
    let respondents: BTreeSet<usize> = respondents_rng
        .sample_indices(n, respondent_count)
        .into_iter()
        .collect();

    let (p_neg, p_neu, _) = config.attitude_probs;
    let majors = ["cs", "it", "se"];
    let semesters = ["F16", "S17"];

    let mut records = Vec::with_capacity(n);
    let mut feedback = Vec::new();
    let mut truth = Vec::with_capacity(n);
    for i in 0..n {
        let student_id = format!("s{:04}", i + 1);
        let ability = ability_rng.next_normal();
        let attitude = {
            let u = attitude_rng.next_unit();
            if u < p_neg {
                Attitude::Negative
            } else if u < p_neg + p_neu {
                Attitude::Neutral
            } else {
                Attitude::Positive
            }
        };

        // One noise draw per mark component, in fixed field order.
        let mut component = |max: f64| {
            round2(max * clamp01(0.65 + 0.15 * ability + sigma * fields_rng.next_normal()))
        };
        let quiz_5 = component(5.0);
        let mid1_15 = component(15.0);
        let mid2_20 = component(20.0);
        let tutorial_2 = component(2.0);
        let homework_3 = component(3.0);
        let lab_total_10 = component(10.0);
        let final_lab_5 = component(5.0);
        let shift = match attitude {
            Attitude::Negative => -config.effect_delta,
            Attitude::Neutral => 0.0,
            Attitude::Positive => config.effect_delta,
        };
        let final_exam = round2(
            (40.0 * clamp01(0.55 + 0.15 * ability + sigma * fields_rng.next_normal()) + shift)
                .clamp(0.0, 40.0),
        );
        let absence_rate =
            round3(clamp01(0.12 - 0.05 * ability + sigma * fields_rng.next_normal()));
        let gpa = round2((3.0 + 0.6 * ability + 0.3 * fields_rng.next_normal()).clamp(0.0, 5.0));
        let passed_hours = 30 + fields_rng.next_below(90) as u32;
        let major = majors[fields_rng.next_below(majors.len() as u64) as usize];
        let semester = semesters[fields_rng.next_below(semesters.len() as u64) as usize];
        let dropout_risk = clamp01(0.10 - 0.08 * ability);
        let status = u8::from(fields_rng.next_unit() < dropout_risk);

        // The two sum identities hold bit-exactly: the totals *are* the sums
        // of the stored component values.
        let lecture_total_45 = quiz_5 + mid1_15 + mid2_20 + tutorial_2 + homework_3;
        let total_100 = lecture_total_45 + lab_total_10 + final_lab_5 + final_exam;

        records.push(StudentRecord {
            student_id: student_id.clone(),
            gpa,
            major: major.to_string(),
            passed_hours,
            absence_rate,
            quiz_5,
            mid1_15,
            mid2_20,
            tutorial_2,
            homework_3,
            lecture_total_45,
            lab_total_10,
            final_lab_5,
            final_exam,
            total_100,
            grade: grade_for(total_100).to_string(),
            status,
            semester: semester.to_string(),
        });

        let respondent = respondents.contains(&i);
        if respondent {
            let pool = sentence_pool(attitude);
            let mut answer = || {
                let count = 3 + sentence_rng.next_below(3) as usize;
                let picks = sentence_rng.sample_indices(pool.len(), count);
                let sentences: Vec<&str> = picks.iter().map(|&p| pool[p]).collect();
                format!("{}.", sentences.join(". "))
            };
            feedback.push(FeedbackDocument::new(
                student_id.clone(),
                [answer(), answer(), answer()],
                1,
            ));
        }
        truth.push(GroundTruth {
            student_id,
            ability,
            attitude,
            respondent,
        });
    }

    Ok(GeneratedCohort {
        records,
        feedback,
        truth,
    })
}

/// File paths produced by [`write_cohort`].
#[derive(Debug, Clone)]
pub struct CohortFiles {
    pub marks: PathBuf,
    pub feedback: PathBuf,
    pub truth: PathBuf,
}

fn csv_error(path: &Path, err: csv::Error) -> ExperimentError {
    match err.into_kind() {
        csv::ErrorKind::Io(io) => ExperimentError::Io {
            path: path.to_path_buf(),
            source: io,
        },
        other => ExperimentError::Invalid(format!("{}: {other:?}", path.display())),
    }
}

/// Write a cohort as the three pipeline input files: a marks CSV matching
/// the student-record schema, a feedback CSV, and the hidden ground truth.
pub fn write_cohort(cohort: &GeneratedCohort, dir: &Path) -> Result<CohortFiles, ExperimentError> {
    fs::create_dir_all(dir).map_err(|e| ExperimentError::Io {
        path: dir.to_path_buf(),
        source: e,
    })?;
    let files = CohortFiles {
        marks: dir.join("marks.csv"),
        feedback: dir.join("feedback.csv"),
        truth: dir.join("truth.csv"),
    };

    let mut marks = csv::Writer::from_path(&files.marks)
        .map_err(|e| csv_error(&files.marks, e))?;
    let schema = student_record_schema();
    let header: Vec<&str> = schema.fields.iter().map(|f| f.name.as_str()).collect();
    let fail = |e| csv_error(&files.marks, e);
    marks.write_record(&header).map_err(fail)?;
    for r in &cohort.records {
        marks
            .write_record([
                r.student_id.as_str(),
                &r.gpa.to_string(),
                &r.major,
                &r.passed_hours.to_string(),
                &r.absence_rate.to_string(),
                &r.quiz_5.to_string(),
                &r.mid1_15.to_string(),
                &r.mid2_20.to_string(),
                &r.tutorial_2.to_string(),
                &r.homework_3.to_string(),
                &r.lecture_total_45.to_string(),
                &r.lab_total_10.to_string(),
                &r.final_lab_5.to_string(),
                &r.final_exam.to_string(),
                &r.total_100.to_string(),
                &r.grade,
                &r.status.to_string(),
                &r.semester,
            ])
            .map_err(fail)?;
    }
    marks.flush().map_err(|e| ExperimentError::Io {
        path: files.marks.clone(),
        source: e,
    })?;

    let mut fb = csv::Writer::from_path(&files.feedback)
        .map_err(|e| csv_error(&files.feedback, e))?;
    let fail = |e| csv_error(&files.feedback, e);
    fb.write_record(["student_id", "q1", "q2", "q3"]).map_err(fail)?;
    for doc in &cohort.feedback {
        fb.write_record([
            doc.student_id.as_str(),
            &doc.answers[0],
            &doc.answers[1],
            &doc.answers[2],
        ])
        .map_err(fail)?;
    }
    fb.flush().map_err(|e| ExperimentError::Io {
        path: files.feedback.clone(),
        source: e,
    })?;

    let mut gt = csv::Writer::from_path(&files.truth)
        .map_err(|e| csv_error(&files.truth, e))?;
    let fail = |e| csv_error(&files.truth, e);
    gt.write_record(["student_id", "ability", "attitude", "respondent"])
        .map_err(fail)?;
    for t in &cohort.truth {
        gt.write_record([
            t.student_id.as_str(),
            &t.ability.to_string(),
            t.attitude.as_str(),
            if t.respondent { "1" } else { "0" },
        ])
        .map_err(fail)?;
    }
    gt.flush().map_err(|e| ExperimentError::Io {
        path: files.truth.clone(),
        source: e,
    })?;

    Ok(files)
}
