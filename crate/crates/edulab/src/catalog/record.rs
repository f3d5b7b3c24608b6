//! Student record and feedback document types with validation.

use serde::{Deserialize, Serialize};

/// One student's structured fields for a course offering.
///
/// Mark fields carry their maximum in the name (`quiz_5` is out of 5,
/// `mid1_15` out of 15, and so on). `lecture_total_45` is the sum of the five
/// in-lecture components and `total_100` the overall course total; both sums
/// are checked under strict validation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudentRecord {
    pub student_id: String,
    pub gpa: f64,
    pub major: String,
    pub passed_hours: u32,
    pub absence_rate: f64,
    pub quiz_5: f64,
    pub mid1_15: f64,
    pub mid2_20: f64,
    pub tutorial_2: f64,
    pub homework_3: f64,
    pub lecture_total_45: f64,
    pub lab_total_10: f64,
    pub final_lab_5: f64,
    pub final_exam: f64,
    pub total_100: f64,
    pub grade: String,
    /// 0 = continued, 1 = dropout.
    pub status: u8,
    pub semester: String,
}

/// A student's answers to the three open feedback questions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeedbackDocument {
    pub student_id: String,
    pub answers: [String; 3],
    /// Logical collection timestamp.
    pub collected_at: u64,
}

impl FeedbackDocument {
    pub fn new(student_id: impl Into<String>, answers: [String; 3], collected_at: u64) -> Self {
        FeedbackDocument {
            student_id: student_id.into(),
            answers,
            collected_at,
        }
    }

    /// True when all three answers are empty after trimming.
    pub fn is_empty(&self) -> bool {
        self.answers.iter().all(|a| a.trim().is_empty())
    }
}

/// Validation strictness. Lenient checks ranges only; strict additionally
/// checks the two sum identities.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Strictness {
    Strict,
    Lenient,
}

/// Configurable bounds that the source data never states outright: the GPA
/// scale and the final-exam maximum (100 minus the other totals).
#[derive(Debug, Clone)]
pub struct ValidationBounds {
    pub gpa_max: f64,
    pub final_exam_max: f64,
}

impl Default for ValidationBounds {
    fn default() -> Self {
        ValidationBounds {
            gpa_max: 5.0,
            final_exam_max: 40.0,
        }
    }
}

/// One rule violation found by `validate_record`. Violations are data, not
/// failures; an invalid record is reported, never rejected here.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub field: String,
    pub message: String,
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

const SUM_TOLERANCE: f64 = 1e-9;

/// Check a record against its field ranges and, under strict validation, the
/// two sum identities. Returns an empty report iff the record conforms.
pub fn validate_record(
    record: &StudentRecord,
    strictness: Strictness,
    bounds: &ValidationBounds,
) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut range = |field: &str, value: f64, max: f64| {
        if value < 0.0 {
            out.push(Violation {
                field: field.to_string(),
                message: format!("{field} is negative ({value})"),
            });
        } else if value > max {
            out.push(Violation {
                field: field.to_string(),
                message: format!("{field} exceeds {max}"),
            });
        }
    };

    range("gpa", record.gpa, bounds.gpa_max);
    range("absence_rate", record.absence_rate, 1.0);
    range("quiz_5", record.quiz_5, 5.0);
    range("mid1_15", record.mid1_15, 15.0);
    range("mid2_20", record.mid2_20, 20.0);
    range("tutorial_2", record.tutorial_2, 2.0);
    range("homework_3", record.homework_3, 3.0);
    range("lecture_total_45", record.lecture_total_45, 45.0);
    range("lab_total_10", record.lab_total_10, 10.0);
    range("final_lab_5", record.final_lab_5, 5.0);
    range("final_exam", record.final_exam, bounds.final_exam_max);
    range("total_100", record.total_100, 100.0);

    if record.student_id.is_empty() {
        out.push(Violation {
            field: "student_id".to_string(),
            message: "student_id is empty".to_string(),
        });
    }
    if record.status > 1 {
        out.push(Violation {
            field: "status".to_string(),
            message: format!("status must be 0 or 1, got {}", record.status),
        });
    }

    if strictness == Strictness::Strict {
        let lecture_sum = record.quiz_5
            + record.mid1_15
            + record.mid2_20
            + record.tutorial_2
            + record.homework_3;
        if (record.lecture_total_45 - lecture_sum).abs() > SUM_TOLERANCE {
            out.push(Violation {
                field: "lecture_total_45".to_string(),
                message: format!(
                    "lecture_total_45 ({}) != component sum ({lecture_sum})",
                    record.lecture_total_45
                ),
            });
        }
        let total_sum = record.lecture_total_45
            + record.lab_total_10
            + record.final_lab_5
            + record.final_exam;
        if (record.total_100 - total_sum).abs() > SUM_TOLERANCE {
            out.push(Violation {
                field: "total_100".to_string(),
                message: format!(
                    "total_100 ({}) != component sum ({total_sum})",
                    record.total_100
                ),
            });
        }
    }

    out
}

impl StudentRecord {
    /// Validate with default bounds.
    pub fn validate(&self, strictness: Strictness) -> Vec<Violation> {
        validate_record(self, strictness, &ValidationBounds::default())
    }

    /// Numeric view of a field, if the field exists and is numeric. `status`
    /// is exposed as 0.0/1.0 so it can serve as a classification target.
    pub fn numeric_field(&self, name: &str) -> Option<f64> {
        Some(match name {
            "gpa" => self.gpa,
            "passed_hours" => self.passed_hours as f64,
            "absence_rate" => self.absence_rate,
            "quiz_5" => self.quiz_5,
            "mid1_15" => self.mid1_15,
            "mid2_20" => self.mid2_20,
            "tutorial_2" => self.tutorial_2,
            "homework_3" => self.homework_3,
            "lecture_total_45" => self.lecture_total_45,
            "lab_total_10" => self.lab_total_10,
            "final_lab_5" => self.final_lab_5,
            "final_exam" => self.final_exam,
            "total_100" => self.total_100,
            "status" => self.status as f64,
            _ => return None,
        })
    }

    /// Categorical view of a field, if the field exists and is categorical.
    pub fn categorical_field(&self, name: &str) -> Option<&str> {
        Some(match name {
            "major" => self.major.as_str(),
            "grade" => self.grade.as_str(),
            "semester" => self.semester.as_str(),
            _ => return None,
        })
    }
}
