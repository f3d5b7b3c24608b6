//! Data-point categories and the retention-factor taxonomy.
//!
//! The nine categories (A through I) enumerate the variables the collectors
//! are expected to deliver, from legacy student logs to financial background.
//! Each variable also maps to one of four retention factors; the mapping is
//! shipped as data here so `categorize_factor` stays a pure lookup.

use super::{CatalogError, ValueKind};
use std::collections::HashMap;
use std::sync::OnceLock;

/// Category codes A through I.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum CategoryCode {
    A,
    B,
    C,
    D,
    E,
    F,
    G,
    H,
    I,
}

impl CategoryCode {
    pub const ALL: [CategoryCode; 9] = [
        CategoryCode::A,
        CategoryCode::B,
        CategoryCode::C,
        CategoryCode::D,
        CategoryCode::E,
        CategoryCode::F,
        CategoryCode::G,
        CategoryCode::H,
        CategoryCode::I,
    ];

    pub fn as_char(&self) -> char {
        match self {
            CategoryCode::A => 'A',
            CategoryCode::B => 'B',
            CategoryCode::C => 'C',
            CategoryCode::D => 'D',
            CategoryCode::E => 'E',
            CategoryCode::F => 'F',
            CategoryCode::G => 'G',
            CategoryCode::H => 'H',
            CategoryCode::I => 'I',
        }
    }
}

/// The four retention factors a variable can load on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FactorCategory {
    AcademicIntegration,
    SocialIntegration,
    InstitutionalCommitment,
    OutOfInstitution,
}

/// One data-point category: a code, a display name, and the variables the
/// category contributes with their value kinds and factor assignments.
#[derive(Debug, Clone)]
pub struct DataPointCategory {
    pub code: CategoryCode,
    pub name: &'static str,
    pub variables: Vec<(&'static str, ValueKind, FactorCategory)>,
}

use FactorCategory::{
    AcademicIntegration as Acad, InstitutionalCommitment as Inst, OutOfInstitution as Out,
    SocialIntegration as Soc,
};
use ValueKind::{Boolean, Categorical, Numeric, Text, Timestamp};

fn build_categories() -> Vec<DataPointCategory> {
    vec![
        DataPointCategory {
            code: CategoryCode::A,
            name: "Student Logs",
            variables: vec![
                ("name", Text, Out),
                ("age", Numeric, Out),
                ("gender", Categorical, Out),
                ("location", Categorical, Out),
                ("previous_school", Categorical, Acad),
                ("school_graduation_marks", Numeric, Acad),
            ],
        },
        DataPointCategory {
            code: CategoryCode::B,
            name: "Student's Performance Statistics",
            variables: vec![
                ("gpa", Numeric, Acad),
                ("subject_internal_assessment_marks", Numeric, Acad),
                ("midterm_grades", Numeric, Acad),
                ("annual_examination_grades", Numeric, Acad),
                ("laboratory_marks", Numeric, Acad),
                ("project_marks", Numeric, Acad),
            ],
        },
        DataPointCategory {
            code: CategoryCode::C,
            name: "Student Engagement Metrics",
            variables: vec![
                ("daily_attendance", Numeric, Acad),
                ("seminar_participation", Numeric, Acad),
                ("group_study_participation", Numeric, Soc),
                ("workshop_attendance", Numeric, Acad),
                ("feedbacks_reviews", Text, Acad),
            ],
        },
        DataPointCategory {
            code: CategoryCode::D,
            name: "Student's Online Learning Engagement",
            variables: vec![
                ("lms_course_list", Text, Acad),
                ("lms_login_logout_timestamp", Timestamp, Acad),
                ("lms_duration_per_day", Numeric, Acad),
                ("lms_examination_marks", Numeric, Acad),
                ("lms_modules_completed", Numeric, Acad),
            ],
        },
        DataPointCategory {
            code: CategoryCode::E,
            name: "Past Student Achievement",
            variables: vec![
                ("student_winners", Boolean, Acad),
                ("students_marks", Numeric, Acad),
                ("student_extra_curricular_awards", Numeric, Soc),
                ("student_dropout_rate", Numeric, Acad),
            ],
        },
        DataPointCategory {
            code: CategoryCode::F,
            name: "Student's Social Network",
            variables: vec![
                ("students_study_group", Text, Soc),
                ("students_circle_of_friends", Text, Soc),
            ],
        },
        DataPointCategory {
            code: CategoryCode::G,
            name: "Student's Extra Curricular Activities",
            variables: vec![
                ("club_membership", Boolean, Soc),
                ("club_attendance", Numeric, Soc),
                ("competition_participation", Numeric, Soc),
            ],
        },
        DataPointCategory {
            code: CategoryCode::H,
            name: "Student's Health Background",
            variables: vec![
                ("is_disabled", Boolean, Out),
                ("has_chronic_disease", Boolean, Out),
            ],
        },
        DataPointCategory {
            code: CategoryCode::I,
            name: "Student's Financial Background",
            variables: vec![
                ("annual_household_income", Numeric, Out),
                ("has_loan", Boolean, Out),
                ("fee_payment_delay_record", Numeric, Out),
                ("has_scholarship", Boolean, Inst),
            ],
        },
    ]
}

/// The nine data-point categories, built once.
pub fn data_point_categories() -> &'static [DataPointCategory] {
    static CATS: OnceLock<Vec<DataPointCategory>> = OnceLock::new();
    CATS.get_or_init(build_categories)
}

fn factor_index() -> &'static HashMap<&'static str, FactorCategory> {
    static IDX: OnceLock<HashMap<&'static str, FactorCategory>> = OnceLock::new();
    IDX.get_or_init(|| {
        let mut m = HashMap::new();
        for cat in data_point_categories() {
            for &(name, _, factor) in &cat.variables {
                m.insert(name, factor);
            }
        }
        m
    })
}

/// Map a registered variable name to its retention factor.
pub fn categorize_factor(variable_name: &str) -> Result<FactorCategory, CatalogError> {
    factor_index()
        .get(variable_name)
        .copied()
        .ok_or_else(|| CatalogError::UnregisteredVariable(variable_name.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    #[test]
    fn exactly_nine_categories_a_through_i() {
        let cats = data_point_categories();
        assert_eq!(cats.len(), 9);
        for (cat, code) in cats.iter().zip(CategoryCode::ALL) {
            assert_eq!(cat.code, code);
        }
    }

    #[test]
    fn variable_names_unique_within_category() {
        for cat in data_point_categories() {
            let names: HashSet<_> = cat.variables.iter().map(|v| v.0).collect();
            assert_eq!(names.len(), cat.variables.len(), "{}", cat.name);
        }
    }

    #[test]
    fn factor_lookup_matches_taxonomy() {
        assert_eq!(
            categorize_factor("gpa").unwrap(),
            FactorCategory::AcademicIntegration
        );
        assert_eq!(
            categorize_factor("annual_household_income").unwrap(),
            FactorCategory::OutOfInstitution
        );
        assert_eq!(
            categorize_factor("students_circle_of_friends").unwrap(),
            FactorCategory::SocialIntegration
        );
        assert_eq!(
            categorize_factor("has_scholarship").unwrap(),
            FactorCategory::InstitutionalCommitment
        );
    }

    #[test]
    fn unregistered_variable_is_an_error() {
        assert!(matches!(
            categorize_factor("shoe_size"),
            Err(CatalogError::UnregisteredVariable(_))
        ));
    }
}
