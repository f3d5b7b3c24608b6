//! Line-oriented `key = value` configs for the cohort generator and the
//! end-to-end lab run.

use serde::Serialize;

use super::{ExperimentError, JoinPolicy};

/// Knobs for the synthetic cohort generator.
///
/// The generator plants a known effect: a latent attitude shifts each
/// student's final-exam mark by `effect_delta` points and selects which
/// sentence pool their feedback is written from, so the gain from adding
/// the sentiment feature is known by construction and `effect_delta = 0`
/// must yield no gain.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GeneratorConfig {
    pub n_students: usize,
    /// Fraction of students who answer the feedback form.
    pub response_rate: f64,
    /// (negative, neutral, positive) attitude probabilities; must sum to 1.
    pub attitude_probs: (f64, f64, f64),
    /// Final-exam points added for a positive attitude and subtracted for a
    /// negative one.
    pub effect_delta: f64,
    /// Standard deviation of the per-component mark noise, on the 0–1
    /// fraction scale.
    pub noise_sigma: f64,
    pub seed: u64,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        GeneratorConfig {
            n_students: 500,
            response_rate: 0.252,
            attitude_probs: (0.30, 0.35, 0.35),
            effect_delta: 8.0,
            noise_sigma: 0.08,
            seed: 7,
        }
    }
}

impl GeneratorConfig {
    pub fn validate(&self) -> Result<(), ExperimentError> {
        let invalid = |message: String| Err(ExperimentError::Invalid(message));
        if self.n_students == 0 {
            return invalid("n_students must be at least 1".into());
        }
        if !(0.0..=1.0).contains(&self.response_rate) {
            return invalid(format!("response_rate {} is outside [0, 1]", self.response_rate));
        }
        let (neg, neu, pos) = self.attitude_probs;
        if neg < 0.0 || neu < 0.0 || pos < 0.0 || (neg + neu + pos - 1.0).abs() > 1e-9 {
            return invalid(format!(
                "attitude probabilities ({neg}, {neu}, {pos}) must be non-negative and sum to 1"
            ));
        }
        if !(self.effect_delta >= 0.0) {
            return invalid(format!("effect_delta {} must be ≥ 0", self.effect_delta));
        }
        if !(self.noise_sigma >= 0.0) {
            return invalid(format!("noise_sigma {} must be ≥ 0", self.noise_sigma));
        }
        Ok(())
    }
}

/// Full configuration for a multi-seed comparison run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub generator: GeneratorConfig,
    /// Number of seeds; seed `i` runs the whole pipeline with base seed + i.
    pub seeds: u64,
    pub join: JoinPolicy,
    /// Train-side fraction of the holdout split.
    pub train_fraction: f64,
    pub partitions: usize,
    pub workers: usize,
    pub num_trees: usize,
    pub max_depth: usize,
    pub max_bins: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            generator: GeneratorConfig::default(),
            seeds: 5,
            join: JoinPolicy::RespondentsOnly,
            train_fraction: 0.7,
            partitions: 4,
            workers: 2,
            num_trees: 100,
            max_depth: 8,
            max_bins: 32,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), ExperimentError> {
        self.generator.validate()?;
        let invalid = |message: String| Err(ExperimentError::Invalid(message));
        if self.seeds == 0 {
            return invalid("seeds must be at least 1".into());
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return invalid(format!(
                "train_fraction {} must be strictly between 0 and 1",
                self.train_fraction
            ));
        }
        if self.partitions == 0 || self.workers == 0 {
            return invalid("partitions and workers must be at least 1".into());
        }
        if self.num_trees == 0 || self.max_depth == 0 || self.max_bins < 2 {
            return invalid("num_trees and max_depth must be ≥ 1, max_bins ≥ 2".into());
        }
        Ok(())
    }

    /// Parse the `key = value` config format. Every key is optional and
    /// falls back to the default; unknown keys are errors.
    pub fn parse(text: &str) -> Result<ExperimentConfig, ExperimentError> {
        let mut config = ExperimentConfig::default();
        for (line_no, key, value) in kv_lines(text)? {
            let fail = |message: String| ExperimentError::Parse { line: line_no, message };
            let bad = |what: &str| fail(format!("bad {what} value {value:?}"));
            match key.as_str() {
                "n_students" => {
                    config.generator.n_students =
                        value.parse().map_err(|_| bad("n_students"))?
                }
                "response_rate" => {
                    config.generator.response_rate =
                        value.parse().map_err(|_| bad("response_rate"))?
                }
                "attitude_neg" => {
                    config.generator.attitude_probs.0 =
                        value.parse().map_err(|_| bad("attitude_neg"))?
                }
                "attitude_neu" => {
                    config.generator.attitude_probs.1 =
                        value.parse().map_err(|_| bad("attitude_neu"))?
                }
                "attitude_pos" => {
                    config.generator.attitude_probs.2 =
                        value.parse().map_err(|_| bad("attitude_pos"))?
                }
                "effect_delta" => {
                    config.generator.effect_delta =
                        value.parse().map_err(|_| bad("effect_delta"))?
                }
                "noise_sigma" => {
                    config.generator.noise_sigma =
                        value.parse().map_err(|_| bad("noise_sigma"))?
                }
                "seed" => config.generator.seed = value.parse().map_err(|_| bad("seed"))?,
                "seeds" => config.seeds = value.parse().map_err(|_| bad("seeds"))?,
                "join" => config.join = value.parse().map_err(|e: String| fail(e))?,
                "train_fraction" => {
                    config.train_fraction = value.parse().map_err(|_| bad("train_fraction"))?
                }
                "partitions" => {
                    config.partitions = value.parse().map_err(|_| bad("partitions"))?
                }
                "workers" => config.workers = value.parse().map_err(|_| bad("workers"))?,
                "num_trees" => config.num_trees = value.parse().map_err(|_| bad("num_trees"))?,
                "max_depth" => config.max_depth = value.parse().map_err(|_| bad("max_depth"))?,
                "max_bins" => config.max_bins = value.parse().map_err(|_| bad("max_bins"))?,
                other => return Err(fail(format!("unknown key {other:?}"))),
            }
        }
        config.validate()?;
        Ok(config)
    }
}

/// Split a config file into (line number, key, value) triples, skipping
/// blank lines and `#` comments.
fn kv_lines(text: &str) -> Result<Vec<(usize, String, String)>, ExperimentError> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(ExperimentError::Parse {
                line: line_no,
                message: format!("expected `key = value`, got {line:?}"),
            });
        };
        out.push((line_no, key.trim().to_string(), value.trim().to_string()));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_the_pilot_cohort() {
        let config = GeneratorConfig::default();
        assert_eq!(config.n_students, 500);
        let respondents = (config.n_students as f64 * config.response_rate).round();
        assert_eq!(respondents, 126.0);
        config.validate().unwrap();
    }

    #[test]
    fn parse_overrides_and_keeps_defaults() {
        let config = ExperimentConfig::parse(
            "# lab defaults\n\
             n_students = 200\n\
             effect_delta = 0\n\
             seeds = 3\n\
             join = impute_neutral\n",
        )
        .unwrap();
        assert_eq!(config.generator.n_students, 200);
        assert_eq!(config.generator.effect_delta, 0.0);
        assert_eq!(config.seeds, 3);
        assert_eq!(config.join, JoinPolicy::ImputeNeutral);
        // Untouched keys keep their defaults.
        assert_eq!(config.generator.response_rate, 0.252);
        assert_eq!(config.num_trees, 100);
    }

    #[test]
    fn parse_rejects_unknown_keys_and_bad_values() {
        for (text, needle) in [
            ("mystery = 1\n", "unknown key"),
            ("seeds = many\n", "bad seeds"),
            ("join = sideways\n", "join policy"),
            ("n_students\n", "expected `key = value`"),
        ] {
            let err = ExperimentConfig::parse(text).unwrap_err().to_string();
            assert!(err.contains(needle), "{text:?}: {err}");
        }
    }

    #[test]
    fn validation_rejects_out_of_range_settings() {
        let mut config = GeneratorConfig::default();
        config.attitude_probs = (0.5, 0.5, 0.5);
        assert!(config.validate().is_err());

        let mut config = GeneratorConfig::default();
        config.response_rate = 1.5;
        assert!(config.validate().is_err());

        let mut config = ExperimentConfig::default();
        config.train_fraction = 1.0;
        assert!(config.validate().is_err());
    }
}
