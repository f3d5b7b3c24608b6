//! Lexicon sentiment scoring on the 0–4 scale.
//!
//! Feedback text is split into sentences and tokenized; tokens found in the
//! lexicon contribute their base score, adjusted by nearby negators
//! (`score' = 4 − score`) and intensifiers (a shift away from the 2.0
//! midpoint). A sentence scores the mean of its adjusted sentiment tokens, a
//! document the mean of its sentences, and the average is banded into
//! Negative / Neutral / Positive.
//!
//! Negation uses a three-token window with parity, so a second negator
//! inside the window cancels the first: "not not good" scores exactly like
//! "good". Scoring a sentiment token consumes both windows.

use crate::catalog::FeedbackDocument;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;
use thiserror::Error;

/// How many following tokens a negator or intensifier can reach.
const WINDOW: u32 = 3;

/// Midpoint of the 0–4 scale; the score of text with no sentiment tokens.
pub const NEUTRAL_SCORE: f64 = 2.0;

#[derive(Debug, Error)]
pub enum SentimentError {
    #[error("cannot read lexicon {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("lexicon line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("lexicon token {token:?} has score {score}, outside [0, 4]")]
    EntryScoreOutOfRange { token: String, score: f64 },
    #[error("intensifier {token:?} has non-positive delta {delta}")]
    NonPositiveDelta { token: String, delta: f64 },
    #[error("token {token:?} appears in more than one lexicon section")]
    OverlappingToken { token: String },
    #[error("lexicon token {token:?} can never match tokenizer output")]
    DeadToken { token: String },
    #[error("sentiment score {0} is outside the 0-4 scale")]
    ScoreOutOfRange(f64),
}

/// Sentiment band on the 0–4 scale.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum SentimentBand {
    Negative,
    Neutral,
    Positive,
}

impl SentimentBand {
    pub fn as_str(&self) -> &'static str {
        match self {
            SentimentBand::Negative => "Negative",
            SentimentBand::Neutral => "Neutral",
            SentimentBand::Positive => "Positive",
        }
    }
}

impl fmt::Display for SentimentBand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Band a 0–4 score: [0, 2) is Negative, [2, 3) Neutral, [3, 4] Positive.
pub fn band(score: f64) -> Result<SentimentBand, SentimentError> {
    if !(0.0..=4.0).contains(&score) {
        return Err(SentimentError::ScoreOutOfRange(score));
    }
    Ok(if score < 2.0 {
        SentimentBand::Negative
    } else if score < 3.0 {
        SentimentBand::Neutral
    } else {
        SentimentBand::Positive
    })
}

/// Token scores plus negator and intensifier word lists. The three token
/// sets are pairwise disjoint and every token is lowercase alphanumeric, so
/// each lexicon token is reachable from tokenizer output.
#[derive(Debug, Clone)]
pub struct Lexicon {
    entries: BTreeMap<String, f64>,
    negators: BTreeSet<String>,
    intensifiers: BTreeMap<String, f64>,
}

impl Lexicon {
    /// Parse the tab-separated lexicon format: `token<TAB>score` entry
    /// lines, `#negator token` and `#intensifier token delta` directives,
    /// and `# ...` comments.
    pub fn parse(text: &str) -> Result<Lexicon, SentimentError> {
        let mut entries = BTreeMap::new();
        let mut negators = BTreeSet::new();
        let mut intensifiers = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let parse_err = |message: String| SentimentError::Parse { line, message };
            let trimmed = raw.trim();
            if trimmed.is_empty() {
                continue;
            }
            if let Some(rest) = trimmed.strip_prefix("#negator") {
                let token = rest.trim();
                if token.is_empty() || token.contains(char::is_whitespace) {
                    return Err(parse_err("expected `#negator token`".to_string()));
                }
                negators.insert(token.to_string());
            } else if let Some(rest) = trimmed.strip_prefix("#intensifier") {
                let mut parts = rest.split_whitespace();
                let token = parts
                    .next()
                    .ok_or_else(|| parse_err("expected `#intensifier token delta`".to_string()))?;
                let delta: f64 = parts
                    .next()
                    .and_then(|d| d.parse().ok())
                    .ok_or_else(|| parse_err("expected `#intensifier token delta`".to_string()))?;
                if parts.next().is_some() {
                    return Err(parse_err("trailing text after delta".to_string()));
                }
                intensifiers.insert(token.to_string(), delta);
            } else if trimmed.starts_with('#') {
                continue; // comment
            } else {
                let (token, score) = trimmed
                    .split_once('\t')
                    .ok_or_else(|| parse_err("expected `token<TAB>score`".to_string()))?;
                let score: f64 = score
                    .trim()
                    .parse()
                    .map_err(|_| parse_err(format!("bad score {score:?}")))?;
                entries.insert(token.trim().to_string(), score);
            }
        }
        let lexicon = Lexicon {
            entries,
            negators,
            intensifiers,
        };
        lexicon.validate()?;
        Ok(lexicon)
    }

    pub fn load(path: &Path) -> Result<Lexicon, SentimentError> {
        let text = std::fs::read_to_string(path).map_err(|e| SentimentError::Io {
            path: path.display().to_string(),
            source: e,
        })?;
        Lexicon::parse(&text)
    }

    /// The education-domain lexicon shipped with the crate.
    pub fn fixture() -> Lexicon {
        Lexicon::parse(include_str!("../fixtures/lexicon.tsv"))
            .expect("bundled lexicon is valid")
    }

    fn validate(&self) -> Result<(), SentimentError> {
        for (token, &score) in &self.entries {
            if !(0.0..=4.0).contains(&score) {
                return Err(SentimentError::EntryScoreOutOfRange {
                    token: token.clone(),
                    score,
                });
            }
        }
        for (token, &delta) in &self.intensifiers {
            if !(delta > 0.0) {
                return Err(SentimentError::NonPositiveDelta {
                    token: token.clone(),
                    delta,
                });
            }
        }
        let sections: [&dyn Fn(&str) -> bool; 3] = [
            &|t| self.entries.contains_key(t),
            &|t| self.negators.contains(t),
            &|t| self.intensifiers.contains_key(t),
        ];
        let all_tokens = self
            .entries
            .keys()
            .chain(self.negators.iter())
            .chain(self.intensifiers.keys());
        for token in all_tokens {
            if sections.iter().filter(|s| s(token)).count() > 1 {
                return Err(SentimentError::OverlappingToken {
                    token: token.clone(),
                });
            }
            let reachable = !token.is_empty()
                && token
                    .chars()
                    .all(|c| c.is_alphanumeric() && !c.is_uppercase());
            if !reachable {
                return Err(SentimentError::DeadToken {
                    token: token.clone(),
                });
            }
        }
        Ok(())
    }

    pub fn entry_count(&self) -> usize {
        self.entries.len()
    }

    pub fn base_score(&self, token: &str) -> Option<f64> {
        self.entries.get(token).copied()
    }

    pub fn is_negator(&self, token: &str) -> bool {
        self.negators.contains(token)
    }

    pub fn intensifier_delta(&self, token: &str) -> Option<f64> {
        self.intensifiers.get(token).copied()
    }
}

/// Per-student scoring output.
#[derive(Debug, Clone, PartialEq)]
pub struct SentimentResult {
    pub student_id: String,
    /// (sentence text, score) in document order.
    pub sentences: Vec<(String, f64)>,
    /// Mean sentence score; 2.0 for an empty document.
    pub average: f64,
    pub category: SentimentBand,
}

/// Split on '.', '!', '?', and newlines; trim; drop empty fragments.
pub fn split_sentences(text: &str) -> Vec<String> {
    text.split(['.', '!', '?', '\n'])
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(str::to_string)
        .collect()
}

/// Lowercase tokens split on non-alphanumeric characters.
pub fn tokenize(text: &str) -> Vec<String> {
    text.to_lowercase()
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_string)
        .collect()
}

/// Score one sentence. Pure and deterministic; always within [0, 4].
pub fn score_sentence(sentence: &str, lexicon: &Lexicon) -> f64 {
    // neg_window counts how many more tokens the active negation can reach;
    // neg_parity is whether an odd number of negators is in effect.
    let mut neg_window: u32 = 0;
    let mut neg_parity = false;
    let mut intensifier: Option<(f64, u32)> = None;
    let mut scores: Vec<f64> = Vec::new();

    let tick_neg = |window: &mut u32, parity: &mut bool| {
        if *window > 0 {
            *window -= 1;
            if *window == 0 {
                *parity = false;
            }
        }
    };
    let tick_intens = |pending: &mut Option<(f64, u32)>| {
        if let Some((_, window)) = pending {
            *window -= 1;
            if *window == 0 {
                *pending = None;
            }
        }
    };

    for token in tokenize(sentence) {
        if let Some(base) = lexicon.base_score(&token) {
            let mut score = base;
            if neg_window > 0 && neg_parity {
                score = 4.0 - score;
            }
            if let Some((delta, _)) = intensifier {
                if score > 2.0 {
                    score += delta;
                } else if score < 2.0 {
                    score -= delta;
                }
                score = score.clamp(0.0, 4.0);
            }
            scores.push(score);
            neg_window = 0;
            neg_parity = false;
            intensifier = None;
        } else if lexicon.is_negator(&token) {
            neg_parity = if neg_window > 0 { !neg_parity } else { true };
            neg_window = WINDOW;
            tick_intens(&mut intensifier);
        } else if let Some(delta) = lexicon.intensifier_delta(&token) {
            intensifier = Some((delta, WINDOW));
            tick_neg(&mut neg_window, &mut neg_parity);
        } else {
            tick_neg(&mut neg_window, &mut neg_parity);
            tick_intens(&mut intensifier);
        }
    }

    if scores.is_empty() {
        NEUTRAL_SCORE
    } else {
        scores.iter().sum::<f64>() / scores.len() as f64
    }
}

/// Score a document: concatenate the answers, split into sentences, score
/// each, and average. An empty document scores 2.0 with zero sentences.
pub fn score_document(doc: &FeedbackDocument, lexicon: &Lexicon) -> SentimentResult {
    let text = doc.answers.join("\n");
    let sentences: Vec<(String, f64)> = split_sentences(&text)
        .into_iter()
        .map(|s| {
            let score = score_sentence(&s, lexicon);
            (s, score)
        })
        .collect();
    let average = if sentences.is_empty() {
        NEUTRAL_SCORE
    } else {
        sentences.iter().map(|(_, s)| s).sum::<f64>() / sentences.len() as f64
    };
    let category = band(average).expect("sentence scores stay within the scale");
    SentimentResult {
        student_id: doc.student_id.clone(),
        sentences,
        average,
        category,
    }
}
